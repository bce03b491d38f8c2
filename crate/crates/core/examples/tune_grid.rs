// Threshold calibration on the reference synthetic stream: N = 128,
// 20 clusters of 50 points, σ = 0.05, centres on a random regular simplex.
// T_c is fixed at cos θ_c; T_s and T_p are swept.

use links::eval::{tune_grid, TuningGrid};
use links::hypersphere::{generate_separated, theta_mode, CenterLayout, GenerativeParams};
use links::LinksConfig;
use std::error::Error;

pub fn reference_stream() -> Result<Vec<(usize, links::UnitVector)>, Box<dyn Error>> {
    let params = GenerativeParams {
        dimension: 128,
        sigma: 0.05,
        num_clusters: 20,
        points_per_cluster: 50,
        seed: 2024,
        layout: CenterLayout::Simplex,
    };
    let theta_c = theta_mode(128, 0.05)?;
    let stream = generate_separated(&params, 3.0 * theta_c, 16)?;
    Ok(stream
        .records
        .into_iter()
        .map(|r| (r.label, r.vector))
        .collect())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let stream = reference_stream()?;
    let t_c = theta_mode(128, 0.05)?.cos();
    let grid = TuningGrid {
        t_c: vec![t_c],
        t_s: vec![0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9],
        t_p: vec![0.8, 0.86, 0.9, 0.95],
        base: LinksConfig::new(128, t_c, 0.6, 0.9),
    };
    let report = tune_grid(&grid, &stream)?;
    println!("T_c = {t_c:.6}");
    println!(
        "{:>6} {:>6} {:>9} {:>9}",
        "T_s", "T_p", "accuracy", "clusters"
    );
    for (i, row) in report.rows.iter().enumerate() {
        let mark = if i == report.best { " <- best" } else { "" };
        println!(
            "{:>6} {:>6} {:>9.4} {:>9}{mark}",
            row.t_s, row.t_p, row.accuracy, row.clusters_found
        );
    }
    for s in &report.skipped {
        println!("skipped T_s={} T_p={}: {}", s.t_s, s.t_p, s.reason);
    }
    assert!(report.best_row().accuracy >= 0.95);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
