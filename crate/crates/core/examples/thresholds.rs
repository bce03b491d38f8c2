// Prints how the link thresholds tighten as subclusters grow.

use links::thresholds::{s_pair, s_single, s_tilde_pair, s_tilde_single};
use std::error::Error;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (t_c, t_p) = (0.8, 0.9);
    println!("T_c = {t_c}, T_p = {t_p}");
    println!(
        "{:>10} {:>10} {:>10} {:>10} {:>10}",
        "k", "s(k)", "s~(k)", "s(k,k)", "s~(k,k)"
    );
    for k in [1u64, 2, 4, 8, 16, 64, 1_000, 1_000_000] {
        println!(
            "{k:>10} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            s_single(k, t_c)?,
            s_tilde_single(k, t_c, t_p)?,
            s_pair(k, k, t_c)?,
            s_tilde_pair(k, k, t_c, t_p)?
        );
    }
    // A single vector against a large subcluster tends to T_c; two large
    // subclusters tend to 1, which the interpolated form caps at T_p.
    assert!((s_single(1_000_000_000, t_c)? - t_c).abs() < 1e-6);
    assert!((s_tilde_pair(1_000_000_000, 1_000_000_000, t_c, t_p)? - t_p).abs() < 1e-6);
    for k in 1..64 {
        assert!(s_single(k + 1, t_c)? > s_single(k, t_c)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
