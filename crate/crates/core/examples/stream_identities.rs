// Streams a synthetic labeled dataset through the clusterer, printing the
// id and action for the first records and a summary at the end.

use links::hypersphere::{generate_labeled_stream, theta_mode, CenterLayout, GenerativeParams};
use links::{matched_accuracy, Action, LinksClusterer, LinksConfig};
use std::collections::BTreeMap;
use std::error::Error;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let params = GenerativeParams {
        dimension: 64,
        sigma: 0.05,
        num_clusters: 8,
        points_per_cluster: 40,
        seed: 11,
        layout: CenterLayout::Uniform,
    };
    let stream = generate_labeled_stream(&params)?;
    let t_c = theta_mode(params.dimension, params.sigma)?.cos();
    println!("theta_c = {:.4} rad, T_c = {t_c:.4}", t_c.acos());

    let mut clusterer = LinksClusterer::new(LinksConfig::new(params.dimension, t_c, 0.6, 0.9))?;
    let mut actions: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted = Vec::new();
    for (i, rec) in stream.records.iter().enumerate() {
        let r = clusterer.add_vector(&rec.vector)?;
        if i < 12 {
            println!(
                "#{i:<3} label {:<2} -> cluster {:<3} {}",
                rec.label,
                r.cluster_id,
                r.action.as_str()
            );
        }
        *actions.entry(r.action.as_str()).or_default() += 1;
        predicted.push(r.cluster_id);
    }
    let stats = clusterer.stats();
    println!("...");
    println!(
        "{} vectors, {} clusters, {} subclusters, {} edges",
        stats.vectors, stats.clusters, stats.subclusters, stats.edges
    );
    for (action, n) in &actions {
        println!("  {action}: {n}");
    }
    let accuracy = matched_accuracy(&predicted, &stream.labels())?;
    println!("matched accuracy of streamed ids: {accuracy:.4}");
    assert!(accuracy > 0.9);
    assert!(actions.contains_key(Action::JoinedSubcluster.as_str()));
    clusterer.check_invariants()?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
