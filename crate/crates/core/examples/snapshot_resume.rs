// Stops a clusterer halfway through a stream, saves it to JSON, restores it
// and checks the continuation matches an uninterrupted run.

use links::hypersphere::{generate_labeled_stream, CenterLayout, GenerativeParams};
use links::{restore, LinksClusterer, LinksConfig};
use std::error::Error;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let params = GenerativeParams {
        dimension: 32,
        sigma: 0.08,
        num_clusters: 5,
        points_per_cluster: 40,
        seed: 5,
        layout: CenterLayout::Uniform,
    };
    let stream = generate_labeled_stream(&params)?;
    let config = LinksConfig::new(32, 0.75, 0.7, 0.85);
    let (head, tail) = stream.records.split_at(120);

    let mut reference = LinksClusterer::new(config.clone())?;
    let mut first = LinksClusterer::new(config)?.with_seed(5);
    for rec in head {
        reference.add_vector(&rec.vector)?;
        first.add_vector(&rec.vector)?;
    }
    let json = first.snapshot_json();
    println!(
        "snapshot after {} vectors: {} bytes",
        first.ingested_count(),
        json.len()
    );
    println!("{}", json.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("...");

    let mut resumed = restore(&json)?;
    let mut same = 0;
    for rec in tail {
        let a = reference.add_vector(&rec.vector)?;
        let b = resumed.add_vector(&rec.vector)?;
        assert_eq!(a, b);
        same += 1;
    }
    println!(
        "{same} continuation results identical; final clusters {}",
        resumed.stats().clusters
    );
    assert_eq!(resumed.snapshot().graph, reference.snapshot().graph);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
