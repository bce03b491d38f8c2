// A three-node chain a - b - c where one more vector pulls b's centroid away
// from c. In the first case a can still reach c and the cluster survives
// with a new edge; in the second it cannot and c splits off.

use links::{LinksClusterer, LinksConfig, UnitVector};
use std::error::Error;

fn show(label: &str, c: &LinksClusterer) {
    let g = c.graph();
    let edges: Vec<String> = g.edges().map(|(i, j)| format!("{i}-{j}")).collect();
    println!(
        "  {label}: edges [{}], clusters {:?}",
        edges.join(", "),
        g.components()
    );
}

fn run_case(
    name: &str,
    a: [f64; 4],
    c: [f64; 4],
    x: [f64; 4],
) -> Result<LinksClusterer, Box<dyn Error>> {
    println!("{name}");
    let mut clusterer = LinksClusterer::new(LinksConfig::new(4, 0.8, 0.95, 0.9))?;
    let b = clusterer.add_raw(&[1.0, 0.0, 0.0, 0.0])?;
    // c arrives before a so that its nearest node is b.
    let c = clusterer.add_vector(&UnitVector::new(&c)?)?;
    let a = clusterer.add_vector(&UnitVector::new(&a)?)?;
    println!(
        "  b = {}, a = {}, c = {}",
        b.subcluster_id, a.subcluster_id, c.subcluster_id
    );
    show("before", &clusterer);
    let r = clusterer.add_vector(&UnitVector::new(&x)?)?;
    println!(
        "  x joined {} : merges {}, edges removed {}, rejoins {}",
        r.subcluster_id, r.merges_performed, r.edges_removed, r.rejoins
    );
    show("after", &clusterer);
    clusterer.check_invariants()?;
    Ok(clusterer)
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let kept = run_case(
        "rejoin",
        [0.8836, -0.3132, -0.3393, 0.0775],
        [0.6875, -0.6633, -0.0939, -0.2803],
        [0.9878, 0.1474, 0.0493, 0.0085],
    )?;
    assert_eq!(kept.stats().clusters, 1);

    let split = run_case(
        "permanent split",
        [0.8892, 0.1169, -0.1184, -0.4263],
        [0.6812, -0.4289, -0.4537, 0.3823],
        [0.9913, -0.0111, 0.1293, -0.02],
    )?;
    assert_eq!(split.stats().clusters, 2);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
