// Scores predicted ids against ground truth under the best one-to-one
// relabelling.

use links::{hungarian_max_assignment, match_labels};
use std::error::Error;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let scores = vec![
        vec![4.0, 1.0, 3.0],
        vec![2.0, 0.0, 5.0],
        vec![3.0, 2.0, 2.0],
    ];
    let a = hungarian_max_assignment(&scores)?;
    println!("assignment {:?}, score {}", a.pairs, a.score);
    assert_eq!(a.score, 11.0);

    // Cluster 7 was fractured into 7 and 9; the extra id cannot be matched.
    let predicted = [7, 7, 9, 3, 3, 3, 7, 9];
    let truth = ["dog", "dog", "dog", "cat", "cat", "cat", "dog", "dog"];
    let report = match_labels(&predicted, &truth)?;
    println!(
        "accuracy {}/{} = {:.3}, mapping {:?}",
        report.correct, report.total, report.accuracy, report.mapping
    );
    assert_eq!(report.correct, 6);

    let conflated = [1, 1, 1, 1];
    let truth = ["a", "a", "b", "c"];
    let report = match_labels(&conflated, &truth)?;
    println!("everything in one id: accuracy {:.3}", report.accuracy);
    assert_eq!(report.accuracy, 0.5);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
