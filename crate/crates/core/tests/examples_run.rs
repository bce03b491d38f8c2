//! Runs every example in `examples/` so that they stay correct.

#[allow(dead_code)]
mod stream_identities {
    include!("../examples/stream_identities.rs");
}

#[allow(dead_code)]
mod thresholds {
    include!("../examples/thresholds.rs");
}

#[allow(dead_code)]
mod hypersphere_lemmas {
    include!("../examples/hypersphere_lemmas.rs");
}

#[allow(dead_code)]
mod split_and_rejoin {
    include!("../examples/split_and_rejoin.rs");
}

#[allow(dead_code)]
mod matched_accuracy {
    include!("../examples/matched_accuracy.rs");
}

#[allow(dead_code)]
mod tune_grid {
    include!("../examples/tune_grid.rs");
}

#[allow(dead_code)]
mod snapshot_resume {
    include!("../examples/snapshot_resume.rs");
}

#[test]
fn stream_identities_example_runs() {
    stream_identities::run_example().unwrap();
}

#[test]
fn thresholds_example_runs() {
    thresholds::run_example().unwrap();
}

#[test]
fn hypersphere_lemmas_example_runs() {
    hypersphere_lemmas::run_example().unwrap();
}

#[test]
fn split_and_rejoin_example_runs() {
    split_and_rejoin::run_example().unwrap();
}

#[test]
fn matched_accuracy_example_runs() {
    matched_accuracy::run_example().unwrap();
}

#[test]
fn tune_grid_example_runs() {
    tune_grid::run_example().unwrap();
}

#[test]
fn snapshot_resume_example_runs() {
    snapshot_resume::run_example().unwrap();
}
