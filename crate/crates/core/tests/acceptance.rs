//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use common::{brute_force, random_unit, Harness, Shadow};
use links::hypersphere::{
    generate_labeled_stream, generate_separated, sample_uniform_sphere, theta_mode,
    AngularGaussian, CenterLayout, GenerativeParams, UnitVector,
};
use links::thresholds::{s_pair, s_single, s_tilde_pair, s_tilde_single};
use links::{hungarian_max_assignment, matched_accuracy, LinksClusterer, LinksConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn identities() -> Check {
    let mut ks: Vec<u64> = (1..=64).collect();
    ks.extend([1_000, 1_000_000]);
    let mut worst = 0.0f64;
    for tc in [0.3, 0.5, 0.8, 0.95] {
        let tc2 = tc * tc;
        let tp = (tc2 + 1.0) / 2.0;
        let mut gap = |a: f64, b: f64| worst = worst.max((a - b).abs());
        gap(s_single(1, tc).unwrap(), tc2);
        gap(s_pair(1, 1, tc).unwrap(), tc2);
        gap(s_tilde_pair(1, 1, tc, tp).unwrap(), tc2);
        for &k in &ks {
            gap(s_pair(k, 1, tc).unwrap(), s_single(k, tc).unwrap());
            gap(
                s_tilde_single(k, tc, tp).unwrap(),
                s_tilde_pair(k, 1, tc, tp).unwrap(),
            );
            for &k2 in &[1, 2, 7, 64, 1_000_000] {
                gap(
                    s_tilde_pair(k, k2, tc, 1.0).unwrap(),
                    s_pair(k, k2, tc).unwrap(),
                );
            }
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn limits() -> Check {
    let big = 1_000_000_000;
    let mut worst = 0.0f64;
    for tc in [0.3, 0.5, 0.8, 0.95] {
        let tp = (tc * tc + 1.0) / 2.0;
        worst = worst.max((s_single(big, tc).unwrap() - tc).abs());
        worst = worst.max((s_tilde_pair(big, big, tc, tp).unwrap() - tp).abs());
        let mut prev = 0.0;
        let mut k = 1.0f64;
        while k < 1e12 {
            let s = s_single(k as u64, tc).unwrap();
            ensure(s >= prev, format!("s(k) decreases at k={k}, T_c={tc}"))?;
            prev = s;
            k *= 1.25;
            k = k.ceil();
        }
    }
    ensure(worst < 1e-6, format!("limit gap {worst:e}"))?;
    Ok(format!("limit gap {worst:.1e}, s(k) monotone on log grid"))
}

// Angular marginal at N = 128, σ = 0.05, from 30-digit quadrature.
const MEAN_THETA: f64 = 0.534_472_683_592_324;

fn lemmas() -> Check {
    let (n, trials) = (128, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let mut tail = 0;
    for _ in 0..trials {
        let u = sample_uniform_sphere(n, &mut rng).unwrap();
        let v = sample_uniform_sphere(n, &mut rng).unwrap();
        let d: f64 = u
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        tail += usize::from(d.abs() > 0.3);
    }
    let tail_frac = tail as f64 / trials as f64;
    ensure(tail_frac < 1e-3, format!("perpendicular tail {tail_frac}"))?;

    let model = AngularGaussian::new(n, 0.05).unwrap();
    let angles: Vec<f64> = (0..trials).map(|_| model.sample_angle(&mut rng)).collect();
    let mean = angles.iter().sum::<f64>() / trials as f64;
    let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    ensure(sd < 0.15 * mean, format!("angle sd {sd} vs mean {mean}"))?;
    let rel = (mean / MEAN_THETA - 1.0).abs();
    ensure(
        rel < 0.01,
        format!("angle mean {mean} off quadrature by {rel}"),
    )?;

    let center = random_unit(n, &mut rng);
    let tangent = |x: &UnitVector| -> Vec<f64> {
        let d: f64 = x
            .as_slice()
            .iter()
            .zip(center.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        x.as_slice()
            .iter()
            .zip(center.as_slice())
            .map(|(a, b)| a - d * b)
            .collect()
    };
    let mut mean_cos = 0.0;
    for _ in 0..trials {
        let a = tangent(&model.sample_point(&center, &mut rng).unwrap());
        let b = tangent(&model.sample_point(&center, &mut rng).unwrap());
        let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        let na = a.iter().map(|p| p * p).sum::<f64>().sqrt();
        let nb = b.iter().map(|p| p * p).sum::<f64>().sqrt();
        mean_cos += (dot / (na * nb)).abs() / trials as f64;
    }
    ensure(mean_cos < 0.15, format!("tangential mean |cos| {mean_cos}"))?;
    Ok(format!(
        "tail {tail_frac:.1e}, mean θ {mean:.4} ({:.2}% off), sd/mean {:.3}, tangential |cos| {mean_cos:.3}",
        rel * 100.0,
        sd / mean
    ))
}

fn hungarian() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut square7 = 0;
    for _ in 0..200 {
        let (r, c) = (rng.random_range(1..=7), rng.random_range(1..=7));
        square7 += usize::from(r == 7 && c == 7);
        let m: Vec<Vec<f64>> = (0..r)
            .map(|_| (0..c).map(|_| rng.random_range(-20..=20) as f64).collect())
            .collect();
        let got = hungarian_max_assignment(&m).map_err(|e| e.to_string())?;
        let (want, _) = brute_force(&m);
        ensure(got.score == want, format!("{m:?}: {} vs {want}", got.score))?;
    }
    Ok(format!(
        "200 matrices up to 7x7 ({square7} full 7x7) match brute force"
    ))
}

fn components() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut steps = 0;
    for _ in 0..200 {
        let mut h = Harness::new();
        for _ in 0..120 {
            h.step(&mut rng);
            steps += 1;
        }
    }
    Ok(format!(
        "{steps} mutations, partition equals brute-force labelling after each"
    ))
}

fn mixed_stream(total: usize, seed: u64) -> Vec<UnitVector> {
    // Tight and loose clusters interleaved, plus uniform noise.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models: Vec<AngularGaussian> = [0.05, 0.06, 0.07]
        .iter()
        .map(|&s| AngularGaussian::new(128, s).unwrap())
        .collect();
    let centers: Vec<UnitVector> = (0..20).map(|_| random_unit(128, &mut rng)).collect();
    (0..total)
        .map(|_| {
            if rng.random_bool(0.02) {
                random_unit(128, &mut rng)
            } else {
                let c = rng.random_range(0..centers.len());
                models[c % 3].sample_point(&centers[c], &mut rng).unwrap()
            }
        })
        .collect()
}

/// Edge validity and count conservation, using the free threshold functions.
fn check_edges(c: &LinksClusterer) -> Result<(), String> {
    let cfg = c.config();
    let g = c.graph();
    g.edges().try_for_each(|(i, j)| {
        let (a, b) = (g.subcluster(i).unwrap(), g.subcluster(j).unwrap());
        let sim: f64 = a
            .centroid()
            .as_slice()
            .iter()
            .zip(b.centroid().as_slice())
            .map(|(p, q)| p * q)
            .sum();
        let need = s_tilde_pair(a.count(), b.count(), cfg.cluster_threshold, cfg.pair_max).unwrap();
        ensure(sim >= need, format!("edge {i}-{j}: {sim} < {need}"))?;
        ensure(
            sim < cfg.subcluster_threshold,
            format!("edge {i}-{j}: {sim} >= T_s"),
        )
    })?;
    let total: u64 = g.subclusters().map(|s| s.count()).sum();
    ensure(
        total == c.ingested_count(),
        format!("{total} vectors held, {} ingested", c.ingested_count()),
    )
}

fn fuzz_invariants() -> Check {
    let xs = mixed_stream(10_000, 6);
    let config = LinksConfig::new(128, 0.8, 0.8, 0.9);
    let mut c = LinksClusterer::new(config).unwrap();
    let (mut merges, mut removed, mut rejoins) = (0, 0, 0);
    let mut checking = Duration::ZERO;
    for (i, x) in xs.iter().enumerate() {
        let r = c.add_vector(x).map_err(|e| e.to_string())?;
        let t = Instant::now();
        merges += r.merges_performed;
        removed += r.edges_removed;
        rejoins += r.rejoins;
        check_edges(&c).map_err(|e| format!("after add {i}: {e}"))?;
        if i % 250 == 0 {
            c.check_invariants()
                .map_err(|e| format!("after add {i}: {e}"))?;
        }
        checking += t.elapsed();
    }
    c.check_invariants()?;
    let s = c.stats();
    ensure(s.vectors == 10_000, "vector count")?;
    Ok(format!(
        "10000 adds, {} clusters, {} subclusters, {} edges; {merges} merges, {removed} edge removals, {rejoins} rejoins; {checking:.1?} spent checking",
        s.clusters, s.subclusters, s.edges
    ))
}

// Calibration (the `tune_grid` example, seed 2024): T_s ∈ {0.5, 0.6} scores
// 1.0 for every T_p tried; 0.7 gives 0.999, 0.75 gives 0.977.
const RECOVERY_TS: f64 = 0.6;
const RECOVERY_TP: f64 = 0.9;
const RECOVERY_FROZEN: f64 = 1.0;

fn recovery() -> Check {
    let theta_c = theta_mode(128, 0.05).unwrap();
    let params = GenerativeParams {
        dimension: 128,
        sigma: 0.05,
        num_clusters: 20,
        points_per_cluster: 50,
        seed: 2024,
        layout: CenterLayout::Simplex,
    };
    let stream = generate_separated(&params, 3.0 * theta_c, 16).map_err(|e| e.to_string())?;
    let separation = stream.min_center_angle().unwrap();
    let config = LinksConfig::new(128, theta_c.cos(), RECOVERY_TS, RECOVERY_TP);
    let mut c = LinksClusterer::new(config).unwrap();
    let mut shadow = Shadow::default();
    let mut emitted = Vec::new();
    for rec in &stream.records {
        let r = c.add_vector(&rec.vector).map_err(|e| e.to_string())?;
        emitted.push(r.cluster_id);
        shadow.record(&r);
    }
    let labels = stream.labels();
    let accuracy = matched_accuracy(&emitted, &labels).map_err(|e| e.to_string())?;
    ensure(accuracy >= 0.95, format!("accuracy {accuracy}"))?;
    ensure(
        accuracy >= RECOVERY_FROZEN,
        format!("accuracy {accuracy} below calibrated {RECOVERY_FROZEN}"),
    )?;
    let finals = shadow.clusters(c.graph());
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            ensure(
                (labels[i] == labels[j]) == (finals[i] == finals[j]),
                format!("records {i} and {j} are grouped wrongly"),
            )?;
        }
    }
    Ok(format!(
        "accuracy {accuracy:.4}, min centre angle {separation:.4} > 3θ_c = {:.4}, T_c {:.6}",
        3.0 * theta_c,
        theta_c.cos()
    ))
}

fn cli(args: &[&str], input: &str) -> Result<String, String> {
    let mut argv = vec!["links"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = links::cli::run(argv, &mut Cursor::new(input.as_bytes()), &mut out, &mut err);
    if code != 0 {
        return Err(format!(
            "{args:?} exited {code}: {}",
            String::from_utf8_lossy(&err)
        ));
    }
    Ok(String::from_utf8(out).unwrap())
}

fn determinism() -> Check {
    let data = cli(&["generate", "--layout", "simplex", "--seed", "77"], "")?;
    ensure(
        data == cli(&["generate", "--layout", "simplex", "--seed", "77"], "")?,
        "generate differs",
    )?;
    let flags = [
        "cluster", "--tc", "0.8", "--ts", "0.85", "--tp", "0.9", "--seed", "3",
    ];
    let full = cli(&flags, &data)?;
    ensure(
        full == cli(&flags, &data)?,
        "cluster output differs between runs",
    )?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let snap = dir.path().join("mid.json");
    let snap = snap.to_str().unwrap();
    let lines: Vec<&str> = data.lines().collect();
    let mut checked = 0;
    // Line 0 is the generator header.
    for cut in [2, 250, 501, 1000] {
        let head: String = lines[..cut].iter().map(|l| format!("{l}\n")).collect();
        let tail: String = lines[cut..].iter().map(|l| format!("{l}\n")).collect();
        let first = cli(&[&flags[..], &["--snapshot-out", snap]].concat(), &head)?;
        let second = cli(&["cluster", "--snapshot-in", snap], &tail)?;
        ensure(
            first + &second == full,
            format!("resume at line {cut} diverges"),
        )?;
        checked += 1;
    }

    // Library level: AddResults identical, not just the printed fields.
    let stream = generate_labeled_stream(&GenerativeParams {
        dimension: 128,
        sigma: 0.05,
        num_clusters: 20,
        points_per_cluster: 50,
        seed: 78,
        layout: CenterLayout::Uniform,
    })
    .unwrap();
    let config = LinksConfig::new(128, 0.8, 0.9, 0.9);
    let mut reference = LinksClusterer::new(config.clone()).unwrap();
    let mut paused = LinksClusterer::new(config).unwrap();
    let (head, tail) = stream.records.split_at(600);
    for r in head {
        reference.add_vector(&r.vector).unwrap();
        paused.add_vector(&r.vector).unwrap();
    }
    let mut resumed = links::restore(&paused.snapshot_json()).map_err(|e| e.to_string())?;
    for r in tail {
        ensure(
            reference.add_vector(&r.vector).unwrap() == resumed.add_vector(&r.vector).unwrap(),
            "restored clusterer diverged",
        )?;
    }
    ensure(
        reference.snapshot_json() == resumed.snapshot_json(),
        "final state differs",
    )?;
    Ok(format!("byte-identical reruns; {checked} CLI resume points and a library resume reproduce the full run"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("threshold identities", Duration::from_secs(1), identities),
        (
            "threshold limits and monotonicity",
            Duration::from_secs(1),
            limits,
        ),
        (
            "hypersphere lemmas (Monte Carlo)",
            Duration::from_secs(30),
            lemmas,
        ),
        (
            "Hungarian vs brute force",
            Duration::from_secs(10),
            hungarian,
        ),
        (
            "connected components vs brute force",
            Duration::from_secs(10),
            components,
        ),
        (
            "structural invariants under fuzzing",
            Duration::from_secs(60),
            fuzz_invariants,
        ),
        ("end-to-end recovery", Duration::from_secs(60), recovery),
        (
            "determinism and persistence",
            Duration::from_secs(30),
            determinism,
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let result = result.and_then(|msg| {
            if took > *limit {
                Err(format!("took {took:.2?}, limit {limit:?}; {msg}"))
            } else {
                Ok(msg)
            }
        });
        match result {
            Ok(msg) => println!("[PASS] criterion {} {name} ({took:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {} {name} ({took:.2?}): {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
