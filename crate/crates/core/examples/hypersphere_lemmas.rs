// Monte Carlo look at the three high-dimensional facts the thresholds rest
// on: random pairs are nearly perpendicular, cluster members sit at nearly
// a fixed angle from their centre, and their tangential parts are nearly
// uncorrelated.

use links::hypersphere::{sample_uniform_sphere, theta_mode, AngularGaussian, UnitVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::error::Error;

fn tangential(x: &UnitVector, center: &UnitVector) -> Vec<f64> {
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
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (n, sigma, trials) = (128, 0.05, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut tail = 0;
    let mut mean_abs = 0.0;
    for _ in 0..trials {
        let u = sample_uniform_sphere(n, &mut rng)?;
        let v = sample_uniform_sphere(n, &mut rng)?;
        let d: f64 = u
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        mean_abs += d.abs() / trials as f64;
        if d.abs() > 0.3 {
            tail += 1;
        }
    }
    let half_normal = (2.0 / (std::f64::consts::PI * n as f64)).sqrt();
    println!("uniform pairs: mean |u.v| = {mean_abs:.4} (sqrt(2/(pi N)) = {half_normal:.4}), |u.v| > 0.3 in {tail} of {trials}");

    let model = AngularGaussian::new(n, sigma)?;
    let center = sample_uniform_sphere(n, &mut rng)?;
    let angles: Vec<f64> = (0..trials).map(|_| model.sample_angle(&mut rng)).collect();
    let mean = angles.iter().sum::<f64>() / trials as f64;
    let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    println!(
        "member angles: mean {mean:.4} rad, sd {sd:.4}, mode {:.4}",
        theta_mode(n, sigma)?
    );

    let mut tangent_cos = 0.0;
    for _ in 0..trials {
        let x = model.sample_point(&center, &mut rng)?;
        let y = model.sample_point(&center, &mut rng)?;
        tangent_cos += cosine(&tangential(&x, &center), &tangential(&y, &center)).abs();
    }
    tangent_cos /= trials as f64;
    println!("tangential parts of member pairs: mean |cos| = {tangent_cos:.4}");

    assert!((tail as f64) < 1e-3 * trials as f64 && sd < 0.15 * mean && tangent_cos < 0.15);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
