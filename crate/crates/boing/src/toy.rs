//! One-dimensional heteroscedastic toy and the full / local / LGPGA regression comparison.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use boing_core::gp::{gp_fit_points, FitOptions};
use boing_core::lgpga::{lgpga_fit, LgpgaSettings};
use boing_core::{Dataset, Observation, RngState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::runner::fmt_f64;

pub fn toy_mean(x: f64) -> f64 {
    2.0 * (-30.0 * (x - 0.25).powi(2)).exp() + (PI * x * x).sin()
}

pub fn toy_variance(x: f64) -> f64 {
    (2.0 * (2.0 * PI * x).sin()).exp()
}

/// `n` draws with uniform x in [0, 1], sorted by x.
pub fn hetero_toy_sample(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    let obs = xs
        .into_iter()
        .map(|x| {
            let y = Normal::new(toy_mean(x), toy_variance(x).sqrt()).expect("finite variance").sample(&mut rng);
            Observation::new(vec![x], y).expect("finite sample")
        })
        .collect();
    Dataset::from_observations(obs).expect("one-dimensional points")
}

/// Sample size and the sorted-index band treated as the subregion.
pub const TOY_SIZE: usize = 50;
pub const TOY_INSIDE: std::ops::RangeInclusive<usize> = 35..=45;

/// Predictive mean and variance (noise included) of the three models on a grid.
#[derive(Debug, Clone)]
pub struct ToyPredictions {
    pub grid: Vec<f64>,
    pub full: Vec<(f64, f64)>,
    pub local: Vec<(f64, f64)>,
    pub lgpga: Vec<(f64, f64)>,
}

pub fn toy_regression(data: &Dataset, grid_size: usize, seed: u64) -> boing_core::Result<ToyPredictions> {
    let points = data.points();
    let costs = data.costs();
    let (mut inside, mut y_in, mut outside, mut y_out) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (p, c)) in points.iter().zip(&costs).enumerate() {
        if TOY_INSIDE.contains(&i) {
            inside.push(p.clone());
            y_in.push(*c);
        } else {
            outside.push(p.clone());
            y_out.push(*c);
        }
    }
    let mut rng = RngState::new(seed);
    let fit = FitOptions::default();
    let full = gp_fit_points(&points, &costs, &fit, &mut rng)?;
    let local = gp_fit_points(&inside, &y_in, &fit, &mut rng)?;
    let settings = LgpgaSettings { fit, ..LgpgaSettings::default() };
    let lgpga = lgpga_fit(&inside, &y_in, &outside, &y_out, &settings, &mut rng)?;
    let grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1).max(1) as f64).collect();
    let with_noise = |(m, v): (f64, f64), noise: f64, scale: f64| (m, v + noise * scale * scale);
    Ok(ToyPredictions {
        full: grid
            .iter()
            .map(|&x| with_noise(full.predict_one(&[x]), full.params().noise_variance, full.transform().scale))
            .collect(),
        local: grid
            .iter()
            .map(|&x| with_noise(local.predict_one(&[x]), local.params().noise_variance, local.transform().scale))
            .collect(),
        lgpga: grid
            .iter()
            .map(|&x| with_noise(lgpga.predict_one(&[x]), lgpga.params().noise_variance, lgpga.transform().scale))
            .collect(),
        grid,
    })
}

/// Writes `toy_data.csv` (samples) and `toy_predictions.csv` (model curves) under `dir`.
pub fn write_toy_regression(dir: &Path, seed: u64) -> Result<PathBuf, Box<dyn std::error::Error>> {
    fs::create_dir_all(dir)?;
    let data = hetero_toy_sample(TOY_SIZE, seed);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("toy_data.csv"))?));
    w.write_record(["index", "x", "y", "inside", "true_mean", "true_variance"])?;
    for (i, obs) in data.observations().iter().enumerate() {
        let x = obs.point[0];
        w.write_record([
            i.to_string(),
            fmt_f64(x),
            fmt_f64(obs.cost),
            u8::from(TOY_INSIDE.contains(&i)).to_string(),
            fmt_f64(toy_mean(x)),
            fmt_f64(toy_variance(x)),
        ])?;
    }
    w.flush()?;
    let pred = toy_regression(&data, 201, seed)?;
    let path = dir.join("toy_predictions.csv");
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record([
        "x",
        "full_mean",
        "full_var",
        "local_mean",
        "local_var",
        "lgpga_mean",
        "lgpga_var",
        "true_mean",
        "true_variance",
    ])?;
    for (i, &x) in pred.grid.iter().enumerate() {
        let mut row = vec![fmt_f64(x)];
        for (m, v) in [pred.full[i], pred.local[i], pred.lgpga[i]] {
            row.push(fmt_f64(m));
            row.push(fmt_f64(v));
        }
        row.push(fmt_f64(toy_mean(x)));
        row.push(fmt_f64(toy_variance(x)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_formulas() {
        assert!((toy_mean(0.25) - (2.0 + (PI / 16.0).sin())).abs() < 1e-15);
        assert_eq!(toy_variance(0.0), 1.0);
    }

    #[test]
    fn sample_is_sorted_and_reproducible() {
        let a = hetero_toy_sample(50, 3);
        let b = hetero_toy_sample(50, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        let xs: Vec<f64> = a.points().into_iter().map(|p| p[0]).collect();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_ne!(a, hetero_toy_sample(50, 4));
    }

    #[test]
    fn sample_moments_follow_the_generator() {
        let data = hetero_toy_sample(20_000, 1);
        let z: Vec<f64> = data
            .observations()
            .iter()
            .map(|o| (o.cost - toy_mean(o.point[0])) / toy_variance(o.point[0]).sqrt())
            .collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn local_models_track_the_quiet_band_better_than_the_full_gp() {
        let data = hetero_toy_sample(TOY_SIZE, 0);
        let pred = toy_regression(&data, 101, 0).unwrap();
        let band = (data.get(*TOY_INSIDE.start()).point[0], data.get(*TOY_INSIDE.end()).point[0]);
        let idx: Vec<usize> =
            (0..pred.grid.len()).filter(|&i| pred.grid[i] >= band.0 && pred.grid[i] <= band.1).collect();
        assert!(!idx.is_empty());
        let var_error = |curve: &[(f64, f64)]| {
            idx.iter().map(|&i| (curve[i].1 - toy_variance(pred.grid[i])).abs()).sum::<f64>() / idx.len() as f64
        };
        assert!(var_error(&pred.local) < var_error(&pred.full));
        assert!(var_error(&pred.lgpga) < var_error(&pred.full));
    }
}
