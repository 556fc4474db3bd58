//! Simulated regression scenarios and the two Monte Carlo studies: error
//! versus number of sweeps, and error versus communication radius.
//!
//! Sensors sit uniformly on `[−1, 1]` and observe `η(x) + α·ε`. Test error is
//! measured against the noiseless `η` on fresh uniform test points, one test
//! set per trial shared by every method in that trial.

mod stats;
mod studies;
mod table;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::FusionRule;
use crate::kernels::{KernelSpec, Point};
use crate::network::SensorNetwork;
use crate::sn_train::Schedule;

pub use stats::{mean_stderr, sign_test_one_sided, spearman};
pub use studies::{run_connectivity_study, run_convergence_study, run_trial, TrialResult};
pub use table::{read_results_csv, write_results_csv, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionCase {
    /// `η(x) = 5x + 5`, `α = 7`, linear-family kernel.
    Case1,
    /// `η(x) = sin(πx)`, `α = 1`, Gaussian kernel.
    Case2,
}

impl RegressionCase {
    pub fn eta(&self, x: f64) -> f64 {
        match self {
            RegressionCase::Case1 => 5.0 * x + 5.0,
            RegressionCase::Case2 => (std::f64::consts::PI * x).sin(),
        }
    }

    pub fn noise_std(&self) -> f64 {
        match self {
            RegressionCase::Case1 => 7.0,
            RegressionCase::Case2 => 1.0,
        }
    }

    /// Case 1 uses `affine:1` because `linear` cannot represent the intercept.
    pub fn default_kernel(&self) -> KernelSpec {
        match self {
            RegressionCase::Case1 => KernelSpec::Affine { bias: 1.0 },
            RegressionCase::Case2 => KernelSpec::Gaussian { bandwidth: 1.0 },
        }
    }

    /// Radius grid for the connectivity study.
    pub fn default_radii(&self) -> Vec<f64> {
        match self {
            RegressionCase::Case1 => radius_grid(0.1, 0.6, 0.05),
            RegressionCase::Case2 => radius_grid(0.1, 2.1, 0.1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegressionCase::Case1 => "case1",
            RegressionCase::Case2 => "case2",
        }
    }
}

impl std::str::FromStr for RegressionCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "case1" | "1" => Ok(RegressionCase::Case1),
            "case2" | "2" => Ok(RegressionCase::Case2),
            _ => Err(Error::invalid(format!(
                "unknown case '{s}' (expected case1 or case2)"
            ))),
        }
    }
}

pub fn eta(case: RegressionCase, x: f64) -> f64 {
    case.eta(x)
}

/// `start, start+step, …, stop` with values rounded to 1e-9 so the grid
/// prints cleanly.
pub fn radius_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

pub const DEFAULT_SEED: u64 = 20_050_328;

/// Default radius for the sweep-count study.
pub const DEFAULT_CONVERGENCE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: RegressionCase,
    pub kernel: KernelSpec,
    /// Observation noise standard deviation `α`.
    pub noise_std: f64,
    pub n: usize,
    /// Communication radius for the sweep-count study and `train`.
    pub radius: f64,
    /// Radius grid for the connectivity study.
    pub radii: Vec<f64>,
    /// `λ_i = κ / |N_i|²`.
    pub kappa: f64,
    /// `T`: sweep budget.
    pub sweeps: usize,
    /// `S`: independent trials.
    pub trials: usize,
    pub test_points: usize,
    pub seed: u64,
    /// Rules evaluated by the sweep-count study.
    pub fusion: Vec<FusionRule>,
    /// The sensor asked by the single-sensor rule in the connectivity study.
    pub single_sensor: usize,
    /// Regularizer of the centralized reference; `κ / n²` when absent.
    pub central_lambda: Option<f64>,
    pub schedule: Schedule,
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Desk-scale defaults for the error-versus-sweeps study.
    pub fn convergence(case: RegressionCase) -> Self {
        ExperimentConfig {
            case,
            kernel: case.default_kernel(),
            noise_std: case.noise_std(),
            n: 50,
            radius: DEFAULT_CONVERGENCE_RADIUS,
            radii: case.default_radii(),
            kappa: 0.01,
            sweeps: 100,
            trials: 20,
            test_points: 500,
            seed: DEFAULT_SEED,
            fusion: vec![
                FusionRule::SingleSensor(0),
                FusionRule::KNearest(1),
                FusionRule::ConnectivityAveraged,
            ],
            single_sensor: 0,
            central_lambda: None,
            schedule: Schedule::SerialSweep,
            execution: Execution::Parallel,
        }
    }

    /// Desk-scale defaults for the error-versus-radius study.
    pub fn connectivity(case: RegressionCase) -> Self {
        ExperimentConfig {
            sweeps: 200,
            test_points: 300,
            ..Self::convergence(case)
        }
    }

    pub fn central_lambda(&self) -> f64 {
        self.central_lambda
            .unwrap_or(self.kappa / (self.n * self.n) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        self.kernel.validate()?;
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if self.sweeps == 0 {
            return fail("sweeps (T) must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.test_points == 0 {
            return fail("test_points must be at least 1".into());
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return fail(format!(
                "noise_std must be nonnegative, got {}",
                self.noise_std
            ));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return fail(format!("radius must be nonnegative, got {}", self.radius));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return fail(format!("radii must be nonnegative, got {r}"));
        }
        if let Some(l) = self.central_lambda {
            if !(l > 0.0) || !l.is_finite() {
                return fail(format!("central_lambda must be positive, got {l}"));
            }
        }
        if self.single_sensor >= self.n {
            return fail(format!(
                "single_sensor {} out of range for n = {}",
                self.single_sensor, self.n
            ));
        }
        for rule in &self.fusion {
            rule.validate(self.n)?;
        }
        Ok(())
    }
}

/// The RNG for one trial: the configured seed on stream `trial`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// `n` uniform positions on `[−1, 1]` and measurements `η(xᵢ) + α εᵢ`.
pub fn sample_scenario<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> (Vec<Point>, Vec<f64>) {
    let xs: Vec<f64> = (0..config.n)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let y = xs
        .iter()
        .map(|&x| {
            let eps: f64 = rng.sample(StandardNormal);
            config.case.eta(x) + config.noise_std * eps
        })
        .collect();
    (xs.into_iter().map(Point::scalar).collect(), y)
}

/// `λ_i = κ / |N_i|²`.
pub fn lambda_vector(net: &SensorNetwork, kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    Ok(net
        .neighborhoods()
        .iter()
        .map(|nb| kappa / (nb.len() * nb.len()) as f64)
        .collect())
}

pub fn draw_test_points<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Mean squared deviation from the noiseless regression function.
pub fn mse_on(points: &[f64], case: RegressionCase, predictor: impl Fn(f64) -> f64) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|&x| {
            let e = predictor(x) - case.eta(x);
            e * e
        })
        .sum();
    sum / points.len() as f64
}

pub fn evaluate_mse<R: Rng + ?Sized>(
    predictor: impl Fn(f64) -> f64,
    case: RegressionCase,
    test_points: usize,
    rng: &mut R,
) -> Result<f64> {
    if test_points == 0 {
        return Err(Error::invalid("need at least one test point"));
    }
    let pts = draw_test_points(test_points, rng);
    Ok(mse_on(&pts, case, predictor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_disk_topology;

    #[test]
    fn eta_examples() {
        assert_eq!(eta(RegressionCase::Case1, 0.0), 5.0);
        assert_eq!(eta(RegressionCase::Case2, 0.0), 0.0);
        assert!((eta(RegressionCase::Case2, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(RegressionCase::Case1.noise_std(), 7.0);
        assert_eq!(RegressionCase::Case2.noise_std(), 1.0);
    }

    #[test]
    fn default_radius_grids() {
        let r1 = RegressionCase::Case1.default_radii();
        assert_eq!(r1.len(), 11);
        assert_eq!(r1[0], 0.1);
        assert_eq!(r1[1], 0.15);
        assert_eq!(r1[10], 0.6);
        let r2 = RegressionCase::Case2.default_radii();
        assert_eq!(r2.len(), 21);
        assert_eq!(r2[20], 2.1);
    }

    #[test]
    fn noiseless_scenario_hits_eta() {
        let mut cfg = ExperimentConfig::convergence(RegressionCase::Case2);
        cfg.noise_std = 0.0;
        let (pos, y) = sample_scenario(&cfg, &mut trial_rng(1, 0));
        assert_eq!(pos.len(), 50);
        for (p, y) in pos.iter().zip(&y) {
            let x = p.coords()[0];
            assert!((-1.0..=1.0).contains(&x));
            assert_eq!(*y, cfg.case.eta(x));
        }
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = ExperimentConfig::convergence(RegressionCase::Case1);
        let a = sample_scenario(&cfg, &mut trial_rng(9, 4));
        let b = sample_scenario(&cfg, &mut trial_rng(9, 4));
        assert_eq!(a, b);
        let c = sample_scenario(&cfg, &mut trial_rng(9, 5));
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn standard_normal_mean() {
        let mut rng = trial_rng(123, 0);
        let m: f64 = (0..100_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .sum::<f64>()
            / 100_000.0;
        assert!(m.abs() < 0.02, "{m}");
    }

    #[test]
    fn lambda_examples() {
        let net = build_disk_topology(vec![Point::scalar(0.0)], 0.5).unwrap();
        assert_eq!(lambda_vector(&net, 0.01).unwrap(), vec![0.01]);
        let net = build_disk_topology(vec![Point::scalar(0.0), Point::scalar(0.1)], 0.5).unwrap();
        assert_eq!(lambda_vector(&net, 0.01).unwrap(), vec![0.0025, 0.0025]);
        assert!(lambda_vector(&net, 0.0).is_err());
    }

    #[test]
    fn mse_examples() {
        let mut rng = trial_rng(5, 0);
        let case = RegressionCase::Case2;
        assert_eq!(
            evaluate_mse(|x| case.eta(x), case, 100, &mut rng).unwrap(),
            0.0
        );
        let one = evaluate_mse(|x| case.eta(x) + 1.0, case, 100, &mut rng).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        // ½∫₋₁¹ sin²(πx) dx = ½
        let zero = evaluate_mse(|_| 0.0, case, 10_000, &mut rng).unwrap();
        assert!((zero - 0.5).abs() < 0.05, "{zero}");
        assert!(evaluate_mse(|_| 0.0, case, 0, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::convergence(RegressionCase::Case1);
        assert!(base.validate().is_ok());
        assert!((base.central_lambda() - 0.01 / 2500.0).abs() < 1e-18);
        let mut c = base.clone();
        c.kappa = 0.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.sweeps = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.fusion = vec![FusionRule::KNearest(51)];
        assert!(c.validate().is_err());
        let mut c = base;
        c.single_sensor = 50;
        assert!(c.validate().is_err());
    }
}
