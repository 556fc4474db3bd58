use super::{
    draw_test_points, lambda_vector, mean_stderr, sample_scenario, trial_rng, ExperimentConfig,
    ResultRow,
};
use crate::centralized::{fit_centralized, LabeledSample};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::fusion::{connectivity_weights, nearest_sensors, FusionRule};
use crate::kernels::Point;
use crate::network::{build_disk_topology, is_connected, SensorNetwork};
use crate::sn_train::{local_only_train, Diagnostics, SensorState, SnTrain};

/// Everything measured in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub radius: f64,
    pub connected: bool,
    /// Sweep counts at which the SN-Train estimates were evaluated.
    pub checkpoints: Vec<usize>,
    /// Test MSE indexed `[checkpoint][rule]`.
    pub rule_mse: Vec<Vec<f64>>,
    /// Test MSE of the no-exchange baseline, indexed `[rule]`.
    pub local_only_mse: Vec<f64>,
    pub centralized_mse: f64,
    pub diagnostics: Diagnostics,
}

/// Kernel values between the trial's test points and every sensor position,
/// so that each fused prediction is a dot product.
struct TestSet<'a> {
    net: &'a SensorNetwork,
    xs: Vec<f64>,
    truth: Vec<f64>,
    /// Row-major `test_points × n`.
    kernel_rows: Vec<f64>,
}

impl<'a> TestSet<'a> {
    fn new(config: &ExperimentConfig, net: &'a SensorNetwork, xs: Vec<f64>) -> Self {
        let n = net.len();
        let mut kernel_rows = Vec::with_capacity(xs.len() * n);
        for &x in &xs {
            for p in net.positions() {
                kernel_rows.push(config.kernel.eval_unchecked(&[x], p.coords()));
            }
        }
        let truth = xs.iter().map(|&x| config.case.eta(x)).collect();
        TestSet {
            net,
            xs,
            truth,
            kernel_rows,
        }
    }

    fn row(&self, p: usize) -> &[f64] {
        let n = self.net.len();
        &self.kernel_rows[p * n..(p + 1) * n]
    }

    fn mse_of(&self, predict: impl Fn(usize) -> f64) -> f64 {
        let sum: f64 = self
            .truth
            .iter()
            .enumerate()
            .map(|(p, t)| {
                let e = predict(p) - t;
                e * e
            })
            .sum();
        sum / self.truth.len() as f64
    }

    /// MSE of an expansion over all sensor positions with coefficients `global`.
    fn global_mse(&self, global: &[f64]) -> f64 {
        self.mse_of(|p| crate::linalg::dot(self.row(p), global))
    }

    fn sensor_predict(&self, state: &SensorState, p: usize) -> f64 {
        let row = self.row(p);
        state
            .neighbor_ids()
            .iter()
            .zip(state.coeffs())
            .map(|(&j, c)| c * row[j])
            .sum()
    }

    fn rule_mse(&self, rule: &FusionRule, states: &[SensorState], nearest: &[Vec<usize>]) -> f64 {
        match *rule {
            FusionRule::SingleSensor(s) => self.mse_of(|p| self.sensor_predict(&states[s], p)),
            FusionRule::KNearest(k) => self.mse_of(|p| {
                let sum: f64 = nearest[p][..k]
                    .iter()
                    .map(|&s| self.sensor_predict(&states[s], p))
                    .sum();
                sum / k as f64
            }),
            FusionRule::ConnectivityAveraged => {
                let mut global = vec![0.0; self.net.len()];
                for (st, w) in states.iter().zip(connectivity_weights(self.net)) {
                    for (&j, c) in st.neighbor_ids().iter().zip(st.coeffs()) {
                        global[j] += w * c;
                    }
                }
                self.global_mse(&global)
            }
        }
    }
}

/// Runs one trial: a fresh scenario from `(seed, trial)`, SN-Train evaluated
/// at each checkpoint, plus the local-only and centralized baselines.
pub fn run_trial(
    config: &ExperimentConfig,
    rules: &[FusionRule],
    radius: f64,
    trial: usize,
    checkpoints: &[usize],
) -> Result<TrialResult> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::invalid(
            "checkpoints must be strictly increasing sweep counts starting at 1 or more",
        ));
    }
    let mut rng = trial_rng(config.seed, trial);
    let (positions, y) = sample_scenario(config, &mut rng);
    let test_xs = draw_test_points(config.test_points, &mut rng);

    let net = build_disk_topology(positions, radius)?;
    for rule in rules {
        rule.validate(net.len())?;
    }
    let lambdas = lambda_vector(&net, config.kappa)?;
    let tests = TestSet::new(config, &net, test_xs);
    let max_k = rules
        .iter()
        .filter_map(|r| match r {
            FusionRule::KNearest(k) => Some(*k),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let nearest: Vec<Vec<usize>> = if max_k > 0 {
        tests
            .xs
            .iter()
            .map(|&x| nearest_sensors(&net, &Point::scalar(x), max_k))
            .collect()
    } else {
        Vec::new()
    };

    let samples: Vec<LabeledSample> = net
        .positions()
        .iter()
        .zip(&y)
        .map(|(p, &m)| LabeledSample::new(p.clone(), m))
        .collect::<Result<_>>()?;
    let central = fit_centralized(&samples, &config.kernel, config.central_lambda())?;
    let centralized_mse = tests.global_mse(&central.coeffs);

    let local = local_only_train(&net, &config.kernel, &y, &lambdas)?;
    let local_only_mse = rules
        .iter()
        .map(|r| tests.rule_mse(r, &local, &nearest))
        .collect();

    let mut run = SnTrain::new(&net, &config.kernel, &y, &lambdas, config.schedule)?;
    let mut rule_mse = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        while run.sweeps_done() < t {
            run.step()?;
        }
        rule_mse.push(
            rules
                .iter()
                .map(|r| tests.rule_mse(r, run.states(), &nearest))
                .collect(),
        );
    }

    Ok(TrialResult {
        trial,
        radius,
        connected: is_connected(&net),
        checkpoints: checkpoints.to_vec(),
        rule_mse,
        local_only_mse,
        centralized_mse,
        diagnostics: run.diagnostics().clone(),
    })
}

fn row(
    config: &ExperimentConfig,
    study: &str,
    r: f64,
    sweeps: usize,
    rule: String,
    values: &[f64],
    connected_fraction: f64,
) -> ResultRow {
    let (mean_mse, stderr_mse) = mean_stderr(values);
    ResultRow {
        study: study.to_string(),
        case: config.case,
        n: config.n,
        r,
        kappa: config.kappa,
        sweeps,
        rule,
        trials: values.len(),
        mean_mse,
        stderr_mse,
        connected_fraction,
    }
}

fn connected_fraction(results: &[TrialResult]) -> f64 {
    results.iter().filter(|t| t.connected).count() as f64 / results.len() as f64
}

/// Error versus number of sweeps `T = 1..=sweeps` at `config.radius`, one row
/// per `(T, fusion rule)`.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let checkpoints: Vec<usize> = (1..=config.sweeps).collect();
    let trials = map_indexed(config.trials, config.execution, |trial| {
        run_trial(config, &config.fusion, config.radius, trial, &checkpoints)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let frac = connected_fraction(&trials);
    let mut rows = Vec::with_capacity(checkpoints.len() * config.fusion.len());
    for (ci, &t) in checkpoints.iter().enumerate() {
        for (ri, rule) in config.fusion.iter().enumerate() {
            let values: Vec<f64> = trials.iter().map(|tr| tr.rule_mse[ci][ri]).collect();
            rows.push(row(
                config,
                "convergence",
                config.radius,
                t,
                rule.to_string(),
                &values,
                frac,
            ));
        }
    }
    Ok(rows)
}

/// Error versus radius for SN-Train (`T = sweeps`), the local-only baseline
/// and the centralized estimator, all read through the single-sensor rule.
///
/// Trial `i` draws the same scenario at every radius.
pub fn run_connectivity_study(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    if config.radii.is_empty() {
        return Err(Error::invalid(
            "connectivity study needs at least one radius",
        ));
    }
    let rules = [FusionRule::SingleSensor(config.single_sensor)];
    let checkpoints = [config.sweeps];
    let s = config.trials;
    let all = map_indexed(config.radii.len() * s, config.execution, |i| {
        run_trial(config, &rules, config.radii[i / s], i % s, &checkpoints)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(config.radii.len() * 3);
    for (ri, &r) in config.radii.iter().enumerate() {
        let trials = &all[ri * s..(ri + 1) * s];
        let frac = connected_fraction(trials);
        let sn: Vec<f64> = trials.iter().map(|t| t.rule_mse[0][0]).collect();
        let lo: Vec<f64> = trials.iter().map(|t| t.local_only_mse[0]).collect();
        let ce: Vec<f64> = trials.iter().map(|t| t.centralized_mse).collect();
        for (name, values) in [("sn_train", sn), ("local_only", lo), ("centralized", ce)] {
            rows.push(row(
                config,
                "connectivity",
                r,
                config.sweeps,
                name.into(),
                &values,
                frac,
            ));
        }
    }
    Ok(rows)
}
