mod common;

use proptest::prelude::*;
use rand::Rng;
use sensornet::sn_train::product_distance_sq;
use sensornet::{
    build_disk_topology, fit_centralized, local_only_train, train, KernelSpec, LabeledSample,
    Point, Schedule, SensorNetwork, SnTrain, TrainOptions,
};

use common::*;

/// Solves the neighborhood-relaxed program directly from its optimality
/// conditions:
///
///   min ‖z − y‖² + Σ_s λ_s c_sᵀ K_s c_s   s.t.  K_s c_s = z|N_s
///
/// Stationarity in `c_s` gives multipliers `−2λ_s c_s`, leaving the square
/// linear system `z + Σ_s λ_s E_sᵀ c_s = y`, `K_s c_s − E_s z = 0`.
fn relaxed_oracle(
    net: &SensorNetwork,
    spec: &KernelSpec,
    y: &[f64],
    lambdas: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = net.len();
    let offsets: Vec<usize> = net
        .neighborhoods()
        .iter()
        .scan(n, |acc, nb| {
            let o = *acc;
            *acc += nb.len();
            Some(o)
        })
        .collect();
    let size = n + net.neighborhoods().iter().map(Vec::len).sum::<usize>();
    let mut a = vec![vec![0.0; size]; size];
    let mut b = vec![0.0; size];
    for i in 0..n {
        a[i][i] = 1.0;
        b[i] = y[i];
    }
    for (s, nb) in net.neighborhoods().iter().enumerate() {
        let pts: Vec<Point> = nb.iter().map(|&j| net.positions()[j].clone()).collect();
        let k = gram(spec, &pts);
        for (a_idx, &j) in nb.iter().enumerate() {
            a[j][offsets[s] + a_idx] += lambdas[s];
            let row = offsets[s] + a_idx;
            for (b_idx, kv) in k[a_idx].iter().enumerate() {
                a[row][offsets[s] + b_idx] = *kv;
            }
            a[row][j] -= 1.0;
        }
    }
    let x = gauss_solve(a, b);
    let coeffs = net
        .neighborhoods()
        .iter()
        .enumerate()
        .map(|(s, nb)| x[offsets[s]..offsets[s] + nb.len()].to_vec())
        .collect();
    (x[..n].to_vec(), coeffs)
}

fn run_to_convergence(
    net: &SensorNetwork,
    spec: &KernelSpec,
    y: &[f64],
    lambdas: &[f64],
    schedule: Schedule,
) -> SnTrain {
    let mut run = SnTrain::new(net, spec, y, lambdas, schedule).unwrap();
    for _ in 0..50_000 {
        if run.step().unwrap() <= 1e-13 {
            return run;
        }
    }
    panic!("no convergence within the sweep budget");
}

/// Jittered grid on `[−1, 1]`: random, but without near-duplicate sensors
/// whose Gram matrices would make convergence arbitrarily slow.
fn spread_points<R: Rng>(r: &mut R, n: usize) -> Vec<Point> {
    let h = 2.0 / n as f64;
    (0..n)
        .map(|i| Point::scalar(-1.0 + h * (i as f64 + 0.5) + r.random_range(-0.25 * h..0.25 * h)))
        .collect()
}

fn instance(seed: u64, n: usize, radius: f64) -> (SensorNetwork, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let pts = spread_points(&mut r, n);
    let y: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let net = build_disk_topology(pts, radius).unwrap();
    let lambdas = net
        .neighborhoods()
        .iter()
        .map(|nb| 0.1 / (nb.len() * nb.len()) as f64)
        .collect();
    (net, y, lambdas)
}

#[test]
fn limit_solves_the_relaxed_program() {
    let spec = KernelSpec::Gaussian { bandwidth: 0.3 };
    for seed in 0..6 {
        let (net, y, lambdas) = instance(seed, 9, 0.5);
        let run = run_to_convergence(&net, &spec, &y, &lambdas, Schedule::SerialSweep);
        let (z, coeffs) = relaxed_oracle(&net, &spec, &y, &lambdas);
        for (a, b) in run.board().values().iter().zip(&z) {
            assert!((a - b).abs() <= 1e-8, "seed {seed}: message {a} vs {b}");
        }
        for (st, c) in run.states().iter().zip(&coeffs) {
            for (a, b) in st
                .neighborhood_values()
                .iter()
                .zip(gram_values(&net, &spec, st.id(), c))
            {
                assert!((a - b).abs() <= 1e-8, "seed {seed}: field value {a} vs {b}");
            }
        }
    }
}

fn gram_values(net: &SensorNetwork, spec: &KernelSpec, s: usize, c: &[f64]) -> Vec<f64> {
    let pts: Vec<Point> = net
        .neighbors(s)
        .unwrap()
        .iter()
        .map(|&j| net.positions()[j].clone())
        .collect();
    matvec(&gram(spec, &pts), c)
}

#[test]
fn fully_connected_limit_is_the_centralized_fit() {
    let spec = KernelSpec::Gaussian { bandwidth: 0.3 };
    for seed in 0..4 {
        let mut r = rng(100 + seed);
        let n = r.random_range(2..=12);
        let pts = spread_points(&mut r, n);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let net = build_disk_topology(pts.clone(), 5.0).unwrap();
        let lambda = 0.05;
        // unequal shares that still sum to λ
        let mut shares: Vec<f64> = (0..n).map(|_| r.random_range(0.5..1.5)).collect();
        let total: f64 = shares.iter().sum();
        shares.iter_mut().for_each(|v| *v *= lambda / total);
        let run = run_to_convergence(&net, &spec, &y, &shares, Schedule::SerialSweep);
        let coeffs = ridge_oracle(&spec, &pts, &y, lambda);
        for st in run.states() {
            for &x in &[-1.0, -0.37, 0.0, 0.52, 1.0] {
                let got = sensornet::sensor_estimate(st, net.positions(), &spec)
                    .predict(&Point::scalar(x))
                    .unwrap();
                let want = expansion(&spec, &pts, &coeffs, &[x]);
                assert!((got - want).abs() <= 1e-8, "seed {seed}: {got} vs {want}");
            }
        }
        let samples: Vec<LabeledSample> = pts
            .iter()
            .zip(&y)
            .map(|(p, &m)| LabeledSample::new(p.clone(), m).unwrap())
            .collect();
        let central = fit_centralized(&samples, &spec, lambda).unwrap();
        for (a, b) in central.coeffs.iter().zip(&coeffs) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn visiting_order_does_not_change_the_limit() {
    let spec = KernelSpec::Gaussian { bandwidth: 0.4 };
    for seed in 0..5 {
        let (net, y, lambdas) = instance(200 + seed, 12, 0.4);
        let serial = run_to_convergence(&net, &spec, &y, &lambdas, Schedule::SerialSweep);
        let shuffled = run_to_convergence(
            &net,
            &spec,
            &y,
            &lambdas,
            Schedule::SeededPermutation { seed },
        );
        for (a, b) in serial
            .board()
            .values()
            .iter()
            .zip(shuffled.board().values())
        {
            assert!((a - b).abs() <= 1e-5);
        }
    }
}

#[test]
fn isolated_sensors_equal_local_only_for_any_budget() {
    let spec = KernelSpec::Affine { bias: 1.0 };
    let (net, y, lambdas) = instance(300, 10, 0.0);
    let local = local_only_train(&net, &spec, &y, &lambdas).unwrap();
    for sweeps in [1, 2, 7] {
        let out = train(&net, &spec, &y, &lambdas, &TrainOptions::sweeps(sweeps)).unwrap();
        for (a, b) in out.states.iter().zip(&local) {
            assert_eq!(a.coeffs(), b.coeffs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_to_limit_never_grows(seed in 0u64..10_000, n in 2usize..10, radius in 0.1f64..1.5, gaussian in any::<bool>()) {
        let spec = if gaussian { KernelSpec::Gaussian { bandwidth: 0.5 } } else { KernelSpec::Affine { bias: 0.5 } };
        let (net, y, lambdas) = instance(seed, n, radius);
        let limit = run_to_convergence(&net, &spec, &y, &lambdas, Schedule::SerialSweep);
        let mut run = SnTrain::new(&net, &spec, &y, &lambdas, Schedule::SerialSweep).unwrap();
        let mut prev = product_distance_sq((run.states(), run.board()), (limit.states(), limit.board())).unwrap();
        for _ in 0..30 {
            run.step().unwrap();
            let d = product_distance_sq((run.states(), run.board()), (limit.states(), limit.board())).unwrap();
            prop_assert!(d <= prev + 1e-10, "{d} after {prev}");
            prev = d;
        }
    }

    #[test]
    fn distance_to_origin_never_grows(seed in 0u64..10_000, n in 1usize..12, radius in 0.0f64..2.0) {
        // the origin lies in every constraint set, so no projection moves away from it
        let spec = KernelSpec::Gaussian { bandwidth: 0.5 };
        let (net, y, lambdas) = instance(seed, n, radius);
        let mut run = SnTrain::new(&net, &spec, &y, &lambdas, Schedule::SerialSweep).unwrap();
        let zero = SnTrain::new(&net, &spec, &vec![0.0; n], &lambdas, Schedule::SerialSweep).unwrap();
        let start = product_distance_sq((run.states(), run.board()), (zero.states(), zero.board())).unwrap();
        for _ in 0..10 {
            run.step().unwrap();
            let d = product_distance_sq((run.states(), run.board()), (zero.states(), zero.board())).unwrap();
            prop_assert!(d <= start + 1e-10);
        }
    }
}
