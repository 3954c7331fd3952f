//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::fs;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use podrom::data::{generate_synthetic_flame, FlameConfig, InletProfile, Layout, SnapshotMatrix, SnapshotTensor};
use podrom::forecast::{
    make_windows, split_sequential, ModeScaler, Presets, ScalerKind, DEFAULT_TEST_FRACTION, DEFAULT_TRAIN_FRACTION,
};
use podrom::neuralnet::{
    count_parameters, loss_mse, loss_pa_mse, Activation, LossSpec, MassBalance, ModelKind, Network, NetworkSpec,
};
use podrom::pod::{compute_pod, reconstruct, rrmse};
use podrom::rom::{fit_pipeline, transfer_with_prediction, EvalReport, RomConfig, RomPipeline, TransferMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn check(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let o = Outcome {
        id,
        name,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!(
        "{} criterion {:>2} {}: {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail,
        o.seconds
    );
    o
}

// ---------------------------------------------------------------- 1

fn parameter_counts() -> (bool, String) {
    let small = count_parameters(&NetworkSpec::lstm(18, 6, 10, 100));
    let large = count_parameters(&NetworkSpec::lstm(18, 6, 10, 400));
    (
        small == 125_028 && large == 1_673_628,
        format!("LSTM units 100 -> {small}, units 400 -> {large} (expected 125028, 1673628)"),
    )
}

// ---------------------------------------------------------------- 2

const FD_STEP: f64 = 1e-5;

fn gradient_error(net: &mut Network, batch: &[(Vec<f64>, Vec<f64>)], loss: &LossSpec) -> f64 {
    let refs: Vec<(&[f64], &[f64])> = batch.iter().map(|(w, t)| (w.as_slice(), t.as_slice())).collect();
    net.loss_and_gradient(&refs, loss).unwrap();
    let analytic = net.params.grads.clone();
    let mut worst = 0.0f64;
    for i in 0..net.params.len() {
        let orig = net.params.values[i];
        net.params.values[i] = orig + FD_STEP;
        let up = net.loss(&refs, loss).unwrap().total;
        net.params.values[i] = orig - FD_STEP;
        let down = net.loss(&refs, loss).unwrap().total;
        net.params.values[i] = orig;
        let fd = (up - down) / (2.0 * FD_STEP);
        let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

fn gradients() -> (bool, String) {
    let (n, p, q, units) = (4, 3, 6, 8);
    let acts = [
        (Activation::Elu, Activation::Tanh),
        (Activation::Tanh, Activation::Sigmoid),
        (Activation::Relu, Activation::Tanh),
        (Activation::Elu, Activation::Sigmoid),
    ];
    let mut worst = 0.0f64;
    let mut runs = 0;
    for seed in 0..20u64 {
        let (hidden, output) = acts[seed as usize % acts.len()];
        let mut lstm = NetworkSpec::lstm(n, p, q, units).with_activations(hidden, output);
        lstm.step_width = 8;
        let mut cnn = NetworkSpec::cnn(n, p, q).with_activations(hidden, output);
        cnn.conv_channels = [4, 5];
        cnn.dense_width = 6;
        for spec in [lstm, cnn] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = if output == Activation::Sigmoid { 0.0 } else { -1.0 };
            let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
                .map(|_| {
                    (
                        (0..q * n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        (0..p * n).map(|_| rng.gen_range(lo..1.0)).collect(),
                    )
                })
                .collect();
            let m = DMatrix::from_fn(5, n, |_, _| rng.gen_range(-1.0..1.0));
            let losses = [LossSpec::Mse, LossSpec::PaMse(MassBalance::new(m, 1.0).unwrap())];
            for loss in &losses {
                let mut net = Network::new(spec, seed).unwrap();
                worst = worst.max(gradient_error(&mut net, &batch, loss));
                runs += 1;
            }
        }
    }
    (
        worst <= 1e-4,
        format!("{runs} checks (20 seeds x LSTM/CNN x MSE/PA-MSE), max relative error {worst:.2e} (limit 1e-4)"),
    )
}

// ---------------------------------------------------------------- 3

fn pod_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut sv_err, mut ortho_err, mut rec_err) = (0.0f64, 0.0f64, 0.0f64);
    let trials = 40;
    for _ in 0..trials {
        let j = rng.gen_range(2..=50);
        let k = rng.gen_range(2..=30);
        let x = DMatrix::from_fn(j, k, |_, _| rng.gen_range(-10.0..10.0));
        let sm = SnapshotMatrix::new(x.clone(), Layout::new(1, j, 1)).unwrap();
        let (basis, modes) = compute_pod(&sm).unwrap();
        let mut oracle: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if basis.spectrum.len() != j.min(k) {
            return (false, format!("{j} x {k}: {} singular values resolved", basis.spectrum.len()));
        }
        for (a, b) in basis.spectrum.iter().zip(&oracle) {
            sv_err = sv_err.max((a - b).abs() / b);
        }
        let r = basis.n_modes();
        ortho_err = ortho_err.max((basis.modes.tr_mul(&basis.modes) - DMatrix::identity(r, r)).amax());
        rec_err = rec_err.max(rrmse(&x, &reconstruct(&basis, &modes).unwrap().values).unwrap());
    }
    (
        sv_err <= 1e-8 && ortho_err <= 1e-8 && rec_err < 1e-10,
        format!(
            "{trials} random matrices: singular values rel {sv_err:.1e} (1e-8), |U^T U - I| {ortho_err:.1e} (1e-8), full-rank RRMSE {rec_err:.1e} (1e-10)"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn scaler_invariant() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut sum_err, mut max_abs, mut round) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let k = rng.gen_range(2..=200);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let m = DMatrix::from_fn(n, k, |_, _| scale * rng.gen_range(-1.0..1.0));
        let s = ModeScaler::fit(&m, ScalerKind::SumOfMaxima).unwrap();
        let scaled = s.scale(&m).unwrap();
        let total: f64 = (0..n).map(|j| scaled.row(j).amax()).sum();
        sum_err = sum_err.max((total - 1.0).abs());
        max_abs = max_abs.max(scaled.amax());
        let back = s.unscale(&scaled).unwrap();
        round = round.max((back - &m).amax() / m.amax());
    }
    (
        sum_err <= 1e-12 && max_abs <= 1.0 && round <= 1e-12,
        format!("100 matrices: |sum max - 1| {sum_err:.1e}, max |entry| {max_abs:.6}, round trip {round:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn split_arithmetic() -> (bool, String) {
    let plan = split_sequential(999, DEFAULT_TEST_FRACTION, DEFAULT_TRAIN_FRACTION, 16).unwrap();
    let series = DMatrix::<f64>::zeros(18, 800);
    let windows = make_windows(&series, 10, 6).unwrap().len();
    let got = (plan.n_train, plan.n_val, plan.n_test);
    (
        got == (680, 120, 199) && plan.n_train + plan.n_val == 800 && windows == 785,
        format!("n_t 999 -> {got:?}, K 800 q 10 p 6 -> {windows} windows"),
    )
}

// ---------------------------------------------------------------- 6 to 9

struct Run {
    pipeline: RomPipeline,
    report: EvalReport,
}

fn config(case: &str, kind: ModelKind, seed: u64) -> RomConfig {
    let mut cfg = RomConfig::default();
    // 90% of the singular-value sum keeps 5 of the 6 modes, so a truncation floor exists
    cfg.pod.energy = Some(0.9);
    cfg.model.kind = kind;
    cfg.model.units = 100;
    cfg.train = Presets::builtin().config(case).unwrap();
    cfg.train.seed = seed;
    cfg
}

fn run(data: &SnapshotTensor, case: &str, kind: ModelKind, seed: u64) -> Run {
    let start = Instant::now();
    let (pipeline, train) = fit_pipeline(data, &config(case, kind, seed)).unwrap();
    let report = pipeline.evaluate(data).unwrap();
    println!(
        "       case {case} {kind:?} seed {seed}: N {} best epoch {}/{} global RRMSE {:.5} (floor {:.5}) \
         mean RRMSE {:.5} n-MSE0 max {:.3}% mass balance {:.2e} [{:.1} s]",
        pipeline.n_modes(),
        train.best_epoch,
        train.stop_epoch(),
        report.global_rrmse,
        report.global_pod_floor,
        report.mean_rrmse(),
        100.0 * report.max_nmse(0),
        report.max_mass_balance(),
        start.elapsed().as_secs_f64()
    );
    Run { pipeline, report }
}

fn forecasting(r: &Run) -> (bool, String) {
    let rep = &r.report;
    let nmse_ok = rep.nmse.row(0).iter().all(|v| v.is_finite() && *v < 0.02);
    let worst_ratio = rep
        .rrmse
        .iter()
        .zip(&rep.pod_floor)
        .map(|(e, f)| e / f)
        .fold(0.0, f64::max);
    let per_var: Vec<String> = rep
        .var_names
        .iter()
        .zip(rep.rrmse.iter().zip(&rep.pod_floor))
        .map(|(n, (e, f))| format!("{n} {e:.4}/{f:.4}"))
        .collect();
    (
        nmse_ok && worst_ratio <= 2.0,
        format!(
            "N {} over {} test steps: max first-mode n-MSE {:.3}% (limit 2%), worst RRMSE/floor {:.3} (limit 2); {}",
            r.pipeline.n_modes(),
            rep.steps(),
            100.0 * rep.max_nmse(0),
            worst_ratio,
            per_var.join(", ")
        ),
    )
}

fn comparison(lstm: &[Run], cnn: &[Run]) -> (bool, String) {
    let wins = lstm
        .iter()
        .zip(cnn)
        .filter(|(l, c)| l.report.mean_rrmse() <= c.report.mean_rrmse())
        .count();
    let pairs: Vec<String> = lstm
        .iter()
        .zip(cnn)
        .zip(SEEDS)
        .map(|((l, c), s)| format!("seed {s}: {:.5} vs {:.5}", l.report.mean_rrmse(), c.report.mean_rrmse()))
        .collect();
    (
        2 * wins > SEEDS.len(),
        format!("LSTM <= CNN mean RRMSE on {wins}/{} seeds ({})", SEEDS.len(), pairs.join(", ")),
    )
}

/// Mass-balance statistics at or below this are floating-point roundoff.
const ROUNDOFF: f64 = 1e-12;

fn physics_loss(data: &SnapshotTensor, pa: &[Run], mse: &[Run]) -> (bool, String) {
    let mut no_worse = 0;
    let mut pairs = Vec::new();
    for ((a, b), s) in pa.iter().zip(mse).zip(SEEDS) {
        let (x, y) = (a.report.max_mass_balance(), b.report.max_mass_balance());
        if x <= y + ROUNDOFF {
            no_worse += 1;
        }
        pairs.push(format!("seed {s}: {x:.2e} vs {y:.2e}"));
    }

    // PA-MSE >= MSE on every window of every PA-trained model
    let mut batches = 0;
    let mut component_ok = true;
    let mut map_norm = 0.0f64;
    for r in pa {
        let p = &r.pipeline;
        let mb = MassBalance::from_basis(&p.basis.modes, p.basis.layout, &p.is_species, &p.stats.sigma, &p.scaler.factor, 1.0)
            .unwrap();
        map_norm = map_norm.max(mb.species_sum.amax());
        let series = p.scaler.scale(&p.project_tensor(data).unwrap()).unwrap();
        let spec = p.network.spec;
        let w = make_windows(&series, spec.window, spec.horizon).unwrap();
        for (input, target) in w.pairs() {
            let pred = p.network.forward(input).unwrap();
            let plain = loss_mse(&pred, target, spec.n_modes).unwrap();
            let aware = loss_pa_mse(&pred, target, spec.n_modes, &mb).unwrap();
            component_ok &= aware.total >= plain && aware.mse == plain;
            batches += 1;
        }
    }
    (
        no_worse >= 2 && component_ok,
        format!(
            "PA-MSE (case E) no worse than MSE (case B) within {ROUNDOFF:.0e} on {no_worse}/3 seeds ({}); \
             PA-MSE >= MSE on all {batches} windows: {component_ok}; max |species-sum map| {map_norm:.1e}",
            pairs.join(", ")
        ),
    )
}

fn transfer(r: &Run, three: &SnapshotTensor) -> (bool, String) {
    let (rep, _) = transfer_with_prediction(&r.pipeline, three, TransferMode::Rollout).unwrap();
    let (forced, _) = transfer_with_prediction(&r.pipeline, three, TransferMode::TeacherForced).unwrap();
    let finite = rep.nmse.iter().all(|v| v.is_finite())
        && rep.rrmse.iter().all(|v| v.is_finite())
        && rep.mass_balance.iter().all(|v| v.is_finite());
    let complete = rep.steps() == three.n_t() - r.pipeline.network.spec.window && rep.rrmse.len() == three.var_names().len();
    let below = rep.nmse.row(0).iter().all(|v| *v < 0.10);
    (
        finite && complete && below,
        format!(
            "report complete: {complete}, finite: {finite}, {} steps, max first-mode n-MSE {:.2}% (limit 10%), \
             global RRMSE {:.4} (floor {:.4}); teacher-forced diagnostic: n-MSE {:.2}%, RRMSE {:.4}",
            rep.steps(),
            100.0 * rep.max_nmse(0),
            rep.global_rrmse,
            rep.global_pod_floor,
            100.0 * forced.max_nmse(0),
            forced.global_rrmse
        ),
    )
}

// ---------------------------------------------------------------- 10

fn determinism() -> (bool, String) {
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), "[generate]\nn_t = 400\n[train]\nmax_epochs = 4\npatience = 4\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_podrom");
    let run = |args: &[&str]| {
        let out = Command::new(bin).current_dir(d).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["--config", "cfg.toml", "--out", "gen", "generate"]);
    for out in ["a", "b"] {
        run(&["--config", "cfg.toml", "--seed", "11", "--out", out, "train", "--data", "gen/dataset.romf", "--case", "E"]);
    }
    let same = |f: &str| fs::read(d.join("a").join(f)).unwrap() == fs::read(d.join("b").join(f)).unwrap();
    let (ckpt, report) = (same("model.romw"), same("train_report.csv"));
    (
        ckpt && report,
        format!("two `podrom train` runs, seed 11: checkpoint identical {ckpt}, TrainReport identical {report}"),
    )
}

fn main() {
    let start = Instant::now();
    let mut results = vec![
        check(1, "parameter counts", parameter_counts),
        check(2, "gradient correctness", gradients),
        check(3, "POD oracle equivalence", pod_oracle),
        check(4, "sum-of-maxima scaler", scaler_invariant),
        check(5, "split and window arithmetic", split_arithmetic),
    ];

    let data = generate_synthetic_flame(&FlameConfig::default()).unwrap();
    println!("       training case E LSTM and CNN, case B LSTM, seeds {SEEDS:?}");
    let lstm_e: Vec<Run> = SEEDS.iter().map(|&s| run(&data, "E", ModelKind::Lstm, s)).collect();
    results.push(check(6, "desk-scale forecasting", || forecasting(&lstm_e[0])));
    let cnn_e: Vec<Run> = SEEDS.iter().map(|&s| run(&data, "E", ModelKind::Cnn, s)).collect();
    results.push(check(7, "LSTM vs CNN", || comparison(&lstm_e, &cnn_e)));
    let lstm_b: Vec<Run> = SEEDS.iter().map(|&s| run(&data, "B", ModelKind::Lstm, s)).collect();
    results.push(check(8, "physics-aware loss", || physics_loss(&data, &lstm_e, &lstm_b)));

    let three = generate_synthetic_flame(&FlameConfig {
        profile: InletProfile::three_frequency(),
        ..FlameConfig::default()
    })
    .unwrap();
    results.push(check(9, "transfer", || transfer(&lstm_e[0], &three)));
    results.push(check(10, "determinism", determinism));

    let failed: Vec<u32> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} passed in {:.0} s{}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
