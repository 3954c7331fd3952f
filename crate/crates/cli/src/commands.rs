use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use podrom::data::io::{read_dataset, read_stats, write_dataset, write_stats};
use podrom::data::{center_scale, generate_synthetic_flame, InletProfile, SnapshotMatrix, SnapshotTensor};
use podrom::forecast::EpochRecord;
use podrom::neuralnet::ModelKind;
use podrom::pod::{energy_fraction, read_basis, write_basis, EnergyMetric, TemporalModes};
use podrom::rom::{fit_pipeline_with, reduce, rrmse_per_variable_scaled, transfer_with_prediction, EvalReport, PodSource, RomPipeline, TransferMode, PIPELINE_FILES};
use podrom::{Result, RomError};

use crate::config::CliConfig;
use crate::manifest::RunManifest;
use crate::{Cli, Command, GenerateArgs, ModelArg, PodArgs, PredictArgs, ProfileArg, TrainArgs, TransferArgs};

const DATASET_FILE: &str = "dataset.romf";
const PREDICTION_FILE: &str = "prediction.romf";
const STATS_FILE: &str = "stats.romc";
const BASIS_FILE: &str = "basis.romb";
const REPORT_FILES: [&str; 4] = ["rrmse_per_variable.csv", "nmse.csv", "mass_balance.csv", "summary.txt"];

pub fn run(cli: &Cli) -> Result<()> {
    let (cfg, raw) = CliConfig::load(cli.config.as_deref())?;
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { cli, cfg, raw };
    match &cli.command {
        Command::Generate(a) => ctx.generate(a),
        Command::Pod(a) => ctx.pod(a),
        Command::Train(a) => ctx.train(a),
        Command::Predict(a) => ctx.predict(a),
        Command::Transfer(a) => ctx.transfer(a),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: CliConfig,
    raw: Vec<u8>,
}

impl Ctx<'_> {
    fn manifest(&self, command: &str, seed: Option<u64>) -> RunManifest {
        RunManifest::new(command, self.cli.config.as_deref(), &self.raw, seed)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.cli.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn generate(&self, a: &GenerateArgs) -> Result<()> {
        let mut g = self.cfg.generate.clone();
        if let Some(p) = a.profile {
            g.profile = match p {
                ProfileArg::Single => InletProfile::single_frequency(),
                ProfileArg::Three => InletProfile::three_frequency(),
            };
        }
        if let Some(s) = self.cli.seed {
            g.seed = s;
        }
        let mut m = self.manifest("generate", Some(g.seed));
        m.stage("generate");
        let tensor = generate_synthetic_flame(&g)?;
        m.stage("write");
        let path = self.out(DATASET_FILE);
        write_dataset(&path, &tensor)?;
        m.output(&path)?;
        m.write(&self.cli.out)?;

        let (nv, nx, ny, nt) = tensor.dims();
        let mb = tensor.mass_balance_deviation().into_iter().fold(0.0, f64::max);
        println!("wrote {}: {nv} variables on {nx} x {ny}, {nt} snapshots, dt = {}", path.display(), tensor.dt());
        println!("max species-sum deviation from 1: {mb:.3e}");
        Ok(())
    }

    fn pod(&self, a: &PodArgs) -> Result<()> {
        let mut rom = self.cfg.rom();
        if a.modes.is_some() || a.energy.is_some() {
            rom.pod.modes = a.modes;
            rom.pod.energy = a.energy;
        }
        rom.pod.truncation()?;
        let mut m = self.manifest("pod", None);
        m.stage("read");
        require(&a.data)?;
        let tensor = read_dataset(&a.data)?;
        m.input(&a.data)?;
        m.stage("pod");
        let red = reduce(&tensor, &rom, PodSource::Compute)?;
        let fit = red.split.fit_range();
        let fit_modes = red.modes.columns(fit.start, fit.len()).into_owned();

        let xs = center_scale(&tensor.to_snapshot_matrix().columns(fit.clone()), &red.stats)?;
        let recon = SnapshotMatrix::new(&red.basis.modes * &fit_modes, xs.layout)?;
        let rrmse = rrmse_per_variable_scaled(&xs, &recon, tensor.var_names())?;

        m.stage("write");
        let basis_path = self.out(BASIS_FILE);
        write_basis(&basis_path, &red.basis, &TemporalModes { values: fit_modes })?;
        let stats_path = self.out(STATS_FILE);
        write_stats(&stats_path, &red.stats)?;

        let n = red.basis.n_modes();
        let mut energy = String::from("mode,singular_value,energy_singular_sum,energy_squared_sum,kept\n");
        for (k, s) in red.basis.spectrum.iter().enumerate() {
            let e1 = energy_fraction(&red.basis, k + 1, EnergyMetric::SingularSum)?;
            let e2 = energy_fraction(&red.basis, k + 1, EnergyMetric::SquaredSum)?;
            let _ = writeln!(energy, "{},{s:.17e},{e1:.17e},{e2:.17e},{}", k + 1, k < n);
        }
        let energy_path = self.out("energy.csv");
        fs::write(&energy_path, energy)?;
        let mut rr = String::from("variable,rrmse\n");
        for (name, v) in tensor.var_names().iter().zip(&rrmse) {
            let _ = writeln!(rr, "{name},{v:.17e}");
        }
        let rr_path = self.out("pod_rrmse.csv");
        fs::write(&rr_path, rr)?;
        for p in [&basis_path, &stats_path, &energy_path, &rr_path] {
            m.output(p)?;
        }
        m.write(&self.cli.out)?;

        println!(
            "kept {n} of {} modes ({:.4} of {:?} energy), fitted on snapshots {}..{}",
            red.basis.spectrum.len(),
            energy_fraction(&red.basis, n, rom.pod.metric)?,
            rom.pod.metric,
            fit.start,
            fit.end
        );
        for (name, v) in tensor.var_names().iter().zip(&rrmse) {
            println!("  {name:>6} reconstruction RRMSE {v:.4e}");
        }
        Ok(())
    }

    fn train(&self, a: &TrainArgs) -> Result<()> {
        let mut rom = self.cfg.rom();
        if let Some(case) = &a.case {
            self.cfg.presets()?.get(case)?.apply(case, &mut rom.train);
        }
        if let Some(s) = self.cli.seed {
            rom.train.seed = s;
        }
        if let Some(k) = a.model {
            rom.model.kind = match k {
                ModelArg::Lstm => ModelKind::Lstm,
                ModelArg::Cnn => ModelKind::Cnn,
            };
        }
        if let Some(u) = a.units {
            rom.model.units = u;
        }
        if let Some(e) = a.epochs {
            rom.train.max_epochs = e;
            rom.train.patience = rom.train.patience.min(e);
        }
        rom.validate()?;

        let mut m = self.manifest("train", Some(rom.train.seed));
        m.stage("read");
        require(&a.data)?;
        let tensor = read_dataset(&a.data)?;
        m.input(&a.data)?;
        let source = match &a.basis {
            None => PodSource::Compute,
            Some(dir) => {
                let (sp, bp) = (dir.join(STATS_FILE), dir.join(BASIS_FILE));
                require(&sp)?;
                require(&bp)?;
                let stats = read_stats(&sp)?;
                let (basis, _) = read_basis(&bp)?;
                m.input(&sp)?;
                m.input(&bp)?;
                PodSource::Precomputed { stats, basis }
            }
        };
        m.stage("fit");
        let verbose = self.cli.verbose;
        let (pipeline, report) = fit_pipeline_with(&tensor, &rom, source, |r: &EpochRecord| {
            if verbose {
                eprintln!(
                    "epoch {:4}  lr {:.3e}  train {:.6e}  val {:.6e}",
                    r.epoch, r.lr, r.train_loss, r.val_loss
                );
            }
        })?;
        m.stage("write");
        pipeline.save(&self.cli.out)?;
        let csv = self.out("train_report.csv");
        fs::write(&csv, report.to_csv())?;
        for f in PIPELINE_FILES {
            m.output(&self.out(f))?;
        }
        m.output(&csv)?;
        m.write(&self.cli.out)?;

        println!(
            "case {} {:?}: {} modes, {} parameters, best epoch {} of {} (val loss {:.6e}{})",
            rom.train.case,
            rom.model.kind,
            pipeline.n_modes(),
            pipeline.network.params.values.len(),
            report.best_epoch,
            report.stop_epoch(),
            report.best_val_loss,
            if report.stopped_early { ", stopped early" } else { "" }
        );
        println!("pipeline written to {}", self.cli.out.display());
        Ok(())
    }

    fn predict(&self, a: &PredictArgs) -> Result<()> {
        let mut m = self.manifest("predict", None);
        m.stage("load");
        require_pipeline(&a.pipeline)?;
        let pipeline = RomPipeline::load(&a.pipeline)?;
        for f in PIPELINE_FILES {
            m.input(&a.pipeline.join(f))?;
        }
        let points = match &a.export_points {
            Some(s) => parse_points(s)?,
            None => Vec::new(),
        };
        let layout = pipeline.basis.layout;
        if let Some(&(i, j)) = points.iter().find(|&&(i, j)| i >= layout.nx || j >= layout.ny) {
            return Err(RomError::Config(format!(
                "point ({i},{j}) outside the {} x {} grid",
                layout.nx, layout.ny
            )));
        }
        let steps = a.steps.unwrap_or(pipeline.split.n_test);
        if steps == 0 {
            return Err(RomError::Config("--steps must be positive".into()));
        }
        let start = pipeline.split.fit_range().end;

        m.stage("predict");
        let mut truth = None;
        let (pred, report) = match &a.truth {
            Some(path) => {
                require(path)?;
                let t = read_dataset(path)?;
                m.input(path)?;
                if t.n_t() < start + steps {
                    println!(
                        "truth has {} snapshots, fewer than the {} needed; metrics skipped",
                        t.n_t(),
                        start + steps
                    );
                    (pipeline.predict_snapshots(steps)?, None)
                } else {
                    let (r, p) = pipeline.evaluate_steps(&t, steps)?;
                    truth = Some(t);
                    (p, Some(r))
                }
            }
            None => {
                println!("no --truth given; metrics skipped");
                (pipeline.predict_snapshots(steps)?, None)
            }
        };

        m.stage("write");
        let pred_path = self.out(PREDICTION_FILE);
        write_dataset(&pred_path, &pred)?;
        m.output(&pred_path)?;
        if let Some(r) = &report {
            self.write_report(r, &mut m)?;
            print!("{}", r.summary());
        }
        if !points.is_empty() {
            let path = self.out("points.csv");
            fs::write(&path, points_csv(&pred, truth.as_ref(), start, &points))?;
            m.output(&path)?;
        }
        m.write(&self.cli.out)?;
        println!("forecast {steps} snapshots from index {start} to {}", pred_path.display());
        Ok(())
    }

    fn transfer(&self, a: &TransferArgs) -> Result<()> {
        let mut m = self.manifest("transfer", None);
        m.stage("load");
        require_pipeline(&a.pipeline)?;
        let pipeline = RomPipeline::load(&a.pipeline)?;
        for f in PIPELINE_FILES {
            m.input(&a.pipeline.join(f))?;
        }
        require(&a.data)?;
        let data = read_dataset(&a.data)?;
        m.input(&a.data)?;
        let mode = if a.teacher_forced {
            TransferMode::TeacherForced
        } else {
            TransferMode::Rollout
        };
        self.log(format!("transfer mode {mode:?}"));
        m.stage("evaluate");
        let (report, pred) = transfer_with_prediction(&pipeline, &data, mode)?;
        m.stage("write");
        let pred_path = self.out(PREDICTION_FILE);
        write_dataset(&pred_path, &pred)?;
        m.output(&pred_path)?;
        self.write_report(&report, &mut m)?;
        m.write(&self.cli.out)?;
        print!("{}", report.summary());
        Ok(())
    }

    fn write_report(&self, r: &EvalReport, m: &mut RunManifest) -> Result<()> {
        r.write_dir(&self.cli.out)?;
        for f in REPORT_FILES {
            m.output(&self.out(f))?;
        }
        Ok(())
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(RomError::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} not found", path.display()),
        )))
    }
}

fn require_pipeline(dir: &Path) -> Result<()> {
    PIPELINE_FILES.iter().try_for_each(|f| require(&dir.join(f)))
}

/// Parses `"(i,j) (i,j) ..."`.
pub fn parse_points(s: &str) -> Result<Vec<(usize, usize)>> {
    let bad = || RomError::Config(format!("cannot parse points `{s}`, expected e.g. \"(3,4) (10,2)\""));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut rest = compact.as_str();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or_else(bad)?;
        let close = body.find(')').ok_or_else(bad)?;
        let (i, j) = body[..close].split_once(',').ok_or_else(bad)?;
        out.push((i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?));
        rest = body[close + 1..].trim_start_matches(',');
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Time series of every variable at the probe points, with truth columns
/// when available.
fn points_csv(pred: &SnapshotTensor, truth: Option<&SnapshotTensor>, start: usize, points: &[(usize, usize)]) -> String {
    let names = pred.var_names();
    let mut s = String::from("snapshot,time");
    for &(i, j) in points {
        for name in names {
            let _ = write!(s, ",{name}({i};{j})");
            if truth.is_some() {
                let _ = write!(s, ",{name}({i};{j})_truth");
            }
        }
    }
    s.push('\n');
    for k in 0..pred.n_t() {
        let _ = write!(s, "{},{:.9e}", start + k, (start + k) as f64 * pred.dt());
        for &(i, j) in points {
            for v in 0..names.len() {
                let _ = write!(s, ",{:.17e}", pred.get(v, i, j, k));
                if let Some(t) = truth {
                    let _ = write!(s, ",{:.17e}", t.get(v, i, j, start + k));
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_points("(3,4) (10,2)").unwrap(), vec![(3, 4), (10, 2)]);
        assert_eq!(parse_points(" ( 0 , 1 ),(2,3)").unwrap(), vec![(0, 1), (2, 3)]);
        for bad in ["", "3,4", "(3,4", "(a,1)", "(1)"] {
            assert!(parse_points(bad).is_err(), "{bad}");
        }
    }
}
