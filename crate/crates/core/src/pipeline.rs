//! End-to-end orchestration behind the CLI: generate → train → reach →
//! validate → report. Every stage reads its inputs from and writes its
//! outputs to the run directory.
//!
//! ```text
//! <out>/dataset/            manifest.json, traj_<k>.csv
//! <out>/model/              model.json, loss.csv, timing_train.json
//! <out>/reach/<scenario>/   reach_<k>.json, ltv_<k>.json, omega.json,
//!                           hull_<plane>_<k>.csv, footprint_<plane>.csv,
//!                           timing.csv
//! <out>/validate/<scenario>/mc_report.json
//! <out>/report/             summary.txt, hull_extents.csv,
//!                           hull_extent_diff.csv, timing_summary.txt
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::{AnchorMode, RunConfig};
use crate::dmdc::{build_windows, fit_windows, write_ltv, LtvStep};
use crate::error::{Error, Result};
use crate::hull::{extents, polygon_area, tube_projection, write_polygon_csv};
use crate::io::{fmt_f64, read_json, write_json, write_text};
use crate::mc::{
    containment_report, mc_reach, replay_contacts, write_mc_reports, InitialSampling, McConfig, McReport, Tolerance,
};
use crate::mlp::{load_checkpoint, save_checkpoint, train, write_loss_history, MultistepData, NeuralModel};
use crate::oracle::{Dynamics, LinearMap};
use crate::quadrotor::{generate_dataset, read_dataset, write_dataset, ControlSchedule, Quadrotor, Scenario};
use crate::reach::{init_contacts, propagate_front, read_tube, write_reach_report, ContactFront, ReachTube};
use crate::rng::{substream, Domain};
use crate::sets::{BoxSet, InputSet};

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.model().join("model.json")
    }
    pub fn reach(&self, scenario: Scenario) -> PathBuf {
        self.root.join("reach").join(scenario.as_str())
    }
    pub fn validate(&self, scenario: Scenario) -> PathBuf {
        self.root.join("validate").join(scenario.as_str())
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub trajectories: usize,
    pub steps: usize,
    pub dir: PathBuf,
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let d = &cfg.dataset;
    let ds = generate_dataset(
        d.trajectories,
        d.steps,
        d.dt,
        &cfg.initial_box(),
        &cfg.control_model(Scenario::Nominal),
        &cfg.quad,
        cfg.seed,
    )?;
    write_dataset(&layout.dataset(), &ds)?;
    Ok(GenerateSummary {
        trajectories: ds.trajectories.len(),
        steps: ds.steps(),
        dir: layout.dataset(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub final_loss: f64,
    pub epochs: usize,
    pub seconds: f64,
    pub checkpoint: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct TrainTiming {
    seconds: f64,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let ds = read_dataset(&layout.dataset())?;
    if ds.dt != cfg.dataset.dt {
        return Err(Error::Misaligned(format!(
            "dataset dt {} differs from configured dt {}",
            ds.dt, cfg.dataset.dt
        )));
    }
    let data = MultistepData::from_dataset(&ds)?;
    let train_cfg = cfg.train_config();
    let t = Instant::now();
    let out = train(&data, &train_cfg)?;
    let seconds = t.elapsed().as_secs_f64();
    save_checkpoint(&layout.checkpoint(), &out.params, train_cfg.seed, out.final_loss)?;
    write_loss_history(&layout.model().join("loss.csv"), &out.history)?;
    write_json(&layout.model().join("timing_train.json"), &TrainTiming { seconds })?;
    Ok(TrainSummary {
        final_loss: out.final_loss,
        epochs: out.history.len(),
        seconds,
        checkpoint: layout.checkpoint(),
    })
}

/// Every contact point must satisfy every halfspace of its front to this
/// tolerance; the online loop stops otherwise.
pub const SANDWICH_TOL: f64 = 1e-9;

/// Per-step record of the online loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTiming {
    pub k: usize,
    pub seconds: f64,
    pub width: usize,
    pub condition: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct ReachOutcome {
    pub tube: ReachTube,
    pub lifts: Vec<LtvStep>,
    pub timings: Vec<StepTiming>,
}

/// Online loop: at each step, excite `model` around the current front, fit
/// a lift and push the front through it. A lift that is too ill-conditioned
/// for the adjoint solve is refitted with the configured wider windows.
pub fn online_reach(
    model: &dyn Dynamics,
    cfg: &RunConfig,
    omega: &dyn InputSet,
    parallel: bool,
) -> Result<ReachOutcome> {
    let x0 = cfg.initial_box();
    let mut front = init_contacts(&x0, cfg.reach.normals)?;
    let mut fronts = vec![front.clone()];
    let mut lifts = Vec::with_capacity(cfg.reach.horizon);
    let mut timings = Vec::with_capacity(cfg.reach.horizon);
    let widths: Vec<usize> = std::iter::once(cfg.dmdc.width)
        .chain(cfg.dmdc.retry_widths.iter().copied())
        .collect();

    for k in 0..cfg.reach.horizon {
        let t = Instant::now();
        let anchors = anchors(&front, cfg.dmdc.anchors, cfg.dmdc.excitations);
        let omega_k = omega.box_at(k);
        let mut last_err = None;
        let mut done = None;
        for &w in &widths {
            let mut rng = substream(cfg.seed, Domain::Excitation, k as u64);
            let attempt = build_windows(model, &anchors, omega, k, w, &mut rng)
                .and_then(|wins| fit_windows(&wins, cfg.dmdc.svd_tol, cfg.dmdc.form))
                .and_then(|lift| propagate_front(&front, &lift, &omega_k, parallel).map(|next| (lift, next, w)));
            match attempt {
                Ok(ok) => {
                    done = Some(ok);
                    break;
                }
                Err(e @ Error::IllConditionedLift { .. }) => last_err = Some(e),
                Err(e) => {
                    return Err(Error::Lift {
                        step: k,
                        source: Box::new(e),
                    })
                }
            }
        }
        let (lift, next, width) = done.ok_or_else(|| Error::Lift {
            step: k,
            source: Box::new(last_err.expect("at least one width was tried")),
        })?;
        let seconds = t.elapsed().as_secs_f64();
        timings.push(StepTiming {
            k,
            seconds,
            width,
            condition: crate::reach::condition_number(&lift.a),
            rank: lift.diagnostics.rank,
        });
        next.check(SANDWICH_TOL)
            .map_err(|detail| Error::Sandwich { step: k + 1, detail })?;
        lifts.push(lift);
        front = next;
        fronts.push(front.clone());
    }
    Ok(ReachOutcome {
        tube: ReachTube { fronts },
        lifts,
        timings,
    })
}

/// Window start states: the selected anchors, each repeated `excitations`
/// times so that every anchor is excited by independent control draws.
fn anchors(front: &ContactFront, mode: AnchorMode, excitations: usize) -> Vec<DVector<f64>> {
    let mut out = vec![front.centroid()];
    if mode == AnchorMode::Contacts {
        out.extend(front.contacts.iter().cloned());
    }
    let base = out.len();
    out.reserve(base * excitations.saturating_sub(1));
    for _ in 1..excitations {
        out.extend_from_within(..base);
    }
    out
}

fn load_model(cfg: &RunConfig) -> Result<NeuralModel> {
    let (params, _) = load_checkpoint(&Layout::new(&cfg.out).checkpoint())?;
    if params.n_state != 12 || params.n_input != 4 {
        return Err(Error::Checkpoint(format!(
            "network maps {} states and {} inputs, expected 12 and 4",
            params.n_state, params.n_input
        )));
    }
    Ok(NeuralModel {
        params,
        dt: cfg.dataset.dt,
    })
}

pub fn schedule(cfg: &RunConfig, scenario: Scenario) -> ControlSchedule {
    ControlSchedule {
        model: cfg.control_model(scenario),
        dt: cfg.dataset.dt,
    }
}

#[derive(Debug, Clone)]
pub struct ReachSummary {
    pub scenario: Scenario,
    pub steps: usize,
    pub max_step_seconds: f64,
    pub mean_step_seconds: f64,
    pub dir: PathBuf,
}

pub fn cmd_reach(cfg: &RunConfig, scenario: Scenario) -> Result<ReachSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let model = load_model(cfg)?;
    let omega = schedule(cfg, scenario);
    let outcome = online_reach(&model, cfg, &omega, cfg.reach.parallel)?;
    let dir = layout.reach(scenario);
    write_reach_artifacts(&dir, cfg, &omega, &outcome)?;

    let secs: Vec<f64> = outcome.timings.iter().map(|t| t.seconds).collect();
    Ok(ReachSummary {
        scenario,
        steps: secs.len(),
        max_step_seconds: secs.iter().copied().fold(0.0, f64::max),
        mean_step_seconds: secs.iter().sum::<f64>() / secs.len().max(1) as f64,
        dir,
    })
}

fn write_reach_artifacts(dir: &Path, cfg: &RunConfig, omega: &dyn InputSet, outcome: &ReachOutcome) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for (k, front) in outcome.tube.fronts.iter().enumerate() {
        let seconds = if k == 0 { 0.0 } else { outcome.timings[k - 1].seconds };
        write_reach_report(dir, front, seconds)?;
    }
    for lift in &outcome.lifts {
        write_ltv(dir, lift)?;
    }
    let boxes: Vec<BoxSet> = (0..outcome.lifts.len()).map(|k| omega.box_at(k)).collect();
    write_json(&dir.join("omega.json"), &boxes)?;
    for (name, plane) in cfg.planes()? {
        let proj = tube_projection(&outcome.tube, plane)?;
        for (k, poly) in proj.steps.iter().enumerate() {
            write_polygon_csv(&dir.join(format!("hull_{name}_{k}.csv")), poly)?;
        }
        write_polygon_csv(&dir.join(format!("footprint_{name}.csv")), &proj.footprint)?;
    }
    let mut timing = String::from("k,seconds,width,condition,rank\n");
    for t in &outcome.timings {
        let _ = writeln!(timing, "{},{},{},{},{}", t.k, fmt_f64(t.seconds), t.width, fmt_f64(t.condition), t.rank);
    }
    write_text(&dir.join("timing.csv"), &timing)
}

#[derive(Debug, Clone)]
pub struct ValidateSummary {
    pub scenario: Scenario,
    pub reports: Vec<McReport>,
    /// True when every gated report passed.
    pub passed: bool,
}

/// Reports that decide the exit status: the linear self-test always, the
/// network only for the scenario it was trained on. The simulator is never
/// gated since the tube approximates the network, not the plant.
pub fn gated(scenario: Scenario, model: &str) -> bool {
    match model {
        "truth" => false,
        "network" => scenario == Scenario::Nominal,
        _ => true,
    }
}

/// Monte-Carlo checks of the stored tube for `scenario`: the learned model
/// against the configured threshold, an exact linear self-test at zero
/// tolerance and the simulator. Only the self-test and, for the nominal
/// scenario, the network decide [`ValidateSummary::passed`].
pub fn cmd_validate(cfg: &RunConfig, scenario: Scenario) -> Result<ValidateSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let tube = read_tube(&layout.reach(scenario))?;
    let model = load_model(cfg)?;
    let omega = schedule(cfg, scenario);
    let v = &cfg.validate;
    let mc_cfg = McConfig {
        samples: v.samples,
        steps: tube.horizon(),
        scheme: v.scheme,
        initial: InitialSampling::Uniform,
        seed: cfg.seed,
    };
    let x0 = cfg.initial_box();
    let tol = Tolerance::RangeFraction(v.slack);

    let mut reports = Vec::new();
    let cloud = mc_reach(&model, &x0, &omega, &mc_cfg)?;
    let containment = containment_report(&tube, &cloud, tol)?;
    reports.push(McReport {
        scenario: scenario.to_string(),
        model: "network".into(),
        config: mc_cfg.clone(),
        threshold: v.threshold,
        passed: containment.worst_fraction() <= v.threshold,
        containment,
    });
    drop(cloud);

    if v.truth {
        let truth = Quadrotor {
            params: cfg.quad,
            dt: cfg.dataset.dt,
        };
        let cloud = mc_reach(&truth, &x0, &omega, &mc_cfg)?;
        let containment = containment_report(&tube, &cloud, tol)?;
        reports.push(McReport {
            scenario: scenario.to_string(),
            model: "truth".into(),
            config: mc_cfg.clone(),
            threshold: v.threshold,
            passed: containment.worst_fraction() <= v.threshold,
            containment,
        });
    }

    reports.push(lti_self_test(mc_cfg.steps, cfg.seed)?);

    write_mc_reports(&layout.validate(scenario).join("mc_report.json"), &reports)?;
    let passed = reports.iter().filter(|r| gated(scenario, &r.model)).all(|r| r.passed);
    Ok(ValidateSummary {
        scenario,
        reports,
        passed,
    })
}

/// Double integrator with a box input: the tube must contain every sample
/// exactly and every contact must be reproduced by replaying its controls.
pub fn lti_self_test(steps: usize, seed: u64) -> Result<McReport> {
    let model = LinearMap::double_integrator(0.1);
    let x0 = BoxSet::symmetric(&[1.0, 1.0])?;
    let omega = BoxSet::symmetric(&[1.0])?;
    let lift = LtvStep::exact(0, 0.1, model.a.clone(), model.b.clone());
    let lifts: Vec<LtvStep> = (0..steps).map(|k| LtvStep { k, ..lift.clone() }).collect();
    let front0 = init_contacts(&x0, crate::reach::NormalScheme::AxisAligned)?;
    let tube = crate::reach::reach_sequence(&front0, &lifts, &omega, steps, false)?;
    let mc_cfg = McConfig {
        samples: 1000,
        steps,
        scheme: crate::mc::ControlScheme::Mixed,
        initial: InitialSampling::Uniform,
        seed,
    };
    let cloud = mc_reach(&model, &x0, &omega, &mc_cfg)?;
    let containment = containment_report(&tube, &cloud, Tolerance::Absolute(1e-9))?;
    let replay_ok = replay_contacts(&model, &tube)?
        .iter()
        .flatten()
        .all(|g| g.abs() <= 1e-9);
    Ok(McReport {
        scenario: "lti_self_test".into(),
        model: "double_integrator".into(),
        config: mc_cfg,
        threshold: 0.0,
        passed: containment.total_violations() == 0 && replay_ok,
        containment,
    })
}

/// One row of `hull_extents.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtentRow {
    pub scenario: Scenario,
    pub plane: String,
    /// `None` for the tube footprint.
    pub k: Option<usize>,
    pub extents: [f64; 4],
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub scenarios: Vec<Scenario>,
    pub extents: Vec<ExtentRow>,
    pub dir: PathBuf,
}

pub fn hull_extent_rows(cfg: &RunConfig, scenario: Scenario, tube: &ReachTube) -> Result<Vec<ExtentRow>> {
    let mut rows = Vec::new();
    for (name, plane) in cfg.planes()? {
        let proj = tube_projection(tube, plane)?;
        for (k, poly) in proj.steps.iter().enumerate() {
            rows.push(ExtentRow {
                scenario,
                plane: name.clone(),
                k: Some(k),
                extents: extents(poly),
                area: polygon_area(poly),
            });
        }
        rows.push(ExtentRow {
            scenario,
            plane: name.clone(),
            k: None,
            extents: extents(&proj.footprint),
            area: polygon_area(&proj.footprint),
        });
    }
    Ok(rows)
}

fn step_label(k: Option<usize>) -> String {
    k.map_or_else(|| "footprint".to_string(), |k| k.to_string())
}

/// Aggregates every available artifact into `report/`.
pub fn cmd_report(cfg: &RunConfig) -> Result<ReportSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let scenarios: Vec<Scenario> = [Scenario::Nominal, Scenario::RotorFailure]
        .into_iter()
        .filter(|s| layout.reach(*s).join("reach_0.json").exists())
        .collect();
    if scenarios.is_empty() {
        return Err(Error::MissingArtifact(layout.reach(cfg.scenario).join("reach_0.json")));
    }

    let mut summary = String::from("Reachability run summary\n\n");
    let mut timing = String::from("Per-step wall time of the online loop\n\n");
    if let Ok((_, loss)) = load_checkpoint(&layout.checkpoint()) {
        let _ = writeln!(summary, "final training loss: {}", fmt_f64(loss));
    } else {
        summary.push_str("final training loss: (no checkpoint)\n");
    }
    if let Ok(t) = read_json::<TrainTiming>(&layout.model().join("timing_train.json")) {
        let _ = writeln!(timing, "training: {:.1} s", t.seconds);
    }

    let mut all_rows = Vec::new();
    for &scenario in &scenarios {
        let dir = layout.reach(scenario);
        let tube = read_tube(&dir)?;
        let _ = writeln!(summary, "\n[{scenario}]\nsteps: {}", tube.horizon());
        if let Ok(boxes) = read_json::<Vec<BoxSet>>(&dir.join("omega.json")) {
            if let Some(b) = boxes.first() {
                let _ = writeln!(
                    summary,
                    "control box at t=0: center [{}], half-width [{}]",
                    join(b.center.iter()),
                    join(b.half_width.iter())
                );
            }
        }
        if let Ok(text) = std::fs::read_to_string(&dir.join("timing.csv")) {
            let secs: Vec<f64> = text
                .lines()
                .skip(1)
                .filter_map(|l| l.split(',').nth(1)?.parse().ok())
                .collect();
            let max = secs.iter().copied().fold(0.0, f64::max);
            let mean = secs.iter().sum::<f64>() / secs.len().max(1) as f64;
            let _ = writeln!(timing, "{scenario}: mean {:.4} s, max {:.4} s over {} steps", mean, max, secs.len());
        }
        let mc_path = layout.validate(scenario).join("mc_report.json");
        match read_json::<Vec<McReport>>(&mc_path) {
            Ok(reports) => {
                for r in reports {
                    let _ = writeln!(
                        summary,
                        "containment ({}): worst step violation fraction {:.4} (threshold {}), {}",
                        r.model,
                        r.containment.worst_fraction(),
                        r.threshold,
                        match (r.passed, gated(scenario, &r.model)) {
                            (true, _) => "pass",
                            (false, true) => "fail",
                            (false, false) => "above threshold (informational)",
                        }
                    );
                }
            }
            Err(_) => summary.push_str("containment: (not validated)\n"),
        }
        let rows = hull_extent_rows(cfg, scenario, &tube)?;
        for r in rows.iter().filter(|r| r.k.is_none()) {
            let _ = writeln!(
                summary,
                "footprint {}: a in [{:.4}, {:.4}], b in [{:.4}, {:.4}], area {:.4}",
                r.plane, r.extents[0], r.extents[1], r.extents[2], r.extents[3], r.area
            );
        }
        all_rows.extend(rows);
    }

    let mut csv = String::from("scenario,plane,k,min_a,max_a,min_b,max_b,area\n");
    for r in &all_rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.scenario,
            r.plane,
            step_label(r.k),
            join(r.extents.iter()),
            fmt_f64(r.area)
        );
    }
    let dir = layout.report();
    write_text(&dir.join("hull_extents.csv"), &csv)?;

    if scenarios.len() == 2 {
        let diff = extent_differences(&all_rows);
        let mut text = String::from("plane,k,d_min_a,d_max_a,d_min_b,d_max_b,d_area\n");
        for (plane, k, d) in &diff {
            let _ = writeln!(text, "{plane},{},{}", step_label(*k), join(d.iter()));
        }
        write_text(&dir.join("hull_extent_diff.csv"), &text)?;
        summary.push_str("\nrotor_failure minus nominal, footprint extents:\n");
        for (plane, _, d) in diff.iter().filter(|(_, k, _)| k.is_none()) {
            let _ = writeln!(
                summary,
                "{plane}: d_min_a {:+.4}, d_max_a {:+.4}, d_min_b {:+.4}, d_max_b {:+.4}, d_area {:+.4}",
                d[0], d[1], d[2], d[3], d[4]
            );
        }
    }
    write_text(&dir.join("summary.txt"), &summary)?;
    write_text(&dir.join("timing_summary.txt"), &timing)?;
    Ok(ReportSummary {
        scenarios,
        extents: all_rows,
        dir,
    })
}

/// Failure minus nominal per plane and step: extents then area.
pub fn extent_differences(rows: &[ExtentRow]) -> Vec<(String, Option<usize>, [f64; 5])> {
    rows.iter()
        .filter(|r| r.scenario == Scenario::Nominal)
        .filter_map(|n| {
            let f = rows
                .iter()
                .find(|r| r.scenario == Scenario::RotorFailure && r.plane == n.plane && r.k == n.k)?;
            let d = [
                f.extents[0] - n.extents[0],
                f.extents[1] - n.extents[1],
                f.extents[2] - n.extents[2],
                f.extents[3] - n.extents[3],
                f.area - n.area,
            ];
            Some((n.plane.clone(), n.k, d))
        })
        .collect()
}

fn join<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    vals.map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub generate: GenerateSummary,
    pub train: TrainSummary,
    pub reach: Vec<ReachSummary>,
    pub validate: Vec<ValidateSummary>,
    pub report: ReportSummary,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.validate.iter().all(|v| v.passed)
    }
}

/// Every stage, both scenarios.
pub fn run_all(cfg: &RunConfig) -> Result<RunSummary> {
    let generate = cmd_generate(cfg)?;
    let train = cmd_train(cfg)?;
    let scenarios = [Scenario::Nominal, Scenario::RotorFailure];
    let reach = scenarios.iter().map(|s| cmd_reach(cfg, *s)).collect::<Result<Vec<_>>>()?;
    let validate = scenarios.iter().map(|s| cmd_validate(cfg, *s)).collect::<Result<Vec<_>>>()?;
    let report = cmd_report(cfg)?;
    Ok(RunSummary {
        generate,
        train,
        reach,
        validate,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(out: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            out: out.to_path_buf(),
            ..RunConfig::default()
        };
        cfg.dataset.trajectories = 4;
        cfg.dataset.steps = 6;
        cfg.train.epochs = 5;
        cfg.train.hidden = 16;
        cfg.reach.horizon = 4;
        cfg.validate.samples = 50;
        cfg
    }

    #[test]
    fn tiny_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let run = run_all(&cfg).unwrap();
        assert_eq!(run.generate.trajectories, 4);
        assert_eq!(run.reach.len(), 2);
        let layout = Layout::new(dir.path());
        assert!(layout.reach(Scenario::Nominal).join("reach_4.json").exists());
        assert!(layout.reach(Scenario::RotorFailure).join("hull_x-y_4.csv").exists());
        assert!(layout.report().join("hull_extent_diff.csv").exists());
        let tube = read_tube(&layout.reach(Scenario::Nominal)).unwrap();
        tube.check(1e-9).unwrap();
        for v in &run.validate {
            let lti = v.reports.iter().find(|r| r.model == "double_integrator").unwrap();
            assert!(lti.passed);
        }
    }

    #[test]
    fn stages_report_missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        assert!(matches!(cmd_train(&cfg), Err(Error::MissingArtifact(_))));
        assert!(matches!(cmd_reach(&cfg, Scenario::Nominal), Err(Error::MissingArtifact(_))));
        assert!(matches!(cmd_validate(&cfg, Scenario::Nominal), Err(Error::MissingArtifact(_))));
        assert!(matches!(cmd_report(&cfg), Err(Error::MissingArtifact(_))));
        let mut bad = cfg.clone();
        bad.dataset.trajectories = 0;
        assert_eq!(cmd_generate(&bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn report_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_generate(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        cmd_reach(&cfg, Scenario::Nominal).unwrap();
        cmd_report(&cfg).unwrap();
        let read = |name: &str| std::fs::read(Layout::new(dir.path()).report().join(name)).unwrap();
        let first = (read("summary.txt"), read("hull_extents.csv"));
        cmd_report(&cfg).unwrap();
        assert_eq!(first, (read("summary.txt"), read("hull_extents.csv")));
    }

    #[test]
    fn lti_self_test_passes() {
        assert!(lti_self_test(20, 3).unwrap().passed);
    }
}
