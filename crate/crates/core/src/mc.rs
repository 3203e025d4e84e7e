//! Brute-force Monte-Carlo reachable sets, used to check reach tubes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_json;
use crate::oracle::Dynamics;
use crate::reach::ReachTube;
use crate::rng::{substream, Domain, StreamRng};
use crate::sets::{BoxSet, InputSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlScheme {
    RandomUniform,
    /// Each control drawn from the `2^m` vertices of the box.
    VertexBangBang,
    /// Even samples uniform, odd samples vertex.
    #[default]
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSampling {
    #[default]
    Uniform,
    /// Initial states drawn from the vertices of the initial box.
    Vertices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub steps: usize,
    pub scheme: ControlScheme,
    pub initial: InitialSampling,
    pub seed: u64,
}

/// States of every sample at steps `0..=K`; `steps[k]` is `n_x x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    pub steps: Vec<DMatrix<f64>>,
    pub config: McConfig,
}

impl SampleCloud {
    pub fn samples(&self) -> usize {
        self.config.samples
    }
}

fn draw_control(scheme: ControlScheme, index: usize, omega: &BoxSet, rng: &mut StreamRng) -> DVector<f64> {
    let vertex = match scheme {
        ControlScheme::RandomUniform => false,
        ControlScheme::VertexBangBang => true,
        ControlScheme::Mixed => index % 2 == 1,
    };
    if vertex {
        omega.sample_vertex(rng)
    } else {
        omega.sample_uniform(rng)
    }
}

/// Simulates `cfg.samples` trajectories of `model` for `cfg.steps` steps.
///
/// Sample `i` draws its initial state and all of its controls from its own
/// stream, so the first `n` samples do not depend on the total count.
pub fn mc_reach(model: &dyn Dynamics, x0: &BoxSet, omega: &dyn InputSet, cfg: &McConfig) -> Result<SampleCloud> {
    if cfg.samples == 0 {
        return Err(Error::Config("Monte-Carlo needs at least one sample".into()));
    }
    if x0.dim() != model.state_dim() {
        return Err(Error::Shape(format!(
            "initial box has dimension {}, model state has {}",
            x0.dim(),
            model.state_dim()
        )));
    }
    let n = cfg.samples;
    let mut rngs: Vec<StreamRng> = (0..n).map(|i| substream(cfg.seed, Domain::MonteCarlo, i as u64)).collect();
    let mut xs = DMatrix::zeros(model.state_dim(), n);
    for (i, rng) in rngs.iter_mut().enumerate() {
        let x = match cfg.initial {
            InitialSampling::Uniform => x0.sample_uniform(rng),
            InitialSampling::Vertices => x0.sample_vertex(rng),
        };
        xs.set_column(i, &x);
    }
    let mut steps = Vec::with_capacity(cfg.steps + 1);
    steps.push(xs.clone());
    for k in 0..cfg.steps {
        let omega_k = omega.box_at(k);
        let mut us = DMatrix::zeros(model.input_dim(), n);
        for (i, rng) in rngs.iter_mut().enumerate() {
            us.set_column(i, &draw_control(cfg.scheme, i, &omega_k, rng));
        }
        xs = model.step_batch(k, &xs, &us).map_err(|e| locate_failure(model, k, &steps[k], &us, e))?;
        steps.push(xs.clone());
    }
    Ok(SampleCloud {
        steps,
        config: cfg.clone(),
    })
}

/// Attributes a batch failure to the first sample that fails on its own.
fn locate_failure(model: &dyn Dynamics, k: usize, xs: &DMatrix<f64>, us: &DMatrix<f64>, err: Error) -> Error {
    for i in 0..xs.ncols() {
        let x = xs.column(i).into_owned();
        let u = us.column(i).into_owned();
        if let Err(e) = model.step(k, &x, &u) {
            return Error::Sample {
                index: i,
                source: Box::new(e),
            };
        }
    }
    err
}

/// Slack added to each halfspace offset before counting a violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Tolerance {
    Absolute(f64),
    /// Fraction of the cloud's per-axis range at that step, weighted by the
    /// normal: `tol_i = sum_j |c_ij| * frac * range_j`.
    RangeFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepContainment {
    pub k: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest `<c_i, x> - gamma_i` over samples and normals, before slack.
    pub max_signed_violation: f64,
    /// `gamma_i - max_x <c_i, x>` per normal.
    pub support_gaps: Vec<f64>,
    /// Slack used per normal.
    pub tolerances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub tolerance: Tolerance,
    pub steps: Vec<StepContainment>,
}

impl ContainmentReport {
    pub fn worst_fraction(&self) -> f64 {
        self.steps.iter().map(|s| s.violation_fraction).fold(0.0, f64::max)
    }

    pub fn total_violations(&self) -> usize {
        self.steps.iter().map(|s| s.violations).sum()
    }

    pub fn min_support_gap(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.support_gaps.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Counts cloud samples outside each front of the tube.
pub fn containment_report(tube: &ReachTube, cloud: &SampleCloud, tol: Tolerance) -> Result<ContainmentReport> {
    if tube.fronts.len() != cloud.steps.len() {
        return Err(Error::Misaligned(format!(
            "tube has {} fronts but the cloud has {} steps",
            tube.fronts.len(),
            cloud.steps.len()
        )));
    }
    let mut steps = Vec::with_capacity(tube.fronts.len());
    for (front, xs) in tube.fronts.iter().zip(&cloud.steps) {
        let n = xs.ncols();
        let tolerances: Vec<f64> = match tol {
            Tolerance::Absolute(t) => vec![t; front.len()],
            Tolerance::RangeFraction(frac) => {
                let range: Vec<f64> = xs.row_iter().map(|r| r.max() - r.min()).collect();
                front
                    .normals
                    .iter()
                    .map(|c| c.iter().zip(&range).map(|(ci, r)| ci.abs() * frac * r).sum())
                    .collect()
            }
        };
        // Rows: normals, columns: samples.
        let c_mat = DMatrix::from_fn(front.len(), xs.nrows(), |i, j| front.normals[i][j]);
        let proj = &c_mat * xs;
        let mut violated = vec![false; n];
        let mut max_signed = f64::NEG_INFINITY;
        let mut gaps = Vec::with_capacity(front.len());
        for (i, row) in proj.row_iter().enumerate() {
            let g = front.offsets[i];
            let mut best = f64::NEG_INFINITY;
            for (s, v) in row.iter().enumerate() {
                best = best.max(*v);
                if *v > g + tolerances[i] {
                    violated[s] = true;
                }
            }
            max_signed = max_signed.max(best - g);
            gaps.push(g - best);
        }
        let violations = violated.iter().filter(|v| **v).count();
        steps.push(StepContainment {
            k: front.k,
            violations,
            violation_fraction: violations as f64 / n as f64,
            max_signed_violation: max_signed,
            support_gaps: gaps,
            tolerances,
        });
    }
    Ok(ContainmentReport {
        samples: cloud.samples(),
        tolerance: tol,
        steps,
    })
}

/// Replays each contact trajectory through `model`: starts from the initial
/// contact point and applies the recorded bang-bang controls. Returns, per
/// step and normal, `gamma_i - <c_i, x_replay>`; zero when the model is the
/// lift sequence the tube was built from.
pub fn replay_contacts(model: &dyn Dynamics, tube: &ReachTube) -> Result<Vec<Vec<f64>>> {
    let front0 = tube
        .fronts
        .first()
        .ok_or_else(|| Error::Config("cannot replay an empty tube".into()))?;
    let mut xs = DMatrix::from_columns(&front0.contacts);
    let mut gaps = vec![vec![0.0; front0.len()]];
    for k in 0..tube.horizon() {
        let next = &tube.fronts[k + 1];
        let us = DMatrix::from_columns(&next.inputs);
        xs = model.step_batch(k, &xs, &us)?;
        gaps.push(
            (0..next.len())
                .map(|i| next.offsets[i] - next.normals[i].dot(&xs.column(i)))
                .collect(),
        );
    }
    Ok(gaps)
}

/// Contents of `mc_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub model: String,
    pub config: McConfig,
    pub threshold: f64,
    pub passed: bool,
    pub containment: ContainmentReport,
}

pub fn write_mc_reports(path: &Path, reports: &[McReport]) -> Result<()> {
    write_json(path, &reports)
}
