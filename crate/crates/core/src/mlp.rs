//! One-hidden-layer tanh network trained as a vector field with a
//! trapezoidal multistep loss.
//!
//! The network maps `[x; u]` to an estimate of `dx/dt`. Training never
//! integrates the network; it asks that consecutive samples satisfy
//! `x_{k+1} - x_k = dt/2 (f(x_k, u_k) + f(x_{k+1}, u_{k+1}))`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_json, write_json, write_text};
use crate::oracle::Dynamics;
use crate::rng::{substream, Domain};

/// Columns per work unit in batched passes. Fixed so that reductions are
/// summed in the same order for every thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

/// Affine input whitening `z = (input - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(with = "crate::io::vector")]
    pub mean: DVector<f64>,
    #[serde(with = "crate::io::vector")]
    pub scale: DVector<f64>,
}

impl Normalization {
    /// Per-row mean and population standard deviation. Rows with zero
    /// spread keep unit scale.
    pub fn fit(inputs: &DMatrix<f64>) -> Self {
        let n = inputs.ncols().max(1) as f64;
        let mean = DVector::from_iterator(inputs.nrows(), inputs.row_iter().map(|r| r.sum() / n));
        let scale = DVector::from_iterator(
            inputs.nrows(),
            inputs.row_iter().zip(mean.iter()).map(|(r, m)| {
                let var = r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            }),
        );
        Self { mean, scale }
    }

    fn apply(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = inputs.clone();
        for mut col in z.column_iter_mut() {
            col -= &self.mean;
            col.component_div_assign(&self.scale);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    pub n_state: usize,
    pub n_input: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// `hidden x (n_state + n_input)`.
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `n_state x hidden`.
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub normalization: Option<Normalization>,
}

impl MlpParameters {
    pub fn zeros(n_state: usize, n_input: usize, hidden: usize) -> Self {
        Self {
            n_state,
            n_input,
            hidden,
            activation: Activation::Tanh,
            w1: DMatrix::zeros(hidden, n_state + n_input),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(n_state, hidden),
            b2: DVector::zeros(n_state),
            normalization: None,
        }
    }

    /// Weights and biases drawn from `U(-s, s)` with `s = scale / sqrt(fan_in)`.
    pub fn random<R: Rng + ?Sized>(n_state: usize, n_input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let n_in = n_state + n_input;
        let s1 = scale / (n_in as f64).sqrt();
        let s2 = scale / (hidden as f64).sqrt();
        let mut draw = |s: f64| rng.random_range(-s..=s);
        let w1 = DMatrix::from_fn(hidden, n_in, |_, _| draw(s1));
        let b1 = DVector::from_fn(hidden, |_, _| draw(s1));
        let w2 = DMatrix::from_fn(n_state, hidden, |_, _| draw(s2));
        let b2 = DVector::from_fn(n_state, |_, _| draw(s2));
        Self {
            n_state,
            n_input,
            hidden,
            activation: Activation::Tanh,
            w1,
            b1,
            w2,
            b2,
            normalization: None,
        }
    }

    pub fn input_width(&self) -> usize {
        self.n_state + self.n_input
    }

    pub fn num_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n_in = self.input_width();
        let shapes_ok = self.w1.shape() == (self.hidden, n_in)
            && self.b1.len() == self.hidden
            && self.w2.shape() == (self.n_state, self.hidden)
            && self.b2.len() == self.n_state;
        if !shapes_ok {
            return Err(Error::Checkpoint("layer shapes do not match layer sizes".into()));
        }
        let finite = self.w1.iter().chain(self.b1.iter()).chain(self.w2.iter()).chain(self.b2.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        if let Some(norm) = &self.normalization {
            if norm.mean.len() != n_in || norm.scale.len() != n_in {
                return Err(Error::Checkpoint("normalization block has wrong width".into()));
            }
            if norm.mean.iter().chain(norm.scale.iter()).any(|v| !v.is_finite())
                || norm.scale.iter().any(|s| *s <= 0.0)
            {
                return Err(Error::Checkpoint("normalization scale must be finite and positive".into()));
            }
        }
        Ok(())
    }

    /// Network output for a single state and control.
    pub fn forward(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut input = DVector::zeros(self.input_width());
        input.rows_mut(0, self.n_state).copy_from(x);
        input.rows_mut(self.n_state, self.n_input).copy_from(u);
        if let Some(norm) = &self.normalization {
            input -= &norm.mean;
            input.component_div_assign(&norm.scale);
        }
        let h = (&self.w1 * input + &self.b1).map(tanh);
        &self.w2 * h + &self.b2
    }

    /// Column-wise forward pass over `[xs; us]`.
    pub fn forward_batch(&self, xs: &DMatrix<f64>, us: &DMatrix<f64>) -> DMatrix<f64> {
        let mut input = DMatrix::zeros(self.input_width(), xs.ncols());
        input.rows_mut(0, self.n_state).copy_from(xs);
        input.rows_mut(self.n_state, self.n_input).copy_from(us);
        let z = match &self.normalization {
            Some(norm) => norm.apply(&input),
            None => input,
        };
        self.forward_normalized(&z).1
    }

    /// Hidden activations and outputs for already-normalized inputs.
    fn forward_normalized(&self, z: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut h = &self.w1 * z;
        for mut col in h.column_iter_mut() {
            col += &self.b1;
        }
        h.apply(|v| *v = tanh(*v));
        let mut out = &self.w2 * &h;
        for mut col in out.column_iter_mut() {
            col += &self.b2;
        }
        (h, out)
    }

    fn flat(&self) -> Vec<f64> {
        self.w1.iter().chain(self.b1.iter()).chain(self.w2.iter()).chain(self.b2.iter()).copied().collect()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.as_mut_slice().copy_from_slice(a);
        self.b1.as_mut_slice().copy_from_slice(b);
        self.w2.as_mut_slice().copy_from_slice(c);
        self.b2.as_mut_slice().copy_from_slice(d);
    }
}

/// Gradient with the same shapes as [`MlpParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MlpGradient {
    fn zeros_like(p: &MlpParameters) -> Self {
        Self {
            w1: DMatrix::zeros(p.w1.nrows(), p.w1.ncols()),
            b1: DVector::zeros(p.b1.len()),
            w2: DMatrix::zeros(p.w2.nrows(), p.w2.ncols()),
            b2: DVector::zeros(p.b2.len()),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.w1.iter().chain(self.b1.iter()).chain(self.w2.iter()).chain(self.b2.iter()).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Training pairs for the trapezoidal loss.
///
/// Evaluation points are the samples `(x_j, u_j)` that have a recorded
/// control. A pair `(a, b)` contributes the residual
/// `x_b - x_a - dt/2 (f_a + f_b)`.
#[derive(Debug, Clone)]
pub struct MultistepData {
    pub dt: f64,
    pub n_state: usize,
    pub n_input: usize,
    /// Raw `[x; u]` per evaluation point.
    pub points: DMatrix<f64>,
    pub pairs: Vec<(usize, usize)>,
    /// `x_b - x_a` per pair.
    pub deltas: DMatrix<f64>,
}

impl MultistepData {
    /// Builds pairs from trajectories given as state matrices (`n_x x (N+1)`)
    /// and input matrices (`n_u x N`). When states and inputs have the same
    /// number of columns every consecutive pair is used.
    pub fn from_trajectories(dt: f64, states: &[DMatrix<f64>], inputs: &[DMatrix<f64>]) -> Result<Self> {
        if states.is_empty() || states.len() != inputs.len() {
            return Err(Error::Misaligned(format!(
                "{} state sequences but {} input sequences",
                states.len(),
                inputs.len()
            )));
        }
        let n_state = states[0].nrows();
        let n_input = inputs[0].nrows();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut pairs = Vec::new();
        let mut deltas = Vec::new();
        for (xs, us) in states.iter().zip(inputs) {
            if xs.nrows() != n_state || us.nrows() != n_input {
                return Err(Error::Shape("trajectories disagree on dimensions".into()));
            }
            if us.ncols() + 1 != xs.ncols() && us.ncols() != xs.ncols() {
                return Err(Error::Misaligned(format!(
                    "trajectory with {} states has {} inputs",
                    xs.ncols(),
                    us.ncols()
                )));
            }
            let base = cols.len();
            let n_points = us.ncols();
            for j in 0..n_points {
                let mut p = DVector::zeros(n_state + n_input);
                p.rows_mut(0, n_state).copy_from(&xs.column(j));
                p.rows_mut(n_state, n_input).copy_from(&us.column(j));
                cols.push(p);
            }
            for j in 0..n_points.saturating_sub(1) {
                pairs.push((base + j, base + j + 1));
                deltas.push(xs.column(j + 1) - xs.column(j));
            }
        }
        if pairs.is_empty() {
            return Err(Error::Config("multistep loss needs at least two consecutive samples with controls".into()));
        }
        Ok(Self {
            dt,
            n_state,
            n_input,
            points: DMatrix::from_columns(&cols),
            pairs,
            deltas: DMatrix::from_columns(&deltas),
        })
    }

    pub fn from_dataset(ds: &crate::quadrotor::TrajectoryDataset) -> Result<Self> {
        Self::from_trajectories(ds.dt, &ds.state_matrices(), &ds.input_matrices())
    }
}

fn normalized_points(params: &MlpParameters, data: &MultistepData) -> DMatrix<f64> {
    match &params.normalization {
        Some(norm) => norm.apply(&data.points),
        None => data.points.clone(),
    }
}

/// `tanh` through `expm1`, accurate to a few ulps and about twice as fast
/// as the libm routine.
fn tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    let e = (2.0 * x).exp_m1();
    e / (e + 2.0)
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK)).map(|c| (c * CHUNK, CHUNK.min(n - c * CHUNK))).collect()
}

/// Hidden activations and outputs for every evaluation point.
fn forward_points(params: &MlpParameters, z: &DMatrix<f64>) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    chunk_ranges(z.ncols())
        .into_par_iter()
        .map(|(start, len)| params.forward_normalized(&z.columns(start, len).into_owned()))
        .collect()
}

fn residuals(data: &MultistepData, outputs: &[(DMatrix<f64>, DMatrix<f64>)]) -> DMatrix<f64> {
    let f = |i: usize| outputs[i / CHUNK].1.column(i % CHUNK);
    let half = 0.5 * data.dt;
    let mut r = data.deltas.clone();
    for (p, &(a, b)) in data.pairs.iter().enumerate() {
        let mut col = r.column_mut(p);
        col -= (f(a) + f(b)) * half;
    }
    r
}

fn mean_square(r: &DMatrix<f64>) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

/// Mean over pairs and state components of the squared trapezoidal residual.
pub fn multistep_loss(params: &MlpParameters, data: &MultistepData) -> f64 {
    let z = normalized_points(params, data);
    let outputs = forward_points(params, &z);
    mean_square(&residuals(data, &outputs))
}

/// Loss and its exact gradient.
pub fn gradient(params: &MlpParameters, data: &MultistepData) -> (f64, MlpGradient) {
    let z = normalized_points(params, data);
    loss_and_gradient(params, data, &z)
}

fn loss_and_gradient(params: &MlpParameters, data: &MultistepData, z: &DMatrix<f64>) -> (f64, MlpGradient) {
    let outputs = forward_points(params, z);
    let r = residuals(data, &outputs);
    let loss = mean_square(&r);

    // dL/df at every evaluation point.
    let coef = -data.dt / r.len() as f64;
    let mut g_out = DMatrix::zeros(params.n_state, z.ncols());
    for (p, &(a, b)) in data.pairs.iter().enumerate() {
        let rc = r.column(p) * coef;
        let mut ca = g_out.column_mut(a);
        ca += &rc;
        let mut cb = g_out.column_mut(b);
        cb += &rc;
    }

    let partials: Vec<MlpGradient> = chunk_ranges(z.ncols())
        .into_par_iter()
        .zip(outputs.par_iter())
        .map(|((start, len), (h, _))| {
            let g = g_out.columns(start, len);
            let zc = z.columns(start, len);
            let w2 = (h * g.transpose()).transpose();
            let b2 = g.column_sum();
            let mut da = params.w2.transpose() * &g;
            da.zip_apply(h, |d, hv| *d *= 1.0 - hv * hv);
            let w1 = &da * zc.transpose();
            let b1 = da.column_sum();
            MlpGradient { w1, b1, w2, b2 }
        })
        .collect();

    let mut grad = MlpGradient::zeros_like(params);
    for part in partials {
        grad.w1 += part.w1;
        grad.b1 += part.b1;
        grad.w2 += part.w2;
        grad.b2 += part.b2;
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Trajectories per minibatch; 0 trains on the full dataset each epoch.
    pub batch_size: usize,
    /// Set from the run seed rather than read from configuration files.
    #[serde(skip)]
    pub seed: u64,
    /// Multiplier on the `1/sqrt(fan_in)` initialization bound.
    pub init_scale: f64,
    pub hidden: usize,
    /// Whiten inputs with the training-set mean and spread.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 0,
            seed: 0,
            init_scale: 1.0,
            hidden: 256,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) || !(self.init_scale > 0.0) || self.hidden == 0 {
            return Err(Error::Config("epsilon, init_scale and hidden must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParameters,
    /// Loss before each epoch's update.
    pub history: Vec<f64>,
    /// Loss of the returned parameters.
    pub final_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Adam on the multistep loss from `init`, or from a seeded random
/// initialization when `init` is `None`.
pub fn train_from(
    data: &MultistepData,
    cfg: &TrainConfig,
    init: Option<MlpParameters>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = match init {
        Some(p) => p,
        None => {
            let mut rng = substream(cfg.seed, Domain::Init, 0);
            let mut p = MlpParameters::random(data.n_state, data.n_input, cfg.hidden, cfg.init_scale, &mut rng);
            if cfg.normalize {
                p.normalization = Some(Normalization::fit(&data.points));
            }
            p
        }
    };
    if params.n_state != data.n_state || params.n_input != data.n_input {
        return Err(Error::Shape("network and data disagree on dimensions".into()));
    }
    let z = normalized_points(&params, data);
    let batches = minibatches(data, &z, cfg.batch_size);

    let mut adam = Adam::new(params.num_parameters());
    let mut theta = params.flat();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = batch_order(batches.len(), cfg.seed, epoch);
        let mut epoch_loss = 0.0;
        for &b in &order {
            let (bd, bz) = &batches[b];
            let (loss, grad) = loss_and_gradient(&params, bd, bz);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += loss;
            adam.step(&mut theta, &grad.flat(), cfg);
            params.set_flat(&theta);
        }
        history.push(epoch_loss / order.len() as f64);
    }
    let final_loss = multistep_loss(&params, data);
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs });
    }
    Ok(TrainOutcome {
        params,
        history,
        final_loss,
    })
}

pub fn train(data: &MultistepData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_from(data, cfg, None)
}

/// Splits the data by trajectory into minibatches of whole trajectories.
fn minibatches(data: &MultistepData, z: &DMatrix<f64>, batch_size: usize) -> Vec<(MultistepData, DMatrix<f64>)> {
    // Trajectory boundaries are where consecutive pairs stop chaining.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (p, &(a, _)) in data.pairs.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if data.pairs[*g.last().unwrap()].1 == a => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    if batch_size == 0 || batch_size >= groups.len() {
        return vec![(data.clone(), z.clone())];
    }
    groups
        .chunks(batch_size)
        .map(|gs| {
            let mut point_ids: Vec<usize> = Vec::new();
            let mut pairs = Vec::new();
            let mut deltas = Vec::new();
            for g in gs {
                for &p in g {
                    let (a, b) = data.pairs[p];
                    if point_ids.last() != Some(&a) {
                        point_ids.push(a);
                    }
                    let ia = point_ids.len() - 1;
                    point_ids.push(b);
                    pairs.push((ia, ia + 1));
                    deltas.push(data.deltas.column(p).into_owned());
                }
            }
            let points = data.points.select_columns(&point_ids);
            let bz = z.select_columns(&point_ids);
            let bd = MultistepData {
                dt: data.dt,
                n_state: data.n_state,
                n_input: data.n_input,
                points,
                pairs,
                deltas: DMatrix::from_columns(&deltas),
            };
            (bd, bz)
        })
        .collect()
}

fn batch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if n > 1 {
        let mut rng = substream(seed, Domain::Init, 1 + epoch as u64);
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
    }
    order
}

fn rk4_network(params: &MlpParameters, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> DVector<f64> {
    let k1 = params.forward(x, u);
    let k2 = params.forward(&(x + &k1 * (0.5 * dt)), u);
    let k3 = params.forward(&(x + &k2 * (0.5 * dt)), u);
    let k4 = params.forward(&(x + &k3 * dt), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// RK4 integration of the network with zero-order-hold controls. Returns
/// `controls.len() + 1` states.
pub fn rollout(
    params: &MlpParameters,
    x0: &DVector<f64>,
    controls: &[DVector<f64>],
    dt: f64,
) -> Result<Vec<DVector<f64>>> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(x0.clone());
    for (k, u) in controls.iter().enumerate() {
        let next = rk4_network(params, out.last().unwrap(), u, dt);
        crate::oracle::check_finite(&next, k)?;
        out.push(next);
    }
    Ok(out)
}

/// The trained network as a discrete-time oracle (RK4 over `dt`).
#[derive(Debug, Clone)]
pub struct NeuralModel {
    pub params: MlpParameters,
    pub dt: f64,
}

impl Dynamics for NeuralModel {
    fn state_dim(&self) -> usize {
        self.params.n_state
    }
    fn input_dim(&self) -> usize {
        self.params.n_input
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let next = rk4_network(&self.params, x, u, self.dt);
        crate::oracle::check_finite(&next, k)?;
        Ok(next)
    }
    fn step_batch(&self, k: usize, xs: &DMatrix<f64>, us: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let dt = self.dt;
        let parts: Vec<DMatrix<f64>> = chunk_ranges(xs.ncols())
            .into_par_iter()
            .map(|(start, len)| {
                let x = xs.columns(start, len).into_owned();
                let u = us.columns(start, len).into_owned();
                let f = |y: &DMatrix<f64>| self.params.forward_batch(y, &u);
                let k1 = f(&x);
                let k2 = f(&(&x + &k1 * (0.5 * dt)));
                let k3 = f(&(&x + &k2 * (0.5 * dt)));
                let k4 = f(&(&x + &k3 * dt));
                x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            })
            .collect();
        let mut out = DMatrix::zeros(xs.nrows(), xs.ncols());
        for ((start, len), part) in chunk_ranges(xs.ncols()).into_iter().zip(parts) {
            out.columns_mut(start, len).copy_from(&part);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    layer_sizes: [usize; 3],
    n_state: usize,
    n_input: usize,
    activation: Activation,
    #[serde(with = "crate::io::row_major")]
    w1: DMatrix<f64>,
    #[serde(with = "crate::io::vector")]
    b1: DVector<f64>,
    #[serde(with = "crate::io::row_major")]
    w2: DMatrix<f64>,
    #[serde(with = "crate::io::vector")]
    b2: DVector<f64>,
    normalization: Option<Normalization>,
    seed: u64,
    final_loss: f64,
}

pub fn save_checkpoint(path: &Path, params: &MlpParameters, seed: u64, final_loss: f64) -> Result<()> {
    let ck = Checkpoint {
        layer_sizes: [params.input_width(), params.hidden, params.n_state],
        n_state: params.n_state,
        n_input: params.n_input,
        activation: params.activation,
        w1: params.w1.clone(),
        b1: params.b1.clone(),
        w2: params.w2.clone(),
        b2: params.b2.clone(),
        normalization: params.normalization.clone(),
        seed,
        final_loss,
    };
    write_json(path, &ck)
}

/// Loads and validates `model.json`; returns the parameters and the stored
/// final loss.
pub fn load_checkpoint(path: &Path) -> Result<(MlpParameters, f64)> {
    let ck: Checkpoint = read_json(path).map_err(|e| match e {
        Error::Json(j) => Error::Checkpoint(format!("{}: {j}", path.display())),
        other => other,
    })?;
    if ck.layer_sizes != [ck.n_state + ck.n_input, ck.w1.nrows(), ck.n_state] {
        return Err(Error::Checkpoint("layer_sizes disagree with stored dimensions".into()));
    }
    let params = MlpParameters {
        n_state: ck.n_state,
        n_input: ck.n_input,
        hidden: ck.layer_sizes[1],
        activation: ck.activation,
        w1: ck.w1,
        b1: ck.b1,
        w2: ck.w2,
        b2: ck.b2,
        normalization: ck.normalization,
    };
    params.validate()?;
    Ok((params, ck.final_loss))
}

pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        text.push_str(&format!("{},{}\n", e + 1, fmt_f64(*l)));
    }
    write_text(path, &text)
}

pub fn read_loss_history(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) if !path.exists() => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Csv(e),
    })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let v = rec
            .get(1)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Misaligned(format!("{}: malformed row", path.display())))?;
        out.push(v);
    }
    Ok(out)
}
