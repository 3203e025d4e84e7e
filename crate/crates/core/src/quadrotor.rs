//! 12-DOF quadrotor simulator with Euler-angle attitude, z axis pointing down.
//!
//! State layout: `[x, y, z, vx, vy, vz, phi, theta, psi, p, q, r]` where the
//! last three entries are the Euler-angle rates. Controls are the four rotor
//! angular speeds, mapped to thrust and body torques by [`mix_rotor_speeds`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SVector, Vector3, Vector4};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_json, write_json, write_text};
use crate::oracle::Dynamics;
use crate::rng::{substream, uniform_around, Domain};
use crate::sets::{BoxSet, InputSet};

pub type Vec12 = SVector<f64, 12>;

pub const STATE_DIM: usize = 12;
pub const INPUT_DIM: usize = 4;

pub const STATE_NAMES: [&str; STATE_DIM] = [
    "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State12 {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    /// Roll, pitch, yaw. Never wrapped.
    pub att: Vector3<f64>,
    pub rate: Vector3<f64>,
}

impl State12 {
    pub fn from_vec12(v: &Vec12) -> Self {
        Self {
            pos: v.fixed_rows::<3>(0).into_owned(),
            vel: v.fixed_rows::<3>(3).into_owned(),
            att: v.fixed_rows::<3>(6).into_owned(),
            rate: v.fixed_rows::<3>(9).into_owned(),
        }
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != STATE_DIM {
            return Err(Error::Shape(format!("state has {} entries, expected 12", s.len())));
        }
        Ok(Self::from_vec12(&Vec12::from_column_slice(s)))
    }

    pub fn to_vec12(&self) -> Vec12 {
        let mut v = Vec12::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.pos);
        v.fixed_rows_mut::<3>(3).copy_from(&self.vel);
        v.fixed_rows_mut::<3>(6).copy_from(&self.att);
        v.fixed_rows_mut::<3>(9).copy_from(&self.rate);
        v
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_vec12().as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec12().iter().all(|v| v.is_finite())
    }
}

/// Rotor angular speeds in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorCommand {
    pub omega: Vector4<f64>,
}

impl RotorCommand {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Self {
        Self {
            omega: Vector4::new(w1, w2, w3, w4),
        }
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != INPUT_DIM {
            return Err(Error::Shape(format!("rotor command has {} entries, expected 4", s.len())));
        }
        Ok(Self {
            omega: Vector4::from_column_slice(s),
        })
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.omega.as_slice())
    }
}

/// Which translational-acceleration rows to use.
///
/// `Printed` keeps the literal `sin(phi)cos(psi)` and `cos(psi)sin(psi)`
/// terms of the reference model. `Standard` uses the usual ZYX rotation:
/// `sin(phi)sin(psi)` and `sin(phi)cos(psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationalForm {
    #[default]
    Printed,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadParams {
    pub m: f64,
    pub g: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    pub kf: f64,
    pub km: f64,
    pub l: f64,
    pub translational_form: TranslationalForm,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            g: 9.81,
            ixx: 0.1,
            iyy: 0.1,
            izz: 0.2,
            kf: 0.01,
            km: 0.001,
            l: 0.2,
            translational_form: TranslationalForm::Printed,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("ixx", self.ixx),
            ("iyy", self.iyy),
            ("izz", self.izz),
            ("kf", self.kf),
            ("km", self.km),
            ("l", self.l),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("quad parameter {name} must be positive, got {v}")));
            }
        }
        if !self.g.is_finite() {
            return Err(Error::Config("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Rotor speed at which four equal rotors balance gravity.
    pub fn hover_speed(&self) -> f64 {
        (self.m * self.g / (4.0 * self.kf)).sqrt()
    }
}

/// Thrust and body torques `(u1, u2, u3, u4)` from rotor speeds.
pub fn mix_rotor_speeds(omega: &RotorCommand, p: &QuadParams) -> Vector4<f64> {
    let (kf, km, lk) = (p.kf, p.km, p.l * p.kf);
    #[rustfmt::skip]
    let mix = nalgebra::Matrix4::new(
        kf,  kf,  kf,  kf,
        -lk, lk,  lk,  -lk,
        lk,  lk,  -lk, -lk,
        km,  -km, km,  -km,
    );
    mix * omega.omega.component_mul(&omega.omega)
}

pub fn state_derivative(xi: &Vec12, u: &Vector4<f64>, p: &QuadParams) -> Vec12 {
    let (phi, theta, psi) = (xi[6], xi[7], xi[8]);
    let (dphi, dtheta, dpsi) = (xi[9], xi[10], xi[11]);
    let (sphi, cphi) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (spsi, cpsi) = psi.sin_cos();
    let thrust = u[0] / p.m;

    let (ax, ay) = match p.translational_form {
        TranslationalForm::Printed => (
            -thrust * (sphi * cpsi + cphi * cpsi * sth),
            -thrust * (cphi * spsi * sth - cpsi * spsi),
        ),
        TranslationalForm::Standard => (
            -thrust * (sphi * spsi + cphi * cpsi * sth),
            -thrust * (cphi * spsi * sth - sphi * cpsi),
        ),
    };
    let az = p.g - thrust * cphi * cth;

    let ddphi = (u[1] - (p.izz - p.iyy) * dtheta * dpsi) / p.ixx;
    let ddtheta = (u[2] - (p.ixx - p.izz) * dphi * dpsi) / p.iyy;
    let ddpsi = (u[3] - (p.iyy - p.ixx) * dtheta * dphi) / p.izz;

    Vec12::from_column_slice(&[
        xi[3], xi[4], xi[5], ax, ay, az, dphi, dtheta, dpsi, ddphi, ddtheta, ddpsi,
    ])
}

fn rk4_forces(x: &Vec12, u: &Vector4<f64>, dt: f64, p: &QuadParams) -> Vec12 {
    let k1 = state_derivative(x, u, p);
    let k2 = state_derivative(&(x + k1 * (0.5 * dt)), u, p);
    let k3 = state_derivative(&(x + k2 * (0.5 * dt)), u, p);
    let k4 = state_derivative(&(x + k3 * dt), u, p);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// One RK4 step with the rotor command held constant.
pub fn integrate_step(xi: &State12, omega: &RotorCommand, dt: f64, p: &QuadParams) -> Result<State12> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let next = integrate_vec(&xi.to_vec12(), omega, dt, p);
    if next.iter().all(|v| v.is_finite()) {
        Ok(State12::from_vec12(&next))
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

fn integrate_vec(x: &Vec12, omega: &RotorCommand, dt: f64, p: &QuadParams) -> Vec12 {
    let u = mix_rotor_speeds(omega, p);
    rk4_forces(x, &u, dt, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Nominal,
    RotorFailure,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Nominal => "nominal",
            Scenario::RotorFailure => "rotor_failure",
        }
    }

    /// Rotors that only contribute actuator noise.
    pub fn failed_rotors(&self) -> &'static [usize] {
        match self {
            Scenario::Nominal => &[],
            Scenario::RotorFailure => &[1, 2],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Scenario::Nominal),
            "rotor_failure" => Ok(Scenario::RotorFailure),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected nominal or rotor_failure)"
            ))),
        }
    }
}

/// Rotor command law: `v_i(t) = hover + a_i sin(2 pi f_i t)` plus uniform
/// noise of half-width `noise`. Failed rotors produce noise only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlModel {
    pub hover: f64,
    pub amplitude: [f64; 4],
    pub frequency: [f64; 4],
    pub noise: f64,
    pub scenario: Scenario,
}

impl ControlModel {
    pub fn sinusoid(p: &QuadParams, amplitude: f64, frequency: f64, noise: f64, scenario: Scenario) -> Self {
        Self {
            hover: p.hover_speed(),
            amplitude: [amplitude; 4],
            frequency: [frequency; 4],
            noise,
            scenario,
        }
    }

    /// Constant nominal command `c` on every rotor.
    pub fn constant(c: f64, noise: f64, scenario: Scenario) -> Self {
        Self {
            hover: c,
            amplitude: [0.0; 4],
            frequency: [0.0; 4],
            noise,
            scenario,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.hover.is_finite()
            && self.amplitude.iter().chain(&self.frequency).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("control sinusoid parameters must be finite".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise half-width must be non-negative, got {}", self.noise)));
        }
        Ok(())
    }

    /// Noise-free command at time `t`, with failed rotors set to zero.
    pub fn center(&self, t: f64) -> Vector4<f64> {
        let mut v = Vector4::from_fn(|i, _| {
            self.hover + self.amplitude[i] * (2.0 * std::f64::consts::PI * self.frequency[i] * t).sin()
        });
        for &i in self.scenario.failed_rotors() {
            v[i] = 0.0;
        }
        v
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> RotorCommand {
        let c = self.center(t);
        RotorCommand {
            omega: Vector4::from_fn(|i, _| uniform_around(rng, c[i], self.noise)),
        }
    }

    /// The admissible control box at time `t`.
    pub fn admissible_box(&self, t: f64) -> BoxSet {
        BoxSet {
            center: DVector::from_column_slice(self.center(t).as_slice()),
            half_width: DVector::from_element(INPUT_DIM, self.noise),
        }
    }
}

/// A [`ControlModel`] evaluated on the sampling grid `t = k dt`.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    pub model: ControlModel,
    pub dt: f64,
}

impl InputSet for ControlSchedule {
    fn box_at(&self, k: usize) -> BoxSet {
        self.model.admissible_box(k as f64 * self.dt)
    }
}

/// The simulator as a discrete-time oracle.
#[derive(Debug, Clone)]
pub struct Quadrotor {
    pub params: QuadParams,
    pub dt: f64,
}

impl Dynamics for Quadrotor {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }
    fn input_dim(&self) -> usize {
        INPUT_DIM
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let cmd = RotorCommand::from_slice(u.as_slice())?;
        let xs = Vec12::from_column_slice(x.as_slice());
        let next = integrate_vec(&xs, &cmd, self.dt, &self.params);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        Ok(DVector::from_column_slice(next.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `N + 1` states.
    pub states: Vec<State12>,
    /// `N` commands; `inputs[k]` drives `states[k]` to `states[k + 1]`.
    pub inputs: Vec<RotorCommand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub dt: f64,
    pub seed: u64,
    pub scenario: Scenario,
    pub params: QuadParams,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    /// Steps per trajectory.
    pub fn steps(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.inputs.len())
    }

    /// States as an `12 x (N + 1)` matrix per trajectory.
    pub fn state_matrices(&self) -> Vec<DMatrix<f64>> {
        self.trajectories
            .iter()
            .map(|t| DMatrix::from_fn(STATE_DIM, t.states.len(), |i, j| t.states[j].to_vec12()[i]))
            .collect()
    }

    /// Inputs as a `4 x N` matrix per trajectory.
    pub fn input_matrices(&self) -> Vec<DMatrix<f64>> {
        self.trajectories
            .iter()
            .map(|t| DMatrix::from_fn(INPUT_DIM, t.inputs.len(), |i, j| t.inputs[j].omega[i]))
            .collect()
    }
}

/// Simulates `n_traj` trajectories of `steps` steps from uniform draws in `x0`.
///
/// Trajectory `k` uses its own random stream, so the result does not depend
/// on the thread count.
pub fn generate_dataset(
    n_traj: usize,
    steps: usize,
    dt: f64,
    x0: &BoxSet,
    control: &ControlModel,
    params: &QuadParams,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if n_traj == 0 {
        return Err(Error::Config("number of trajectories must be at least 1".into()));
    }
    if steps < 2 {
        return Err(Error::Config(format!("trajectory length must be at least 2, got {steps}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if x0.dim() != STATE_DIM {
        return Err(Error::Shape(format!("initial box has dimension {}, expected 12", x0.dim())));
    }
    params.validate()?;
    control.validate()?;

    let trajectories = (0..n_traj)
        .into_par_iter()
        .map(|index| {
            let mut rng = substream(seed, Domain::Dataset, index as u64);
            let mut x = Vec12::from_column_slice(x0.sample_uniform(&mut rng).as_slice());
            let mut states = Vec::with_capacity(steps + 1);
            let mut inputs = Vec::with_capacity(steps);
            states.push(State12::from_vec12(&x));
            for k in 0..steps {
                let cmd = control.sample(k as f64 * dt, &mut rng);
                x = integrate_vec(&x, &cmd, dt, params);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Trajectory {
                        index,
                        source: Box::new(Error::NonFinite { step: k }),
                    });
                }
                inputs.push(cmd);
                states.push(State12::from_vec12(&x));
            }
            Ok(Trajectory { states, inputs })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrajectoryDataset {
        dt,
        seed,
        scenario: control.scenario,
        params: *params,
        trajectories,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dt: f64,
    n_traj: usize,
    steps: usize,
    seed: u64,
    scenario: Scenario,
    params: QuadParams,
}

const CSV_HEADER: [&str; 17] = [
    "t", "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "p", "q", "r", "w1", "w2", "w3", "w4",
];

fn traj_file(dir: &Path, k: usize) -> std::path::PathBuf {
    dir.join(format!("traj_{k}.csv"))
}

/// Writes `manifest.json` and one `traj_<k>.csv` per trajectory.
pub fn write_dataset(dir: &Path, ds: &TrajectoryDataset) -> Result<()> {
    let manifest = Manifest {
        dt: ds.dt,
        n_traj: ds.trajectories.len(),
        steps: ds.steps(),
        seed: ds.seed,
        scenario: ds.scenario,
        params: ds.params,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    for (k, traj) in ds.trajectories.iter().enumerate() {
        let mut text = CSV_HEADER.join(",");
        text.push('\n');
        for (j, s) in traj.states.iter().enumerate() {
            let mut row: Vec<String> = std::iter::once(j as f64 * ds.dt)
                .chain(s.to_vec12().iter().copied())
                .map(fmt_f64)
                .collect();
            match traj.inputs.get(j) {
                Some(u) => row.extend(u.omega.iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), INPUT_DIM)),
            }
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_text(&traj_file(dir, k), &text)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<TrajectoryDataset> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    manifest.params.validate()?;
    let mut trajectories = Vec::with_capacity(manifest.n_traj);
    for k in 0..manifest.n_traj {
        let path = traj_file(dir, k);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let mut reader = csv::Reader::from_path(&path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Misaligned(format!("{}: unexpected header", path.display())));
        }
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
        if rows.len() != manifest.steps + 1 {
            return Err(Error::Misaligned(format!(
                "{}: {} rows, expected {}",
                path.display(),
                rows.len(),
                manifest.steps + 1
            )));
        }
        for (j, rec) in rows.iter().enumerate() {
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|_| Error::Misaligned(format!("{}: bad number in row {j}", path.display())))
            };
            let s: Vec<f64> = (1..13).map(parse).collect::<Result<_>>()?;
            states.push(State12::from_slice(&s)?);
            if j < manifest.steps {
                let u: Vec<f64> = (13..17).map(parse).collect::<Result<_>>()?;
                inputs.push(RotorCommand::from_slice(&u)?);
            }
        }
        trajectories.push(Trajectory { states, inputs });
    }
    Ok(TrajectoryDataset {
        dt: manifest.dt,
        seed: manifest.seed,
        scenario: manifest.scenario,
        params: manifest.params,
        trajectories,
    })
}

/// Initial box with the given half-widths for position, velocity, attitude
/// and rates, centred at the origin.
pub fn initial_box(pos: f64, vel: f64, att: f64, rate: f64) -> BoxSet {
    let hw: Vec<f64> = [pos, vel, att, rate].iter().flat_map(|h| [*h; 3]).collect();
    BoxSet {
        center: DVector::zeros(STATE_DIM),
        half_width: DVector::from_vec(hw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_params() -> QuadParams {
        QuadParams {
            kf: 1.0,
            km: 1.0,
            l: 1.0,
            ..QuadParams::default()
        }
    }

    #[test]
    fn mixing_examples() {
        let p = unit_params();
        assert_eq!(mix_rotor_speeds(&RotorCommand::new(1.0, 1.0, 1.0, 1.0), &p), Vector4::new(4.0, 0.0, 0.0, 0.0));
        assert_eq!(mix_rotor_speeds(&RotorCommand::new(1.0, 0.0, 0.0, 0.0), &p), Vector4::new(1.0, -1.0, 1.0, 1.0));
        assert_eq!(mix_rotor_speeds(&RotorCommand::new(0.0, 0.0, 0.0, 0.0), &QuadParams::default()), Vector4::zeros());
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = QuadParams::default();
        let d = state_derivative(&Vec12::zeros(), &Vector4::new(p.m * p.g, 0.0, 0.0, 0.0), &p);
        assert_eq!(d, Vec12::zeros());
    }

    #[test]
    fn free_fall_derivative() {
        let p = QuadParams::default();
        let d = state_derivative(&Vec12::zeros(), &Vector4::zeros(), &p);
        let mut expected = Vec12::zeros();
        expected[5] = p.g;
        assert_eq!(d, expected);
    }

    #[test]
    fn equal_inertia_removes_gyroscopic_terms() {
        let p = QuadParams {
            ixx: 0.3,
            iyy: 0.3,
            izz: 0.3,
            ..QuadParams::default()
        };
        let mut x = Vec12::zeros();
        x[9] = 1.3;
        x[10] = -0.7;
        x[11] = 2.1;
        let d = state_derivative(&x, &Vector4::new(0.0, 1.0, 0.0, 0.0), &p);
        assert_relative_eq!(d[9], 1.0 / 0.3, max_relative = 1e-15);
        assert_eq!(d[10], 0.0);
        assert_eq!(d[11], 0.0);
    }

    #[test]
    fn standard_form_differs_only_in_lateral_rows() {
        let mut x = Vec12::zeros();
        x[6] = 0.2;
        x[7] = -0.1;
        x[8] = 0.4;
        let u = Vector4::new(9.0, 0.1, 0.2, 0.3);
        let printed = QuadParams::default();
        let standard = QuadParams {
            translational_form: TranslationalForm::Standard,
            ..printed
        };
        let a = state_derivative(&x, &u, &printed);
        let b = state_derivative(&x, &u, &standard);
        assert_ne!(a[3], b[3]);
        assert_ne!(a[4], b[4]);
        for i in [0, 1, 2, 5, 6, 7, 8, 9, 10, 11] {
            assert_eq!(a[i], b[i]);
        }
        // Textbook form: R e3 with R = Rz(psi) Ry(theta) Rx(phi).
        let (phi, th, psi) = (x[6], x[7], x[8]);
        let rx = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), phi);
        let ry = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), th);
        let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), psi);
        let thrust_dir = (rz * ry * rx) * Vector3::z();
        assert_relative_eq!(b[3], -u[0] * thrust_dir[0], epsilon = 1e-12);
        assert_relative_eq!(b[4], -u[0] * thrust_dir[1], epsilon = 1e-12);
    }

    #[test]
    fn hover_input_keeps_state() {
        let p = QuadParams::default();
        let w = p.hover_speed();
        let cmd = RotorCommand::new(w, w, w, w);
        let s0 = State12 {
            pos: Vector3::new(0.3, -0.2, 1.0),
            ..State12::default()
        };
        for dt in [0.01, 0.1, 1.0] {
            let s1 = integrate_step(&s0, &cmd, dt, &p).unwrap();
            for (a, b) in s1.to_vec12().iter().zip(s0.to_vec12().iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn free_fall_is_exact() {
        let p = QuadParams::default();
        let s0 = State12::default();
        let s1 = integrate_step(&s0, &RotorCommand::new(0.0, 0.0, 0.0, 0.0), 0.1, &p).unwrap();
        assert_relative_eq!(s1.pos[2], p.g * 0.01 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(s1.vel[2], p.g * 0.1, max_relative = 1e-14);
        assert_eq!(s1.pos[0], 0.0);
        assert_eq!(s1.vel[1], 0.0);
    }

    #[test]
    fn rejects_bad_step() {
        let p = QuadParams::default();
        let cmd = RotorCommand::new(1.0, 1.0, 1.0, 1.0);
        assert!(integrate_step(&State12::default(), &cmd, 0.0, &p).is_err());
        let blown = State12 {
            rate: Vector3::new(f64::MAX, f64::MAX, 0.0),
            ..State12::default()
        };
        assert!(matches!(integrate_step(&blown, &cmd, 0.1, &p), Err(Error::NonFinite { .. })));
    }

    fn reference_state() -> State12 {
        State12 {
            pos: Vector3::new(0.1, -0.3, 0.2),
            vel: Vector3::new(0.05, 0.0, -0.02),
            att: Vector3::new(0.05, -0.04, 0.02),
            rate: Vector3::new(1e-3, -1e-3, 5e-4),
        }
    }

    fn reference_command(p: &QuadParams) -> RotorCommand {
        let w = p.hover_speed();
        RotorCommand::new(w + 0.05, w - 0.02, w + 0.04, w - 0.05)
    }

    fn fine_step(s: &State12, cmd: &RotorCommand, dt: f64, p: &QuadParams) -> Vec12 {
        let mut x = s.to_vec12();
        let h = dt / 1000.0;
        for _ in 0..1000 {
            x = integrate_vec(&x, cmd, h, p);
        }
        x
    }

    #[test]
    fn rk4_matches_fine_integration() {
        let p = QuadParams::default();
        let s = reference_state();
        let cmd = reference_command(&p);
        let coarse = integrate_step(&s, &cmd, 0.1, &p).unwrap().to_vec12();
        let err = (coarse - fine_step(&s, &cmd, 0.1, &p)).amax();
        assert!(err <= 1e-8, "one-step error {err:e}");
    }

    #[test]
    fn rk4_error_order() {
        let p = QuadParams::default();
        let s = State12 {
            rate: Vector3::new(1.0, -0.8, 0.6),
            att: Vector3::new(0.3, 0.2, -0.4),
            ..reference_state()
        };
        let cmd = reference_command(&p);
        let err = |dt: f64| (integrate_step(&s, &cmd, dt, &p).unwrap().to_vec12() - fine_step(&s, &cmd, dt, &p)).amax();
        let ratio = err(0.2) / err(0.1);
        assert!(ratio >= 8.0, "error ratio {ratio}");
    }

    #[test]
    fn control_sampling_examples() {
        let mut rng = substream(0, Domain::Test, 0);
        let c = ControlModel::constant(3.0, 0.0, Scenario::Nominal);
        assert_eq!(c.sample(1.7, &mut rng).omega, Vector4::new(3.0, 3.0, 3.0, 3.0));
        let f = ControlModel::constant(3.0, 0.0, Scenario::RotorFailure);
        let u = f.sample(0.4, &mut rng).omega;
        assert_eq!((u[1], u[2]), (0.0, 0.0));
        assert_eq!((u[0], u[3]), (3.0, 3.0));
    }

    #[test]
    fn control_noise_statistics() {
        let model = ControlModel::constant(0.0, 0.25, Scenario::Nominal);
        let mut rng = substream(11, Domain::Test, 0);
        let n = 100_000;
        let mut sum = Vector4::zeros();
        let mut lo = Vector4::repeat(f64::INFINITY);
        let mut hi = Vector4::repeat(f64::NEG_INFINITY);
        for _ in 0..n {
            let w = model.sample(2.0, &mut rng).omega;
            sum += w;
            lo = lo.inf(&w);
            hi = hi.sup(&w);
        }
        for i in 0..4 {
            assert!((sum[i] / n as f64).abs() <= 0.005);
            assert!((-0.25..=-0.24).contains(&lo[i]), "min {}", lo[i]);
            assert!((0.24..=0.25).contains(&hi[i]), "max {}", hi[i]);
        }
    }

    #[test]
    fn failure_box_centers_failed_rotors_at_zero() {
        let p = QuadParams::default();
        let b = ControlModel::sinusoid(&p, 0.5, 0.2, 0.25, Scenario::RotorFailure).admissible_box(1.0);
        assert_eq!(b.center[1], 0.0);
        assert_eq!(b.center[2], 0.0);
        assert!(b.center[0] > 10.0);
        assert!(b.half_width.iter().all(|h| *h == 0.25));
    }

    fn small_dataset(seed: u64) -> TrajectoryDataset {
        let p = QuadParams::default();
        let control = ControlModel::sinusoid(&p, 0.5, 0.2, 0.25, Scenario::Nominal);
        let x0 = initial_box(0.5, 1e-3, 0.1, 1e-3);
        generate_dataset(5, 20, 0.1, &x0, &control, &p, seed).unwrap()
    }

    #[test]
    fn dataset_shape_and_initial_set() {
        let ds = small_dataset(3);
        let x0 = initial_box(0.5, 1e-3, 0.1, 1e-3);
        assert_eq!(ds.trajectories.len(), 5);
        for t in &ds.trajectories {
            assert_eq!(t.states.len(), 21);
            assert_eq!(t.inputs.len(), 20);
            assert!(x0.contains(&t.states[0].to_dvector(), 0.0));
        }
        assert_eq!(ds, small_dataset(3));
        assert_ne!(ds, small_dataset(4));
    }

    #[test]
    fn dataset_validation() {
        let p = QuadParams::default();
        let control = ControlModel::sinusoid(&p, 0.5, 0.2, 0.25, Scenario::Nominal);
        let x0 = initial_box(0.5, 1e-3, 0.1, 1e-3);
        assert!(generate_dataset(0, 20, 0.1, &x0, &control, &p, 0).is_err());
        assert!(generate_dataset(1, 1, 0.1, &x0, &control, &p, 0).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let ds = small_dataset(9);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let text = std::fs::read_to_string(dir.path().join("traj_0.csv")).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.ends_with(",,,,"));
        assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn mixing_is_linear_in_squared_speeds(w in prop::array::uniform4(-50.0f64..50.0)) {
            let p = QuadParams::default();
            let cmd = RotorCommand::new(w[0], w[1], w[2], w[3]);
            let scaled = RotorCommand { omega: cmd.omega * 2f64.sqrt() };
            let a = mix_rotor_speeds(&scaled, &p);
            let b = mix_rotor_speeds(&cmd, &p) * 2.0;
            for i in 0..4 {
                prop_assert!((a[i] - b[i]).abs() <= 1e-12 * (1.0 + b[i].abs()));
            }
        }

        #[test]
        fn zero_thrust_motion_is_ballistic(
            pos in prop::array::uniform3(-1.0f64..1.0),
            vz in -1.0f64..1.0,
            att in prop::array::uniform3(-0.5f64..0.5),
        ) {
            let p = QuadParams::default();
            let mut s = State12 {
                pos: Vector3::from(pos),
                vel: Vector3::new(0.0, 0.0, vz),
                att: Vector3::from(att),
                rate: Vector3::zeros(),
            };
            let dt = 0.1;
            for k in 1..=10 {
                s = integrate_step(&s, &RotorCommand::new(0.0, 0.0, 0.0, 0.0), dt, &p).unwrap();
                let t = k as f64 * dt;
                prop_assert_eq!(s.pos[0], pos[0]);
                prop_assert_eq!(s.pos[1], pos[1]);
                prop_assert!((s.pos[2] - (pos[2] + vz * t + 0.5 * p.g * t * t)).abs() <= 1e-12);
                prop_assert_eq!(s.att, Vector3::from(att));
            }
        }
    }
}
