//! Windowed dynamic mode decomposition with control.
//!
//! A window is produced by driving a dynamics oracle from an anchor state
//! with controls drawn uniformly from the admissible box. The lift
//! `x' = A x + B u (+ d)` is the least-squares fit to the window's
//! transitions, solved with a truncated SVD pseudo-inverse.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::oracle::Dynamics;
use crate::rng::{substream, Domain, StreamRng};
use crate::sets::InputSet;

/// Consecutive states `x_k .. x_{k+w}` and controls `u_k .. u_{k+w}`.
/// Column `j` of `upsilon` drives column `j` of `xi` to column `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotWindow {
    pub xi: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
    pub dt: f64,
    pub start: usize,
}

impl SnapshotWindow {
    pub fn new(xi: DMatrix<f64>, upsilon: DMatrix<f64>, dt: f64, start: usize) -> Result<Self> {
        if xi.ncols() < 2 {
            return Err(Error::Shape("a window needs at least two state columns".into()));
        }
        if xi.ncols() != upsilon.ncols() {
            return Err(Error::Shape(format!(
                "window has {} state columns but {} input columns",
                xi.ncols(),
                upsilon.ncols()
            )));
        }
        if xi.iter().chain(upsilon.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: start });
        }
        Ok(Self { xi, upsilon, dt, start })
    }

    /// Number of transitions `w`.
    pub fn width(&self) -> usize {
        self.xi.ncols() - 1
    }

    /// States before each transition.
    pub fn current(&self) -> DMatrix<f64> {
        self.xi.columns(0, self.width()).into_owned()
    }

    /// States after each transition.
    pub fn shifted(&self) -> DMatrix<f64> {
        self.xi.columns(1, self.width()).into_owned()
    }

    /// Controls applied in each transition.
    pub fn inputs(&self) -> DMatrix<f64> {
        self.upsilon.columns(0, self.width()).into_owned()
    }
}

/// Rank and scale information for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rank: usize,
    pub smallest_retained_sv: f64,
    pub largest_sv: f64,
    /// Frobenius norm of the fit residual over the data.
    pub residual: f64,
    /// Number of transitions used.
    pub columns: usize,
}

/// One lift `x_{k+1} = A x_k + B u_k + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtvStep {
    pub k: usize,
    pub dt: f64,
    #[serde(with = "crate::io::row_major")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::io::row_major")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::io::vector")]
    pub offset: DVector<f64>,
    pub diagnostics: FitDiagnostics,
}

impl LtvStep {
    /// Lift with no data behind it, e.g. for tests.
    pub fn exact(k: usize, dt: f64, a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self {
            k,
            dt,
            a,
            b,
            offset: DVector::zeros(n),
            diagnostics: FitDiagnostics {
                rank: 0,
                smallest_retained_sv: 0.0,
                largest_sv: 0.0,
                residual: 0.0,
                columns: 0,
            },
        }
    }

    pub fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.offset
    }

    pub fn gamma(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.a.nrows(), self.a.ncols() + self.b.ncols());
        g.columns_mut(0, self.a.ncols()).copy_from(&self.a);
        g.columns_mut(self.a.ncols(), self.b.ncols()).copy_from(&self.b);
        g
    }
}

/// How the lift is parameterised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftForm {
    /// `Gamma = Xi' pinv([Xi; Upsilon])`, no offset.
    Plain,
    /// Centred regression with offset: `A = I + dA`, `B = dB` where
    /// `[dA dB]` is the minimum-norm fit of the centred increments and
    /// `d` absorbs the means. Directions the data never excite keep
    /// identity dynamics, so `A` stays invertible on short windows.
    #[default]
    Affine,
}

/// Truncated SVD pseudo-inverse.
pub struct PseudoInverse {
    pub pinv: DMatrix<f64>,
    pub rank: usize,
    pub smallest_retained_sv: f64,
    pub largest_sv: f64,
}

/// Pseudo-inverse dropping singular values below `rel_tol * sigma_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<PseudoInverse> {
    // The thin SVD wants rows <= cols for a cheap factorisation; transpose
    // tall inputs and transpose the result back.
    let tall = m.nrows() > m.ncols();
    let work = if tall { m.transpose() } else { m.clone() };
    let svd = nalgebra::linalg::SVD::new(work, true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(largest > 0.0) || !largest.is_finite() {
        return Err(Error::DegenerateWindow);
    }
    let cutoff = rel_tol * largest;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut pinv = DMatrix::zeros(v_t.ncols(), u.nrows());
    let mut rank = 0;
    let mut smallest = largest;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s >= cutoff && s > 0.0 {
            rank += 1;
            smallest = smallest.min(s);
            // pinv += v_i u_i^T / s
            pinv.ger(1.0 / s, &v_t.row(i).transpose(), &u.column(i), 1.0);
        }
    }
    if rank == 0 {
        return Err(Error::DegenerateWindow);
    }
    Ok(PseudoInverse {
        pinv: if tall { pinv.transpose() } else { pinv },
        rank,
        smallest_retained_sv: smallest,
        largest_sv: largest,
    })
}

/// Drives `model` from `x_k` for `w` steps with controls drawn uniformly
/// from `inputs.box_at(k + j)`.
pub fn build_window(
    model: &dyn Dynamics,
    x_k: &DVector<f64>,
    inputs: &dyn InputSet,
    k: usize,
    w: usize,
    rng: &mut StreamRng,
) -> Result<SnapshotWindow> {
    let mut windows = build_windows(model, std::slice::from_ref(x_k), inputs, k, w, rng)?;
    Ok(windows.remove(0))
}

/// One window per anchor, stepped together through
/// [`Dynamics::step_batch`]. Controls are drawn anchor by anchor within each
/// time step.
pub fn build_windows(
    model: &dyn Dynamics,
    anchors: &[DVector<f64>],
    inputs: &dyn InputSet,
    k: usize,
    w: usize,
    rng: &mut StreamRng,
) -> Result<Vec<SnapshotWindow>> {
    if w == 0 {
        return Err(Error::Config("window width must be at least 1".into()));
    }
    let (n_x, n_u) = (model.state_dim(), model.input_dim());
    let n = anchors.len();
    if anchors.iter().any(|a| a.len() != n_x) {
        return Err(Error::Shape(format!("anchor states must have {n_x} entries")));
    }
    let mut xis: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n_x, w + 1); n];
    let mut ups: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n_u, w + 1); n];
    let mut xs = DMatrix::from_columns(anchors);
    for j in 0..=w {
        let omega = inputs.box_at(k + j);
        if omega.dim() != n_u {
            return Err(Error::Shape(format!("control box has dimension {}, expected {n_u}", omega.dim())));
        }
        let mut us = DMatrix::zeros(n_u, n);
        for a in 0..n {
            us.set_column(a, &omega.sample_uniform(rng));
        }
        for a in 0..n {
            xis[a].set_column(j, &xs.column(a));
            ups[a].set_column(j, &us.column(a));
        }
        if j < w {
            xs = model.step_batch(k + j, &xs, &us)?;
        }
    }
    xis.into_iter()
        .zip(ups)
        .map(|(xi, up)| SnapshotWindow::new(xi, up, model.dt(), k))
        .collect()
}

/// `Gamma = Xi' pinv([Xi; Upsilon])` on a single window.
pub fn fit(window: &SnapshotWindow, svd_tol: f64) -> Result<LtvStep> {
    fit_windows(std::slice::from_ref(window), svd_tol, LiftForm::Plain)
}

/// Fits one lift to the transitions of several windows at once.
pub fn fit_windows(windows: &[SnapshotWindow], svd_tol: f64, form: LiftForm) -> Result<LtvStep> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Config("no snapshot windows to fit".into()))?;
    let (n_x, n_u) = (first.xi.nrows(), first.upsilon.nrows());
    if windows.iter().any(|w| w.xi.nrows() != n_x || w.upsilon.nrows() != n_u) {
        return Err(Error::Shape("windows disagree on dimensions".into()));
    }
    let total: usize = windows.iter().map(SnapshotWindow::width).sum();
    let mut z = DMatrix::zeros(n_x + n_u, total);
    let mut next = DMatrix::zeros(n_x, total);
    let mut col = 0;
    for w in windows {
        let m = w.width();
        z.view_mut((0, col), (n_x, m)).copy_from(&w.current());
        z.view_mut((n_x, col), (n_u, m)).copy_from(&w.inputs());
        next.columns_mut(col, m).copy_from(&w.shifted());
        col += m;
    }

    let (gamma, offset, pinv) = match form {
        LiftForm::Plain => {
            let pinv = pseudo_inverse(&z, svd_tol)?;
            (&next * &pinv.pinv, DVector::zeros(n_x), pinv)
        }
        LiftForm::Affine => {
            let z_mean = z.column_mean();
            let next_mean = next.column_mean();
            let mut zc = z.clone();
            let mut inc = &next - z.rows(0, n_x);
            let inc_mean = inc.column_mean();
            for j in 0..total {
                let mut c = zc.column_mut(j);
                c -= &z_mean;
                let mut c = inc.column_mut(j);
                c -= &inc_mean;
            }
            let pinv = pseudo_inverse(&zc, svd_tol)?;
            let mut gamma = &inc * &pinv.pinv;
            for i in 0..n_x {
                gamma[(i, i)] += 1.0;
            }
            let offset = next_mean - &gamma * z_mean;
            (gamma, offset, pinv)
        }
    };

    let mut pred = &gamma * &z;
    for mut c in pred.column_iter_mut() {
        c += &offset;
    }
    let residual = (&next - pred).norm();
    if gamma.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: first.start });
    }
    Ok(LtvStep {
        k: first.start,
        dt: first.dt,
        a: gamma.columns(0, n_x).into_owned(),
        b: gamma.columns(n_x, n_u).into_owned(),
        offset,
        diagnostics: FitDiagnostics {
            rank: pinv.rank,
            smallest_retained_sv: pinv.smallest_retained_sv,
            largest_sv: pinv.largest_sv,
            residual,
            columns: total,
        },
    })
}

/// A fitted lift together with the wall time spent building and fitting it.
#[derive(Debug, Clone)]
pub struct TimedLift {
    pub lift: LtvStep,
    pub seconds: f64,
}

/// Refits a lift at every step `k < horizon`, each from a fresh window
/// anchored at `x_path[k]`. Step `k` draws its excitation from an
/// independent stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn sliding_fit(
    model: &dyn Dynamics,
    x_path: &[DVector<f64>],
    inputs: &dyn InputSet,
    w: usize,
    horizon: usize,
    svd_tol: f64,
    form: LiftForm,
    seed: u64,
) -> Result<Vec<TimedLift>> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if x_path.len() < horizon {
        return Err(Error::Misaligned(format!(
            "operating path has {} states, horizon is {horizon}",
            x_path.len()
        )));
    }
    (0..horizon)
        .map(|k| {
            let t = Instant::now();
            let mut rng = substream(seed, Domain::Excitation, k as u64);
            let lift = build_window(model, &x_path[k], inputs, k, w, &mut rng)
                .and_then(|win| fit_windows(std::slice::from_ref(&win), svd_tol, form))
                .map_err(|e| Error::Lift {
                    step: k,
                    source: Box::new(e),
                })?;
            Ok(TimedLift {
                lift,
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

pub fn write_ltv(dir: &Path, lift: &LtvStep) -> Result<()> {
    write_json(&dir.join(format!("ltv_{}.json", lift.k)), lift)
}

pub fn read_ltv(dir: &Path, k: usize) -> Result<LtvStep> {
    read_json(&dir.join(format!("ltv_{k}.json")))
}

/// A sequence of lifts as a dynamics oracle: step `k` applies lift `k`.
#[derive(Debug, Clone)]
pub struct LtvSequence {
    pub lifts: Vec<LtvStep>,
    pub dt: f64,
}

impl LtvSequence {
    fn lift(&self, k: usize) -> Result<&LtvStep> {
        self.lifts
            .get(k)
            .ok_or_else(|| Error::Misaligned(format!("no lift for step {k} ({} available)", self.lifts.len())))
    }
}

impl Dynamics for LtvSequence {
    fn state_dim(&self) -> usize {
        self.lifts.first().map_or(0, |l| l.a.nrows())
    }
    fn input_dim(&self) -> usize {
        self.lifts.first().map_or(0, |l| l.b.ncols())
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let next = self.lift(k)?.apply(x, u);
        crate::oracle::check_finite(&next, k)?;
        Ok(next)
    }
    fn step_batch(&self, k: usize, xs: &DMatrix<f64>, us: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let l = self.lift(k)?;
        let mut next = &l.a * xs + &l.b * us;
        for mut c in next.column_iter_mut() {
            c += &l.offset;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        Ok(next)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::oracle::{LinearMap, ZeroDynamics};
    use crate::sets::BoxSet;
    use proptest::prelude::*;
    use rand::Rng;

    /// Random matrix scaled to spectral norm `radius`, hence stable for
    /// `radius < 1`.
    pub(crate) fn random_stable(n: usize, radius: f64, rng: &mut StreamRng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let norm = m.clone().svd(false, false).singular_values.max();
        m * (radius / norm)
    }

    pub(crate) fn lti_window(a: &DMatrix<f64>, b: &DMatrix<f64>, w: usize, rng: &mut StreamRng) -> SnapshotWindow {
        let model = LinearMap::new(a.clone(), b.clone(), 0.1).unwrap();
        let x0 = DVector::from_fn(a.nrows(), |_, _| rng.random_range(-1.0..1.0));
        let omega = BoxSet::symmetric(&vec![1.0; b.ncols()]).unwrap();
        build_window(&model, &x0, &omega, 0, w, rng).unwrap()
    }

    /// Pseudo-inverse through the eigendecomposition of `Z Z^T`, independent
    /// of the SVD path.
    fn eigen_pinv(z: &DMatrix<f64>) -> DMatrix<f64> {
        let gram = z * z.transpose();
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let mut inv = DMatrix::zeros(gram.nrows(), gram.ncols());
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 1e-12 * max {
                let v = eig.eigenvectors.column(i);
                inv += &v * v.transpose() / l;
            }
        }
        z.transpose() * inv
    }

    #[test]
    fn zero_dynamics_window_repeats_state() {
        let model = ZeroDynamics { n_x: 3, n_u: 2, dt: 0.1 };
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let omega = BoxSet::symmetric(&[1.0, 1.0]).unwrap();
        let mut rng = substream(0, Domain::Test, 0);
        let win = build_window(&model, &x, &omega, 0, 2, &mut rng).unwrap();
        assert_eq!(win.xi.ncols(), 3);
        for c in win.xi.column_iter() {
            assert_eq!(c, x);
        }
    }

    #[test]
    fn linear_window_satisfies_its_map() {
        let mut rng = substream(1, Domain::Test, 0);
        let a = random_stable(4, 0.9, &mut rng);
        let b = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let win = lti_window(&a, &b, 10, &mut rng);
        for j in 0..10 {
            let pred = &a * win.xi.column(j) + &b * win.upsilon.column(j);
            assert!((pred - win.xi.column(j + 1)).amax() <= 1e-12);
        }
    }

    #[test]
    fn window_is_deterministic() {
        let model = LinearMap::double_integrator(0.1);
        let omega = BoxSet::symmetric(&[1.0]).unwrap();
        let x = DVector::from_vec(vec![0.2, 0.1]);
        let make = || build_window(&model, &x, &omega, 3, 6, &mut substream(5, Domain::Excitation, 3)).unwrap();
        assert_eq!(make(), make());
        assert_eq!(make().start, 3);
    }

    #[test]
    fn recovers_random_lti() {
        let mut rng = substream(2, Domain::Test, 0);
        let a = random_stable(6, 0.95, &mut rng);
        let b = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let win = lti_window(&a, &b, 20, &mut rng);
        let lift = fit(&win, 1e-10).unwrap();
        let err = (&lift.a - &a).norm() + (&lift.b - &b).norm();
        assert!(err <= 1e-8, "recovery error {err:e}");
        assert_eq!(lift.diagnostics.rank, 8);
        let affine = fit_windows(std::slice::from_ref(&win), 1e-10, LiftForm::Affine).unwrap();
        assert!((&affine.a - &a).norm() + (&affine.b - &b).norm() <= 1e-8);
        assert!(affine.offset.amax() <= 1e-8);
    }

    #[test]
    fn identity_on_constant_data() {
        let c = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let xi = DMatrix::from_columns(&vec![c.clone(); 11]);
        let up = DMatrix::zeros(1, 11);
        let win = SnapshotWindow::new(xi, up, 0.1, 0).unwrap();
        let lift = fit(&win, 1e-10).unwrap();
        assert!((&lift.a * &c - &c).amax() <= 1e-12);
    }

    #[test]
    fn rank_deficient_window_gives_minimum_norm_fit() {
        let mut rng = substream(3, Domain::Test, 0);
        let base = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        // Duplicate every column: 8 columns, rank 4 in a 5-row stack.
        let xi = DMatrix::from_fn(4, 9, |i, j| base[(i, j % 4)] + if j == 8 { 0.3 } else { 0.0 });
        let up = DMatrix::from_fn(1, 9, |_, j| base[(4, j % 4)]);
        let win = SnapshotWindow::new(xi, up, 0.1, 0).unwrap();
        let lift = fit(&win, 1e-10).unwrap();

        let mut z = DMatrix::zeros(5, 8);
        z.rows_mut(0, 4).copy_from(&win.current());
        z.rows_mut(4, 1).copy_from(&win.inputs());
        let oracle = win.shifted() * eigen_pinv(&z);
        assert!((lift.gamma() - &oracle).norm() <= 1e-9);
        let resid = (win.shifted() - lift.gamma() * &z).norm();
        let oracle_resid = (win.shifted() - &oracle * &z).norm();
        assert!(resid <= oracle_resid + 1e-10, "{resid:e} vs {oracle_resid:e}");
        assert!(lift.diagnostics.rank < 5);
    }

    #[test]
    fn all_zero_window_is_degenerate() {
        let win = SnapshotWindow::new(DMatrix::zeros(2, 4), DMatrix::zeros(1, 4), 0.1, 0).unwrap();
        assert!(matches!(fit(&win, 1e-10), Err(Error::DegenerateWindow)));
    }

    #[test]
    fn sliding_fit_on_lti_is_constant() {
        let mut rng = substream(4, Domain::Test, 0);
        let a = random_stable(3, 0.9, &mut rng);
        let b = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let model = LinearMap::new(a.clone(), b.clone(), 0.1).unwrap();
        let omega = BoxSet::symmetric(&[1.0]).unwrap();
        let path: Vec<DVector<f64>> = (0..5).map(|k| DVector::from_element(3, k as f64 * 0.1)).collect();
        let lifts = sliding_fit(&model, &path, &omega, 12, 5, 1e-10, LiftForm::Plain, 9).unwrap();
        assert_eq!(lifts.len(), 5);
        for l in &lifts {
            assert!((&l.lift.a - &lifts[0].lift.a).norm() <= 1e-8);
            assert!((&l.lift.b - &lifts[0].lift.b).norm() <= 1e-8);
            assert!(l.seconds >= 0.0);
        }

        // K = 1 is a single build-and-fit.
        let one = sliding_fit(&model, &path, &omega, 12, 1, 1e-10, LiftForm::Plain, 9).unwrap();
        let win = build_window(&model, &path[0], &omega, 0, 12, &mut substream(9, Domain::Excitation, 0)).unwrap();
        assert_eq!(one[0].lift, fit(&win, 1e-10).unwrap());
    }

    #[test]
    fn ltv_round_trip() {
        let mut rng = substream(6, Domain::Test, 0);
        let a = random_stable(3, 0.9, &mut rng);
        let b = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let lift = fit(&lti_window(&a, &b, 10, &mut rng), 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_ltv(dir.path(), &lift).unwrap();
        assert_eq!(read_ltv(dir.path(), lift.k).unwrap(), lift);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn exact_recovery_with_full_row_rank(seed in any::<u64>(), n_x in 2usize..6, n_u in 1usize..3) {
            let mut rng = substream(seed, Domain::Test, 0);
            let a = random_stable(n_x, 0.9, &mut rng);
            let b = DMatrix::from_fn(n_x, n_u, |_, _| rng.random_range(-1.0..1.0));
            let win = lti_window(&a, &b, 3 * (n_x + n_u), &mut rng);
            let lift = fit(&win, 1e-10).unwrap();
            prop_assert!((&lift.a - &a).norm() + (&lift.b - &b).norm() <= 1e-6);
        }

        #[test]
        fn least_squares_optimality(seed in any::<u64>()) {
            let mut rng = substream(seed, Domain::Test, 1);
            let xi = DMatrix::from_fn(3, 7, |_, _| rng.random_range(-1.0..1.0));
            let up = DMatrix::from_fn(2, 7, |_, _| rng.random_range(-1.0..1.0));
            let win = SnapshotWindow::new(xi, up, 0.1, 0).unwrap();
            let lift = fit(&win, 1e-10).unwrap();
            let mut z = DMatrix::zeros(5, 6);
            z.rows_mut(0, 3).copy_from(&win.current());
            z.rows_mut(3, 2).copy_from(&win.inputs());
            let best = (win.shifted() - lift.gamma() * &z).norm();
            for _ in 0..100 {
                let g = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-2.0..2.0));
                prop_assert!(best <= (win.shifted() - g * &z).norm() + 1e-9);
            }
            // One-step prediction of the window's own columns.
            let pred = lift.gamma() * &z;
            prop_assert!(((win.shifted() - pred).norm() - lift.diagnostics.residual).abs() <= 1e-12);
        }
    }
}
