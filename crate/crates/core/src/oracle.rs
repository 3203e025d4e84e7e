//! Discrete-time dynamics oracles.
//!
//! Anything that maps `(k, x_k, u_k)` to `x_{k+1}` at a fixed sampling
//! interval: the quadrotor simulator, the learned network, an exact linear
//! map or a sequence of fitted lifts. Window building and Monte-Carlo
//! validation only see this trait.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait Dynamics: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Sampling interval in seconds.
    fn dt(&self) -> f64;

    /// One step from `x` under `u` held over `[k dt, (k+1) dt)`.
    fn step(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Column-wise batch of [`Dynamics::step`]. Implementors may override
    /// with a vectorised path; results must match the per-column path.
    fn step_batch(&self, k: usize, xs: &DMatrix<f64>, us: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.state_dim(), xs.ncols());
        for j in 0..xs.ncols() {
            let x = xs.column(j).into_owned();
            let u = us.column(j).into_owned();
            out.set_column(j, &self.step(k, &x, &u)?);
        }
        Ok(out)
    }
}

pub(crate) fn check_finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// `x_{k+1} = x_k`: the flow of the zero vector field.
#[derive(Debug, Clone)]
pub struct ZeroDynamics {
    pub n_x: usize,
    pub n_u: usize,
    pub dt: f64,
}

impl Dynamics for ZeroDynamics {
    fn state_dim(&self) -> usize {
        self.n_x
    }
    fn input_dim(&self) -> usize {
        self.n_u
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, _k: usize, x: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x.clone())
    }
}

/// Time-invariant affine map `x' = A x + B u + d`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub dt: f64,
}

impl LinearMap {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.nrows() {
            return Err(Error::Shape(format!(
                "A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let offset = DVector::zeros(a.nrows());
        Ok(Self { a, b, offset, dt })
    }

    /// Double integrator `p' = p + dt v + dt^2/2 u`, `v' = v + dt u`.
    pub fn double_integrator(dt: f64) -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.5 * dt * dt, dt]);
        Self::new(a, b, dt).expect("shapes are consistent")
    }
}

impl Dynamics for LinearMap {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step(&self, k: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let next = &self.a * x + &self.b * u + &self.offset;
        check_finite(&next, k)?;
        Ok(next)
    }
    fn step_batch(&self, k: usize, xs: &DMatrix<f64>, us: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut next = &self.a * xs + &self.b * us;
        for mut col in next.column_iter_mut() {
            col += &self.offset;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        Ok(next)
    }
}
