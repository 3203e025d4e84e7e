//! Supporting-hyperplane propagation of reachable sets through linear lifts.
//!
//! A [`ContactFront`] stores, for each hyperplane `<c_i, x> <= gamma_i`,
//! the point `x*_i` where it touches the reachable set. Under a lift
//! `x' = A x + B u + d` the normal is carried by the adjoint,
//! `c' ∝ A^{-T} c`, the contact point follows the bang-bang control that
//! maximises `<c', B u>` over the control box, and `gamma' = <c', x*'>`.
//! The convex hull of the contacts is an inner approximation and the
//! intersection of the halfspaces an outer one.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmdc::LtvStep;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::sets::{sign0, BoxSet, InputSet};

/// Lifts whose state matrix has a larger 2-norm condition number are
/// rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactFront {
    pub k: usize,
    #[serde(with = "crate::io::vectors")]
    pub normals: Vec<DVector<f64>>,
    pub offsets: Vec<f64>,
    #[serde(with = "crate::io::vectors")]
    pub contacts: Vec<DVector<f64>>,
    /// Controls that moved each contact here from the previous front;
    /// empty at the initial front.
    #[serde(with = "crate::io::vectors")]
    pub inputs: Vec<DVector<f64>>,
}

impl ContactFront {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Mean of the contact points.
    pub fn centroid(&self) -> DVector<f64> {
        let n = self.contacts.len().max(1) as f64;
        let dim = self.contacts.first().map_or(0, |c| c.len());
        self.contacts.iter().fold(DVector::zeros(dim), |acc, c| acc + c) / n
    }

    /// Largest `<c_j, x*_i> - gamma_j` over all pairs. Non-positive when the
    /// contact hull lies inside the halfspace intersection.
    pub fn sandwich_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for x in &self.contacts {
            for (c, g) in self.normals.iter().zip(&self.offsets) {
                worst = worst.max(c.dot(x) - g);
            }
        }
        worst
    }

    /// Checks unit normals, the contact condition and inner ⊆ outer.
    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        for (i, ((c, g), x)) in self.normals.iter().zip(&self.offsets).zip(&self.contacts).enumerate() {
            if (c.norm() - 1.0).abs() > 1e-12 {
                return Err(format!("step {}: normal {i} has length {}", self.k, c.norm()));
            }
            if (c.dot(x) - g).abs() > tol {
                return Err(format!("step {}: contact {i} is off its hyperplane by {:e}", self.k, c.dot(x) - g));
            }
        }
        let v = self.sandwich_violation();
        if v > tol {
            return Err(format!("step {}: a contact point violates a halfspace by {v:e}", self.k));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalScheme {
    /// The `2n` face normals `±e_j` of a box.
    #[default]
    AxisAligned,
}

/// Supporting hyperplanes of the box `x0` and their contact points (the
/// face centroids).
pub fn init_contacts(x0: &BoxSet, scheme: NormalScheme) -> Result<ContactFront> {
    match scheme {
        NormalScheme::AxisAligned => {}
    }
    let n = x0.dim();
    if let Some(axis) = x0.half_width.iter().position(|h| *h <= 0.0) {
        return Err(Error::DegenerateSet { axis });
    }
    let mut front = ContactFront {
        k: 0,
        normals: Vec::with_capacity(2 * n),
        offsets: Vec::with_capacity(2 * n),
        contacts: Vec::with_capacity(2 * n),
        inputs: Vec::new(),
    };
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut c = DVector::zeros(n);
            c[j] = s;
            let x = x0.support_point(&c);
            front.offsets.push(c.dot(&x));
            front.normals.push(c);
            front.contacts.push(x);
        }
    }
    Ok(front)
}

/// Maximiser of `<c_next, B u>` over the box, with the box center on ties.
pub fn optimal_control(c_next: &DVector<f64>, b: &DMatrix<f64>, omega: &BoxSet) -> DVector<f64> {
    let s = b.tr_mul(c_next);
    DVector::from_iterator(
        omega.dim(),
        (0..omega.dim()).map(|j| omega.center[j] + omega.half_width[j] * sign0(s[j])),
    )
}

/// Singular-value condition number of `a`; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// One step of the front through `step` with controls in `omega`.
///
/// Hyperplanes are independent; with `parallel` they are processed on the
/// rayon pool, giving results identical to the sequential path.
pub fn propagate_front(
    front: &ContactFront,
    step: &LtvStep,
    omega: &BoxSet,
    parallel: bool,
) -> Result<ContactFront> {
    let n = step.a.nrows();
    if step.a.ncols() != n || step.b.nrows() != n || step.b.ncols() != omega.dim() {
        return Err(Error::Shape(format!(
            "lift is {}x{} / {}x{}, control box has dimension {}",
            step.a.nrows(),
            step.a.ncols(),
            step.b.nrows(),
            step.b.ncols(),
            omega.dim()
        )));
    }
    let cond = condition_number(&step.a);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditionedLift { step: step.k, cond });
    }
    let lu = step.a.transpose().lu();

    let one = |i: usize| -> Result<(DVector<f64>, f64, DVector<f64>, DVector<f64>)> {
        let raw = lu
            .solve(&front.normals[i])
            .ok_or(Error::IllConditionedLift { step: step.k, cond })?;
        let c_next = &raw / raw.norm();
        let u = optimal_control(&c_next, &step.b, omega);
        let x_next = step.apply(&front.contacts[i], &u);
        let gamma = c_next.dot(&x_next);
        if !gamma.is_finite() {
            return Err(Error::NonFinite { step: step.k });
        }
        Ok((c_next, gamma, x_next, u))
    };

    let results: Vec<_> = if parallel {
        (0..front.len()).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..front.len()).map(one).collect::<Result<_>>()?
    };

    let mut next = ContactFront {
        k: front.k + 1,
        normals: Vec::with_capacity(results.len()),
        offsets: Vec::with_capacity(results.len()),
        contacts: Vec::with_capacity(results.len()),
        inputs: Vec::with_capacity(results.len()),
    };
    for (c, g, x, u) in results {
        next.normals.push(c);
        next.offsets.push(g);
        next.contacts.push(x);
        next.inputs.push(u);
    }
    Ok(next)
}

/// Fronts for consecutive steps `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachTube {
    pub fronts: Vec<ContactFront>,
}

impl ReachTube {
    pub fn horizon(&self) -> usize {
        self.fronts.len().saturating_sub(1)
    }

    pub fn check(&self, tol: f64) -> std::result::Result<(), String> {
        for (k, f) in self.fronts.iter().enumerate() {
            if f.k != k {
                return Err(format!("front {k} carries time index {}", f.k));
            }
            f.check(tol)?;
        }
        Ok(())
    }
}

/// Folds [`propagate_front`] over the first `horizon` lifts. Lift `k` maps
/// step `k` to `k + 1` with controls in `omega.box_at(k)`.
pub fn reach_sequence(
    front0: &ContactFront,
    lifts: &[LtvStep],
    omega: &dyn InputSet,
    horizon: usize,
    parallel: bool,
) -> Result<ReachTube> {
    if horizon > lifts.len() {
        return Err(Error::Misaligned(format!(
            "horizon {horizon} exceeds the {} available lifts",
            lifts.len()
        )));
    }
    let mut fronts = Vec::with_capacity(horizon + 1);
    fronts.push(front0.clone());
    for (k, lift) in lifts.iter().take(horizon).enumerate() {
        let next = propagate_front(&fronts[k], lift, &omega.box_at(k), parallel).map_err(|e| Error::Lift {
            step: k,
            source: Box::new(e),
        })?;
        fronts.push(next);
    }
    Ok(ReachTube { fronts })
}

/// True when `point` satisfies every halfspace of `front` up to `tol`.
pub fn outer_contains(front: &ContactFront, point: &DVector<f64>, tol: f64) -> bool {
    front.normals.iter().zip(&front.offsets).all(|(c, g)| c.dot(point) <= g + tol)
}

/// Contents of `reach_<k>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachReport {
    #[serde(flatten)]
    pub front: ContactFront,
    /// Wall time of the step that produced this front.
    pub seconds: f64,
}

pub fn write_reach_report(dir: &Path, front: &ContactFront, seconds: f64) -> Result<()> {
    let report = ReachReport {
        front: front.clone(),
        seconds,
    };
    write_json(&dir.join(format!("reach_{}.json", front.k)), &report)
}

pub fn read_reach_report(dir: &Path, k: usize) -> Result<ReachReport> {
    read_json(&dir.join(format!("reach_{k}.json")))
}

/// Reads `reach_0.json`, `reach_1.json`, ... until the first gap.
pub fn read_tube(dir: &Path) -> Result<ReachTube> {
    let mut fronts = Vec::new();
    while dir.join(format!("reach_{}.json", fronts.len())).exists() {
        fronts.push(read_reach_report(dir, fronts.len())?.front);
    }
    if fronts.is_empty() {
        return Err(Error::MissingArtifact(dir.join("reach_0.json")));
    }
    Ok(ReachTube { fronts })
}
