//! Parameter update rules: plain gradient descent and the DFP / BFGS /
//! blended inverse-Hessian approximations, with curvature safeguards.
//!
//! Every data party maintains its own approximation `C` over its local
//! coordinates, so the global inverse Hessian is approximated
//! block-diagonally; the update formulas only ever see one party's
//! `(delta_w, delta_g)` pairs.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative curvature threshold: updates are applied only when
/// `dw . dg > eps * |dw| * |dg|`.
pub const DEFAULT_CURVATURE_EPS: f64 = 1e-10;

/// Which update rule drives a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Gd,
    Dfp,
    Bfgs,
    Bdfl(f64),
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::Dfp => "dfp",
            OptimizerKind::Bfgs => "bfgs",
            OptimizerKind::Bdfl(_) => "bdfl",
        }
    }
}

/// Signalled when a `(delta_w, delta_g)` pair fails the curvature
/// preconditions; the caller decides whether to skip or abort.
#[derive(Debug, Error, PartialEq)]
#[error("curvature condition violated: {reason}")]
pub struct CurvatureViolation {
    pub reason: &'static str,
}

/// Learning-rate schedule `lr_k = lr0 / (1 + decay * k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub lr0: f64,
    pub decay: f64,
}

/// Learning rate for round `k` (zero-based).
pub fn lr_at(schedule: &StepSchedule, k: u32) -> f64 {
    schedule.lr0 / (1.0 + schedule.decay * k as f64)
}

/// DFP rank-2 update:
/// `C' = C + dw dw^T / (dw.dg) - (C dg)(C dg)^T / (dg.C dg)`.
pub fn dfp_update(
    c: &DMatrix<f64>,
    dw: &DVector<f64>,
    dg: &DVector<f64>,
    curvature_eps: f64,
) -> Result<DMatrix<f64>, CurvatureViolation> {
    let wg = check_curvature(dw, dg, curvature_eps)?;
    let cg = c * dg;
    let gcg = dg.dot(&cg);
    if gcg <= 0.0 {
        return Err(CurvatureViolation { reason: "dg.C dg <= 0" });
    }
    Ok(c + dw * dw.transpose() / wg - &cg * cg.transpose() / gcg)
}

/// BFGS rank-2 update:
/// `C'' = (I - rho dw dg^T) C (I - rho dg dw^T) + rho dw dw^T`
/// with `rho = 1 / (dg.dw)`.
pub fn bfgs_update(
    c: &DMatrix<f64>,
    dw: &DVector<f64>,
    dg: &DVector<f64>,
    curvature_eps: f64,
) -> Result<DMatrix<f64>, CurvatureViolation> {
    let wg = check_curvature(dw, dg, curvature_eps)?;
    let rho = 1.0 / wg;
    let n = dw.len();
    let eye = DMatrix::<f64>::identity(n, n);
    let left = &eye - dw * dg.transpose() * rho;
    let right = &eye - dg * dw.transpose() * rho;
    Ok(&left * c * &right + dw * dw.transpose() * rho)
}

/// Convex blend `alpha * DFP + (1 - alpha) * BFGS`, both computed from the
/// same input `C`. The endpoints delegate to the pure rules so
/// `alpha = 1` is bit-identical to DFP and `alpha = 0` to BFGS.
pub fn bdfl_update(
    c: &DMatrix<f64>,
    dw: &DVector<f64>,
    dg: &DVector<f64>,
    alpha: f64,
    curvature_eps: f64,
) -> Result<DMatrix<f64>, CurvatureViolation> {
    if alpha == 1.0 {
        return dfp_update(c, dw, dg, curvature_eps);
    }
    if alpha == 0.0 {
        return bfgs_update(c, dw, dg, curvature_eps);
    }
    let dfp = dfp_update(c, dw, dg, curvature_eps)?;
    let bfgs = bfgs_update(c, dw, dg, curvature_eps)?;
    Ok(dfp * alpha + bfgs * (1.0 - alpha))
}

fn check_curvature(
    dw: &DVector<f64>,
    dg: &DVector<f64>,
    curvature_eps: f64,
) -> Result<f64, CurvatureViolation> {
    let wg = dw.dot(dg);
    if wg <= curvature_eps * dw.norm() * dg.norm() {
        return Err(CurvatureViolation { reason: "dw.dg not positive enough" });
    }
    Ok(wg)
}

/// One parameter step: `w - lr * g` for GD, `w - lr * C g` otherwise.
pub fn step(
    w: &DVector<f64>,
    g: &DVector<f64>,
    c: &DMatrix<f64>,
    lr: f64,
    kind: OptimizerKind,
) -> DVector<f64> {
    assert_eq!(w.len(), g.len(), "step over mismatched dimensions");
    match kind {
        OptimizerKind::Gd => w - g * lr,
        _ => {
            assert_eq!(c.nrows(), g.len(), "curvature matrix does not match gradient");
            w - c * g * lr
        }
    }
}

/// Per-party optimizer state: the inverse-Hessian approximation plus the
/// previous `(w, g)` snapshot the next update will difference against.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureState {
    c: DMatrix<f64>,
    prev: Option<(DVector<f64>, DVector<f64>)>,
    round: u32,
}

/// Result of one [`CurvatureState::advance`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvanceOutcome {
    /// True when the curvature safeguard rejected the pair and `C` was kept.
    pub skipped: bool,
}

impl CurvatureState {
    pub fn new(dim: usize) -> Self {
        CurvatureState { c: DMatrix::identity(dim, dim), prev: None, round: 0 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Feeds the freshly observed `(w, g)` pair.
    ///
    /// The first call only stores the snapshot (`C` stays the identity, so
    /// the first quasi-Newton step equals plain gradient descent). Later
    /// calls difference against the stored snapshot and apply the kind's
    /// update when the curvature condition holds; violations keep the
    /// previous `C` and are reported, not fatal.
    pub fn advance(
        &mut self,
        w_new: &DVector<f64>,
        g_new: &DVector<f64>,
        kind: OptimizerKind,
        curvature_eps: f64,
    ) -> AdvanceOutcome {
        self.round += 1;
        let mut skipped = false;
        if !matches!(kind, OptimizerKind::Gd) {
            if let Some((prev_w, prev_g)) = &self.prev {
                let dw = w_new - prev_w;
                let dg = g_new - prev_g;
                let updated = match kind {
                    OptimizerKind::Gd => unreachable!(),
                    OptimizerKind::Dfp => dfp_update(&self.c, &dw, &dg, curvature_eps),
                    OptimizerKind::Bfgs => bfgs_update(&self.c, &dw, &dg, curvature_eps),
                    OptimizerKind::Bdfl(alpha) => {
                        bdfl_update(&self.c, &dw, &dg, alpha, curvature_eps)
                    }
                };
                match updated {
                    Ok(c) => self.c = c,
                    Err(_) => skipped = true,
                }
            }
        }
        self.prev = Some((w_new.clone(), g_new.clone()));
        AdvanceOutcome { skipped }
    }
}
