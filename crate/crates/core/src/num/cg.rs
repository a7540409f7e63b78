use super::{axpy, dot, norm};
use crate::error::{Error, Result};

/// Rayleigh-quotient floor `pᵀHp / pᵀp` below which CG reports breakdown.
pub const CG_CURVATURE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before `residual_norm ≤ tol`.
    pub converged: bool,
}

/// Solves `H x = b` for a symmetric positive-definite operator `H`, starting
/// from `x = 0`.
pub fn cg_solve<H>(hvp: H, b: &[f64], max_iters: usize, tol: f64) -> Result<CgSolution>
where
    H: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= tol {
        return Ok(CgSolution {
            x,
            residual_norm: rs.sqrt(),
            iterations: 0,
            converged: true,
        });
    }
    for it in 0..max_iters {
        let hp = hvp(&p);
        let pp = dot(&p, &p);
        let php = dot(&p, &hp);
        let curvature = php / pp;
        if !curvature.is_finite() || curvature <= CG_CURVATURE_FLOOR {
            return Err(Error::CgBreakdown {
                iteration: it,
                curvature,
            });
        }
        let step = rs / php;
        axpy(step, &p, &mut x);
        axpy(-step, &hp, &mut r);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::CgBreakdown {
                iteration: it,
                curvature,
            });
        }
        let rs_next = dot(&r, &r);
        if rs_next.sqrt() <= tol {
            return Ok(CgSolution {
                x,
                residual_norm: rs_next.sqrt(),
                iterations: it + 1,
                converged: true,
            });
        }
        let beta = rs_next / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_next;
    }
    Ok(CgSolution {
        residual_norm: norm(&r),
        x,
        iterations: max_iters,
        converged: false,
    })
}
