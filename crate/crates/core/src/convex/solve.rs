//! Numeric inversion of monotone gradient maps.

use super::ConvexFn;
use crate::error::{HinfError, Result};
use crate::linalg::{self, Matrix, Vector};

const MAX_NEWTON: usize = 100;
const MAX_SCALAR: usize = 400;

fn accept_tol(y_norm: f64) -> f64 {
    1e-10 * (1.0 + y_norm)
}

/// Solves `F(x) = y` for a scalar, nondecreasing `F` with derivative `dF`.
///
/// Brackets the root by geometric expansion from `x0`, then runs Newton
/// steps safeguarded by bisection until the bracket or the step collapses
/// to rounding level. Tiny targets are resolved to full relative precision.
pub fn invert_scalar(
    what: &str,
    y: f64,
    x0: f64,
    f: impl Fn(f64) -> Result<f64>,
    df: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if !y.is_finite() {
        return Err(HinfError::Numerical(format!("{what}: non-finite target")));
    }
    let residual = |x: f64| -> Result<f64> { Ok(f(x)? - y) };
    let r0 = residual(x0)?;
    if r0 == 0.0 {
        return Ok(x0);
    }
    let d0 = df(x0)?;
    let mut step = if d0.is_finite() && d0 > 0.0 {
        r0.abs() / d0
    } else {
        1.0
    };
    if step == 0.0 || !step.is_finite() {
        step = 1.0;
    }
    let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi);
    let mut inner = x0;
    let mut expansions = 0;
    loop {
        let trial = x0 + dir * step;
        let r = residual(trial)?;
        if (dir > 0.0 && r >= 0.0) || (dir < 0.0 && r <= 0.0) {
            if dir > 0.0 {
                lo = inner;
                hi = trial;
            } else {
                lo = trial;
                hi = inner;
            }
            if r == 0.0 {
                return Ok(trial);
            }
            break;
        }
        inner = trial;
        step *= 2.0;
        expansions += 1;
        if expansions > 2100 || !step.is_finite() {
            return Err(HinfError::NoConvergence {
                what: format!("{what}: bracketing"),
                iterations: expansions,
                residual: r.abs(),
            });
        }
    }

    let mut x = 0.5 * (lo + hi);
    // Newton start from the side with the smaller residual magnitude.
    if let (Ok(rl), Ok(dl)) = (residual(lo), df(lo)) {
        if dl > 0.0 && dl.is_finite() {
            let cand = lo - rl / dl;
            if cand > lo && cand < hi {
                x = cand;
            }
        }
    }
    let mut last_r = f64::INFINITY;
    for _ in 0..MAX_SCALAR {
        let r = residual(x)?;
        last_r = r;
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) || width == 0.0 {
            break;
        }
        let d = df(x)?;
        let newton = x - r / d;
        let next = if d > 0.0 && d.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
            x = next;
            last_r = residual(x)?;
            break;
        }
        x = next;
    }
    if last_r.abs() > accept_tol(y.abs()) {
        return Err(HinfError::NoConvergence {
            what: what.to_string(),
            iterations: MAX_SCALAR,
            residual: last_r.abs(),
        });
    }
    Ok(x)
}

/// Solves a square nonlinear system `F(x) = 0` by Newton's method with a
/// backtracking line search on `‖F‖`.
pub fn newton_system(
    what: &str,
    x0: Vector,
    scale: f64,
    eval: impl Fn(&Vector) -> Result<(Vector, Matrix)>,
) -> Result<Vector> {
    let mut x = x0;
    let (mut r, mut jac) = eval(&x)?;
    let mut norm = r.norm();
    for it in 0..MAX_NEWTON {
        if norm <= 1e-15 * (1.0 + scale) {
            return Ok(x);
        }
        let dir = -linalg::solve(&jac, &r)?;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let trial = &x + &dir * t;
            if let Ok((rt, jt)) = eval(&trial) {
                let nt = rt.norm();
                if nt.is_finite() && nt < norm * (1.0 - 1e-4 * t) {
                    x = trial;
                    r = rt;
                    jac = jt;
                    norm = nt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || (&dir * t).norm() <= 1e-15 * (1.0 + x.norm()) {
            if norm <= accept_tol(scale) {
                return Ok(x);
            }
            return Err(HinfError::NoConvergence {
                what: what.to_string(),
                iterations: it + 1,
                residual: norm,
            });
        }
    }
    if norm <= accept_tol(scale) {
        Ok(x)
    } else {
        Err(HinfError::NoConvergence {
            what: what.to_string(),
            iterations: MAX_NEWTON,
            residual: norm,
        })
    }
}

/// `∇f*(y)`: the minimiser of `f(x) − yᵀx`.
///
/// Scalar functions use [`invert_scalar`]. Higher dimensions use damped
/// Newton with an Armijo test on `f(x) − yᵀx`, accepting a step also when
/// it reduces the gradient residual (near the optimum the objective
/// decrease drowns in rounding).
pub fn invert_gradient<F: ConvexFn + ?Sized>(f: &F, y: &Vector) -> Result<Vector> {
    let what = format!("gradient inversion of {}", f.name());
    if y.len() != f.dim() {
        return Err(HinfError::Dimension(format!(
            "{} expects dimension {}, got {}",
            f.name(),
            f.dim(),
            y.len()
        )));
    }
    if f.dim() == 1 {
        let x = invert_scalar(
            &what,
            y[0],
            0.0,
            |x| Ok(f.gradient(&linalg::scalar(x))?[0]),
            |x| Ok(f.hessian(&linalg::scalar(x))?[(0, 0)]),
        )?;
        return Ok(linalg::scalar(x));
    }

    let n = f.dim();
    let objective = |x: &Vector| -> Result<f64> { Ok(f.value(x)? - y.dot(x)) };
    let mut x = Vector::zeros(n);
    let mut phi = objective(&x)?;
    let mut g = f.gradient(&x)? - y;
    for it in 0..MAX_NEWTON {
        let gnorm = g.norm();
        if gnorm <= 1e-15 * (1.0 + y.norm()) {
            return Ok(x);
        }
        let mut h = linalg::symmetrize(&f.hessian(&x)?);
        let mut dir = None;
        let mut tau = 0.0;
        for _ in 0..30 {
            if let Some(chol) = h.clone().cholesky() {
                dir = Some(-chol.solve(&g));
                break;
            }
            tau = if tau == 0.0 { 1e-10 * (1.0 + h.norm()) } else { tau * 10.0 };
            h += Matrix::identity(n, n) * tau;
        }
        let dir = dir.ok_or_else(|| HinfError::Numerical(format!("{what}: indefinite Hessian")))?;
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-14 {
            let trial = &x + &dir * t;
            if f.in_domain(&trial) {
                let phi_t = objective(&trial)?;
                if phi_t.is_finite() {
                    let g_t = f.gradient(&trial)? - y;
                    if phi_t <= phi + 1e-4 * t * slope || g_t.norm() < gnorm {
                        x = trial;
                        phi = phi_t;
                        g = g_t;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted || (&dir * t).norm() <= 1e-16 * (1.0 + x.norm()) {
            let res = g.norm();
            if res <= accept_tol(y.norm()) {
                return Ok(x);
            }
            return Err(HinfError::NoConvergence {
                what,
                iterations: it + 1,
                residual: res,
            });
        }
    }
    let res = g.norm();
    if res <= accept_tol(y.norm()) {
        Ok(x)
    } else {
        Err(HinfError::NoConvergence {
            what,
            iterations: MAX_NEWTON,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_inversion_of_cubic_like_map() {
        let x = invert_scalar("t", 10.0, 0.0, |x| Ok(x + x * x * x), |x| Ok(1.0 + 3.0 * x * x)).unwrap();
        assert!((x + x * x * x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_inversion_keeps_relative_precision_for_tiny_targets() {
        let y = 3e-80;
        let x = invert_scalar("t", y, 0.0, |x| Ok(2.0 * x + x.abs() * x), |x| Ok(2.0 + 2.0 * x.abs())).unwrap();
        assert!(((x - y / 2.0) / (y / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn scalar_inversion_negative_target() {
        let x = invert_scalar("t", -5.0, 0.0, |x| Ok(x.signum() * x.abs().exp_m1()), |x| Ok(x.abs().exp()))
            .unwrap();
        assert!((x + 6f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn newton_system_solves_linear() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = Vector::from_vec(vec![1.0, -1.0]);
        let x = newton_system("lin", Vector::zeros(2), 1.0, |x| Ok((&a * x - &b, a.clone()))).unwrap();
        assert!((&a * &x - &b).norm() < 1e-13);
    }
}
