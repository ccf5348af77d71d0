//! Derivative-free optimizers for the loss anchors: coarse grid scan
//! followed by golden-section (1-D) or Nelder-Mead (2-D) refinement.
//!
//! Optima that land on the domain boundary are flagged; gap curves anchored
//! to a boundary optimum would be confounded by the projection, so callers
//! normally escalate the flag to an error.

use crate::env::OracleError;

/// Refined minimizer plus a boundary flag.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub argmin: Vec<f64>,
    pub min: f64,
    /// Within one coarse step of the domain edge.
    pub boundary: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const PARAM_TOL: f64 = 1e-6;

/// Minimize a 1-D function on `[lower, upper]`: scan at `coarse_step`, then
/// golden-section around the best node. Non-finite values are treated as
/// out of range.
pub fn grid_optimum_1d(
    f: impl Fn(f64) -> f64,
    lower: f64,
    upper: f64,
    coarse_step: f64,
    allow_boundary: bool,
) -> Result<Optimum, OracleError> {
    assert!(coarse_step > 0.0 && upper > lower);
    let n = ((upper - lower) / coarse_step).round() as usize;
    let mut best = (f64::INFINITY, lower);
    for i in 0..=n {
        let x = (lower + i as f64 * coarse_step).min(upper);
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    if !best.0.is_finite() {
        return Err(OracleError::Other("loss not finite anywhere on the domain".into()));
    }

    // Golden-section on the bracketing interval.
    let mut a = (best.1 - coarse_step).max(lower);
    let mut b = (best.1 + coarse_step).min(upper);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > PARAM_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let x_star = 0.5 * (a + b);
    let v_star = f(x_star).min(best.0);
    let boundary = x_star - lower <= coarse_step || upper - x_star <= coarse_step;
    if boundary && !allow_boundary {
        return Err(OracleError::BoundaryOptimum(format!(
            "argmin {x_star:.6} sits within one step of [{lower}, {upper}]"
        )));
    }
    Ok(Optimum { argmin: vec![x_star], min: v_star, boundary })
}

/// Rectangular 2-D domain.
#[derive(Debug, Clone, Copy)]
pub struct Domain2 {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Domain2 {
    fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0].max(self.lower[0]).min(self.upper[0]),
            x[1].max(self.lower[1]).min(self.upper[1]),
        ]
    }

    fn near_edge(&self, x: [f64; 2], margin: f64) -> bool {
        (x[0] - self.lower[0]) <= margin
            || (self.upper[0] - x[0]) <= margin
            || (x[1] - self.lower[1]) <= margin
            || (self.upper[1] - x[1]) <= margin
    }
}

/// Minimize a 2-D function on a box: coarse grid scan, then a clamped
/// Nelder-Mead simplex from the best node down to `1e-6` parameter spread.
/// `+inf` values mark infeasible points and are never selected.
pub fn grid_optimum_2d(
    f: impl Fn([f64; 2]) -> f64,
    domain: &Domain2,
    coarse_step: f64,
    allow_boundary: bool,
) -> Result<Optimum, OracleError> {
    assert!(coarse_step > 0.0);
    let n0 = ((domain.upper[0] - domain.lower[0]) / coarse_step).round() as usize;
    let n1 = ((domain.upper[1] - domain.lower[1]) / coarse_step).round() as usize;
    let mut best = (f64::INFINITY, [domain.lower[0], domain.lower[1]]);
    for i in 0..=n0 {
        let x0 = (domain.lower[0] + i as f64 * coarse_step).min(domain.upper[0]);
        for j in 0..=n1 {
            let x1 = (domain.lower[1] + j as f64 * coarse_step).min(domain.upper[1]);
            let v = f([x0, x1]);
            if v < best.0 {
                best = (v, [x0, x1]);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(OracleError::Other("loss not finite anywhere on the domain".into()));
    }

    // Nelder-Mead with points clamped into the box.
    let eval = |x: [f64; 2]| {
        let v = f(domain.clamp(x));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex = vec![
        (best.1, best.0),
        (domain.clamp([best.1[0] + coarse_step, best.1[1]]), 0.0),
        (domain.clamp([best.1[0], best.1[1] + coarse_step]), 0.0),
    ];
    simplex[1].1 = eval(simplex[1].0);
    simplex[2].1 = eval(simplex[2].0);

    for _ in 0..500 {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                ((x[0] - simplex[0].0[0]).powi(2) + (x[1] - simplex[0].0[1]).powi(2)).sqrt()
            })
            .fold(0.0f64, f64::max);
        if spread < PARAM_TOL {
            break;
        }
        let (best_pt, worst) = (simplex[0], simplex[2]);
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - worst.0[0]),
            centroid[1] + (centroid[1] - worst.0[1]),
        ];
        let fr = eval(reflect);
        if fr < best_pt.1 {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - worst.0[0]),
                centroid[1] + 2.0 * (centroid[1] - worst.0[1]),
            ];
            let fe = eval(expand);
            simplex[2] = if fe < fr {
                (domain.clamp(expand), fe)
            } else {
                (domain.clamp(reflect), fr)
            };
        } else if fr < simplex[1].1 {
            simplex[2] = (domain.clamp(reflect), fr);
        } else {
            let contract = [
                centroid[0] + 0.5 * (worst.0[0] - centroid[0]),
                centroid[1] + 0.5 * (worst.0[1] - centroid[1]),
            ];
            let fc = eval(contract);
            if fc < worst.1 {
                simplex[2] = (domain.clamp(contract), fc);
            } else {
                // Shrink toward the best vertex.
                for i in 1..3 {
                    let x = [
                        simplex[0].0[0] + 0.5 * (simplex[i].0[0] - simplex[0].0[0]),
                        simplex[0].0[1] + 0.5 * (simplex[i].0[1] - simplex[0].0[1]),
                    ];
                    simplex[i] = (x, eval(x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (argmin, min) = simplex[0];
    let boundary = domain.near_edge(argmin, coarse_step);
    if boundary && !allow_boundary {
        return Err(OracleError::BoundaryOptimum(format!(
            "argmin ({:.6}, {:.6}) sits within one step of the box edge",
            argmin[0], argmin[1]
        )));
    }
    Ok(Optimum { argmin: argmin.to_vec(), min, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_1d() {
        let opt = grid_optimum_1d(|x| (x - 3.0) * (x - 3.0), 0.0, 10.0, 0.1, false).unwrap();
        assert!((opt.argmin[0] - 3.0).abs() < 1e-6);
        assert!(opt.min < 1e-10);
        assert!(!opt.boundary);
    }

    #[test]
    fn monotone_loss_hits_boundary() {
        let err = grid_optimum_1d(|x| x, 0.0, 1.0, 0.05, false).unwrap_err();
        assert!(matches!(err, OracleError::BoundaryOptimum(_)));
        let opt = grid_optimum_1d(|x| x, 0.0, 1.0, 0.05, true).unwrap();
        assert!(opt.boundary);
        assert!(opt.argmin[0] < 0.06);
    }

    #[test]
    fn quadratic_2d_with_infeasible_region() {
        let f = |x: [f64; 2]| {
            if x[0] + x[1] > 12.0 {
                f64::INFINITY
            } else {
                (x[0] - 2.0).powi(2) + 3.0 * (x[1] - 4.0).powi(2)
            }
        };
        let domain = Domain2 { lower: [0.0, 0.0], upper: [10.0, 10.0] };
        let opt = grid_optimum_2d(f, &domain, 0.25, false).unwrap();
        assert!((opt.argmin[0] - 2.0).abs() < 1e-5);
        assert!((opt.argmin[1] - 4.0).abs() < 1e-5);
    }

    #[test]
    fn halving_the_step_barely_moves_the_argmin() {
        let f = |x: [f64; 2]| (x[0] - 1.3).powi(2) + (x[1] - 2.7).powi(2);
        let domain = Domain2 { lower: [0.0, 0.0], upper: [5.0, 5.0] };
        let a = grid_optimum_2d(f, &domain, 0.2, false).unwrap();
        let b = grid_optimum_2d(f, &domain, 0.1, false).unwrap();
        assert!((a.argmin[0] - b.argmin[0]).abs() <= 1e-5);
        assert!((a.argmin[1] - b.argmin[1]).abs() <= 1e-5);
    }
}
