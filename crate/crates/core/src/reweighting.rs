//! Per-hyperedge clique reweighting by log-determinant maximization.
//!
//! For an arriving hyperedge `e` with weight `w`, we maximize
//! `log det(A + w Σ_{u<v∈e} c_uv L_uv)` over the pair simplex, where `A` is the
//! current ridged Laplacian. Every `L_uv` is supported on the rows of `e`, so with
//! `M` the `|e|×|e|` principal block of `A^{-1}` the program reduces to
//!
//! ```text
//! log det(A) + log det(M) + log det(M^{-1} + w L_c)
//! ```
//!
//! and the ridged resistances after the update are read off `(M^{-1} + w L_c)^{-1}`.
//! Iterations therefore cost O(|e|³) regardless of `n`, and the caller's state is
//! never written.
//!
//! The solver is Frank-Wolfe with away steps and an exact golden-section line
//! search. The partial derivative with respect to `c_uv` is `w R_c(u, v)`, so the
//! linear-maximization vertex is the maximum-resistance pair and the duality gap
//! is `w (max R_c - Σ c R_c)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hyperedge;
use crate::linalg::{spd_inverse_logdet, spd_logdet, RidgedLaplacianState};

/// Coefficients below this count as off-support in [`kkt_violation`].
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop once the duality gap is at most this (absolute, in objective units).
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Bracket width at which the 1-D search stops.
    pub line_search_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            max_iters: 500,
            line_search_tol: 1e-10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gap_tol > 0.0
            && self.gap_tol.is_finite()
            && self.max_iters > 0
            && self.line_search_tol > 0.0
            && self.line_search_tol.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("optimizer config must be positive: {self:?}")))
        }
    }
}

/// A distribution over the vertex pairs of one hyperedge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reweighting {
    pairs: Vec<((usize, usize), f64)>,
}

impl Reweighting {
    /// Pairs in the lexicographic order of [`Hyperedge::pairs`], zeros included.
    pub fn pairs(&self) -> &[((usize, usize), f64)] {
        &self.pairs
    }

    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|&(_, c)| c)
    }

    pub fn coefficient(&self, u: usize, v: usize) -> Option<f64> {
        let key = (u.min(v), u.max(v));
        self.pairs.iter().find(|(p, _)| *p == key).map(|&(_, c)| c)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Builds a reweighting from explicit coefficients in pair order.
    pub fn from_coefficients(e: &Hyperedge, coefficients: &[f64]) -> Result<Self> {
        if coefficients.len() != e.num_pairs() {
            return Err(Error::DimensionMismatch {
                expected: e.num_pairs(),
                got: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("coefficients must be nonnegative".into()));
        }
        let sum: f64 = coefficients.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("coefficients sum to {sum}, not 1")));
        }
        Ok(Self {
            pairs: e.pairs().zip(coefficients.iter().copied()).collect(),
        })
    }

    /// Folds `w · c_uv` for every pair with positive coefficient into `state`.
    pub fn apply(&self, state: &mut RidgedLaplacianState, weight: f64) -> Result<()> {
        for &((u, v), c) in &self.pairs {
            if c > 0.0 {
                state.add_pair(u, v, weight * c)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightOutcome {
    pub reweighting: Reweighting,
    /// Duality gap `w (max R_c - Σ c R_c)` at the returned point.
    pub gap: f64,
    /// Predicted increase of the log-determinant when the reweighting is applied.
    pub objective: f64,
    pub iterations: usize,
    /// False when the iteration cap or a numerical stall ended the search early.
    pub converged: bool,
}

/// The reduced program on the principal block of one hyperedge.
struct BlockProgram {
    weight: f64,
    base: DMatrix<f64>,
    base_logdet: f64,
    local_pairs: Vec<(usize, usize)>,
}

impl BlockProgram {
    fn new(state: &RidgedLaplacianState, e: &Hyperedge) -> Result<Self> {
        let block = state.inverse_block(e.vertices());
        let (base, neg_logdet) = spd_inverse_logdet(block)?;
        Ok(Self {
            weight: e.weight(),
            base,
            base_logdet: -neg_logdet,
            local_pairs: e.local_pairs().collect(),
        })
    }

    fn matrix(&self, c: &[f64]) -> DMatrix<f64> {
        let mut k = self.base.clone();
        for (&(a, b), &cp) in self.local_pairs.iter().zip(c) {
            let x = self.weight * cp;
            k[(a, a)] += x;
            k[(b, b)] += x;
            k[(a, b)] -= x;
            k[(b, a)] -= x;
        }
        k
    }

    /// Increase in `log det` relative to the state the program was built from.
    fn objective(&self, c: &[f64]) -> f64 {
        spd_logdet(self.matrix(c)).map_or(f64::NEG_INFINITY, |l| l - self.base_logdet)
    }

    /// Ridged resistances of every pair after applying `c`.
    fn resistances(&self, c: &[f64]) -> Result<Vec<f64>> {
        let (kinv, _) = spd_inverse_logdet(self.matrix(c))?;
        Ok(self
            .local_pairs
            .iter()
            .map(|&(a, b)| kinv[(a, a)] + kinv[(b, b)] - 2.0 * kinv[(a, b)])
            .collect())
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Golden-section search for the maximum of a concave function on `[0, hi]`.
fn golden_section(mut f: impl FnMut(f64) -> f64, hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Finds the pair reweighting of `e` that maximizes the ridged log-determinant.
///
/// `state` is read only. When the iteration cap is hit the best iterate is
/// returned with `converged == false` and `gap > cfg.gap_tol`.
pub fn optimal_reweighting(
    state: &RidgedLaplacianState,
    e: &Hyperedge,
    cfg: &OptimizerConfig,
) -> Result<ReweightOutcome> {
    optimal_reweighting_observed(state, e, cfg, |_| {})
}

/// Like [`optimal_reweighting`], calling `observe` with the objective after every iteration.
pub fn optimal_reweighting_observed(
    state: &RidgedLaplacianState,
    e: &Hyperedge,
    cfg: &OptimizerConfig,
    mut observe: impl FnMut(f64),
) -> Result<ReweightOutcome> {
    if let Some(&vertex) = e.vertices().last().filter(|&&v| v >= state.n()) {
        return Err(Error::EdgeOutsideStream { vertex, n: state.n() });
    }
    let pairs = e.num_pairs();
    if pairs == 1 {
        let reweighting = Reweighting::from_coefficients(e, &[1.0])?;
        let r = state.resistance(e.vertices()[0], e.vertices()[1]);
        return Ok(ReweightOutcome {
            reweighting,
            gap: 0.0,
            objective: (e.weight() * r).ln_1p(),
            iterations: 0,
            converged: true,
        });
    }

    let program = BlockProgram::new(state, e)?;
    let w = e.weight();
    let mut c = vec![1.0 / pairs as f64; pairs];
    let mut value = program.objective(&c);
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut trial = vec![0.0; pairs];

    while iterations <= cfg.max_iters {
        let grad: Vec<f64> = program.resistances(&c)?.into_iter().map(|r| w * r).collect();
        let avg: f64 = grad.iter().zip(&c).map(|(g, c)| g * c).sum();
        let toward = argmax_first(&grad);
        gap = (grad[toward] - avg).max(0.0);
        let away = (0..pairs)
            .filter(|&p| c[p] > 0.0)
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]))
            .expect("simplex point has nonempty support");
        let away_gap = (avg - grad[away]).max(0.0);
        if gap <= cfg.gap_tol && away_gap <= cfg.gap_tol {
            converged = true;
            break;
        }
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;

        // direction d and the largest feasible step along it
        let mut dir = vec![0.0; pairs];
        let (step_max, dir_slope) = if gap >= away_gap {
            for p in 0..pairs {
                dir[p] = -c[p];
            }
            dir[toward] += 1.0;
            (1.0, gap)
        } else {
            dir.copy_from_slice(&c);
            dir[away] -= 1.0;
            (c[away] / (1.0 - c[away]), away_gap)
        };
        if dir_slope <= 0.0 || step_max <= 0.0 {
            break;
        }

        let along = |step: f64, buf: &mut [f64]| {
            for p in 0..pairs {
                buf[p] = (c[p] + step * dir[p]).max(0.0);
            }
        };
        // concave slice: a nonnegative slope at the far end means the end is optimal
        along(step_max, &mut trial);
        let end_grad = program.resistances(&trial)?;
        let end_slope: f64 = end_grad.iter().zip(&dir).map(|(r, d)| w * r * d).sum();
        let step = if end_slope >= 0.0 {
            step_max
        } else {
            let mut buf = vec![0.0; pairs];
            golden_section(
                |s| {
                    along(s, &mut buf);
                    program.objective(&buf)
                },
                step_max,
                cfg.line_search_tol,
            )
        };

        let finish = |step: f64, buf: &mut [f64]| {
            along(step, buf);
            if step == step_max && gap < away_gap {
                buf[away] = 0.0;
            }
            let total: f64 = buf.iter().sum();
            buf.iter_mut().for_each(|x| *x /= total);
        };
        finish(step, &mut trial);
        let mut next = program.objective(&trial);
        let noise = 64.0 * f64::EPSILON * (1.0 + value.abs());
        if next - value <= noise && step < step_max {
            // gain is below the objective's resolution; locate the step from the exact slope
            let slope_at = |s: f64, buf: &mut [f64]| -> Result<f64> {
                along(s, buf);
                let r = program.resistances(buf)?;
                Ok(r.iter().zip(&dir).map(|(r, d)| w * r * d).sum())
            };
            let (mut lo, mut hi) = (0.0, step_max);
            let mut buf = vec![0.0; pairs];
            while hi - lo > cfg.line_search_tol * step_max.max(1e-300) {
                let mid = 0.5 * (lo + hi);
                if slope_at(mid, &mut buf)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            finish(lo, &mut trial);
            next = program.objective(&trial);
            if lo == 0.0 || next < value - noise {
                break;
            }
        } else if next.is_nan() || next < value {
            // no representable improvement along the chosen direction
            break;
        }
        c.copy_from_slice(&trial);
        value = next;
        observe(value);
    }

    Ok(ReweightOutcome {
        reweighting: Reweighting::from_coefficients(e, &c)?,
        gap,
        objective: value,
        iterations,
        converged,
    })
}

/// Relative shortfall of supported pairs from the maximum resistance.
///
/// `state_after` must already include the reweighting. Returns
/// `max_{c_uv > 1e-9} (r - R(u,v)) / r` with `r = max_{u,v∈e} R(u,v)`.
pub fn kkt_violation(state_after: &RidgedLaplacianState, e: &Hyperedge, rw: &Reweighting) -> f64 {
    let resistances: Vec<f64> = rw
        .pairs()
        .iter()
        .map(|&((u, v), _)| state_after.resistance(u, v))
        .collect();
    let r_max = resistances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert_eq!(rw.len(), e.num_pairs());
    rw.pairs()
        .iter()
        .zip(&resistances)
        .filter(|((_, c), _)| *c > SUPPORT_THRESHOLD)
        .map(|(_, &r)| (r_max - r) / r_max)
        .fold(0.0, f64::max)
}
