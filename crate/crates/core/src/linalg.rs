//! Dense ridged clique-Laplacian state with a maintained inverse and log-determinant.
//!
//! The state tracks `L + ηI` where `L` is the Laplacian of the reweighted
//! clique graph built so far. Each pair insertion is a rank-one update
//! `L += w' (χ_u - χ_v)(χ_u - χ_v)ᵀ`; the inverse follows by the
//! Sherman-Morrison identity and the log-determinant by the matrix
//! determinant lemma, both in O(n²). A periodic Cholesky refresh bounds drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rank-one updates between automatic refreshes.
pub const DEFAULT_REFRESH_PERIOD: usize = 4096;

#[derive(Debug, Clone)]
pub struct RidgedLaplacianState {
    n: usize,
    eta: f64,
    lap: DMatrix<f64>,
    inv: DMatrix<f64>,
    logdet: f64,
    cum_weight: f64,
    updates_since_refresh: usize,
    refresh_period: usize,
    scratch: DVector<f64>,
}

impl RidgedLaplacianState {
    /// Empty graph on `n` vertices: `L = 0`, inverse `I/η`, log-det `n ln η`.
    pub fn new(n: usize, eta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ridge eta must be positive and finite, got {eta}"
            )));
        }
        Ok(Self {
            n,
            eta,
            lap: DMatrix::zeros(n, n),
            inv: DMatrix::from_diagonal_element(n, n, 1.0 / eta),
            logdet: n as f64 * eta.ln(),
            cum_weight: 0.0,
            updates_since_refresh: 0,
            refresh_period: DEFAULT_REFRESH_PERIOD,
            scratch: DVector::zeros(n),
        })
    }

    /// Sets the number of rank-one updates after which [`refresh_due`](Self::refresh_due) fires.
    pub fn with_refresh_period(mut self, period: usize) -> Self {
        self.refresh_period = period.max(1);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Clique-graph Laplacian, without the ridge.
    pub fn lap(&self) -> &DMatrix<f64> {
        &self.lap
    }

    /// Maintained `(L + ηI)^{-1}`.
    pub fn inv(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// Running `log det(L + ηI)`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn cum_weight(&self) -> f64 {
        self.cum_weight
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    pub fn refresh_due(&self) -> bool {
        self.updates_since_refresh >= self.refresh_period
    }

    pub fn trace(&self) -> f64 {
        self.lap.trace()
    }

    /// `L + ηI` as a fresh matrix.
    pub fn ridged_matrix(&self) -> DMatrix<f64> {
        let mut m = self.lap.clone();
        for i in 0..self.n {
            m[(i, i)] += self.eta;
        }
        m
    }

    /// Number of f64 scalars held by this state.
    pub fn resident_scalars(&self) -> usize {
        self.lap.len() + self.inv.len() + self.scratch.len() + 3
    }

    /// Records hyperedge weight in the running total `W`. Pair insertions do not touch it.
    pub fn add_weight(&mut self, w: f64) {
        self.cum_weight += w;
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        if u == v || u >= self.n || v >= self.n {
            return Err(Error::InvalidPair { u, v, n: self.n });
        }
        Ok(())
    }

    /// Adds a clique edge `(u, v)` with weight `w`. Zero weight is a no-op.
    pub fn add_pair(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        self.check_pair(u, v)?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pair weight must be nonnegative and finite, got {w}"
            )));
        }
        if w == 0.0 {
            return Ok(());
        }
        // x = inv * (χ_u - χ_v)
        for i in 0..self.n {
            self.scratch[i] = self.inv[(i, u)] - self.inv[(i, v)];
        }
        let resistance = self.scratch[u] - self.scratch[v];
        self.logdet += (w * resistance).ln_1p();
        let scale = w / (1.0 + w * resistance);
        // upper triangle mirrored so the inverse stays bit-symmetric
        for j in 0..self.n {
            let xj = self.scratch[j];
            for i in 0..=j {
                let updated = self.inv[(i, j)] - scale * (self.scratch[i] * xj);
                self.inv[(i, j)] = updated;
                self.inv[(j, i)] = updated;
            }
        }

        self.lap[(u, u)] += w;
        self.lap[(v, v)] += w;
        self.lap[(u, v)] -= w;
        self.lap[(v, u)] -= w;
        self.updates_since_refresh += 1;
        Ok(())
    }

    /// `(χ_u - χ_v)ᵀ (L + ηI)^{-1} (χ_u - χ_v)`.
    pub fn effective_resistance(&self, u: usize, v: usize) -> Result<f64> {
        self.check_pair(u, v)?;
        Ok(self.resistance(u, v))
    }

    pub(crate) fn resistance(&self, u: usize, v: usize) -> f64 {
        self.inv[(u, u)] + self.inv[(v, v)] - self.inv[(u, v)] - self.inv[(v, u)]
    }

    /// Principal submatrix of the maintained inverse on the given indices.
    pub fn inverse_block(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.inv[(idx[a], idx[b])])
    }

    /// Recomputes the inverse and log-determinant from `L + ηI` by Cholesky.
    pub fn refresh(&mut self) -> Result<()> {
        let (inv, logdet) = spd_inverse_logdet(self.ridged_matrix())?;
        self.inv = inv;
        self.logdet = logdet;
        self.updates_since_refresh = 0;
        Ok(())
    }
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
pub fn spd_inverse_logdet(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m.cholesky().ok_or(Error::Factorization)?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let inv = chol.inverse();
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok((inv, logdet))
}

/// `log det` of a symmetric positive-definite matrix, or `None` if it is not.
pub fn spd_logdet(m: DMatrix<f64>) -> Option<f64> {
    let chol = m.cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eigen_logdet(m: &DMatrix<f64>) -> f64 {
        m.clone().symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum()
    }

    fn dense_resistance(state: &RidgedLaplacianState, u: usize, v: usize) -> f64 {
        let mut b = DVector::zeros(state.n());
        b[u] = 1.0;
        b[v] = -1.0;
        let x = state.ridged_matrix().lu().solve(&b).unwrap();
        b.dot(&x)
    }

    fn random_state(n: usize, updates: usize, seed: u64) -> RidgedLaplacianState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = RidgedLaplacianState::new(n, 0.5).unwrap();
        for _ in 0..updates {
            let u = rng.random_range(0..n);
            let v = (u + rng.random_range(1..n)) % n;
            s.add_pair(u, v, rng.random_range(0.0..3.0)).unwrap();
        }
        s
    }

    #[test]
    fn init_examples() {
        let s = RidgedLaplacianState::new(3, 1.0).unwrap();
        assert_eq!(s.logdet(), 0.0);
        let s = RidgedLaplacianState::new(2, 2.0).unwrap();
        assert_abs_diff_eq!(s.logdet(), 1.386294, epsilon = 1e-6);
        assert_eq!(s.inv(), &DMatrix::from_diagonal_element(2, 2, 0.5));
        assert_eq!(s.cum_weight(), 0.0);
        assert_eq!(s.effective_resistance(0, 1).unwrap(), 1.0);
    }

    #[test]
    fn init_rejects_bad_parameters() {
        assert!(RidgedLaplacianState::new(1, 1.0).is_err());
        assert!(RidgedLaplacianState::new(3, 0.0).is_err());
        assert!(RidgedLaplacianState::new(3, -1.0).is_err());
        assert!(RidgedLaplacianState::new(3, f64::NAN).is_err());
        assert!(RidgedLaplacianState::new(3, f64::INFINITY).is_err());
    }

    #[test]
    fn add_pair_two_by_two() {
        // det([[2,-1],[-1,2]]) = 3
        let mut s = RidgedLaplacianState::new(2, 1.0).unwrap();
        s.add_pair(0, 1, 1.0).unwrap();
        assert_abs_diff_eq!(s.logdet(), 3.0f64.ln(), epsilon = 1e-15);

        // (L + 2I)^{-1} = [[3,1],[1,3]] / 8
        let mut s = RidgedLaplacianState::new(2, 2.0).unwrap();
        s.add_pair(0, 1, 1.0).unwrap();
        assert_abs_diff_eq!(s.effective_resistance(0, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.inv()[(0, 0)], 3.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.inv()[(0, 1)], 1.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_weight_is_noop() {
        let mut s = random_state(5, 10, 3);
        let before = s.clone();
        s.add_pair(1, 3, 0.0).unwrap();
        assert_eq!(s.inv(), before.inv());
        assert_eq!(s.lap(), before.lap());
        assert_eq!(s.logdet(), before.logdet());
        assert_eq!(s.updates_since_refresh(), before.updates_since_refresh());
    }

    #[test]
    fn rejects_bad_pairs_and_weights() {
        let mut s = RidgedLaplacianState::new(3, 1.0).unwrap();
        assert!(s.add_pair(1, 1, 1.0).is_err());
        assert!(s.add_pair(0, 3, 1.0).is_err());
        assert!(s.add_pair(0, 1, -1.0).is_err());
        assert!(s.add_pair(0, 1, f64::NAN).is_err());
        assert!(s.add_pair(0, 1, f64::INFINITY).is_err());
        assert!(s.effective_resistance(2, 2).is_err());
    }

    #[test]
    fn path_graph_resistance_matches_dense_solve() {
        let mut s = RidgedLaplacianState::new(3, 1.0).unwrap();
        s.add_pair(0, 1, 1.0).unwrap();
        s.add_pair(1, 2, 1.0).unwrap();
        // (L + I) = [[2,-1,0],[-1,3,-1],[0,-1,2]], solve with b = (1,0,-1): x = (0.5,0,-0.5)
        assert_abs_diff_eq!(s.effective_resistance(0, 2).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            s.effective_resistance(0, 2).unwrap(),
            dense_resistance(&s, 0, 2),
            epsilon = 1e-14
        );
    }

    #[test]
    fn refresh_of_fresh_state_is_identity() {
        let mut s = RidgedLaplacianState::new(6, 0.3).unwrap();
        let before = s.clone();
        s.refresh().unwrap();
        assert!((s.inv() - before.inv()).amax() <= 1e-14);
        assert_abs_diff_eq!(s.logdet(), before.logdet(), epsilon = 1e-14);
    }

    #[test]
    fn refresh_agrees_after_many_updates() {
        let mut s = random_state(12, 10_000, 11).with_refresh_period(usize::MAX);
        assert_eq!(s.updates_since_refresh(), 10_000);
        assert!(!s.refresh_due());
        let drifted = s.clone();
        s.refresh().unwrap();
        assert!((s.inv() - drifted.inv()).amax() <= 1e-6);
        assert_abs_diff_eq!(s.logdet(), eigen_logdet(&s.ridged_matrix()), epsilon = 1e-8);
        assert_abs_diff_eq!(s.logdet(), drifted.logdet(), epsilon = 1e-8);
        assert_eq!(s.updates_since_refresh(), 0);
    }

    #[test]
    fn refresh_due_after_period() {
        let mut s = RidgedLaplacianState::new(4, 1.0).unwrap().with_refresh_period(3);
        for _ in 0..2 {
            s.add_pair(0, 1, 1.0).unwrap();
        }
        assert!(!s.refresh_due());
        s.add_pair(2, 3, 1.0).unwrap();
        assert!(s.refresh_due());
    }

    #[test]
    fn inverse_stays_exactly_symmetric() {
        let s = random_state(9, 500, 5);
        assert_eq!(s.inv(), &s.inv().transpose());
    }

    #[test]
    fn laplacian_structure() {
        let s = random_state(7, 200, 8);
        for i in 0..7 {
            assert_abs_diff_eq!(s.lap().row(i).sum(), 0.0, epsilon = 1e-12);
        }
        assert_eq!(s.lap(), &s.lap().transpose());
        let min_eig = s.lap().clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig > -1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn resistance_never_increases(
            n in 3usize..10,
            ops in prop::collection::vec((0usize..100, 1usize..100, 0.0f64..5.0), 1..40),
            probe in (0usize..100, 1usize..100),
        ) {
            let mut s = RidgedLaplacianState::new(n, 0.2).unwrap();
            let (pu, pv) = (probe.0 % n, (probe.0 + 1 + probe.1 % (n - 1)) % n);
            let mut prev = s.effective_resistance(pu, pv).unwrap();
            for (u, d, w) in ops {
                let u = u % n;
                let v = (u + 1 + d % (n - 1)) % n;
                s.add_pair(u, v, w).unwrap();
                let r = s.effective_resistance(pu, pv).unwrap();
                prop_assert!(r <= prev + 1e-10);
                prop_assert!(r > 0.0 && r <= 2.0 / s.eta() + 1e-12);
                prev = r;
            }
        }

        #[test]
        fn logdet_matches_from_scratch(seed in any::<u64>(), n in 2usize..30, updates in 0usize..200) {
            let s = random_state(n, updates, seed);
            let oracle = eigen_logdet(&s.ridged_matrix());
            prop_assert!((s.logdet() - oracle).abs() <= 1e-8);
            let identity = s.inv() * s.ridged_matrix();
            prop_assert!((identity - DMatrix::<f64>::identity(n, n)).amax() <= 1e-8);
        }
    }
}
