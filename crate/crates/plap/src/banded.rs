//! Minimal banded SPD Cholesky used by the implicit-step Newton fallback.
//!
//! Storage: `band[r][j] = A[j+r][j]` for r = 0..=bw (lower triangle by
//! diagonals). The implicit-step Jacobians are strictly diagonally dominant
//! with positive diagonal, so the factorization cannot break down.

pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    /// diagonals, band[r] has length n (tail entries of row r unused)
    band: Vec<Vec<f64>>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            band: vec![vec![0.0; n]; bw + 1],
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn set(&mut self, r: usize, j: usize, v: f64) {
        self.band[r][j] = v;
    }

    /// In-place LLᵀ factorization. Returns false if a pivot is not positive.
    pub fn cholesky(&mut self) -> bool {
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let mut s = self.band[0][j];
            for k in 1..=bw.min(j) {
                let l = self.band[k][j - k];
                s -= l * l;
            }
            if !(s > 0.0) {
                return false;
            }
            let d = s.sqrt();
            self.band[0][j] = d;
            for r in 1..=bw {
                if j + r >= n {
                    break;
                }
                let mut s = self.band[r][j];
                for k in 1..=(bw - r).min(j) {
                    s -= self.band[r + k][j - k] * self.band[k][j - k];
                }
                self.band[r][j] = s / d;
            }
        }
        true
    }

    /// Solve L Lᵀ x = b with the factored bands.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // forward: L y = b
        for i in 0..n {
            let mut s = b[i];
            for k in 1..=bw.min(i) {
                s -= self.band[k][i - k] * x[i - k];
            }
            x[i] = s / self.band[0][i];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in 1..=bw.min(n - 1 - i) {
                s -= self.band[k][i] * x[i + k];
            }
            x[i] = s / self.band[0][i];
        }
    }
}
