use crate::error::{Error, Result};

/// A binary linear code given by a sparse parity-check matrix, together with
/// the systematic encoder derived from it.
///
/// Rank-deficient check matrices are fine: `k = n - rank(H)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    n: usize,
    k: usize,
    checks: Vec<Vec<usize>>,
    vars: Vec<Vec<usize>>,
    /// Information positions first, then one pivot position per independent check.
    perm: Vec<usize>,
    /// Row `i`: info bits (packed) whose sum gives the bit at `perm[k + i]`.
    parity: Vec<Vec<u64>>,
    /// Edge ids run check-major; `check_start[c]..check_start[c + 1]` are check `c`'s.
    check_start: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

fn get(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

fn flip(row: &mut [u64], i: usize) {
    row[i / 64] ^= 1 << (i % 64);
}

impl CodeSpec {
    /// Builds a code from check → variable adjacency (0-indexed).
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || checks.is_empty() {
            return Err(Error::InfeasibleParameters("need at least one variable and one check".into()));
        }
        let mut checks = checks;
        let mut vars = vec![Vec::new(); n];
        for (c, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InconsistentDegrees(format!("check {} lists a variable twice", c + 1)));
            }
            for &v in row.iter() {
                if v >= n {
                    return Err(Error::InconsistentDegrees(format!("check {} references variable {} > n", c + 1, v + 1)));
                }
                vars[v].push(c);
            }
        }

        let m = checks.len();
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|row| {
                let mut r = vec![0u64; words];
                for &v in row {
                    flip(&mut r, v);
                }
                r
            })
            .collect();
        // Pivot from the right so the leading positions tend to carry information.
        let mut pivots = Vec::new();
        for col in (0..n).rev() {
            let rank = pivots.len();
            if rank == m {
                break;
            }
            let Some(p) = (rank..m).find(|&r| get(&rows[r], col)) else { continue };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && get(row, col) {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(col);
        }
        let rank = pivots.len();
        let k = n - rank;
        if k == 0 {
            return Err(Error::InfeasibleParameters("parity checks leave no information bits".into()));
        }

        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let info: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let parity = rows[..rank]
            .iter()
            .map(|row| {
                let mut packed = vec![0u64; k.div_ceil(64)];
                for (j, &col) in info.iter().enumerate() {
                    if get(row, col) {
                        flip(&mut packed, j);
                    }
                }
                packed
            })
            .collect();
        let mut perm = info;
        perm.extend(&pivots);

        let mut check_start = Vec::with_capacity(m + 1);
        let mut var_edges = vec![Vec::new(); n];
        let mut e = 0;
        for row in &checks {
            check_start.push(e);
            for &v in row {
                var_edges[v].push(e);
                e += 1;
            }
        }
        check_start.push(e);

        Ok(CodeSpec { n, k, checks, vars, perm, parity, check_start, var_edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parity checks as listed (may exceed `n - k`).
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn vars(&self) -> &[Vec<usize>] {
        &self.vars
    }

    pub fn edges(&self) -> usize {
        *self.check_start.last().unwrap()
    }

    /// Codeword positions carrying the information bits, in info order.
    pub fn info_positions(&self) -> &[usize] {
        &self.perm[..self.k]
    }

    /// Column permutation that puts the code in systematic form: information
    /// positions followed by parity positions.
    pub fn column_permutation(&self) -> &[usize] {
        &self.perm
    }

    pub(crate) fn check_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.check_start[c]..self.check_start[c + 1]
    }

    pub(crate) fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[v]
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::LengthMismatch { expected: self.k, got: info.len() });
        }
        let mut packed = vec![0u64; self.k.div_ceil(64)];
        let mut x = vec![0u8; self.n];
        for (j, (&b, &pos)) in info.iter().zip(self.info_positions()).enumerate() {
            if b & 1 == 1 {
                flip(&mut packed, j);
                x[pos] = 1;
            }
        }
        for (row, &pos) in self.parity.iter().zip(&self.perm[self.k..]) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            x[pos] = (ones & 1) as u8;
        }
        Ok(x)
    }

    pub fn extract_info(&self, word: &[u8]) -> Vec<u8> {
        self.info_positions().iter().map(|&p| word[p]).collect()
    }

    /// True when every check sums to zero over GF(2).
    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.checks.iter().all(|row| row.iter().fold(0u8, |s, &v| s ^ (word[v] & 1)) == 0)
    }
}
