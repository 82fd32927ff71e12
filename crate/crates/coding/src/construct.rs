use rand::seq::SliceRandom;
use rand::Rng;

use crate::code::CodeSpec;
use crate::error::{Error, Result};

const SWAP_ROUNDS: usize = 60;
/// A repeated variable in one check cancels over GF(2); weigh it far above a 4-cycle.
const DOUBLE_EDGE_COST: usize = 1000;

/// Edge-socket graph: edge `e` belongs to check `e / dc` and variable `var[e]`.
struct Sockets {
    dc: usize,
    var: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl Sockets {
    fn check_vars(&self, c: usize) -> &[usize] {
        &self.var[c * self.dc..(c + 1) * self.dc]
    }

    fn check_of(&self, e: usize) -> usize {
        e / self.dc
    }

    /// Double edges in `c` plus 4-cycles through `c` (pairs of its variables
    /// that meet again in another check).
    fn cost(&self, c: usize, counts: &mut [usize]) -> usize {
        let vars = self.check_vars(c);
        let mut cost = 0;
        for (i, &v) in vars.iter().enumerate() {
            if vars[..i].contains(&v) {
                cost += DOUBLE_EDGE_COST;
            }
        }
        let mut touched = Vec::new();
        for &v in vars {
            for &e in &self.var_edges[v] {
                let other = self.check_of(e);
                if other != c {
                    if counts[other] == 0 {
                        touched.push(other);
                    }
                    counts[other] += 1;
                }
            }
        }
        for o in touched {
            let k = counts[o];
            cost += k * (k - 1) / 2;
            counts[o] = 0;
        }
        cost
    }

    fn swap(&mut self, e: usize, f: usize) {
        let (ve, vf) = (self.var[e], self.var[f]);
        if ve == vf {
            return;
        }
        self.var.swap(e, f);
        let pos = self.var_edges[ve].iter().position(|&x| x == e).unwrap();
        self.var_edges[ve][pos] = f;
        let pos = self.var_edges[vf].iter().position(|&x| x == f).unwrap();
        self.var_edges[vf][pos] = e;
    }
}

/// Random `(dv, dc)`-regular code from a permuted socket list, followed by
/// local edge swaps that remove repeated edges and, best effort, 4-cycles.
pub fn generate_regular_ldpc<R: Rng + ?Sized>(n: usize, dv: usize, dc: usize, rng: &mut R) -> Result<CodeSpec> {
    if n == 0 || dv == 0 || dc < 2 {
        return Err(Error::InfeasibleParameters(format!("n={n}, dv={dv}, dc={dc}")));
    }
    if (n * dv) % dc != 0 {
        return Err(Error::InfeasibleParameters(format!("n·dv = {} is not divisible by dc = {dc}", n * dv)));
    }
    let m = n * dv / dc;
    if dc > n || dv > m {
        return Err(Error::InfeasibleParameters(format!("degrees ({dv}, {dc}) too large for n={n}, m={m}")));
    }

    let mut var: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, dv)).collect();
    var.shuffle(rng);
    let mut var_edges = vec![Vec::with_capacity(dv); n];
    for (e, &v) in var.iter().enumerate() {
        var_edges[v].push(e);
    }
    let mut g = Sockets { dc, var, var_edges };
    let edges = n * dv;
    let mut counts = vec![0usize; m];

    for _ in 0..SWAP_ROUNDS {
        let bad: Vec<usize> = (0..m).filter(|&c| g.cost(c, &mut counts) > 0).collect();
        if bad.is_empty() {
            break;
        }
        let mut improved = false;
        for c in bad {
            for slot in 0..dc {
                let e = c * dc + slot;
                let f = rng.random_range(0..edges);
                let cf = g.check_of(f);
                if cf == c {
                    continue;
                }
                let before = g.cost(c, &mut counts) + g.cost(cf, &mut counts);
                if before == 0 {
                    break;
                }
                g.swap(e, f);
                let after = g.cost(c, &mut counts) + g.cost(cf, &mut counts);
                if after < before {
                    improved = true;
                } else {
                    g.swap(e, f);
                }
            }
        }
        if !improved {
            break;
        }
    }

    // Repeated edges must go even if 4-cycles remain; keep swapping until they do.
    let mut guard = 0;
    loop {
        let doubled: Vec<usize> = (0..m).filter(|&c| g.cost(c, &mut counts) >= DOUBLE_EDGE_COST).collect();
        if doubled.is_empty() {
            break;
        }
        guard += 1;
        if guard > 10_000 {
            return Err(Error::InfeasibleParameters(format!("could not remove repeated edges for ({dv}, {dc}), n={n}")));
        }
        for c in doubled {
            let vars = g.check_vars(c).to_vec();
            let Some(slot) = (1..dc).find(|&i| vars[..i].contains(&vars[i])) else { continue };
            let e = c * dc + slot;
            let f = rng.random_range(0..edges);
            let cf = g.check_of(f);
            if cf != c && !g.check_vars(cf).contains(&vars[slot]) && !vars.contains(&g.var[f]) {
                g.swap(e, f);
            }
        }
    }

    let checks = (0..m).map(|c| g.check_vars(c).to_vec()).collect();
    CodeSpec::from_checks(n, checks)
}

/// Number of 4-cycles: pairs of checks sharing two variables, counted per shared pair.
pub fn four_cycles(code: &CodeSpec) -> usize {
    let mut total = 0;
    let mut counts = vec![0usize; code.m()];
    for (c, vars) in code.checks().iter().enumerate() {
        for &v in vars {
            for &o in &code.vars()[v] {
                if o > c {
                    counts[o] += 1;
                }
            }
        }
        for x in counts.iter_mut() {
            total += *x * x.saturating_sub(1) / 2;
            *x = 0;
        }
    }
    total
}
