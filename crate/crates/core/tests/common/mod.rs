//! Exact transition matrices of the multiple-try kernel on a 5-point lattice,
//! computed by enumerating every trial and reference configuration.
#![allow(dead_code, clippy::needless_range_loop)]

use plateau_mcmc::mtm::{ProposalFamily, ReferenceSlot, WeightFunction};
use plateau_mcmc::targets::TargetDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const S: usize = 5;
pub const PI: [f64; S] = [0.1, 0.3, 0.25, 0.15, 0.2];

/// `T[j][x][y]` for each trial.
#[derive(Clone)]
pub struct Lattice {
    pub t: Vec<[[f64; S]; S]>,
    pub symmetric: bool,
}

impl Lattice {
    /// Circulant kernels on the 5-cycle: symmetric with unit row sums.
    pub fn symmetric() -> Self {
        let profiles = [[0.2, 0.3, 0.1], [0.0, 0.1, 0.4], [0.5, 0.05, 0.2]];
        let t = profiles
            .iter()
            .map(|p| {
                let mut m = [[0.0; S]; S];
                for (x, row) in m.iter_mut().enumerate() {
                    for (y, v) in row.iter_mut().enumerate() {
                        let d = (x as i64 - y as i64).rem_euclid(S as i64) as usize;
                        *v = p[d.min(S - d)];
                    }
                }
                m
            })
            .collect();
        Self { t, symmetric: true }
    }

    /// Random strictly positive stochastic matrices.
    pub fn asymmetric(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = (0..3)
            .map(|_| {
                let mut m = [[0.0; S]; S];
                for row in m.iter_mut() {
                    for v in row.iter_mut() {
                        *v = rng.random_range(0.05..1.0);
                    }
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                }
                m
            })
            .collect();
        Self { t, symmetric: false }
    }

    pub fn m(&self) -> usize {
        self.t.len()
    }
}

pub fn idx(v: f64) -> Option<usize> {
    let r = v.round();
    (r == v && (0.0..S as f64).contains(&r)).then_some(r as usize)
}

impl ProposalFamily for Lattice {
    fn trials(&self) -> usize {
        self.m()
    }

    fn ln_density(&self, _k: usize, j: usize, x: f64, y: f64) -> f64 {
        match (idx(x), idx(y)) {
            (Some(a), Some(b)) => self.t[j - 1][a][b].ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, _k: usize, j: usize, x: f64) -> f64 {
        let row = &self.t[j - 1][idx(x).unwrap()];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return y as f64;
            }
        }
        (S - 1) as f64
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// `lambda_j(x, y)` written out directly.
pub fn lambda(w: &WeightFunction, t: &[[f64; S]; S], x: usize, y: usize) -> f64 {
    match *w {
        WeightFunction::NormPower { alpha } => t[x][y] * (y as f64 - x as f64).abs().powf(alpha),
        WeightFunction::MeanInverse => 2.0 / (t[x][y] + t[y][x]),
        WeightFunction::ProductPower { beta } => (t[x][y] * t[y][x]).powf(-beta),
        WeightFunction::Unit => 1.0,
    }
}

/// Weight of trial `j` at `z` proposed from `x`: `pi(z) T_j(z, x) lambda_j(x, z)`.
pub fn weight(l: &Lattice, w: &WeightFunction, j: usize, x: usize, z: usize) -> f64 {
    PI[z] * l.t[j][z][x] * lambda(w, &l.t[j], x, z)
}

/// All tuples in `0..S` of the given length with their probabilities under
/// independent draws `idx -> rows[idx]`.
pub fn tuples(rows: &[&[f64; S]]) -> Vec<(Vec<usize>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for row in rows {
        out = out
            .into_iter()
            .flat_map(|(v, p)| {
                row.iter().enumerate().map(move |(y, q)| {
                    let mut v = v.clone();
                    v.push(y);
                    (v, p * q)
                })
            })
            .collect();
    }
    out
}

pub fn exact_kernel(l: &Lattice, w: &WeightFunction, slot: ReferenceSlot) -> [[f64; S]; S] {
    let m = l.m();
    let mut p = [[0.0; S]; S];
    for x in 0..S {
        let rows: Vec<&[f64; S]> = (0..m).map(|j| &l.t[j][x]).collect();
        for (z, pz) in tuples(&rows) {
            if pz == 0.0 {
                continue;
            }
            let ws: Vec<f64> = (0..m).map(|j| weight(l, w, j, x, z[j])).collect();
            let total: f64 = ws.iter().sum();
            if total <= 0.0 {
                p[x][x] += pz;
                continue;
            }
            for s in 0..m {
                if ws[s] <= 0.0 {
                    continue;
                }
                let ps = pz * ws[s] / total;
                let y = z[s];
                let fixed = slot.slot(s + 1, m) - 1;
                let others: Vec<usize> = (0..m).filter(|&j| j != fixed).collect();
                let rrows: Vec<&[f64; S]> = others.iter().map(|&j| &l.t[j][y]).collect();
                for (r, pr) in tuples(&rrows) {
                    if pr == 0.0 {
                        continue;
                    }
                    let mut den = weight(l, w, fixed, y, x);
                    for (i, &j) in others.iter().enumerate() {
                        den += weight(l, w, j, y, r[i]);
                    }
                    let a = if den <= 0.0 { 1.0 } else { (total / den).min(1.0) };
                    p[x][y] += ps * pr * a;
                    p[x][x] += ps * pr * (1.0 - a);
                }
            }
        }
    }
    p
}

pub fn stationarity_error(p: &[[f64; S]; S]) -> f64 {
    let z: f64 = PI.iter().sum();
    (0..S)
        .map(|j| ((0..S).map(|i| PI[i] * p[i][j]).sum::<f64>() - PI[j]).abs() / z)
        .fold(0.0, f64::max)
}

pub fn kinds() -> [WeightFunction; 5] {
    [
        WeightFunction::NormPower { alpha: 2.5 },
        WeightFunction::NormPower { alpha: 2.9 },
        WeightFunction::MeanInverse,
        WeightFunction::ProductPower { beta: 0.7 },
        WeightFunction::Unit,
    ]
}

pub fn lattice_target() -> TargetDistribution {
    TargetDistribution::custom("lattice", 1, |x: &[f64]| idx(x[0]).map_or(f64::NEG_INFINITY, |i| PI[i].ln())).unwrap()
}
