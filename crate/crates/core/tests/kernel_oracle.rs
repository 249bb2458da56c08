//! The multiple-try kernel checked against its enumerated transition matrix.

#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use plateau_mcmc::mtm::{
    acceptance_probability, ln_weight_from_parts, mtm_component_update, KernelConfig, MtmState, ProposalFamily,
    ReferenceSlot, WeightFunction, Workspace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rows_are_stochastic() {
    for w in kinds() {
        let p = exact_kernel(&Lattice::symmetric(), &w, ReferenceSlot::Selected);
        for row in p {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn stationary_for_every_weight_with_symmetric_proposals() {
    for w in kinds() {
        let p = exact_kernel(&Lattice::symmetric(), &w, ReferenceSlot::Selected);
        let e = stationarity_error(&p);
        assert!(e < 1e-10, "{w:?}: {e:e}");
    }
}

#[test]
fn stationary_with_asymmetric_proposals() {
    for seed in 0..5 {
        let l = Lattice::asymmetric(seed);
        for w in [WeightFunction::MeanInverse, WeightFunction::ProductPower { beta: 0.4 }, WeightFunction::Unit] {
            let e = stationarity_error(&exact_kernel(&l, &w, ReferenceSlot::Selected));
            assert!(e < 1e-10, "seed {seed} {w:?}: {e:e}");
        }
    }
}

#[test]
fn last_slot_reference_is_not_stationary_with_distinct_proposals() {
    let e = stationarity_error(&exact_kernel(
        &Lattice::symmetric(),
        &WeightFunction::NormPower { alpha: 2.5 },
        ReferenceSlot::Last,
    ));
    assert!(e > 1e-4, "{e:e}");
}

#[test]
fn library_weights_match_direct_formula() {
    for l in [Lattice::symmetric(), Lattice::asymmetric(9)] {
        for w in kinds() {
            for j in 0..l.m() {
                for x in 0..S {
                    for z in (0..S).filter(|&z| l.t[j][x][z] > 0.0) {
                        let lib = ln_weight_from_parts(&l, &w, 0, j + 1, x as f64, z as f64, PI[z].ln()).exp();
                        let direct = weight(&l, &w, j, x, z);
                        assert!((lib - direct).abs() <= 1e-12 * direct.max(1e-300), "{w:?} {j} {x} {z}");
                    }
                }
            }
        }
    }
}

/// The library's update reproduces the enumerated transition probabilities.
#[test]
fn library_update_matches_exact_kernel() {
    let target = lattice_target();
    let n = 200_000;
    for (l, w) in [
        (Lattice::symmetric(), WeightFunction::NormPower { alpha: 2.5 }),
        (Lattice::asymmetric(3), WeightFunction::ProductPower { beta: 0.4 }),
        (Lattice::asymmetric(4), WeightFunction::MeanInverse),
    ] {
        let cfg = KernelConfig {
            weight: w,
            ..Default::default()
        };
        let p = exact_kernel(&l, &w, ReferenceSlot::Selected);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut ws = Workspace::default();
        for x in 0..S {
            let mut counts = [0usize; S];
            for _ in 0..n {
                let mut st = MtmState::new(vec![x as f64], &target).unwrap();
                mtm_component_update(&mut rng, &mut st, 0, &l, &target, &cfg, &mut ws);
                counts[idx(st.x[0]).unwrap()] += 1;
            }
            for y in 0..S {
                let f = counts[y] as f64 / n as f64;
                let se = (p[x][y] * (1.0 - p[x][y]) / n as f64).sqrt().max(1e-9);
                assert!((f - p[x][y]).abs() < 4.5 * se, "{w:?} {x}->{y}: {f} vs {}", p[x][y]);
            }
        }
    }
}

/// A shifted Gaussian random walk: `y ~ N(x + 0.3, 0.8^2)`.
struct Drift;

impl ProposalFamily for Drift {
    fn trials(&self) -> usize {
        1
    }

    fn ln_density(&self, _k: usize, _j: usize, x: f64, y: f64) -> f64 {
        let z = (y - x - 0.3) / 0.8;
        -0.5 * z * z - (0.8 * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, _k: usize, _j: usize, x: f64) -> f64 {
        let n: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        x + 0.3 + 0.8 * n
    }
}

/// One trial with unit weights is Metropolis–Hastings.
#[test]
fn single_trial_reduces_to_metropolis_hastings() {
    let ln_pi = |x: f64| -0.5 * x * x / 2.0 - 0.1 * x.powi(4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = WeightFunction::Unit;
    let mut x = 0.0;
    for _ in 0..1000 {
        let y = Drift.sample(&mut rng, 0, 1, x);
        let num = ln_weight_from_parts(&Drift, &w, 0, 1, x, y, ln_pi(y));
        let den = ln_weight_from_parts(&Drift, &w, 0, 1, y, x, ln_pi(x));
        let a = acceptance_probability(&[num], &[den]);
        let mh = (ln_pi(y) + Drift.ln_density(0, 1, y, x) - ln_pi(x) - Drift.ln_density(0, 1, x, y))
            .exp()
            .min(1.0);
        assert!((a - mh).abs() <= 1e-12 * mh.max(1e-300), "{a} {mh}");
        if rng.random::<f64>() < a {
            x = y;
        }
    }
}
