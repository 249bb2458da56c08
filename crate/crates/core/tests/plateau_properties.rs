use mcmc_oracles::integrate_pieces;
use plateau_mcmc::plateau::{CenterRule, PlateauParams};

fn quad_mass(p: &PlateauParams, j: usize, lo: f64, hi: f64) -> f64 {
    let f = |y: f64| p.trial_density(j, 0.0, y).unwrap();
    let mut br = vec![lo, hi];
    for m in 1..=p.trials {
        let off = if m == 1 { 0.0 } else { p.ring_offset(m) };
        for c in [-off, off] {
            for e in [c - p.upsilon, c + p.upsilon] {
                if e > lo && e < hi {
                    br.push(e);
                }
            }
        }
    }
    br.sort_by(f64::total_cmp);
    integrate_pieces(f, &br, 1e-12)
}

#[test]
fn closed_form_mass_matches_quadrature() {
    for centers in [CenterRule::Gapped, CenterRule::Contiguous] {
        for (u, s, v) in [(1.0, 0.05, 3.0), (0.25, 0.5, 0.5), (4.0, 0.5, 3.0)] {
            let p = PlateauParams::new(u, s, v, 5).unwrap().with_centers(centers);
            for j in 1..=5 {
                for (lo, hi) in [(-2.11, 2.11), (0.3, 7.5), (-40.0, -1.0)] {
                    let a = p.trial_mass(j, 0.0, lo, hi).unwrap();
                    let b = quad_mass(&p, j, lo, hi);
                    assert!((a - b).abs() < 1e-9, "{centers:?} {u} {s} {v} j={j}: {a} vs {b}");
                }
            }
        }
    }
}

/// Mass of trial `j` on the plateau support of trial `j + 1`.
fn mass_on_next_plateau(p: &PlateauParams, j: usize) -> f64 {
    let c = p.ring_offset(j + 1);
    let u = p.upsilon;
    quad_mass(p, j, c - u, c + u) + quad_mass(p, j, -c - u, -c + u)
}

#[test]
fn adjacent_rings_barely_overlap() {
    for centers in [CenterRule::Gapped, CenterRule::Contiguous] {
        let p = PlateauParams::new(1.0, 0.05, 3.0, 5).unwrap().with_centers(centers);
        for j in 2..5 {
            let m = mass_on_next_plateau(&p, j);
            assert!(m < 0.01, "{centers:?} j={j}: mass {m:.5} on the plateau of trial {}", j + 1);
        }
    }
}
