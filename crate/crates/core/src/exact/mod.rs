//! Globally optimal solvers for the two tractable special cases: one
//! far-field user ([`single`]) and one beam per far-field user ([`bb`]).

pub mod bb;
pub mod single;

pub use bb::{bb_solve, BbInstance, BbOptions, BbOutcome, Feasibility, Selection, SinrBox};
pub use single::{single_sinr_bisection, solve_single, solve_single_ff, SingleUserSolution};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoder::EffectiveChannels;
    use crate::rates::{evaluate, qos_powers};
    use crate::sca::{sca_loop, ScaOptions, ScaProblem};
    use crate::scheduler::Assignment;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, k: usize, noise: f64) -> (EffectiveChannels, ScaProblem) {
        let m = k + 1;
        let g: Vec<DVector<Complex64>> = (0..k)
            .map(|_| DVector::from_fn(m, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
            .collect();
        let eff = EffectiveChannels {
            nf_gain: (0..m).map(|_| 0.3 + rng.random::<f64>()).collect(),
            ff_gain: DMatrix::from_fn(m, k, |i, j| g[j][i].norm_sqr()),
            ff_effective: g,
        };
        let a = Assignment::from_sets((0..k).map(|u| vec![u]).collect(), m).unwrap();
        let qos = qos_powers(&eff, noise, 0.1, 1.0);
        let p = ScaProblem::new(&eff, &a, noise, 1.0, &qos).unwrap();
        (eff, p)
    }

    #[test]
    fn bb_matches_closed_form_for_one_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let (_, p) = random_problem(&mut rng, 1, 0.02);
            let exact = solve_single(&p).unwrap().rate;
            let bb = bb_solve(&p, &BbOptions::default()).unwrap();
            assert!(bb.converged);
            assert!(bb.rate <= exact + 1e-12 && exact - bb.rate <= 1e-3, "{} vs {exact}", bb.rate);
        }
    }

    #[test]
    fn bb_matches_grid_for_two_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..3 {
            let (eff, p) = random_problem(&mut rng, 2, 0.05);
            let inst = BbInstance::from_problem(&p).unwrap();
            let bb = bb_solve(&p, &BbOptions::default()).unwrap();
            let root = inst.initial_box();
            let n = 200;
            let mut grid: f64 = 0.0;
            for i in 0..=n {
                let x0 = root.x_max[0] * i as f64 / n as f64;
                // largest feasible x1 for this x0 is found by bisection on the monotone test
                let (mut lo, mut hi) = (0.0, root.x_max[1]);
                if !inst.check_feasible(&[x0, 0.0]).is_feasible() {
                    continue;
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if inst.check_feasible(&[x0, mid]).is_feasible() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                grid = grid.max((1.0 + x0).log2() + (1.0 + lo).log2());
            }
            let step = root.x_max[0] / n as f64 / std::f64::consts::LN_2;
            assert!(bb.rate >= grid - 1e-9 - 1e-3 && bb.rate <= grid + step + 1e-9, "{} vs {grid}", bb.rate);
            let r = evaluate(&bb.allocation, &eff, 0.05, 0.1);
            assert!(r.objective >= bb.rate - 1e-9);
            assert!(r.qos_ok.iter().all(|&ok| ok));
            bb.allocation.check(1.0).unwrap();
        }
    }

    #[test]
    fn bounds_sandwich_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (_, p) = random_problem(&mut rng, 2, 0.05);
        for selection in [Selection::MaxUpper, Selection::MinLower] {
            let out = bb_solve(&p, &BbOptions { selection, ..Default::default() }).unwrap();
            assert!(out.converged);
            for w in out.trace.windows(2) {
                assert!(w[1].0 <= w[0].0 + 1e-12 && w[1].1 >= w[0].1);
            }
            assert!(out.trace.iter().all(|(u, l)| u >= l));
            let last = out.trace.last().unwrap();
            assert!(last.1 <= out.rate + 1e-12);
        }
        let a = bb_solve(&p, &BbOptions::default()).unwrap();
        let b = bb_solve(&p, &BbOptions { selection: Selection::MinLower, ..Default::default() }).unwrap();
        assert!((a.rate - b.rate).abs() < 2e-3);
    }

    #[test]
    fn pruning_happens() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let (_, p) = random_problem(&mut rng, 2, 0.05);
        let out = bb_solve(&p, &BbOptions::default()).unwrap();
        assert!(out.pruned > 0);
    }

    #[test]
    fn box_cap_reports_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let (_, p) = random_problem(&mut rng, 2, 0.05);
        let out = bb_solve(&p, &BbOptions { epsilon: 1e-9, max_boxes: 50, ..Default::default() }).unwrap();
        assert!(!out.converged);
        assert!(out.gap > 0.0);
    }

    #[test]
    fn sca_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for k in [1, 2] {
            for _ in 0..5 {
                let (_, p) = random_problem(&mut rng, k, 0.03);
                let sca = sca_loop(&p, &ScaOptions::default()).unwrap();
                let best = *sca.trace.last().unwrap();
                let bb = bb_solve(&p, &BbOptions::default()).unwrap();
                // the upper bound at exit brackets the optimum
                assert!(best <= bb.rate + bb.gap + 1e-6, "{best} vs {}", bb.rate);
                if k == 1 {
                    assert!(best <= solve_single(&p).unwrap().rate + 1e-6);
                }
            }
        }
    }

    #[test]
    fn bb_rejects_multi_beam() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let (eff, _) = random_problem(&mut rng, 1, 0.03);
        let a = Assignment::from_sets(vec![vec![0, 1]], 2).unwrap();
        let qos = qos_powers(&eff, 0.03, 0.1, 1.0);
        let p = ScaProblem::new(&eff, &a, 0.03, 1.0, &qos).unwrap();
        assert!(matches!(bb_solve(&p, &BbOptions::default()), Err(crate::Error::MethodNotApplicable { .. })));
    }
}
