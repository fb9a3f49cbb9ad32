use super::*;
use crate::rates::{evaluate, qos_powers};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random effective channels with gains of realistic relative size.
fn random_eff(rng: &mut ChaCha8Rng, m: usize, k: usize) -> EffectiveChannels {
    let nf_gain: Vec<f64> = (0..m).map(|_| 0.5 + rng.random::<f64>()).collect();
    let ff_effective: Vec<DVector<Complex64>> = (0..k)
        .map(|_| DVector::from_fn(m, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect();
    let ff_gain = DMatrix::from_fn(m, k, |i, j| ff_effective[j][i].norm_sqr());
    EffectiveChannels {
        nf_gain,
        ff_gain,
        ff_effective,
    }
}

fn consecutive_sets(k: usize, dx: usize, m: usize) -> Assignment {
    Assignment::from_sets((0..k).map(|u| (u * dx..(u + 1) * dx).collect()).collect(), m).unwrap()
}

fn problem(eff: &EffectiveChannels, a: &Assignment, noise: f64, budget: f64) -> ScaProblem {
    let qos = qos_powers(eff, noise, 0.1, budget);
    ScaProblem::new(eff, a, noise, budget, &qos).unwrap()
}

#[test]
fn stacked_quadratic_matches_complex_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eff = random_eff(&mut rng, 6, 2);
    let a = consecutive_sets(2, 3, 6);
    let p = problem(&eff, &a, 0.01, 1.0);
    for _ in 0..50 {
        let fbar: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let f: Vec<Complex64> = (0..3).map(|j| c(fbar[j], fbar[3 + j])).collect();
        for k in 0..2 {
            let direct: Complex64 = a.beam_sets[1].iter().zip(&f).map(|(&m, fj)| p.gains[k][m].conj() * fj).sum();
            let q = p.stacked(k, 1).quadratic(&fbar);
            assert!((q - direct.norm_sqr()).abs() <= 1e-10 * direct.norm_sqr().max(1e-30));
        }
    }
}

#[test]
fn linearization_hand_example() {
    let g = StackedGains {
        real: vec![1.0, 0.0],
        imag: vec![0.0, 1.0],
    };
    let b = sinr_bound(&g, &[1.0, 0.0], 1.0).unwrap();
    assert_eq!(b.f_coef, vec![2.0, 0.0]);
    assert_eq!(b.x_coef, -1.0);
    assert!((b.eval(&[1.0, 0.0], 1.0) - 1.0).abs() < 1e-15);
    let v = b.eval(&[1.2, 0.0], 1.1);
    assert!((v - 1.3).abs() < 1e-12);
    assert!(v <= 1.44 / 1.1);
}

#[test]
fn linearization_anchor_reproduces_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eff = random_eff(&mut rng, 4, 1);
    let p = problem(&eff, &consecutive_sets(1, 4, 4), 0.05, 1.0);
    let s = p.stacked(0, 0);
    let f0: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let x0 = 0.7;
    let b = sinr_bound(&s, &f0, x0).unwrap();
    let want = s.quadratic(&f0) / x0;
    assert!((b.eval(&f0, x0) - want).abs() < 1e-12 * want);
}

#[test]
fn zero_sinr_expansion_is_degenerate() {
    let g = StackedGains {
        real: vec![1.0, 0.0],
        imag: vec![0.0, 1.0],
    };
    assert!(sinr_bound(&g, &[1.0, 0.0], 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinr_bound_never_exceeds_quadratic_over_linear(
        g in prop::collection::vec(-2.0f64..2.0, 6),
        f0 in prop::collection::vec(-1.0f64..1.0, 6),
        x0 in 0.01f64..10.0,
        f in prop::collection::vec(-3.0f64..3.0, 6),
        x in 1e-3f64..50.0,
    ) {
        let d = 3;
        let s = StackedGains {
            real: g.clone(),
            imag: (0..2 * d).map(|j| if j < d { -g[d + j] } else { g[j - d] }).collect(),
        };
        let b = sinr_bound(&s, &f0, x0).unwrap();
        let exact = s.quadratic(&f) / x;
        prop_assert!(b.eval(&f, x) <= exact + 1e-9 * (1.0 + exact.abs()));
    }

    #[test]
    fn power_bound_never_exceeds_power(
        a in -5.0f64..5.0, b in -5.0f64..5.0, u in -5.0f64..5.0, v in -5.0f64..5.0,
    ) {
        let bound = PowerBound { f0: c(a, b) };
        let f = c(u, v);
        prop_assert!(bound.eval(f) <= f.norm_sqr() + 1e-12);
    }
}

#[test]
fn doubled_gradient_power_bound_is_invalid() {
    // 4 Re{conj(f0)(f - f0)} over-estimates |f|^2 near f0 from above
    let f0 = c(1.0, 0.0);
    let f = c(1.2, 0.0);
    let four = f0.norm_sqr() + 4.0 * (f0.conj() * (f - f0)).re;
    assert!(four > f.norm_sqr());
    let two = PowerBound { f0 }.eval(f);
    assert!(two <= f.norm_sqr());
}

fn single_link(g: f64, h: f64, leak_gain: f64, noise: f64, budget: f64, rate: f64) -> (EffectiveChannels, Assignment, Vec<QosPower>) {
    let eff = EffectiveChannels {
        nf_gain: vec![h, 1.0],
        ff_gain: DMatrix::from_row_slice(2, 1, &[g, leak_gain]),
        ff_effective: vec![DVector::from_vec(vec![c(g.sqrt(), 0.0), c(leak_gain.sqrt(), 0.0)])],
    };
    let a = Assignment::from_sets(vec![vec![0]], 2).unwrap();
    let qos = eff.nf_gain.iter().map(|&hm| crate::rates::qos_power(hm, noise, rate, budget)).collect();
    (eff, a, qos)
}

#[test]
fn initial_point_single_link() {
    let (noise, budget, rate) = (0.1, 2.0, 0.5);
    let (g, h, leak) = (0.8, 3.0, 0.4);
    let (eff, a, qos) = single_link(g, h, leak, noise, budget, rate);
    let p = ScaProblem::new(&eff, &a, noise, budget, &qos).unwrap();
    let x0 = initial_point(&p).x[0];

    let ps = qos[0].power;
    let eta = noise + ps * g + qos[1].power * leak;
    let mu = (noise + ps * h) / h;
    let want = (g * (budget - ps) / eta).min((budget - ps) / mu);
    assert!((x0 - want).abs() < 1e-12 * want, "{x0} vs {want}");

    // greedy allocation at the initial point evaluates to the same objective
    let alloc = greedy_allocation(&p);
    alloc.check(budget).unwrap();
    let r = evaluate(&alloc, &eff, noise, rate);
    assert!((r.objective - (1.0 + want).log2()).abs() < 1e-12);
    assert!(r.qos_ok.iter().all(|&ok| ok));
}

#[test]
fn zero_residual_gives_zero_start() {
    // target needs exactly the whole budget
    let (noise, h) = (1.0, 1.0);
    let budget = 1.0;
    let (eff, a, _) = single_link(1.0, h, 0.0, noise, budget, 1.0);
    let qos = vec![QosPower { power: budget, feasible: true }, QosPower { power: 0.0, feasible: true }];
    let p = ScaProblem::new(&eff, &a, noise, budget, &qos).unwrap();
    let x0 = initial_point(&p);
    assert_eq!(x0.x[0], 0.0);
    assert_eq!(x0.objective(), 0.0);
    let out = sca_loop(&p, &ScaOptions::default()).unwrap();
    assert!(out.trace.iter().all(|&v| v == 0.0));
    assert!(out.allocation.ff_coeff.iter().all(|c| c.norm() == 0.0));
}

#[test]
fn qos_infeasible_beam_rejected() {
    let (eff, a, _) = single_link(1.0, 1.0, 0.0, 1.0, 1.0, 1.0);
    let qos = vec![QosPower { power: 1.0, feasible: false }, QosPower { power: 0.0, feasible: true }];
    assert!(matches!(ScaProblem::new(&eff, &a, 1.0, 1.0, &qos), Err(Error::QosInfeasible { beam: 0 })));
}

#[test]
fn symmetric_pair_has_equal_start() {
    let gs = [c(1.0, 0.0), c(0.3, 0.0)];
    let eff = EffectiveChannels {
        nf_gain: vec![2.0, 2.0],
        ff_gain: DMatrix::from_fn(2, 2, |m, k| if m == k { 1.0 } else { 0.09 }),
        ff_effective: vec![DVector::from_vec(vec![gs[0], gs[1]]), DVector::from_vec(vec![gs[1], gs[0]])],
    };
    let a = Assignment::from_sets(vec![vec![0], vec![1]], 2).unwrap();
    let p = problem(&eff, &a, 0.1, 1.0);
    let x = initial_point(&p).x;
    assert!((x[0] - x[1]).abs() < 1e-14);
    let out = sca_loop(&p, &ScaOptions::default()).unwrap();
    let r = evaluate(&out.allocation, &eff, 0.1, 0.1);
    assert!((r.user_rate[0] - r.user_rate[1]).abs() < 1e-4);
}

#[test]
fn subproblem_improves_on_expansion_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..10 {
        let eff = random_eff(&mut rng, 6, 3);
        let a = consecutive_sets(3, 2, 6);
        let p = problem(&eff, &a, 0.01 * (trial + 1) as f64, 1.0);
        let x0 = initial_point(&p);
        let lin = linearize(&p, &x0).unwrap();
        let sub = solve_subproblem(&p, &lin, &x0, &BarrierOptions::default()).unwrap();
        // duality gap of the barrier solve is below 1e-8 nats
        assert!(sub.objective >= x0.objective() - 1e-7, "{} < {}", sub.objective, x0.objective());
        assert!(p.violation(&sub.point) <= FEASIBILITY_TOL);
    }
}

#[test]
fn huge_interference_drives_sinr_to_zero() {
    let (eff, a, qos) = single_link(1.0, 1.0, 0.0, 1.0, 1.0, 0.1);
    let mut p = ScaProblem::new(&eff, &a, 1.0, 1.0, &qos).unwrap();
    p.users[0].eta = 1e12;
    let out = sca_loop(&p, &ScaOptions::default()).unwrap();
    assert!(out.point.x[0] < 1e-11);
}

/// Grid oracle for a single link: coefficient magnitude and SINR on a
/// 500 x 500 grid, phase aligned with the expansion point.
#[test]
fn single_link_subproblem_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let g = 0.2 + rng.random::<f64>();
        let h = 0.2 + rng.random::<f64>();
        let (eff, a, qos) = single_link(g, h, 0.1, 0.05, 1.0, 0.3);
        let p = ScaProblem::new(&eff, &a, 0.05, 1.0, &qos).unwrap();
        // expand at half power so the linearization is not anchored at the optimum
        let mut x0 = initial_point(&p);
        x0.fbar[0][0] *= 0.5f64.sqrt();
        x0.x = p.best_sinr(&x0.fbar);
        let lin = linearize(&p, &x0).unwrap();
        let sub = solve_subproblem(&p, &lin, &x0, &BarrierOptions::default()).unwrap();

        let user = &p.users[0];
        let bound = lin.sinr[0].as_ref().unwrap();
        let pb = lin.power[0][0];
        let phase = c(x0.fbar[0][0], x0.fbar[0][1]).arg();
        let amp_max = user.budget[0].sqrt();
        let x_hi = 2.0 * sub.point.x[0].max(x0.x[0]) + 1e-9;
        let n = 500;
        let mut best = 0.0f64;
        for i in 0..=n {
            let amp = amp_max * i as f64 / n as f64;
            let f = Complex64::from_polar(amp, phase);
            let fbar = [f.re, f.im];
            for j in 0..=n {
                let x = x_hi * j as f64 / n as f64;
                let ok = user.eta <= bound.eval(&fbar, x) && x * user.mu[0] <= pb.eval(f);
                if ok {
                    best = best.max(x);
                }
            }
        }
        let grid = (1.0 + best).log2();
        assert!(((sub.objective - grid) / grid).abs() < 1e-3, "{} vs {}", sub.objective, grid);
    }
}

#[test]
fn sca_loop_monotone_feasible_and_beats_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..8 {
        let k = 1 + trial % 3;
        let dx = 1 + trial % 2;
        let m = k * dx + 2;
        let eff = random_eff(&mut rng, m, k);
        let a = consecutive_sets(k, dx, m);
        let p = problem(&eff, &a, 0.02, 1.0);
        let out = sca_loop(&p, &ScaOptions::default()).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for it in &out.iterates {
            assert!(p.violation(it) <= FEASIBILITY_TOL);
        }
        let greedy = evaluate(&greedy_allocation(&p), &eff, 0.02, 0.1).objective;
        let fin = evaluate(&out.allocation, &eff, 0.02, 0.1);
        assert!(fin.objective >= greedy - 1e-12);
        assert!((fin.objective - out.trace.last().unwrap()).abs() < 1e-9);
        out.allocation.check(1.0).unwrap();
    }
}
