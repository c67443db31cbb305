use proptest::prelude::*;
use proptest::test_runner::RngSeed;

use semireg::corpus;
use semireg::newton::{
    check_newton_assumptions, detect_convergence_radius, rate_report, run_newton, solve_subproblem, AssumptionOptions,
    InexactnessModel, NewtonOptions, RadiusSearch,
};
use semireg::{Matrix, Settings, Vector};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x4E77), failure_persistence: None, ..ProptestConfig::default() }
}

fn ball(eta: f64) -> InexactnessModel {
    InexactnessModel::BallProportional { eta }
}

/// x̄ + s·(cos θ, sin θ) clipped into the unit box.
fn start_2d(s: f64, theta: f64) -> Vector {
    Vector::from_vec(vec![(0.5 + s * theta.cos()).clamp(0.0, 1.0), (s * theta.sin()).clamp(0.0, 1.0)])
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn accepted_iterates_pass_the_intersection_test(s in 0.01f64..0.4, theta in 0.0f64..std::f64::consts::TAU, eta in 0.0f64..0.5, seed in any::<u64>(), adversarial in any::<bool>()) {
        let (p, h) = corpus::smooth2d_parts().unwrap();
        let opts = NewtonOptions { adversarial, seed, ..NewtonOptions::default() };
        let tr = run_newton(&p, &h, &ball(eta), &start_2d(s, theta), &opts).unwrap();
        prop_assert_eq!(tr.replay(&p).unwrap(), None);
        for step in &tr.steps {
            prop_assert!(step.perturbation <= 0.9 * step.allowed + 1e-12);
        }
    }

    #[test]
    fn exact_smooth_runs_are_superlinear(x0 in 1.2f64..3.0, s in 0.05f64..0.4, theta in 0.0f64..std::f64::consts::TAU) {
        let opts = NewtonOptions::default();
        let (p, h) = corpus::quadratic_parts().unwrap();
        let tr = run_newton(&p, &h, &InexactnessModel::Zero, &Vector::from_element(1, x0), &opts).unwrap();
        prop_assert!(tr.converged() && rate_report(&tr, None).unwrap().superlinear);
        let (p, h) = corpus::smooth2d_parts().unwrap();
        let tr = run_newton(&p, &h, &InexactnessModel::Zero, &start_2d(s, theta), &opts).unwrap();
        prop_assert!(tr.converged());
        // Once the active set settles the steps are exact; short runs end on
        // the residual test before three ratios exist.
        if tr.iterations() >= 4 {
            prop_assert!(rate_report(&tr, None).unwrap().superlinear, "{:?}", tr.errors);
        }
    }

    #[test]
    fn box_subproblems_are_complementary(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, d in prop::array::uniform4(-2.0f64..2.0)) {
        let (p, _) = corpus::smooth2d_parts().unwrap();
        let xk = Vector::from_vec(vec![x1, x2]);
        let a = Matrix::from_row_slice(2, 2, &[2.0 + d[0].abs(), 0.3 * d[1], 0.3 * d[2], 1.5 + d[3].abs()]);
        let sol = solve_subproblem(&xk, &a, &p, &InexactnessModel::Zero, &NewtonOptions::default(), 0).unwrap();
        let w = p.f.eval(&xk).unwrap() + &a * (&sol.u - &xk);
        let pattern: Vec<char> = sol.pattern.unwrap().chars().collect();
        for i in 0..2 {
            let u = sol.u[i];
            match pattern[i] {
                'F' => prop_assert!(w[i].abs() <= 1e-10 && (0.0..=1.0).contains(&u)),
                'L' => prop_assert!(u == 0.0 && w[i] >= -1e-10),
                'U' => prop_assert!(u == 1.0 && w[i] <= 1e-10),
                other => prop_assert!(false, "pattern {other}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn more_inexactness_never_speeds_up(s in 0.05f64..0.3, theta in 0.0f64..std::f64::consts::TAU, seed in any::<u64>()) {
        let (p, h) = corpus::smooth2d_parts().unwrap();
        let opts = NewtonOptions { adversarial: true, seed, ..NewtonOptions::default() };
        let x0 = start_2d(s, theta);
        let t = |eta: f64| {
            let tr = run_newton(&p, &h, &ball(eta), &x0, &opts).unwrap();
            if tr.iterates.len() < 3 { 0.0 } else { rate_report(&tr, None).unwrap().t_hat }
        };
        let (t0, t1, t3) = (t(0.0), t(0.1), t(0.3));
        prop_assert!(t3 >= t1 - 1e-3 && t1 >= t0 - 1e-3, "t_hat: {t0} {t1} {t3}");
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn assumptions_with_margin_give_linear_rate(eta in 0.0f64..0.5, frac in 0.1f64..1.0, seed in any::<u64>()) {
        for (p, h) in [corpus::quadratic_parts().unwrap(), corpus::abs_newton_parts().unwrap()] {
            let rep = check_newton_assumptions(&p, &h, &ball(eta), &AssumptionOptions::default(), &Settings::default()).unwrap();
            if !(rep.passed() && rep.estimates["margin"] >= 0.1) {
                continue;
            }
            let opts = NewtonOptions { adversarial: true, seed, ..NewtonOptions::default() };
            let search = RadiusSearch { seed, ..RadiusSearch::default() };
            let r = detect_convergence_radius(&p, &h, &ball(eta), &opts, &search).unwrap().radius;
            prop_assert!(r > 0.0);
            let xbar = p.known_solution.clone().unwrap();
            for sign in [-1.0, 1.0] {
                let x0 = &xbar + Vector::from_element(1, sign * frac * r);
                let tr = run_newton(&p, &h, &ball(eta), &x0, &opts).unwrap();
                prop_assert!(tr.converged());
                if tr.iterates.len() >= 3 {
                    prop_assert!(rate_report(&tr, Some(&xbar)).unwrap().t_hat < 1.0);
                }
            }
        }
    }
}
