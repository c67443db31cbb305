use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand_distr::{Distribution, StandardNormal};

use semireg::certify::{
    check_descent_certificate, replay_witness, verify_sum_semiregularity, CertificateReport, CertifyOptions,
    DescentConstants, DescentForm, DescentOracle, Direction, FormTag,
};
use semireg::corpus::{self, Example};
use semireg::linalg;
use semireg::moduli::{linear_moduli, LiminfSchedule};
use semireg::rng::SplitMix64;
use semireg::{GraphPoint, Matrix, SetMap, Settings, Vector};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0xCE57), failure_persistence: None, ..ProptestConfig::default() }
}

fn two_branch() -> (SetMap, GraphPoint) {
    match corpus::load_example("two_branch", 0).unwrap().example {
        Example::Map { map, point } => (map, point),
        _ => unreachable!(),
    }
}

fn opts(seed: u64) -> CertifyOptions {
    CertifyOptions { seed, ..CertifyOptions::default() }
}

fn invertible(seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    loop {
        let a = Matrix::from_fn(2, 2, |_, _| StandardNormal.sample(&mut rng));
        let s = linalg::singular_values(&a);
        if s[1] > 0.1 * s[0] {
            return a;
        }
    }
}

/// x′ = x + A⁺(y − Ax), v′ = y: the nearest exact preimage step.
fn projection_oracle(a: &Matrix) -> DescentOracle {
    let pinv = a.clone().pseudo_inverse(1e-12).unwrap();
    let a = a.clone();
    DescentOracle::new("projection", move |q| Some((&q.x + &pinv * (&q.y - &a * &q.x), q.y.clone())))
}

fn witnesses(rep: &CertificateReport) -> Vec<&semireg::certify::Violation> {
    let mut all: Vec<_> = rep.violations.iter().collect();
    if let Some(c) = &rep.conclusion_check {
        all.extend(c.witnesses.iter());
    }
    all
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn sufficient_pass_implies_covering(c in 0.3f64..1.4, alpha in 0.1f64..0.7, r in 0.1f64..1.0, seed in any::<u64>(), identity in any::<bool>()) {
        prop_assume!(alpha * c < 1.0);
        let (f, p) = if identity { (SetMap::identity(1), GraphPoint::scalar(0.0, 0.0)) } else { two_branch() };
        let form = DescentForm::new(FormTag::SemiregSet, Direction::Sufficient);
        let k = DescentConstants::new(c, r).with_alpha(alpha);
        let rep = check_descent_certificate(&form, &f, &p, &k, &DescentOracle::diagonal(), &opts(seed), &Settings::default()).unwrap();
        let conclusion = rep.conclusion_check.as_ref().unwrap();
        if rep.violations.is_empty() && rep.premise_samples >= 5 {
            prop_assert!(conclusion.passed, "c = {c}: {:?}", conclusion.witnesses.first());
            prop_assert!(rep.passed());
        }
    }

    #[test]
    fn necessary_direction_on_linear_maps(seed in any::<u64>(), tag_single in any::<bool>()) {
        let a = invertible(seed);
        let c = linear_moduli(&a).sur;
        let f = SetMap::linear(a.clone());
        let p = GraphPoint::new(Vector::zeros(2), Vector::zeros(2));
        let (tag, k) = if tag_single {
            (FormTag::SemiregSingle, DescentConstants::new(c, 0.5))
        } else {
            (FormTag::SemiregSet, DescentConstants::new(c, 0.5).with_alpha(0.5 / c))
        };
        let form = DescentForm::new(tag, Direction::Necessary);
        let rep = check_descent_certificate(&form, &f, &p, &k, &projection_oracle(&a), &opts(seed), &Settings::default()).unwrap();
        prop_assert_eq!(rep.constants["c_eff"], 0.9 * c);
        prop_assert!(rep.violations.is_empty(), "{:?}", rep.violations.first());
        prop_assert!(rep.premise_samples >= 5);
    }

    #[test]
    fn witnesses_replay_as_failures(c in 1.2f64..1.9, seed in any::<u64>(), lazy in any::<bool>()) {
        // Rates above the true openness 1 of F(x) = {x, 0}, or an oracle
        // that never moves, must fail; each witness must reproduce.
        let (f, p) = two_branch();
        let form = DescentForm::new(FormTag::SemiregSet, Direction::Sufficient);
        let k = DescentConstants::new(c, 0.5).with_alpha(0.5);
        let oracle = if lazy { DescentOracle::new("stay", |q| Some((q.x.clone(), q.v.clone()))) } else { DescentOracle::diagonal() };
        let s = Settings::default();
        let rep = check_descent_certificate(&form, &f, &p, &k, &oracle, &opts(seed), &s).unwrap();
        prop_assert!(!rep.passed());
        let all = witnesses(&rep);
        prop_assert!(!all.is_empty());
        for w in all.into_iter().take(64) {
            prop_assert!(replay_witness(&rep, w, &f, &s).unwrap(), "{w:?}");
        }
    }
}

proptest! {
    #![proptest_config(config(4))]

    #[test]
    fn sum_semiregularity_separates_openness_from_surjection(seed in any::<u64>()) {
        let Example::Sum { f, g, x, y, z } = corpus::load_example("sum_remark", seed).unwrap().example else { unreachable!() };
        let rep = verify_sum_semiregularity(&f, &g, &x, &y, &z, &LiminfSchedule::default(), &opts(seed), &Settings::default()).unwrap();
        prop_assert!(rep.estimates["lopen_f_plus_g"] >= 0.9);
        prop_assert!(rep.estimates["sur_f_plus_g"] <= 0.1);
    }
}
