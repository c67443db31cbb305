use semireg::certify::{check_descent_certificate, CertifyOptions, DescentConstants, DescentForm, DescentOracle, Direction, FormTag};
use semireg::corpus::{self, Example};
use semireg::moduli::{estimate_modulus, LiminfSchedule, ModulusKind};
use semireg::newton::{run_newton, InexactnessModel, NewtonOptions};
use semireg::{GraphPoint, SetMap, Settings, Vector};

fn two_branch() -> (SetMap, GraphPoint) {
    match corpus::load_example("two_branch", 0).unwrap().example {
        Example::Map { map, point } => (map, point),
        _ => unreachable!(),
    }
}

fn twice<T: serde::Serialize>(run: impl Fn() -> T) -> (String, String) {
    (serde_json::to_string(&run()).unwrap(), serde_json::to_string(&run()).unwrap())
}

#[test]
fn estimates_repeat_byte_for_byte() {
    let (f, p) = two_branch();
    for kind in [ModulusKind::Lopen, ModulusKind::Sur, ModulusKind::Calm] {
        let (a, b) = twice(|| estimate_modulus(kind, &f, &p, &LiminfSchedule::default(), 11, &Settings::default()).unwrap());
        assert_eq!(a, b);
    }
    let (a, _) = twice(|| estimate_modulus(ModulusKind::Lopen, &f, &p, &LiminfSchedule::default(), 11, &Settings::default()).unwrap());
    let c = serde_json::to_string(&estimate_modulus(ModulusKind::Lopen, &f, &p, &LiminfSchedule::default(), 12, &Settings::default()).unwrap()).unwrap();
    assert_ne!(a, c, "the seed is recorded in the estimate");
}

#[test]
fn certificates_repeat_byte_for_byte() {
    let (f, p) = two_branch();
    let form = DescentForm::new(FormTag::SemiregSet, Direction::Sufficient);
    let k = DescentConstants::new(1.5, 0.5).with_alpha(0.5);
    let opts = CertifyOptions { seed: 5, ..CertifyOptions::default() };
    let (a, b) = twice(|| check_descent_certificate(&form, &f, &p, &k, &DescentOracle::diagonal(), &opts, &Settings::default()).unwrap());
    assert_eq!(a, b);
}

#[test]
fn adversarial_traces_repeat() {
    let (p, h) = corpus::smooth2d_parts().unwrap();
    let opts = NewtonOptions { adversarial: true, seed: 3, ..NewtonOptions::default() };
    let x0 = Vector::from_vec(vec![0.8, 0.3]);
    let run = || run_newton(&p, &h, &InexactnessModel::BallProportional { eta: 0.3 }, &x0, &opts).unwrap();
    assert_eq!(run().to_csv(), run().to_csv());
    let (a, b) = twice(run);
    assert_eq!(a, b);
}
