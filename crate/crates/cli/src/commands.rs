//! The single-check commands: moduli, certify, cover and solve.

use serde::Serialize;
use serde_json::{json, Value};

use semireg::certify::{check_descent_certificate, Verdict as CertVerdict};
use semireg::covering::{build_selection, covering_check_kaluza, rosl_check, CoveringReport};
use semireg::moduli::{convention_product, estimate_modulus, ModulusKind};
use semireg::newton::{rate_report, run_newton};
use semireg::{Error, Settings, Vector};

use crate::config::{
    self, CertifySection, ConfigResult, CoverSection, MapRef, ModuliSection, ProblemRef, SolveSection,
};
use crate::report::{Attachment, Report, Verdict};

/// A report with the files written next to it.
pub type Output = (Report, Vec<Attachment>);

fn bare(r: Report) -> Output {
    (r, Vec::new())
}

/// Serde name of a unit enum variant, for check names.
pub fn tag(v: impl Serialize) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        _ => "unnamed".into(),
    }
}

fn map_label(m: &MapRef) -> String {
    match m {
        MapRef::Corpus(name) => name.clone(),
        MapRef::Inline(_) => "inline".into(),
    }
}

fn inputs(section: impl Serialize, settings: &Settings) -> Value {
    json!({ "section": section, "settings": settings })
}

const RECIPROCAL_PAIRS: [(ModulusKind, ModulusKind); 3] =
    [(ModulusKind::Lopen, ModulusKind::Semireg), (ModulusKind::Sur, ModulusKind::Reg), (ModulusKind::Psopen, ModulusKind::Subreg)];

/// Each product of reciprocal moduli (with 0·∞ = 1) lies in this band.
const PRODUCT_BAND: (f64, f64) = (0.98, 1.02);

pub fn moduli(sec: &ModuliSection, seed: u64, settings: &Settings) -> ConfigResult<Vec<Output>> {
    let (f, point) = config::resolve_map(&sec.map, sec.point.as_ref(), seed)?;
    let label = map_label(&sec.map);
    let ins = inputs(sec, settings);
    let mut out = Vec::new();
    let mut found = Vec::new();
    for &kind in &sec.kinds {
        let est = estimate_modulus(kind, &f, &point, &sec.schedule, seed, settings)?;
        let name = tag(kind);
        found.push((kind, est.value));
        out.push(bare(
            Report::new(format!("moduli_{label}_{name}"), ins.clone(), seed, Verdict::Info)
                .value(&name, est.value)
                .bracket(&name, est.bracket)
                .details(&est),
        ));
    }
    let get = |k: ModulusKind| found.iter().find(|(kind, _)| *kind == k).map(|&(_, v)| v);
    for (a, b) in RECIPROCAL_PAIRS {
        let (Some(u), Some(v)) = (get(a), get(b)) else { continue };
        let prod = convention_product(u, v);
        let (lo, hi) = PRODUCT_BAND;
        let (verdict, note) = if prod.is_finite() {
            (Verdict::from_bool((lo..=hi).contains(&prod)), format!("product must lie in [{lo}, {hi}]"))
        } else {
            (Verdict::Vacuous, "product of two infinite or undefined estimates".into())
        };
        let (na, nb) = (tag(a), tag(b));
        out.push(bare(
            Report::new(format!("moduli_{label}_{na}_x_{nb}"), ins.clone(), seed, verdict)
                .value(&na, u)
                .value(&nb, v)
                .value("product", prod)
                .note(note),
        ));
    }
    Ok(out)
}

pub fn certify(sec: &CertifySection, seed: u64, settings: &Settings) -> ConfigResult<Vec<Output>> {
    let (f, point) = config::resolve_map(&sec.map, sec.point.as_ref(), seed)?;
    let oracle = config::resolve_oracle(&sec.oracle, &f, &point, settings);
    let opts = semireg::certify::CertifyOptions { seed, ..sec.options };
    let rep = check_descent_certificate(&sec.form, &f, &point, &sec.constants, &oracle, &opts, settings)?;
    let verdict = match rep.verdict {
        CertVerdict::Pass => Verdict::Pass,
        CertVerdict::Fail => Verdict::Fail,
        CertVerdict::Vacuous => Verdict::Vacuous,
    };
    let check = format!("certify_{}_{}_{}", map_label(&sec.map), tag(sec.form.tag), tag(sec.form.direction));
    let mut r = Report::new(check, inputs(sec, settings), seed, verdict)
        .value("premise_samples", rep.premise_samples as f64)
        .value("violations", rep.violations.len() as f64);
    for (k, v) in rep.constants.iter().chain(&rep.estimates) {
        r = r.value(k, *v);
    }
    r = r.witnesses(&rep.violations);
    if let Some(c) = &rep.conclusion_check {
        r = r.value("conclusion_passed", f64::from(u8::from(c.passed))).witnesses(&c.witnesses);
    }
    for n in &rep.notes {
        r = r.note(n.clone());
    }
    Ok(vec![bare(r.details(&rep))])
}

fn covering_report(check: String, ins: Value, seed: u64, rep: &CoveringReport) -> Report {
    let mut r = Report::new(check, ins, seed, Verdict::from_bool(rep.passed))
        .value("attained", rep.attained.len() as f64)
        .value("unattained", rep.unattained.len() as f64)
        .value("condition_samples", rep.condition_samples as f64)
        .value("condition_violations", rep.condition_violations.len() as f64)
        .value("picard_rate", rep.picard_rate());
    for (k, v) in &rep.constants {
        r = r.value(k, *v);
    }
    r.witnesses(&rep.unattained).witnesses(&rep.condition_violations).details(rep)
}

pub fn cover(sec: &CoverSection, seed: u64, settings: &Settings) -> ConfigResult<Vec<Output>> {
    let ins = inputs(sec, settings);
    let report = match sec {
        CoverSection::Kaluza { map, a, xbar, input } => {
            let (f, _) = config::resolve_map(map, Some(&config::PointSpec { x: xbar.clone(), y: None }), seed)?;
            let a = config::matrix(a)?;
            let input = config::kaluza_input(input, seed)?;
            let check = format!("cover_kaluza_{}", map_label(map));
            match covering_check_kaluza(&f, &a, &Vector::from_vec(xbar.clone()), &input, settings) {
                Ok(rep) => covering_report(check, ins, seed, &rep),
                // The theorem does not apply; report that rather than abort.
                Err(Error::CoveringPrecondition { c, sur, calm }) => Report::new(check, ins, seed, Verdict::Fail)
                    .value("c", c)
                    .value("sur_a", sur)
                    .value("calm", calm)
                    .note("precondition c < sur A - calm(f - A) fails"),
                Err(e) => return Err(e.into()),
            }
        }
        CoverSection::Rosl { map, point, input } => {
            let (f, p) = config::resolve_map(map, point.as_ref(), seed)?;
            let input = config::rosl_input(input, seed)?;
            let rep = rosl_check(&f, &p, &input, settings)?;
            covering_report(format!("cover_rosl_{}", map_label(map)), ins, seed, &rep)
        }
        CoverSection::Selection { map, a, xbar, input } => {
            let (f, _) = config::resolve_map(map, Some(&config::PointSpec { x: xbar.clone(), y: None }), seed)?;
            let a = config::matrix(a)?;
            let input = config::selection_input(input, seed)?;
            let tr = build_selection(&f, &a, &Vector::from_vec(xbar.clone()), &input, settings)?;
            Report::new(format!("cover_selection_{}", map_label(map)), ins, seed, Verdict::from_bool(tr.within_bounds))
                .value("max_ratio", tr.max_ratio)
                .value("bound_ratio", tr.bound_ratio)
                .value("max_corrected_ratio", tr.max_corrected_ratio)
                .value("bound_corrected", tr.bound_corrected)
                .value("sur_a", tr.sur_a)
                .value("calm", tr.calm)
                .value("failures", tr.failures as f64)
                .details(&tr)
        }
    };
    Ok(vec![bare(report)])
}

pub fn solve(sec: &SolveSection, seed: u64, settings: &Settings) -> ConfigResult<Vec<Output>> {
    let rp = config::resolve_problem(sec, seed, settings)?;
    let label = match &sec.problem {
        ProblemRef::Corpus(name) => name.clone(),
        ProblemRef::Inline(p) => p.name.clone(),
    };
    let opts = semireg::newton::NewtonOptions { seed, ..sec.options.clone() };
    let ins = inputs(sec, settings);
    let xbar = rp.problem.known_solution.as_ref();
    let mut out = Vec::new();
    for (i, x0) in rp.starts.iter().enumerate() {
        let tr = run_newton(&rp.problem, &rp.derivative, &sec.model, x0, &opts)?;
        let bad_step = tr.replay(&rp.problem)?;
        let check = format!("solve_{label}_{i}");
        let mut r = Report::new(&check, ins.clone(), seed, Verdict::from_bool(tr.converged() && bad_step.is_none()))
            .value("iterations", tr.iterations() as f64)
            .value("final_residual", tr.residuals.last().copied().unwrap_or(f64::NAN));
        if let (Some(xb), Some(x)) = (xbar, tr.iterates.last()) {
            r = r.value("final_error", (x - xb).norm());
        }
        if tr.iterates.len() >= 3 {
            let rate = rate_report(&tr, xbar)?;
            r = r.value("t_hat", rate.t_hat).value("superlinear", f64::from(u8::from(rate.superlinear)));
        }
        if let Some(k) = bad_step {
            r = r.note(format!("step {k} fails the inclusion test on replay"));
        }
        if !tr.converged() {
            r = r.note("did not converge");
        }
        let csv = Attachment { name: format!("{check}.csv"), contents: tr.to_csv() };
        out.push((r.details(&tr), vec![csv]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn run(json: &str) -> Vec<Output> {
        let cfg = ExperimentConfig::from_json(json).unwrap();
        let s = cfg.effective_settings();
        match cfg.command {
            config::Command::Moduli => moduli(cfg.moduli.as_ref().unwrap(), cfg.seed, &s),
            config::Command::Cover => cover(cfg.cover.as_ref().unwrap(), cfg.seed, &s),
            config::Command::Solve => solve(cfg.solve.as_ref().unwrap(), cfg.seed, &s),
            config::Command::Certify => certify(cfg.certify.as_ref().unwrap(), cfg.seed, &s),
            config::Command::Suite => unreachable!(),
        }
        .unwrap()
    }

    #[test]
    fn two_branch_product_identity_passes() {
        let outs = run(r#"{"command": "moduli", "moduli": {"map": "two_branch", "kinds": ["lopen", "semireg"]}}"#);
        assert_eq!(outs.len(), 3);
        assert_eq!(outs[2].0.check, "moduli_two_branch_lopen_x_semireg");
        assert_eq!(outs[2].0.verdict, Verdict::Pass);
    }

    #[test]
    fn kaluza_precondition_becomes_a_failed_report() {
        // f = 2x near A = 1: sur A − calm(f − A) = 0 < c.
        let outs = run(
            r#"{"command": "cover", "cover": {"check": "kaluza", "map": {"kind": "linear", "matrix": [[2]]},
                "a": [[1]], "xbar": [0], "input": {"c": 0.5, "r": 0.1, "samples": 4, "seed": 0}}}"#,
        );
        assert_eq!(outs[0].0.verdict, Verdict::Fail);
        assert!(outs[0].0.values.contains_key("sur_a"));
    }

    #[test]
    fn abs_newton_takes_one_step() {
        let outs = run(r#"{"command": "solve", "solve": {"problem": "abs_newton"}}"#);
        assert_eq!(outs.len(), 4);
        for (r, files) in &outs {
            assert_eq!(r.verdict, Verdict::Pass);
            assert_eq!(r.values["iterations"], json!(1.0));
            assert_eq!(files[0].contents.lines().count(), 3, "header plus two iterates");
        }
    }

    #[test]
    fn inline_problem_with_finite_differences() {
        let outs = run(
            r#"{"command": "solve", "solve": {"problem": {"f": {"kind": "single_valued", "dim": 1, "exprs": ["x^3 - 8"]},
                "solution": [2]}, "x0": [[3]]}}"#,
        );
        assert_eq!(outs[0].0.verdict, Verdict::Pass);
        assert_eq!(outs[0].0.check, "solve_inline_0");
    }
}
