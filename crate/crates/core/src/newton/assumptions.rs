//! Sampled checks of the hypotheses behind local convergence: a vanishing
//! linearization quotient at x̄, the residual-budget conditions, and
//! χ(H(x̄)) + ℓ + γ < inf_A sur G_A(x̄, 0).

use serde::{Deserialize, Serialize};

use super::{measure_noncompactness, Constraint, DerivativeOracle, GeProblem, InexactnessModel, MatrixSet};
use crate::certify::{CertificateReport, Violation};
use crate::error::{Error, Result};
use crate::moduli::{estimate_modulus, linear_moduli, LiminfSchedule, ModulusKind};
use crate::rng::{shell_points, uniform_in_ball, SplitMix64};
use crate::setmap::{Procedure, SetMap};
use crate::space::{GraphPoint, Matrix, NormKind, Settings, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionOptions {
    /// Shells for the linearization quotient and the sur estimates.
    pub schedule: LiminfSchedule,
    /// Points per shell for the linearization quotient.
    pub quotient_samples: usize,
    /// Largest admissible quotient on the innermost shell.
    pub quotient_tol: f64,
    /// Bound on sup_k dist(0, R_k(x, x̄)); any positive value works for the ball model.
    pub gamma: f64,
    pub seed: u64,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions {
            schedule: LiminfSchedule { r0: 0.1, rho: 0.5, shells: 8, samples_per_shell: 16, ..LiminfSchedule::default() },
            quotient_samples: 16,
            quotient_tol: 0.01,
            gamma: 1e-3,
            seed: 42,
        }
    }
}

/// G_A(x) = f(x̄) + A(x − x̄) + F(x).
fn partial_linearization(problem: &GeProblem, a: &Matrix, xbar: &Vector) -> Result<SetMap> {
    let (n, m) = problem.dims();
    let shift = problem.f.eval(xbar)? - a * xbar;
    match &problem.constraint {
        Constraint::NormalConeBox { lo, hi } => SetMap::affine_vi(a, &shift, lo, hi),
        _ => {
            let (a, xb) = (a.clone(), shift);
            let lin = SetMap::single(Procedure::new(n, m, "G_A", move |x: &Vector| &a * x + &xb));
            SetMap::sum(lin, problem.constraint_map().clone())
        }
    }
}

/// Samples each hypothesis at the known solution.
pub fn check_newton_assumptions(
    problem: &GeProblem,
    h: &DerivativeOracle,
    model: &InexactnessModel,
    opts: &AssumptionOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    model.validate()?;
    opts.schedule.validate()?;
    if !(opts.gamma > 0.0) {
        return Err(Error::InvalidInput("gamma must be positive".into()));
    }
    let xbar = problem
        .known_solution
        .clone()
        .ok_or_else(|| Error::InvalidInput("assumption checks need a known solution".into()))?;
    let residual = problem.residual(&xbar)?;
    if !(residual <= settings.tol_feas) {
        return Err(Error::NotOnGraph { residual });
    }
    let mut report = CertificateReport::new("newton_assumptions", opts.seed);
    let fbar = problem.f.eval(&xbar)?;

    // sup_{A ∈ H(x)} ‖f(x) − f(x̄) − A(x − x̄)‖ / ‖x − x̄‖ per shell.
    let sched = &opts.schedule;
    let mut last = 0.0;
    for j in 0..sched.shells {
        let (r_in, r_out) = sched.shell(j);
        let pts = shell_points(&xbar, r_in, r_out, opts.quotient_samples, NormKind::Euclidean, opts.seed ^ ((j as u64) << 8));
        let mut worst = 0.0f64;
        for x in &pts {
            let d = x - &xbar;
            let fx = problem.f.eval(x)?;
            for a in h.matrices(&problem.f, x)? {
                worst = worst.max((&fx - &fbar - &a * &d).norm() / d.norm());
            }
            report.premise_samples += 1;
        }
        report.estimates.insert(format!("linearization_quotient_shell{j}"), worst);
        last = worst;
    }
    report.estimates.insert("linearization_quotient_last".into(), last);
    if !(last <= opts.quotient_tol) {
        report
            .violations
            .push(Violation::new("linearization quotient on the innermost shell", last, opts.quotient_tol, false));
    }

    // Ball model: dist(0, R_k(x, x̄)) = 0 ≤ γ, and
    // R_k(x, u) ⊆ R_k(x, u′) + η‖u − u′‖B by the triangle inequality.
    let ell = model.eta();
    report.constants.insert("gamma".into(), opts.gamma);
    report.constants.insert("ell".into(), ell);
    let mut rng = SplitMix64::derive(opts.seed, 0x5E);
    for _ in 0..opts.quotient_samples {
        let x = uniform_in_ball(&xbar, sched.r0, NormKind::Euclidean, &mut rng);
        let u = uniform_in_ball(&xbar, sched.r0, NormKind::Euclidean, &mut rng);
        let up = uniform_in_ball(&xbar, sched.r0, NormKind::Euclidean, &mut rng);
        let lhs = model.radius(&x, &u);
        let rhs = model.radius(&x, &up) + ell * (&u - &up).norm();
        if lhs > rhs + settings.tol_strict * (1.0 + rhs) {
            report.violations.push(Violation::new("residual budget Lipschitz in u", lhs, rhs, false).input("x", &x).input("u", &u));
        }
        report.premise_samples += 1;
    }

    let hbar = h.matrices(&problem.f, &xbar)?;
    let chi = measure_noncompactness(&MatrixSet::Finite(hbar.clone()));
    report.constants.insert("chi".into(), chi);
    let mut inf_sur = f64::INFINITY;
    for (i, a) in hbar.iter().enumerate() {
        let sur = match problem.constraint {
            Constraint::Zero => linear_moduli(a).sur,
            _ => {
                let g = partial_linearization(problem, a, &xbar)?;
                let p = GraphPoint::new(xbar.clone(), Vector::zeros(problem.dims().1));
                estimate_modulus(ModulusKind::Sur, &g, &p, sched, opts.seed, settings)?.value
            }
        };
        report.estimates.insert(format!("sur_G_A{i}"), sur);
        inf_sur = inf_sur.min(sur);
    }
    let lhs = chi + ell + opts.gamma;
    report.estimates.insert("inf_sur_G_A".into(), inf_sur);
    report.estimates.insert("margin".into(), inf_sur - lhs);
    if !(lhs < inf_sur) {
        report.violations.push(Violation::new("chi + ell + gamma < inf sur G_A", lhs, inf_sur, true));
    }
    if matches!(problem.constraint, Constraint::Zero) {
        report.notes.push("sur G_A from the singular values of A".into());
    }
    Ok(report.finish())
}
