//! Linearization, eigenvalues of small dense matrices, and equilibrium classification.
//!
//! Eigenvalues come from the characteristic polynomial (Faddeev–LeVerrier on
//! the norm-scaled matrix), whose roots are found simultaneously with the
//! Aberth–Ehrlich iteration and then polished by Newton steps. Matrices here
//! never exceed 6×6, so the conditioning loss of the polynomial route is
//! irrelevant next to the classification margin.

use num_complex::Complex64;

use crate::equilibria::{Equilibrium, EquilibriumFlag, EquilibriumLabel, Stability};
use crate::error::{Error, Result};
use crate::linalg::{SmallMatrix, StateVec, MAX_MATRIX};
use crate::model::Model;
use crate::params::{SitParams, WolParams};

/// Relative margin (× ‖J‖∞) separating stable/unstable from undetermined.
pub const CLASSIFY_MARGIN: f64 = 1e-9;

/// Central-difference Jacobian of `f` at `x`, step 1e-6·max(1, |x_i|).
pub fn finite_difference_jacobian<F>(f: F, x: &StateVec) -> SmallMatrix
where
    F: Fn(&StateVec) -> StateVec,
{
    let n = x.dim();
    let mut jac = SmallMatrix::zeros(n);
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut plus = *x;
        let mut minus = *x;
        plus[j] += h;
        minus[j] -= h;
        let fp = f(&plus);
        let fm = f(&minus);
        for i in 0..n {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    jac
}

/// Finite-difference Jacobian of a model's uncontrolled right-hand side.
///
/// Refuses states where the fertility ratio is singular.
pub fn jacobian(model: &Model, state: &StateVec) -> Result<SmallMatrix> {
    if state.dim() != model.dim() || !state.is_finite() {
        return Err(Error::InvalidState(format!("cannot linearize at {state}")));
    }
    if model.ratio_denominator(state) < 1e-12 * model.capacity() {
        return Err(Error::SingularPoint(state.to_string()));
    }
    Ok(finite_difference_jacobian(|x| model.rhs(x, 0.0), state))
}

/// Linearization at the origin of the comparison system in which sterile
/// males are dominated (γ Ms < ε M): rows
/// (−(τ_E+δ_E), β_E/(1+ε), 0), (νβ_F, −δ_F, 0), ((1−ν)β_F, 0, −δ_M), δ_M = δ_F.
pub fn comparison_jacobian(p: &SitParams, epsilon: f64) -> Result<SmallMatrix> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must be finite and >= 0",
        });
    }
    SmallMatrix::from_rows(&[
        &[-(p.tau_e + p.delta_e), p.beta_e / (1.0 + epsilon), 0.0],
        &[p.nu * p.beta_f, -p.delta_f, 0.0],
        &[(1.0 - p.nu) * p.beta_f, 0.0, -p.delta_f],
    ])
}

/// Linearization of the Wolbachia system at the origin restricted to its two
/// invariant subspaces (uninfected-only and infected-only), as a block-diagonal matrix.
///
/// The full right-hand side is not differentiable at the origin; an
/// unstable direction inside an invariant subspace is unstable for the full flow.
pub fn wolbachia_origin_surrogate(p: &WolParams) -> SmallMatrix {
    let a = p.tau_e + p.delta_e;
    let mut m = SmallMatrix::zeros(4);
    m.set(0, 0, -a);
    m.set(0, 1, p.beta_e);
    m.set(1, 0, p.nu * p.beta_f);
    m.set(1, 1, -p.delta_f);
    m.set(2, 2, -a);
    m.set(2, 3, p.eta * p.beta_e);
    m.set(3, 2, p.nu * p.beta_f);
    m.set(3, 3, -p.delta * p.delta_f);
    m
}

/// Coefficients `[1, c1, …, cn]` of det(λI − m), highest degree first.
pub fn characteristic_polynomial(m: &SmallMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut coeffs = vec![1.0];
    let mut mk = SmallMatrix::zeros(n);
    let ident = SmallMatrix::identity(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = m.mul(&mk);
        let c_prev = coeffs[k - 1];
        for i in 0..n {
            next.set(i, i, next.get(i, i) + c_prev * ident.get(i, i));
        }
        let c = -m.mul(&next).trace() / k as f64;
        coeffs.push(c);
        mk = next;
    }
    coeffs
}

/// Horner evaluation returning (p(z), p'(z)).
fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn eval_polynomial(coeffs: &[f64], z: Complex64) -> Complex64 {
    horner(coeffs, z).0
}

fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![Complex64::new(-coeffs[1], 0.0)]);
    }
    let radius = (1..=n)
        .map(|k| coeffs[k].abs().powf(1.0 / k as f64))
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();
    let mut converged = false;
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let (p, dp) = horner(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    // Newton polish; keep a step only if it reduces |p|
    for zi in z.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = horner(coeffs, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *zi - p / dp;
            if cand.is_finite() && eval_polynomial(coeffs, cand).norm() < p.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    let worst = z
        .iter()
        .map(|zi| eval_polynomial(coeffs, *zi).norm())
        .fold(0.0, f64::max);
    if !converged && worst > 1e-10 {
        return Err(Error::NumericalFailure(format!(
            "root iteration did not converge (residual {worst:.3e})"
        )));
    }
    Ok(z)
}

/// All eigenvalues of `m`, sorted by descending real part (then imaginary part).
pub fn eigenvalues(m: &SmallMatrix) -> Result<Vec<Complex64>> {
    if m.dim() > MAX_MATRIX || !m.is_finite() {
        return Err(Error::NumericalFailure(
            "matrix must be finite and at most 6x6".into(),
        ));
    }
    let scale = m.norm_inf();
    if scale == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); m.dim()]);
    }
    let mut scaled = *m;
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            scaled.set(i, j, m.get(i, j) / scale);
        }
    }
    let coeffs = characteristic_polynomial(&scaled);
    let roots = polynomial_roots(&coeffs)?;
    let mut out: Vec<Complex64> = roots
        .into_iter()
        .map(|r| {
            // snap numerically real roots; the polynomial has real coefficients
            let snapped = Complex64::new(r.re, 0.0);
            if r.im.abs() <= 1e-7 * r.norm().max(1e-3)
                && eval_polynomial(&coeffs, snapped).norm() <= 1e-10
            {
                snapped * scale
            } else {
                r * scale
            }
        })
        .collect();
    for r in &out {
        let res = eval_polynomial(&coeffs, r / scale).norm();
        if res >= 1e-8 {
            return Err(Error::NumericalFailure(format!(
                "eigenvalue {r} has characteristic residual {res:.3e}"
            )));
        }
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// Stability of a linearization: stable iff every real part < −margin·‖m‖∞,
/// unstable iff some real part > +margin·‖m‖∞.
pub fn stability_of(m: &SmallMatrix, eigs: &[Complex64]) -> Stability {
    let margin = CLASSIFY_MARGIN * m.norm_inf();
    if eigs.iter().any(|l| l.re > margin) {
        Stability::Unstable
    } else if eigs.iter().all(|l| l.re < -margin) {
        Stability::Stable
    } else {
        Stability::Undetermined
    }
}

/// Linearization used to classify `eq`, or `None` if it cannot be trusted.
pub fn linearization(eq: &Equilibrium, model: &Model) -> Option<SmallMatrix> {
    match (model, eq.label) {
        (Model::Sit(p), EquilibriumLabel::Extinction) => comparison_jacobian(p, 0.0).ok(),
        (Model::Wolbachia(p), EquilibriumLabel::Extinction) => Some(wolbachia_origin_surrogate(p)),
        _ => {
            if eq.has_flag(&EquilibriumFlag::RootFindingFailed) || !eq.residual_ok() {
                None
            } else {
                Some(model.jacobian(&eq.state))
            }
        }
    }
}

/// Fills eigenvalues and stability of an equilibrium.
pub fn classify(eq: &Equilibrium, model: &Model) -> Result<Equilibrium> {
    let mut out = eq.clone();
    match linearization(eq, model) {
        Some(m) => {
            let eigs = eigenvalues(&m)?;
            out.stability = stability_of(&m, &eigs);
            out.eigenvalues = eigs;
        }
        None => {
            out.stability = Stability::Undetermined;
            out.eigenvalues.clear();
            out.notes
                .push("no valid equilibrium point to linearize at".to_string());
        }
    }
    Ok(out)
}

/// Classifies every equilibrium in `eqs`.
pub fn classify_all(eqs: &[Equilibrium], model: &Model) -> Result<Vec<Equilibrium>> {
    eqs.iter().map(|e| classify(e, model)).collect()
}
