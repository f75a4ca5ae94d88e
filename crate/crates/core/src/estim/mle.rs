use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{EstimatorReport, Method};
use crate::error::{OdError, Result};
use crate::observation::ObservationSet;
use crate::spectral::{reconstruct, SpectralForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodFamily {
    Poisson,
    /// Station departures are `NB(Σ_j r_ij, p)` with one shared `p`.
    NegBin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step improves the mean daily log-likelihood by
    /// less than this.
    pub tolerance: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-9,
            initial_step: 1.0,
            min_step: 1e-14,
        }
    }
}

/// Per-station value histograms of daily departures.
struct Margins {
    mean: DVector<f64>,
    hist: Vec<Vec<(f64, f64)>>,
    days: f64,
}

impl Margins {
    fn new(obs: &ObservationSet) -> Self {
        let y = obs.departures();
        let days = y.nrows() as f64;
        let hist = (0..y.ncols())
            .map(|i| {
                let mut h: BTreeMap<u64, f64> = BTreeMap::new();
                for t in 0..y.nrows() {
                    *h.entry(y[(t, i)].to_bits()).or_default() += 1.0;
                }
                let mut v: Vec<(f64, f64)> = h.into_iter().map(|(b, c)| (f64::from_bits(b), c)).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            })
            .collect();
        Self {
            mean: obs.mean_departures(),
            hist,
            days,
        }
    }
}

/// Mean daily Poisson log-likelihood of the departures, without the
/// `ln y!` term. `−∞` when a mean is nonpositive where data are positive.
pub fn poisson_margin_loglik(mu: &DVector<f64>, y_bar: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (m, y) in mu.iter().zip(y_bar.iter()) {
        if *m < 0.0 || (*m == 0.0 && *y > 0.0) {
            return f64::NEG_INFINITY;
        }
        if *y > 0.0 {
            acc += y * m.ln();
        }
        acc -= m;
    }
    acc
}

fn nb_profile(r: &DVector<f64>, m: &Margins) -> Option<(f64, f64)> {
    if r.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let total_r: f64 = r.sum();
    let total_y: f64 = m.mean.sum();
    let p = total_r / (total_r + total_y);
    let mut acc = total_r * p.ln();
    if total_y > 0.0 {
        acc += total_y * (1.0 - p).ln();
    }
    for (i, h) in m.hist.iter().enumerate() {
        let lg = ln_gamma(r[i]);
        for &(y, c) in h {
            acc += c / m.days * (ln_gamma(y + r[i]) - lg - ln_gamma(y + 1.0));
        }
    }
    Some((acc, p))
}

/// Mean daily NB log-likelihood of the departures with sizes `r`,
/// maximized over the shared `p`. Returns `(loglik, p̂)`.
pub fn nb_margin_loglik(r: &DVector<f64>, obs: &ObservationSet) -> Option<(f64, f64)> {
    nb_profile(r, &Margins::new(obs))
}

fn nb_gradient_r(r: &DVector<f64>, p: f64, m: &Margins) -> DVector<f64> {
    DVector::from_iterator(
        r.len(),
        m.hist.iter().enumerate().map(|(i, h)| {
            let dr = digamma(r[i]);
            let s: f64 = h.iter().map(|&(y, c)| c * (digamma(y + r[i]) - dr)).sum();
            s / m.days + p.ln()
        }),
    )
}

fn trigamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + x2 / x * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

/// Curvature of the station objective with respect to each station
/// parameter, used to scale the ascent direction.
fn station_curvature(mu: &DVector<f64>, m: &Margins, family: LikelihoodFamily) -> DVector<f64> {
    DVector::from_iterator(
        mu.len(),
        (0..mu.len()).map(|i| match family {
            LikelihoodFamily::Poisson => 1.0 / mu[i].max(1e-12),
            LikelihoodFamily::NegBin => {
                let tr = trigamma(mu[i]);
                let s: f64 = m.hist[i].iter().map(|&(y, c)| c * (tr - trigamma(y + mu[i]))).sum();
                (s / m.days).max(1e-12)
            }
        }),
    )
}

/// Negative Hessian of the NB log-likelihood in the sizes after `p` is
/// profiled out: `diag(h) − c·11ᵀ` with `c = 1 / (R + ȳ p²/(1−p)²)`.
fn nb_profile_information(h: &DVector<f64>, r: &DVector<f64>, p: f64, m: &Margins) -> DMatrix<f64> {
    let n = h.len();
    let q = p / (1.0 - p);
    let c = 1.0 / (r.sum() + m.mean.sum() * q * q);
    DMatrix::from_fn(n, n, |i, j| if i == j { h[i] - c } else { -c })
}

/// Newton-type direction `F⁻¹g` with `F = Aᵀ H A`, restricted to
/// `Σλ = 0` and to the face of the binding off-diagonal constraints whose
/// multipliers keep them active.
fn scaled_direction(
    a: &DMatrix<f64>,
    info: &DMatrix<f64>,
    grad: &DVector<f64>,
    binding: &[&DVector<f64>],
) -> Option<DVector<f64>> {
    let n = grad.len();
    let mut fisher = a.transpose() * info * a;
    let ridge = 1e-10 * fisher.diagonal().amax().max(1e-300);
    for k in 0..n {
        fisher[(k, k)] += ridge;
    }
    let chol = fisher.cholesky()?;
    let w = chol.solve(grad);
    let lead = usize::from(n > 1);
    let mut active: Vec<&DVector<f64>> = binding.to_vec();
    loop {
        let m_rows = lead + active.len();
        if m_rows == 0 {
            return w.iter().all(|v| v.is_finite()).then_some(w);
        }
        let c = DMatrix::from_fn(m_rows, n, |i, j| if i < lead { 1.0 } else { active[i - lead][j] });
        let u = chol.solve(&c.transpose());
        let m = &c * &u;
        let eps = 1e-12 * m.amax().max(1e-300);
        let nu = m.pseudo_inverse(eps).ok()? * (&c * &w);
        let release = (lead..m_rows)
            .filter(|&i| nu[i] > 0.0)
            .max_by(|&i, &j| nu[i].total_cmp(&nu[j]));
        match release {
            Some(i) => {
                active.remove(i - lead);
            }
            None => {
                let d = w - u * nu;
                return d.iter().all(|v| v.is_finite()).then_some(d);
            }
        }
    }
}

/// Eigenvalue vectors with zero trace whose reconstruction has nonnegative
/// off-diagonal entries.
struct FeasibleSet {
    normals: Vec<DVector<f64>>,
    n: usize,
}

impl FeasibleSet {
    fn new(p: &DMatrix<f64>) -> Self {
        let n = p.nrows();
        let mut normals = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = DVector::from_iterator(n, (0..n).map(|k| p[(i, k)] * p[(j, k)]));
                if v.norm_squared() > 0.0 {
                    normals.push(v);
                }
            }
        }
        Self { normals, n }
    }

    /// Euclidean projection by Dykstra's algorithm. The off-diagonal
    /// normals are orthogonal to `1`, so the trace step is taken once.
    fn binding(&self, lambda: &DVector<f64>) -> Vec<&DVector<f64>> {
        let tol = 1e-9 * lambda.amax().max(1.0);
        self.normals.iter().filter(|a| a.dot(lambda) <= tol).collect()
    }

    fn project(&self, lambda: &DVector<f64>) -> DVector<f64> {
        if self.n == 1 {
            return lambda.map(|v| v.max(0.0));
        }
        let mut x = lambda.add_scalar(-lambda.mean());
        if self.normals.iter().all(|a| a.dot(&x) >= 0.0) {
            return x;
        }
        let mut incr = vec![DVector::zeros(self.n); self.normals.len()];
        for _ in 0..10_000 {
            let before = x.clone();
            for (a, y) in self.normals.iter().zip(incr.iter_mut()) {
                let z = &x + &*y;
                let v = a.dot(&z);
                x = if v < 0.0 { &z - a * (v / a.norm_squared()) } else { z.clone() };
                *y = z - &x;
            }
            if (&x - before).amax() <= 1e-13 * x.amax().max(1.0) {
                break;
            }
        }
        x.add_scalar(-x.mean())
    }
}

fn check_init(basis: &SpectralForm, init: &DVector<f64>) -> Result<()> {
    let r = reconstruct(basis.vectors(), init)?;
    let scale = r.amax().max(1.0);
    let tol = 1e-8 * scale;
    if let Some(v) = r.iter().copied().find(|v| *v < -tol) {
        return Err(OdError::InfeasibleInit(format!(
            "C1 violated: reconstruct(P, init) has entry {v}"
        )));
    }
    if r.nrows() > 1 {
        if let Some(v) = r.diagonal().iter().copied().find(|v| v.abs() > tol) {
            return Err(OdError::InfeasibleInit(format!(
                "C2 violated: reconstruct(P, init) has diagonal entry {v}"
            )));
        }
    }
    Ok(())
}

/// Constrained maximum likelihood for the eigenvalues given the survey
/// basis, by projected gradient ascent with backtracking.
///
/// Station means (Poisson) or sizes (NB) are `A·λ` with `A = P·diag(S)`.
/// The ascent direction is the gradient scaled by the information
/// `Aᵀ H A`, where `H` is the station curvature (with `p` profiled out for
/// NB). When no scaled step improves, the raw gradient and then a rescaling
/// of `λ` are tried.
///
/// Trial points are projected onto the eigenvalue vectors with `Σλ = 0`
/// (the trace of a zero-diagonal matrix) whose reconstruction is
/// nonnegative off the diagonal. A step is accepted only if it raises the
/// objective. The reported matrix is `project_constraints` of the
/// reconstruction.
pub fn estimate_lambda_mle(
    basis: &SpectralForm,
    obs: &ObservationSet,
    family: LikelihoodFamily,
    init: &DVector<f64>,
    options: &MleOptions,
) -> Result<EstimatorReport> {
    let n = basis.n();
    if obs.n() != n || init.len() != n {
        return Err(OdError::Dimension(format!(
            "basis of size {n}, {} stations observed, init of length {}",
            obs.n(),
            init.len()
        )));
    }
    if obs.days() == 0 {
        return Err(OdError::param("obs", "at least one day is required"));
    }
    check_init(basis, init)?;
    let a = basis.margin_operator();
    let margins = Margins::new(obs);
    let feasible = FeasibleSet::new(basis.vectors());

    let eval = |lambda: &DVector<f64>| -> (f64, Option<f64>) {
        let mu = &a * lambda;
        match family {
            LikelihoodFamily::Poisson => (poisson_margin_loglik(&mu, &margins.mean), None),
            LikelihoodFamily::NegBin => match nb_profile(&mu, &margins) {
                Some((f, pr)) => (f, Some(pr)),
                None => (f64::NEG_INFINITY, None),
            },
        }
    };

    let mut lambda = feasible.project(init);
    let (mut f, mut p_hat) = eval(&lambda);
    if !f.is_finite() {
        lambda = init.clone();
        (f, p_hat) = eval(&lambda);
    }
    if !f.is_finite() {
        return Err(OdError::InfeasibleInit(
            "initial point gives a nonpositive station mean where departures were observed".into(),
        ));
    }
    let mut trace = vec![f];
    let mut step = options.initial_step;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let mut converged = false;
    while iterations < options.max_iterations {
        let mu = &a * &lambda;
        let g_station = match family {
            LikelihoodFamily::Poisson => DVector::from_iterator(
                n,
                (0..n).map(|i| if mu[i] > 0.0 { margins.mean[i] / mu[i] - 1.0 } else { 0.0 }),
            ),
            LikelihoodFamily::NegBin => nb_gradient_r(&mu, p_hat.unwrap_or(0.5), &margins),
        };
        let grad = a.tr_mul(&g_station);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(OdError::Numeric("non-finite likelihood gradient".into()));
        }
        let mut accepted = None;
        let h = station_curvature(&mu, &margins, family);
        let mut infos = Vec::with_capacity(2);
        if let (LikelihoodFamily::NegBin, Some(pr)) = (family, p_hat) {
            infos.push(nb_profile_information(&h, &mu, pr, &margins));
        }
        infos.push(DMatrix::from_diagonal(&h));
        let binding = feasible.binding(&lambda);
        for info in &infos {
            let Some(dir) = scaled_direction(&a, info, &grad, &binding) else {
                continue;
            };
            let mut t = 1.0;
            while t > 1e-6 {
                let trial = feasible.project(&(&lambda + &dir * t));
                let (ft, pt) = eval(&trial);
                if ft > f {
                    accepted = Some((trial, ft, pt));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        if accepted.is_none() {
            let grad = if n > 1 { grad.add_scalar(-grad.mean()) } else { grad.clone() };
            step *= 2.0;
            while step > options.min_step {
                let trial = feasible.project(&(&lambda + &grad * step));
                let (ft, pt) = eval(&trial);
                if ft > f {
                    accepted = Some((trial, ft, pt));
                    break;
                }
                step *= 0.5;
            }
        }
        if accepted.is_none() {
            let norm = lambda.norm_squared();
            if norm > 0.0 {
                let mut s = (grad.dot(&lambda) / norm).signum();
                while s.abs() > 1e-6 {
                    let trial = feasible.project(&(&lambda * (1.0 + s)));
                    let (ft, pt) = eval(&trial);
                    if ft > f {
                        accepted = Some((trial, ft, pt));
                        break;
                    }
                    s *= 0.5;
                }
            }
        }
        let Some((next, fn_, pn)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        let improvement = fn_ - f;
        lambda = next;
        f = fn_;
        p_hat = pn;
        trace.push(f);
        if improvement < options.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "iteration cap {} reached before the improvement fell below {}",
            options.max_iterations, options.tolerance
        ));
    }
    let mut report = EstimatorReport::from_lambda(Method::MleConstrained, basis, lambda)?;
    report.iterations = iterations;
    report.objective_trace = trace;
    report.p_rz_hat = p_hat;
    report.warnings.extend(warnings);
    Ok(report)
}
