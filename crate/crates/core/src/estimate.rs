//! Exact benchmark solution, error and estimator evaluation, Dörfler marking
//! and convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::EstimateError;
use crate::forms::{LoadSpec, NonlinearForms};
use crate::mesh::Point;
use crate::quadrature::QuadRule;
use crate::spaces::DofMap;

/// Degree of the rule used for error integrals.
pub const ERROR_QUAD_DEGREE: usize = 10;

/// Radially symmetric solution of `-div(|∇u|^{p-2} ∇u) = |x - x0|^{-σ}` in
/// two dimensions that vanishes on the unit circle around `x0`:
///
/// `u(x) = (p-1)/(p-σ) · (1/(2-σ))^{1/(p-1)} · (1 - r^β)`, `β = (p-σ)/(p-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub p: f64,
    pub sigma: f64,
    pub x0: Point,
}

const DIM: f64 = 2.0;

impl ExactSolution {
    pub fn new(p: f64, sigma: f64, x0: Point) -> Self {
        ExactSolution { p, sigma, x0 }
    }

    fn beta(&self) -> f64 {
        (self.p - self.sigma) / (self.p - 1.0)
    }

    fn amplitude(&self) -> f64 {
        (1.0 / (DIM - self.sigma)).powf(1.0 / (self.p - 1.0))
    }

    pub fn radius(&self, x: Point) -> f64 {
        (x[0] - self.x0[0]).hypot(x[1] - self.x0[1])
    }

    pub fn value(&self, x: Point) -> f64 {
        let r = self.radius(x);
        (self.p - 1.0) / (self.p - self.sigma) * self.amplitude() * (1.0 - r.powf(self.beta()))
    }

    pub fn gradient(&self, x: Point) -> Result<[f64; 2], EstimateError> {
        let r = self.radius(x);
        let e = self.beta() - 1.0;
        if r == 0.0 {
            return if e > 0.0 { Ok([0.0; 2]) } else { Err(EstimateError::SingularGradient(self.x0)) };
        }
        let s = -self.amplitude() * r.powf(e) / r;
        Ok([s * (x[0] - self.x0[0]), s * (x[1] - self.x0[1])])
    }

    /// `(value, gradient)` at `x`.
    pub fn eval(&self, x: Point) -> Result<(f64, [f64; 2]), EstimateError> {
        Ok((self.value(x), self.gradient(x)?))
    }

    pub fn load(&self) -> LoadSpec {
        LoadSpec::RadialPower { sigma: self.sigma, x0: self.x0 }
    }
}

/// `η = ‖r‖_h^{p-1}`.
pub fn estimator_global(forms: &NonlinearForms, r: &[f64]) -> f64 {
    let p = forms.p();
    forms.test().broken_seminorm_pow(r, p).powf((p - 1.0) / p)
}

/// `(Σ_T Σ_q w_q Σ_k |∂_k u(x_q) − ∂_k u_h|^p)^{1/p}` for P1 coefficients
/// `u` against the gradient field `grad`.
pub fn true_error(trial: &DofMap, u: &[f64], grad: impl Fn(Point) -> [f64; 2], p: f64, quad: &QuadRule) -> f64 {
    let mesh = trial.mesh();
    let sum: f64 = (0..mesh.num_triangles())
        .map(|t| {
            let gh = trial.gradient_unchecked(u, t);
            let area = trial.geometry(t).area;
            quad.mapped(mesh.triangle_points(t), area)
                .map(|(x, w, _)| {
                    let g = grad(x);
                    w * ((g[0] - gh[0]).abs().powf(p) + (g[1] - gh[1]).abs().powf(p))
                })
                .sum::<f64>()
        })
        .sum();
    sum.powf(1.0 / p)
}

/// [`true_error`] against an exact solution. Quadrature points are interior,
/// so the gradient is only evaluated away from a vertex at `x0`.
pub fn exact_error(trial: &DofMap, u: &[f64], es: &ExactSolution, quad: &QuadRule) -> f64 {
    true_error(trial, u, |x| es.gradient(x).unwrap_or([f64::NAN; 2]), es.p, quad)
}

/// Smallest set of elements, taken greedily by descending mass (ties to the
/// lower index), whose mass reaches `theta` times the total. Returned in
/// ascending index order.
pub fn dorfler_mark(masses: &[f64], theta: f64) -> Result<Vec<usize>, EstimateError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(EstimateError::InvalidTheta(theta));
    }
    if let Some((index, &value)) = masses.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(EstimateError::InvalidMass { index, value });
    }
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| masses[i]).sum();
    if total == 0.0 {
        log::warn!("all marking masses vanish; nothing marked");
        return Ok(Vec::new());
    }
    let goal = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        if acc >= goal {
            break;
        }
        acc += masses[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Error,
    Estimator,
}

/// One row of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub level: usize,
    pub n_free_trial: usize,
    pub n_free_test: usize,
    pub n_total: usize,
    pub h_max: f64,
    pub error: f64,
    pub eta: f64,
    pub eta_over_error: f64,
    pub eta_root_over_error: f64,
    pub newton_total: usize,
    pub damping_events: usize,
    pub wall_ms: f64,
}

impl StudyRecord {
    pub fn quantity(&self, q: Quantity) -> f64 {
        match q {
            Quantity::Error => self.error,
            Quantity::Estimator => self.eta,
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64, EstimateError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(EstimateError::TooFewLevels(x.len().min(y.len())));
    }
    for (level, (&a, &b)) in x.iter().zip(y).enumerate() {
        for value in [a, b] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EstimateError::NonPositive { level, value });
            }
        }
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(EstimateError::TooFewLevels(1));
    }
    Ok(sxy / sxx)
}

/// Slope of `quantity` against `n_total` over the last `window` records.
pub fn fit_rate(records: &[StudyRecord], quantity: Quantity, window: usize) -> Result<f64, EstimateError> {
    if window < 2 || records.len() < window {
        return Err(EstimateError::TooFewLevels(records.len().min(window)));
    }
    let tail = &records[records.len() - window..];
    let x: Vec<f64> = tail.iter().map(|r| r.n_total as f64).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.quantity(quantity)).collect();
    loglog_slope(&x, &y)
}
