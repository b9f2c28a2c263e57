//! Stein factors and matrices: closed-form density factors `s(x)`, i.i.d.
//! aggregates, chaos Stein-matrix moment estimation, and a generic residual
//! test of the Stein identity `E[F_i g(F)] = sum_j E[tau_{ij} d_j g(F)]`.
//!
//! Conditional expectations `E[.|Y]` are never estimated here; every moment
//! is taken on the unconditioned integrand, which dominates the
//! conditional-expectation moments by Jensen's inequality. That is the safe
//! direction for all bounds in this crate, which only consume upper bounds.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, normalizer, BlockingSubsequence, CdcOptions, VariationSpec};
use crate::quadrature::adaptive_simpson;

/// A certified centered unit-variance density on an interval support.
#[derive(Clone)]
pub struct DensitySpec {
    label: String,
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
    lo_eff: f64,
    hi_eff: f64,
}

impl std::fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensitySpec")
            .field("label", &self.label)
            .field("support", &self.support)
            .finish()
    }
}

const MOMENT_TOL: f64 = 1e-8;

impl DensitySpec {
    /// Certify and wrap a density. The pdf must integrate to 1 with mean 0
    /// and variance 1, each within 1e-8 by quadrature.
    pub fn new(
        label: impl Into<String>,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        let label = label.into();
        if support.0 >= support.1 {
            return Err(Error::Domain("support interval is empty".into()));
        }
        let pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(pdf);
        let (lo_eff, hi_eff) = effective_bounds(pdf.as_ref(), support);
        let spec = Self { label, pdf, support, lo_eff, hi_eff };
        let mass = spec.integrate(|x| spec.pdf(x));
        let mean = spec.integrate(|x| x * spec.pdf(x));
        let var = spec.integrate(|x| x * x * spec.pdf(x));
        for (name, value, target) in [("mass", mass, 1.0), ("mean", mean, 0.0), ("variance", var, 1.0)] {
            if (value - target).abs() > MOMENT_TOL {
                return Err(Error::Domain(format!(
                    "density '{}' failed certification: {name} = {value}, expected {target}",
                    spec.label
                )));
            }
        }
        Ok(spec)
    }

    pub fn standard_normal() -> Self {
        Self::new("standard-normal", crate::gaussian::normal_pdf, (f64::NEG_INFINITY, f64::INFINITY))
            .expect("reference density certifies")
    }

    /// Uniform on `[-sqrt(3), sqrt(3)]`, the unit-variance uniform law.
    pub fn uniform_unit_variance() -> Self {
        let half_width = 3f64.sqrt();
        let height = 0.5 / half_width;
        Self::new(
            "uniform-unit-variance",
            move |x| if x.abs() <= half_width { height } else { 0.0 },
            (-half_width, half_width),
        )
        .expect("reference density certifies")
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g: &dyn Fn(f64) -> f64 = &f;
        if self.lo_eff < 0.0 && self.hi_eff > 0.0 {
            adaptive_simpson(g, self.lo_eff, 0.0, 1e-11) + adaptive_simpson(g, 0.0, self.hi_eff, 1e-11)
        } else {
            adaptive_simpson(g, self.lo_eff, self.hi_eff, 1e-11)
        }
    }
}

/// Finite integration window: unbounded supports are cut where the weighted
/// integrand falls below 1e-16 of the density peak.
fn effective_bounds(pdf: &(dyn Fn(f64) -> f64 + Send + Sync), support: (f64, f64)) -> (f64, f64) {
    let scan_lo = support.0.max(-64.0);
    let scan_hi = support.1.min(64.0);
    let mut peak = 0.0f64;
    for i in 0..=4096 {
        let x = scan_lo + (scan_hi - scan_lo) * i as f64 / 4096.0;
        peak = peak.max(pdf(x));
    }
    let threshold = peak * 1e-16;
    let negligible = |x: f64| pdf(x) * (1.0 + x * x) < threshold;

    let hi = if support.1.is_finite() {
        support.1
    } else {
        let mut x = 1.0f64;
        while !negligible(x) && x < 1e9 {
            x *= 2.0;
        }
        x
    };
    let lo = if support.0.is_finite() {
        support.0
    } else {
        let mut x = -1.0f64;
        while !negligible(x) && x > -1e9 {
            x *= 2.0;
        }
        x
    };
    (lo, hi)
}

/// Density-based Stein factor `s(x) = (int_x^inf y f(y) dy) / f(x)` on the
/// support, and 0 outside it.
pub fn stein_factor_density(density: &DensitySpec, x: f64) -> Result<f64> {
    let (lo, hi) = density.support();
    if x < lo || x > hi {
        return Ok(0.0);
    }
    let fx = density.pdf(x);
    if fx < 1e-300 {
        return Err(Error::DensityUnderflow { x, fx });
    }
    let integrand = |y: f64| y * density.pdf(y);
    let upper = density.hi_eff.max(x);
    let num = if x < 0.0 && upper > 0.0 {
        // split at the integrand's sign change
        let rough = adaptive_simpson(&integrand, x, 0.0, 1e-7)
            + adaptive_simpson(&integrand, 0.0, upper, 1e-7);
        let tol = (rough.abs().max(1e-3)) * 1e-10;
        adaptive_simpson(&integrand, x, 0.0, tol) + adaptive_simpson(&integrand, 0.0, upper, tol)
    } else {
        let rough = adaptive_simpson(&integrand, x, upper, 1e-7);
        let tol = (rough.abs().max(1e-3)) * 1e-10;
        adaptive_simpson(&integrand, x, upper, tol)
    };
    Ok((num / fx).max(0.0))
}

/// Average Stein factor over a slice of i.i.d. draws:
/// `tau = (n2-n1)^{-1} sum_k s(Z_k)`; its expectation is 1.
pub fn iid_stein_aggregate(path: &[f64], density: &DensitySpec, n1: usize, n2: usize) -> Result<f64> {
    if n1 >= n2 || n2 > path.len() {
        return Err(Error::IndexOutOfRange { n1, n2, len: path.len() });
    }
    let mut acc = 0.0;
    for &z in &path[n1..n2] {
        acc += stein_factor_density(density, z)?;
    }
    Ok(acc / (n2 - n1) as f64)
}

/// One matrix cell of a Stein moment report.
#[derive(Debug, Clone, Serialize)]
pub struct CellMoment {
    pub i: usize,
    pub j: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// `||A_ii - 1||_theta` estimate for one diagonal cell.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaNorm {
    pub i: usize,
    pub theta: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte-Carlo moments of the chaos Stein-matrix integrand.
///
/// Estimates are on the unconditioned `A_{ij} = (1/q) <DY_i, DY_j>`; they
/// upper-bound the corresponding moments of the conditional Stein matrix
/// `tau_{ij} = E[A_{ij} | Y]` by Jensen.
#[derive(Debug, Clone, Serialize)]
pub struct SteinMomentReport {
    pub d: usize,
    pub theta: f64,
    pub diag_second_moments: Vec<CellMoment>,
    pub offdiag_second_moments: Vec<CellMoment>,
    pub theta_norms: Vec<ThetaNorm>,
}

impl SteinMomentReport {
    /// `sum_{i,j} E[(A_{ij} - delta_{ij})^2]`, the input of the W1 bound.
    pub fn second_moment_sum(&self) -> f64 {
        let diag: f64 = self.diag_second_moments.iter().map(|c| c.estimate).sum();
        // off-diagonal cells enter symmetrically for (i,j) and (j,i)
        let off: f64 = self.offdiag_second_moments.iter().map(|c| 2.0 * c.estimate).sum();
        diag + off
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-replicate chaos Stein-matrix integrands
/// `A_{ij} = q sum_{k in B_i, l in B_j} H_{q-1}(Z_k) H_{q-1}(Z_l) rho(k-l) / (g_i g_j)`,
/// one row-major d x d matrix per path.
pub fn stein_matrices_hermite(
    paths: &[Vec<f64>],
    sub: &BlockingSubsequence,
    spec: &VariationSpec,
    opts: CdcOptions,
) -> Result<Vec<Vec<f64>>> {
    let d = sub.d;
    let model = spec.model().clone();
    let q = spec.q();
    let max_block = (0..d).map(|i| sub.block_len(i)).max().unwrap() as usize;
    if max_block > opts.cost_cap && opts.band.is_none() {
        return Err(Error::CostCap(format!(
            "block length {max_block} exceeds cap {}",
            opts.cost_cap
        )));
    }
    let g: Vec<f64> = (0..d).map(|i| normalizer(spec, sub.block_len(i))).collect::<Result<_>>()?;
    let need = sub.max_index() as usize;
    let qm1 = q.get() - 1;
    let qf = f64::from(q.get());

    let mut rho_cache = vec![0.0f64; need];
    for (lag, slot) in rho_cache.iter_mut().enumerate() {
        *slot = model.rho(lag as u64)?;
    }

    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        if path.len() < need {
            return Err(Error::IndexOutOfRange { n1: 0, n2: need, len: path.len() });
        }
        let u: Vec<f64> = path[..need].iter().map(|&z| hermite_eval(qm1, z)).collect();
        let mut mat = vec![0.0f64; d * d];
        for i in 0..d {
            let (a1, b1) = sub.block(i);
            for j in i..d {
                let (a2, b2) = sub.block(j);
                let mut quad = 0.0;
                for k in a1..b1 {
                    let uk = u[k as usize];
                    for l in a2..b2 {
                        quad += uk * u[l as usize] * rho_cache[l.abs_diff(k) as usize];
                    }
                }
                let val = qf * quad / (g[i] * g[j]);
                mat[i * d + j] = val;
                mat[j * d + i] = val;
            }
        }
        out.push(mat);
    }
    Ok(out)
}

/// Aggregate per-replicate Stein matrices into second-moment estimates and
/// diagonal theta-norms.
pub fn stein_matrix_moments_hermite(
    paths: &[Vec<f64>],
    sub: &BlockingSubsequence,
    spec: &VariationSpec,
    theta: f64,
    opts: CdcOptions,
) -> Result<SteinMomentReport> {
    if paths.is_empty() {
        return Err(Error::Empty("no replicate paths".into()));
    }
    let d = sub.d;
    let mats = stein_matrices_hermite(paths, sub, spec, opts)?;
    let m = mats.len();

    let moment = |values: &[f64]| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / m as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
        (mean, (var / m as f64).sqrt())
    };

    let mut diag = Vec::with_capacity(d);
    let mut theta_norms = Vec::with_capacity(d);
    for i in 0..d {
        let sq: Vec<f64> = mats.iter().map(|mat| (mat[i * d + i] - 1.0).powi(2)).collect();
        let (est, se) = moment(&sq);
        diag.push(CellMoment { i, j: i, estimate: est, std_error: se, n_samples: m });

        let devs: Vec<f64> = mats.iter().map(|mat| mat[i * d + i] - 1.0).collect();
        let (norm, nse) = theta_norm_with_se(&devs, theta)?;
        theta_norms.push(ThetaNorm { i, theta, estimate: norm, std_error: nse });
    }
    let mut offdiag = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let sq: Vec<f64> = mats.iter().map(|mat| mat[i * d + j].powi(2)).collect();
            let (est, se) = moment(&sq);
            offdiag.push(CellMoment { i, j, estimate: est, std_error: se, n_samples: m });
        }
    }
    Ok(SteinMomentReport { d, theta, diag_second_moments: diag, offdiag_second_moments: offdiag, theta_norms })
}

/// Empirical theta-norm `(mean |tau - 1|^theta)^{1/theta}`.
pub fn theta_norm_estimate(tau_samples: &[f64], theta: f64) -> Result<f64> {
    Ok(theta_norm_estimate_with_se(tau_samples, theta)?.0)
}

/// Theta-norm estimate together with a delta-method standard error.
pub fn theta_norm_estimate_with_se(tau_samples: &[f64], theta: f64) -> Result<(f64, f64)> {
    theta_norm_with_se(&tau_samples.iter().map(|&t| t - 1.0).collect::<Vec<_>>(), theta)
}

fn theta_norm_with_se(deviations: &[f64], theta: f64) -> Result<(f64, f64)> {
    if deviations.is_empty() {
        return Err(Error::Empty("theta norm of an empty sample".into()));
    }
    if !theta.is_finite() || theta < 1.0 {
        return Err(Error::Domain(format!("theta must be >= 1, got {theta}")));
    }
    let m = deviations.len() as f64;
    let powed: Vec<f64> = deviations.iter().map(|d| d.abs().powf(theta)).collect();
    let mean = powed.iter().sum::<f64>() / m;
    let norm = mean.powf(1.0 / theta);
    if mean == 0.0 {
        return Ok((0.0, 0.0));
    }
    let var = powed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let se_mean = (var / m).sqrt();
    // delta method through t -> t^{1/theta}
    let se = norm / (theta * mean) * se_mean;
    Ok((norm, se))
}

/// Polynomial test functions of degree <= 3 with exact gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    /// `g(x) = x_j`
    Coord(usize),
    /// `g(x) = x_j^2`
    Square(usize),
    /// `g(x) = x_j x_k`
    Cross(usize, usize),
    /// `g(x) = x_j^3`
    Cube(usize),
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Coord(j) => x[j],
            TestFunction::Square(j) => x[j] * x[j],
            TestFunction::Cross(j, k) => x[j] * x[k],
            TestFunction::Cube(j) => x[j] * x[j] * x[j],
        }
    }

    pub fn grad(&self, x: &[f64], axis: usize) -> f64 {
        match *self {
            TestFunction::Coord(j) => {
                if axis == j {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Square(j) => {
                if axis == j {
                    2.0 * x[j]
                } else {
                    0.0
                }
            }
            TestFunction::Cross(j, k) => {
                if axis == j {
                    x[k]
                } else if axis == k {
                    x[j]
                } else {
                    0.0
                }
            }
            TestFunction::Cube(j) => {
                if axis == j {
                    3.0 * x[j] * x[j]
                } else {
                    0.0
                }
            }
        }
    }

    /// The full dictionary `{x_j, x_j^2, x_j x_k (j<k), x_j^3}` in dimension `d`.
    pub fn dictionary(d: usize) -> Vec<TestFunction> {
        let mut out = Vec::new();
        for j in 0..d {
            out.push(TestFunction::Coord(j));
        }
        for j in 0..d {
            out.push(TestFunction::Square(j));
        }
        for j in 0..d {
            for k in j + 1..d {
                out.push(TestFunction::Cross(j, k));
            }
        }
        for j in 0..d {
            out.push(TestFunction::Cube(j));
        }
        out
    }
}

/// Monte-Carlo residual of the Stein identity and its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub component: usize,
    pub test_function: TestFunction,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl ResidualReport {
    /// Within `k` standard errors of zero.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.estimate.abs() <= k * self.std_error
    }
}

/// Estimate `E[F_i g(F)] - sum_j E[tau_{ij} d_j g(F)]` from paired samples
/// of `F` (length-d rows) and of the matrix integrand (row-major d x d).
pub fn stein_identity_residual(
    f_samples: &[Vec<f64>],
    tau_samples: &[Vec<f64>],
    component: usize,
    test_function: TestFunction,
) -> Result<ResidualReport> {
    if f_samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    if f_samples.len() != tau_samples.len() {
        return Err(Error::SampleMismatch(format!(
            "{} F samples vs {} tau samples",
            f_samples.len(),
            tau_samples.len()
        )));
    }
    let d = f_samples[0].len();
    if component >= d {
        return Err(Error::Domain(format!("component {component} out of dimension {d}")));
    }
    let m = f_samples.len();
    let mut residuals = Vec::with_capacity(m);
    for (f, tau) in f_samples.iter().zip(tau_samples) {
        if f.len() != d || tau.len() != d * d {
            return Err(Error::SampleMismatch(
                "inconsistent sample dimensions across replicates".into(),
            ));
        }
        let mut r = f[component] * test_function.eval(f);
        for j in 0..d {
            r -= tau[component * d + j] * test_function.grad(f, j);
        }
        residuals.push(r);
    }
    let mean = residuals.iter().sum::<f64>() / m as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
    Ok(ResidualReport {
        component,
        test_function,
        estimate: mean,
        std_error: (var / m as f64).sqrt(),
        n_samples: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn gaussian_stein_factor_is_one() {
        let normal = DensitySpec::standard_normal();
        for x in [-3.0, -1.0, 0.0, 0.7, 2.5] {
            assert_abs_diff_eq!(stein_factor_density(&normal, x).unwrap(), 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn uniform_stein_factor_closed_form() {
        let uni = DensitySpec::uniform_unit_variance();
        for x in [-1.5, -0.25, 0.0, 0.6, 1.7] {
            let expected = (3.0 - x * x) / 2.0;
            assert_abs_diff_eq!(stein_factor_density(&uni, x).unwrap(), expected, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(stein_factor_density(&uni, 0.0).unwrap(), 1.5, epsilon = 1e-8);
        // outside the support
        assert_eq!(stein_factor_density(&uni, 2.0).unwrap(), 0.0);
        assert_eq!(stein_factor_density(&uni, -9.0).unwrap(), 0.0);
    }

    #[test]
    fn deep_tail_underflow_is_reported() {
        let normal = DensitySpec::standard_normal();
        assert!(matches!(
            stein_factor_density(&normal, 40.0),
            Err(Error::DensityUnderflow { .. })
        ));
    }

    #[test]
    fn expected_stein_factor_is_one_by_quadrature() {
        for density in [DensitySpec::standard_normal(), DensitySpec::uniform_unit_variance()] {
            let f = |x: f64| stein_factor_density(&density, x).unwrap() * density.pdf(x);
            let lo = density.lo_eff;
            let hi = density.hi_eff;
            let v = adaptive_simpson(&|x| f(x), lo, 0.0, 1e-10) + adaptive_simpson(&|x| f(x), 0.0, hi, 1e-10);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn density_certification_rejects_bad_moments() {
        // variance 1/3, not 1
        let bad = DensitySpec::new("uniform-[-1,1]", |x| if x.abs() <= 1.0 { 0.5 } else { 0.0 }, (-1.0, 1.0));
        assert!(bad.is_err());
    }

    #[test]
    fn gaussian_aggregate_is_one() {
        let normal = DensitySpec::standard_normal();
        let path = vec![0.3, -1.2, 2.4, 0.0, -0.7];
        let tau = iid_stein_aggregate(&path, &normal, 0, 5).unwrap();
        assert_abs_diff_eq!(tau, 1.0, epsilon = 1e-7);
        assert!(iid_stein_aggregate(&path, &normal, 2, 9).is_err());
    }

    #[test]
    fn theta_norm_basics() {
        assert_eq!(theta_norm_estimate(&[1.0, 1.0, 1.0], 4.0).unwrap(), 0.0);
        let samples = [1.5, 0.5, 1.1];
        let rms = ((0.25 + 0.25 + 0.01) / 3.0f64).sqrt();
        assert_relative_eq!(theta_norm_estimate(&samples, 2.0).unwrap(), rms, max_relative = 1e-14);
        assert!(theta_norm_estimate(&[], 2.0).is_err());
        assert!(theta_norm_estimate(&[1.0], 0.5).is_err());
    }

    // The increment X_{n2} - X_{n1} of the uniform-smoothed Rademacher walk
    // drops the smoothing variable, so its Stein factor is the deterministic
    // conditional value 1 + 1/(3(n2-n1)); the Khinchin-style bound
    // ((theta-1)^{1/2} + 1)/(n2-n1) holds with room to spare.
    #[test]
    fn rademacher_increment_factor_meets_khinchin_bound() {
        let n = 64.0;
        let tau = vec![1.0 + 1.0 / (3.0 * n); 512];
        for theta in [2.0, 4.0, 8.0] {
            let est = theta_norm_estimate(&tau, theta).unwrap();
            assert!(est <= ((theta - 1.0).sqrt() + 1.0) / n);
            assert_relative_eq!(est, 1.0 / (3.0 * n), max_relative = 1e-12);
        }
    }

    #[test]
    fn dictionary_enumeration() {
        let dict = TestFunction::dictionary(3);
        // 3 coords + 3 squares + 3 crosses + 3 cubes
        assert_eq!(dict.len(), 12);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(TestFunction::Cross(0, 2).eval(&x), 3.0);
        assert_eq!(TestFunction::Cross(0, 2).grad(&x, 2), 1.0);
        assert_eq!(TestFunction::Cube(1).grad(&x, 1), 12.0);
        assert_eq!(TestFunction::Cube(1).grad(&x, 0), 0.0);
    }

    #[test]
    fn residual_shape_errors() {
        let f = vec![vec![0.1, 0.2]];
        let tau = vec![vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]];
        assert!(stein_identity_residual(&f, &tau, 0, TestFunction::Coord(0)).is_err());
        let tau1 = vec![vec![1.0, 0.0, 0.0]];
        assert!(stein_identity_residual(&f, &tau1, 0, TestFunction::Coord(0)).is_err());
        assert!(stein_identity_residual(&f, &tau1[..0], 0, TestFunction::Coord(0)).is_err());
    }
}
