//! Hermite polynomials, variation partial sums, normalizers, the
//! carre-du-champ statistic and blocking subsequences.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::covariance::{
    breuer_major_sigma2, critical_variance_constant, partial_sum_variance, ChaosOrder,
    CovarianceModel, HurstParam,
};
use crate::error::{Error, Result};

/// Probabilists' Hermite polynomial `H_q(x)` via the three-term recurrence
/// `H_{q+1}(x) = x H_q(x) - q H_{q-1}(x)`.
pub fn hermite_eval(q: u32, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut h0 = 1.0;
            let mut h1 = x;
            for k in 1..q {
                let next = x * h1 - k as f64 * h0;
                h0 = h1;
                h1 = next;
            }
            h1
        }
    }
}

/// Which normalizer `g(n)` a variation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `g(n) = sqrt(E[X_n^2])`, the exact standard deviation.
    Exact,
    /// `g(n) = sqrt(sigma_q^2 n)` in the summable regime.
    BreuerMajor,
    /// `g(n) = sqrt(c_q n ln n)` at `H = 1 - 1/(2q)`.
    Critical,
}

/// A Hermite variation: model, rank and normalizing regime.
#[derive(Debug, Clone)]
pub struct VariationSpec {
    model: CovarianceModel,
    q: ChaosOrder,
    regime: Regime,
    sigma2: Option<f64>,
    critical_c: Option<f64>,
}

impl VariationSpec {
    pub fn new(model: CovarianceModel, q: ChaosOrder, regime: Regime) -> Result<Self> {
        let mut sigma2 = None;
        let mut critical_c = None;
        match regime {
            Regime::BreuerMajor => {
                sigma2 = Some(breuer_major_sigma2(&model, q, 1e-10)?);
            }
            Regime::Critical => {
                let h = match &model {
                    CovarianceModel::FgnIncrements(h) => h.value(),
                    _ => {
                        return Err(Error::Domain(
                            "critical regime requires fGn increments".into(),
                        ))
                    }
                };
                let h_crit = 1.0 - 0.5 / f64::from(q.get());
                if (h - h_crit).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "critical regime requires H = 1 - 1/(2q) = {h_crit}, got {h}"
                    )));
                }
                critical_c = Some(critical_variance_constant(q)?);
            }
            Regime::Exact => {}
        }
        Ok(Self { model, q, regime, sigma2, critical_c })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn q(&self) -> ChaosOrder {
        self.q
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

/// Partial sum `sum_{k=n1}^{n2-1} H_q(Z_k)` over a path slice.
pub fn variation_statistic(path: &[f64], q: ChaosOrder, n1: usize, n2: usize) -> Result<f64> {
    if n1 >= n2 || n2 > path.len() {
        return Err(Error::IndexOutOfRange { n1, n2, len: path.len() });
    }
    let qq = q.get();
    Ok(path[n1..n2].iter().map(|&z| hermite_eval(qq, z)).sum())
}

/// The normalizer `g(n)` of the spec's regime.
pub fn normalizer(spec: &VariationSpec, n: u64) -> Result<f64> {
    match spec.regime {
        Regime::Exact => Ok(partial_sum_variance(&spec.model, spec.q, n)?.sqrt()),
        Regime::BreuerMajor => Ok((spec.sigma2.expect("cached by constructor") * n as f64).sqrt()),
        Regime::Critical => {
            if n < 2 {
                return Err(Error::Domain("critical normalizer needs n >= 2 (ln n > 0)".into()));
            }
            let nf = n as f64;
            Ok((spec.critical_c.expect("cached by constructor") * nf * nf.ln()).sqrt())
        }
    }
}

/// Options for the carre-du-champ evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CdcOptions {
    /// Maximum block length accepted without a banded truncation.
    pub cost_cap: usize,
    /// Optional band `B`: restrict the double sum to `|k - l| <= B`.
    pub band: Option<usize>,
}

impl Default for CdcOptions {
    fn default() -> Self {
        Self { cost_cap: 1 << 20, band: None }
    }
}

/// Reusable kernel for `Gamma = q u^T T u / g^2` with `u_k = H_{q-1}(Z_k)`
/// and `T` the Toeplitz matrix of `rho` over a fixed block length.
///
/// The quadratic form is evaluated through a circulant extension of `T`, so
/// one call costs three FFTs of size `~2 len` instead of the O(len^2) double
/// sum; the two agree to rounding.
pub struct CarreDuChamp {
    len: usize,
    q: u32,
    m2: usize,
    kernel_fft: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CarreDuChamp {
    pub fn new(model: &CovarianceModel, q: ChaosOrder, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain("carre du champ needs a nonempty block".into()));
        }
        let mut m2 = 2usize;
        while m2 < 2 * len {
            m2 *= 2;
        }
        let mut kernel = vec![Complex::new(0.0, 0.0); m2];
        for j in 0..len {
            let r = model.rho(j as u64)?;
            kernel[j] = Complex::new(r, 0.0);
            if j > 0 {
                kernel[m2 - j] = Complex::new(r, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m2);
        let inv = planner.plan_fft_inverse(m2);
        fwd.process(&mut kernel);
        Ok(Self { len, q: q.get(), m2, kernel_fft: kernel, fwd, inv })
    }

    /// Evaluate `q u^T T u / g^2` for the slice `z` of length `len`.
    pub fn eval(&self, z: &[f64], g: f64) -> Result<f64> {
        if z.len() != self.len {
            return Err(Error::SampleMismatch(format!(
                "block length {} does not match kernel length {}",
                z.len(),
                self.len
            )));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::Domain("normalizer g must be positive".into()));
        }
        let mut u = vec![Complex::new(0.0, 0.0); self.m2];
        for (slot, &zv) in u.iter_mut().zip(z) {
            *slot = Complex::new(hermite_eval(self.q - 1, zv), 0.0);
        }
        let herm: Vec<f64> = u[..self.len].iter().map(|c| c.re).collect();
        self.fwd.process(&mut u);
        for (a, b) in u.iter_mut().zip(&self.kernel_fft) {
            *a *= b;
        }
        self.inv.process(&mut u);
        let scale = 1.0 / self.m2 as f64;
        let mut quad = 0.0;
        for (k, &h) in herm.iter().enumerate() {
            quad += h * u[k].re * scale;
        }
        Ok(f64::from(self.q) * quad / (g * g))
    }
}

/// Pathwise carre-du-champ
/// `Gamma = q sum_{k,l} H_{q-1}(Z_k) H_{q-1}(Z_l) rho(k-l) / g^2`
/// over `[n1, n2)`. Exact by default (via the FFT kernel); a banded
/// truncation restricted to `|k-l| <= B` is available for long blocks.
pub fn carre_du_champ(
    path: &[f64],
    q: ChaosOrder,
    n1: usize,
    n2: usize,
    model: &CovarianceModel,
    g: f64,
    opts: CdcOptions,
) -> Result<f64> {
    if n1 >= n2 || n2 > path.len() {
        return Err(Error::IndexOutOfRange { n1, n2, len: path.len() });
    }
    let len = n2 - n1;
    match opts.band {
        None => {
            if len > opts.cost_cap {
                return Err(Error::CostCap(format!(
                    "block length {len} exceeds cap {}; pass a band to truncate",
                    opts.cost_cap
                )));
            }
            CarreDuChamp::new(model, q, len)?.eval(&path[n1..n2], g)
        }
        Some(band) => {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::Domain("normalizer g must be positive".into()));
            }
            let u: Vec<f64> = path[n1..n2].iter().map(|&z| hermite_eval(q.get() - 1, z)).collect();
            let rho: Vec<f64> = (0..=band.min(len - 1))
                .map(|r| model.rho(r as u64))
                .collect::<Result<_>>()?;
            let mut quad = 0.0;
            for k in 0..len {
                quad += u[k] * u[k];
                let lmax = (k + band).min(len - 1);
                for l in k + 1..=lmax {
                    quad += 2.0 * u[k] * u[l] * rho[l - k];
                }
            }
            Ok(f64::from(q.get()) * quad / (g * g))
        }
    }
}

/// The index lattice `n_i = floor(q_ratio^{(m+i)^{1+alpha}})`, `i = 1..2d`.
#[derive(Debug, Clone, Serialize)]
pub struct BlockingSubsequence {
    pub q_ratio: f64,
    pub alpha: f64,
    pub m: u32,
    pub d: usize,
    pub indices: Vec<u64>,
}

impl BlockingSubsequence {
    /// Half-open block `[n_{2i-1}, n_{2i})` for `i = 1..=d` (0-indexed arg).
    pub fn block(&self, i: usize) -> (u64, u64) {
        (self.indices[2 * i], self.indices[2 * i + 1])
    }

    pub fn block_len(&self, i: usize) -> u64 {
        let (a, b) = self.block(i);
        b - a
    }

    /// Largest index; paths must be at least this long.
    pub fn max_index(&self) -> u64 {
        *self.indices.last().expect("2d >= 2 indices")
    }
}

/// Build the blocking subsequence, rejecting exponents beyond 62 bits and
/// parameter combinations whose floors collide.
pub fn blocking_subsequence(q_ratio: f64, alpha: f64, m: u32, d: usize) -> Result<BlockingSubsequence> {
    if !(q_ratio.is_finite() && q_ratio > 1.0) || !(alpha.is_finite() && alpha > 0.0) || m < 1 || d < 1 {
        return Err(Error::Domain(
            "blocking subsequence needs q_ratio > 1, alpha > 0, m >= 1, d >= 1".into(),
        ));
    }
    let limit = 62.0 * std::f64::consts::LN_2;
    let mut indices = Vec::with_capacity(2 * d);
    for i in 1..=2 * d {
        let expo = ((m as f64) + i as f64).powf(1.0 + alpha) * q_ratio.ln();
        if expo > limit {
            return Err(Error::BlockingOverflow { exponent: expo, i });
        }
        let value = q_ratio.powf(((m as f64) + i as f64).powf(1.0 + alpha)).floor() as u64;
        if let Some(&prev) = indices.last() {
            if value <= prev {
                return Err(Error::BlockingDegenerate { a: prev, b: value, i });
            }
        }
        indices.push(value);
    }
    Ok(BlockingSubsequence { q_ratio, alpha, m, d, indices })
}

/// Normalized block increments
/// `Y_i = (X_{n_{2i}} - X_{n_{2i-1}}) / g(n_{2i} - n_{2i-1})`.
///
/// The normalizer is evaluated at the block length, using the stationarity
/// of the increments (`X_{n2} - X_{n1}` has the law of `X_{n2-n1}`).
pub fn increment_vector(path: &[f64], sub: &BlockingSubsequence, spec: &VariationSpec) -> Result<Vec<f64>> {
    if (path.len() as u64) < sub.max_index() {
        return Err(Error::IndexOutOfRange {
            n1: 0,
            n2: sub.max_index() as usize,
            len: path.len(),
        });
    }
    (0..sub.d)
        .map(|i| {
            let (a, b) = sub.block(i);
            let x = variation_statistic(path, spec.q(), a as usize, b as usize)?;
            let g = normalizer(spec, b - a)?;
            Ok(x / g)
        })
        .collect()
}

/// fGn Hurst parameter of the critical regime for rank `q`.
pub fn critical_hurst(q: ChaosOrder) -> HurstParam {
    HurstParam::new(1.0 - 0.5 / f64::from(q.get())).expect("in (0,1) for q >= 1")
}
