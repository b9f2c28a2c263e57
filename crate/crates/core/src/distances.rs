//! Distances between empirical measures (Kolmogorov over lower-left
//! rectangles, theta-Wasserstein), the Stein-based distance bounds, and the
//! dimension-logarithmic comparison inequality with its recursion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_abs_moment, normal_cdf, normal_pdf};

/// Which distance a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Kolmogorov1d,
    KolmogorovMultid,
    WassersteinSorted,
    WassersteinAssignment,
}

/// A computed distance with its sampling context.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    pub kind: DistanceKind,
    pub d: usize,
    pub value: f64,
    pub m: usize,
    pub std_error: Option<f64>,
    /// Exact on the empirical measures (vs. grid/anchor approximation).
    pub exact: bool,
}

impl DistanceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Exact Kolmogorov distance between the empirical measure of `sample` and
/// the standard Gaussian: both one-sided ECDF limits are evaluated at every
/// sample point.
pub fn kolmogorov_1d_vs_gaussian(sample: &[f64]) -> Result<DistanceReport> {
    if sample.is_empty() {
        return Err(Error::Empty("Kolmogorov statistic of an empty sample".into()));
    }
    let m = sample.len();
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let mf = m as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal_cdf(x);
        let hi = (i as f64 + 1.0) / mf - phi;
        let lo = i as f64 / mf - phi;
        sup = sup.max(hi.abs()).max(lo.abs());
    }
    Ok(DistanceReport {
        kind: DistanceKind::Kolmogorov1d,
        d: 1,
        value: sup,
        m,
        std_error: Some((0.25 / mf).sqrt()),
        exact: true,
    })
}

/// Anchor policy of the multi-dimensional Kolmogorov supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorPolicy {
    /// All pooled per-axis coordinates: attains the exact empirical supremum.
    FullGrid,
    /// At most this many anchors per axis, quantile-spaced over the pooled
    /// coordinates; yields a lower bound and flags the report approximate.
    Subsample(usize),
}

const MAX_GRID_CELLS: usize = 1 << 24;

/// Kolmogorov distance between two empirical measures over lower-left
/// rectangles `(-inf, a_1] x ... x (-inf, a_d]`.
///
/// The supremum over all rectangles is attained on the grid of pooled
/// per-axis sample coordinates; the evaluation sweeps the last axis while
/// maintaining a (d-1)-dimensional count grid, so memory is
/// `prod_{j<d} anchors_j`.
pub fn kolmogorov_multid(
    sample_x: &[Vec<f64>],
    sample_g: &[Vec<f64>],
    policy: AnchorPolicy,
) -> Result<DistanceReport> {
    if sample_x.is_empty() || sample_g.is_empty() {
        return Err(Error::Empty("Kolmogorov statistic of an empty sample".into()));
    }
    let d = sample_x[0].len();
    if d == 0 || sample_g[0].len() != d {
        return Err(Error::SampleMismatch(format!(
            "dimension mismatch: {} vs {}",
            d,
            sample_g[0].len()
        )));
    }
    if sample_x.iter().any(|p| p.len() != d) || sample_g.iter().any(|p| p.len() != d) {
        return Err(Error::SampleMismatch("ragged sample rows".into()));
    }
    if d > 4 && matches!(policy, AnchorPolicy::FullGrid) {
        return Err(Error::CostCap(
            "d > 4 requires an explicit anchor subsampling policy".into(),
        ));
    }

    // pooled, deduplicated coordinates per axis
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut coords: Vec<f64> = sample_x.iter().chain(sample_g).map(|p| p[j]).collect();
        coords.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
        coords.dedup();
        if let AnchorPolicy::Subsample(cap) = policy {
            if cap == 0 {
                return Err(Error::Domain("anchor cap must be >= 1".into()));
            }
            if coords.len() > cap {
                let len = coords.len();
                let mut picked = Vec::with_capacity(cap);
                for i in 1..=cap {
                    picked.push(coords[i * len / cap - 1]);
                }
                picked.dedup();
                coords = picked;
            }
        }
        anchors.push(coords);
    }
    let exact = matches!(policy, AnchorPolicy::FullGrid);

    let cells: usize = anchors[..d - 1].iter().map(|a| a.len()).try_fold(1usize, |acc, l| {
        acc.checked_mul(l).filter(|&c| c <= MAX_GRID_CELLS)
    })
    .ok_or_else(|| Error::CostCap(format!(
        "anchor grid exceeds {MAX_GRID_CELLS} cells; subsample anchors"
    )))?;

    // points tagged +1 (X) / -1 (G), sorted by last coordinate
    let mut points: Vec<(&[f64], i64)> = sample_x
        .iter()
        .map(|p| (p.as_slice(), 1i64))
        .chain(sample_g.iter().map(|p| (p.as_slice(), -1i64)))
        .collect();
    points.sort_by(|a, b| a.0[d - 1].partial_cmp(&b.0[d - 1]).expect("no NaN samples"));

    // strides of the (d-1)-dimensional grid
    let mut strides = vec![1usize; d.saturating_sub(1)];
    for j in (0..d.saturating_sub(1)).rev() {
        if j + 1 < d - 1 {
            strides[j] = strides[j + 1] * anchors[j + 1].len();
        }
    }

    let cell_of = |p: &[f64]| -> Option<usize> {
        let mut lin = 0usize;
        for j in 0..d - 1 {
            // first anchor >= coordinate; beyond the last anchor the point
            // lies in no anchored rectangle
            let idx = anchors[j].partition_point(|&a| a < p[j]);
            if idx == anchors[j].len() {
                return None;
            }
            lin += idx * strides[j];
        }
        Some(lin)
    };

    let mut grid = vec![0i64; cells];
    let mut prefix = vec![0i64; cells];
    let mut sup: i64 = 0;
    let mut next_point = 0usize;
    for &z in &anchors[d - 1] {
        while next_point < points.len() && points[next_point].0[d - 1] <= z {
            let (p, w) = points[next_point];
            if let Some(cell) = cell_of(p) {
                grid[cell] += w;
            }
            next_point += 1;
        }
        prefix.copy_from_slice(&grid);
        for (j, stride) in strides.iter().enumerate() {
            let axis_len = anchors[j].len();
            if axis_len <= 1 {
                continue;
            }
            // prefix-sum along axis j of the flattened grid
            let block = stride * axis_len;
            for base in (0..cells).step_by(block) {
                for off in 0..*stride {
                    let mut acc = 0i64;
                    for i in 0..axis_len {
                        let idx = base + off + i * stride;
                        acc += prefix[idx];
                        prefix[idx] = acc;
                    }
                }
            }
        }
        for &v in &prefix {
            sup = sup.max(v.abs());
        }
    }

    let mx = sample_x.len() as f64;
    let mg = sample_g.len() as f64;
    // two-sample empirical measures differ in mass per point; the statistic
    // here is defined for equal sample sizes and scaled by the X size
    if sample_x.len() != sample_g.len() {
        return Err(Error::SampleMismatch(format!(
            "Kolmogorov grid statistic requires equal sample sizes, got {} vs {}",
            sample_x.len(),
            sample_g.len()
        )));
    }
    Ok(DistanceReport {
        kind: DistanceKind::KolmogorovMultid,
        d,
        value: sup as f64 / mx,
        m: sample_x.len(),
        std_error: Some((0.25 / mx + 0.25 / mg).sqrt()),
        exact,
    })
}

/// theta-Wasserstein distance between two equal-size 1-D empirical measures
/// via the sorted (quantile) coupling, which is optimal in one dimension.
pub fn wasserstein_sorted(sample_a: &[f64], sample_b: &[f64], theta: f64) -> Result<DistanceReport> {
    if sample_a.is_empty() {
        return Err(Error::Empty("Wasserstein distance of an empty sample".into()));
    }
    if sample_a.len() != sample_b.len() {
        return Err(Error::SampleMismatch(format!(
            "equal sizes required, got {} vs {}",
            sample_a.len(),
            sample_b.len()
        )));
    }
    if !theta.is_finite() || theta < 1.0 {
        return Err(Error::Domain(format!("theta must be >= 1, got {theta}")));
    }
    let m = sample_a.len();
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("no NaN samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("no NaN samples"));
    let costs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(theta)).collect();
    let mean = costs.iter().sum::<f64>() / m as f64;
    let value = mean.powf(1.0 / theta);
    let std_error = if m > 1 && mean > 0.0 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        Some(value / (theta * mean) * (var / m as f64).sqrt())
    } else {
        Some(0.0)
    };
    Ok(DistanceReport {
        kind: DistanceKind::WassersteinSorted,
        d: 1,
        value,
        m,
        std_error,
        exact: true,
    })
}

/// Default size cap of the assignment solver.
pub const ASSIGNMENT_COST_CAP: usize = 2048;

/// Exact 1-Wasserstein distance between two equal-size empirical measures in
/// any dimension: minimum-cost perfect matching under Euclidean cost.
pub fn wasserstein_assignment(sample_a: &[Vec<f64>], sample_b: &[Vec<f64>]) -> Result<DistanceReport> {
    wasserstein_assignment_with_cap(sample_a, sample_b, ASSIGNMENT_COST_CAP)
}

pub fn wasserstein_assignment_with_cap(
    sample_a: &[Vec<f64>],
    sample_b: &[Vec<f64>],
    cap: usize,
) -> Result<DistanceReport> {
    if sample_a.is_empty() {
        return Err(Error::Empty("Wasserstein distance of an empty sample".into()));
    }
    if sample_a.len() != sample_b.len() {
        return Err(Error::SampleMismatch(format!(
            "equal sizes required, got {} vs {}",
            sample_a.len(),
            sample_b.len()
        )));
    }
    let m = sample_a.len();
    if m > cap {
        return Err(Error::CostCap(format!(
            "assignment on {m} points exceeds cap {cap}"
        )));
    }
    let d = sample_a[0].len();
    if sample_a.iter().chain(sample_b).any(|p| p.len() != d) {
        return Err(Error::SampleMismatch("ragged sample rows".into()));
    }
    let mut cost = vec![0.0f64; m * m];
    for (i, pa) in sample_a.iter().enumerate() {
        for (j, pb) in sample_b.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..d {
                let diff = pa[k] - pb[k];
                s += diff * diff;
            }
            cost[i * m + j] = s.sqrt();
        }
    }
    let matching = min_cost_assignment(&cost, m);
    let costs: Vec<f64> = matching.iter().enumerate().map(|(i, &j)| cost[i * m + j]).collect();
    let mean = costs.iter().sum::<f64>() / m as f64;
    let std_error = if m > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        Some((var / m as f64).sqrt())
    } else {
        Some(0.0)
    };
    Ok(DistanceReport {
        kind: DistanceKind::WassersteinAssignment,
        d,
        value: mean,
        m,
        std_error,
        exact: true,
    })
}

/// Dense shortest-augmenting-path assignment with potentials (O(n^3)).
/// Returns for each row the matched column.
fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    const INF: f64 = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Right-hand side of the dimension-logarithmic comparison inequality:
/// `d_K <= 3 log^{1/4}(d+1) sqrt(W_1)`.
pub fn comparison_rhs(d: usize, w1: f64) -> f64 {
    debug_assert!(d >= 1 && w1 >= 0.0);
    3.0 * ((d as f64 + 1.0).ln()).powf(0.25) * w1.sqrt()
}

/// One step of the recursion bounding the Gaussian rectangle-derivative
/// constant: `f(t) = phi(t) + t Phi(t)`.
pub fn theta_bound_step(t: f64) -> f64 {
    normal_pdf(t) + t * normal_cdf(t)
}

/// The recursion values `b_1 = 1/sqrt(2 pi)`, `b_{d+1} = f(b_d)`, for
/// `d = 1..=dmax`. Each `b_d` is bounded by `sqrt(2 ln(d+1))`.
pub fn theta_bound_sequence(dmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dmax);
    let mut b = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for _ in 0..dmax {
        out.push(b);
        b = theta_bound_step(b);
    }
    out
}

/// Stein-matrix Wasserstein bound
/// `W_theta <= D(d, theta) (sum_{ij} E|tau_{ij} - delta_{ij}|^theta)^{1/theta}`
/// with `D = c_theta d^{1-1/theta}` for `theta in [1,2)` and
/// `c_theta d^{1-2/theta}` for `theta >= 2`, `c_theta = (E|G|^theta)^{1/theta}`.
pub fn stein_wasserstein_bound(d: usize, theta: f64, moment_sum: f64) -> f64 {
    debug_assert!(theta >= 1.0 && moment_sum >= 0.0 && d >= 1);
    let c_theta = gaussian_abs_moment(theta).powf(1.0 / theta);
    let df = d as f64;
    let dim_factor = if theta < 2.0 { df.powf(1.0 - 1.0 / theta) } else { df.powf(1.0 - 2.0 / theta) };
    c_theta * dim_factor * moment_sum.powf(1.0 / theta)
}

/// One-dimensional Stein bound on the Kolmogorov distance,
/// `d_K <= E|tau(X) - 1|`; the identity exists as a named bound so reports
/// can cite it.
pub fn stein_kolmogorov_bound(abs_dev: f64) -> f64 {
    debug_assert!(abs_dev >= 0.0);
    abs_dev
}

/// Multidimensional Stein bound on W1:
/// `W_1 <= sqrt(sum_{ij} E[(tau_{ij} - delta_{ij})^2])`.
pub fn stein_w1_bound(second_moment_sum: f64) -> f64 {
    debug_assert!(second_moment_sum >= 0.0);
    second_moment_sum.sqrt()
}
