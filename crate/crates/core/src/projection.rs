//! L2 projection onto the cone of nondecreasing maps, by two equivalent
//! routes: differentiating the lower convex envelope of the cumulative
//! primitive, and pool-adjacent-violators. Also the periodic rearrangement
//! operators for torus data and the convex-domination comparator.

use crate::error::{ensure_finite, Error, Result};
use crate::grid::Grid;
use crate::transport::TransportMap;

/// One node of the cumulative primitive: mass coordinate `m` and value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopePoint {
    pub m: f64,
    pub value: f64,
}

/// Cumulative primitive of cellwise values: `N+1` nodes at the cell edges,
/// node `k` carrying `(k/N, (1/N) * sum of the first k values)`.
pub fn cumulative_primitive(values: &[f64]) -> Vec<EnvelopePoint> {
    let n = values.len();
    let nf = n as f64;
    let mut points = Vec::with_capacity(n + 1);
    points.push(EnvelopePoint { m: 0.0, value: 0.0 });
    let mut acc = 0.0;
    for (k, &v) in values.iter().enumerate() {
        acc += v;
        points.push(EnvelopePoint {
            m: (k + 1) as f64 / nf,
            value: acc / nf,
        });
    }
    points
}

/// Vertices of the lower convex hull of a point sequence with strictly
/// increasing `m`. Endpoints are always retained; interior points that lie on
/// or above a chord are dropped, so the remaining slopes strictly increase.
pub fn lower_convex_envelope(points: &[EnvelopePoint]) -> Result<Vec<EnvelopePoint>> {
    if points.len() < 2 {
        return Err(Error::invalid(
            "envelope input",
            "need at least two points",
        ));
    }
    for w in points.windows(2) {
        if !(w[1].m > w[0].m) {
            return Err(Error::invalid(
                "envelope input",
                "m-coordinates must be strictly increasing",
            ));
        }
    }
    let mut hull: Vec<EnvelopePoint> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b unless slope(a,b) < slope(b,p), i.e. b lies strictly
            // below the chord a--p
            let keep = (b.value - a.value) * (p.m - b.m) < (p.value - b.value) * (b.m - a.m);
            if keep {
                break;
            }
            hull.pop();
        }
        hull.push(p);
    }
    Ok(hull)
}

/// Metric projection of raw cell values onto the cone of nondecreasing maps:
/// the cellwise slopes of the lower convex envelope of the cumulative
/// primitive. Monotone input is returned unchanged.
pub fn project_cone(values: &[f64]) -> Result<TransportMap> {
    ensure_finite(values, "projection input")?;
    let grid = Grid::new(values.len())?;
    if values.windows(2).all(|w| w[0] <= w[1]) {
        return TransportMap::new(grid, values.to_vec());
    }
    let hull = lower_convex_envelope(&cumulative_primitive(values))?;
    let n = values.len();
    let nf = n as f64;
    let mut out = vec![0.0; n];
    for seg in hull.windows(2) {
        let slope = (seg[1].value - seg[0].value) / (seg[1].m - seg[0].m);
        // hull vertices sit on cell edges, so these indices are exact
        let a = (seg[0].m * nf).round() as usize;
        let b = (seg[1].m * nf).round() as usize;
        for v in &mut out[a..b] {
            *v = slope;
        }
    }
    // hull slopes increase mathematically; repair ulp-level division rounding
    for i in 1..n {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    TransportMap::new(grid, out)
}

/// Weighted least-squares monotone fit by pool-adjacent-violators. With
/// uniform weights this coincides with [`project_cone`].
pub fn project_cone_pava(values: &[f64], weights: &[f64]) -> Result<TransportMap> {
    ensure_finite(values, "isotonic input")?;
    ensure_finite(weights, "isotonic weights")?;
    if weights.len() != values.len() {
        return Err(Error::invalid(
            "isotonic weights",
            "length mismatch with values",
        ));
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::invalid("isotonic weights", "nonpositive weight"));
    }
    let grid = Grid::new(values.len())?;

    // block stack: (mean, weight, count)
    let mut means: Vec<f64> = Vec::with_capacity(values.len());
    let mut ws: Vec<f64> = Vec::with_capacity(values.len());
    let mut counts: Vec<usize> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        means.push(y);
        ws.push(w);
        counts.push(1);
        while means.len() >= 2 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, w2, c2) = (means.pop().unwrap(), ws.pop().unwrap(), counts.pop().unwrap());
            let last = means.len() - 1;
            let merged_w = ws[last] + w2;
            means[last] = (means[last] * ws[last] + m2 * w2) / merged_w;
            ws[last] = merged_w;
            counts[last] += c2;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, count) in means.into_iter().zip(counts) {
        out.extend(std::iter::repeat(mean).take(count));
    }
    TransportMap::new(grid, out)
}

/// Periodic rearrangement, normalized representative: values are reduced mod
/// one to `[0,1)`, sorted ascending (stable in the original index), assigned
/// to cells in order, then shifted by the unique integer putting the mean of
/// `out - id` into `[-1/2, 1/2)`. The pushforward onto the torus is
/// preserved; the representative choice resolves the integer-shift freedom.
pub fn periodic_rearrange(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut fracs: Vec<f64> = values.iter().map(|&v| fract_unit(v)).collect();
    fracs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mean_id = 0.5; // midpoint grid mean
    let mean_diff = fracs.iter().sum::<f64>() / n as f64 - mean_id;
    let c = -((mean_diff + 0.5).floor());
    if c != 0.0 {
        for f in &mut fracs {
            *f += c;
        }
    }
    fracs
}

/// Periodic rearrangement, nearest representative: among all nondecreasing
/// maps spanning at most one period with the same torus pushforward (the
/// cyclic windows of the sorted fractional parts, shifted by integers),
/// returns the one closest to the input in L2. Tracks winding, so inputs
/// already nondecreasing within one period window are fixed points; this is
/// the variant that stays non-expansive along trajectories crossing period
/// boundaries.
pub fn periodic_rearrange_nearest(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut fracs: Vec<f64> = values.iter().map(|&v| fract_unit(v)).collect();
    fracs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));

    let mut best_p = 0;
    let mut best_c = 0.0;
    let mut best_d2 = f64::INFINITY;
    let mut window = vec![0.0; n];
    for p in 0..n {
        for i in 0..n {
            let j = p + i;
            window[i] = if j < n { fracs[j] } else { fracs[j - n] + 1.0 };
        }
        let mean_gap = values
            .iter()
            .zip(&window)
            .map(|(y, w)| y - w)
            .sum::<f64>()
            / n as f64;
        let c = mean_gap.round();
        let d2: f64 = values
            .iter()
            .zip(&window)
            .map(|(y, w)| {
                let d = w + c - y;
                d * d
            })
            .sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best_p = p;
            best_c = c;
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let j = best_p + i;
        let w = if j < n { fracs[j] } else { fracs[j - n] + 1.0 };
        out.push(w + best_c);
    }
    out
}

#[inline]
fn fract_unit(v: f64) -> f64 {
    let f = v - v.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Convex even test integrands for the domination order.
#[derive(Clone, Copy, Debug)]
pub enum PsiTest {
    Abs,
    Square,
    Quartic,
    ExpAbsMinusOne,
    /// `(|r| - c)_+`
    Hinge(f64),
}

impl PsiTest {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            PsiTest::Abs => r.abs(),
            PsiTest::Square => r * r,
            PsiTest::Quartic => r * r * r * r,
            PsiTest::ExpAbsMinusOne => r.abs().exp() - 1.0,
            PsiTest::Hinge(c) => (r.abs() - c).max(0.0),
        }
    }
}

/// Default finite certificate family for [`dominates`].
pub fn default_psi_family() -> Vec<PsiTest> {
    vec![
        PsiTest::Abs,
        PsiTest::Square,
        PsiTest::Quartic,
        PsiTest::ExpAbsMinusOne,
        PsiTest::Hinge(0.5),
        PsiTest::Hinge(1.0),
        PsiTest::Hinge(2.0),
        PsiTest::Hinge(4.0),
    ]
}

/// True iff the mean of every test integrand on `y` is at most its mean on
/// `x` (within 1e-12). A finite certificate for the convex domination order.
pub fn dominates(y: &[f64], x: &[f64], psi_family: &[PsiTest]) -> bool {
    assert_eq!(y.len(), x.len(), "dominates: length mismatch");
    let n = y.len() as f64;
    psi_family.iter().all(|psi| {
        let my: f64 = y.iter().map(|&v| psi.eval(v)).sum::<f64>() / n;
        let mx: f64 = x.iter().map(|&v| psi.eval(v)).sum::<f64>() / n;
        my <= mx + 1e-12
    })
}
