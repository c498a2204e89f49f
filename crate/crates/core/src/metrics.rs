//! Front-quality metrics: Pareto hypervolume, hypervolume difference to an
//! ideal front, an average-distance (IGD-style) R2 indicator and cumulative
//! regret against a known Pareto-optimal point.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::pareto::{non_dominated_indices, Evaluation, ObjectiveVector};

/// Monte-Carlo sample count for hypervolume with more than four objectives.
pub const MC_SAMPLES: usize = 200_000;
const MC_SEED: u64 = 0x5eed_0f_4b;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(pub Vec<f64>);

impl ReferencePoint {
    /// Coordinate-wise maximum over `points` plus `margin` times the
    /// coordinate range (or of `max(|max|, 1)` when the range is zero).
    pub fn enclosing<'a, I>(points: I, margin: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        for p in points {
            if hi.is_empty() {
                lo = p.to_vec();
                hi = p.to_vec();
                continue;
            }
            check_dims(hi.len(), p.len())?;
            for (j, v) in p.iter().enumerate() {
                lo[j] = lo[j].min(*v);
                hi[j] = hi[j].max(*v);
            }
        }
        if hi.is_empty() {
            return Err(Error::Contract("reference point needs at least one point".into()));
        }
        Ok(Self(
            hi.iter()
                .zip(&lo)
                .map(|(h, l)| {
                    let range = h - l;
                    let span = if range > 0.0 { range } else { h.abs().max(1.0) };
                    h + margin * span
                })
                .collect(),
        ))
    }
}

/// Dense sample of a true Pareto front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealFront {
    points: Vec<ObjectiveVector>,
}

impl IdealFront {
    /// Fails if any point dominates another or `k` differs between points.
    pub fn new(points: Vec<ObjectiveVector>) -> Result<Self> {
        if let Some(first) = points.first() {
            for p in &points {
                check_dims(first.k(), p.k())?;
            }
        }
        let keep = non_dominated_indices(&points);
        if keep.len() != points.len() {
            let bad = (0..points.len()).find(|i| !keep.contains(i)).unwrap_or(0);
            return Err(Error::Contract(format!(
                "ideal front point {bad} {:?} is dominated or duplicated",
                &points[bad][..]
            )));
        }
        Ok(Self { points })
    }

    /// Keeps only the non-dominated subset of `points`.
    pub fn filtered(points: Vec<ObjectiveVector>) -> Self {
        let keep = non_dominated_indices(&points);
        Self {
            points: keep.into_iter().map(|i| points[i].clone()).collect(),
        }
    }

    pub fn points(&self) -> &[ObjectiveVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> Option<usize> {
        self.points.first().map(|p| p.k())
    }
}

/// Hypervolume with its Monte-Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn check_front<P: AsRef<[f64]>>(front: &[P], reference: &ReferencePoint) -> Result<()> {
    for p in front {
        let p = p.as_ref();
        check_dims(reference.0.len(), p.len())?;
        if p.iter().zip(&reference.0).any(|(a, r)| a > r || a.is_nan()) {
            return Err(Error::Contract(format!(
                "front point {p:?} does not weakly dominate reference {:?}",
                reference.0
            )));
        }
    }
    Ok(())
}

/// Volume dominated by `front` and bounded by `reference` (minimization).
/// Exact for `k <= 4`; Monte-Carlo with [`MC_SAMPLES`] samples beyond.
pub fn hypervolume<P: AsRef<[f64]>>(front: &[P], reference: &ReferencePoint) -> Result<f64> {
    Ok(hypervolume_estimate(front, reference)?.value)
}

pub fn hypervolume_estimate<P: AsRef<[f64]>>(front: &[P], reference: &ReferencePoint) -> Result<HypervolumeEstimate> {
    check_front(front, reference)?;
    if front.is_empty() {
        return Ok(HypervolumeEstimate {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let k = reference.0.len();
    if k <= 4 {
        let pts: Vec<Vec<f64>> = front.iter().map(|p| p.as_ref().to_vec()).collect();
        return Ok(HypervolumeEstimate {
            value: exact(pts, &reference.0),
            std_error: 0.0,
        });
    }
    let lower = coordinate_min(front.iter().map(|p| p.as_ref()), k);
    let sampler = McSampler::new(&lower, &reference.0, MC_SAMPLES, MC_SEED);
    Ok(sampler.estimate(front))
}

fn coordinate_min<'a>(points: impl Iterator<Item = &'a [f64]>, k: usize) -> Vec<f64> {
    let mut lower = vec![f64::INFINITY; k];
    for p in points {
        for (l, v) in lower.iter_mut().zip(p) {
            *l = l.min(*v);
        }
    }
    lower
}

fn exact(mut pts: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    match reference.len() {
        1 => pts.iter().map(|p| reference[0] - p[0]).fold(0.0, f64::max),
        2 => hv2(&mut pts, reference),
        3 => hv3(&mut pts, reference),
        _ => sweep(&mut pts, reference),
    }
}

fn hv2(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut vol = 0.0;
    let mut ceiling = reference[1];
    for p in pts.iter() {
        if p[1] < ceiling {
            vol += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    vol
}

/// Sweep along the last coordinate, maintaining the 2-D staircase of the
/// points seen so far.
fn hv3(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    // staircase sorted by x ascending, y strictly descending
    let mut stair: Vec<(f64, f64)> = Vec::new();
    let mut vol = 0.0;
    for i in 0..pts.len() {
        let (x, y) = (pts[i][0], pts[i][1]);
        let pos = stair.partition_point(|s| s.0 <= x);
        let dominated = pos > 0 && stair[pos - 1].1 <= y;
        if !dominated {
            let start = if pos > 0 && stair[pos - 1].0 == x { pos - 1 } else { pos };
            let mut end = pos;
            while end < stair.len() && stair[end].1 >= y {
                end += 1;
            }
            stair.splice(start..end, std::iter::once((x, y)));
        }
        let next_z = if i + 1 < pts.len() { pts[i + 1][2] } else { reference[2] };
        let depth = next_z - pts[i][2];
        if depth > 0.0 {
            let mut area = 0.0;
            let mut ceiling = reference[1];
            for &(sx, sy) in &stair {
                area += (reference[0] - sx) * (ceiling - sy);
                ceiling = sy;
            }
            vol += area * depth;
        }
    }
    vol
}

fn sweep(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let k = reference.len();
    pts.sort_by(|a, b| a[k - 1].total_cmp(&b[k - 1]));
    let mut vol = 0.0;
    for i in 0..pts.len() {
        let next_z = if i + 1 < pts.len() { pts[i + 1][k - 1] } else { reference[k - 1] };
        let depth = next_z - pts[i][k - 1];
        if depth > 0.0 {
            let slice: Vec<Vec<f64>> = pts[..=i].iter().map(|p| p[..k - 1].to_vec()).collect();
            vol += exact(slice, &reference[..k - 1]) * depth;
        }
    }
    vol
}

/// Fixed uniform samples in a box, reused across fronts so that
/// differences between estimates share their sampling noise.
#[derive(Debug, Clone)]
pub struct McSampler {
    k: usize,
    samples: Vec<f64>,
    box_volume: f64,
}

impl McSampler {
    pub fn new(lower: &[f64], upper: &[f64], n: usize, seed: u64) -> Self {
        let k = lower.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n * k);
        for _ in 0..n {
            for j in 0..k {
                samples.push(lower[j] + rng.random::<f64>() * (upper[j] - lower[j]));
            }
        }
        let box_volume = lower.iter().zip(upper).map(|(l, u)| (u - l).max(0.0)).product();
        Self { k, samples, box_volume }
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Marks every sample dominated by `p` (weakly).
    pub fn mark(&self, p: &[f64], covered: &mut [bool]) {
        for (s, c) in self.samples.chunks_exact(self.k).zip(covered.iter_mut()) {
            if !*c && p.iter().zip(s).all(|(a, b)| a <= b) {
                *c = true;
            }
        }
    }

    pub fn estimate_from_mask(&self, covered: &[bool]) -> HypervolumeEstimate {
        let n = self.len() as f64;
        let frac = covered.iter().filter(|c| **c).count() as f64 / n;
        HypervolumeEstimate {
            value: self.box_volume * frac,
            std_error: self.box_volume * (frac * (1.0 - frac) / n).sqrt(),
        }
    }

    pub fn estimate<P: AsRef<[f64]>>(&self, front: &[P]) -> HypervolumeEstimate {
        let mut covered = vec![false; self.len()];
        for p in front {
            self.mark(p.as_ref(), &mut covered);
        }
        self.estimate_from_mask(&covered)
    }
}

/// `HV(ideal) - HV(estimated)`, clamped at zero. An empty estimate scores
/// the full ideal hypervolume.
pub fn phv_difference<P: AsRef<[f64]>>(estimated: &[P], ideal: &IdealFront, reference: &ReferencePoint) -> Result<f64> {
    check_front(estimated, reference)?;
    check_front(ideal.points(), reference)?;
    let k = reference.0.len();
    if k <= 4 {
        let hi = hypervolume(ideal.points(), reference)?;
        let he = hypervolume(estimated, reference)?;
        return Ok((hi - he).max(0.0));
    }
    let lower = coordinate_min(
        ideal.points().iter().map(|p| &p[..]).chain(estimated.iter().map(|p| p.as_ref())),
        k,
    );
    let sampler = McSampler::new(&lower, &reference.0, MC_SAMPLES, MC_SEED);
    Ok((sampler.estimate(ideal.points()).value - sampler.estimate(estimated).value).max(0.0))
}

/// Mean over ideal points of the Euclidean distance to the nearest
/// estimated point; `+inf` for an empty estimate.
pub fn r2_distance<P: AsRef<[f64]>>(estimated: &[P], ideal: &IdealFront) -> Result<f64> {
    if ideal.is_empty() {
        return Err(Error::Contract("R2 distance needs a non-empty ideal front".into()));
    }
    if estimated.is_empty() {
        return Ok(f64::INFINITY);
    }
    let k = ideal.k().unwrap_or(0);
    for e in estimated {
        check_dims(k, e.as_ref().len())?;
    }
    let total: f64 = ideal
        .points()
        .iter()
        .map(|y| {
            estimated
                .iter()
                .map(|e| {
                    e.as_ref()
                        .iter()
                        .zip(y.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(total / ideal.len() as f64)
}

/// Euclidean norm of the per-objective cumulative gaps
/// `sum_t (F_i(x_t) - F_i(x*))`.
pub fn regret(trace: &[Evaluation], x_star_values: &[f64]) -> Result<f64> {
    Ok(regret_curve(trace, x_star_values)?.last().copied().unwrap_or(0.0))
}

/// Regret after each prefix of `trace`.
pub fn regret_curve(trace: &[Evaluation], x_star_values: &[f64]) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; x_star_values.len()];
    let mut out = Vec::with_capacity(trace.len());
    for e in trace {
        check_dims(x_star_values.len(), e.output.k())?;
        for (s, (y, star)) in sums.iter_mut().zip(e.output.iter().zip(x_star_values)) {
            *s += y - star;
        }
        out.push(sums.iter().map(|s| s * s).sum::<f64>().sqrt());
    }
    Ok(out)
}

/// Incremental hypervolume-difference tracking for a growing archive.
///
/// For `k > 4` the Monte-Carlo samples are drawn once in `[lower, ref]`
/// and each archived point only marks additional samples, which is valid
/// because an archive's dominated region never shrinks.
#[derive(Debug, Clone)]
pub struct PhvTracker {
    reference: ReferencePoint,
    ideal_hv: f64,
    mc: Option<(McSampler, Vec<bool>)>,
}

impl PhvTracker {
    /// `lower` must bound every point that will be passed to `update`.
    pub fn new(ideal: &IdealFront, reference: &ReferencePoint, lower: &[f64]) -> Result<Self> {
        check_front(ideal.points(), reference)?;
        let k = reference.0.len();
        if k <= 4 {
            return Ok(Self {
                reference: reference.clone(),
                ideal_hv: hypervolume(ideal.points(), reference)?,
                mc: None,
            });
        }
        let sampler = McSampler::new(lower, &reference.0, MC_SAMPLES, MC_SEED);
        let ideal_hv = sampler.estimate(ideal.points()).value;
        let covered = vec![false; sampler.len()];
        Ok(Self {
            reference: reference.clone(),
            ideal_hv,
            mc: Some((sampler, covered)),
        })
    }

    pub fn ideal_hypervolume(&self) -> f64 {
        self.ideal_hv
    }

    /// `front` is the full current archive front; `added` the points newly
    /// inserted since the last call.
    pub fn update<P: AsRef<[f64]>>(&mut self, front: &[P], added: &[P]) -> Result<f64> {
        check_front(front, &self.reference)?;
        let hv = match &mut self.mc {
            None => hypervolume(front, &self.reference)?,
            Some((sampler, covered)) => {
                for p in added {
                    sampler.mark(p.as_ref(), covered);
                }
                sampler.estimate_from_mask(covered).value
            }
        };
        Ok((self.ideal_hv - hv).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::InputPoint;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn rp(v: &[f64]) -> ReferencePoint {
        ReferencePoint(v.to_vec())
    }

    /// Midpoint-rule counting on a regular grid.
    fn grid_oracle(front: &[Vec<f64>], reference: &[f64], lower: &[f64], cells: usize) -> f64 {
        let k = reference.len();
        let h: Vec<f64> = (0..k).map(|j| (reference[j] - lower[j]) / cells as f64).collect();
        let total = cells.pow(k as u32);
        let mut count = 0usize;
        let mut c = vec![0.0; k];
        for idx in 0..total {
            let mut rem = idx;
            for j in 0..k {
                c[j] = lower[j] + (rem % cells) as f64 * h[j] + 0.5 * h[j];
                rem /= cells;
            }
            if front.iter().any(|p| p.iter().zip(&c).all(|(a, b)| a <= b)) {
                count += 1;
            }
        }
        count as f64 * h.iter().product::<f64>()
    }

    #[test]
    fn hv_examples() {
        assert_eq!(hypervolume(&[ov(&[0., 0.])], &rp(&[1., 1.])).unwrap(), 1.0);
        assert_eq!(hypervolume(&[ov(&[1., 2.]), ov(&[2., 1.])], &rp(&[3., 3.])).unwrap(), 3.0);
        let three = [vec![1., 2.], vec![2., 1.], vec![1.5, 1.5]];
        let v = hypervolume(&three, &rp(&[3., 3.])).unwrap();
        assert!((v - 3.25).abs() < 1e-12);
        let g = grid_oracle(&three, &[3., 3.], &[0., 0.], 1000);
        assert!((g - 3.25).abs() < 1e-3);
    }

    #[test]
    fn hv_rejects_points_beyond_reference() {
        let err = hypervolume(&[ov(&[0., 4.])], &rp(&[3., 3.])).unwrap_err();
        assert!(err.to_string().contains("[0.0, 4.0]"));
    }

    #[test]
    fn hv_empty_front_is_zero() {
        let empty: Vec<ObjectiveVector> = vec![];
        assert_eq!(hypervolume(&empty, &rp(&[1., 1.])).unwrap(), 0.0);
    }

    #[test]
    fn hv_3d_and_4d_against_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [3usize, 4] {
            for _ in 0..3 {
                let front: Vec<Vec<f64>> = (0..6).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
                let r = vec![1.0; k];
                let exact_v = hypervolume(&front, &rp(&r)).unwrap();
                let cells = if k == 3 { 120 } else { 40 };
                let g = grid_oracle(&front, &r, &vec![0.0; k], cells);
                assert!((exact_v - g).abs() / exact_v < 2e-2, "k={k}: {exact_v} vs {g}");
            }
        }
    }

    #[test]
    fn hv_3d_known_values() {
        // single box
        assert!((hypervolume(&[vec![0.5, 0.5, 0.5]], &rp(&[1., 1., 1.])).unwrap() - 0.125).abs() < 1e-15);
        // two boxes overlapping in [0.5,1]^3 : 0.5*1*1*... by inclusion-exclusion
        let f = [vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]];
        let want = 0.25 + 0.25 - 0.125;
        assert!((hypervolume(&f, &rp(&[1., 1., 1.])).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn hv_mc_for_many_objectives() {
        // a single point's box volume is exact-known
        let p = vec![0.5; 5];
        let est = hypervolume_estimate(&[p.clone(), vec![0.9; 5]], &rp(&[1.0; 5])).unwrap();
        let want = 0.5f64.powi(5);
        assert!((est.value - want).abs() < 4.0 * est.std_error.max(1e-3), "{est:?}");
    }

    #[test]
    fn phv_difference_examples() {
        let ideal = IdealFront::new(vec![ov(&[1., 2.]), ov(&[2., 1.]), ov(&[1.5, 1.5])]).unwrap();
        let r = rp(&[3., 3.]);
        assert_eq!(phv_difference(ideal.points(), &ideal, &r).unwrap(), 0.0);
        let empty: Vec<ObjectiveVector> = vec![];
        assert_eq!(phv_difference(&empty, &ideal, &r).unwrap(), 3.25);
        let sub = phv_difference(&ideal.points()[..2], &ideal, &r).unwrap();
        assert!(sub > 0.0 && sub < 3.25);
        assert!((sub - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ideal_front_validation() {
        assert!(IdealFront::new(vec![ov(&[1., 1.]), ov(&[2., 2.])]).is_err());
        assert!(IdealFront::new(vec![ov(&[1., 1.]), ov(&[1., 1.])]).is_err());
        let f = IdealFront::filtered(vec![ov(&[1., 1.]), ov(&[2., 2.]), ov(&[0., 3.])]);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn r2_examples() {
        let ideal = IdealFront::new(vec![ov(&[0., 0.])]).unwrap();
        assert_eq!(r2_distance(&[ov(&[3., 4.])], &ideal).unwrap(), 5.0);
        assert_eq!(r2_distance(ideal.points(), &ideal).unwrap(), 0.0);
        let ideal2 = IdealFront::new(vec![ov(&[0., 0.]), ov(&[2., -1.])]).unwrap();
        let r = r2_distance(&[ov(&[0., 0.])], &ideal2).unwrap();
        assert!((r - 0.5 * 5f64.sqrt()).abs() < 1e-15);
        let ideal3 = IdealFront::filtered(vec![ov(&[0., 0.]), ov(&[2., 0.])]);
        // the filtered ideal keeps only (0,0); the unfiltered pair from the
        // worked example is checked directly on raw points
        assert_eq!(ideal3.len(), 1);
        let pair = IdealFront { points: vec![ov(&[0., 0.]), ov(&[2., 0.])] };
        assert_eq!(r2_distance(&[ov(&[0., 0.])], &pair).unwrap(), 1.0);
        let empty: Vec<ObjectiveVector> = vec![];
        assert_eq!(r2_distance(&empty, &ideal).unwrap(), f64::INFINITY);
    }

    fn eval(y: &[f64]) -> Evaluation {
        Evaluation {
            input: InputPoint(vec![0.0]),
            output: ov(y),
            iteration: 1,
        }
    }

    #[test]
    fn regret_examples() {
        let star = [1.0, 2.0];
        assert_eq!(regret(&[eval(&star), eval(&star)], &star).unwrap(), 0.0);
        assert_eq!(regret(&[eval(&[2., 2.]), eval(&[2., 2.])], &star).unwrap(), 2.0);
        assert_eq!(regret_curve(&[eval(&[2., 2.]), eval(&[2., 2.])], &star).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn reference_point_margin() {
        let pts = [vec![0.0, 1.0], vec![2.0, 3.0]];
        let r = ReferencePoint::enclosing(pts.iter().map(|p| p.as_slice()), 0.1).unwrap();
        assert!((r.0[0] - 2.2).abs() < 1e-12);
        assert!((r.0[1] - 3.2).abs() < 1e-12);
    }

    #[test]
    fn tracker_matches_direct_difference() {
        let ideal = IdealFront::new(vec![ov(&[0., 1.]), ov(&[0.5, 0.5]), ov(&[1., 0.])]).unwrap();
        let r = rp(&[2., 2.]);
        let mut t = PhvTracker::new(&ideal, &r, &[0., 0.]).unwrap();
        let front = [ov(&[1., 1.])];
        let d = t.update(&front, &front).unwrap();
        assert!((d - phv_difference(&front, &ideal, &r).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn tracker_monte_carlo_is_monotone() {
        let k = 5;
        let ideal = IdealFront::new(vec![ObjectiveVector::new(vec![0.0; k]).unwrap()]).unwrap();
        let r = rp(&vec![1.0; k]);
        let mut t = PhvTracker::new(&ideal, &r, &vec![0.0; k]).unwrap();
        let a = [ObjectiveVector::new(vec![0.6; k]).unwrap()];
        let b = [ObjectiveVector::new(vec![0.3; k]).unwrap()];
        let d1 = t.update(&a, &a).unwrap();
        let d2 = t.update(&b, &b).unwrap();
        assert!(d2 < d1);
        assert!((t.ideal_hypervolume() - 1.0).abs() < 1e-12);
    }
}
