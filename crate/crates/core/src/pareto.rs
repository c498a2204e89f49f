//! Search space, points, objective vectors and Pareto dominance.
//!
//! Everything is minimization. Dominance uses exact floating-point
//! comparisons; tolerances belong to the metrics, not here.

use std::ops::Deref;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dims(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::Contract("domain must have at least one dimension".into()));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Contract(format!(
                    "dimension {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        assert!(d >= 1, "domain must have at least one dimension");
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Clip each coordinate into the box.
    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Affine map from this box onto `[0, 1]^d`.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.lower[j]) / self.width(j))
            .collect()
    }

    /// Affine map from `[0, 1]^d` onto this box. The result is clipped so
    /// rounding never leaves the domain.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(j, v)| self.lower[j] + v * self.width(j))
            .collect();
        self.clip(&mut x);
        x
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> InputPoint {
        let coords = (0..self.dim())
            .map(|j| self.lower[j] + rng.random::<f64>() * self.width(j))
            .collect();
        InputPoint(coords)
    }
}

/// A point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputPoint(pub Vec<f64>);

impl Deref for InputPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for InputPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Objective values `(y_1, ..., y_k)` of one input, minimization convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    /// Validates `k >= 2` and that every entry is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Contract(format!(
                "objective vector needs k >= 2, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite objective value {bad}")));
        }
        Ok(Self(values))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// One expensive evaluation: an input, its objective values and the outer
/// iteration that produced it (0 for the initial design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub input: InputPoint,
    pub output: ObjectiveVector,
    pub iteration: usize,
}

/// `true` iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_dims(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

/// Dominance test for slices already known to share a length.
#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the non-dominated members of `points`, in input order.
/// Among exactly equal non-dominated vectors only the first index is kept.
pub fn non_dominated_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        for (j, q) in points.iter().enumerate() {
            let q = q.as_ref();
            if i != j && dominates_unchecked(q, p) {
                continue 'outer;
            }
            if j < i && q == p {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// The non-dominated subset of `points`, duplicates collapsed to one.
pub fn pareto_filter(points: &[ObjectiveVector]) -> Result<Vec<ObjectiveVector>> {
    if let Some(first) = points.first() {
        for p in points {
            check_dims(first.k(), p.k())?;
        }
    }
    Ok(non_dominated_indices(points)
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for InputPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Mutually non-dominated set of evaluations.
///
/// Not synchronized; an archive belongs to a single optimizer run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<Evaluation>,
    k: Option<usize>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Archive built by inserting `evals` in order.
    pub fn from_evaluations<'a>(evals: impl IntoIterator<Item = &'a Evaluation>) -> Result<Self> {
        let mut archive = Self::new();
        for e in evals {
            archive.insert(e.clone())?;
        }
        Ok(archive)
    }

    /// Inserts `e` unless some entry dominates or equals it; evicts entries
    /// that `e` dominates. Returns whether `e` was inserted.
    pub fn insert(&mut self, e: Evaluation) -> Result<bool> {
        match self.k {
            Some(k) => check_dims(k, e.output.k())?,
            None => self.k = Some(e.output.k()),
        }
        let y: &[f64] = &e.output;
        if self
            .entries
            .iter()
            .any(|a| dominates_unchecked(&a.output, y) || *a.output == *y)
        {
            return Ok(false);
        }
        self.entries.retain(|a| !dominates_unchecked(y, &a.output));
        self.entries.push(e);
        Ok(true)
    }

    pub fn entries(&self) -> &[Evaluation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Objective vectors of the archived entries (the Pareto front).
    pub fn front(&self) -> Vec<ObjectiveVector> {
        self.entries.iter().map(|e| e.output.clone()).collect()
    }

    /// Inputs of the archived entries (the Pareto set).
    pub fn pareto_set(&self) -> Vec<InputPoint> {
        self.entries.iter().map(|e| e.input.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn ev(v: &[f64]) -> Evaluation {
        Evaluation {
            input: InputPoint(vec![0.0]),
            output: ov(v),
            iteration: 0,
        }
    }

    fn sorted(mut v: Vec<ObjectiveVector>) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = v.drain(..).map(|o| o.into_inner()).collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 3.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[2.0, 2.0], &[1.0, 3.0]).unwrap());
    }

    #[test]
    fn dominance_dimension_mismatch() {
        assert!(matches!(
            dominates(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let pts = vec![ov(&[1., 3.]), ov(&[2., 2.]), ov(&[3., 1.]), ov(&[2., 3.])];
        // brute force over all ordered pairs
        let brute: Vec<ObjectiveVector> = pts
            .iter()
            .filter(|p| !pts.iter().any(|q| dominates(q, p).unwrap()))
            .cloned()
            .collect();
        assert_eq!(brute.len(), 3);
        assert_eq!(pareto_filter(&pts).unwrap(), brute);

        assert_eq!(pareto_filter(&[ov(&[0., 0.])]).unwrap(), vec![ov(&[0., 0.])]);
        assert_eq!(
            pareto_filter(&[ov(&[1., 1.]), ov(&[1., 1.])]).unwrap(),
            vec![ov(&[1., 1.])]
        );
        assert!(pareto_filter(&[]).unwrap().is_empty());
    }

    #[test]
    fn archive_examples() {
        let mut a = ParetoArchive::new();
        a.insert(ev(&[1., 3.])).unwrap();
        a.insert(ev(&[3., 1.])).unwrap();
        assert!(a.insert(ev(&[2., 2.])).unwrap());
        assert_eq!(
            sorted(a.front()),
            vec![vec![1., 3.], vec![2., 2.], vec![3., 1.]]
        );

        let mut a = ParetoArchive::new();
        a.insert(ev(&[1., 1.])).unwrap();
        assert!(!a.insert(ev(&[2., 2.])).unwrap());
        assert_eq!(sorted(a.front()), vec![vec![1., 1.]]);

        let mut a = ParetoArchive::new();
        a.insert(ev(&[2., 2.])).unwrap();
        assert!(a.insert(ev(&[1., 1.])).unwrap());
        assert_eq!(sorted(a.front()), vec![vec![1., 1.]]);
    }

    #[test]
    fn archive_keeps_first_duplicate() {
        let mut a = ParetoArchive::new();
        let mut first = ev(&[1., 2.]);
        first.iteration = 1;
        let mut second = ev(&[1., 2.]);
        second.iteration = 2;
        a.insert(first).unwrap();
        assert!(!a.insert(second).unwrap());
        assert_eq!(a.entries()[0].iteration, 1);
    }

    #[test]
    fn archive_rejects_mixed_k() {
        let mut a = ParetoArchive::new();
        a.insert(ev(&[1., 2.])).unwrap();
        assert!(a.insert(ev(&[1., 2., 3.])).is_err());
    }

    #[test]
    fn objective_vector_validation() {
        assert!(ObjectiveVector::new(vec![1.0]).is_err());
        assert!(ObjectiveVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ObjectiveVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn box_domain_validation_and_maps() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let b = BoxDomain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        let u = b.to_unit(&[2.5, 7.5]);
        assert_eq!(u, vec![0.5, 0.5]);
        assert_eq!(b.from_unit(&u), vec![2.5, 7.5]);
        let mut x = vec![-6.0, 20.0];
        b.clip(&mut x);
        assert_eq!(x, vec![-5.0, 15.0]);
        assert!(b.contains(&x));
    }
}
