//! Threshold selection for the multiple t-test and the resulting network.
//!
//! Both procedures search `t in [0, t_bar]` with
//! `t_bar = sqrt(2 ln|H| - a ln ln|H|)` for the smallest threshold whose
//! estimated false discovery proportion is at most `q`, and fall back to the
//! familywise rule `t0 = sqrt(2 ln|H|)` when no such threshold exists.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::debias::{DebiasedEstimate, TestField};
use crate::error::{Error, Result};
use crate::model::VarDims;

pub const DEFAULT_A: f64 = 3.1;

/// `P(Z > t)` for a standard normal `Z`.
pub fn normal_upper_tail(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_upper_tail`] on `(0, 1)`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `t_bar = sqrt(2 ln|H| - a ln ln|H|)`; errors when the radicand is negative
/// or `|H| < 2`.
pub fn search_cap(n_hypotheses: usize, a: f64) -> Result<f64> {
    if n_hypotheses < 2 {
        return Err(Error::SearchRangeUndefined {
            size: n_hypotheses,
            value: f64::NAN,
        });
    }
    let l = (n_hypotheses as f64).ln();
    let value = 2.0 * l - a * l.ln();
    if value < 0.0 {
        return Err(Error::SearchRangeUndefined {
            size: n_hypotheses,
            value,
        });
    }
    Ok(value.sqrt())
}

/// `sqrt(2 ln|H|)`.
pub fn fallback_threshold(n_hypotheses: usize) -> f64 {
    (2.0 * (n_hypotheses as f64).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    FdrSearch,
    FwerFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Asymptotic,
    Bootstrap,
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Procedure::Asymptotic => "asymptotic",
            Procedure::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub t0: f64,
    pub rule: ThresholdRule,
    pub search_cap: f64,
    pub q_level: f64,
    pub a_constant: f64,
    pub n_hypotheses: usize,
}

fn validate_levels(q: f64, a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("q must lie in [0, 1], got {q}")));
    }
    if !(a > 3.0) {
        return Err(Error::InvalidInput(format!("a must exceed 3, got {a}")));
    }
    Ok(())
}

/// Sorted absolute statistics with `|S(t)| = #{|T| >= t}` by binary search.
pub(crate) struct SortedAbs(Vec<f64>);

impl SortedAbs {
    pub(crate) fn new(field: &TestField) -> Self {
        let mut v = field.abs_values();
        v.sort_by(f64::total_cmp);
        Self(v)
    }

    pub(crate) fn count_at_least(&self, t: f64) -> usize {
        self.0.len() - self.0.partition_point(|&v| v < t)
    }

    fn candidates(&self, cap: f64) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.0.len() + 2);
        c.push(0.0);
        c.extend(self.0.iter().copied().filter(|&v| v > 0.0 && v < cap));
        c.push(cap);
        c.dedup();
        c
    }
}

/// `2|H| Q(t) / (|S(t)| v 1)`.
pub fn asymptotic_ratio(field: &TestField, t: f64) -> f64 {
    let sorted = SortedAbs::new(field);
    asymptotic_ratio_sorted(&sorted, field.len(), t)
}

fn asymptotic_ratio_sorted(sorted: &SortedAbs, h: usize, t: f64) -> f64 {
    2.0 * h as f64 * normal_upper_tail(t) / sorted.count_at_least(t).max(1) as f64
}

/// Threshold against the standard normal tail.
///
/// The criterion only changes count at the observed `|T_ij|`; between two
/// of them it is decreasing in `t`, so the infimum is either an observed
/// value or the root of `2|H| Q(t) = q |S(t)|` inside an interval.
pub fn asymptotic_threshold(field: &TestField, q: f64, a: f64) -> Result<ThresholdResult> {
    validate_levels(q, a)?;
    let h = field.len();
    if h == 0 {
        return Err(Error::EmptyHypotheses);
    }
    let cap = search_cap(h, a)?;
    let sorted = SortedAbs::new(field);
    let points = sorted.candidates(cap);
    let ok = |t: f64| asymptotic_ratio_sorted(&sorted, h, t) <= q;
    let mut found = None;
    for (k, &p) in points.iter().enumerate() {
        if ok(p) {
            found = Some(p);
            break;
        }
        let Some(&next) = points.get(k + 1) else { break };
        // on (p, next] the discovery count is that of `next`, so the ratio
        // falls monotonically and ok(next) brackets the root
        if !ok(next) {
            continue;
        }
        let count = sorted.count_at_least(next).max(1) as f64;
        let guess = normal_upper_quantile(q * count / (2.0 * h as f64));
        let (mut lo, mut hi) = (p, next);
        if guess > lo && guess < hi {
            if ok(guess) {
                hi = guess;
            } else {
                lo = guess;
            }
        }
        loop {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        found = Some(hi);
        break;
    }
    Ok(finish(found, cap, q, a, h))
}

pub(crate) fn finish(found: Option<f64>, cap: f64, q: f64, a: f64, h: usize) -> ThresholdResult {
    match found {
        Some(t0) => ThresholdResult {
            t0,
            rule: ThresholdRule::FdrSearch,
            search_cap: cap,
            q_level: q,
            a_constant: a,
            n_hypotheses: h,
        },
        None => ThresholdResult {
            t0: fallback_threshold(h),
            rule: ThresholdRule::FwerFallback,
            search_cap: cap,
            q_level: q,
            a_constant: a,
            n_hypotheses: h,
        },
    }
}

pub(crate) fn check_search_inputs(field: &TestField, q: f64, a: f64) -> Result<f64> {
    validate_levels(q, a)?;
    if field.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    search_cap(field.len(), a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub row: usize,
    pub col: usize,
    pub t_value: f64,
    pub estimate: f64,
    /// Sign of the debiased estimate: 1, -1, or 0 for an exact zero.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySet {
    pub rejected: Vec<Discovery>,
    pub threshold: ThresholdResult,
    pub procedure: Procedure,
}

impl DiscoverySet {
    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.rejected.iter().map(|d| (d.row, d.col)).collect()
    }
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Rejects every `(i, j)` with `|T_ij| >= t0`.
pub fn discoveries(
    field: &TestField,
    estimate: &DebiasedEstimate,
    threshold: &ThresholdResult,
    procedure: Procedure,
) -> DiscoverySet {
    let rejected = field
        .hypotheses
        .pairs()
        .iter()
        .zip(&field.t_values)
        .filter(|(_, t)| t.abs() >= threshold.t0)
        .map(|(&(row, col), &t_value)| {
            let est = estimate.coefficients[(row, col)];
            Discovery {
                row,
                col,
                t_value,
                estimate: est,
                sign: sign_of(est),
            }
        })
        .collect();
    DiscoverySet {
        rejected,
        threshold: *threshold,
        procedure,
    }
}

/// Directed edge `source -> target` aggregated over lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: usize,
    pub target: usize,
    pub lags: Vec<usize>,
    pub t_values: Vec<f64>,
    pub signs: Vec<i8>,
    pub estimates: Vec<f64>,
}

/// Maps rejected `(row, col)` to edges: row `i` is the target and column `c`
/// belongs to source `c mod N` at lag `c / N + 1`.
pub fn export_network(set: &DiscoverySet, dims: VarDims, include_self_lags: bool) -> Vec<NetworkEdge> {
    let n = dims.n_series;
    let mut edges: std::collections::BTreeMap<(usize, usize), NetworkEdge> = Default::default();
    for d in &set.rejected {
        let source = d.col % n;
        let target = d.row;
        let lag = d.col / n + 1;
        if source == target && !include_self_lags {
            continue;
        }
        let e = edges.entry((source, target)).or_insert_with(|| NetworkEdge {
            source,
            target,
            lags: Vec::new(),
            t_values: Vec::new(),
            signs: Vec::new(),
            estimates: Vec::new(),
        });
        e.lags.push(lag);
        e.t_values.push(d.t_value);
        e.signs.push(d.sign);
        e.estimates.push(d.estimate);
    }
    edges.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debias::{Hypotheses, SeVariant};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    pub(crate) fn field_from(values: &[f64]) -> TestField {
        TestField {
            t_values: values.to_vec(),
            standard_errors: vec![1.0; values.len()],
            se_variant: SeVariant::Sandwich,
            hypotheses: Hypotheses::all(1, values.len()),
        }
    }

    #[test]
    fn upper_tail_values() {
        assert_eq!(normal_upper_tail(0.0), 0.5);
        assert_abs_diff_eq!(normal_upper_tail(1.959_963_985), 0.025, epsilon = 1e-9);
        let grid: Vec<f64> = (0..1000).map(|k| k as f64 * 0.01).collect();
        assert!(grid.windows(2).all(|w| normal_upper_tail(w[1]) < normal_upper_tail(w[0])));
        assert_abs_diff_eq!(normal_upper_quantile(0.025), 1.959_963_984_540_054, epsilon = 1e-12);
    }

    #[test]
    fn q_one_gives_zero() {
        let f = field_from(&[0.3, -1.2, 2.2, 0.0, 4.0]);
        let r = asymptotic_threshold(&f, 1.0, DEFAULT_A).unwrap();
        assert_eq!(r.t0, 0.0);
        assert_eq!(r.rule, ThresholdRule::FdrSearch);
    }

    #[test]
    fn all_zero_field_falls_back() {
        let f = field_from(&vec![0.0; 2500]);
        let r = asymptotic_threshold(&f, 0.1, 3.1).unwrap();
        assert_abs_diff_eq!(r.search_cap, 3.045, epsilon = 1e-3);
        assert_eq!(r.rule, ThresholdRule::FwerFallback);
        assert_eq!(r.t0, (2.0 * 2500f64.ln()).sqrt());
        assert_abs_diff_eq!(r.t0, 3.956, epsilon = 1e-3);
        assert!(asymptotic_ratio(&f, r.search_cap) > 5.0);
    }

    #[test]
    fn tiny_sets_rejected() {
        assert!(matches!(search_cap(1, 3.1), Err(Error::SearchRangeUndefined { .. })));
        assert!(search_cap(2, 3.1).is_ok());
        assert!(asymptotic_threshold(&field_from(&[]), 0.1, 3.1).is_err());
        assert!(asymptotic_threshold(&field_from(&[1.0, 2.0]), 0.1, 3.0).is_err());
        assert!(asymptotic_threshold(&field_from(&[1.0, 2.0]), 1.1, 3.1).is_err());
    }

    #[test]
    fn discovery_examples() {
        let f = field_from(&[2.5, -3.1, 0.4]);
        let est = DebiasedEstimate {
            coefficients: DMatrix::from_row_slice(1, 3, &[0.5, -0.7, 0.1]),
            correction: DMatrix::zeros(1, 3),
        };
        let mut thr = finish(Some(3.0), 3.5, 0.1, 3.1, 3);
        let set = discoveries(&f, &est, &thr, Procedure::Asymptotic);
        assert_eq!(set.pairs(), vec![(0, 1)]);
        assert_eq!(set.rejected[0].sign, -1);
        thr.t0 = 0.0;
        assert_eq!(discoveries(&f, &est, &thr, Procedure::Asymptotic).len(), 3);
        thr.t0 = 3.2;
        assert!(discoveries(&f, &est, &thr, Procedure::Asymptotic).is_empty());
    }

    fn set_with(pairs: &[(usize, usize)]) -> DiscoverySet {
        DiscoverySet {
            rejected: pairs
                .iter()
                .map(|&(row, col)| Discovery {
                    row,
                    col,
                    t_value: 5.0,
                    estimate: 0.3,
                    sign: 1,
                })
                .collect(),
            threshold: finish(Some(2.0), 3.0, 0.1, 3.1, 10),
            procedure: Procedure::Asymptotic,
        }
    }

    #[test]
    fn network_mapping() {
        let dims1 = VarDims::new(4, 1, 10).unwrap();
        // row 2, col 1 (1-based) -> edge 1 -> 2
        let e = export_network(&set_with(&[(1, 0)]), dims1, false);
        assert_eq!((e[0].source, e[0].target, e[0].lags.clone()), (0, 1, vec![1]));
        assert!(export_network(&set_with(&[(0, 0)]), dims1, false).is_empty());
        assert_eq!(export_network(&set_with(&[(0, 0)]), dims1, true).len(), 1);
        // row 3, col 4 + N with K=2, N=4 -> edge 4 -> 3 at lag 2
        let dims2 = VarDims::new(4, 2, 10).unwrap();
        let e = export_network(&set_with(&[(2, 7)]), dims2, false);
        assert_eq!((e[0].source, e[0].target, e[0].lags.clone()), (3, 2, vec![2]));
        // both lags of one pair collapse into one edge
        let e = export_network(&set_with(&[(2, 3), (2, 7)]), dims2, false);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].lags, vec![1, 2]);
    }
}
