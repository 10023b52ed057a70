//! Pointwise posterior summaries.
//!
//! Interval endpoints are order statistics (inverse empirical CDF), so
//! predictive intervals built from integer draws have integer endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PosteriorDraws;

/// Time points whose posterior median κ falls below this are "unshrunk".
pub const UNSHRUNK_THRESHOLD: f64 = 0.5;

/// Inverse empirical CDF of sorted data: the ⌈n·p⌉-th order statistic.
pub fn quantile_sorted<T: Copy>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    // tolerance keeps e.g. 1000 * 0.025 from rounding up to 26
    let rank = (n as f64 * p - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    assert!(n > 0, "median of empty sample");
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Equal-tail interval at `level` from unsorted draws.
pub fn equal_tail<T: Copy + PartialOrd>(values: &[T], level: f64) -> (T, T) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in draws"));
    let tail = 0.5 * (1.0 - level);
    (quantile_sorted(&v, tail), quantile_sorted(&v, 1.0 - tail))
}

pub fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "interval level must lie in (0, 1) (got {level})"
        )))
    }
}

/// Summary of one time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub trend_median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pred_lo: u64,
    pub pred_hi: u64,
    /// Posterior median κ; absent for the first D time points.
    pub kappa_median: Option<f64>,
    pub unshrunk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub points: Vec<PointSummary>,
    pub unshrunk_count: usize,
    pub n_increments: usize,
    pub unshrunk_fraction: f64,
}

/// Column `t` of a row-major draw matrix.
fn column<T: Copy>(rows: &[Vec<T>], t: usize) -> Vec<T> {
    rows.iter().map(|r| r[t]).collect()
}

/// Per-time-point trend median and equal-tail intervals on the count scale,
/// predictive intervals, and the shrinkage profile.
pub fn posterior_summary(draws: &PosteriorDraws, level: f64) -> Result<PosteriorSummary> {
    check_level(level)?;
    if draws.n_draws() == 0 {
        return Err(Error::InvalidArgument("no posterior draws to summarize".into()));
    }
    let t_len = draws.series_len();
    let trend = draws.trend();
    let d = draws.degree;
    let mut points = Vec::with_capacity(t_len);
    let mut unshrunk_count = 0;
    for t in 0..t_len {
        let col = column(&trend, t);
        let (ci_lo, ci_hi) = equal_tail(&col, level);
        let (pred_lo, pred_hi) = equal_tail(&column(&draws.y_rep, t), level);
        let kappa_median = (t >= d).then(|| median(&column(&draws.kappa, t - d)));
        let unshrunk = kappa_median.is_some_and(|k| k < UNSHRUNK_THRESHOLD);
        unshrunk_count += usize::from(unshrunk);
        points.push(PointSummary {
            trend_median: median(&col),
            ci_lo,
            ci_hi,
            pred_lo,
            pred_hi,
            kappa_median,
            unshrunk,
        });
    }
    let n_increments = t_len.saturating_sub(d);
    Ok(PosteriorSummary {
        level,
        points,
        unshrunk_count,
        n_increments,
        unshrunk_fraction: if n_increments > 0 {
            unshrunk_count as f64 / n_increments as f64
        } else {
            0.0
        },
    })
}

/// Pointwise median and equal-tail interval bounds of a draw matrix
/// (rows = draws).
pub fn pointwise_bands(rows: &[Vec<f64>], level: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t_len = rows.first().map_or(0, Vec::len);
    let mut med = Vec::with_capacity(t_len);
    let mut lo = Vec::with_capacity(t_len);
    let mut hi = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let col = column(rows, t);
        let (l, h) = equal_tail(&col, level);
        med.push(median(&col));
        lo.push(l);
        hi.push(h);
    }
    (med, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StepTimings;
    use crate::rng::RngStream;

    fn draws_from(theta: Vec<Vec<f64>>, degree: usize) -> PosteriorDraws {
        let n = theta.len();
        let t = theta[0].len();
        PosteriorDraws {
            degree,
            y_rep: vec![vec![3; t]; n],
            kappa: vec![vec![0.7; t - degree]; n],
            h: vec![vec![0.0; t - degree]; n],
            r: vec![10; n],
            phi: vec![0.5; n],
            mu: vec![0.0; n],
            theta,
            seconds: 0.0,
            accept_rate: None,
            iterations: n,
            timings: StepTimings::default(),
        }
    }

    #[test]
    fn degenerate_posterior() {
        let d = draws_from(vec![vec![5f64.ln(); 4]; 50], 2);
        let s = posterior_summary(&d, 0.95).unwrap();
        for p in &s.points {
            assert!((p.trend_median - 5.0).abs() < 1e-12);
            assert_eq!(p.ci_lo, p.ci_hi);
            assert_eq!((p.pred_lo, p.pred_hi), (3, 3));
        }
        assert_eq!(s.points[0].kappa_median, None);
        assert_eq!(s.unshrunk_count, 0);
        assert_eq!(s.n_increments, 2);
    }

    #[test]
    fn intervals_are_order_statistics() {
        let mut rng = RngStream::new(1, 0);
        let vals: Vec<f64> = (0..1000).map(|_| rng.std_normal()).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = equal_tail(&vals, 0.95);
        assert_eq!(lo, sorted[24]);
        assert_eq!(hi, sorted[974]);
        let (lo, hi) = equal_tail(&vals, 0.90);
        assert_eq!(lo, sorted[49]);
        assert_eq!(hi, sorted[949]);
    }

    #[test]
    fn unshrunk_counting() {
        let mut d = draws_from(vec![vec![0.0; 5]; 3], 1);
        for row in d.kappa.iter_mut() {
            row[1] = 0.2;
            row[3] = 0.49;
        }
        let s = posterior_summary(&d, 0.9).unwrap();
        assert_eq!(s.unshrunk_count, 2);
        assert!((s.unshrunk_fraction - 0.5).abs() < 1e-15);
        assert!(s.points[2].unshrunk && s.points[4].unshrunk && !s.points[1].unshrunk);
    }

    #[test]
    fn bad_inputs() {
        let d = draws_from(vec![vec![0.0; 4]; 3], 2);
        assert!(posterior_summary(&d, 1.5).is_err());
        assert!(posterior_summary(&d, 0.0).is_err());
        let mut empty = d.clone();
        empty.theta.clear();
        assert!(posterior_summary(&empty, 0.9).is_err());
    }
}
