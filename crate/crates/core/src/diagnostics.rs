//! Summary statistics for chains: ESS, acceptance, intermodal jumps,
//! misclassification and QQ data.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::ChainTrace;
use crate::error::{Error, Result};
use crate::geometry::euclidean;

/// Minimum series length accepted by [`effective_sample_size`].
pub const MIN_ESS_LENGTH: usize = 10;

/// Effective sample size with Geyer's initial monotone sequence estimator.
///
/// Autocovariances use the `1/N` normalization. Consecutive lag pairs
/// `Γ_m = γ_{2m} + γ_{2m+1}` are summed until the first non-positive pair and
/// forced to be non-increasing; `ESS = N / (−1 + 2·ΣΓ_m/γ_0)`, clamped to
/// `(0, N]`. Lags are computed on demand, so the cost is `O(N·M)` for `M`
/// retained lags.
pub fn effective_sample_size(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(Error::invalid(format!(
            "ESS needs at least {MIN_ESS_LENGTH} values, got {n}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("ESS series contains non-finite values"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if !(gamma0 > 0.0) || gamma0 <= f64::EPSILON * mean * mean {
        return Err(Error::UndefinedEss("series is constant"));
    }

    let mut sum = 0.0;
    let mut previous = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = autocov(2 * m) + autocov(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum += pair;
        previous = pair;
        m += 1;
    }
    let tau = -1.0 + 2.0 * sum / gamma0;
    let ess = n as f64 / tau;
    Ok(if ess.is_finite() && ess > 0.0 { ess.min(n as f64) } else { n as f64 })
}

/// Per-coordinate ESS of a chain with mean/min summaries, optionally per
/// second of wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub per_coordinate: Vec<f64>,
    pub mean_ess: f64,
    pub min_ess: f64,
    /// `None` when no wall time was supplied.
    pub mean_esss: Option<f64>,
    pub min_esss: Option<f64>,
}

impl EssReport {
    /// Summarizes the given per-coordinate ESS values.
    pub fn from_values(per_coordinate: Vec<f64>, wall_seconds: Option<f64>) -> Result<Self> {
        if per_coordinate.is_empty() {
            return Err(Error::invalid("ESS report needs at least one coordinate"));
        }
        let mean_ess = per_coordinate.iter().sum::<f64>() / per_coordinate.len() as f64;
        let min_ess = per_coordinate.iter().copied().fold(f64::INFINITY, f64::min);
        let per_second = |v: f64| wall_seconds.filter(|w| *w > 0.0).map(|w| v / w);
        Ok(Self {
            mean_esss: per_second(mean_ess),
            min_esss: per_second(min_ess),
            per_coordinate,
            mean_ess,
            min_ess,
        })
    }

    /// ESS of every coordinate of `trace` after discarding the first
    /// `burn_in` states. ESS per second uses the trace's wall time.
    pub fn from_trace(trace: &ChainTrace, burn_in: usize) -> Result<Self> {
        let per_coordinate = (0..trace.dim())
            .map(|j| effective_sample_size(&trace.coordinate(j, burn_in)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(per_coordinate, Some(trace.wall_time_seconds()))
    }
}

/// Fraction of iterations in which the chain moved.
pub fn acceptance_rate(trace: &ChainTrace) -> Result<f64> {
    acceptance_rate_from_flags(trace.accepted())
}

pub fn acceptance_rate_from_flags(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::invalid("acceptance rate of an empty trace"));
    }
    Ok(flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
}

/// Fraction of consecutive state pairs that differ.
pub fn move_rate_from_states(trace: &ChainTrace) -> Result<f64> {
    let n = trace.n_iterations();
    if n == 0 {
        return Err(Error::invalid("move rate of an empty trace"));
    }
    let moves = (0..n).filter(|&i| trace.state(i) != trace.state(i + 1)).count();
    Ok(moves as f64 / n as f64)
}

/// Index of the nearest center, ties going to the lower index.
pub fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = euclidean(point, c);
        if d < best_distance {
            best = i;
            best_distance = d;
        }
    }
    best
}

/// Number of consecutive state pairs whose nearest mode center differs.
pub fn intermodal_jumps<'a, I>(states: I, centers: &[Vec<f64>]) -> Result<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if centers.len() < 2 {
        return Err(Error::invalid("intermodal jumps need at least two mode centers"));
    }
    let mut jumps = 0;
    let mut previous = None;
    for s in states {
        if let Some(c) = centers.iter().find(|c| c.len() != s.len()) {
            return Err(Error::dim_mismatch("mode center", s.len(), c.len()));
        }
        let assignment = nearest_center(s, centers);
        if previous.is_some_and(|p| p != assignment) {
            jumps += 1;
        }
        previous = Some(assignment);
    }
    Ok(jumps)
}

/// Number of observations whose latent sign disagrees with the label. A zero
/// latent predicts label 0.
pub fn misclassification_count(latent: &[f64], labels: &[u8]) -> Result<usize> {
    if latent.len() != labels.len() {
        return Err(Error::dim_mismatch("labels", latent.len(), labels.len()));
    }
    Ok(latent
        .iter()
        .zip(labels)
        .filter(|(theta, y)| (**theta > 0.0) != (**y == 1))
        .count())
}

/// First index whose value is at most `threshold`.
pub fn first_iteration_below(series: &[usize], threshold: usize) -> Option<usize> {
    series.iter().position(|e| *e <= threshold)
}

/// Minimum sample count for [`qq_points`].
pub const MIN_QQ_SAMPLES: usize = 100;

/// Sorted samples paired with reference quantiles at `(i − 0.5)/N`.
pub fn qq_points<F>(samples: &[f64], reference_quantile: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> f64,
{
    if samples.len() < MIN_QQ_SAMPLES {
        return Err(Error::invalid(format!(
            "QQ data needs at least {MIN_QQ_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("QQ samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, reference_quantile((i as f64 + 0.5) / n)))
        .collect())
}

/// Pearson correlation of QQ pairs; an error when either side is constant.
pub fn qq_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson_correlation(&x, &y)
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim_mismatch("correlation input", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least two pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::invalid("correlation undefined for constant input"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if samples.is_empty() {
        return Err(Error::invalid("KS statistic of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Large-sample KS critical value `√(−ln(α/2)/2) / √n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Sample mean and its standard error `s/√n`. The error is 0 for one value.
pub fn mean_and_standard_error(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("mean of an empty list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty list"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = chain_rng(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = chain_rng(seed);
        let mut x = rng.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
        (0..n)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_ess_is_close_to_n() {
        let ess = effective_sample_size(&normals(100_000, 1)).unwrap();
        assert!((ess / 1e5 - 1.0).abs() < 0.05, "{ess}");
    }

    #[test]
    fn ar1_ess_matches_integrated_autocorrelation() {
        let ess = effective_sample_size(&ar1(100_000, 0.9, 2)).unwrap();
        let expected = 1e5 * 0.1 / 1.9;
        assert!((ess / expected - 1.0).abs() < 0.1, "{ess} vs {expected}");
    }

    #[test]
    fn duplicated_pairs_match_brute_force_autocorrelation() {
        // Lag-1 autocorrelation of a pairwise-duplicated iid stream is 1/2 and
        // all higher lags vanish, so the integrated time is 2.
        let base = normals(50_000, 3);
        let series: Vec<f64> = base.iter().flat_map(|x| [*x, *x]).collect();
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let c = |lag: usize| {
            series[..series.len() - lag]
                .iter()
                .zip(&series[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n
        };
        let rho1 = c(1) / c(0);
        assert!((rho1 - 0.5).abs() < 0.01);
        let oracle = n / (1.0 + 2.0 * rho1);
        let ess = effective_sample_size(&series).unwrap();
        assert!((ess / oracle - 1.0).abs() < 0.1, "{ess} vs {oracle}");
    }

    #[test]
    fn constant_and_short_series_fail() {
        assert!(matches!(effective_sample_size(&[2.0; 50]), Err(Error::UndefinedEss(_))));
        assert!(effective_sample_size(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ess_is_capped_at_n() {
        // Alternating series has negative lag-1 correlation.
        let s: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ess = effective_sample_size(&s).unwrap();
        assert!(ess > 0.0 && ess <= 1000.0);
    }

    #[test]
    fn jump_counts() {
        let centers = vec![vec![0.0], vec![5.0]];
        let alternating: Vec<Vec<f64>> = (0..10).map(|i| vec![if i % 2 == 0 { 0.0 } else { 5.0 }]).collect();
        assert_eq!(intermodal_jumps(alternating.iter().map(|v| v.as_slice()), &centers).unwrap(), 9);
        let stay: Vec<Vec<f64>> = (0..10).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
        assert_eq!(intermodal_jumps(stay.iter().map(|v| v.as_slice()), &centers).unwrap(), 0);
        let hand: Vec<Vec<f64>> = [0.1, 1.0, 4.0, 6.0, 2.0, 3.0].iter().map(|x| vec![*x]).collect();
        assert_eq!(intermodal_jumps(hand.iter().map(|v| v.as_slice()), &centers).unwrap(), 3);
        assert!(intermodal_jumps(hand.iter().map(|v| v.as_slice()), &centers[..1]).is_err());
    }

    #[test]
    fn equal_centers_never_jump() {
        let centers = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let states: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, -(i as f64)]).collect();
        assert_eq!(intermodal_jumps(states.iter().map(|v| v.as_slice()), &centers).unwrap(), 0);
    }

    #[test]
    fn misclassification() {
        let labels = [1u8, 0, 1, 0];
        assert_eq!(misclassification_count(&[1.0, -1.0, 1.0, -1.0], &labels).unwrap(), 0);
        assert_eq!(misclassification_count(&[-1.0, 1.0, -1.0, 1.0], &labels).unwrap(), 4);
        assert_eq!(misclassification_count(&[0.0; 4], &labels).unwrap(), 2);
        assert!(misclassification_count(&[0.0; 3], &labels).is_err());
    }

    #[test]
    fn first_below() {
        assert_eq!(first_iteration_below(&[48, 30, 9, 12], 10), Some(2));
        assert_eq!(first_iteration_below(&[48; 5], 10), None);
        assert_eq!(first_iteration_below(&[48, 30], 48), Some(0));
    }

    #[test]
    fn qq_on_exact_quantiles_is_diagonal() {
        let n = 200;
        let samples: Vec<f64> = (0..n).map(|i| normal_quantile((i as f64 + 0.5) / n as f64)).collect();
        let pairs = qq_points(&samples, normal_quantile).unwrap();
        assert!(pairs.iter().all(|(a, b)| a == b));
        assert!((qq_correlation(&pairs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qq_of_normal_draws() {
        let pairs = qq_points(&normals(100_000, 5), normal_quantile).unwrap();
        assert!(qq_correlation(&pairs).unwrap() > 0.999);
    }

    #[test]
    fn qq_of_constant_is_flagged() {
        let pairs = qq_points(&[3.0; 100], normal_quantile).unwrap();
        assert!(qq_correlation(&pairs).is_err());
        assert!(qq_points(&[0.0; 99], normal_quantile).is_err());
    }

    #[test]
    fn ks_of_normal_draws_is_below_critical_value() {
        let x = normals(5000, 6);
        let d = ks_statistic(&x, normal_cdf).unwrap();
        assert!(d < ks_critical_value(x.len(), 0.01));
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.5).collect();
        assert!(ks_statistic(&shifted, normal_cdf).unwrap() > ks_critical_value(x.len(), 0.01));
    }

    #[test]
    fn summaries() {
        let (m, se) = mean_and_standard_error(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        let r = EssReport::from_values(vec![10.0, 30.0], Some(2.0)).unwrap();
        assert_eq!((r.mean_ess, r.min_ess, r.mean_esss, r.min_esss), (20.0, 10.0, Some(10.0), Some(5.0)));
        assert_eq!(EssReport::from_values(vec![1.0], None).unwrap().mean_esss, None);
    }
}
