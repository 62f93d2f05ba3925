//! Time-series distances: Euclidean, DTW with its Keogh lower bound, and the
//! cepstral family.
//!
//! The cepstral sums run over `k = 0..=L/2`. A power cepstrum is even,
//! `c(k) = c(L - k)`, so the upper half carries no extra information; with
//! this range the cepstral norm of `1/(1 - a z^-1)` is `-log(1 - a^2)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{IOPair, TimeSeries};
use crate::spectral::{power_cepstrum, Cepstrum, WelchConfig};

/// Sakoe-Chiba band shared by exact DTW and the Keogh bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub band_radius_fraction: f64,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            band_radius_fraction: 0.1,
        }
    }
}

impl DtwConfig {
    pub fn unconstrained() -> Self {
        Self {
            band_radius_fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.band_radius_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Parameter(format!(
                "band radius fraction must lie in (0, 1], got {f}"
            )));
        }
        Ok(())
    }

    /// Band radius in samples for series of lengths `n1` and `n2`, at least 1.
    pub fn radius(&self, n1: usize, n2: usize) -> usize {
        ((self.band_radius_fraction * n1.max(n2) as f64).floor() as usize).max(1)
    }
}

fn same_length(y1: &TimeSeries, y2: &TimeSeries) -> Result<()> {
    if y1.len() != y2.len() {
        return Err(Error::IncompatibleLength {
            left: y1.len(),
            right: y2.len(),
        });
    }
    Ok(())
}

pub fn d_euclidean(y1: &TimeSeries, y2: &TimeSeries) -> Result<f64> {
    same_length(y1, y2)?;
    Ok(euclidean(y1.values(), y2.values()))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Square root of the minimum cumulative squared mismatch over warping paths
/// confined to `|i - j| <= radius`.
pub fn d_dtw_exact(y1: &TimeSeries, y2: &TimeSeries, cfg: &DtwConfig) -> Result<f64> {
    cfg.validate()?;
    let radius = cfg.radius(y1.len(), y2.len());
    dtw_banded(y1.values(), y2.values(), radius)
}

pub(crate) fn dtw_banded(a: &[f64], b: &[f64], radius: usize) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    let difference = n.abs_diff(m);
    if radius < difference {
        return Err(Error::InfeasibleBand { radius, difference });
    }
    let inf = f64::INFINITY;
    let mut prev = vec![inf; m + 1];
    let mut curr = vec![inf; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        let lo = i.saturating_sub(radius).max(1);
        let hi = (i + radius).min(m);
        curr[0] = inf;
        if lo > 1 {
            curr[lo - 1] = inf;
        }
        for j in lo..=hi {
            let diff = a[i - 1] - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = diff * diff + best;
        }
        if hi < m {
            curr[hi + 1] = inf;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m].sqrt())
}

/// Running max (`upper`) and min (`lower`) of `x` over windows `[i - r, i + r]`.
pub fn envelope(x: &[f64], radius: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let end = (i + radius).min(n - 1);
        while next <= end {
            while maxq.back().is_some_and(|&k| x[k] <= x[next]) {
                maxq.pop_back();
            }
            maxq.push_back(next);
            while minq.back().is_some_and(|&k| x[k] >= x[next]) {
                minq.pop_back();
            }
            minq.push_back(next);
            next += 1;
        }
        let start = i.saturating_sub(radius);
        while maxq.front().is_some_and(|&k| k < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&k| k < start) {
            minq.pop_front();
        }
        upper.push(x[maxq[0]]);
        lower.push(x[minq[0]]);
    }
    (upper, lower)
}

fn keogh_sum(query: &[f64], upper: &[f64], lower: &[f64]) -> f64 {
    query
        .iter()
        .zip(upper.iter().zip(lower))
        .map(|(&q, (&u, &l))| {
            if q > u {
                (q - u) * (q - u)
            } else if q < l {
                (l - q) * (l - q)
            } else {
                0.0
            }
        })
        .sum()
}

/// Exceedance of `y1` outside the band envelope of `y2`.
pub fn lb_keogh_directed(y1: &TimeSeries, y2: &TimeSeries, cfg: &DtwConfig) -> Result<f64> {
    same_length(y1, y2)?;
    cfg.validate()?;
    let radius = cfg.radius(y1.len(), y2.len());
    let (upper, lower) = envelope(y2.values(), radius);
    Ok(keogh_sum(y1.values(), &upper, &lower).sqrt())
}

/// The smaller of the two directed bounds: symmetric, linear time, below exact DTW.
///
/// The larger one is a tighter bound but reacts to a pure difference in
/// output scale; see [`lb_keogh_max`].
pub fn lb_keogh(y1: &TimeSeries, y2: &TimeSeries, cfg: &DtwConfig) -> Result<f64> {
    let a = lb_keogh_directed(y1, y2, cfg)?;
    let b = lb_keogh_directed(y2, y1, cfg)?;
    Ok(a.min(b))
}

/// The larger of the two directed bounds.
pub fn lb_keogh_max(y1: &TimeSeries, y2: &TimeSeries, cfg: &DtwConfig) -> Result<f64> {
    let a = lb_keogh_directed(y1, y2, cfg)?;
    let b = lb_keogh_directed(y2, y1, cfg)?;
    Ok(a.max(b))
}

/// Envelope of a series, reusable across many Keogh comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct KeoghFeature {
    pub values: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl KeoghFeature {
    pub fn new(y: &TimeSeries, cfg: &DtwConfig) -> Result<Self> {
        cfg.validate()?;
        let radius = cfg.radius(y.len(), y.len());
        let (upper, lower) = envelope(y.values(), radius);
        Ok(Self {
            values: y.values().to_vec(),
            upper,
            lower,
        })
    }

    pub fn bound(&self, other: &KeoghFeature) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::IncompatibleLength {
                left: self.values.len(),
                right: other.values.len(),
            });
        }
        let a = keogh_sum(&self.values, &other.upper, &other.lower).sqrt();
        let b = keogh_sum(&other.values, &self.upper, &self.lower).sqrt();
        Ok(a.min(b))
    }
}

/// `sum_{k=0}^{L/2} k c(k)^2`.
pub fn cepstrum_norm(c: &Cepstrum) -> f64 {
    let c = c.coefficients();
    let half = c.len() / 2;
    (1..=half).map(|k| k as f64 * c[k] * c[k]).sum()
}

/// `sum_{k=0}^{L/2} k (a(k) - b(k))^2`.
pub fn cepstrum_distance(a: &Cepstrum, b: &Cepstrum) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::IncompatibleLength {
            left: a.len(),
            right: b.len(),
        });
    }
    let (a, b) = (a.coefficients(), b.coefficients());
    let half = a.len() / 2;
    Ok((1..=half)
        .map(|k| {
            let d = a[k] - b[k];
            k as f64 * d * d
        })
        .sum())
}

/// Cepstrum of the system alone, `c_h = c_y - c_u`.
pub fn system_cepstrum(pair: &IOPair, cfg: &WelchConfig) -> Result<Cepstrum> {
    let cy = power_cepstrum(pair.output(), cfg)?;
    let cu = power_cepstrum(pair.input(), cfg)?;
    cy.difference(&cu)
}

pub fn cepstral_norm(y: &TimeSeries, cfg: &WelchConfig) -> Result<f64> {
    Ok(cepstrum_norm(&power_cepstrum(y, cfg)?))
}

pub fn cepstral_distance(y1: &TimeSeries, y2: &TimeSeries, cfg: &WelchConfig) -> Result<f64> {
    cepstrum_distance(&power_cepstrum(y1, cfg)?, &power_cepstrum(y2, cfg)?)
}

pub fn extended_cepstral_distance(p1: &IOPair, p2: &IOPair, cfg: &WelchConfig) -> Result<f64> {
    cepstrum_distance(&system_cepstrum(p1, cfg)?, &system_cepstrum(p2, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::signal::{gen_filtered_noise, gen_white_noise, RandomFilter};
    use proptest::prelude::*;
    use rand::Rng;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn random_series(rng: &mut crate::rng::SeededRng, n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Unbanded DTW over all monotone paths, by exhaustive recursion on tiny inputs.
    fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let d = (a[i] - b[j]).powi(2);
            if i == 0 && j == 0 {
                return d;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            d + best
        }
        go(a, b, a.len() - 1, b.len() - 1).sqrt()
    }

    #[test]
    fn euclidean_cases() {
        assert_eq!(d_euclidean(&ts(&[0.0, 3.0]), &ts(&[4.0, 0.0])).unwrap(), 5.0);
        let y = ts(&[1.0, -2.0, 3.5]);
        assert_eq!(d_euclidean(&y, &y).unwrap(), 0.0);
        assert!(matches!(
            d_euclidean(&ts(&[1.0, 2.0]), &ts(&[1.0, 2.0, 3.0])),
            Err(Error::IncompatibleLength { .. })
        ));
    }

    #[test]
    fn dtw_hand_cases() {
        let cfg = DtwConfig::unconstrained();
        assert_eq!(d_dtw_exact(&ts(&[1.0, 2.0, 3.0]), &ts(&[1.0, 2.0, 2.0, 3.0]), &cfg).unwrap(), 0.0);
        let y = ts(&[0.3, 1.0, -1.0, 2.0]);
        assert_eq!(d_dtw_exact(&y, &y, &DtwConfig::default()).unwrap(), 0.0);
        let short = ts(&[0.0; 10]);
        let long = ts(&[0.0; 14]);
        assert!(matches!(
            d_dtw_exact(&short, &long, &DtwConfig::default()),
            Err(Error::InfeasibleBand { radius: 1, difference: 4 })
        ));
    }

    #[test]
    fn dtw_matches_brute_force_when_unbanded() {
        let mut rng = rng_from_seed(21);
        for _ in 0..30 {
            let n = rng.random_range(2..7);
            let m = rng.random_range(2..7);
            let a = random_series(&mut rng, n);
            let b = random_series(&mut rng, m);
            let fast = d_dtw_exact(&a, &b, &DtwConfig::unconstrained()).unwrap();
            let slow = dtw_brute(a.values(), b.values());
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn keogh_flat_envelopes() {
        for frac in [0.05, 0.3, 1.0] {
            let cfg = DtwConfig { band_radius_fraction: frac };
            let lb = lb_keogh(&ts(&[0.0; 40]), &ts(&[5.0; 40]), &cfg).unwrap();
            assert!((lb - (25.0f64 * 40.0).sqrt()).abs() < 1e-12);
        }
        let y = ts(&[1.0, 4.0, -2.0, 0.5]);
        assert_eq!(lb_keogh(&y, &y, &DtwConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn envelope_matches_naive_window() {
        let mut rng = rng_from_seed(4);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        for r in [1, 3, 10, 100] {
            let (u, l) = envelope(&x, r);
            for i in 0..x.len() {
                let w = &x[i.saturating_sub(r)..(i + r + 1).min(x.len())];
                assert_eq!(u[i], w.iter().copied().fold(f64::MIN, f64::max));
                assert_eq!(l[i], w.iter().copied().fold(f64::MAX, f64::min));
            }
        }
    }

    #[test]
    fn keogh_below_dtw_on_random_pairs() {
        let mut rng = rng_from_seed(99);
        for _ in 0..100 {
            let n = rng.random_range(8..80);
            let cfg = DtwConfig { band_radius_fraction: rng.random_range(0.02..1.0) };
            let a = random_series(&mut rng, n);
            let b = random_series(&mut rng, n);
            let lb = lb_keogh(&a, &b, &cfg).unwrap();
            let d = d_dtw_exact(&a, &b, &cfg).unwrap();
            assert!(lb <= d + 1e-12, "{lb} > {d}");
            let tight = lb_keogh_max(&a, &b, &cfg).unwrap();
            assert!(lb <= tight && tight <= d + 1e-12);
            let feat = KeoghFeature::new(&a, &cfg).unwrap().bound(&KeoghFeature::new(&b, &cfg).unwrap()).unwrap();
            assert_eq!(feat, lb);
        }
    }

    fn ar1(a: f64, n: usize, seed: u64) -> TimeSeries {
        gen_filtered_noise(n, &RandomFilter::all_pole(&[a]).unwrap(), seed).unwrap()
    }

    #[test]
    fn cepstral_norm_oracles() {
        let cfg = WelchConfig::for_length(1 << 16);
        let wn = gen_white_noise(1 << 16, 1.0, 31).unwrap();
        assert!(cepstral_norm(&wn, &cfg).unwrap() <= 0.15);
        let y = ar1(0.5, 1 << 16, 32);
        let norm = cepstral_norm(&y, &cfg).unwrap();
        let expected = -(1.0f64 - 0.25).ln();
        assert!((norm - expected).abs() <= 0.2 * expected, "{norm}");
        let scaled = cepstral_norm(&y.scaled(10.0).unwrap(), &cfg).unwrap();
        assert!((scaled - norm).abs() < 1e-6);
    }

    #[test]
    fn cepstral_distance_oracles() {
        let cfg = WelchConfig::for_length(1 << 16);
        let y = ar1(0.6, 1 << 16, 40);
        assert_eq!(cepstral_distance(&y, &y, &cfg).unwrap(), 0.0);
        let same = cepstral_distance(&y, &ar1(0.6, 1 << 16, 41), &cfg).unwrap();
        assert!(same <= 0.1, "{same}");
        let d = cepstral_distance(&ar1(0.5, 1 << 16, 42), &ar1(-0.5, 1 << 16, 43), &cfg).unwrap();
        let expected = (1.5625f64 / 0.5625).ln();
        assert!((d - expected).abs() <= 0.15 * expected, "{d}");
    }

    #[test]
    fn extended_distance_on_ar1_pairs() {
        let cfg = WelchConfig::for_length(1 << 16);
        let pair = |a: f64, seed: u64| {
            let u = gen_white_noise(1 << 16, 1.0, seed).unwrap();
            let mut y = u.values().to_vec();
            RandomFilter::all_pole(&[a]).unwrap().apply(&mut y);
            IOPair::new(0, u, TimeSeries::new(y).unwrap()).unwrap()
        };
        let p1 = pair(0.5, 1);
        let p2 = pair(-0.5, 2);
        assert_eq!(extended_cepstral_distance(&p1, &p1, &cfg).unwrap(), 0.0);
        let d = extended_cepstral_distance(&p1, &p2, &cfg).unwrap();
        let expected = (1.5625f64 / 0.5625).ln();
        assert!((d - expected).abs() <= 0.15 * expected, "{d}");
        let orig = cepstral_distance(p1.output(), p2.output(), &cfg).unwrap();
        assert!((d - orig).abs() / (d + 1e-9) <= 0.2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn all_measures_symmetric(seed in any::<u64>(), n in 32usize..160) {
            let mut rng = rng_from_seed(seed);
            let a = random_series(&mut rng, n);
            let b = random_series(&mut rng, n);
            let ua = random_series(&mut rng, n);
            let ub = random_series(&mut rng, n);
            let dtw = DtwConfig::default();
            let welch = WelchConfig::for_length(n);
            prop_assert_eq!(d_euclidean(&a, &b).unwrap(), d_euclidean(&b, &a).unwrap());
            prop_assert_eq!(d_dtw_exact(&a, &b, &dtw).unwrap(), d_dtw_exact(&b, &a, &dtw).unwrap());
            prop_assert_eq!(lb_keogh(&a, &b, &dtw).unwrap(), lb_keogh(&b, &a, &dtw).unwrap());
            prop_assert_eq!(cepstral_distance(&a, &b, &welch).unwrap(), cepstral_distance(&b, &a, &welch).unwrap());
            let p1 = IOPair::new(0, ua, a.clone()).unwrap();
            let p2 = IOPair::new(1, ub, b.clone()).unwrap();
            let e12 = extended_cepstral_distance(&p1, &p2, &welch).unwrap();
            prop_assert_eq!(e12, extended_cepstral_distance(&p2, &p1, &welch).unwrap());
            prop_assert!(e12.is_finite() && e12 >= 0.0);
            prop_assert!(cepstral_norm(&a, &welch).unwrap() >= 0.0);
        }

        #[test]
        fn euclidean_triangle(seed in any::<u64>(), n in 2usize..64) {
            let mut rng = rng_from_seed(seed);
            let a = random_series(&mut rng, n);
            let b = random_series(&mut rng, n);
            let c = random_series(&mut rng, n);
            let ab = d_euclidean(&a, &b).unwrap();
            let bc = d_euclidean(&b, &c).unwrap();
            let ac = d_euclidean(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn extended_invariant_to_pair_scaling(seed in any::<u64>(), alpha in 0.01f64..100.0, beta in 0.01f64..100.0) {
            let mut rng = rng_from_seed(seed);
            let n = 256;
            let p1 = IOPair::new(0, random_series(&mut rng, n), random_series(&mut rng, n)).unwrap();
            let p2 = IOPair::new(1, random_series(&mut rng, n), random_series(&mut rng, n)).unwrap();
            let scaled = IOPair::new(0, p1.input().scaled(beta).unwrap(), p1.output().scaled(alpha).unwrap()).unwrap();
            let cfg = WelchConfig::for_length(n);
            let d = extended_cepstral_distance(&p1, &p2, &cfg).unwrap();
            let ds = extended_cepstral_distance(&scaled, &p2, &cfg).unwrap();
            prop_assert!((d - ds).abs() <= 1e-6 * (1.0 + d));
        }

        #[test]
        fn keogh_is_lower_bound(seed in any::<u64>(), n in 4usize..60, frac in 0.01f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let a = random_series(&mut rng, n);
            let b = random_series(&mut rng, n);
            let cfg = DtwConfig { band_radius_fraction: frac };
            prop_assert!(lb_keogh(&a, &b, &cfg).unwrap() <= d_dtw_exact(&a, &b, &cfg).unwrap() + 1e-12);
        }
    }
}
