//! Holding-time laws on transitions of a semi-Markov process.
//!
//! The conjugate posterior on a timed edge marginalizes the Weibull scale
//! over its Inverse-Gamma posterior. With the Weibull parametrized as
//! `f(t | θ, κ) = (κ/θ) t^{κ−1} exp(−t^κ/θ)` and `θ ~ IG(ζ, β)`, the
//! compound density ∫ f(t|θ,κ) f(θ|ζ,β) dθ has the closed form
//!
//!   f(t) = κ ζ β^ζ t^{κ−1} / (β + t^κ)^{ζ+1},
//!   F(t) = 1 − (β / (β + t^κ))^ζ,
//!
//! a Burr-type law. The acceptance suite re-derives both against adaptive
//! quadrature of the defining integral before anything relies on them.
//! Parallel edges collapse into weight-normalized mixtures; condensed paths
//! into numerically gridded convolutions.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::numeric::{gamma, ln_gamma};

/// A moment that may fail to exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(x) => Some(x),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }
}

/// Number of grid points used for numeric convolutions.
pub const CONV_GRID_POINTS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HoldingLaw {
    /// Weibull(θ, κ) with θ marginalized over IG(ζ, β).
    CompoundWeibullIg { zeta: f64, beta: f64, kappa: f64 },
    /// Weibull with a known scale (ground-truth generators, oracles).
    FixedWeibull { theta: f64, kappa: f64 },
    /// Weight-normalized mixture (parallel edges of an RDCEG).
    Mixture {
        weights: Vec<f64>,
        laws: Vec<HoldingLaw>,
    },
    /// Sum of independent component holding times, evaluated on a grid.
    Convolution(ConvolutionLaw),
    /// Untimed transition: all mass at zero, density reported as the
    /// constant 1 used for edges without holding times.
    Instant,
}

impl HoldingLaw {
    pub fn compound(zeta: f64, beta: f64, kappa: f64) -> Result<HoldingLaw> {
        if !(zeta > 0.0 && beta > 0.0 && kappa > 0.0) {
            return Err(RdcegError::InvalidParameter(format!(
                "compound law requires positive parameters, got zeta={zeta} beta={beta} kappa={kappa}"
            )));
        }
        Ok(HoldingLaw::CompoundWeibullIg { zeta, beta, kappa })
    }

    pub fn fixed_weibull(theta: f64, kappa: f64) -> Result<HoldingLaw> {
        if !(theta > 0.0 && kappa > 0.0) {
            return Err(RdcegError::InvalidParameter(format!(
                "Weibull requires positive parameters, got theta={theta} kappa={kappa}"
            )));
        }
        Ok(HoldingLaw::FixedWeibull { theta, kappa })
    }

    pub fn mixture(weights: Vec<f64>, laws: Vec<HoldingLaw>) -> Result<HoldingLaw> {
        if weights.len() != laws.len() || weights.is_empty() {
            return Err(RdcegError::InvalidParameter(
                "mixture weights and laws must have equal nonzero length".into(),
            ));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(RdcegError::InvalidParameter(
                "mixture weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(RdcegError::InvalidParameter(
                "mixture weights must have positive mass".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(HoldingLaw::Mixture { weights, laws })
    }

    pub fn convolution(laws: Vec<HoldingLaw>) -> Result<HoldingLaw> {
        if laws.is_empty() {
            return Err(RdcegError::InvalidParameter(
                "convolution needs at least one component".into(),
            ));
        }
        if laws.len() == 1 {
            return Ok(laws.into_iter().next().unwrap());
        }
        Ok(HoldingLaw::Convolution(ConvolutionLaw::new(laws)))
    }

    /// Density at `t ≥ 0`. For `Instant` this is the unit density convention
    /// used by untimed edges.
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                compound_density(*zeta, *beta, *kappa, t).unwrap_or(0.0)
            }
            HoldingLaw::FixedWeibull { theta, kappa } => weibull_density(*theta, *kappa, t),
            HoldingLaw::Mixture { weights, laws } => weights
                .iter()
                .zip(laws)
                .map(|(w, l)| w * l.density(t))
                .sum(),
            HoldingLaw::Convolution(conv) => conv.grid().density(t),
            HoldingLaw::Instant => 1.0,
        }
    }

    /// Cumulative distribution at `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                compound_cdf(*zeta, *beta, *kappa, t).unwrap_or(0.0)
            }
            HoldingLaw::FixedWeibull { theta, kappa } => 1.0 - (-t.powf(*kappa) / theta).exp(),
            HoldingLaw::Mixture { weights, laws } => {
                weights.iter().zip(laws).map(|(w, l)| w * l.cdf(t)).sum()
            }
            HoldingLaw::Convolution(conv) => conv.grid().cdf(t),
            HoldingLaw::Instant => 1.0,
        }
    }

    /// Draws one holding time. The compound law samples by the exact
    /// two-stage route: θ ~ IG(ζ, β), then Weibull(θ, κ). Convolutions sum
    /// exact component draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                let g = Gamma::new(*zeta, 1.0).expect("validated shape");
                let theta = *beta / g.sample(rng);
                sample_weibull(theta, *kappa, rng)
            }
            HoldingLaw::FixedWeibull { theta, kappa } => sample_weibull(*theta, *kappa, rng),
            HoldingLaw::Mixture { weights, laws } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, l) in weights.iter().zip(laws) {
                    acc += w;
                    if u <= acc {
                        return l.sample(rng);
                    }
                }
                laws.last().expect("nonempty mixture").sample(rng)
            }
            HoldingLaw::Convolution(conv) => conv.laws.iter().map(|l| l.sample(rng)).sum(),
            HoldingLaw::Instant => 0.0,
        }
    }

    pub fn mean(&self) -> Moment {
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                compound_moments(*zeta, *beta, *kappa).0
            }
            HoldingLaw::FixedWeibull { theta, kappa } => {
                Moment::Finite(theta.powf(1.0 / kappa) * gamma(1.0 + 1.0 / kappa))
            }
            HoldingLaw::Mixture { weights, laws } => {
                let mut total = 0.0;
                for (w, l) in weights.iter().zip(laws) {
                    match l.mean() {
                        Moment::Finite(m) => total += w * m,
                        Moment::Infinite if *w > 0.0 => return Moment::Infinite,
                        Moment::Infinite => {}
                    }
                }
                Moment::Finite(total)
            }
            HoldingLaw::Convolution(conv) => {
                let mut total = 0.0;
                for l in &conv.laws {
                    match l.mean() {
                        Moment::Finite(m) => total += m,
                        Moment::Infinite => return Moment::Infinite,
                    }
                }
                Moment::Finite(total)
            }
            HoldingLaw::Instant => Moment::Finite(0.0),
        }
    }

    pub fn variance(&self) -> Moment {
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                compound_moments(*zeta, *beta, *kappa).1
            }
            HoldingLaw::FixedWeibull { theta, kappa } => {
                let m1 = theta.powf(1.0 / kappa) * gamma(1.0 + 1.0 / kappa);
                let m2 = theta.powf(2.0 / kappa) * gamma(1.0 + 2.0 / kappa);
                Moment::Finite(m2 - m1 * m1)
            }
            HoldingLaw::Mixture { weights, laws } => {
                // E[X²] = Σ w (var + mean²); needs every component finite.
                let mut ex2 = 0.0;
                let mut ex = 0.0;
                for (w, l) in weights.iter().zip(laws) {
                    match (l.mean(), l.variance()) {
                        (Moment::Finite(m), Moment::Finite(v)) => {
                            ex += w * m;
                            ex2 += w * (v + m * m);
                        }
                        _ if *w > 0.0 => return Moment::Infinite,
                        _ => {}
                    }
                }
                Moment::Finite(ex2 - ex * ex)
            }
            HoldingLaw::Convolution(conv) => {
                let mut total = 0.0;
                for l in &conv.laws {
                    match l.variance() {
                        Moment::Finite(v) => total += v,
                        Moment::Infinite => return Moment::Infinite,
                    }
                }
                Moment::Finite(total)
            }
            HoldingLaw::Instant => Moment::Finite(0.0),
        }
    }

    /// Quantile by closed form where available, bisection otherwise.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0 - 1e-12);
        match self {
            HoldingLaw::CompoundWeibullIg { zeta, beta, kappa } => {
                (*beta * ((1.0 - p).powf(-1.0 / zeta) - 1.0)).powf(1.0 / kappa)
            }
            HoldingLaw::FixedWeibull { theta, kappa } => {
                (-theta * (1.0 - p).ln()).powf(1.0 / kappa)
            }
            HoldingLaw::Instant => 0.0,
            _ => {
                let mut hi = 1.0;
                while self.cdf(hi) < p && hi < 1e300 {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// A convolution with its lazily built evaluation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvolutionLaw {
    pub laws: Vec<HoldingLaw>,
    #[serde(skip)]
    grid: OnceLock<Arc<GridDensity>>,
}

impl ConvolutionLaw {
    pub fn new(laws: Vec<HoldingLaw>) -> Self {
        ConvolutionLaw {
            laws,
            grid: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &GridDensity {
        self.grid.get_or_init(|| Arc::new(conv_grid(&self.laws)))
    }
}

impl PartialEq for ConvolutionLaw {
    fn eq(&self, other: &Self) -> bool {
        self.laws == other.laws
    }
}

/// Weibull density in the θ-parametrization used throughout:
/// `(κ/θ) t^{κ−1} exp(−t^κ/θ)`.
pub fn weibull_density(theta: f64, kappa: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t == 0.0 {
        return match kappa.partial_cmp(&1.0).unwrap() {
            std::cmp::Ordering::Less => f64::INFINITY,
            std::cmp::Ordering::Equal => 1.0 / theta,
            std::cmp::Ordering::Greater => 0.0,
        };
    }
    (kappa / theta) * t.powf(kappa - 1.0) * (-t.powf(kappa) / theta).exp()
}

fn sample_weibull<R: Rng + ?Sized>(theta: f64, kappa: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // P(X > x) = exp(−x^κ/θ)
    (-theta * (1.0 - u).ln()).powf(1.0 / kappa)
}

/// Compound Weibull–Inverse-Gamma density at `t`.
pub fn compound_density(zeta: f64, beta: f64, kappa: f64, t: f64) -> Result<f64> {
    check_compound(zeta, beta, kappa)?;
    if t < 0.0 {
        return Err(RdcegError::InvalidParameter(format!("negative time {t}")));
    }
    if t == 0.0 {
        return Ok(match kappa.partial_cmp(&1.0).unwrap() {
            std::cmp::Ordering::Less => f64::INFINITY,
            std::cmp::Ordering::Equal => zeta / beta,
            std::cmp::Ordering::Greater => 0.0,
        });
    }
    // log-space evaluation; t^κ can dwarf β without overflowing the ratio
    let log = kappa.ln() + zeta * beta.ln() + zeta.ln() + (kappa - 1.0) * t.ln()
        - (zeta + 1.0) * (beta + t.powf(kappa)).ln();
    Ok(log.exp())
}

/// Compound cumulative distribution: `1 − (β/(β+t^κ))^ζ`.
pub fn compound_cdf(zeta: f64, beta: f64, kappa: f64, t: f64) -> Result<f64> {
    check_compound(zeta, beta, kappa)?;
    if t < 0.0 {
        return Err(RdcegError::InvalidParameter(format!("negative time {t}")));
    }
    Ok(1.0 - (beta / (beta + t.powf(kappa))).powf(zeta))
}

/// Closed-form mean and variance of the compound law:
/// mean = Γ(ζ−1/κ) Γ(1+1/κ) β^{1/κ} / Γ(ζ)   (exists iff ζ > 1/κ),
/// `E[X²]` = Γ(ζ−2/κ) Γ(1+2/κ) β^{2/κ} / Γ(ζ)  (exists iff ζ > 2/κ).
pub fn compound_moments(zeta: f64, beta: f64, kappa: f64) -> (Moment, Moment) {
    let mean = if zeta > 1.0 / kappa {
        let ln = ln_gamma(zeta - 1.0 / kappa) + ln_gamma(1.0 + 1.0 / kappa) + beta.ln() / kappa
            - ln_gamma(zeta);
        Moment::Finite(ln.exp())
    } else {
        Moment::Infinite
    };
    let variance = if zeta > 2.0 / kappa {
        let ln2 =
            ln_gamma(zeta - 2.0 / kappa) + ln_gamma(1.0 + 2.0 / kappa) + 2.0 * beta.ln() / kappa
                - ln_gamma(zeta);
        let m = mean.finite().expect("mean exists when variance does");
        Moment::Finite(ln2.exp() - m * m)
    } else {
        Moment::Infinite
    };
    (mean, variance)
}

fn check_compound(zeta: f64, beta: f64, kappa: f64) -> Result<()> {
    if !(zeta > 0.0 && beta > 0.0 && kappa > 0.0) {
        return Err(RdcegError::InvalidParameter(format!(
            "compound law parameters must be positive: zeta={zeta} beta={beta} kappa={kappa}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Grid-based convolution.

/// Density table on a uniform grid over `[0, hi]`.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub hi: f64,
    pub step: f64,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl GridDensity {
    fn from_law(law: &HoldingLaw, hi: f64, points: usize) -> GridDensity {
        let step = hi / (points - 1) as f64;
        let density: Vec<f64> = (0..points)
            .map(|i| {
                let t = i as f64 * step;
                let d = law.density(t);
                if d.is_finite() {
                    d
                } else {
                    // Integrable singularities at 0 (κ < 1) are approximated
                    // by the cell-average just right of zero.
                    law.cdf(step * 0.5) / (step * 0.5)
                }
            })
            .collect();
        let cdf = cumtrapz(&density, step);
        GridDensity {
            hi,
            step,
            density,
            cdf,
        }
    }

    fn convolve_with(&self, other: &GridDensity) -> GridDensity {
        debug_assert_eq!(self.density.len(), other.density.len());
        let n = self.density.len();
        let step = self.step;
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            // trapezoid over s in [0, t_k] of f(s) g(t_k - s)
            let mut acc = 0.0;
            for i in 0..=k {
                let w = if i == 0 || i == k { 0.5 } else { 1.0 };
                acc += w * self.density[i] * other.density[k - i];
            }
            *slot = acc * step;
        }
        let cdf = cumtrapz(&out, step);
        GridDensity {
            hi: self.hi,
            step,
            density: out,
            cdf,
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        self.interp(&self.density, t)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t >= self.hi {
            return self.cdf.last().unwrap().min(1.0);
        }
        self.interp(&self.cdf, t).min(1.0)
    }

    fn interp(&self, table: &[f64], t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= self.hi {
            return *table.last().unwrap();
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        let frac = x - i as f64;
        table[i] * (1.0 - frac) + table[(i + 1).min(table.len() - 1)] * frac
    }
}

fn cumtrapz(density: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(density.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        out.push(acc);
    }
    out
}

/// Builds the convolution grid for a set of component laws. The grid spans
/// eight times the sum of component means when those are finite, falling
/// back to summed high quantiles for heavy-tailed components.
pub fn conv_grid(laws: &[HoldingLaw]) -> GridDensity {
    let mut hi = 0.0;
    let mut means_ok = true;
    for l in laws {
        match l.mean() {
            Moment::Finite(m) => hi += m,
            Moment::Infinite => {
                means_ok = false;
                break;
            }
        }
    }
    let hi = if means_ok && hi > 0.0 {
        hi * 8.0
    } else {
        laws.iter().map(|l| l.quantile(0.999)).sum::<f64>().max(1.0) * 1.5
    };
    let mut grid = GridDensity::from_law(&laws[0], hi, CONV_GRID_POINTS);
    for l in &laws[1..] {
        let g = GridDensity::from_law(l, hi, CONV_GRID_POINTS);
        grid = grid.convolve_with(&g);
    }
    grid
}
