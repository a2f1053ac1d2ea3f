//! Fair randomizations of the initial dollar and the phi-games built on them.
//!
//! Before trading, each player may swap their dollar for a random wealth
//! `W >= 0` with `E[W] <= 1`. The investment game pays
//! `E[phi(W1 V_t(b) / (W2 V_t(c)))]` for an increasing performance measure
//! `phi`; the primitive game drops the market and pays `E[phi(W1 / W2)]`.
//! Both payoffs are estimated here by Monte Carlo.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{parallel_samples, stream_rng, Estimate, Substream};
use crate::market::MarketSpec;
use crate::simulator::simulate_terminal;

const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FairRandomization {
    /// Keep the dollar.
    Degenerate,
    /// `W ~ uniform(0, 2)`.
    Uniform02,
    /// `W = exp(-s^2 / 2 + s Z)` with `Z` standard normal.
    LogNormal { s: f64 },
    /// Finitely many values; build with [`FairRandomization::discrete`].
    Discrete { atoms: Vec<(f64, f64)> },
}

impl FairRandomization {
    pub fn lognormal(s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lognormal scale {s} must be >= 0"
            )));
        }
        Ok(Self::LogNormal { s })
    }

    /// `(value, probability)` pairs with nonnegative values, positive
    /// probabilities summing to 1 and mean at most 1.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "discrete randomization needs atoms".into(),
            ));
        }
        if atoms
            .iter()
            .any(|&(v, p)| !(v >= 0.0 && v.is_finite() && p > 0.0))
        {
            return Err(Error::InvalidArgument(
                "discrete randomization needs values >= 0 and probabilities > 0".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "discrete probabilities sum to {total}, expected 1"
            )));
        }
        let w = Self::Discrete { atoms };
        let mean = w.mean();
        if mean > 1.0 + MEAN_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "randomization has mean {mean} > 1 and is not fair"
            )));
        }
        Ok(w)
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Degenerate | Self::Uniform02 | Self::LogNormal { .. } => 1.0,
            Self::Discrete { atoms } => atoms.iter().map(|(v, p)| v * p).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Degenerate => 1.0,
            Self::Uniform02 => 2.0 * rng.random::<f64>(),
            Self::LogNormal { s } => {
                let z: f64 = StandardNormal.sample(rng);
                (-0.5 * s * s + s * z).exp()
            }
            Self::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().expect("nonempty").0
            }
        }
    }
}

impl fmt::Display for FairRandomization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Degenerate => write!(f, "degenerate"),
            Self::Uniform02 => write!(f, "uniform"),
            Self::LogNormal { s } => write!(f, "lognormal:{s}"),
            Self::Discrete { atoms } => {
                let parts: Vec<String> = atoms.iter().map(|(v, p)| format!("{v}:{p}")).collect();
                write!(f, "discrete:{}", parts.join(","))
            }
        }
    }
}

/// `degenerate`, `uniform`, `lognormal:<s>` or `discrete:<v>:<p>,<v>:<p>,...`.
impl FromStr for FairRandomization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "degenerate" => Ok(Self::Degenerate),
            "uniform" => Ok(Self::Uniform02),
            "lognormal" => Self::lognormal(parse_number(args, "lognormal scale")?),
            "discrete" => {
                let atoms = args
                    .split(',')
                    .map(|pair| {
                        let (v, p) = pair.split_once(':').ok_or_else(|| {
                            Error::InvalidArgument(format!("discrete atom `{pair}` is not v:p"))
                        })?;
                        Ok((
                            parse_number(v, "atom value")?,
                            parse_number(p, "atom probability")?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::discrete(atoms)
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown randomization `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerformanceMeasure {
    /// `1` when the ratio is at least `alpha`, else `0`.
    IndicatorThreshold { alpha: f64 },
    /// `R^gamma`, `gamma >= 0`.
    Power { gamma: f64 },
    /// `R / (R + 1)`, the numerator player's share of total wealth.
    RatioShare,
}

impl PerformanceMeasure {
    pub fn indicator(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold {alpha} must be >= 0"
            )));
        }
        Ok(Self::IndicatorThreshold { alpha })
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "exponent {gamma} must be >= 0"
            )));
        }
        Ok(Self::Power { gamma })
    }

    /// `phi(ratio)`. A ratio of `+inf` (denominator wealth 0) is allowed.
    pub fn evaluate(&self, ratio: f64) -> Result<f64> {
        if !(ratio >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wealth ratio {ratio} must be >= 0"
            )));
        }
        Ok(match *self {
            Self::IndicatorThreshold { alpha } => {
                if ratio >= alpha {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Power { gamma } => ratio.powf(gamma),
            Self::RatioShare => {
                if ratio.is_infinite() {
                    1.0
                } else {
                    ratio / (ratio + 1.0)
                }
            }
        })
    }
}

/// `indicator:<alpha>`, `power:<gamma>` or `share`.
impl FromStr for PerformanceMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "indicator" if args.is_empty() => Self::indicator(1.0),
            "indicator" => Self::indicator(parse_number(args, "threshold")?),
            "power" if args.is_empty() => Self::power(1.0),
            "power" => Self::power(parse_number(args, "exponent")?),
            "share" => Ok(Self::RatioShare),
            _ => Err(Error::InvalidArgument(format!(
                "unknown performance measure `{s}`"
            ))),
        }
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{what} `{s}` is not a number")))
}

/// `numerator / denominator` with `x / 0 = +inf` for `x > 0` and `0 / 0 = 1`.
pub fn wealth_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        if numerator == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        numerator / denominator
    }
}

/// Monte Carlo estimate of `E[phi(W1 / W2)]` with independent `W1`, `W2`.
pub fn primitive_game_payoff(
    w1: &FairRandomization,
    w2: &FairRandomization,
    phi: &PerformanceMeasure,
    n_samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let values = parallel_samples(n_samples, |i| {
        let mut rng = stream_rng(seed, i, Substream::Randomization);
        let a = w1.sample(&mut rng);
        let b = w2.sample(&mut rng);
        phi.evaluate(wealth_ratio(a, b))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Monte Carlo estimate of `E[phi(W1 V_t(b) / (W2 V_t(c)))]`.
///
/// Both rules ride the same simulated market path; the randomizations are
/// drawn from a substream independent of the market randomness.
#[allow(clippy::too_many_arguments)]
pub fn investment_game_payoff(
    w1: &FairRandomization,
    w2: &FairRandomization,
    b: &DVector<f64>,
    c: &DVector<f64>,
    phi: &PerformanceMeasure,
    t: f64,
    spec: &MarketSpec,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let terminal = simulate_terminal(spec, &[b.clone(), c.clone()], t, seed, n_paths)?;
    let values = parallel_samples(n_paths, |i| {
        let path = &terminal[i as usize];
        let market_ratio = (path.log_wealth[0] - path.log_wealth[1]).exp();
        let mut rng = stream_rng(seed, i, Substream::Randomization);
        let a = w1.sample(&mut rng);
        let d = w2.sample(&mut rng);
        phi.evaluate(wealth_ratio(a * market_ratio, d))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(FairRandomization::Degenerate.sample(&mut rng), 1.0);
        }
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let w = FairRandomization::Uniform02.sample(&mut rng);
            assert!((0.0..2.0).contains(&w));
        }
    }

    #[test]
    fn discrete_validation() {
        assert!(FairRandomization::discrete(vec![(0.0, 0.5), (2.0, 0.5)]).is_ok());
        assert!(FairRandomization::discrete(vec![(0.0, 0.4), (3.0, 0.6)]).is_err());
        assert!(FairRandomization::discrete(vec![(-1.0, 0.5), (3.0, 0.5)]).is_err());
        assert!(FairRandomization::discrete(vec![(1.0, 0.5)]).is_err());
    }

    #[test]
    fn parses_specs() {
        assert_eq!(
            "uniform".parse::<FairRandomization>().unwrap(),
            FairRandomization::Uniform02
        );
        assert_eq!(
            "lognormal:0.5".parse::<FairRandomization>().unwrap(),
            FairRandomization::LogNormal { s: 0.5 }
        );
        let d: FairRandomization = "discrete:0:0.5,2:0.5".parse().unwrap();
        assert_eq!(d.mean(), 1.0);
        assert_eq!(d.to_string().parse::<FairRandomization>().unwrap(), d);
        assert!("gauss".parse::<FairRandomization>().is_err());
        assert_eq!(
            "indicator:1".parse::<PerformanceMeasure>().unwrap(),
            PerformanceMeasure::IndicatorThreshold { alpha: 1.0 }
        );
        assert_eq!(
            "share".parse::<PerformanceMeasure>().unwrap(),
            PerformanceMeasure::RatioShare
        );
        assert!("power:-1".parse::<PerformanceMeasure>().is_err());
    }

    #[test]
    fn phi_examples() {
        let ind = PerformanceMeasure::indicator(1.0).unwrap();
        assert_eq!(ind.evaluate(2.0).unwrap(), 1.0);
        assert_eq!(ind.evaluate(0.5).unwrap(), 0.0);
        assert_eq!(ind.evaluate(1.0).unwrap(), 1.0);
        let id = PerformanceMeasure::power(1.0).unwrap();
        assert_eq!(id.evaluate(3.7).unwrap(), 3.7);
        assert_eq!(PerformanceMeasure::RatioShare.evaluate(1.0).unwrap(), 0.5);
        assert_eq!(
            PerformanceMeasure::RatioShare
                .evaluate(f64::INFINITY)
                .unwrap(),
            1.0
        );
        assert!(id.evaluate(-0.1).is_err());
        assert!(id.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(wealth_ratio(0.0, 0.0), 1.0);
        assert_eq!(wealth_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(wealth_ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn primitive_examples() {
        let id = PerformanceMeasure::power(1.0).unwrap();
        let e = primitive_game_payoff(
            &FairRandomization::Degenerate,
            &FairRandomization::Degenerate,
            &id,
            1000,
            3,
        )
        .unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.stderr, 0.0);

        let ind = PerformanceMeasure::indicator(1.0).unwrap();
        let e = primitive_game_payoff(
            &FairRandomization::Uniform02,
            &FairRandomization::Uniform02,
            &ind,
            100_000,
            4,
        )
        .unwrap();
        assert!(e.agrees_with(0.5, 3.0), "{e:?}");

        let e = primitive_game_payoff(
            &FairRandomization::Uniform02,
            &FairRandomization::Degenerate,
            &ind,
            100_000,
            5,
        )
        .unwrap();
        assert!(e.agrees_with(0.5, 3.0), "{e:?}");
        assert!(primitive_game_payoff(
            &FairRandomization::Degenerate,
            &FairRandomization::Degenerate,
            &ind,
            0,
            1
        )
        .is_err());
    }

    #[test]
    fn discrete_zero_draws_use_conventions() {
        let w = FairRandomization::discrete(vec![(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let share =
            primitive_game_payoff(&w, &w, &PerformanceMeasure::RatioShare, 20_000, 8).unwrap();
        // Outcomes: 0/0 -> 1/2, 0/2 -> 0, 2/0 -> 1, 2/2 -> 1/2; each w.p. 1/4.
        assert!(share.agrees_with(0.5, 3.0), "{share:?}");
    }

    #[test]
    fn identical_rules_cancel() {
        let spec = MarketSpec::example();
        let ind = PerformanceMeasure::indicator(1.0).unwrap();
        let e = investment_game_payoff(
            &FairRandomization::Degenerate,
            &FairRandomization::Degenerate,
            &rule(&[0.8]),
            &rule(&[0.8]),
            &ind,
            3.0,
            &spec,
            500,
            9,
        )
        .unwrap();
        assert_eq!(e.estimate, 1.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let spec = MarketSpec::example();
        let run = || {
            investment_game_payoff(
                &FairRandomization::Uniform02,
                &FairRandomization::lognormal(0.3).unwrap(),
                &rule(&[0.585]),
                &rule(&[1.1]),
                &PerformanceMeasure::RatioShare,
                2.0,
                &spec,
                2_000,
                77,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
