//! Link functions mapping the conditional mean on (0,1) to the real line.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest distance from 0 and 1 allowed for a mean returned by an inverse
/// link. Keeps `μν` and `(1−μ)ν` strictly positive.
pub const MU_GUARD: f64 = f64::EPSILON;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Link {
    #[default]
    Logit,
    Probit,
    Cloglog,
    Loglog,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Normal quantile, polished by Newton steps on the CDF. The lower tail is
/// always solved so that small probabilities keep their relative accuracy.
fn probit(mu: f64) -> f64 {
    if mu > 0.5 {
        return -probit(1.0 - mu);
    }
    let n = std_normal();
    let mut z = n.inverse_cdf(mu);
    for _ in 0..2 {
        let density = n.pdf(z);
        if !(density > 0.0) {
            break;
        }
        z -= (n.cdf(z) - mu) / density;
    }
    z
}

impl Link {
    /// g(μ). No domain check; callers pass μ in (0,1).
    #[inline]
    pub fn forward(self, mu: f64) -> f64 {
        match self {
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Probit => probit(mu),
            Link::Cloglog => (-(-mu).ln_1p()).ln(),
            Link::Loglog => -(-mu.ln()).ln(),
        }
    }

    /// g⁻¹(η), clamped into `[MU_GUARD, 1 − MU_GUARD]`.
    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        let mu = match self {
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => std_normal().cdf(eta),
            Link::Cloglog => -(-eta.exp()).exp_m1(),
            Link::Loglog => (-(-eta).exp()).exp(),
        };
        mu.clamp(MU_GUARD, 1.0 - MU_GUARD)
    }

    /// g'(μ).
    #[inline]
    pub fn derivative(self, mu: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (mu * (1.0 - mu)),
            Link::Probit => {
                1.0 / std_normal().pdf(probit(mu))
            }
            Link::Cloglog => {
                let one_minus = 1.0 - mu;
                1.0 / (one_minus * -(-mu).ln_1p())
            }
            Link::Loglog => 1.0 / (mu * -mu.ln()),
        }
    }

    /// Returns `(g(μ), g⁻¹(g(μ)), g'(μ))`, rejecting μ outside (0,1).
    pub fn eval(self, mu: f64) -> Result<(f64, f64, f64)> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::Domain {
                function: "link",
                value: mu,
            });
        }
        let g = self.forward(mu);
        Ok((g, self.inverse(g), self.derivative(mu)))
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
            Link::Loglog => "loglog",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            "loglog" | "log-log" => Ok(Link::Loglog),
            other => Err(Error::InvalidSpec(format!("unknown link '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const ALL: [Link; 4] = [Link::Logit, Link::Probit, Link::Cloglog, Link::Loglog];

    #[test]
    fn logit_closed_forms() {
        let (g, back, dg) = Link::Logit.eval(0.5).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(back, 0.5);
        assert_relative_eq!(dg, 4.0);

        let (g, _, dg) = Link::Logit.eval(0.25).unwrap();
        assert_relative_eq!(g, (1.0f64 / 3.0).ln(), max_relative = 1e-15);
        assert_relative_eq!(g, -1.0986122886681098, max_relative = 1e-15);
        assert_relative_eq!(dg, 1.0 / (0.25 * 0.75), max_relative = 1e-15);

        let (_, back, _) = Link::Logit.eval(0.9).unwrap();
        assert!((back - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_boundary() {
        for link in ALL {
            assert!(link.eval(0.0).is_err());
            assert!(link.eval(1.0).is_err());
        }
    }

    #[test]
    fn round_trip_on_grid() {
        for link in ALL {
            let mut mu = 1e-6;
            while mu < 1.0 - 1e-6 {
                let back = link.inverse(link.forward(mu));
                assert!((back - mu).abs() <= 1e-12, "{link} at {mu}: {back}");
                mu += 1e-3;
            }
        }
    }

    #[test]
    fn strictly_monotone_with_nonzero_derivative() {
        for link in ALL {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let mu = i as f64 * 1e-3;
                let g = link.forward(mu);
                assert!(g > prev, "{link} not monotone at {mu}");
                assert!(link.derivative(mu) > 0.0);
                prev = g;
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for link in ALL {
            for &mu in &[0.05, 0.3, 0.5, 0.8, 0.97] {
                let h = 1e-6;
                let fd = (link.forward(mu + h) - link.forward(mu - h)) / (2.0 * h);
                assert_relative_eq!(link.derivative(mu), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("logit".parse::<Link>().unwrap(), Link::Logit);
        assert_eq!("log-log".parse::<Link>().unwrap(), Link::Loglog);
        assert!("identity".parse::<Link>().is_err());
    }
}
