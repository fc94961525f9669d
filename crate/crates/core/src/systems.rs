//! Parameterized scalar SDE systems `dX = f(r, X) dt + σ(X) dB`.
//!
//! Systems built from polynomial coefficient lists carry their symbolic
//! form so they can be written back to config files. Closure-backed systems
//! are accepted programmatically but have no serializable spec.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type DriftFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
type DiffusionFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Names of the builtin systems, in catalog order.
pub const BUILTIN_NAMES: [&str; 3] = ["saddle-node", "transcritical", "pitchfork"];

/// One polynomial term `(constant + r_multiplier * r) * x^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub power: u32,
    pub constant: f64,
    pub r_multiplier: f64,
}

impl PolyTerm {
    pub fn new(power: u32, constant: f64, r_multiplier: f64) -> Self {
        Self {
            power,
            constant,
            r_multiplier,
        }
    }
}

/// A polynomial in `x` whose coefficients are affine in the parameter `r`.
///
/// Terms are kept sorted by power with no duplicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64, f64)>", into = "Vec<(u32, f64, f64)>")]
pub struct Polynomial {
    terms: Vec<PolyTerm>,
}

impl Polynomial {
    pub fn new(mut terms: Vec<PolyTerm>) -> Result<Self> {
        for t in &terms {
            if !t.constant.is_finite() || !t.r_multiplier.is_finite() {
                return Err(Error::InvalidPolynomial(format!(
                    "non-finite coefficient for power {}",
                    t.power
                )));
            }
        }
        terms.sort_by_key(|t| t.power);
        if let Some(w) = terms.windows(2).find(|w| w[0].power == w[1].power) {
            return Err(Error::DuplicatePower(w[0].power));
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn depends_on_r(&self) -> bool {
        self.terms.iter().any(|t| t.r_multiplier != 0.0)
    }

    pub fn eval(&self, r: f64, x: f64) -> f64 {
        self.terms.iter().fold(0.0, |acc, t| {
            acc + (t.constant + t.r_multiplier * r) * x.powi(t.power as i32)
        })
    }
}

impl TryFrom<Vec<(u32, f64, f64)>> for Polynomial {
    type Error = Error;

    fn try_from(raw: Vec<(u32, f64, f64)>) -> Result<Self> {
        Polynomial::new(
            raw.into_iter()
                .map(|(p, c, m)| PolyTerm::new(p, c, m))
                .collect(),
        )
    }
}

impl From<Polynomial> for Vec<(u32, f64, f64)> {
    fn from(p: Polynomial) -> Self {
        p.terms
            .into_iter()
            .map(|t| (t.power, t.constant, t.r_multiplier))
            .collect()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let monomial = |p: u32| match p {
            0 => String::new(),
            1 => "x".to_string(),
            p => format!("x^{p}"),
        };
        for (i, t) in self.terms.iter().enumerate() {
            let x = monomial(t.power);
            let (neg, body) = match (t.constant, t.r_multiplier) {
                (c, m) if m == 0.0 || c == 0.0 => {
                    let (k, r) = if m == 0.0 { (c, "") } else { (m, "r") };
                    let factors: Vec<&str> = [r, x.as_str()]
                        .into_iter()
                        .filter(|s| !s.is_empty())
                        .collect();
                    let body = if factors.is_empty() {
                        format!("{}", k.abs())
                    } else if k.abs() == 1.0 {
                        factors.join("*")
                    } else {
                        format!("{}*{}", k.abs(), factors.join("*"))
                    };
                    (k < 0.0, body)
                }
                (c, m) if x.is_empty() => (false, format!("({c} + {m}*r)")),
                (c, m) => (false, format!("({c} + {m}*r)*{x}")),
            };
            match (i, neg) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => write!(f, "{body}")?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

/// A scalar SDE with drift `f(r, x)` and diffusion amplitude `σ(x)`.
///
/// The diffusion is stored as `σ`, not `σ²`. Values are immutable and cheap to
/// clone; clones share the underlying closures.
#[derive(Clone)]
pub struct SdeSystem {
    name: String,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    drift_spec: Option<Polynomial>,
    diffusion_spec: Option<Polynomial>,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("name", &self.name)
            .field("drift_spec", &self.drift_spec)
            .field("diffusion_spec", &self.diffusion_spec)
            .finish()
    }
}

impl SdeSystem {
    /// Builds a system from arbitrary closures. Such systems cannot be
    /// serialized.
    pub fn from_fns<F, G>(name: impl Into<String>, drift: F, diffusion: G) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_spec: None,
            diffusion_spec: None,
        }
    }

    /// Builds a system from polynomial drift and diffusion.
    ///
    /// The diffusion may not depend on `r`.
    pub fn polynomial(
        name: impl Into<String>,
        drift: Polynomial,
        diffusion: Polynomial,
    ) -> Result<Self> {
        if diffusion.depends_on_r() {
            return Err(Error::InvalidPolynomial(
                "diffusion must not depend on the parameter r".into(),
            ));
        }
        let d = drift.clone();
        let s = diffusion.clone();
        Ok(Self {
            name: name.into(),
            drift: Arc::new(move |r, x| d.eval(r, x)),
            diffusion: Arc::new(move |x| s.eval(0.0, x)),
            drift_spec: Some(drift),
            diffusion_spec: Some(diffusion),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn drift(&self, r: f64, x: f64) -> f64 {
        (self.drift)(r, x)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    pub fn drift_spec(&self) -> Option<&Polynomial> {
        self.drift_spec.as_ref()
    }

    pub fn diffusion_spec(&self) -> Option<&Polynomial> {
        self.diffusion_spec.as_ref()
    }

    /// The same drift with the noise switched off.
    pub fn deterministic(&self) -> Self {
        Self {
            name: self.name.clone(),
            drift: Arc::clone(&self.drift),
            diffusion: Arc::new(|_| 0.0),
            drift_spec: self.drift_spec.clone(),
            diffusion_spec: Some(Polynomial::zero()),
        }
    }

    /// Replaces the diffusion by `multiplier * x` (geometric noise).
    pub fn with_linear_noise(&self, multiplier: f64) -> Self {
        Self {
            diffusion: Arc::new(move |x| multiplier * x),
            diffusion_spec: Some(Polynomial {
                terms: vec![PolyTerm::new(1, multiplier, 0.0)],
            }),
            ..self.clone()
        }
    }
}

/// Parses coefficient triples `(power, constant, r_multiplier)` into a system.
pub fn parse_polynomial_system(
    drift_coeffs: &[(u32, f64, f64)],
    diffusion_coeffs: &[(u32, f64, f64)],
) -> Result<SdeSystem> {
    let drift = Polynomial::try_from(drift_coeffs.to_vec())?;
    let diffusion = Polynomial::try_from(diffusion_coeffs.to_vec())?;
    SdeSystem::polynomial("polynomial", drift, diffusion)
}

fn poly(terms: &[(u32, f64, f64)]) -> Polynomial {
    Polynomial::try_from(terms.to_vec()).expect("builtin polynomial is valid")
}

/// Looks up one of the builtin systems, all with `σ(x) = x`.
pub fn lookup_builtin(name: &str) -> Result<SdeSystem> {
    let (drift, drift_spec): (Arc<DriftFn>, Polynomial) = match name {
        "saddle-node" => (
            Arc::new(|r, x| r + x * x),
            poly(&[(0, 0.0, 1.0), (2, 1.0, 0.0)]),
        ),
        "transcritical" => (
            Arc::new(|r, x| r * x - x * x),
            poly(&[(1, 0.0, 1.0), (2, -1.0, 0.0)]),
        ),
        "pitchfork" => (
            Arc::new(|r, x| r * x - x * x * x),
            poly(&[(1, 0.0, 1.0), (3, -1.0, 0.0)]),
        ),
        other => {
            return Err(Error::UnknownSystem {
                name: other.to_string(),
                valid: BUILTIN_NAMES.join(", "),
            })
        }
    };
    Ok(SdeSystem {
        name: name.to_string(),
        drift,
        diffusion: Arc::new(|x| x),
        drift_spec: Some(drift_spec),
        diffusion_spec: Some(poly(&[(1, 1.0, 0.0)])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtin_examples() {
        let p = lookup_builtin("pitchfork").unwrap();
        assert_eq!(p.drift(1.0, 2.0), -6.0);
        let s = lookup_builtin("saddle-node").unwrap();
        assert_eq!(s.drift(0.0, 0.0), 0.0);
        let t = lookup_builtin("transcritical").unwrap();
        assert_eq!(t.drift(2.0, 2.0), 0.0);
        assert_eq!(t.diffusion(-3.5), -3.5);
    }

    #[test]
    fn unknown_name_lists_valid_keys() {
        let err = lookup_builtin("hopf").unwrap_err();
        let msg = err.to_string();
        for name in BUILTIN_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn saddle_node_from_coefficients() {
        let sys =
            parse_polynomial_system(&[(0, 0.0, 1.0), (2, 1.0, 0.0)], &[(1, 1.0, 0.0)]).unwrap();
        let builtin = lookup_builtin("saddle-node").unwrap();
        for &(r, x) in &[(-1.0, 0.3), (0.5, -2.0), (2.0, 7.25)] {
            assert_eq!(sys.drift(r, x), builtin.drift(r, x));
            assert_eq!(sys.diffusion(x), builtin.diffusion(x));
        }
    }

    #[test]
    fn empty_lists_give_zero_system() {
        let sys = parse_polynomial_system(&[], &[]).unwrap();
        assert_eq!(sys.drift(3.0, 1.5), 0.0);
        assert_eq!(sys.diffusion(1.5), 0.0);
    }

    #[test]
    fn linear_sde() {
        let sys = parse_polynomial_system(&[(1, 0.0, 1.0)], &[(1, 0.5, 0.0)]).unwrap();
        assert_eq!(sys.drift(-2.0, 3.0), -6.0);
        assert_eq!(sys.diffusion(3.0), 1.5);
    }

    #[test]
    fn duplicate_power_rejected() {
        let err = parse_polynomial_system(&[(2, 1.0, 0.0), (2, 0.0, 1.0)], &[]).unwrap_err();
        assert!(matches!(err, Error::DuplicatePower(2)));
    }

    #[test]
    fn r_dependent_diffusion_rejected() {
        assert!(parse_polynomial_system(&[], &[(1, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn deterministic_drops_noise() {
        let p = lookup_builtin("pitchfork").unwrap().deterministic();
        assert_eq!(p.diffusion(4.0), 0.0);
        assert_eq!(p.drift(1.0, 2.0), -6.0);
    }

    #[test]
    fn builtin_specs_match_closures() {
        for name in BUILTIN_NAMES {
            let sys = lookup_builtin(name).unwrap();
            let d = sys.drift_spec().unwrap();
            let s = sys.diffusion_spec().unwrap();
            for i in -20..=20 {
                let x = i as f64 * 0.37;
                let r = i as f64 * -0.11;
                assert_eq!(d.eval(r, x), sys.drift(r, x), "{name} at ({r},{x})");
                assert_eq!(s.eval(r, x), sys.diffusion(x));
            }
        }
    }

    fn direct(terms: &[(u32, f64, f64)], r: f64, x: f64) -> f64 {
        terms
            .iter()
            .map(|&(p, c, m)| (c + m * r) * (0..p).map(|_| x).product::<f64>())
            .sum()
    }

    proptest! {
        #[test]
        fn polynomial_round_trip(
            raw in proptest::collection::btree_map(0u32..6, (-3.0f64..3.0, -3.0f64..3.0), 0..5),
            r in -5.0f64..5.0,
            x in -10.0f64..10.0,
        ) {
            let terms: Vec<(u32, f64, f64)> = raw.into_iter().map(|(p, (c, m))| (p, c, m)).collect();
            let sys = parse_polynomial_system(&terms, &[]).unwrap();
            let expected = direct(&terms, r, x);
            let got = sys.drift(r, x);
            let scale: f64 = terms
                .iter()
                .map(|&(p, c, m)| ((c + m * r) * x.powi(p as i32)).abs())
                .sum::<f64>()
                .max(1e-300);
            prop_assert!((got - expected).abs() <= 1e-14 * scale);

            let spec: Vec<(u32, f64, f64)> = sys.drift_spec().unwrap().clone().into();
            let again = parse_polynomial_system(&spec, &[]).unwrap();
            prop_assert_eq!(again.drift(r, x), got);
        }
    }
}
