use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Largest finite STC renewal cap accepted when the STC state is augmented
/// with a renewal counter.
pub const MAX_FINITE_CAP: u32 = 480;

/// Distribution family of match-specific productivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ProductivitySpec {
    /// `ln z ~ N(location, scale^2)`, truncated at the grid quantiles.
    Lognormal { location: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl ProductivitySpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        match *self {
            ProductivitySpec::Lognormal { location, scale } => {
                if !location.is_finite() {
                    return Err(ParamError::new("productivity_spec", "lognormal location must be finite"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(ParamError::new("productivity_spec", "lognormal scale must be > 0"));
                }
            }
            ProductivitySpec::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(ParamError::new("productivity_spec", "uniform bounds need lower < upper"));
                }
            }
        }
        Ok(())
    }
}

/// Maximum number of consecutive STC periods before the match must be
/// converted to an LTC or dissolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RenewalCap {
    Finite(u32),
    Unbounded,
}

impl RenewalCap {
    pub fn is_unbounded(self) -> bool {
        matches!(self, RenewalCap::Unbounded)
    }

    /// Number of STC counter states the value functions carry.
    pub fn counter_states(self) -> usize {
        match self {
            RenewalCap::Finite(k) => k as usize,
            RenewalCap::Unbounded => 1,
        }
    }
}

impl fmt::Display for RenewalCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenewalCap::Finite(k) => write!(f, "{k}"),
            RenewalCap::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for RenewalCap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RenewalCap::Finite(k) => s.serialize_u32(*k),
            RenewalCap::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for RenewalCap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(i64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(k) if k >= 1 && k <= u32::MAX as i64 => Ok(RenewalCap::Finite(k as u32)),
            Repr::Count(k) => Err(serde::de::Error::custom(format!(
                "stc_renewal_cap must be a positive integer, got {k}"
            ))),
            Repr::Word(w) if w == "unbounded" || w == "inf" => Ok(RenewalCap::Unbounded),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "stc_renewal_cap must be a positive integer or \"unbounded\", got {w:?}"
            ))),
        }
    }
}

/// Structural primitives of the three-sector economy. One model period is one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Per-period interest rate r; the discount factor is 1/(1+r).
    pub discount_rate: f64,
    /// Flow value of non-employment b.
    pub unemployment_flow: f64,
    /// Per-period cost of an open vacancy c.
    pub vacancy_cost: f64,
    /// Severance f, paid when an LTC match is dissolved.
    pub firing_cost: f64,
    /// Informal output scale a in (0, 1].
    pub informal_penalty: f64,
    /// On-the-job search intensity of informal workers.
    pub otj_search_rate: f64,
    /// Worker share of match surplus.
    pub bargaining_weight: f64,
    pub matching_efficiency: f64,
    pub matching_elasticity: f64,
    pub productivity_spec: ProductivitySpec,
    pub stc_renewal_cap: RenewalCap,
    pub grid_size: usize,
    /// Probability that an ongoing match redraws its productivity from F in a
    /// given period. 1.0 means a fresh draw at every reassessment.
    pub redraw_prob: f64,
    /// Logit scale of the unemployed's allocation across the three markets.
    /// 0 is the hard maximum.
    pub search_dispersion: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ModelParams {
    /// Default scenario used by tests, the CLI and the benches. Not a calibration.
    pub fn baseline() -> Self {
        Self {
            discount_rate: 0.004,
            unemployment_flow: 0.4,
            vacancy_cost: 0.05,
            firing_cost: 2.0,
            informal_penalty: 0.85,
            otj_search_rate: 0.0,
            bargaining_weight: 0.1,
            matching_efficiency: 0.45,
            matching_elasticity: 0.5,
            productivity_spec: ProductivitySpec::Lognormal {
                location: 0.0,
                scale: 0.6,
            },
            stc_renewal_cap: RenewalCap::Unbounded,
            grid_size: 501,
            redraw_prob: 0.03,
            search_dispersion: 0.3,
        }
    }

    pub fn discount_factor(&self) -> f64 {
        1.0 / (1.0 + self.discount_rate)
    }

    /// Returns the parameters unchanged when every invariant holds.
    pub fn validate(self) -> Result<Self, ParamError> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), ParamError> {
        fn finite(field: &'static str, x: f64) -> Result<(), ParamError> {
            if x.is_finite() {
                Ok(())
            } else {
                Err(ParamError::new(field, "must be finite"))
            }
        }
        finite("discount_rate", self.discount_rate)?;
        if self.discount_rate <= 0.0 {
            return Err(ParamError::new("discount_rate", "r must be > 0"));
        }
        finite("unemployment_flow", self.unemployment_flow)?;
        if self.unemployment_flow <= 0.0 {
            return Err(ParamError::new("unemployment_flow", "b must be > 0"));
        }
        finite("vacancy_cost", self.vacancy_cost)?;
        if self.vacancy_cost <= 0.0 {
            return Err(ParamError::new("vacancy_cost", "c must be > 0"));
        }
        finite("firing_cost", self.firing_cost)?;
        if self.firing_cost < 0.0 {
            return Err(ParamError::new("firing_cost", "f must be >= 0"));
        }
        if !(self.informal_penalty > 0.0 && self.informal_penalty <= 1.0) {
            return Err(ParamError::new("informal_penalty", "a must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.otj_search_rate) {
            return Err(ParamError::new("otj_search_rate", "lambda must lie in [0, 1]"));
        }
        if !(self.bargaining_weight > 0.0 && self.bargaining_weight < 1.0) {
            return Err(ParamError::new("bargaining_weight", "phi must lie in (0, 1)"));
        }
        finite("matching_efficiency", self.matching_efficiency)?;
        if self.matching_efficiency <= 0.0 {
            return Err(ParamError::new("matching_efficiency", "chi must be > 0"));
        }
        if !(self.matching_elasticity > 0.0 && self.matching_elasticity < 1.0) {
            return Err(ParamError::new("matching_elasticity", "eta must lie in (0, 1)"));
        }
        self.productivity_spec.validate()?;
        if let RenewalCap::Finite(k) = self.stc_renewal_cap {
            if k == 0 {
                return Err(ParamError::new("stc_renewal_cap", "K must be a positive integer"));
            }
        }
        if self.grid_size < 3 {
            return Err(ParamError::new("grid_size", "need at least 3 nodes"));
        }
        if !(self.redraw_prob > 0.0 && self.redraw_prob <= 1.0) {
            return Err(ParamError::new("redraw_prob", "delta must lie in (0, 1]"));
        }
        if !(self.search_dispersion >= 0.0 && self.search_dispersion.is_finite()) {
            return Err(ParamError::new("search_dispersion", "sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Free-function form of [`ModelParams::validate`].
pub fn validate_params(params: ModelParams) -> Result<ModelParams, ParamError> {
    params.validate()
}
