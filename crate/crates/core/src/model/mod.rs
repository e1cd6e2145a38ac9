pub mod grid;
pub mod matching;
pub mod params;

use serde::{Deserialize, Serialize};

pub use grid::{build_grid, crossing, ProductivityGrid, Threshold};
pub use matching::{fill_prob, find_prob};
pub use params::{validate_params, ModelParams, ProductivitySpec, RenewalCap, MAX_FINITE_CAP};

/// Production technology of a match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Formal,
    Informal,
}

/// The three sub-markets in which vacancies are posted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Stc,
    Ltc,
    Informal,
}

impl Market {
    pub const ALL: [Market; 3] = [Market::Stc, Market::Ltc, Market::Informal];

    pub fn index(self) -> usize {
        match self {
            Market::Stc => 0,
            Market::Ltc => 1,
            Market::Informal => 2,
        }
    }

    pub fn sector(self) -> Sector {
        match self {
            Market::Informal => Sector::Informal,
            _ => Sector::Formal,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Market::Stc => "stc",
            Market::Ltc => "ltc",
            Market::Informal => "informal",
        }
    }
}

/// Vacancy/unemployment ratio per sub-market. Zero marks an inactive market.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tightness {
    pub stc: f64,
    pub ltc: f64,
    pub informal: f64,
}

impl Tightness {
    pub fn new(stc: f64, ltc: f64, informal: f64) -> Self {
        Self { stc, ltc, informal }
    }

    pub fn uniform(theta: f64) -> Self {
        Self::new(theta, theta, theta)
    }

    pub fn get(&self, m: Market) -> f64 {
        match m {
            Market::Stc => self.stc,
            Market::Ltc => self.ltc,
            Market::Informal => self.informal,
        }
    }

    pub fn set(&mut self, m: Market, theta: f64) {
        match m {
            Market::Stc => self.stc = theta,
            Market::Ltc => self.ltc = theta,
            Market::Informal => self.informal = theta,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.stc, self.ltc, self.informal]
    }
}

/// Flow output of a match with productivity `z`.
pub fn match_output(z: f64, sector: Sector, informal_penalty: f64) -> f64 {
    match sector {
        Sector::Formal => z,
        Sector::Informal => informal_penalty * z,
    }
}
