//! Published parameter sets.
//!
//! `table1` is the rate set used to show diminishing returns and superlinear
//! speedup from the same population dynamics. The remaining six are rates
//! fitted to throughput measurements of real systems, with `c_g = 0`.

use crate::error::{Error, Result};
use crate::io::ParamsDocument;
use crate::model::{Contribution, Rates};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub rates: Rates,
    pub contribution: Contribution,
}

impl Preset {
    pub fn to_document(&self) -> ParamsDocument {
        ParamsDocument::new(self.rates, self.contribution)
            .with_label(self.description)
            .with_provenance(format!("preset {}", self.name))
    }
}

pub const TABLE1: Preset = Preset {
    name: "table1",
    description: "diminishing returns / superlinear speedup rates",
    rates: Rates::from_array([0.005, 0.1, 0.06, 10.0, 0.15, 0.3, 0.8]),
    contribution: Contribution { c_s: 1.0, c_g: 0.0 },
};

pub const SQL_SERVER: Preset = Preset {
    name: "table2:sql",
    description: "SQL server benchmark, 4-way processor",
    rates: Rates::from_array([
        0.1600614759,
        0.5640057846,
        0.3054490761,
        4.058864868,
        0.003989433297,
        0.5243111486,
        9.567349145,
    ]),
    contribution: Contribution { c_s: 0.212894142, c_g: 0.0 },
};

pub const WIRELESS: Preset = Preset {
    name: "table2:wireless",
    description: "wireless network, ALOHA media access",
    rates: Rates::from_array([
        0.02889861707,
        0.1316419438,
        6.119334033,
        0.9700209090,
        0.003321168620,
        0.1970954618,
        9.898300316,
    ]),
    contribution: Contribution { c_s: 0.05369458128, c_g: 0.0 },
};

pub const PARTICLES: Preset = Preset {
    name: "table2:particles",
    description: "foraging self-propelled particles",
    rates: Rates::from_array([1.390301954, 2.152415749, 0.0, 8.499633576, 0.0, 0.0, 0.0]),
    contribution: Contribution { c_s: 0.276059326, c_g: 0.0 },
};

pub const ROBOT_SWARM: Preset = Preset {
    name: "table2:swarm",
    description: "foraging robot swarm",
    rates: Rates::from_array([
        1.475881283,
        2.262085575,
        4.859955018,
        9.341897861,
        0.002558004976,
        0.3318341624,
        7.214769884,
    ]),
    contribution: Contribution { c_s: 0.219971588, c_g: 0.0 },
};

pub const NAS_BT: Preset = Preset {
    name: "table2:nas-bt",
    description: "NAS parallel benchmark, block tridiagonal",
    rates: Rates::from_array([0.03415882417, 4.001963225, 0.0, 8.899802172, 0.0, 0.0, 0.0]),
    contribution: Contribution { c_s: 1.988764045, c_g: 0.0 },
};

pub const NAS_SP: Preset = Preset {
    name: "table2:nas-sp",
    description: "NAS parallel benchmark, scalar pentadiagonal",
    rates: Rates::from_array([
        0.0987250043,
        4.63175441,
        0.804438853,
        7.93215055,
        3.73031451e-9,
        4.20617254,
        9.83304445,
    ]),
    contribution: Contribution { c_s: 1.727748691, c_g: 0.0 },
};

pub const ALL: [Preset; 7] = [TABLE1, SQL_SERVER, WIRELESS, PARTICLES, ROBOT_SWARM, NAS_BT, NAS_SP];

/// Looks up a preset by name: `table1` or `table2:<sql|wireless|particles|swarm|nas-bt|nas-sp>`.
pub fn by_name(name: &str) -> Result<Preset> {
    ALL.iter().find(|p| p.name == name).copied().ok_or_else(|| {
        let known: Vec<_> = ALL.iter().map(|p| p.name).collect();
        Error::InvalidInput(format!("unknown preset '{name}', expected one of {}", known.join(", ")))
    })
}
