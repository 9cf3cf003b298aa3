//! Intra-object anomaly detection by region classification.
//!
//! Two segmentation strategies feed the same per-region binary classifier:
//!
//! 1. **Object level**: the object is isolated with a binary mask and
//!    classified as a whole ([`isolate`], [`regions::extract_object_region`]).
//! 2. **Sub-component level**: the isolated object is over-segmented into
//!    SLIC superpixels ([`slic`]) and every superpixel is classified on its
//!    own ([`regions::extract_subcomponent_regions`]).
//!
//! [`eval`] scores both strategies side by side, [`synthgen`] produces a
//! deterministic synthetic benchmark with ground truth and [`render`] draws
//! the contour overlays.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod color;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod isolate;
pub mod pipeline;
pub mod regions;
pub mod render;
pub mod slic;
pub mod synthgen;

pub use error::{Error, ErrorKind, Result};

/// Binary region / image class. The positive class is `Anomaly`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Anomaly,
}

impl Label {
    /// Class index used by the classifier output layer (`[benign, anomaly]`).
    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Anomaly => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 1 {
            Label::Anomaly
        } else {
            Label::Benign
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Anomaly => "anomaly",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benign" => Ok(Label::Benign),
            "anomaly" => Ok(Label::Anomaly),
            other => Err(Error::InvalidParams(format!("unknown label `{other}`"))),
        }
    }
}

/// Segmentation strategy / region granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Object,
    Subcomponent,
}

impl Level {
    /// Classifier input size (width, height) for crops of this level.
    pub fn target_size(self) -> (usize, usize) {
        match self {
            Level::Object => (224, 224),
            Level::Subcomponent => (190, 150),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Object => "object",
            Level::Subcomponent => "subcomponent",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "object" => Ok(Level::Object),
            "subcomponent" => Ok(Level::Subcomponent),
            other => Err(Error::InvalidParams(format!("unknown level `{other}`"))),
        }
    }
}
