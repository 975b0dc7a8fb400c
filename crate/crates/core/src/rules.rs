//! Edge-generation rules for snapshot construction.
//!
//! Each rule decides, from the measured region-to-region speed, whether a
//! flow becomes an edge. Rules are registered by name and selected at
//! runtime from configuration, so new variants slot in without touching the
//! snapshot builder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rule deciding whether a measured flow produces an edge. Pairs with no
/// flow never produce an edge under any rule.
pub trait EdgeRule: Send + Sync {
    fn name(&self) -> &'static str;
    /// True if a flow with average speed `v_kmh` becomes an edge.
    fn admits(&self, v_kmh: f64) -> bool;
    /// The speed threshold the rule compares against, if it has one.
    fn threshold_kmh(&self) -> Option<f64> {
        None
    }
}

/// Every region pair with at least one sub-trajectory gets an edge.
pub struct AllFlows;

impl EdgeRule for AllFlows {
    fn name(&self) -> &'static str {
        "all"
    }

    fn admits(&self, _v_kmh: f64) -> bool {
        true
    }
}

/// Graph of low-speed flow: edge kept iff v <= v_c.
pub struct LowSpeedFlow {
    pub v_c_kmh: f64,
}

impl EdgeRule for LowSpeedFlow {
    fn name(&self) -> &'static str {
        "low"
    }

    fn admits(&self, v_kmh: f64) -> bool {
        v_kmh <= self.v_c_kmh
    }

    fn threshold_kmh(&self) -> Option<f64> {
        Some(self.v_c_kmh)
    }
}

/// Graph of high-speed flow: edge kept iff v > v_c.
pub struct HighSpeedFlow {
    pub v_c_kmh: f64,
}

impl EdgeRule for HighSpeedFlow {
    fn name(&self) -> &'static str {
        "high"
    }

    fn admits(&self, v_kmh: f64) -> bool {
        v_kmh > self.v_c_kmh
    }

    fn threshold_kmh(&self) -> Option<f64> {
        Some(self.v_c_kmh)
    }
}

/// Registry entry: rule name plus a constructor taking the optional speed
/// threshold.
pub struct RuleEntry {
    pub name: &'static str,
    pub needs_threshold: bool,
    build: fn(Option<f64>) -> Result<Box<dyn EdgeRule>>,
}

fn build_all(v_c: Option<f64>) -> Result<Box<dyn EdgeRule>> {
    if v_c.is_some() {
        // Tolerated: the threshold is simply unused.
    }
    Ok(Box::new(AllFlows))
}

fn build_low(v_c: Option<f64>) -> Result<Box<dyn EdgeRule>> {
    let v_c = require_threshold("low", v_c)?;
    Ok(Box::new(LowSpeedFlow { v_c_kmh: v_c }))
}

fn build_high(v_c: Option<f64>) -> Result<Box<dyn EdgeRule>> {
    let v_c = require_threshold("high", v_c)?;
    Ok(Box::new(HighSpeedFlow { v_c_kmh: v_c }))
}

fn require_threshold(name: &str, v_c: Option<f64>) -> Result<f64> {
    match v_c {
        Some(v) if v > 0.0 => Ok(v),
        Some(v) => Err(Error::Config(format!(
            "edge rule {name:?} needs a positive speed threshold, got {v}"
        ))),
        None => Err(Error::Config(format!(
            "edge rule {name:?} needs a speed threshold (--vc-kmh)"
        ))),
    }
}

const REGISTRY: &[RuleEntry] = &[
    RuleEntry { name: "all", needs_threshold: false, build: build_all },
    RuleEntry { name: "low", needs_threshold: true, build: build_low },
    RuleEntry { name: "high", needs_threshold: true, build: build_high },
];

/// All registered rule names, in registration order.
pub fn rule_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.name).collect()
}

/// Looks up a rule by name and builds it with the given threshold.
pub fn build_rule(name: &str, v_c_kmh: Option<f64>) -> Result<Box<dyn EdgeRule>> {
    for entry in REGISTRY {
        if entry.name == name {
            return (entry.build)(v_c_kmh);
        }
    }
    Err(Error::Config(format!(
        "unknown edge rule {name:?}; known rules: {}",
        rule_names().join(", ")
    )))
}

/// Serializable identity of an edge-generation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    All,
    LowSpeed,
    HighSpeed,
}

impl Method {
    pub fn rule_name(self) -> &'static str {
        match self {
            Method::All => "all",
            Method::LowSpeed => "low",
            Method::HighSpeed => "high",
        }
    }

    pub fn from_rule_name(name: &str) -> Option<Method> {
        match name {
            "all" => Some(Method::All),
            "low" | "low_speed" => Some(Method::LowSpeed),
            "high" | "high_speed" => Some(Method::HighSpeed),
            _ => None,
        }
    }

    pub fn build(self, v_c_kmh: Option<f64>) -> Result<Box<dyn EdgeRule>> {
        build_rule(self.rule_name(), v_c_kmh)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.rule_name())
    }
}
