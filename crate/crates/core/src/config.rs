//! Resolved run configuration: every tunable of every subsystem, TOML I/O,
//! dotted-key overrides, static feasibility checks and a stable hash.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::association::AssociationConfig;
use crate::error::{Error, Result};
use crate::geometry::HighwayConfig;
use crate::metrics::ReportConfig;
use crate::pso::PsoConfig;
use crate::queue::TrafficConfig;
use crate::radio::{AntennaConfig, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Learned-utility matching with a fixed beamwidth.
    Waf,
    /// Learned-utility matching with swarm-optimised beamwidths.
    Pso,
    /// Minimum-distance pairing.
    Mind,
    /// Asynchronous entry-triggered long-term pairing.
    Asyn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Waf, Method::Pso, Method::Mind, Method::Asyn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Waf => "waf",
            Method::Pso => "pso",
            Method::Mind => "mind",
            Method::Asyn => "asyn",
        }
    }

    pub fn uses_learning(self) -> bool {
        matches!(self, Method::Waf | Method::Pso)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "waf" => Ok(Method::Waf),
            "pso" => Ok(Method::Pso),
            "mind" => Ok(Method::Mind),
            "asyn" => Ok(Method::Asyn),
            other => Err(Error::Config(format!("unknown method `{other}` (expected waf, pso, mind or asyn)"))),
        }
    }
}

/// A method with an optional fixed-beamwidth suffix, e.g. `waf:360`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub beamwidth_deg: Option<f64>,
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, w) = match s.split_once(':') {
            Some((m, w)) => {
                let w: f64 = w
                    .parse()
                    .map_err(|_| Error::Config(format!("bad beamwidth in method `{s}`")))?;
                (m, Some(w))
            }
            None => (s, None),
        };
        Ok(MethodSpec {
            method: m.parse()?,
            beamwidth_deg: w,
        })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.beamwidth_deg {
            Some(w) => write!(f, "{}:{}", self.method, w),
            None => write!(f, "{}", self.method),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub method: Method,
    /// Beamwidth of both link ends for every method except `pso`, degrees.
    pub fixed_beamwidth_deg: f64,
    pub transmission_slot_ms: f64,
    pub scheduling_slot_ms: f64,
    pub total_time_ms: f64,
    pub highway: HighwayConfig,
    pub radio: RadioConfig,
    pub antenna: AntennaConfig,
    pub traffic: TrafficConfig,
    pub association: AssociationConfig,
    pub pso: PsoConfig,
    pub report: ReportConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            method: Method::Waf,
            fixed_beamwidth_deg: 5.0,
            transmission_slot_ms: 2.0,
            scheduling_slot_ms: 100.0,
            total_time_ms: 30_000.0,
            highway: HighwayConfig::default(),
            radio: RadioConfig::default(),
            antenna: AntennaConfig::default(),
            traffic: TrafficConfig::default(),
            association: AssociationConfig::default(),
            pso: PsoConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

/// Outcome of one static configuration check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn integral_ratio(num: f64, den: f64) -> Option<u64> {
    let r = num / den;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() < 1e-9).then_some(n as u64)
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// Applies a `section.key=value` override. The value is parsed as a TOML
    /// literal, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut tree = toml::Table::try_from(&*self).expect("configuration serialises to a table");
        let parts: Vec<&str> = key.split('.').collect();
        let mut cur = &mut tree;
        for part in &parts[..parts.len() - 1] {
            cur = match cur.get_mut(*part) {
                Some(toml::Value::Table(t)) => t,
                _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
            };
        }
        cur.insert(parts[parts.len() - 1].to_string(), value);
        let updated: SimConfig = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("override `{key}`: {}", e.message())))?;
        *self = updated;
        Ok(())
    }

    pub fn with_method(mut self, spec: MethodSpec) -> Self {
        self.method = spec.method;
        if let Some(w) = spec.beamwidth_deg {
            self.fixed_beamwidth_deg = w;
        }
        self
    }

    /// Transmission slots per scheduling slot.
    pub fn slots_per_schedule(&self) -> u64 {
        integral_ratio(self.scheduling_slot_ms, self.transmission_slot_ms).unwrap_or(1)
    }

    pub fn total_slots(&self) -> u64 {
        (self.total_time_ms / self.transmission_slot_ms - 1e-9).ceil().max(0.0) as u64
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serialises to JSON");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every statically checkable invariant, in a fixed order.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |name, r: Result<String>| {
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            out.push(Check { name, passed, detail });
        };
        push("highway", self.highway.validate().map(|_| format!("{} vehicles", self.highway.target_count())));
        push("radio", self.radio.validate().map(|_| String::new()));
        push("antenna", self.antenna.validate().map(|_| String::new()));
        push("traffic", self.traffic.validate().map(|_| format!("deadline {} ms", self.traffic.deadline())));
        push("association", self.association.validate().map(|_| String::new()));
        push("pso", self.pso.validate().map(|_| String::new()));
        push("report", self.report.validate().map(|_| String::new()));
        let slot = self.transmission_slot_ms;
        push(
            "transmission slot",
            if slot > 0.0 {
                Ok(format!("{slot} ms"))
            } else {
                Err(Error::Config("transmission_slot_ms must be > 0".into()))
            },
        );
        push(
            "scheduling slot divisibility",
            match integral_ratio(self.scheduling_slot_ms, slot) {
                Some(n) => Ok(format!("N = {n}")),
                None => Err(Error::Config(format!(
                    "scheduling_slot_ms {} is not a positive multiple of transmission_slot_ms {slot}",
                    self.scheduling_slot_ms
                ))),
            },
        );
        push(
            "total time divisibility",
            match integral_ratio(self.total_time_ms, slot) {
                Some(n) => Ok(format!("{n} slots")),
                None => Err(Error::Config(format!(
                    "total_time_ms {} is not a positive multiple of transmission_slot_ms {slot}",
                    self.total_time_ms
                ))),
            },
        );
        let ratio = self.antenna.pilot_ratio;
        let sector = self.antenna.sector_beamwidth_deg;
        let bound = ratio * sector * sector;
        let min = self.antenna.min_beamwidth_deg;
        push(
            "alignment at minimum beamwidth",
            if min * min >= bound * (1.0 - 1e-12) {
                Ok(format!("{:.3} >= {:.3} deg^2", min * min, bound))
            } else {
                Err(Error::Config(format!(
                    "min_beamwidth_deg {min}: product {:.3} below {:.3} deg^2, alignment exceeds a slot",
                    min * min,
                    bound
                )))
            },
        );
        let w = self.fixed_beamwidth_deg;
        push(
            "fixed beamwidth",
            if !(w > 0.0 && w <= 360.0) {
                Err(Error::Config(format!("fixed_beamwidth_deg {w} outside (0, 360]")))
            } else if w * w < bound * (1.0 - 1e-12) {
                Err(Error::Config(format!("fixed_beamwidth_deg {w}: alignment exceeds a slot")))
            } else {
                Ok(format!("{w} deg"))
            },
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.checks().into_iter().find(|c| !c.passed) {
            Some(c) => Err(Error::Config(format!("{}: {}", c.name, c.detail))),
            None => Ok(()),
        }
    }
}
