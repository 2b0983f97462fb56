use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::HarnessError;
use crate::cache::{CacheGeometry, LocalPolicy, RripConfig};
use crate::camp::SipConfig;
use crate::compression::{Bdi, Codec, NoCompression};
use crate::lcp::{BdiPageCodec, LcpGeometry, PageCodec, TrimCodec, MdCache};
use crate::toggles::{EcMetric, EcParams, McLayout};
use crate::vway::{VwayConfig, VwayPolicy};

/// Any replacement policy, by its CLI name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Local(LocalPolicy),
    Global(VwayPolicy),
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Local(p) => p.name(),
            Policy::Global(p) => p.name(),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(p) = s.parse::<LocalPolicy>() {
            return Ok(Policy::Local(p));
        }
        s.parse::<VwayPolicy>().map(Policy::Global).map_err(|_| {
            format!("unknown policy {s:?} (expected lru, rrip, mve, sip, camp, vway, gmve, gsip or gcamp)")
        })
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Either `"camp"` or `{"name": "camp", "rrip_bits": 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Name(Policy),
    Full {
        name: Policy,
        #[serde(default = "default_rrip_bits")]
        rrip_bits: u8,
    },
}

fn default_rrip_bits() -> u8 {
    3
}

impl PolicySpec {
    pub fn policy(self) -> Policy {
        match self {
            PolicySpec::Name(p) | PolicySpec::Full { name: p, .. } => p,
        }
    }

    pub fn rrip_bits(self) -> u8 {
        match self {
            PolicySpec::Name(_) => default_rrip_bits(),
            PolicySpec::Full { rrip_bits, .. } => rrip_bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    Bdi,
    None,
}

impl CodecKind {
    pub fn build(self) -> Box<dyn Codec> {
        match self {
            CodecKind::Bdi => Box::new(Bdi),
            CodecKind::None => Box::new(NoCompression),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageCodecKind {
    Bdi,
    Trim,
}

impl PageCodecKind {
    pub fn build(self) -> Box<dyn PageCodec> {
        match self {
            PageCodecKind::Bdi => Box::new(BdiPageCodec),
            PageCodecKind::Trim => Box::new(TrimCodec::default()),
        }
    }
}

/// Main-memory backend behind the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcpSection {
    pub geometry: LcpGeometry,
    pub codec: PageCodecKind,
    pub md_entries: usize,
}

impl Default for LcpSection {
    fn default() -> Self {
        Self {
            geometry: LcpGeometry::default(),
            codec: PageCodecKind::Bdi,
            md_entries: MdCache::DEFAULT_ENTRIES,
        }
    }
}

/// Link between the cache and memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToggleSection {
    pub flit_bytes: usize,
    /// Send compressed payloads at all.
    pub bus_compression: bool,
    /// Per-line choice between compressed and raw by the EC metric; when
    /// false every compressible line is sent compressed.
    pub energy_control: bool,
    pub metric: EcMetric,
    /// Fixed bandwidth utilization fed to the EC decision.
    pub bu: f64,
    pub bu_threshold: f64,
    pub energy_weight: f64,
    pub layout: McLayout,
    /// Compressed transfers are rounded up to this many bytes.
    pub granule_bytes: usize,
}

impl Default for ToggleSection {
    fn default() -> Self {
        let ec = EcParams::default();
        Self {
            flit_bytes: 32,
            bus_compression: true,
            energy_control: true,
            metric: ec.metric,
            bu: 0.0,
            bu_threshold: ec.bu_threshold,
            energy_weight: ec.energy_weight,
            layout: McLayout::Consolidated,
            granule_bytes: 8,
        }
    }
}

impl ToggleSection {
    pub fn ec_params(&self) -> EcParams {
        EcParams {
            metric: self.metric,
            bu_threshold: self.bu_threshold,
            energy_weight: self.energy_weight,
        }
    }
}

/// A complete run configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: CacheGeometry,
    pub policy: PolicySpec,
    #[serde(default = "default_codec")]
    pub codec: CodecKind,
    #[serde(default)]
    pub sip: SipConfig,
    #[serde(default)]
    pub vway: VwayConfig,
    #[serde(default)]
    pub lcp: Option<LcpSection>,
    #[serde(default)]
    pub toggles: Option<ToggleSection>,
    #[serde(default)]
    pub seed: u64,
}

fn default_codec() -> CodecKind {
    CodecKind::Bdi
}

impl SimConfig {
    pub fn new(geometry: CacheGeometry, policy: Policy) -> Self {
        Self {
            geometry,
            policy: PolicySpec::Name(policy),
            codec: CodecKind::Bdi,
            sip: SipConfig::default(),
            vway: VwayConfig::default(),
            lcp: None,
            toggles: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rrip(&self) -> Result<RripConfig, HarnessError> {
        Ok(RripConfig::new(self.policy.rrip_bits())?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.geometry.validate()?;
        self.sip.validate()?;
        self.rrip()?;
        if let Some(lcp) = &self.lcp {
            lcp.geometry.validate()?;
            if lcp.geometry.line_size != self.geometry.line_size {
                return Err(HarnessError::Config(format!(
                    "lcp line size {} differs from cache line size {}",
                    lcp.geometry.line_size, self.geometry.line_size
                )));
            }
            if lcp.md_entries == 0 {
                return Err(HarnessError::Config("lcp.md_entries must be positive".into()));
            }
        }
        if let Some(t) = &self.toggles {
            if t.flit_bytes == 0 || t.granule_bytes == 0 {
                return Err(HarnessError::Config("toggles.flit_bytes and granule_bytes must be positive".into()));
            }
            if !(0.0..1.0).contains(&t.bu) {
                return Err(HarnessError::Config("toggles.bu must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }
}
