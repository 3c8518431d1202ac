//! Run configuration: sections for every module, presets, layered overrides
//! and a stable digest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::baselines::{PolicyKind, WcsBeams};
use crate::bandit::UcbParams;
use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::phy::{Codebook, RadioConfig};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Share of a period spent on probe beams whenever probes are sent.
    pub probe_fraction: f64,
    /// Store probe measurements as samples too.
    pub include_probes: bool,
    pub wcs_beams: WcsBeams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::BkcUcb,
            probe_fraction: 0.1,
            include_probes: false,
            wcs_beams: WcsBeams::Codebook,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Window length, in periods, of the average-rate series.
    pub rate_window: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { rate_window: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Write per-period CSV logs (summaries are always written).
    pub period_logs: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            period_logs: true,
        }
    }
}

/// A labeled set of dotted-path overrides run as its own batch member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default)]
    pub set: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seeds: Vec<u64>,
    pub scenario: ScenarioConfig,
    pub radio: RadioConfig,
    pub kernel: KernelParams,
    pub ucb: UcbParams,
    pub policy: PolicyConfig,
    pub engine: EngineConfig,
    pub output: OutputConfig,
    pub variants: Vec<Variant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            seeds: vec![1],
            scenario: ScenarioConfig::default(),
            radio: RadioConfig::default(),
            kernel: KernelParams::default(),
            ucb: UcbParams::default(),
            policy: PolicyConfig::default(),
            engine: EngineConfig::default(),
            output: OutputConfig::default(),
            variants: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.radio.validate()?;
        self.kernel.validate()?;
        self.ucb.validate()?;
        if !(0.0..1.0).contains(&self.policy.probe_fraction) {
            return Err(Error::config("policy.probe_fraction", "must lie in [0, 1)"));
        }
        if self.engine.rate_window == 0 {
            return Err(Error::config("engine.rate_window", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            if v.label.is_empty() || v.label.contains(['/', '\\']) || v.label.starts_with('.') {
                return Err(Error::config(format!("variants[{i}].label"), "must be a plain non-empty name"));
            }
            if !labels.insert(&v.label) {
                return Err(Error::config(format!("variants[{i}].label"), format!("duplicate label `{}`", v.label)));
            }
            self.variant(v)?.validate().map_err(|e| match e {
                Error::Config { path, message } => Error::config(format!("variants[{i}].set.{path}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    /// The configuration a variant runs with.
    pub fn variant(&self, variant: &Variant) -> Result<RunConfig> {
        let mut value = self.to_value();
        value["variants"] = Value::Array(Vec::new());
        for (path, v) in &variant.set {
            set_path(&mut value, path, v.clone())?;
        }
        Self::from_value(value)
    }

    /// `(label, config)` for every batch member; a config without variants
    /// runs once under its policy name.
    pub fn members(&self) -> Result<Vec<(String, RunConfig)>> {
        if self.variants.is_empty() {
            return Ok(vec![(self.policy.kind.to_string(), self.clone())]);
        }
        self.variants
            .iter()
            .map(|v| Ok((v.label.clone(), self.variant(v)?)))
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.to_value()).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::new(self.radio.n_t)
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let (association_mode, beam_mode) = self.policy.kind.agent_modes().ok_or_else(|| {
            Error::config("policy.kind", format!("{} is centralized and has no agent", self.policy.kind))
        })?;
        Ok(AgentConfig {
            codebook: self.codebook()?,
            kernel: self.kernel,
            ucb: self.ucb,
            association_interval: self.scenario.association_interval,
            beam_mode,
            association_mode,
            include_probes: self.policy.include_probes,
        })
    }
}

/// Layers configuration sources: a preset, then a JSON file, then dotted
/// `path=value` overrides, then validation.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    value: Option<Value>,
    explicit_preset: bool,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self {
            value: Some(RunConfig::default().to_value()),
            explicit_preset: false,
        }
    }

    fn value(&mut self) -> &mut Value {
        self.value.get_or_insert_with(|| RunConfig::default().to_value())
    }

    pub fn preset(mut self, name: &str) -> Result<Self> {
        let preset = preset(name).ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?;
        self.value = Some(preset.to_value());
        self.explicit_preset = true;
        Ok(self)
    }

    pub fn file(self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.json(&text)
    }

    pub fn json(mut self, text: &str) -> Result<Self> {
        let overlay: Value = serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?;
        if !overlay.is_object() {
            return Err(Error::config("", "configuration must be a JSON object"));
        }
        let mut overlay = overlay;
        if self.explicit_preset {
            // an explicitly chosen preset outranks the one a file names
            if let Some(obj) = overlay.as_object_mut() {
                obj.remove("preset");
            }
        } else if let Some(name) = overlay.get("preset").and_then(Value::as_str) {
            let base = preset(name).ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?;
            self.value = Some(base.to_value());
        }
        merge(self.value(), overlay);
        Ok(self)
    }

    /// `path=value`; the value is parsed as JSON, falling back to a string.
    pub fn set(mut self, assignment: &str) -> Result<Self> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like `path=value`"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(self.value(), path.trim(), value)?;
        Ok(self)
    }

    pub fn set_value(mut self, path: &str, value: Value) -> Result<Self> {
        set_path(self.value(), path, value)?;
        Ok(self)
    }

    pub fn build(mut self) -> Result<RunConfig> {
        let config = RunConfig::from_value(self.value().clone())?;
        config.validate()?;
        Ok(config)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) if existing.is_object() && v.is_object() => merge(existing, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(path, "empty path segment"));
    }
    let mut node = root;
    for (depth, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(parts[..depth].join("."), "not an object"))?;
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: RunConfig,
}

/// Shared base of the figure presets: a 600 m x 400 m area with 5 BSs in a
/// noise-and-interference regime where geometry explains most of the rate.
fn desk_scale(name: &str) -> RunConfig {
    let mut config = RunConfig {
        preset: Some(name.to_string()),
        seeds: (1..=8).collect(),
        ..RunConfig::default()
    };
    config.scenario.association_interval = 10;
    config.scenario.buildings = 6;
    config.radio.path_loss_exponent = 3.0;
    config.radio.rician_k_db = 15.0;
    config.ucb.alpha = 0.1;
    config.ucb.capacity = 128;
    config
}

fn variant(label: impl Into<String>, set: &[(&str, Value)]) -> Variant {
    Variant {
        label: label.into(),
        set: set.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
}

pub fn presets() -> Vec<Preset> {
    let mut ert = desk_scale("fig_ert");
    ert.variants = vec![
        variant("bw_50mhz", &[("radio.bandwidth_hz", Value::from(50e6))]),
        variant("bw_100mhz", &[("radio.bandwidth_hz", Value::from(100e6))]),
    ];

    let mut sync = desk_scale("fig_sync_tradeoff");
    sync.variants = [30.0, 90.0]
        .iter()
        .flat_map(|&l| {
            [20.0, 25.0, 30.0].into_iter().map(move |dbm| {
                variant(
                    format!("L{l}_P{dbm}dBm"),
                    &[
                        ("ucb.sync_threshold", Value::from(l)),
                        ("radio.tx_power_w", Value::from(RadioConfig::tx_power_dbm(dbm))),
                    ],
                )
            })
        })
        .collect();

    let mut compare = desk_scale("fig_policy_compare");
    compare.variants = PolicyKind::ALL
        .iter()
        .map(|p| variant(p.as_str(), &[("policy.kind", Value::from(p.as_str()))]))
        .collect();

    vec![
        Preset {
            name: "fig_ert",
            description: "Regret decay of the learning policy at 50 and 100 MHz bandwidth (5 BSs, 16 antennas, 2000 periods, 8 seeds)",
            config: ert,
        },
        Preset {
            name: "fig_sync_tradeoff",
            description: "Average rate and sync rate against transmit power for sync thresholds 30 and 90",
            config: sync,
        },
        Preset {
            name: "fig_policy_compare",
            description: "Average rate over time for every policy on the same worlds",
            config: compare,
        },
    ]
}

pub fn preset(name: &str) -> Option<RunConfig> {
    presets().into_iter().find(|p| p.name == name).map(|p| p.config)
}
