//! Experiment configuration: a single JSON file describing the load, the
//! NIC, the workload and (optionally) a sweep.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::SweepGrid;
use crate::engine::WorkloadSpec;
use crate::nic::{DelayModel, EndPolicy, ModerationMode, NicConfig};
use crate::trace::{PoissonLoadSpec, UniformLoadSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub load: LoadConfig,
    pub nic: NicSection,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Discard interrupts firing after workload completion instead of
    /// servicing them.
    #[serde(default)]
    pub truncate_at_completion: bool,
}

/// Exactly one of the four sources must be set.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub uniform: Option<UniformLoadSpec>,
    pub poisson: Option<PoissonLoadSpec>,
    pub trace: Option<PathBuf>,
    pub pcap: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NicSection {
    pub mode: ModerationMode,
    pub delays: DelayModel,
    #[serde(default)]
    pub end_policy: EndPolicy,
    #[serde(default)]
    pub allow_zero_cost: bool,
}

impl NicSection {
    pub fn to_nic_config(&self) -> NicConfig {
        NicConfig {
            mode: self.mode,
            delays: self.delays,
            end_policy: self.end_policy,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub counter_thresholds: Vec<u32>,
    #[serde(default)]
    pub timer_delays_ns: Vec<u64>,
    #[serde(default)]
    pub lambdas_pps: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub aggregate: AggregateMode,
}

impl SweepSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            counter_thresholds: self.counter_thresholds.clone(),
            timer_delays_ns: self.timer_delays_ns.clone(),
            lambdas_pps: self.lambdas_pps.clone(),
            seeds: self.seeds.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// One output row per grid point per seed.
    #[default]
    None,
    /// Collapse the seed axis into mean plus sample standard deviation.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Include the full interrupt timeline in JSON results.
    #[serde(default)]
    pub include_events: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sources = [
            self.load.uniform.is_some(),
            self.load.poisson.is_some(),
            self.load.trace.is_some(),
            self.load.pcap.is_some(),
        ]
        .iter()
        .filter(|&&s| s)
        .count();
        if sources != 1 {
            return Err(ConfigError::Invalid(
                "exactly one load source (uniform, poisson, trace, pcap) must be set".into(),
            ));
        }
        if let Some(spec) = &self.load.uniform {
            spec.validate().map_err(ConfigError::Invalid)?;
        }
        if let Some(spec) = &self.load.poisson {
            spec.validate().map_err(ConfigError::Invalid)?;
        }
        self.nic
            .to_nic_config()
            .validate(self.nic.allow_zero_cost)
            .map_err(ConfigError::Invalid)?;

        if let Some(sweep) = &self.sweep {
            if sweep.counter_thresholds.iter().any(|&k| k < 1) {
                return Err(ConfigError::Invalid(
                    "counter_thresholds values must be >= 1".into(),
                ));
            }
            if sweep.timer_delays_ns.iter().any(|&d| d < 1) {
                return Err(ConfigError::Invalid(
                    "timer_delays_ns values must be >= 1".into(),
                ));
            }
            if sweep
                .lambdas_pps
                .iter()
                .any(|&l| !l.is_finite() || l <= 0.0)
            {
                return Err(ConfigError::Invalid(
                    "lambdas_pps values must be positive and finite".into(),
                ));
            }
            if !sweep.counter_thresholds.is_empty() && self.nic.mode.counter_threshold().is_none() {
                return Err(ConfigError::Invalid(
                    "counter_thresholds axis requires a counter or combined mode".into(),
                ));
            }
            if !sweep.timer_delays_ns.is_empty() && self.nic.mode.timer_delay_ns().is_none() {
                return Err(ConfigError::Invalid(
                    "timer_delays_ns axis requires a timer or combined mode".into(),
                ));
            }
            if !sweep.lambdas_pps.is_empty() && self.load.poisson.is_none() {
                return Err(ConfigError::Invalid(
                    "lambdas_pps axis requires a poisson load".into(),
                ));
            }
            if !sweep.seeds.is_empty() && self.load.poisson.is_none() {
                return Err(ConfigError::Invalid(
                    "seeds axis requires a poisson load".into(),
                ));
            }
        }
        Ok(())
    }
}

/// JSON Schema of the config file, printed by `--print-schema`.
pub const CONFIG_SCHEMA: &str = r#"{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "irqsim experiment configuration",
  "type": "object",
  "required": ["load", "nic", "workload"],
  "additionalProperties": false,
  "properties": {
    "load": {
      "description": "Exactly one of uniform, poisson, trace, pcap.",
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "uniform": {
          "type": "object",
          "required": ["period_ns", "count", "length_bytes"],
          "properties": {
            "period_ns": {"type": "integer", "minimum": 1},
            "count": {"type": "integer", "minimum": 0},
            "length_bytes": {"type": "integer", "minimum": 1},
            "start_offset_ns": {"type": "integer", "minimum": 0, "default": 0}
          }
        },
        "poisson": {
          "type": "object",
          "required": ["lambda_pps", "count", "length_bytes", "seed"],
          "properties": {
            "lambda_pps": {"type": "number", "exclusiveMinimum": 0},
            "count": {"type": "integer", "minimum": 0},
            "length_bytes": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0}
          }
        },
        "trace": {"type": "string", "description": "Path to a canonical trace file: `<arrival_ns>,<length_bytes>` per line, `#` comments."},
        "pcap": {"type": "string", "description": "Path to a classic PCAP capture (pcapng is rejected)."}
      }
    },
    "nic": {
      "type": "object",
      "required": ["mode", "delays"],
      "additionalProperties": false,
      "properties": {
        "mode": {
          "description": "\"simple\" | {\"counter\": {\"threshold\": k}} | {\"timer\": {\"delay_ns\": d}} | {\"combined\": {\"threshold\": k, \"delay_ns\": d}}",
          "oneOf": [
            {"const": "simple"},
            {"type": "object", "properties": {"counter": {"type": "object", "required": ["threshold"], "properties": {"threshold": {"type": "integer", "minimum": 1}}}}},
            {"type": "object", "properties": {"timer": {"type": "object", "required": ["delay_ns"], "properties": {"delay_ns": {"type": "integer", "minimum": 1}}}}},
            {"type": "object", "properties": {"combined": {"type": "object", "required": ["threshold", "delay_ns"], "properties": {"threshold": {"type": "integer", "minimum": 1}, "delay_ns": {"type": "integer", "minimum": 1}}}}}
          ]
        },
        "delays": {
          "description": "Interrupt cost model: constant once per interrupt, per-byte once per delivered byte; ISR and receiver task are charged separately.",
          "type": "object",
          "required": ["isr_per_byte_ns", "isr_constant_ns", "rx_per_byte_ns", "rx_constant_ns"],
          "properties": {
            "isr_per_byte_ns": {"type": "integer", "minimum": 0},
            "isr_constant_ns": {"type": "integer", "minimum": 0},
            "rx_per_byte_ns": {"type": "integer", "minimum": 0},
            "rx_constant_ns": {"type": "integer", "minimum": 0}
          }
        },
        "end_policy": {"enum": ["flush", "drop"], "default": "flush", "description": "What happens to packets still buffered when the trace ends."},
        "allow_zero_cost": {"type": "boolean", "default": false, "description": "Permit an all-zero delay model."}
      }
    },
    "workload": {
      "type": "object",
      "required": ["required_compute_ns"],
      "properties": {
        "required_compute_ns": {"type": "integer", "minimum": 0, "description": "Uninterrupted CPU time the user code needs."}
      }
    },
    "sweep": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "counter_thresholds": {"type": "array", "items": {"type": "integer", "minimum": 1}, "description": "Axis over the counter threshold (counter/combined modes)."},
        "timer_delays_ns": {"type": "array", "items": {"type": "integer", "minimum": 1}, "description": "Axis over the timer delay (timer/combined modes)."},
        "lambdas_pps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "description": "Axis over the Poisson rate; the packet count scales with lambda so the observation window stays fixed."},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "description": "Axis over the Poisson seed."},
        "aggregate": {"enum": ["none", "mean"], "default": "none", "description": "mean collapses the seed axis into mean + sample standard deviation."}
      }
    },
    "output": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "path": {"type": "string"},
        "format": {"enum": ["csv", "json"], "default": "csv"},
        "include_events": {"type": "boolean", "default": false, "description": "Include the interrupt timeline in JSON results."}
      }
    },
    "truncate_at_completion": {"type": "boolean", "default": false, "description": "Discard interrupts firing after workload completion instead of servicing them."}
  }
}
"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(load: &str) -> String {
        format!(
            r#"{{
              "load": {{{load}}},
              "nic": {{
                "mode": "simple",
                "delays": {{"isr_per_byte_ns": 1, "isr_constant_ns": 2, "rx_per_byte_ns": 0, "rx_constant_ns": 0}}
              }},
              "workload": {{"required_compute_ns": 1000}}
            }}"#
        )
    }

    #[test]
    fn parses_minimal_config() {
        let cfg: ExperimentConfig = serde_json::from_str(&minimal(
            r#""uniform": {"period_ns": 10, "count": 3, "length_bytes": 64}"#,
        ))
        .unwrap();
        cfg.validate().unwrap();
        assert!(cfg.load.uniform.is_some());
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn rejects_multiple_load_sources() {
        let cfg: ExperimentConfig = serde_json::from_str(&minimal(
            r#""uniform": {"period_ns": 10, "count": 3, "length_bytes": 64},
               "poisson": {"lambda_pps": 100.0, "count": 3, "length_bytes": 64, "seed": 1}"#,
        ))
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("exactly one load source"));
    }

    #[test]
    fn rejects_no_load_source() {
        let cfg: ExperimentConfig = serde_json::from_str(&minimal("")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_zero_cost_nic_unless_allowed() {
        let text = r#"{
          "load": {"uniform": {"period_ns": 10, "count": 3, "length_bytes": 64}},
          "nic": {
            "mode": "simple",
            "delays": {"isr_per_byte_ns": 0, "isr_constant_ns": 0, "rx_per_byte_ns": 0, "rx_constant_ns": 0}
          },
          "workload": {"required_compute_ns": 1000}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(cfg.validate().is_err());

        let text = text.replace(
            "\"mode\": \"simple\",",
            "\"mode\": \"simple\", \"allow_zero_cost\": true,",
        );
        let cfg: ExperimentConfig = serde_json::from_str(&text).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_mismatched_sweep_axes() {
        let text = r#"{
          "load": {"uniform": {"period_ns": 10, "count": 3, "length_bytes": 64}},
          "nic": {
            "mode": {"timer": {"delay_ns": 100}},
            "delays": {"isr_per_byte_ns": 1, "isr_constant_ns": 2, "rx_per_byte_ns": 0, "rx_constant_ns": 0}
          },
          "workload": {"required_compute_ns": 1000},
          "sweep": {"counter_thresholds": [1, 2]}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("counter"));

        let text = text.replace(
            r#""sweep": {"counter_thresholds": [1, 2]}"#,
            r#""sweep": {"lambdas_pps": [100.0]}"#,
        );
        let cfg: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("poisson"));
    }

    #[test]
    fn mode_json_shapes() {
        let m: ModerationMode = serde_json::from_str(r#""simple""#).unwrap();
        assert_eq!(m, ModerationMode::Simple);
        let m: ModerationMode =
            serde_json::from_str(r#"{"combined": {"threshold": 4, "delay_ns": 100}}"#).unwrap();
        assert_eq!(
            m,
            ModerationMode::Combined {
                threshold: 4,
                delay_ns: 100
            }
        );
    }

    #[test]
    fn schema_is_valid_json() {
        serde_json::from_str::<serde_json::Value>(CONFIG_SCHEMA).unwrap();
    }
}
