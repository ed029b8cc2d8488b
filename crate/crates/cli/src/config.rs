//! Flat key=value configuration with dotted namespacing.
//!
//! Values resolve in order: built-in default, config file, repeated
//! `--set key=value` flags, then `--seed`. Every run echoes the fully
//! resolved table into a manifest that can be fed back through `--config`
//! to reproduce the run byte-identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use learncurve::cf::Hyperparams;
use learncurve::mlens::synthetic::SyntheticConfig;
use learncurve::mlens::AccumulationConfig;
use learncurve::nearcorr::ProjectionConfig;
use learncurve::randcorr::DistributionSpec;
use learncurve::trajectory::TrajectoryConfig;

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    UInt,
    Float,
    Bool,
    Text,
}

impl Kind {
    fn name(&self) -> &'static str {
        match self {
            Kind::UInt => "non-negative integer",
            Kind::Float => "number",
            Kind::Bool => "boolean (true/false)",
            Kind::Text => "text",
        }
    }

    fn check(&self, value: &str) -> bool {
        match self {
            Kind::UInt => value.parse::<u64>().is_ok(),
            Kind::Float => value.parse::<f64>().is_ok(),
            Kind::Bool => matches!(value, "true" | "false"),
            Kind::Text => true,
        }
    }
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: &'static str,
}

const VALID_FAMILIES: &str = "student_t, beta_recentered, lognormal_recentered, point_mass";

const KEYS: &[KeySpec] = &[
    // Simulation dimensions.
    KeySpec { name: "K", kind: Kind::UInt, default: "100" },
    KeySpec { name: "N", kind: Kind::UInt, default: "100" },
    KeySpec { name: "seed", kind: Kind::UInt, default: "42" },
    KeySpec { name: "threads", kind: Kind::UInt, default: "0" },
    // Correlation distribution.
    KeySpec { name: "family", kind: Kind::Text, default: "student_t" },
    KeySpec { name: "mean", kind: Kind::Float, default: "0.5" },
    KeySpec { name: "sigma", kind: Kind::Float, default: "0.1" },
    KeySpec { name: "dof", kind: Kind::Float, default: "1000" },
    KeySpec { name: "shape1", kind: Kind::Float, default: "2" },
    KeySpec { name: "shape2", kind: Kind::Float, default: "2" },
    KeySpec { name: "log_sigma", kind: Kind::Float, default: "0.5" },
    // Nearest-correlation projection.
    KeySpec { name: "higham.conv_tol", kind: Kind::Float, default: "1e-7" },
    KeySpec { name: "higham.max_iter", kind: Kind::UInt, default: "200" },
    KeySpec { name: "higham.min_eig", kind: Kind::Float, default: "1e-8" },
    // Conditioning engine.
    KeySpec { name: "condvar.audit_every", kind: Kind::UInt, default: "25" },
    // Regime classification.
    KeySpec { name: "regime.band_multiplier", kind: Kind::Float, default: "2" },
    KeySpec { name: "regime.smooth_window", kind: Kind::UInt, default: "5" },
    KeySpec { name: "regime.floor_frac", kind: Kind::Float, default: "0.1" },
    KeySpec { name: "regime.gain_window", kind: Kind::UInt, default: "6" },
    // Recursion verification.
    KeySpec { name: "verify.k_max", kind: Kind::UInt, default: "10" },
    // Closed-form curves.
    KeySpec { name: "theory.rho_bar", kind: Kind::Float, default: "0.5" },
    KeySpec { name: "theory.k_max", kind: Kind::UInt, default: "100" },
    // Factor model.
    KeySpec { name: "cf.factors", kind: Kind::UInt, default: "100" },
    KeySpec { name: "cf.epochs", kind: Kind::UInt, default: "20" },
    KeySpec { name: "cf.lr", kind: Kind::Float, default: "0.005" },
    KeySpec { name: "cf.reg", kind: Kind::Float, default: "0.02" },
    KeySpec { name: "cf.init_std", kind: Kind::Float, default: "0.1" },
    KeySpec { name: "cf.clip_min", kind: Kind::Float, default: "1" },
    KeySpec { name: "cf.clip_max", kind: Kind::Float, default: "5" },
    KeySpec { name: "cf.clip", kind: Kind::Bool, default: "true" },
    KeySpec { name: "cf.model_in", kind: Kind::Text, default: "" },
    KeySpec { name: "cf.model_out", kind: Kind::Text, default: "" },
    // Accumulation experiment.
    KeySpec { name: "accum.outer_iterations", kind: Kind::UInt, default: "20" },
    KeySpec { name: "accum.checkpoint_step", kind: Kind::UInt, default: "100" },
    KeySpec { name: "accum.checkpoint_max", kind: Kind::UInt, default: "2000" },
    KeySpec { name: "accum.threshold", kind: Kind::UInt, default: "100" },
    KeySpec { name: "accum.rootn_c", kind: Kind::Float, default: "100" },
    KeySpec { name: "accum.synthetic", kind: Kind::Bool, default: "false" },
    // Built-in synthetic dataset for accumulate runs without a ratings file.
    KeySpec { name: "accum.synth.users", kind: Kind::UInt, default: "1000" },
    KeySpec { name: "accum.synth.items", kind: Kind::UInt, default: "300" },
    KeySpec { name: "accum.synth.mean_ratings", kind: Kind::Float, default: "30" },
    KeySpec { name: "accum.synth.min_ratings", kind: Kind::UInt, default: "4" },
    KeySpec { name: "accum.synth.rank", kind: Kind::UInt, default: "5" },
    KeySpec { name: "accum.synth.noise", kind: Kind::Float, default: "0.3" },
    KeySpec { name: "accum.synth.factor_scale", kind: Kind::Float, default: "0.5" },
    KeySpec { name: "accum.synth.bias_std", kind: Kind::Float, default: "0.5" },
    KeySpec { name: "accum.synth.exponent", kind: Kind::Float, default: "0.8" },
    // Ingestion summary.
    KeySpec { name: "ingest.threshold", kind: Kind::UInt, default: "100" },
    // Plot input directory (defaults to the output directory).
    KeySpec { name: "plot.input", kind: Kind::Text, default: "" },
];

fn key_spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

fn unknown_key_error(name: &str) -> CliError {
    let mut valid: Vec<&str> = KEYS.iter().map(|k| k.name).collect();
    valid.sort_unstable();
    CliError::Config(format!(
        "unknown config key '{name}'; valid keys: {}",
        valid.join(", ")
    ))
}

/// Fully resolved configuration table.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    values: BTreeMap<&'static str, String>,
}

impl ResolvedConfig {
    /// Resolves defaults, then the config file, then `--set` pairs, then
    /// the `--seed` override.
    pub fn from_sources(
        file: Option<&Path>,
        sets: &[String],
        seed_override: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<&'static str, String> = KEYS
            .iter()
            .map(|k| (k.name, k.default.to_string()))
            .collect();

        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io_err(&format!("config file {}", path.display()), e))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!(
                        "config line {}: expected key=value, got '{line}'",
                        lineno + 1
                    ))
                })?;
                apply(&mut values, key.trim(), value.trim())?;
            }
        }

        for pair in sets {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--set expects key=value, got '{pair}'"))
            })?;
            apply(&mut values, key.trim(), value.trim())?;
        }

        if let Some(seed) = seed_override {
            values.insert("seed", seed.to_string());
        }

        let resolved = Self { values };
        resolved.distribution_spec()?; // validates the family name eagerly
        Ok(resolved)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("unregistered config key '{key}'"))
    }

    pub fn get_usize(&self, key: &str) -> usize {
        self.get(key).parse().expect("validated at load")
    }

    pub fn get_u64(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated at load")
    }

    pub fn get_f64(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated at load")
    }

    pub fn get_bool(&self, key: &str) -> bool {
        self.get(key) == "true"
    }

    pub fn seed(&self) -> u64 {
        self.get_u64("seed")
    }

    pub fn distribution_spec(&self) -> Result<DistributionSpec, CliError> {
        let mean = self.get_f64("mean");
        let spec = match self.get("family") {
            "student_t" => DistributionSpec::StudentT {
                mean,
                sigma: self.get_f64("sigma"),
                dof: self.get_f64("dof"),
            },
            "beta_recentered" => DistributionSpec::BetaRecentered {
                mean,
                shape1: self.get_f64("shape1"),
                shape2: self.get_f64("shape2"),
            },
            "lognormal_recentered" => DistributionSpec::LognormalRecentered {
                mean,
                log_sigma: self.get_f64("log_sigma"),
            },
            "point_mass" => DistributionSpec::PointMass { mean },
            other => {
                return Err(CliError::Config(format!(
                    "invalid family '{other}'; valid families: {VALID_FAMILIES}"
                )))
            }
        };
        spec.validate()
            .map_err(|e| CliError::Config(format!("distribution: {e}")))?;
        Ok(spec)
    }

    pub fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            conv_tol: self.get_f64("higham.conv_tol"),
            max_iter: self.get_usize("higham.max_iter"),
            min_eig: self.get_f64("higham.min_eig"),
        }
    }

    pub fn trajectory(&self) -> Result<TrajectoryConfig, CliError> {
        let cfg = TrajectoryConfig {
            num_vars: self.get_usize("K"),
            num_trajectories: self.get_usize("N"),
            spec: self.distribution_spec()?,
            base_seed: self.seed(),
            projection: self.projection(),
            audit_every: self.get_usize("condvar.audit_every"),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("simulation: {e}")))?;
        Ok(cfg)
    }

    pub fn hyperparams(&self) -> Result<Hyperparams, CliError> {
        let hp = Hyperparams {
            n_factors: self.get_usize("cf.factors"),
            n_epochs: self.get_usize("cf.epochs"),
            learning_rate: self.get_f64("cf.lr"),
            regularization: self.get_f64("cf.reg"),
            init_std: self.get_f64("cf.init_std"),
            clip_range: (self.get_f64("cf.clip_min"), self.get_f64("cf.clip_max")),
        };
        hp.validate()
            .map_err(|e| CliError::Config(format!("cf: {e}")))?;
        Ok(hp)
    }

    pub fn accumulation(&self) -> Result<AccumulationConfig, CliError> {
        let cfg = AccumulationConfig {
            outer_iterations: self.get_usize("accum.outer_iterations"),
            checkpoint_step: self.get_usize("accum.checkpoint_step"),
            checkpoint_max: self.get_usize("accum.checkpoint_max"),
            popularity_threshold: self.get_usize("accum.threshold"),
            rootn_constant: self.get_f64("accum.rootn_c"),
            hp: self.hyperparams()?,
            base_seed: self.seed(),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("accum: {e}")))?;
        Ok(cfg)
    }

    pub fn synthetic(&self) -> Result<SyntheticConfig, CliError> {
        let cfg = SyntheticConfig {
            n_users: self.get_u64("accum.synth.users") as u32,
            n_items: self.get_u64("accum.synth.items") as u32,
            mean_ratings_per_user: self.get_f64("accum.synth.mean_ratings"),
            min_ratings_per_user: self.get_usize("accum.synth.min_ratings"),
            rank: self.get_usize("accum.synth.rank"),
            noise_std: self.get_f64("accum.synth.noise"),
            factor_scale: self.get_f64("accum.synth.factor_scale"),
            bias_std: self.get_f64("accum.synth.bias_std"),
            popularity_exponent: self.get_f64("accum.synth.exponent"),
            seed: self.seed(),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("accum.synth: {e}")))?;
        Ok(cfg)
    }

    /// Deterministic run id: command name, seed, and a hash of the
    /// resolved table.
    pub fn run_id(&self, command: &str) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.values {
            for b in k.bytes().chain(*b"=").chain(v.bytes()) {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
            hash ^= 0xff;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{command}-s{}-{hash:016x}", self.seed())
    }

    /// Key=value echo of every resolved setting, loadable via `--config`.
    pub fn render_manifest(&self, command: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# learncurve manifest");
        let _ = writeln!(out, "# version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command={command}");
        let _ = writeln!(out, "# run_id={}", self.run_id(command));
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Compact one-line echo for error messages.
    pub fn echo_non_defaults(&self) -> String {
        let mut parts = Vec::new();
        for spec in KEYS {
            let v = self.get(spec.name);
            if v != spec.default {
                parts.push(format!("{}={v}", spec.name));
            }
        }
        if parts.is_empty() {
            "defaults".to_string()
        } else {
            parts.join(" ")
        }
    }
}

fn apply(
    values: &mut BTreeMap<&'static str, String>,
    key: &str,
    value: &str,
) -> Result<(), CliError> {
    let spec = key_spec(key).ok_or_else(|| unknown_key_error(key))?;
    if !spec.kind.check(value) {
        return Err(CliError::Config(format!(
            "config key '{key}' expects a {}, got '{value}'",
            spec.kind.name()
        )));
    }
    values.insert(spec.name, value.to_string());
    Ok(())
}
