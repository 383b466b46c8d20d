//! Training hyperparameters and the flat `key = value` config file.

use std::path::Path;

use super::TrainError;

/// Reading of "a decay rate of 0.25 was applied each epoch" after the decay
/// threshold: compounding multiplies the rate in every following epoch
/// (default); constant sets the learning rate to `lr0 · decay_factor` once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    Compound,
    Constant,
}

impl DecayMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "compound" => Some(Self::Compound),
            "constant" => Some(Self::Constant),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Compound => "compound",
            Self::Constant => "constant",
        }
    }
}

/// The optimization recipe. Defaults are the full-scale run; tests and the
/// toy oracles override fields as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: u32,
    pub lr0: f64,
    pub clip_norm: f64,
    pub decay_factor: f64,
    pub decay_after_epoch: u32,
    pub decay_mode: DecayMode,
    pub batch_size: usize,
    pub seed: u64,
    pub max_source_length: usize,
    pub max_target_length: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 24,
            lr0: 1.0,
            clip_norm: 5.0,
            decay_factor: 0.25,
            decay_after_epoch: 18,
            decay_mode: DecayMode::Compound,
            batch_size: 64,
            seed: 0,
            max_source_length: 100,
            max_target_length: 100,
        }
    }
}

impl TrainConfig {
    // `!(x > 0.0)` rather than `x <= 0.0`: NaN must fail validation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |detail: String| TrainError::BadConfig { detail };
        if self.epochs < 1 {
            return Err(bad("epochs must be ≥ 1".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(bad(format!("lr0 {} must be positive", self.lr0)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(bad(format!(
                "clip_norm {} must be positive",
                self.clip_norm
            )));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(bad(format!(
                "decay_factor {} outside (0, 1]",
                self.decay_factor
            )));
        }
        if self.batch_size == 0 || self.max_source_length == 0 || self.max_target_length == 0 {
            return Err(bad("batch size and length limits must be positive".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` assignment (config files and flag
    /// overrides share this path).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let parse_err = |what: &str| format!("invalid {what} value {v:?}");
        match key.trim() {
            "epochs" => self.epochs = v.parse().map_err(|_| parse_err("epochs"))?,
            "lr0" | "learning_rate" => self.lr0 = v.parse().map_err(|_| parse_err("lr0"))?,
            "clip_norm" => self.clip_norm = v.parse().map_err(|_| parse_err("clip_norm"))?,
            "decay_factor" => {
                self.decay_factor = v.parse().map_err(|_| parse_err("decay_factor"))?
            }
            "decay_after_epoch" => {
                self.decay_after_epoch = v.parse().map_err(|_| parse_err("decay_after_epoch"))?
            }
            "decay_mode" => {
                self.decay_mode = DecayMode::parse(v).ok_or_else(|| parse_err("decay_mode"))?
            }
            "batch_size" => self.batch_size = v.parse().map_err(|_| parse_err("batch_size"))?,
            "seed" => self.seed = v.parse().map_err(|_| parse_err("seed"))?,
            "max_source_length" => {
                self.max_source_length = v.parse().map_err(|_| parse_err("max_source_length"))?
            }
            "max_target_length" => {
                self.max_target_length = v.parse().map_err(|_| parse_err("max_target_length"))?
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Loads a flat `key = value` file; `#` starts a comment line.
    pub fn from_file(path: &Path) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), TrainError> {
        let content = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        for (i, line) in content.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) =
                trimmed
                    .split_once('=')
                    .ok_or_else(|| TrainError::BadConfigFile {
                        path: path.display().to_string(),
                        line: i + 1,
                        reason: "expected key = value".into(),
                    })?;
            self.set(key, value)
                .map_err(|reason| TrainError::BadConfigFile {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason,
                })?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "epochs = {}\nlr0 = {}\nclip_norm = {}\ndecay_factor = {}\ndecay_after_epoch = {}\ndecay_mode = {}\nbatch_size = {}\nseed = {}\nmax_source_length = {}\nmax_target_length = {}\n",
            self.epochs,
            self.lr0,
            self.clip_norm,
            self.decay_factor,
            self.decay_after_epoch,
            self.decay_mode.as_str(),
            self.batch_size,
            self.seed,
            self.max_source_length,
            self.max_target_length,
        )
    }
}
