use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

use lab_core::extension_field::NormPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Caps,
    Rlp,
    Decouple,
    Extension,
    Kakeya,
    Bush,
    Twoscale,
    Restrict,
    Remark,
    Fit,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

/// Norm sampling knobs; unset fields take the library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub spacing: f64,
    pub work_budget: f64,
    pub target_rel_stderr: f64,
    pub min_replicates: usize,
    pub max_replicates: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        let p = NormPolicy::default();
        Sampling {
            spacing: p.spacing,
            work_budget: p.work_budget,
            target_rel_stderr: p.target_rel_stderr,
            min_replicates: p.min_replicates,
            max_replicates: p.max_replicates,
        }
    }
}

impl Sampling {
    pub fn policy(&self, seed: u64) -> NormPolicy {
        NormPolicy {
            spacing: self.spacing,
            work_budget: self.work_budget,
            target_rel_stderr: self.target_rel_stderr,
            min_replicates: self.min_replicates,
            max_replicates: self.max_replicates,
            seed,
            ..NormPolicy::default()
        }
    }
}

/// Required outcome of the fitted exponent; a miss is a certification failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub p: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub max_rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub n: usize,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default, rename = "N")]
    pub big_n: Vec<f64>,
    #[serde(default, rename = "R")]
    pub big_r: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub mem_budget: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Input points for `kind = fit`.
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub expect: Option<Expect>,
}

fn one() -> usize {
    1
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// Parse or schema failure at a JSON path.
    Invalid { path: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Invalid { path, message } => write!(f, "invalid config at `{path}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path).map_err(ConfigError::Io)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.kind != Kind::Fit && self.n != 2 && self.n != 3 {
            return Err(invalid("n", format!("{} is not 2 or 3", self.n)));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let lists = [("delta", &self.delta), ("N", &self.big_n), ("R", &self.big_r), ("q", &self.q), ("r", &self.r)];
        for (name, list) in lists {
            for (i, v) in list.iter().enumerate() {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(invalid(&format!("{name}[{i}]"), format!("{v} is not positive")));
                }
            }
        }
        if let Some((i, d)) = self.delta.iter().enumerate().find(|(_, d)| **d >= 1.0) {
            return Err(invalid(&format!("delta[{i}]"), format!("{d} is not below 1")));
        }
        let needed = match self.kind {
            Kind::Caps | Kind::Rlp | Kind::Decouple | Kind::Twoscale | Kind::Extension => Some(("delta", self.delta.is_empty())),
            Kind::Kakeya | Kind::Bush => Some(("N", self.big_n.is_empty())),
            Kind::Restrict | Kind::Remark => Some(("R", self.big_r.is_empty())),
            Kind::Fit => Some(("points", self.points.is_empty())),
        };
        if let Some((name, true)) = needed {
            return Err(invalid(name, format!("kind {} needs a non-empty sweep", self.kind)));
        }
        let s = &self.sampling;
        if !(s.spacing > 0.0 && s.target_rel_stderr > 0.0 && s.min_replicates >= 1 && s.max_replicates >= s.min_replicates) {
            return Err(invalid("sampling", "spacing and target must be positive, 1 <= min_replicates <= max_replicates"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the resolved config, output directory excluded.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    /// `<kind>-<first 12 hex digits of the hash>`.
    pub fn experiment_id(&self) -> String {
        format!("{}-{}", self.kind, &self.content_hash()[..12])
    }
}

/// Seed of one sweep point, independent of scheduling order.
pub fn point_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_hash() {
        let a = ExperimentConfig::from_json(r#"{"kind":"bush","n":2,"N":[8,16]}"#).unwrap();
        assert_eq!(a.trials, 1);
        assert_eq!(a.sampling, Sampling::default());
        let b = ExperimentConfig::from_json(r#"{"N":[8,16],"n":2,"kind":"bush","trials":1}"#).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let mut c = a.clone();
        c.out_dir = Some("elsewhere".into());
        assert_eq!(a.content_hash(), c.content_hash());
        c.seed = 1;
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 64);
        assert!(a.experiment_id().starts_with("bush-"));
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let e = ExperimentConfig::from_json(r#"{"kind":"bush","n":2,"N":[8],"bogus":1}"#).unwrap_err();
        assert!(e.to_string().contains("`bogus`"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"kind":"rlp","n":2,"delta":[0.1],"sampling":{"spacing":0.25,"oops":2}}"#)
            .unwrap_err();
        match e {
            ConfigError::Invalid { path, message } => {
                assert_eq!(path, "sampling.oops");
                assert!(message.contains("oops"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn schema_checks() {
        for (text, path) in [
            (r#"{"kind":"rlp","n":4,"delta":[0.1]}"#, "n"),
            (r#"{"kind":"rlp","n":2}"#, "delta"),
            (r#"{"kind":"rlp","n":2,"delta":[0.1,1.5]}"#, "delta[1]"),
            (r#"{"kind":"bush","n":2,"N":[8,-1]}"#, "N[1]"),
            (r#"{"kind":"bush","n":2,"N":[8],"trials":0}"#, "trials"),
            (r#"{"kind":"volume","n":2}"#, "kind"),
        ] {
            match ExperimentConfig::from_json(text).unwrap_err() {
                ConfigError::Invalid { path: p, .. } => assert_eq!(p, path, "{text}"),
                other => panic!("{other}"),
            }
        }
    }

    #[test]
    fn point_seeds() {
        assert_eq!(point_seed(7, "delta=0.25"), point_seed(7, "delta=0.25"));
        assert_ne!(point_seed(7, "delta=0.25"), point_seed(8, "delta=0.25"));
        assert_ne!(point_seed(7, "delta=0.25"), point_seed(7, "delta=0.125"));
    }
}
