//! `key = value` run configuration with `[section]` headers.

use std::path::{Path, PathBuf};

use bilm_core::bilm::{OptimizerConfig, OptimizerKind, TrainConfig};
use bilm_core::BiLmConfig;
use ini::{Ini, Properties};

use crate::error::{CliError, Result};

const KNOWN: &[(&str, &[&str])] = &[
    ("model", &["preset", "config", "max_vocab"]),
    ("data", &["train", "valid"]),
    ("train", &["steps", "batch_size", "log_interval", "seed"]),
    (
        "optimizer",
        &["kind", "learning_rate", "clip_norm", "warmup_steps", "beta1", "beta2", "epsilon"],
    ),
    ("output", &["dir"]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Preset name, or the JSON file the architecture was read from.
    pub model_source: String,
    pub model: BiLmConfig,
    pub max_vocab: Option<usize>,
    pub train_corpus: PathBuf,
    pub valid_corpus: Option<PathBuf>,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

fn get<T: std::str::FromStr>(props: Option<&Properties>, section: &str, key: &str) -> Result<Option<T>> {
    match props.and_then(|p| p.get(key)) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("[{section}] {key}: cannot parse '{v}'"))),
    }
}

fn existing(base: &Path, value: &str, what: &str) -> Result<PathBuf> {
    let p = base.join(value);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::usage(format!("{what} '{}' does not exist", p.display())))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::usage(format!("config '{}' does not exist", path.display())));
        }
        let ini = Ini::load_from_file(path).map_err(|source| CliError::Config {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_ini(&ini, base)
    }

    /// Relative paths are resolved against `base`.
    pub fn from_ini(ini: &Ini, base: &Path) -> Result<Self> {
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("");
            if name.is_empty() && props.is_empty() {
                continue;
            }
            let keys = KNOWN
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| CliError::usage(format!("unknown section [{name}]")))?;
            if let Some((k, _)) = props.iter().find(|(k, _)| !keys.contains(k)) {
                return Err(CliError::usage(format!("unknown key '{k}' in [{name}]")));
            }
        }
        let model = ini.section(Some("model"));
        let (model_source, arch) = match (
            model.and_then(|m| m.get("preset")),
            model.and_then(|m| m.get("config")),
        ) {
            (Some(p), None) => {
                let cfg = BiLmConfig::preset(p.trim())
                    .ok_or_else(|| CliError::usage(format!("unknown preset '{p}'")))?;
                (p.trim().to_string(), cfg)
            }
            (None, Some(file)) => {
                let p = existing(base, file.trim(), "model config")?;
                let text = std::fs::read_to_string(&p).map_err(bilm_core::Error::from)?;
                let cfg: BiLmConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                (p.display().to_string(), cfg)
            }
            _ => return Err(CliError::usage("[model] needs exactly one of preset or config")),
        };
        arch.validate()?;

        let data = ini.section(Some("data"));
        let train_corpus = data
            .and_then(|d| d.get("train"))
            .ok_or_else(|| CliError::usage("[data] train is required"))?;
        let train_corpus = existing(base, train_corpus.trim(), "training corpus")?;
        let valid_corpus = data
            .and_then(|d| d.get("valid"))
            .map(|v| existing(base, v.trim(), "validation corpus"))
            .transpose()?;

        let t = ini.section(Some("train"));
        let defaults = TrainConfig::default();
        let o = ini.section(Some("optimizer"));
        let mut optimizer = match get::<String>(o, "optimizer", "kind")?.as_deref() {
            None | Some("sgd") => OptimizerConfig::default(),
            Some("adam") => OptimizerConfig::adam(1e-3),
            Some(other) => return Err(CliError::usage(format!("unknown optimizer '{other}'"))),
        };
        if let Some(v) = get(o, "optimizer", "learning_rate")? {
            optimizer.learning_rate = v;
        }
        if let Some(v) = o.and_then(|p| p.get("clip_norm")) {
            optimizer.clip_norm = match v.trim() {
                "none" | "off" => None,
                s => Some(s.parse().map_err(|_| {
                    CliError::usage(format!("[optimizer] clip_norm: cannot parse '{s}'"))
                })?),
            };
        }
        if let Some(v) = get(o, "optimizer", "warmup_steps")? {
            optimizer.warmup_steps = v;
        }
        if let Some(v) = get(o, "optimizer", "beta1")? {
            optimizer.beta1 = v;
        }
        if let Some(v) = get(o, "optimizer", "beta2")? {
            optimizer.beta2 = v;
        }
        if let Some(v) = get(o, "optimizer", "epsilon")? {
            optimizer.epsilon = v;
        }
        if optimizer.learning_rate.is_nan() || optimizer.learning_rate <= 0.0 {
            return Err(CliError::usage("[optimizer] learning_rate must be positive"));
        }
        let train = TrainConfig {
            steps: get(t, "train", "steps")?.unwrap_or(defaults.steps),
            batch_size: get(t, "train", "batch_size")?.unwrap_or(defaults.batch_size),
            log_interval: get(t, "train", "log_interval")?.unwrap_or(defaults.log_interval),
            seed: get(t, "train", "seed")?.unwrap_or(defaults.seed),
            optimizer,
        };
        if train.batch_size == 0 || train.log_interval == 0 {
            return Err(CliError::usage("[train] batch_size and log_interval must be >= 1"));
        }
        let output_dir = base.join(
            ini.section(Some("output"))
                .and_then(|s| s.get("dir"))
                .unwrap_or("out")
                .trim(),
        );
        Ok(RunConfig {
            model_source,
            model: arch,
            max_vocab: get(model, "model", "max_vocab")?,
            train_corpus,
            valid_corpus,
            train,
            output_dir,
        })
    }

    /// Every resolved value, in the same format as the input.
    pub fn snapshot(&self) -> Ini {
        let mut ini = Ini::new();
        let opt = &self.train.optimizer;
        let mut model = ini.with_section(Some("model"));
        if self.model_source.ends_with(".json") {
            model.set("config", &self.model_source);
        } else {
            model.set("preset", &self.model_source);
        }
        if let Some(v) = self.max_vocab {
            model.set("max_vocab", v.to_string());
        }
        let mut data = ini.with_section(Some("data"));
        data.set("train", self.train_corpus.display().to_string());
        if let Some(v) = &self.valid_corpus {
            data.set("valid", v.display().to_string());
        }
        ini.with_section(Some("train"))
            .set("steps", self.train.steps.to_string())
            .set("batch_size", self.train.batch_size.to_string())
            .set("log_interval", self.train.log_interval.to_string())
            .set("seed", self.train.seed.to_string());
        ini.with_section(Some("optimizer"))
            .set(
                "kind",
                match opt.kind {
                    OptimizerKind::Sgd => "sgd",
                    OptimizerKind::Adam => "adam",
                },
            )
            .set("learning_rate", opt.learning_rate.to_string())
            .set(
                "clip_norm",
                opt.clip_norm.map_or("none".to_string(), |c| c.to_string()),
            )
            .set("warmup_steps", opt.warmup_steps.to_string())
            .set("beta1", opt.beta1.to_string())
            .set("beta2", opt.beta2.to_string())
            .set("epsilon", opt.epsilon.to_string());
        ini.with_section(Some("output"))
            .set("dir", self.output_dir.display().to_string());
        ini
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, base: &Path) -> Result<RunConfig> {
        RunConfig::from_ini(&Ini::load_from_str(text).unwrap(), base)
    }

    #[test]
    fn resolves_and_round_trips_through_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.txt"), "a b\n").unwrap();
        let cfg = parse(
            "[model]\npreset = tiny-lstm\n[data]\ntrain = c.txt\n[train]\nsteps = 7\nseed = 42\n\
             [optimizer]\nkind = adam\nlearning_rate = 0.01\nclip_norm = none\n",
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.train.steps, 7);
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.train.optimizer.kind, OptimizerKind::Adam);
        assert_eq!(cfg.train.optimizer.clip_norm, None);
        assert_eq!(cfg.output_dir, dir.path().join("out"));

        let again = RunConfig::from_ini(&cfg.snapshot(), Path::new("/")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.txt"), "a b\n").unwrap();
        let bad = [
            "[model]\npreset = tiny-lstm\n[data]\ntrain = missing.txt\n",
            "[model]\npreset = huge\n[data]\ntrain = c.txt\n",
            "[model]\npreset = tiny-lstm\n[data]\ntrain = c.txt\n[train]\nstepz = 3\n",
            "[model]\npreset = tiny-lstm\n[data]\ntrain = c.txt\n[train]\nsteps = many\n",
            "[data]\ntrain = c.txt\n",
            "[model]\npreset = tiny-lstm\n[data]\ntrain = c.txt\n[optimizer]\nkind = rmsprop\n",
        ];
        for text in bad {
            let err = parse(text, dir.path()).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }
}
