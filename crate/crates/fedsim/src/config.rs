//! Line-based `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; absent
//! keys take the defaults listed in [`KEYS`]. Unknown or repeated keys are
//! rejected, as are values that do not parse as the key's type.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fedsim_core::experiments::{EarlyStopping, ExperimentConfig, Topology};
use fedsim_core::nn::ModelSpec;

use crate::error::{AppError, Result};

/// Recognised keys with their defaults, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("topology", "cl"),
    ("clients", ""),
    ("lr", "0.0001"),
    ("rounds", "75"),
    ("batch_size", "8"),
    ("local_epochs", "1"),
    ("seed", "0"),
    ("min_epochs", "50"),
    ("early_stop_delta", "0.000001"),
    ("data.kind", "synthetic"),
    ("data.path", ""),
    ("data.classes", "11"),
    ("data.per_class", "27"),
    ("data.skew", "1"),
    ("data.sources", "source-a,source-b"),
    ("augment", "on"),
    ("augment_order", "before_split"),
    ("split_fraction", "0.8"),
    ("image_size", "128"),
    ("model.conv", "32,32,64,64"),
    ("model.dense", "128"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Synthetic,
    Folder,
}

/// Whether augmentation runs on the whole corpus before the train/test split
/// or on the training split only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentOrder {
    BeforeSplit,
    AfterSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub path: Option<PathBuf>,
    pub classes: usize,
    /// Whether `data.classes` was given explicitly (folder data must then match).
    pub classes_explicit: bool,
    pub per_class: usize,
    pub skew: f32,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub data: DataConfig,
    pub augment: bool,
    pub augment_order: AugmentOrder,
    pub split_fraction: f64,
    pub image_size: usize,
    pub conv_widths: [usize; 4],
    pub dense_units: usize,
}

/// Raw entries of a config file plus command-line overrides, before typing.
#[derive(Debug, Clone, Default)]
pub struct ConfigEntries {
    entries: BTreeMap<&'static str, String>,
}

fn known_key(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

impl ConfigEntries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ConfigEntries::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            let k = known_key(key)
                .ok_or_else(|| AppError::Config(format!("line {}: unknown key `{key}`", n + 1)))?;
            if out.entries.insert(k, value.trim().to_string()).is_some() {
                return Err(AppError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(out)
    }

    /// Sets or replaces a value; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let k = known_key(key).ok_or_else(|| AppError::Config(format!("unknown key `{key}`")))?;
        self.entries.insert(k, value.into());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &'static str) -> &str {
        match self.entries.get(key) {
            Some(v) => v,
            None => KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or(""),
        }
    }

    fn get<T: FromStr>(&self, key: &'static str, what: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| AppError::Config(format!("`{key}`: expected {what}, got {raw:?}")))
    }

    fn switch(&self, key: &'static str) -> Result<bool> {
        match self.raw(key) {
            "on" | "true" | "yes" => Ok(true),
            "off" | "false" | "no" => Ok(false),
            other => Err(AppError::Config(format!("`{key}`: expected on or off, got {other:?}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &'static str, what: &str) -> Result<Vec<T>> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| AppError::Config(format!("`{key}`: expected {what}, got {s:?}"))))
            .collect()
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let topology: Topology = self
            .raw("topology")
            .parse()
            .map_err(|_| AppError::Config(format!("`topology`: expected cl, fl or mefl, got {:?}", self.raw("topology"))))?;
        let clients = if self.raw("clients").is_empty() {
            *topology.client_range().start()
        } else {
            self.get("clients", "a positive integer")?
        };
        let range = topology.client_range();
        if !range.contains(&clients) {
            return Err(AppError::Config(format!(
                "`clients`: topology {topology} needs {} to {} clients, got {clients}",
                range.start(),
                range.end()
            )));
        }

        let kind = match self.raw("data.kind") {
            "synthetic" => DataKind::Synthetic,
            "folder" => DataKind::Folder,
            other => return Err(AppError::Config(format!("`data.kind`: expected synthetic or folder, got {other:?}"))),
        };
        let path = match self.raw("data.path") {
            "" if kind == DataKind::Folder => {
                return Err(AppError::Config("`data.path`: required when data.kind = folder".into()));
            }
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        let skew: f32 = self.get("data.skew", "a number in [0, 1]")?;
        if !(0.0..=1.0).contains(&skew) {
            return Err(AppError::Config(format!("`data.skew`: must lie in [0, 1], got {skew}")));
        }
        let sources: Vec<String> = self.list("data.sources", "a tag")?;
        if sources.is_empty() {
            return Err(AppError::Config("`data.sources`: at least one source tag needed".into()));
        }
        let data = DataConfig {
            kind,
            path,
            classes: self.get("data.classes", "a positive integer")?,
            classes_explicit: self.contains("data.classes"),
            per_class: self.get("data.per_class", "a positive integer")?,
            skew,
            sources,
        };
        if data.classes < 2 {
            return Err(AppError::Config("`data.classes`: at least two classes needed".into()));
        }
        if data.per_class == 0 {
            return Err(AppError::Config("`data.per_class`: must be positive".into()));
        }

        let augment_order = match self.raw("augment_order") {
            "before_split" => AugmentOrder::BeforeSplit,
            "after_split" => AugmentOrder::AfterSplit,
            other => {
                return Err(AppError::Config(format!(
                    "`augment_order`: expected before_split or after_split, got {other:?}"
                )))
            }
        };
        let split_fraction: f64 = self.get("split_fraction", "a number in (0, 1)")?;
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            return Err(AppError::Config(format!("`split_fraction`: must lie in (0, 1), got {split_fraction}")));
        }
        let image_size: usize = self.get("image_size", "a positive integer")?;
        let conv: Vec<usize> = self.list("model.conv", "a positive integer")?;
        let conv_widths: [usize; 4] = conv
            .try_into()
            .map_err(|_| AppError::Config("`model.conv`: expected four comma-separated filter counts".into()))?;
        let dense_units: usize = self.get("model.dense", "a positive integer")?;

        let positive = |key: &'static str| -> Result<usize> {
            let v: usize = self.get(key, "a positive integer")?;
            if v == 0 {
                return Err(AppError::Config(format!("`{key}`: must be positive")));
            }
            Ok(v)
        };
        let lr: f32 = self.get("lr", "a positive number")?;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(AppError::Config(format!("`lr`: must be positive, got {lr}")));
        }
        let delta: f64 = self.get("early_stop_delta", "a non-negative number")?;
        if delta.is_nan() || delta < 0.0 {
            return Err(AppError::Config(format!("`early_stop_delta`: must be non-negative, got {delta}")));
        }

        let model = ModelSpec::with_widths(image_size, data.classes, conv_widths, dense_units);
        let mut experiment = ExperimentConfig::new(topology, model);
        experiment.clients = clients;
        experiment.lr = lr;
        experiment.rounds = positive("rounds")?;
        experiment.batch_size = positive("batch_size")?;
        experiment.local_epochs = positive("local_epochs")?;
        experiment.seed = self.get("seed", "an unsigned 64-bit integer")?;
        experiment.early_stop = Some(EarlyStopping {
            min_epochs: self.get("min_epochs", "a non-negative integer")?,
            delta,
        });

        let run = RunConfig {
            experiment,
            data,
            augment: self.switch("augment")?,
            augment_order,
            split_fraction,
            image_size,
            conv_widths,
            dense_units,
        };
        run.experiment
            .validate()
            .map_err(|e| AppError::Config(format!("`image_size`/`model.*`: {e}")))?;
        Ok(run)
    }
}

impl RunConfig {
    /// Rebuilds the model for a dataset with `classes` labels.
    pub fn set_classes(&mut self, classes: usize) {
        self.data.classes = classes;
        self.experiment.model =
            ModelSpec::with_widths(self.image_size, classes, self.conv_widths, self.dense_units);
    }

    /// Canonical, fully resolved config text; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let stop = e.early_stop.unwrap_or_default();
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("topology", e.topology.to_string());
        kv("clients", e.clients.to_string());
        kv("lr", e.lr.to_string());
        kv("rounds", e.rounds.to_string());
        kv("batch_size", e.batch_size.to_string());
        kv("local_epochs", e.local_epochs.to_string());
        kv("seed", e.seed.to_string());
        kv("min_epochs", stop.min_epochs.to_string());
        kv("early_stop_delta", stop.delta.to_string());
        kv(
            "data.kind",
            match self.data.kind {
                DataKind::Synthetic => "synthetic",
                DataKind::Folder => "folder",
            }
            .into(),
        );
        if let Some(p) = &self.data.path {
            kv("data.path", p.display().to_string());
        }
        kv("data.classes", self.data.classes.to_string());
        kv("data.per_class", self.data.per_class.to_string());
        kv("data.skew", self.data.skew.to_string());
        kv("data.sources", self.data.sources.join(","));
        kv("augment", if self.augment { "on" } else { "off" }.into());
        kv(
            "augment_order",
            match self.augment_order {
                AugmentOrder::BeforeSplit => "before_split",
                AugmentOrder::AfterSplit => "after_split",
            }
            .into(),
        );
        kv("split_fraction", self.split_fraction.to_string());
        kv("image_size", self.image_size.to_string());
        kv("model.conv", join(&self.conv_widths));
        kv("model.dense", self.dense_units.to_string());
        s
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        ConfigEntries::default().resolve().expect("defaults are valid")
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    ConfigEntries::parse(text)?.resolve()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config_str(text).unwrap_err().to_string()
    }

    #[test]
    fn topology_only_gives_defaults() {
        let c = parse_config_str("topology = cl\n").unwrap();
        let e = &c.experiment;
        assert_eq!(e.topology, Topology::Centralized);
        assert_eq!((e.clients, e.rounds, e.batch_size, e.local_epochs), (1, 75, 8, 1));
        assert_eq!(e.lr, 1e-4);
        assert_eq!(e.early_stop, Some(EarlyStopping { min_epochs: 50, delta: 1e-6 }));
        assert_eq!(c.split_fraction, 0.8);
        assert_eq!(c.image_size, 128);
        assert!(c.augment);
        assert_eq!(c.augment_order, AugmentOrder::BeforeSplit);
        assert_eq!(e.model, ModelSpec::standard());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config_str("# run\n\ntopology = fl   # iid\nclients = 4\n").unwrap();
        assert_eq!(c.experiment.clients, 4);
    }

    #[test]
    fn mefl_defaults_to_two_clients() {
        assert_eq!(parse_config_str("topology = mefl").unwrap().experiment.clients, 2);
    }

    #[test]
    fn rejections_name_the_key() {
        assert!(err("topology = mefl\nclients = 1").contains("`clients`"));
        assert!(err("topology = cl\ntopology = fl").contains("duplicate key `topology`"));
        assert!(err("epochs = 3").contains("unknown key `epochs`"));
        assert!(err("batch_size = eight").contains("`batch_size`"));
        assert!(err("lr = -1").contains("`lr`"));
        assert!(err("augment = maybe").contains("`augment`"));
        assert!(err("data.kind = folder").contains("`data.path`"));
        assert!(err("data.skew = 1.5").contains("`data.skew`"));
        assert!(err("topology = fl\nclients = 11").contains("`clients`"));
        assert!(err("no equals sign").contains("line 1"));
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = parse_config_str(
            "topology = mefl\nclients = 3\nlr = 0.0005\nseed = 9\ndata.path = /x\naugment_order = after_split\nmodel.conv = 4,4,8,8\nimage_size = 32",
        )
        .unwrap();
        let again = parse_config_str(&c.to_text()).unwrap();
        assert_eq!(again.experiment, c.experiment);
        assert_eq!(again.augment_order, c.augment_order);
        assert_eq!(again.data.path, c.data.path);
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut e = ConfigEntries::parse("topology = cl\nseed = 1").unwrap();
        e.set("topology", "fl").unwrap();
        e.set("clients", "5").unwrap();
        e.set("seed", "42").unwrap();
        let c = e.resolve().unwrap();
        assert_eq!((c.experiment.topology, c.experiment.clients, c.experiment.seed), (Topology::Federated, 5, 42));
        assert!(e.set("bogus", "1").is_err());
    }
}
