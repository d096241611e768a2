//! Resolved run configuration: preset defaults, then the JSON file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::approx_newton::NewtonInferConfig;
use crate::error::{Error, Result};
use crate::highdim::HighDimConfig;
use crate::model::{Dataset, LossModel};
use crate::presets::{preset, DataSpec, ExperimentPreset, Method, PresetName};

/// Everything a command needs; written verbatim into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: PresetName,
    pub data: DataSpec,
    /// CSV file (`x1,...,xp,y`) used instead of generating `data`.
    pub data_path: Option<PathBuf>,
    pub loss: LossModel,
    pub method: Method,
    pub newton: NewtonInferConfig,
    pub lag: Option<usize>,
    pub highdim: HighDimConfig,
    pub n_sims: usize,
    pub level: f64,
    /// Master seed; data and algorithm streams are derived from it.
    pub seed: u64,
    /// Also emit a dense oracle covariance.
    pub oracle: bool,
}

impl RunConfig {
    pub fn from_preset(p: ExperimentPreset) -> Self {
        Self {
            preset: p.name,
            loss: p.data.loss(),
            data: p.data,
            data_path: None,
            method: p.method,
            newton: p.newton,
            lag: p.lag,
            highdim: p.highdim,
            n_sims: p.n_sims,
            level: p.level,
            seed: 0,
            oracle: false,
        }
    }

    pub fn experiment(&self) -> ExperimentPreset {
        ExperimentPreset {
            name: self.preset,
            data: self.data.clone(),
            method: self.method,
            newton: self.newton.clone(),
            lag: self.lag,
            highdim: self.highdim.clone(),
            n_sims: self.n_sims,
            level: self.level,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("level", format!("must lie in (0, 1), got {}", self.level)));
        }
        if self.n_sims == 0 {
            return Err(Error::config("n_sims", "must be at least 1"));
        }
        if self.lag == Some(0) {
            return Err(Error::config("lag", "must be at least 1"));
        }
        if self.data_path.is_none() && self.loss != self.data.loss() {
            return Err(Error::config(
                "loss",
                format!("`{}` does not match the generated data ({})", self.loss.name(), self.data.loss().name()),
            ));
        }
        if self.is_lowdim() {
            // schedule windows only; sizes are checked against the data
            let probe = NewtonInferConfig {
                outer_batch: 1,
                inner_batch: 1,
                ..self.newton.clone()
            };
            probe.validate(1).map_err(|e| prefix(e, "newton"))?;
        }
        Ok(())
    }

    /// Checks against the actual data set.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        self.loss.validate(data)?;
        self.validate_sizes(data.n(), data.p())
    }

    /// Checks that depend on the problem size only.
    pub fn validate_sizes(&self, n: usize, p: usize) -> Result<()> {
        if self.is_lowdim() {
            self.newton.validate(n).map_err(|e| prefix(e, "newton"))?;
        }
        if self.method == Method::HighDim {
            self.highdim.validate(n, p).map_err(|e| prefix(e, "highdim"))?;
        }
        Ok(())
    }

    fn is_lowdim(&self) -> bool {
        matches!(self.method, Method::Sgd | Method::Svrg | Method::TimeSeries)
    }

    /// The command's data set: loaded from `data_path` or generated from the
    /// master seed.
    pub fn load_data(&self) -> Result<Dataset> {
        match &self.data_path {
            Some(p) => Dataset::load_csv(p),
            None => self.data.generate(crate::rng::derive_seed(self.seed, 0, crate::rng::tag::DATA)),
        }
    }
}

fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::Config { key, message } => Error::config(format!("{section}.{key}"), message),
        other => other,
    }
}

/// Values given on the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub lag: Option<usize>,
    pub lambda: Option<f64>,
    pub omega: Option<f64>,
    pub dense_limit: Option<usize>,
    pub n_sims: Option<usize>,
    pub d_o: Option<f64>,
    pub level: Option<f64>,
    pub data_path: Option<PathBuf>,
    pub loss: Option<LossModel>,
    pub oracle: bool,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Overlay `over` onto `base`, rejecting keys `base` does not have. Tagged
/// objects whose `kind` changes are replaced rather than merged.
fn merge(base: &mut Value, over: &Value, path: &str) -> Result<()> {
    let (Value::Object(b), Value::Object(o)) = (&mut *base, over) else {
        *base = over.clone();
        return Ok(());
    };
    if let (Some(bk), Some(ok)) = (b.get("kind"), o.get("kind")) {
        if bk != ok {
            *base = over.clone();
            return Ok(());
        }
    }
    for (k, v) in o {
        let key = join(path, k);
        match b.get_mut(k) {
            None => return Err(Error::config(key, "unknown key")),
            Some(slot) if slot.is_object() && v.is_object() => merge(slot, v, &key)?,
            Some(slot) => *slot = v.clone(),
        }
    }
    Ok(())
}

fn deserialize_config(v: Value) -> Result<RunConfig> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

/// Read a JSON config file.
pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    if !v.is_object() {
        return Err(Error::config("<root>", "config file must hold a JSON object"));
    }
    Ok(v)
}

/// Resolve the configuration: preset defaults (flag, then file, then the
/// command's default preset), the file's values, then the flags.
pub fn parse_config(
    default_preset: PresetName,
    preset_flag: Option<PresetName>,
    file: Option<&Value>,
    flags: &Overrides,
) -> Result<RunConfig> {
    let file_preset = match file.and_then(|f| f.get("preset")) {
        Some(v) => Some(
            serde_json::from_value::<PresetName>(v.clone()).map_err(|e| Error::config("preset", e.to_string()))?,
        ),
        None => None,
    };
    let name = preset_flag.or(file_preset).unwrap_or(default_preset);
    let mut value = serde_json::to_value(RunConfig::from_preset(preset(name)))?;
    let mut loss_given = flags.loss.is_some();
    if let Some(f) = file {
        let mut f = f.clone();
        if let Some(obj) = f.as_object_mut() {
            obj.remove("preset");
            loss_given |= obj.contains_key("loss");
        }
        merge(&mut value, &f, "")?;
    }
    let mut cfg = deserialize_config(value)?;
    cfg.preset = name;

    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(m) = flags.method {
        cfg.method = m;
    }
    if let Some(l) = flags.lag {
        cfg.lag = Some(l);
    }
    if let Some(l) = flags.lambda {
        cfg.highdim.lambda = Some(l);
    }
    if let Some(w) = flags.omega {
        cfg.highdim.omega = Some(w);
    }
    if let Some(d) = flags.dense_limit {
        cfg.highdim.dense_limit = d;
    }
    if let Some(s) = flags.n_sims {
        cfg.n_sims = s;
    }
    if let Some(d) = flags.d_o {
        cfg.newton.d_o = d;
    }
    if let Some(l) = flags.level {
        cfg.level = l;
    }
    if let Some(p) = &flags.data_path {
        cfg.data_path = Some(p.clone());
    }
    if let Some(l) = flags.loss {
        cfg.loss = l;
    }
    if !loss_given && cfg.data_path.is_none() {
        cfg.loss = cfg.data.loss();
    }
    cfg.oracle |= flags.oracle;
    // the master seed drives every stream
    cfg.newton.seed = cfg.seed;
    cfg.highdim.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(file: Option<Value>, flags: Overrides) -> Result<RunConfig> {
        parse_config(PresetName::Lin1, None, file.as_ref(), &flags)
    }

    #[test]
    fn empty_config_gives_preset_defaults() {
        let cfg = parse(None, Overrides::default()).unwrap();
        let lin1 = preset(PresetName::Lin1);
        assert_eq!(cfg.newton, lin1.newton);
        assert_eq!(cfg.data, lin1.data);
        assert_eq!(cfg.method, Method::Sgd);
        assert_eq!(cfg.n_sims, 200);
    }

    #[test]
    fn file_values_merge_and_flags_win() {
        let file = json!({"newton": {"tau0": 3.0}, "n_sims": 12, "seed": 4});
        let cfg = parse(Some(file.clone()), Overrides::default()).unwrap();
        assert_eq!(cfg.newton.tau0, 3.0);
        assert_eq!(cfg.newton.inner_iterations, 200);
        assert_eq!(cfg.n_sims, 12);
        assert_eq!(cfg.seed, 4);
        let cfg = parse(
            Some(file),
            Overrides {
                n_sims: Some(7),
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((cfg.n_sims, cfg.seed, cfg.newton.seed), (7, 9, 9));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse(Some(json!({"level": 0.9})), Overrides::default()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        // feeding the resolved config back as a file changes nothing
        let again = parse(Some(serde_json::from_str(&text).unwrap()), Overrides::default()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse(Some(json!({"newton": {"tau_0": 1.0}})), Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "newton.tau_0"), "{err}");
        let err = parse(Some(json!({"colour": 1})), Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "colour"), "{err}");
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = parse(Some(json!({"newton": {"rho0": "big"}})), Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "newton.rho0"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn decay_outside_window_is_rejected() {
        let err = parse(None, Overrides { d_o: Some(0.4), ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key.contains("d_o")), "{err}");
    }

    #[test]
    fn data_kind_can_be_replaced() {
        let file = json!({"data": {"kind": "linear", "n": 30, "covariance": {"kind": "identity"},
                                   "theta_star": [1.0, 2.0], "sigma": 0.1}});
        let cfg = parse(Some(file), Overrides::default()).unwrap();
        assert_eq!(cfg.data.p(), 2);
        let file = json!({"data": {"covariance": {"kind": "toeplitz_decay", "rate": 0.5}}});
        let cfg = parse(Some(file), Overrides::default()).unwrap();
        assert_eq!(cfg.data.n(), 100);
    }

    #[test]
    fn preset_from_file_and_flag() {
        let file = json!({"preset": "log1"});
        let cfg = parse(Some(file.clone()), Overrides::default()).unwrap();
        assert_eq!(cfg.preset, PresetName::Log1);
        assert_eq!(cfg.loss, LossModel::Logistic);
        let cfg = parse_config(PresetName::Lin1, Some(PresetName::Lin2), Some(&file), &Overrides::default()).unwrap();
        assert_eq!(cfg.preset, PresetName::Lin2);
        assert!(parse(Some(json!({"preset": "nope"})), Overrides::default()).is_err());
    }

    #[test]
    fn highdim_flags() {
        let cfg = parse_config(
            PresetName::HighDimNull,
            None,
            None,
            &Overrides {
                lambda: Some(1e9),
                dense_limit: Some(64),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.highdim.lambda, Some(1e9));
        assert_eq!(cfg.highdim.dense_limit, 64);
        assert_eq!(cfg.method, Method::HighDim);
    }
}
