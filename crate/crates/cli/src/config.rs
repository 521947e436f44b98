use std::path::{Path, PathBuf};

use anyhow::Result;
use opnorm_core::bounds::RSource;
use opnorm_core::matgraph::GenSpec;
use opnorm_core::{Coeff, Dist};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved settings of one run. Everything except the thread count
/// and the output path is embedded in the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    /// Dense CSV coefficient matrix.
    pub matrix: Option<PathBuf>,
    /// Generator name or JSON generator spec.
    pub gen: Option<String>,
    pub n: Option<usize>,
    /// Law name (`gaussian`, `weibull:0.5`, ...) or JSON law spec.
    pub dist: String,
    pub samples: usize,
    pub seed: u64,
    pub p: Option<f64>,
    pub exponent: f64,
    pub zero_threshold: f64,
    pub analytic: bool,
    pub r_source: RSource,
    pub format: Option<Format>,
    pub suite: Option<String>,
    pub ns: Vec<usize>,
    pub ensembles: Vec<String>,
    pub dists: Vec<String>,
    /// Largest connected-subset size counted by `graph`.
    pub k_max: usize,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            matrix: None,
            gen: None,
            n: None,
            dist: "gaussian".into(),
            samples: 2000,
            seed: 0,
            p: None,
            exponent: 1.5,
            zero_threshold: 0.0,
            analytic: false,
            r_source: RSource::Bilinear,
            format: None,
            suite: None,
            ns: Vec::new(),
            ensembles: Vec::new(),
            dists: Vec::new(),
            k_max: 3,
            threads: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())).into())
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Coefficient matrix and its label, from `matrix` or `gen`.
    pub fn coeffs(&self) -> Result<(Coeff, String)> {
        match (&self.matrix, &self.gen) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either --matrix or --gen, not both".into()).into()),
            (Some(path), None) => {
                let a = Coeff::from_csv_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let label = path.file_stem().map_or("matrix".into(), |s| s.to_string_lossy().into_owned());
                Ok((a, label))
            }
            (None, Some(g)) => generated(g, self.n, self.seed),
            (None, None) => Err(CliError::Usage("need --matrix FILE or --gen NAME".into()).into()),
        }
    }

    pub fn dist(&self) -> Result<Dist> {
        parse_dist(&self.dist)
    }
}

/// Built generator and its name.
pub fn generated(gen: &str, n: Option<usize>, seed: u64) -> Result<(Coeff, String)> {
    let spec = parse_gen(gen, n, seed)?;
    let a = spec.build().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((a, spec.name().to_string()))
}

pub fn parse_gen(s: &str, n: Option<usize>, seed: u64) -> Result<GenSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        return GenSpec::from_json(s).map_err(|e| CliError::Usage(format!("generator spec: {e}")).into());
    }
    let n = n.ok_or_else(|| CliError::Usage(format!("generator {s:?} needs --n")))?;
    GenSpec::named(s, n, seed).map_err(|e| CliError::Usage(e.to_string()).into())
}

/// `rademacher`, `gaussian`, `weibull:R`, `exp_power:A`, or a JSON law spec.
pub fn parse_dist(s: &str) -> Result<Dist> {
    let s = s.trim();
    let usage = |msg: String| -> anyhow::Error { CliError::Usage(msg).into() };
    if s.starts_with('{') {
        return Dist::from_json(s).map_err(|e| usage(format!("law spec: {e}")));
    }
    let (name, arg) = match s.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    let num = |what: &str| -> Result<f64> {
        let v = arg.ok_or_else(|| usage(format!("{name} needs a parameter, e.g. {name}:{what}")))?;
        v.parse().map_err(|_| usage(format!("bad parameter {v:?} for {name}")))
    };
    let d = match name {
        "rademacher" => Ok(Dist::rademacher()),
        "gaussian" => Ok(Dist::gaussian()),
        "weibull" => Dist::weibull(num("0.5")?),
        "exp_power" => Dist::exp_power(num("3")?),
        other => {
            return Err(usage(format!(
                "unknown law {other:?}; expected rademacher, gaussian, weibull:R, exp_power:A or JSON"
            )))
        }
    };
    d.map_err(|e| usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_names() {
        assert_eq!(parse_dist("gaussian").unwrap(), Dist::gaussian());
        assert_eq!(parse_dist("weibull:0.5").unwrap(), Dist::weibull(0.5).unwrap());
        assert_eq!(parse_dist(r#"{"kind":"rademacher"}"#).unwrap(), Dist::rademacher());
        for bad in ["cauchy", "weibull", "weibull:x", "weibull:-1"] {
            let e = parse_dist(bad).unwrap_err();
            assert!(matches!(e.downcast_ref::<CliError>(), Some(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn unknown_config_fields_are_rejected_with_position() {
        let e = serde_json::from_str::<RunConfig>("{\n  \"seed\": 1,\n  \"sed\": 2\n}").unwrap_err();
        assert_eq!(e.line(), 3);
        let c: RunConfig = serde_json::from_str(r#"{"seed": 4, "ns": [8, 16]}"#).unwrap();
        assert_eq!((c.seed, c.ns.clone(), c.samples), (4, vec![8, 16], 2000));
    }

    #[test]
    fn threads_and_out_are_not_serialized() {
        let c = RunConfig {
            threads: Some(3),
            out: Some("x".into()),
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(!s.contains("threads") && !s.contains("\"out\""));
    }
}
