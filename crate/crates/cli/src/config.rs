//! Run configuration: JSON file, then command-line overrides, then
//! validation into library parameters.

use std::collections::BTreeMap;
use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use skewlab::curves::BoxSet;
use skewlab::par::Exec;
use skewlab::{perturb, MapParams};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: f64,
    /// Row-major entries `a b c d` of the base matrix.
    pub matrix: [i64; 4],
    pub epsilon: f64,
    pub seed: u64,
    pub bits: u32,
    pub samples: Option<usize>,
    pub horizon: Option<u32>,
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<String>,
    pub csv: Option<String>,
    /// Angles `x, y, z, w` of the experiment's base point.
    pub point: Option<[f64; 4]>,
    /// Source box `cx, cy, cz, cw, hx, hy, hz, hw`.
    #[serde(rename = "box")]
    pub source_box: Option<[f64; 8]>,
    pub target_box: Option<[f64; 8]>,
    pub radius: Option<f64>,
    pub steps: Option<u32>,
    pub grid: Option<usize>,
    pub span: Option<u32>,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 10.0,
            matrix: [2, 1, 1, 1],
            epsilon: 0.0,
            seed: 0,
            bits: skewlab::skew::DEFAULT_BITS,
            samples: None,
            horizon: None,
            tolerances: BTreeMap::new(),
            out: None,
            csv: None,
            point: None,
            source_box: None,
            target_box: None,
            radius: None,
            steps: None,
            grid: None,
            span: None,
            sequential: false,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// JSON config file mirroring these flags.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[arg(long = "N", global = true)]
    pub n: Option<f64>,
    #[arg(long, num_args = 4, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true, global = true)]
    pub matrix: Option<Vec<i64>>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// JSON-lines output file (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// CSV file for per-sample rows.
    #[arg(long, global = true)]
    pub csv: Option<String>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<u32>,
    /// Named tolerance, `name=value`; repeatable.
    #[arg(long = "tol", value_parser = parse_tol, global = true)]
    pub tol: Vec<(String, f64)>,
    /// Point angles `x,y,z,w`.
    #[arg(long, value_parser = parse_list::<4>, allow_hyphen_values = true, global = true)]
    pub point: Option<Vec<f64>>,
    /// Source box `cx,cy,cz,cw,hx,hy,hz,hw`.
    #[arg(long = "box", value_parser = parse_list::<8>, global = true)]
    pub source_box: Option<Vec<f64>>,
    /// Target box, same layout as `--box`.
    #[arg(long, value_parser = parse_list::<8>, global = true)]
    pub target_box: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<u32>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub span: Option<u32>,
    /// Run sample sweeps on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = value.trim().parse().map_err(|e| format!("tolerance `{name}`: {e}"))?;
    Ok((name.trim().to_string(), v))
}

fn parse_list<const K: usize>(s: &str) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != K {
        return Err(format!("expected {K} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn array<const K: usize>(v: &[f64]) -> [f64; K] {
    let mut a = [0.0; K];
    a.copy_from_slice(v);
    a
}

impl RunConfig {
    /// Config file (if any) overridden by flags.
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let mut c = match &flags.config {
            Some(path) => Self::load(Path::new(path))?,
            None => RunConfig::default(),
        };
        if let Some(n) = flags.n {
            c.n = n;
        }
        if let Some(m) = &flags.matrix {
            c.matrix = [m[0], m[1], m[2], m[3]];
        }
        if let Some(e) = flags.epsilon {
            c.epsilon = e;
        }
        if let Some(s) = flags.seed {
            c.seed = s;
        }
        if let Some(b) = flags.bits {
            c.bits = b;
        }
        c.samples = flags.samples.or(c.samples);
        c.horizon = flags.horizon.or(c.horizon);
        for (k, v) in &flags.tol {
            c.tolerances.insert(k.clone(), *v);
        }
        c.out = flags.out.clone().or(c.out);
        c.csv = flags.csv.clone().or(c.csv);
        if let Some(p) = &flags.point {
            c.point = Some(array(p));
        }
        if let Some(b) = &flags.source_box {
            c.source_box = Some(array(b));
        }
        if let Some(b) = &flags.target_box {
            c.target_box = Some(array(b));
        }
        c.radius = flags.radius.or(c.radius);
        c.steps = flags.steps.or(c.steps);
        c.grid = flags.grid.or(c.grid);
        c.span = flags.span.or(c.span);
        c.sequential |= flags.sequential;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Map parameters, perturbed when `epsilon > 0`.
    pub fn params(&self) -> Result<MapParams, CliError> {
        let [a, b, c, d] = self.matrix;
        let p = MapParams::new(self.n, [[a, b], [c, d]], self.bits).map_err(|e| CliError::Config(e.to_string()))?;
        if self.epsilon == 0.0 {
            return Ok(p);
        }
        perturb(&p, self.epsilon, self.seed).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn boxes(&self) -> Result<(BoxSet, BoxSet), CliError> {
        let make = |b: [f64; 8]| {
            BoxSet::new([b[0], b[1], b[2], b[3]], [b[4], b[5], b[6], b[7]]).map_err(|e| CliError::Config(e.to_string()))
        };
        let default = [std::f64::consts::PI; 4];
        let half = [std::f64::consts::FRAC_PI_2; 4];
        let standard = [default, half].concat();
        let source = make(self.source_box.unwrap_or_else(|| array(&standard)))?;
        let target = match self.target_box {
            Some(b) => make(b)?,
            None => source.clone(),
        };
        Ok((source, target))
    }

    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if let Some(0) = self.samples {
            return Err(CliError::Config("samples must be positive".into()));
        }
        for (k, v) in &self.tolerances {
            if !v.is_finite() || *v < 0.0 {
                return Err(CliError::Config(format!("tolerance {k} = {v} must be finite and non-negative")));
            }
        }
        if let Some(p) = self.point {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Config("point must be finite".into()));
            }
        }
        if self.source_box.is_some() || self.target_box.is_some() {
            self.boxes()?;
        }
        Ok(())
    }
}
