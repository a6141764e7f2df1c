use std::path::{Path, PathBuf};

use clap::Args;
use polaron::bethe::NewtonOptions;
use polaron::model::DerivOptions;
use polaron::{Amplitudes, EigOptions, ModelParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run depends on. Serialized verbatim into every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ModelParams,
    /// Reference point for exact diagonalization.
    pub u_ref: C64,
    /// Spectral parameters at which functional identities are sampled.
    pub u_grid: Vec<C64>,
    /// Replaces every per-check tolerance when set.
    pub tolerance: Option<f64>,
    pub newton: NewtonOptions,
    /// Random starts per sector for `bethe`.
    pub starts: usize,
    pub deriv: DerivOptions,
    pub eig: EigOptions,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::new(3, C64::new(0.3, 0.1), C64::new(0.7, 0.2), C64::new(1.1, -0.3), Amplitudes::default()),
            u_ref: C64::new(0.37, 0.11),
            u_grid: (0..6).map(|k| C64::new(-0.71 + 0.29 * k as f64, 0.17 - 0.04 * k as f64)).collect(),
            tolerance: None,
            newton: NewtonOptions::default(),
            starts: 200,
            deriv: DerivOptions::default(),
            eig: EigOptions::default(),
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.u_grid.is_empty() {
            return Err(CliError::Config("u_grid is empty".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    /// Independent stream for one consumer, so parallel runs stay reproducible.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

/// Flags shared by all commands; they override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Number of sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Anisotropy, `re` or `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub eta: Option<C64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub psi_minus: Option<C64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub psi_plus: Option<C64>,
    /// Odd-parameter amplitudes `a+,b+,a-,b-` (4 reals or 8 numbers re,im,...).
    #[arg(long, value_parser = parse_amps, allow_hyphen_values = true)]
    pub amps: Option<Amplitudes>,
    /// Switch the boundary odd parameters off.
    #[arg(long)]
    pub diagonal: bool,
    /// Draw generic nondiagonal parameters from the seed (keeps `--n`).
    #[arg(long)]
    pub random_params: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override every check tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads for independent checks.
    #[arg(long, short, default_value_t = 1)]
    pub jobs: usize,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.random_params {
            let n = self.n.unwrap_or(cfg.params.n);
            cfg.params = random_params(n, &mut cfg.rng(u64::MAX));
        }
        let p = &mut cfg.params;
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(e) = self.eta {
            p.eta = e;
        }
        if let Some(x) = self.psi_minus {
            p.psi_minus = x;
        }
        if let Some(x) = self.psi_plus {
            p.psi_plus = x;
        }
        if let Some(a) = self.amps {
            p.amps = a;
        }
        if self.diagonal {
            p.amps = Amplitudes::diagonal();
        }
        if self.tol.is_some() {
            cfg.tolerance = self.tol;
        }
        if self.jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generic parameters away from the resonances.
pub fn random_params(n: usize, r: &mut ChaCha8Rng) -> ModelParams {
    let mut z = |lo: f64, hi: f64, im: f64| C64::new(r.gen_range(lo..hi), r.gen_range(-im..im));
    let amps = Amplitudes { a_plus: z(0.6, 1.4, 0.3), b_plus: z(0.6, 1.4, 0.3), a_minus: z(0.6, 1.4, 0.3), b_minus: z(0.6, 1.4, 0.3) };
    ModelParams::new(n, z(0.2, 0.5, 0.15), z(0.4, 1.2, 0.3), z(0.4, 1.2, 0.3), amps)
}

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"))).collect()
}

pub fn parse_complex(s: &str) -> Result<C64, String> {
    match numbers(s)?[..] {
        [re] => Ok(C64::new(re, 0.0)),
        [re, im] => Ok(C64::new(re, im)),
        _ => Err("expected `re` or `re,im`".into()),
    }
}

fn parse_amps(s: &str) -> Result<Amplitudes, String> {
    let v = numbers(s)?;
    let z: Vec<C64> = match v.len() {
        4 => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
        8 => v.chunks(2).map(|c| C64::new(c[0], c[1])).collect(),
        _ => return Err("expected 4 or 8 comma-separated numbers".into()),
    };
    Ok(Amplitudes { a_plus: z[0], b_plus: z[1], a_minus: z[2], b_minus: z[3] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_flags() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.5,-0.25").unwrap(), C64::new(0.5, -0.25));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_amps("1,2,3").is_err());
        assert_eq!(parse_amps("1,0,0,0,2,0,0,3").unwrap().b_minus, C64::new(0.0, 3.0));
    }

    #[test]
    fn config_roundtrip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.params, cfg.params);
        assert!(text.contains("\"eta\":[0.3,0.1]"));
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.params.n, 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 3}"#).is_err());
    }
}
