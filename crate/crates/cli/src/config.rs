//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment line. Unknown or repeated keys are
//! errors. Relative paths are resolved against the directory of the config
//! file. Recognized keys and their defaults:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `problem` | `identity_quadrants` | `identity_quadrants`, `deblur`, `tomo` or `mtx` |
//! | `size` | `64` | image side length |
//! | `matrix` | | MatrixMarket file for `problem = mtx` |
//! | `noise` | `0.01` (images), `0` (mtx) | relative Gaussian noise level of the data |
//! | `blur_band`, `blur_sigma` | `3`, `0.7` | blur operator |
//! | `tomo_angles`, `tomo_detectors` | `size` | ray geometry |
//! | `parts` | `4` | number of subproblems |
//! | `splitting` | `quadrant` for identity and deblur, else `row_blocks` | |
//! | `prior` | `smallness` | or `diffusion` (images only) |
//! | `alpha` | `0.01` | regularization weight |
//! | `weights` | `uq` | `uq` or `identity` (what `weights` writes) |
//! | `rank` | `10` | low-rank Hessian approximation |
//! | `weighted` | `false` | `solve` reads weights when true |
//! | `weights_file` | `<problem_dir>/weights.csv` | |
//! | `solver` | `admm_sync` | `admm_async`, `gauss_newton` or `nlcg` |
//! | `max_iter` | `10` | outer iterations or global updates |
//! | `rho0`, `adaptive_rho` | `5`, `true` | penalty parameter |
//! | `tol` | automatic | fixed primal and dual tolerance |
//! | `inner_iter`, `max_pcg`, `pcg_tol` | `3`, `500`, `1e-10` | x-step solver |
//! | `n_a`, `k_a` | `parts`, `1` | partial barrier and delay bound |
//! | `scheduler` | `simulated` | or `parallel` |
//! | `latency` | `fixed:1` | `fixed:t`, `uniform:lo:hi` or `two_point:lo:hi:p` |
//! | `slow_worker`, `slow_factor` | none, `10` | one worker with scaled latency |
//! | `clock` | `logical` | or `wall` |
//! | `seed` | `0` | |
//! | `problem_dir` | output directory | where `gen` wrote the problem |
//! | `out` | | output directory (`--out` overrides) |
//! | `manifest` | | matrix list for `batch` |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wadmm_core::async_engine::Latency;
use wadmm_core::solvers::Clock;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    IdentityQuadrants,
    Deblur,
    Tomo,
    Mtx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    Quadrant,
    RowBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    Smallness,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightsMode {
    Uq,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    AdmmSync,
    AdmmAsync,
    GaussNewton,
    Nlcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Simulated,
    Parallel,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!("expected one of {}", [$($name),+].join(", "))),
                }
            }
        }

        impl $ty {
            pub fn as_str(&self) -> &'static str {
                $(if *self == $variant { return $name; })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(Generator {
    "identity_quadrants" => Generator::IdentityQuadrants,
    "deblur" => Generator::Deblur,
    "tomo" => Generator::Tomo,
    "mtx" => Generator::Mtx,
});
keyword_enum!(Splitting {
    "quadrant" => Splitting::Quadrant,
    "row_blocks" => Splitting::RowBlocks,
});
keyword_enum!(PriorChoice {
    "smallness" => PriorChoice::Smallness,
    "diffusion" => PriorChoice::Diffusion,
});
keyword_enum!(WeightsMode {
    "uq" => WeightsMode::Uq,
    "identity" => WeightsMode::Identity,
});
keyword_enum!(SolverKind {
    "admm_sync" => SolverKind::AdmmSync,
    "admm_async" => SolverKind::AdmmAsync,
    "gauss_newton" => SolverKind::GaussNewton,
    "nlcg" => SolverKind::Nlcg,
});
keyword_enum!(SchedulerKind {
    "simulated" => SchedulerKind::Simulated,
    "parallel" => SchedulerKind::Parallel,
});

fn parse_clock(s: &str) -> Result<Clock, String> {
    match s {
        "logical" => Ok(Clock::Logical),
        "wall" => Ok(Clock::Wall),
        _ => Err("expected logical or wall".into()),
    }
}

fn clock_str(c: Clock) -> &'static str {
    match c {
        Clock::Logical => "logical",
        Clock::Wall => "wall",
    }
}

pub fn parse_latency(s: &str) -> Result<Latency, String> {
    let fields: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, String> {
        fields
            .get(i)
            .ok_or_else(|| format!("latency '{s}' is missing a field"))?
            .parse::<f64>()
            .map_err(|_| format!("bad number in latency '{s}'"))
    };
    let lat = match (fields[0], fields.len()) {
        ("fixed", 2) => Latency::Fixed(num(1)?),
        ("uniform", 3) => Latency::Uniform {
            low: num(1)?,
            high: num(2)?,
        },
        ("two_point", 4) => Latency::TwoPoint {
            low: num(1)?,
            high: num(2)?,
            p_high: num(3)?,
        },
        _ => return Err("expected fixed:t, uniform:lo:hi or two_point:lo:hi:p".into()),
    };
    Ok(lat)
}

fn latency_str(l: &Latency) -> String {
    match *l {
        Latency::Fixed(t) => format!("fixed:{t}"),
        Latency::Uniform { low, high } => format!("uniform:{low}:{high}"),
        Latency::TwoPoint { low, high, p_high } => format!("two_point:{low}:{high}:{p_high}"),
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Generator,
    pub size: usize,
    pub matrix: Option<PathBuf>,
    pub noise: Option<f64>,
    pub blur_band: usize,
    pub blur_sigma: f64,
    pub tomo_angles: Option<usize>,
    pub tomo_detectors: Option<usize>,
    pub parts: usize,
    pub splitting: Option<Splitting>,
    pub prior: PriorChoice,
    pub alpha: f64,
    pub weights: WeightsMode,
    pub rank: usize,
    pub weighted: bool,
    pub weights_file: Option<PathBuf>,
    pub solver: SolverKind,
    pub max_iter: usize,
    pub rho0: f64,
    pub adaptive_rho: bool,
    pub tol: Option<f64>,
    pub inner_iter: usize,
    pub max_pcg: usize,
    pub pcg_tol: f64,
    pub n_a: Option<usize>,
    pub k_a: usize,
    pub scheduler: SchedulerKind,
    pub latency: Latency,
    pub slow_worker: Option<usize>,
    pub slow_factor: f64,
    pub clock: Clock,
    pub seed: u64,
    pub problem_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Directory relative paths are resolved against; not a config key.
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: Generator::IdentityQuadrants,
            size: 64,
            matrix: None,
            noise: None,
            blur_band: 3,
            blur_sigma: 0.7,
            tomo_angles: None,
            tomo_detectors: None,
            parts: 4,
            splitting: None,
            prior: PriorChoice::Smallness,
            alpha: 1e-2,
            weights: WeightsMode::Uq,
            rank: 10,
            weighted: false,
            weights_file: None,
            solver: SolverKind::AdmmSync,
            max_iter: 10,
            rho0: 5.0,
            adaptive_rho: true,
            tol: None,
            inner_iter: 3,
            max_pcg: 500,
            pcg_tol: 1e-10,
            n_a: None,
            k_a: 1,
            scheduler: SchedulerKind::Simulated,
            latency: Latency::Fixed(1.0),
            slow_worker: None,
            slow_factor: 10.0,
            clock: Clock::Logical,
            seed: 0,
            problem_dir: None,
            out: None,
            manifest: None,
            base_dir: PathBuf::from("."),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("invalid value '{value}' for {key}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, &base)
    }

    /// Parses config text; `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg = RunConfig {
            base_dir: base_dir.to_path_buf(),
            ..RunConfig::default()
        };
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config(format!("{}:{}: {msg}", origin.display(), i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("key '{key}' given twice")));
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value;
        match key {
            "problem" => self.problem = v.parse().map_err(|e| format!("problem: {e}"))?,
            "size" => self.size = parse_value(key, v)?,
            "matrix" => self.matrix = Some(PathBuf::from(v)),
            "noise" => self.noise = Some(parse_value(key, v)?),
            "blur_band" => self.blur_band = parse_value(key, v)?,
            "blur_sigma" => self.blur_sigma = parse_value(key, v)?,
            "tomo_angles" => self.tomo_angles = Some(parse_value(key, v)?),
            "tomo_detectors" => self.tomo_detectors = Some(parse_value(key, v)?),
            "parts" => self.parts = parse_value(key, v)?,
            "splitting" => self.splitting = Some(v.parse().map_err(|e| format!("splitting: {e}"))?),
            "prior" => self.prior = v.parse().map_err(|e| format!("prior: {e}"))?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "weights" => self.weights = v.parse().map_err(|e| format!("weights: {e}"))?,
            "rank" => self.rank = parse_value(key, v)?,
            "weighted" => self.weighted = parse_value(key, v)?,
            "weights_file" => self.weights_file = Some(PathBuf::from(v)),
            "solver" => self.solver = v.parse().map_err(|e| format!("solver: {e}"))?,
            "max_iter" => self.max_iter = parse_value(key, v)?,
            "rho0" => self.rho0 = parse_value(key, v)?,
            "adaptive_rho" => self.adaptive_rho = parse_value(key, v)?,
            "tol" => self.tol = Some(parse_value(key, v)?),
            "inner_iter" => self.inner_iter = parse_value(key, v)?,
            "max_pcg" => self.max_pcg = parse_value(key, v)?,
            "pcg_tol" => self.pcg_tol = parse_value(key, v)?,
            "n_a" => self.n_a = Some(parse_value(key, v)?),
            "k_a" => self.k_a = parse_value(key, v)?,
            "scheduler" => self.scheduler = v.parse().map_err(|e| format!("scheduler: {e}"))?,
            "latency" => self.latency = parse_latency(v)?,
            "slow_worker" => self.slow_worker = Some(parse_value(key, v)?),
            "slow_factor" => self.slow_factor = parse_value(key, v)?,
            "clock" => self.clock = parse_clock(v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "problem_dir" => self.problem_dir = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "manifest" => self.manifest = Some(PathBuf::from(v)),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn noise_level(&self) -> f64 {
        self.noise.unwrap_or(match self.problem {
            Generator::Mtx => 0.0,
            _ => 0.01,
        })
    }

    pub fn splitting(&self) -> Splitting {
        self.splitting.unwrap_or(match self.problem {
            Generator::IdentityQuadrants | Generator::Deblur => Splitting::Quadrant,
            Generator::Tomo | Generator::Mtx => Splitting::RowBlocks,
        })
    }

    /// Canonical text form. Output locations (`out`, `problem_dir`) are left
    /// out so that the same run written to two places gives the same bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.as_str().into());
        kv("size", self.size.to_string());
        if let Some(m) = &self.matrix {
            kv("matrix", m.display().to_string());
        }
        kv("noise", self.noise_level().to_string());
        kv("blur_band", self.blur_band.to_string());
        kv("blur_sigma", self.blur_sigma.to_string());
        kv("tomo_angles", self.tomo_angles.unwrap_or(self.size).to_string());
        kv("tomo_detectors", self.tomo_detectors.unwrap_or(self.size).to_string());
        kv("parts", self.parts.to_string());
        kv("splitting", self.splitting().as_str().into());
        kv("prior", self.prior.as_str().into());
        kv("alpha", self.alpha.to_string());
        kv("weights", self.weights.as_str().into());
        kv("rank", self.rank.to_string());
        kv("weighted", self.weighted.to_string());
        if let Some(w) = &self.weights_file {
            kv("weights_file", w.display().to_string());
        }
        kv("solver", self.solver.as_str().into());
        kv("max_iter", self.max_iter.to_string());
        kv("rho0", self.rho0.to_string());
        kv("adaptive_rho", self.adaptive_rho.to_string());
        if let Some(t) = self.tol {
            kv("tol", t.to_string());
        }
        kv("inner_iter", self.inner_iter.to_string());
        kv("max_pcg", self.max_pcg.to_string());
        kv("pcg_tol", self.pcg_tol.to_string());
        kv("n_a", self.n_a.unwrap_or(self.parts).to_string());
        kv("k_a", self.k_a.to_string());
        kv("scheduler", self.scheduler.as_str().into());
        kv("latency", latency_str(&self.latency));
        if let Some(w) = self.slow_worker {
            kv("slow_worker", w.to_string());
        }
        kv("slow_factor", self.slow_factor.to_string());
        kv("clock", clock_str(self.clock).into());
        kv("seed", self.seed.to_string());
        if let Some(m) = &self.manifest {
            kv("manifest", m.display().to_string());
        }
        s
    }

    /// [`Self::to_text`] as `# ` comment lines.
    pub fn header(&self, comment: &str) -> String {
        self.to_text().lines().map(|l| format!("{comment} {l}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("test.cfg"), Path::new("/base"))
    }

    #[test]
    fn defaults_follow_the_least_squares_setup() {
        let c = parse("").unwrap();
        assert_eq!(c.rho0, 5.0);
        assert_eq!(c.alpha, 1e-2);
        assert_eq!(c.rank, 10);
        assert_eq!(c.max_iter, 10);
        assert_eq!(c.size, 64);
        assert_eq!(c.clock, Clock::Logical);
        assert_eq!(c.noise_level(), 0.01);
        let m = parse("problem = mtx").unwrap();
        assert_eq!(m.noise_level(), 0.0);
        assert_eq!(m.splitting(), Splitting::RowBlocks);
    }

    #[test]
    fn text_round_trips() {
        let c = parse(
            "# comment\nproblem = tomo\nsize=32\nsolver = admm_async\nlatency = two_point:1:3:0.25\nslow_worker = 2\ntol = 1e-6\nseed = 9\n",
        )
        .unwrap();
        let again = parse(&c.to_text()).unwrap();
        assert_eq!(c.to_text(), again.to_text());
        assert_eq!(
            again.latency,
            Latency::TwoPoint {
                low: 1.0,
                high: 3.0,
                p_high: 0.25
            }
        );
        assert_eq!(again.slow_worker, Some(2));
    }

    #[test]
    fn relative_paths_use_the_config_directory() {
        let c = parse("matrix = a/b.mtx").unwrap();
        assert_eq!(c.resolve(c.matrix.as_ref().unwrap()), PathBuf::from("/base/a/b.mtx"));
        let abs = parse("matrix = /x.mtx").unwrap();
        assert_eq!(abs.resolve(abs.matrix.as_ref().unwrap()), PathBuf::from("/x.mtx"));
    }

    #[test]
    fn bad_input_names_the_line() {
        let e = parse("size = 4\nsize = 5").unwrap_err().to_string();
        assert!(e.contains("test.cfg:2"), "{e}");
        assert!(parse("bogus = 1").unwrap_err().to_string().contains("unknown key"));
        assert!(parse("problem = nope").is_err());
        assert!(parse("no equals sign").is_err());
        assert!(parse("latency = fixed").is_err());
        assert!(parse("rank = -1").is_err());
    }

    #[test]
    fn output_locations_are_not_embedded() {
        let c = parse("out = /tmp/a\nproblem_dir = /tmp/b").unwrap();
        assert!(!c.to_text().contains("/tmp"));
    }
}
