//! Problem generation and the on-disk problem directory.
//!
//! A problem directory holds `problem.txt` (sizes and provenance),
//! `split.csv` (original row of every subproblem row), `part<j>_A.mtx` and
//! `part<j>_y.mtx` per subproblem, and `truth.mtx` when the ground truth is
//! known. Image problems also get `truth.pgm`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use wadmm_core::linalg::{norm, SparseMatrix};
use wadmm_core::operators::mtx::{load_vector_market, parse_matrix_market};
use wadmm_core::operators::{
    blur_truth, gaussian_blur_operator, load_matrix_market, quadrant_rows, row_block_ranges, shepp_phantom,
    synthesize_rhs, tomo_ray_operator, write_matrix_market, write_vector_market, ForwardOperator, GridImage,
};
use wadmm_core::random::random_vec;
use wadmm_core::{NoiseCov, PriorSpec, Subproblem};

use crate::config::{Generator, PriorChoice, RunConfig, Splitting};
use crate::error::{CliError, CliResult};

/// Offset between the run seed and the seed of the data noise.
const NOISE_SEED_OFFSET: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    /// `(A_j, y_j)` per subproblem.
    pub parts: Vec<(SparseMatrix, Vec<f64>)>,
    /// Row of the full system behind every subproblem row.
    pub rows: Vec<Vec<usize>>,
    pub truth: Option<Vec<f64>>,
    /// `(width, height)` for image problems.
    pub grid: Option<(usize, usize)>,
    pub n: usize,
    pub m: usize,
    /// True when the right-hand side came from a file rather than `A x_true`.
    pub rhs_from_file: bool,
}

/// `y + level ‖y‖ e / ‖e‖` with seeded standard normal `e`.
pub fn add_noise(y: &mut [f64], level: f64, seed: u64) {
    if level == 0.0 || y.is_empty() {
        return;
    }
    let e = random_vec(y.len(), seed.wrapping_add(NOISE_SEED_OFFSET));
    let scale = level * norm(y) / norm(&e);
    for (yi, ei) in y.iter_mut().zip(&e) {
        *yi += scale * ei;
    }
}

pub fn generate(cfg: &RunConfig) -> CliResult<GeneratedProblem> {
    let level = cfg.noise_level();
    if !(level >= 0.0 && level.is_finite()) {
        return Err(CliError::Config(format!("noise must be nonnegative, got {level}")));
    }
    let image = |img: GridImage| (img.pixels, Some((img.width, img.height)));
    let (a, mut y, truth, grid, rhs_from_file) = match cfg.problem {
        Generator::Mtx => {
            let path = cfg
                .matrix
                .as_ref()
                .ok_or_else(|| CliError::Config("problem = mtx needs a matrix path".into()))?;
            let path = cfg.resolve(path);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "matrix file {} does not exist",
                    path.display()
                )));
            }
            let mm = load_matrix_market(&path)?;
            match mm.rhs {
                Some(b) => (mm.matrix, b, None, None, true),
                None => {
                    let (x, b) = synthesize_rhs(&mm.matrix, cfg.seed);
                    (mm.matrix, b, Some(x), None, false)
                }
            }
        }
        gen => {
            let size = cfg.size;
            let (op, (truth, grid)) = match gen {
                Generator::IdentityQuadrants => (ForwardOperator::identity(size * size), image(shepp_phantom(size)?)),
                Generator::Deblur => (
                    gaussian_blur_operator(size, cfg.blur_band, cfg.blur_sigma)?,
                    image(blur_truth(size)?),
                ),
                Generator::Tomo => (
                    tomo_ray_operator(
                        size,
                        cfg.tomo_angles.unwrap_or(size),
                        cfg.tomo_detectors.unwrap_or(size),
                    )?,
                    image(shepp_phantom(size)?),
                ),
                Generator::Mtx => unreachable!(),
            };
            let y = op.apply(&truth)?;
            (op.to_sparse()?, y, Some(truth), grid, false)
        }
    };
    add_noise(&mut y, level, cfg.seed);
    let (m, n) = (a.nrows(), a.ncols());
    let rows: Vec<Vec<usize>> = match cfg.splitting() {
        Splitting::Quadrant => {
            if !matches!(cfg.problem, Generator::IdentityQuadrants | Generator::Deblur) {
                return Err(CliError::Config(format!(
                    "quadrant splitting needs data on the image grid; use row_blocks for {}",
                    cfg.problem.as_str()
                )));
            }
            let (w, h) = grid.ok_or_else(|| CliError::Config("quadrant splitting needs an image problem".into()))?;
            if m != w * h {
                return Err(CliError::Config(format!(
                    "quadrant splitting needs one data value per pixel ({} rows for {w}x{h})",
                    m
                )));
            }
            if cfg.parts != 4 {
                return Err(CliError::Config(format!(
                    "quadrant splitting has 4 parts, got parts = {}",
                    cfg.parts
                )));
            }
            quadrant_rows(w, h)?.into_iter().collect()
        }
        Splitting::RowBlocks => row_block_ranges(m, cfg.parts)?
            .into_iter()
            .map(|r| r.collect())
            .collect(),
    };
    let parts = rows
        .iter()
        .map(|r| Ok((a.select_rows(r)?, r.iter().map(|&i| y[i]).collect())))
        .collect::<wadmm_core::Result<Vec<_>>>()?;
    Ok(GeneratedProblem {
        parts,
        rows,
        truth,
        grid,
        n,
        m,
        rhs_from_file,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Config lines for MatrixMarket `%` comments.
pub fn mtx_comments(cfg: &RunConfig) -> Vec<String> {
    cfg.to_text().lines().map(str::to_string).collect()
}

pub fn write_problem(dir: &Path, cfg: &RunConfig, p: &GeneratedProblem) -> CliResult<()> {
    create_dir(dir)?;
    let comments = mtx_comments(cfg);
    let mut meta = cfg.header("#");
    let _ = writeln!(meta, "n = {}", p.n);
    let _ = writeln!(meta, "m = {}", p.m);
    let _ = writeln!(meta, "parts = {}", p.parts.len());
    if let Some((w, h)) = p.grid {
        let _ = writeln!(meta, "width = {w}");
        let _ = writeln!(meta, "height = {h}");
    }
    let _ = writeln!(meta, "rhs = {}", if p.rhs_from_file { "file" } else { "synthetic" });
    let _ = writeln!(meta, "noiseless = {}", cfg.noise_level() == 0.0);
    write_text(&dir.join("problem.txt"), &meta)?;

    let mut split = cfg.header("#");
    split.push_str("part,row\n");
    for (j, rows) in p.rows.iter().enumerate() {
        for r in rows {
            let _ = writeln!(split, "{j},{r}");
        }
    }
    write_text(&dir.join("split.csv"), &split)?;

    for (j, (a, y)) in p.parts.iter().enumerate() {
        write_matrix_market(&dir.join(format!("part{j}_A.mtx")), a, &comments)?;
        write_vector_market(&dir.join(format!("part{j}_y.mtx")), y, &comments)?;
    }
    if let Some(t) = &p.truth {
        write_vector_market(&dir.join("truth.mtx"), t, &comments)?;
        if let Some((w, h)) = p.grid {
            write_image(dir, "truth", cfg, GridImage::new(w, h, t.clone())?)?;
        }
    }
    Ok(())
}

/// Writes `<name>.pgm` and the `run.cfg` sidecar that describes it.
pub fn write_image(dir: &Path, name: &str, cfg: &RunConfig, img: GridImage) -> CliResult<()> {
    img.write_pgm(&dir.join(format!("{name}.pgm")))?;
    write_text(&dir.join("run.cfg"), &cfg.to_text())
}

/// `key = value` lines, `#` comments skipped.
pub fn read_meta(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

fn meta_usize(meta: &BTreeMap<String, String>, key: &str, path: &Path) -> CliResult<usize> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Config(format!("{}: missing or invalid '{key}'", path.display())))
}

/// A problem directory read back with the prior of the current config.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub subs: Vec<Subproblem>,
    pub truth: Option<Vec<f64>>,
    pub grid: Option<(usize, usize)>,
    pub n: usize,
}

pub fn build_prior(cfg: &RunConfig, n: usize, grid: Option<(usize, usize)>) -> CliResult<PriorSpec> {
    Ok(match cfg.prior {
        PriorChoice::Smallness => PriorSpec::smallness(n, cfg.alpha)?,
        PriorChoice::Diffusion => {
            let (w, h) = grid.ok_or_else(|| CliError::Config("the diffusion prior needs an image problem".into()))?;
            PriorSpec::diffusion(w, h, cfg.alpha)?
        }
    })
}

/// Subproblems from `(A_j, y_j)` with unit noise covariance and a shared prior.
pub fn assemble(parts: Vec<(SparseMatrix, Vec<f64>)>, prior: PriorSpec) -> CliResult<Vec<Subproblem>> {
    let prior = Arc::new(prior);
    parts
        .into_iter()
        .map(|(a, y)| {
            let m = y.len();
            Ok(Subproblem::new(
                Arc::new(ForwardOperator::Sparse(a)),
                y,
                NoiseCov::identity(m),
                prior.clone(),
            )?)
        })
        .collect()
}

pub fn load_problem(dir: &Path, cfg: &RunConfig) -> CliResult<LoadedProblem> {
    let meta_path = dir.join("problem.txt");
    if !meta_path.exists() {
        return Err(CliError::Config(format!(
            "{} is not a problem directory (run `gen` first)",
            dir.display()
        )));
    }
    let meta = read_meta(&meta_path)?;
    let n = meta_usize(&meta, "n", &meta_path)?;
    let count = meta_usize(&meta, "parts", &meta_path)?;
    let grid = match (meta.get("width"), meta.get("height")) {
        (Some(_), Some(_)) => Some((
            meta_usize(&meta, "width", &meta_path)?,
            meta_usize(&meta, "height", &meta_path)?,
        )),
        _ => None,
    };
    let mut parts = Vec::with_capacity(count);
    for j in 0..count {
        let a_path = dir.join(format!("part{j}_A.mtx"));
        let text = fs::read_to_string(&a_path).map_err(|e| CliError::io(&a_path, e))?;
        let a = parse_matrix_market(&text, &a_path)?;
        let y = load_vector_market(&dir.join(format!("part{j}_y.mtx")))?;
        parts.push((a, y));
    }
    let truth_path = dir.join("truth.mtx");
    let truth = if truth_path.exists() {
        Some(load_vector_market(&truth_path)?)
    } else {
        None
    };
    let subs = assemble(parts, build_prior(cfg, n, grid)?)?;
    Ok(LoadedProblem { subs, truth, grid, n })
}
