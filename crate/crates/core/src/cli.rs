//! The `centerward` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, configuration or internal error, 2 a
//! diagnostic failed, 3 a solver did not converge.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{sample_target_grid, RunConfig, Target};
use crate::diagnostics::{run_suite, TargetLaw};
use crate::entropic::{build_ball_grid, EntropicSolution, GridCoupling, TargetGrid};
use crate::error::{Error, Result};
use crate::geometry::P2;
use crate::io::{to_json_bytes, write_json};
use crate::measures::{norm, radial_quantile_oracle};
use crate::quantile::{
    estimate_k, extract_contour, nestedness_check, sphere_directions, Backend, MapMetadata,
    QuantileMap,
};
use crate::semidiscrete::{DiscreteTarget, DualPotential, LaguerreDiagram, SemidiscreteSolution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIAGNOSTIC: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

/// Magnitude of the dual-potential corruption used by the negative control.
const CORRUPTION: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(
    name = "centerward",
    version,
    about = "Center-outward quantiles via optimal transport"
)]
pub struct Cli {
    /// Run configuration (JSON); may also be given after the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: CENTERWARD_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration (JSON).
    pub config_path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReuseArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Solve now instead of loading the artifacts of a previous `solve`.
    #[arg(long)]
    pub inline: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the transport problem and write the map artifacts.
    Solve(ConfigArg),
    /// Extract quantile contours and check that they are nested.
    Contours {
        #[command(flatten)]
        reuse: ReuseArgs,
        /// Contour radii in (0, 1), overriding the config.
        #[arg(long, num_args = 1..)]
        radii: Vec<f64>,
    },
    /// Run the diagnostics suite and write report.json.
    Verify {
        #[command(flatten)]
        reuse: ReuseArgs,
        /// Perturb the dual potentials before verifying (negative control).
        #[arg(long, hide = true)]
        corrupt_psi: bool,
    },
    /// Compare map radii with the closed-form radial oracle.
    OracleCompare(ReuseArgs),
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Convergence { .. } => EXIT_CONVERGENCE,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CENTERWARD_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "CENTERWARD_THREADS must be a positive integer, got `{v}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        // A pool already built (e.g. by an earlier call in the same process) is kept.
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            warn!("thread pool already initialized; --threads ignored");
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let positional = match &cli.command {
        Command::Solve(c) => &c.config_path,
        Command::Contours { reuse, .. } | Command::Verify { reuse, .. } => {
            &reuse.config.config_path
        }
        Command::OracleCompare(reuse) => &reuse.config.config_path,
    };
    let path = positional
        .as_ref()
        .or(cli.config.as_ref())
        .ok_or_else(|| Error::Config("no configuration given (use `--config` or a path)".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    std::fs::create_dir_all(&cfg.out)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    let run = Run::new(cfg)?;
    match &cli.command {
        Command::Solve(_) => run.solve(),
        Command::Contours { reuse, radii } => run.contours(reuse.inline, radii),
        Command::Verify { reuse, corrupt_psi } => run.verify(reuse.inline, *corrupt_psi),
        Command::OracleCompare(reuse) => run.oracle_compare(reuse.inline),
    }
}

/// Exclusive marker file held while a command writes into an output directory.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".centerward.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Artifact body with the tool version and config hash attached.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    version: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Everything needed to rebuild a solved map without solving again.
#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    version: String,
    config_hash: String,
    metadata: MapMetadata,
    state: SolutionState,
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "backend", rename_all = "kebab-case")]
enum SolutionState {
    Semidiscrete {
        points: Vec<P2>,
        weights: Vec<f64>,
        psi: Vec<f64>,
    },
    Entropic {
        dim: usize,
        n_r: usize,
        n_ang: usize,
        target: TargetGrid,
        coupling: GridCoupling,
        self_potential: Option<Vec<f64>>,
    },
}

#[derive(Serialize)]
struct DiagramFile<'a> {
    points: &'a [P2],
    weights: &'a [f64],
    psi: &'a [f64],
    iterations: usize,
    max_residual: f64,
    diagram: &'a LaguerreDiagram,
}

struct Run {
    cfg: RunConfig,
    hash: String,
    target: Target,
}

impl Run {
    fn new(cfg: RunConfig) -> Result<Self> {
        let hash = cfg.hash()?;
        let target = cfg.target()?;
        if let Target::Density(d) = &target {
            if !d.satisfies_hypotheses() {
                warn!(
                    "density `{}` is not bounded away from 0 and infinity on compacts",
                    d.name()
                );
            }
        }
        Ok(Self { cfg, hash, target })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn write<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        write_json(
            &self.path(name),
            &Stamped {
                version: crate::VERSION,
                config_hash: &self.hash,
                body,
            },
        )
    }

    fn solve_map(&self) -> Result<QuantileMap> {
        let cfg = &self.cfg;
        match (cfg.backend, &self.target) {
            (Backend::Semidiscrete, Target::Density(d)) => {
                QuantileMap::solve_semidiscrete(d, &cfg.semidiscrete, cfg.seed)
            }
            (
                Backend::Semidiscrete,
                Target::Sample {
                    points, weights, ..
                },
            ) => {
                let t = DiscreteTarget::normalized(
                    points.iter().map(|p| [p[0], p[1]]).collect(),
                    weights.clone(),
                )?;
                QuantileMap::solve_semidiscrete_target(&t, &cfg.semidiscrete)
            }
            (Backend::Entropic, Target::Density(d)) => {
                QuantileMap::solve_entropic(d, &cfg.entropic, cfg.seed)
            }
            (
                Backend::Entropic,
                Target::Sample {
                    dim,
                    points,
                    weights,
                },
            ) => {
                let grid = build_ball_grid(*dim, cfg.entropic.n_r, cfg.entropic.n_ang)?;
                let t = sample_target_grid(points, weights, *dim)?;
                QuantileMap::solve_entropic_target(&grid, &t, &cfg.entropic)
            }
        }
    }

    fn solve(&self) -> Result<i32> {
        self.write("config.json", &self.cfg)?;
        let start = Instant::now();
        let mut log = format!("centerward {} config {}\n", crate::VERSION, self.hash);
        let map = match self.solve_map() {
            Ok(m) => m,
            Err(e) => {
                let _ = writeln!(log, "failed: {e}");
                std::fs::write(self.path("solve.log"), &log)?;
                return Err(e);
            }
        };
        let secs = start.elapsed().as_secs_f64();
        let state = match (map.semidiscrete(), map.entropic()) {
            (Some(s), _) => {
                let _ = writeln!(
                    log,
                    "backend semidiscrete atoms {} mass_tol {:e}",
                    s.target.len(),
                    self.cfg.semidiscrete.mass_tol
                );
                for step in &s.log {
                    let _ = writeln!(
                        log,
                        "iteration {} {:?} step {:.3e} residual {:.3e} objective {:.12e}",
                        step.iteration, step.kind, step.step, step.max_residual, step.objective
                    );
                }
                self.write(
                    "diagram.json",
                    &DiagramFile {
                        points: s.target.points(),
                        weights: s.target.weights(),
                        psi: s.potential.values(),
                        iterations: s.iterations,
                        max_residual: s.max_residual,
                        diagram: &s.diagram,
                    },
                )?;
                SolutionState::Semidiscrete {
                    points: s.target.points().to_vec(),
                    weights: s.target.weights().to_vec(),
                    psi: s.potential.values().to_vec(),
                }
            }
            (None, Some(s)) => {
                let _ = writeln!(
                    log,
                    "backend entropic d {} grid {}x{} target nodes {}",
                    s.dim(),
                    s.grid.n_r,
                    s.grid.n_ang,
                    s.target.len()
                );
                for st in &s.coupling.stages {
                    let _ = writeln!(
                        log,
                        "stage epsilon {:e} iterations {} marginal_err {:.3e} rebuilds {} kernel_entries {}",
                        st.epsilon, st.iterations, st.marginal_err, st.rebuilds, st.kernel_entries
                    );
                }
                self.write("map.json", &s.table)?;
                SolutionState::Entropic {
                    dim: s.dim(),
                    n_r: s.grid.n_r,
                    n_ang: s.grid.n_ang,
                    target: s.target.clone(),
                    coupling: s.coupling.clone(),
                    self_potential: s.self_potential.clone(),
                }
            }
            _ => unreachable!("a map has exactly one backend"),
        };
        let _ = writeln!(
            log,
            "done iterations {} residual {:.3e} seconds {secs:.2}",
            map.metadata.iterations, map.metadata.residual
        );
        std::fs::write(self.path("solve.log"), &log)?;
        write_json(
            &self.path("solution.json"),
            &SolutionFile {
                version: crate::VERSION.into(),
                config_hash: self.hash.clone(),
                metadata: map.metadata.clone(),
                state,
            },
        )?;
        info!("solved in {secs:.2} s");
        Ok(EXIT_OK)
    }

    fn load_map(&self) -> Result<QuantileMap> {
        let path = self.path("solution.json");
        let bytes = std::fs::read(&path).map_err(|e| {
            Error::Config(format!(
                "cannot read {} ({e}); run `solve` first or pass --inline",
                path.display()
            ))
        })?;
        let file: SolutionFile = serde_json::from_slice(&bytes)?;
        if file.config_hash != self.hash {
            return Err(Error::Config(format!(
                "{} was produced by a different configuration; rerun `solve` or pass --inline",
                path.display()
            )));
        }
        let mut map = match file.state {
            SolutionState::Semidiscrete {
                points,
                weights,
                psi,
            } => QuantileMap::from_semidiscrete(
                SemidiscreteSolution::from_potential(
                    DiscreteTarget::new(points, weights)?,
                    DualPotential::new(psi),
                )?,
                file.metadata.tolerance,
            ),
            SolutionState::Entropic {
                dim,
                n_r,
                n_ang,
                target,
                coupling,
                self_potential,
            } => QuantileMap::from_entropic(
                EntropicSolution::from_parts(
                    build_ball_grid(dim, n_r, n_ang)?,
                    target,
                    coupling,
                    self_potential,
                )?,
                file.metadata.tolerance,
            ),
        };
        map.metadata = file.metadata;
        Ok(map)
    }

    fn map(&self, inline: bool) -> Result<QuantileMap> {
        if inline {
            self.solve_map()
        } else {
            self.load_map()
        }
    }

    fn contours(&self, inline: bool, radii_flag: &[f64]) -> Result<i32> {
        let mut radii = if radii_flag.is_empty() {
            self.cfg.contours.radii.clone()
        } else {
            radii_flag.to_vec()
        };
        if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Domain(format!(
                "contour radius {r} is outside (0, 1)"
            )));
        }
        if radii.is_empty() {
            return Err(Error::Config("no contour radii".into()));
        }
        if radii.windows(2).any(|w| w[1] < w[0]) {
            warn!("contour radii were not increasing; sorting them");
            radii.sort_by(f64::total_cmp);
        }
        if self.target.dim() != 2 {
            return Err(Error::Domain(
                "contours are extracted in the plane only".into(),
            ));
        }
        let map = self.map(inline)?;
        let m = self.cfg.contours.vertices;
        let mut contours = Vec::with_capacity(radii.len());
        for &r in &radii {
            let c = extract_contour(&map, r, m)?;
            self.write(&format!("contour_r{r:.4}.json"), &c)?;
            contours.push(c);
        }
        let report = nestedness_check(&contours, self.cfg.contours.slack_factor * map.blur());
        self.write("nestedness.json", &report)?;
        let mut k_radii = self.cfg.contours.k_radii.clone();
        k_radii.sort_by(|a, b| b.total_cmp(a));
        k_radii.dedup();
        if !k_radii.is_empty() {
            let k = estimate_k(&map, &k_radii, m)?;
            self.write("k_estimate.json", &k)?;
        }
        if report.pass {
            Ok(EXIT_OK)
        } else {
            eprintln!("nestedness check failed");
            Ok(EXIT_DIAGNOSTIC)
        }
    }

    fn verify(&self, inline: bool, corrupt: bool) -> Result<i32> {
        let mut map = self.map(inline)?;
        if corrupt {
            map = map.corrupted(CORRUPTION, self.cfg.seed)?;
        }
        let law = match &self.target {
            Target::Density(d) => TargetLaw::Density(d),
            Target::Sample {
                points, weights, ..
            } => TargetLaw::Sample(points, weights),
        };
        let report = run_suite(
            &map,
            law,
            &self.cfg.diagnostics,
            self.cfg.seed,
            Some(self.hash.clone()),
        );
        std::fs::write(self.path("report.json"), to_json_bytes(&report)?)?;
        if report.pass {
            Ok(EXIT_OK)
        } else {
            eprintln!("failed checks: {}", report.failed().join(", "));
            Ok(EXIT_DIAGNOSTIC)
        }
    }

    fn oracle_compare(&self, inline: bool) -> Result<i32> {
        let profile = match &self.target {
            Target::Density(d) => d.radial_profile(),
            Target::Sample { .. } => None,
        }
        .ok_or_else(|| Error::Config("oracle requires radial density".into()))?;
        let map = self.map(inline)?;
        let dim = map.dim();
        let n = self.cfg.oracle.directions;
        let dirs: Vec<Vec<f64>> = if dim == 2 {
            (0..n)
                .map(|i| {
                    let t = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        } else {
            sphere_directions(n)
        };
        let path = self.path("oracle.csv");
        let mut text = format!("# centerward {} config {}\n", crate::VERSION, self.hash);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r", "oracle", "mean_radius", "max_deviation", "rel_error"])?;
        for &r in &self.cfg.oracle.radii {
            let q = radial_quantile_oracle(&profile, r)?;
            let mut sum = 0.0;
            let mut dev = 0.0f64;
            for u in &dirs {
                let x: Vec<f64> = u.iter().map(|c| r * c).collect();
                let rad = norm(&map.forward(&x)?);
                sum += rad;
                dev = dev.max((rad - q).abs());
            }
            w.write_record([
                format!("{r:.16e}"),
                format!("{q:.16e}"),
                format!("{:.16e}", sum / dirs.len() as f64),
                format!("{dev:.16e}"),
                format!("{:.16e}", dev / q),
            ])?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        text.push_str(&String::from_utf8_lossy(&body));
        std::fs::write(path, text)?;
        Ok(EXIT_OK)
    }
}
