//! Run configuration: defaults, an optional TOML file and command-line flags,
//! resolved in that order into a fully specified [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nestfus::grid::{measured, DomainFractions};
use nestfus::vie::{MediumMapSource, RasterMap};
use nestfus::{FftSizing, Interpolation, Medium, MediumSpec, TransducerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, CliResult};

pub const THREADS_ENV: &str = "NESTFUS_THREADS";
pub const DEFAULT_POST_FOCAL: f64 = 10.2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Homogeneous,
    Vie,
}

/// Material map for `vie` mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapConfig {
    Slab { medium: MediumSpec, centre: f64, thickness: f64 },
    Raster { header: PathBuf },
}

impl MapConfig {
    /// `slab:<medium>:<centre_m>:<thickness_m>` or a path to a raster header.
    pub fn parse(text: &str) -> CliResult<Self> {
        if let Some(rest) = text.strip_prefix("slab:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [name, centre, thickness] = parts[..] else {
                return Err(CliError::Config(format!(
                    "slab map `{text}` must read slab:<medium>:<centre_m>:<thickness_m>"
                )));
            };
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| CliError::Config(format!("slab map `{text}`: `{s}` is not a number")))
            };
            return Ok(MapConfig::Slab {
                medium: MediumSpec::preset(name).map_err(config_err)?,
                centre: num(centre)?,
                thickness: num(thickness)?,
            });
        }
        Ok(MapConfig::Raster { header: PathBuf::from(text) })
    }

    pub fn source(&self) -> CliResult<MediumMapSource<f64>> {
        match self {
            MapConfig::Slab { medium, centre, thickness } => {
                if !(*thickness > 0.0) {
                    return Err(CliError::Config("slab thickness must be positive".into()));
                }
                Ok(MediumMapSource::Slab {
                    centre: *centre,
                    thickness: *thickness,
                    inclusion: Medium::from_spec(medium).map_err(config_err)?,
                })
            }
            MapConfig::Raster { header } => Ok(MediumMapSource::Raster(RasterMap::load(header).map_err(config_err)?)),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub transducer: TransducerSpec,
    pub medium: MediumSpec,
    pub n_harmonics: usize,
    pub n_w: usize,
    /// Post-focal distance `d`, m.
    pub post_focal: f64,
    pub mode: Mode,
    pub medium_map: Option<MapConfig>,
    /// Per-harmonic `(x, yz)` domain fractions for harmonics 2, 3, …; the
    /// rule of thumb when absent.
    pub fractions: Option<Vec<(f64, f64)>>,
    pub interpolation: Interpolation,
    pub fft_sizing: FftSizing,
    pub recompute_incident: bool,
    /// Cell size of the aperture disc used for power normalization, m.
    pub disc_spacing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub dump_fields: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            transducer: TransducerSpec::h131(),
            medium: MediumSpec::water(),
            n_harmonics: 5,
            n_w: 6,
            post_focal: DEFAULT_POST_FOCAL,
            mode: Mode::Homogeneous,
            medium_map: None,
            fractions: None,
            interpolation: Interpolation::Trilinear,
            fft_sizing: FftSizing::Exact,
            recompute_incident: false,
            disc_spacing: 1e-4,
            tol: 1e-6,
            max_iter: 500,
            out: PathBuf::from("nestfus-out"),
            threads: None,
            dump_fields: false,
        }
    }
}

/// A preset name or an inline table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PresetOr<T> {
    Name(String),
    Inline(T),
}

/// Optional keys accepted in a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    transducer: Option<PresetOr<TransducerSpec>>,
    medium: Option<PresetOr<MediumSpec>>,
    power: Option<f64>,
    f0: Option<f64>,
    n_points: Option<usize>,
    harmonics: Option<usize>,
    n_w: Option<usize>,
    d: Option<f64>,
    mode: Option<Mode>,
    medium_map: Option<String>,
    fractions: Option<Vec<(f64, f64)>>,
    interpolation: Option<Interpolation>,
    fft_sizing: Option<FftSizing>,
    recompute_incident: Option<bool>,
    disc_spacing: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    dump_fields: Option<bool>,
}

/// Flags shared by the commands that run or plan a simulation.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the settings below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Manifest of an earlier run; replays its configuration exactly.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Transducer preset (H101, H131).
    #[arg(long)]
    pub transducer: Option<String>,
    /// Medium preset (water, liver, kidney) or a TOML file.
    #[arg(long)]
    pub medium: Option<String>,
    /// Radiated acoustic power, W.
    #[arg(long)]
    pub power: Option<f64>,
    /// Override the transducer frequency, Hz.
    #[arg(long)]
    pub f0: Option<f64>,
    /// Number of monopoles on the bowl.
    #[arg(long = "np")]
    pub n_points: Option<usize>,
    /// Highest harmonic to compute.
    #[arg(long)]
    pub harmonics: Option<usize>,
    /// Voxels per wavelength of each harmonic.
    #[arg(long)]
    pub nw: Option<usize>,
    /// Post-focal distance d, m.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// `slab:<medium>:<centre_m>:<thickness_m>` or a raster header file.
    #[arg(long)]
    pub medium_map: Option<String>,
    /// Measured fraction table (h131-water-100w, h131-water-150w,
    /// h131-liver-100w, tabulated-rule) or `x:yz,x:yz,…` pairs.
    #[arg(long)]
    pub fractions: Option<String>,
    /// Pad FFTs to sizes with small prime factors.
    #[arg(long)]
    pub smooth_fft: bool,
    /// Use quadratic instead of linear interpolation between grids.
    #[arg(long)]
    pub quadratic: bool,
    /// Evaluate p1 from the monopoles on every grid.
    #[arg(long)]
    pub recompute_incident: bool,
    /// GMRES relative tolerance in vie mode.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory (default `nestfus-out`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to NESTFUS_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write every harmonic's full 3D field.
    #[arg(long)]
    pub dump_fields: bool,
}

fn parse_fractions(text: &str) -> CliResult<Vec<(f64, f64)>> {
    if let Some(table) = measured::by_name(text) {
        return Ok(table.to_vec());
    }
    text.split(',')
        .map(|pair| {
            let (x, yz) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("fraction pair `{pair}` must read x:yz")))?;
            let p = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("`{s}` is not a number")));
            Ok((p(x)?, p(yz)?))
        })
        .collect()
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn resolve_medium(text: &str) -> CliResult<MediumSpec> {
    let path = Path::new(text);
    if path.extension().is_some_and(|e| e == "toml") {
        return MediumSpec::from_toml_str(&read(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())));
    }
    MediumSpec::preset(text).map_err(config_err)
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = if let Some(path) = &self.manifest {
            let text = read(path)?;
            let manifest: crate::output::Manifest = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            manifest.config
        } else {
            RunConfig::default()
        };
        let mut map_text = None;
        let mut power = None;
        let mut f0 = None;
        let mut n_points = None;
        if let Some(path) = &self.config {
            let file: ConfigFile =
                toml::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            match file.transducer {
                Some(PresetOr::Name(n)) => cfg.transducer = TransducerSpec::preset(&n).map_err(config_err)?,
                Some(PresetOr::Inline(t)) => cfg.transducer = t,
                None => {}
            }
            match file.medium {
                Some(PresetOr::Name(n)) => cfg.medium = resolve_medium(&n)?,
                Some(PresetOr::Inline(m)) => cfg.medium = m,
                None => {}
            }
            power = file.power;
            f0 = file.f0;
            n_points = file.n_points;
            map_text = file.medium_map;
            macro_rules! take {
                ($($src:ident => $dst:ident),*) => { $( if let Some(v) = file.$src { cfg.$dst = v; } )* };
            }
            take!(harmonics => n_harmonics, n_w => n_w, d => post_focal, mode => mode,
                  interpolation => interpolation, fft_sizing => fft_sizing,
                  recompute_incident => recompute_incident, disc_spacing => disc_spacing,
                  tol => tol, max_iter => max_iter, out => out, dump_fields => dump_fields);
            if file.fractions.is_some() {
                cfg.fractions = file.fractions;
            }
            if file.threads.is_some() {
                cfg.threads = file.threads;
            }
        }

        if let Some(name) = &self.transducer {
            cfg.transducer = TransducerSpec::preset(name).map_err(config_err)?;
        }
        if let Some(m) = &self.medium {
            cfg.medium = resolve_medium(m)?;
        }
        if let Some(p) = self.power.or(power) {
            cfg.transducer.power = p;
        }
        if let Some(f) = self.f0.or(f0) {
            cfg.transducer.f0 = f;
        }
        if let Some(n) = self.n_points.or(n_points) {
            cfg.transducer.n_points = n;
        }
        if let Some(n) = self.harmonics {
            cfg.n_harmonics = n;
        }
        if let Some(n) = self.nw {
            cfg.n_w = n;
        }
        if let Some(d) = self.d {
            cfg.post_focal = d;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(text) = self.medium_map.as_ref().or(map_text.as_ref()) {
            cfg.medium_map = Some(MapConfig::parse(text)?);
        }
        if let Some(f) = &self.fractions {
            cfg.fractions = Some(parse_fractions(f)?);
        }
        if self.smooth_fft {
            cfg.fft_sizing = FftSizing::Smooth;
        }
        if self.quadratic {
            cfg.interpolation = Interpolation::Triquadratic;
        }
        if self.recompute_incident {
            cfg.recompute_incident = true;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        } else if cfg.threads.is_none() {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                let n = v
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{v}` is not a thread count")))?;
                cfg.threads = Some(n);
            }
        }
        if self.dump_fields {
            cfg.dump_fields = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_harmonics == 0 {
            return bad("--harmonics must be at least 1".into());
        }
        if self.n_w == 0 {
            return bad("--nw must be at least 1".into());
        }
        if !(self.post_focal >= 0.0) {
            return bad(format!("post-focal distance must be non-negative, got {}", self.post_focal));
        }
        if !(self.transducer.power >= 0.0) || !(self.transducer.f0 > 0.0) {
            return bad("power must be non-negative and f0 positive".into());
        }
        if !(self.disc_spacing > 0.0) || !(self.tol > 0.0) {
            return bad("disc spacing and tolerance must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive".into());
        }
        if let Some(fr) = &self.fractions {
            if fr.len() + 1 < self.n_harmonics {
                return bad(format!("{} fraction pairs cover fewer than {} harmonics", fr.len(), self.n_harmonics));
            }
        }
        if self.mode == Mode::Homogeneous && self.medium_map.is_some() {
            log::warn!("medium map ignored in homogeneous mode");
        }
        self.build_transducer()?;
        Medium::<f64>::from_spec(&self.medium).map_err(config_err)?;
        if let Some(m) = &self.medium_map {
            m.source()?;
        }
        Ok(())
    }

    pub fn build_transducer(&self) -> CliResult<nestfus::BowlTransducer<f64>> {
        self.transducer.build().map_err(config_err)
    }

    pub fn domain_fractions(&self) -> Option<DomainFractions<f64>> {
        self.fractions
            .as_ref()
            .map(|f| DomainFractions::from_pairs(&f[..self.n_harmonics.saturating_sub(1).min(f.len())]))
    }
}
