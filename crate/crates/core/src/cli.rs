//! The `fmuf` command line. Every verb writes its tables plus a run manifest
//! into the output directory; every table header carries the run id.

use crate::analytic::{drive_operator, levels_of, levels_vs_field, omega_d, transition_table};
use crate::asymmetry::{difference_spectrum, Spectrum};
use crate::de::DeSettings;
use crate::dynamics::{Method, SplitOrder};
use crate::fit::{fit, FitBounds, FitData, FitSettings};
use crate::hamiltonian::{dipole_hamiltonian_with, Cluster, PairSelection};
use crate::io::report::{fit_report_table, history_table, polarization_table, transitions_table};
use crate::io::{digest_bytes, digest_file, fmt_f64, load_spectrum, spectrum_table, ClusterConfig, ClusterSubset, RunManifest, SpectrumFormat, Table};
use crate::model::{apply_asymmetry_model, model_polarization, time_grid, FitParams, ModelSettings};
use crate::units::rad_per_us_to_khz;
use crate::{Error, ErrorKind, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "fmuf", version, about = "Spin-cluster dynamics and asymmetry fitting for F-mu-F complexes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Random seed for the optimizer.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Propagation tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// full, muF2, or a comma-separated label list starting with mu.
    #[arg(long, global = true, default_value = "full")]
    pub subset: String,
    /// Cluster configuration (TOML); defaults to the built-in LiYF4 cluster.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn vector(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Pairs {
    All,
    Muon,
}

impl From<Pairs> for PairSelection {
    fn from(p: Pairs) -> Self {
        match p {
            Pairs::All => PairSelection::All,
            Pairs::Muon => PairSelection::MuonOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Propagator {
    Magnus4,
    Strang,
    Yoshida4,
    WeakDrive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DataFormat {
    Asymmetry,
    Counts,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value = "asymmetry")]
    pub format: DataFormat,
    /// Detector balance α; required for counts files.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Constant σ (%) for asymmetry files without a σ column.
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl DataArgs {
    fn spectrum_format(&self) -> Result<SpectrumFormat> {
        match self.format {
            DataFormat::Asymmetry => Ok(SpectrumFormat::Asymmetry { default_sigma: self.sigma }),
            DataFormat::Counts => match self.alpha {
                Some(alpha) => Ok(SpectrumFormat::Counts { alpha }),
                None => Err(Error::InvalidArgument("counts input needs --alpha (no default)".into())),
            },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy levels against an applied field.
    Levels {
        #[arg(long, value_enum, default_value = "z")]
        axis: Axis,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        b_min: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        b_max: f64,
        #[arg(long, default_value_t = 1)]
        b_steps: usize,
        #[arg(long, value_enum, default_value = "all")]
        pairs: Pairs,
        /// Orientation (1-based).
        #[arg(long, default_value_t = 1)]
        orientation: usize,
    },
    /// Drive-allowed transitions of the zero-field levels.
    Transitions {
        #[arg(long, value_enum, default_value = "y")]
        axis: Axis,
        #[arg(long, value_enum, default_value = "all")]
        pairs: Pairs,
        #[arg(long, default_value_t = 1)]
        orientation: usize,
        #[arg(long)]
        allowed_only: bool,
    },
    /// Orientation-averaged polarization and model asymmetry.
    Simulate {
        /// Parameter file (TOML); defaults to the published best fit.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Nominal drive frequency, kHz.
        #[arg(long, default_value_t = 550.0)]
        f0: f64,
        #[arg(long)]
        rf_off: bool,
        #[arg(long, default_value_t = 15.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, value_enum, default_value = "yoshida4")]
        method: Propagator,
        /// Gaussian FWHM (μs) applied to P(t); 0 disables it.
        #[arg(long, default_value_t = 0.0)]
        smearing: f64,
    },
    /// RF-on minus RF-off, from two files or from the model.
    Diff {
        #[arg(long, requires = "off")]
        on: Option<PathBuf>,
        #[arg(long, requires = "on")]
        off: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 550.0)]
        f0: f64,
        #[arg(long, default_value_t = 15.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Joint fit of RF-on and RF-off spectra.
    Fit {
        #[arg(long)]
        on: PathBuf,
        #[arg(long)]
        off: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 550.0)]
        f0: f64,
        /// Bounds file (TOML with [lower] and [upper] tables).
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long, default_value_t = 100)]
        generations: usize,
        #[arg(long, default_value_t = 2000)]
        max_evals: usize,
        /// Fixed propagation substep, μs.
        #[arg(long, default_value_t = 0.05)]
        max_substep: f64,
        /// Split propagator used inside the objective.
        #[arg(long, value_enum, default_value = "strang")]
        method: Propagator,
        /// Evaluations spent on a preliminary RF-off search over the bond scales.
        #[arg(long, default_value_t = 0)]
        prefit: usize,
        /// Width of the data bins, μs; the model is averaged over each bin.
        #[arg(long, default_value_t = 0.0)]
        bin_width: f64,
        /// Search all nine parameters instead of solving the linear ones.
        #[arg(long)]
        full_search: bool,
    },
}

/// Process exit code for an error class.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(manifest) => {
            for o in &manifest.outputs {
                println!("{o}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

struct Context {
    config: ClusterConfig,
    digests: BTreeMap<String, String>,
    subset: ClusterSubset,
}

impl Context {
    fn new(g: &Global) -> Result<Self> {
        let mut digests = BTreeMap::new();
        let config = match &g.config {
            Some(p) => {
                digests.insert(p.display().to_string(), digest_file(p)?);
                ClusterConfig::load(p)?
            }
            None => {
                let c = ClusterConfig::liyf4();
                digests.insert("builtin:liyf4".into(), digest_bytes(c.to_toml()?.as_bytes()));
                c
            }
        };
        Ok(Self { config, digests, subset: g.subset.parse()? })
    }

    fn clusters(&self) -> Result<Vec<Cluster>> {
        self.config.clusters()?.iter().map(|c| self.subset.apply(c)).collect()
    }

    fn orientation(&self, n: usize) -> Result<Cluster> {
        let all = self.clusters()?;
        let len = all.len();
        n.checked_sub(1)
            .and_then(|i| all.into_iter().nth(i))
            .ok_or_else(|| Error::InvalidArgument(format!("orientation {n} not in 1..={len}")))
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.digests.insert(path.display().to_string(), digest_file(path)?);
        Ok(())
    }
}

fn load_params(ctx: &mut Context, path: &Option<PathBuf>) -> Result<FitParams> {
    match path {
        Some(p) => {
            ctx.input(p)?;
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Parse { path: p.display().to_string(), message: e.to_string() })
        }
        None => Ok(FitParams::published()),
    }
}

/// ω_D of the two nearest fluorines' mean distance, the natural energy unit.
fn level_unit(cluster: &Cluster) -> Result<f64> {
    let d = cluster.muon_distances();
    let mut f: Vec<f64> = cluster
        .sites()
        .iter()
        .zip(&d)
        .skip(1)
        .filter(|(s, _)| s.label.starts_with('F'))
        .map(|(_, d)| *d)
        .collect();
    f.sort_by(f64::total_cmp);
    if f.len() < 2 {
        return Err(Error::InvalidArgument("level units need at least two fluorine sites".into()));
    }
    Ok(omega_d(0.5 * (f[0] + f[1])))
}

fn write(manifest: &mut RunManifest, dir: &Path, name: &str, table: Table) -> Result<()> {
    let path = dir.join(name);
    table.meta("run_id", &manifest.run_id).write(&path)?;
    manifest.add_output(&path);
    Ok(())
}

fn model_settings(g: &Global, method: Propagator, smearing: f64) -> ModelSettings {
    let mut s = ModelSettings::default();
    s.evolve = s.evolve.with_tol(g.tol).with_method(match method {
        Propagator::Magnus4 => Method::Magnus4,
        Propagator::Strang => Method::Split(SplitOrder::Strang),
        Propagator::Yoshida4 => Method::Split(SplitOrder::Yoshida4),
        Propagator::WeakDrive => Method::Split(SplitOrder::WeakDrive),
    });
    s.smearing_fwhm = smearing;
    s
}

fn fit_model_settings(max_substep: f64, method: Propagator, bin_width: f64) -> Result<ModelSettings> {
    if !(bin_width >= 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin width {bin_width}")));
    }
    let mut s = ModelSettings::fast(max_substep);
    s.bin_width = bin_width;
    s.evolve.method = match method {
        Propagator::Strang => Method::Split(SplitOrder::Strang),
        Propagator::Yoshida4 => Method::Split(SplitOrder::Yoshida4),
        Propagator::WeakDrive => Method::Split(SplitOrder::WeakDrive),
        Propagator::Magnus4 => return Err(Error::InvalidArgument("fits use a fixed-step split propagator".into())),
    };
    Ok(s)
}

fn simulate_pair(
    params: &FitParams,
    f0: f64,
    clusters: &[Cluster],
    times: &[f64],
    settings: &ModelSettings,
) -> Result<[Spectrum; 2]> {
    let run = |rf: bool| -> Result<Spectrum> {
        let p = model_polarization(params, f0, rf, clusters, times, settings)?;
        Ok(Spectrum::noiseless(times.to_vec(), apply_asymmetry_model(params, &p)?)?.with_meta(Some(rf), Some(f0)))
    };
    Ok([run(true)?, run(false)?])
}

/// Runs a parsed command; returns the finished manifest.
pub fn execute(cli: &Cli) -> Result<RunManifest> {
    let g = &cli.global;
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("--tol must be positive, got {}", g.tol)));
    }
    std::fs::create_dir_all(&g.out_dir)?;
    let mut ctx = Context::new(g)?;
    let dir = g.out_dir.as_path();

    let (name, params, mut tables): (&str, serde_json::Value, Vec<(String, Table)>) = match &cli.command {
        Command::Levels { axis, b_min, b_max, b_steps, pairs, orientation } => {
            if *b_steps == 0 || !(b_min <= b_max) {
                return Err(Error::InvalidArgument("need b_steps ≥ 1 and b_min ≤ b_max".into()));
            }
            let cluster = ctx.orientation(*orientation)?;
            let unit = level_unit(&cluster)?;
            let fields: Vec<f64> = if *b_steps == 1 {
                vec![*b_min]
            } else {
                (0..*b_steps).map(|k| b_min + (b_max - b_min) * k as f64 / (*b_steps - 1) as f64).collect()
            };
            let sweep = levels_vs_field(&cluster, (*pairs).into(), axis.vector(), &fields)?;
            let mut t = Table::new(&["field_mT", "branch", "energy_omega_d", "energy_khz", "degeneracy"])
                .meta("kind", "energy levels")
                .meta("omega_d_rad_per_us", fmt_f64(unit));
            for (b, e) in sweep.fields.iter().zip(&sweep.tracked) {
                for (k, &ek) in e.iter().enumerate() {
                    let tol = 1e-9 * unit;
                    let deg = e.iter().filter(|x| (*x - ek).abs() <= tol).count();
                    t.push(vec![fmt_f64(*b), k.to_string(), fmt_f64(ek / unit), fmt_f64(rad_per_us_to_khz(ek)), deg.to_string()]);
                }
            }
            let p = serde_json::json!({"axis": format!("{axis:?}"), "b_min": b_min, "b_max": b_max, "b_steps": b_steps,
                "pairs": format!("{pairs:?}"), "orientation": orientation, "subset": ctx.subset.to_string()});
            ("levels", p, vec![("levels.csv".into(), t)])
        }
        Command::Transitions { axis, pairs, orientation, allowed_only } => {
            let cluster = ctx.orientation(*orientation)?;
            let unit = level_unit(&cluster)?;
            let h = dipole_hamiltonian_with(&cluster, (*pairs).into())?;
            let levels = levels_of(&h, unit, 1e-9)?;
            let mut table = transition_table(&levels, &drive_operator(&cluster, axis.vector())?, unit);
            if *allowed_only {
                table.retain(|t| t.allowed);
            }
            let t = transitions_table(&table).meta("omega_d_rad_per_us", fmt_f64(unit));
            let p = serde_json::json!({"axis": format!("{axis:?}"), "pairs": format!("{pairs:?}"),
                "orientation": orientation, "allowed_only": allowed_only, "subset": ctx.subset.to_string()});
            ("transitions", p, vec![("transitions.csv".into(), t)])
        }
        Command::Simulate { params, f0, rf_off, t_max, dt, method, smearing } => {
            let fp = load_params(&mut ctx, params)?;
            let clusters = ctx.clusters()?;
            let times = time_grid(*t_max, *dt)?;
            let settings = model_settings(g, *method, *smearing);
            let rf = !rf_off;
            let p = model_polarization(&fp, *f0, rf, &clusters, &times, &settings)?;
            let a = Spectrum::noiseless(times.clone(), apply_asymmetry_model(&fp, &p)?)?.with_meta(Some(rf), Some(*f0));
            let tag = if rf { "on" } else { "off" };
            let meta = [("rf_on", rf.to_string()), ("f0_khz", fmt_f64(*f0))];
            let pj = serde_json::json!({"params": fp, "f0_khz": f0, "rf_on": rf, "t_max": t_max, "dt": dt,
                "method": format!("{method:?}"), "smearing": smearing, "tol": g.tol, "subset": ctx.subset.to_string()});
            (
                "simulate",
                pj,
                vec![
                    (format!("polarization-{tag}.csv"), polarization_table(&p, &meta)),
                    (format!("asymmetry-{tag}.csv"), spectrum_table(&a, None)),
                ],
            )
        }
        Command::Diff { on, off, data, params, f0, t_max, dt } => {
            let (d, pj) = match (on, off) {
                (Some(on), Some(off)) => {
                    let fmt = data.spectrum_format()?;
                    ctx.input(on)?;
                    ctx.input(off)?;
                    let d = difference_spectrum(&load_spectrum(on, fmt)?, &load_spectrum(off, fmt)?)?;
                    (d, serde_json::json!({"on": on, "off": off, "format": format!("{:?}", data.format), "alpha": data.alpha, "sigma": data.sigma}))
                }
                _ => {
                    let fp = load_params(&mut ctx, params)?;
                    let clusters = ctx.clusters()?;
                    let times = time_grid(*t_max, *dt)?;
                    let settings = model_settings(g, Propagator::Yoshida4, 0.0);
                    let [a_on, a_off] = simulate_pair(&fp, *f0, &clusters, &times, &settings)?;
                    let d = difference_spectrum(&a_on, &a_off)?;
                    (d, serde_json::json!({"params": fp, "f0_khz": f0, "t_max": t_max, "dt": dt, "tol": g.tol, "subset": ctx.subset.to_string()}))
                }
            };
            ("diff", pj, vec![("difference.csv".into(), spectrum_table(&d, None).meta("kind", "difference spectrum"))])
        }
        Command::Fit {
            on,
            off,
            data,
            f0,
            bounds,
            population,
            generations,
            max_evals,
            max_substep,
            method,
            prefit,
            bin_width,
            full_search,
        } => {
            let fmt = data.spectrum_format()?;
            ctx.input(on)?;
            ctx.input(off)?;
            let b = match bounds {
                Some(p) => {
                    ctx.input(p)?;
                    let text = std::fs::read_to_string(p)?;
                    toml::from_str::<FitBounds>(&text)
                        .map_err(|e| Error::Parse { path: p.display().to_string(), message: e.to_string() })?
                }
                None => FitBounds::default(),
            };
            let fit_data = FitData::new(load_spectrum(on, fmt)?, load_spectrum(off, fmt)?, *f0)?;
            let settings = FitSettings {
                de: DeSettings {
                    population: *population,
                    max_generations: *generations,
                    max_evaluations: Some(*max_evals),
                    seed: g.seed,
                    ..DeSettings::default()
                },
                model: fit_model_settings(*max_substep, *method, *bin_width)?,
                profile_amplitudes: !full_search,
                prefit_evaluations: *prefit,
                ..FitSettings::default()
            };
            let clusters = ctx.clusters()?;
            let report = fit(&fit_data, &clusters, &b, &settings)?;
            let pj = serde_json::json!({"f0_khz": f0, "bounds": b, "population": population, "generations": generations,
                "max_evals": max_evals, "max_substep": max_substep, "method": format!("{method:?}"), "prefit": prefit, "bin_width": bin_width, "full_search": full_search,
                "format": format!("{:?}", data.format), "alpha": data.alpha, "sigma": data.sigma, "subset": ctx.subset.to_string()});
            ("fit", pj, vec![("fit-report.csv".into(), fit_report_table(&report, None)), ("fit-history.csv".into(), history_table(&report.history))])
        }
    };

    let mut manifest = RunManifest::new(name, params, Some(g.seed), ctx.digests);
    for (file, t) in tables.drain(..) {
        write(&mut manifest, dir, &file, t)?;
    }
    manifest.finish(dir)?;
    Ok(manifest)
}
