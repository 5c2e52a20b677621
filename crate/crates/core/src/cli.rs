//! Command-line pipelines.
//!
//! Every subcommand resolves a [`RunConfig`] (preset defaults, then an
//! optional `--config` file, then explicit flags), echoes it to
//! `<out>/run.json`, and writes its artifacts next to it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{compare_series, dft_spectrum, fit_decay, Comparison, SpectrumGrid};
use crate::encoding::{scheme_resources, EncodingKind, EncodingScheme, SchemeResources};
use crate::error::invalid;
use crate::gm::{build_encoded_hamiltonian, TermList};
use crate::model::{
    build_full_hamiltonian, diagonalize, exact_populations, label_eigenstates, transition_sticks,
    BasisState, EigenSystem, EigenstateLabel, MatrixElementConvention, VibrationalModel,
};
use crate::trotter::{
    evolve, optimize_ordering, predicted_decay_time, DecayTime, Engine, EvolutionResult, NoiseSpec,
};
use crate::units::FS_PER_PS;
use crate::{Error, Result};

/// Measured H₂O fundamentals and overtone (cm⁻¹) for the four lowest excited
/// states, keyed by dominant configuration.
pub const H2O_EXPERIMENTAL: [(&str, f64); 4] = [
    ("010", 1594.75),
    ("020", 3151.63),
    ("001", 3755.93),
    ("100", 3657.05),
];

/// Eigenstates above this energy are left out of the level table.
pub const TABLE_ENERGY_MAX: f64 = 13000.0;

/// ψ² threshold for listing a configuration in the level table.
pub const LABEL_THRESHOLD: f64 = 0.2;

/// Weight floor for stick spectra.
pub const STICK_FLOOR: f64 = 0.01;

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for exceeded dimension caps.
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "vibqudit",
    version,
    about = "Qubit and qudit simulation of molecular vibrations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the encoded Hamiltonian and dump its terms and order histogram.
    Terms(RunArgs),
    /// Order the terms and run the noisy Trotter evolution.
    Evolve(RunArgs),
    /// Evolve, then Fourier-transform the first tracked population.
    Spectrum(RunArgs),
    /// Diagonalize the model and list the vibrational levels.
    Table(RunArgs),
    /// Sites, site dimension, term and gate counts for every encoding.
    Resources(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Preset name (co2, h2o) or path to a model JSON file.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub vmax: Option<usize>,
    /// binary, direct or qudit.
    #[arg(long)]
    pub encoding: Option<EncodingKind>,
    /// exact_element or projected_power.
    #[arg(long)]
    pub convention: Option<MatrixElementConvention>,
    /// Time step in ps; a trailing `fs` switches to femtoseconds.
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eps2q: Option<f64>,
    /// Initial basis state, e.g. `1,0`.
    #[arg(long)]
    pub initial: Option<String>,
    /// Tracked basis state; repeat the flag or separate states with `;`.
    #[arg(long)]
    pub track: Vec<String>,
    /// Spectrum grid `min:max:points` in cm⁻¹.
    #[arg(long)]
    pub grid: Option<String>,
    /// density_matrix or state_vector_fidelity.
    #[arg(long)]
    pub engine: Option<Engine>,
    /// Also write the exact and noiseless traces.
    #[arg(long)]
    pub with_reference: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Start from a previously written run.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run parameters, echoed as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub vmax: usize,
    pub encoding: EncodingKind,
    pub convention: MatrixElementConvention,
    pub dt_ps: f64,
    pub n_steps: usize,
    pub eps2q: f64,
    pub initial_state: BasisState,
    pub tracked_states: Vec<BasisState>,
    pub spectrum_grid: SpectrumGrid,
    pub engine: Engine,
    pub with_reference: bool,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for a preset or model file.
    pub fn defaults(model: &str, n_modes: usize) -> Self {
        let mut initial = vec![0; n_modes];
        let (dt_ps, n_steps, eps2q, grid) = match model {
            "co2" => (
                0.01,
                100,
                1e-3,
                SpectrumGrid {
                    nu_min: 0.0,
                    nu_max: 200.0,
                    n_points: 2001,
                },
            ),
            "h2o" => (
                0.53 / FS_PER_PS,
                76,
                1e-3,
                SpectrumGrid {
                    nu_min: 5150.0,
                    nu_max: 5250.0,
                    n_points: 1001,
                },
            ),
            _ => (
                0.01,
                100,
                0.0,
                SpectrumGrid {
                    nu_min: 0.0,
                    nu_max: 4000.0,
                    n_points: 4001,
                },
            ),
        };
        match model {
            "h2o" => initial[0] = 2,
            _ => initial[0] = 1,
        }
        let initial_state = BasisState::new(initial);
        Self {
            model: model.to_string(),
            vmax: 3,
            encoding: EncodingKind::Qudit,
            convention: MatrixElementConvention::default(),
            dt_ps,
            n_steps,
            eps2q,
            tracked_states: vec![initial_state.clone()],
            initial_state,
            spectrum_grid: grid,
            engine: Engine::default(),
            with_reference: false,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if !(self.dt_ps > 0.0 && self.dt_ps.is_finite()) {
            return invalid(format!("dt must be positive, got {} ps", self.dt_ps));
        }
        if self.n_steps == 0 {
            return invalid("steps must be at least 1 (zero-length trace)");
        }
        NoiseSpec::new(self.eps2q)?;
        self.spectrum_grid.validate()?;
        EncodingScheme::new(self.encoding, n_modes, self.vmax)?;
        self.initial_state.validate(n_modes, self.vmax)?;
        if self.tracked_states.is_empty() {
            return invalid("at least one tracked state is required");
        }
        for s in &self.tracked_states {
            s.validate(n_modes, self.vmax)?;
        }
        Ok(())
    }
}

pub fn load_model(spec: &str) -> Result<VibrationalModel> {
    match VibrationalModel::preset(spec) {
        Some(m) => Ok(m),
        None => VibrationalModel::load(spec),
    }
}

/// Time step in ps from `0.01`, `0.01ps` or `0.53fs`.
pub fn parse_dt(s: &str) -> Result<f64> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("fs") {
        (v, 1.0 / FS_PER_PS)
    } else if let Some(v) = t.strip_suffix("ps") {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    match num.trim().parse::<f64>() {
        Ok(v) => Ok(v * scale),
        Err(_) => invalid(format!("cannot parse time step {s:?}")),
    }
}

/// Grid from `min:max:points`.
pub fn parse_grid(s: &str) -> Result<SpectrumGrid> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return invalid(format!("grid must look like min:max:points, got {s:?}"));
    }
    let bad = || Error::InvalidArgument(format!("cannot parse grid {s:?}"));
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    SpectrumGrid::new(lo, hi, n)
}

/// Resolve defaults, config file and flags, in that order of precedence.
pub fn resolve_config(args: &RunArgs) -> Result<(RunConfig, VibrationalModel)> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Some(serde_json::from_str::<RunConfig>(&text)?)
        }
        None => None,
    };
    let model_name = args
        .model
        .clone()
        .or_else(|| base.as_ref().map(|c| c.model.clone()))
        .ok_or_else(|| Error::InvalidArgument("--model is required".into()))?;
    let model = load_model(&model_name)?;
    let model_changed = base.as_ref().is_none_or(|c| c.model != model_name);
    let mut cfg = match base {
        Some(c) if !model_changed => c,
        _ => RunConfig::defaults(&model_name, model.n_modes()),
    };

    if let Some(v) = args.vmax {
        cfg.vmax = v;
    }
    if let Some(e) = args.encoding {
        cfg.encoding = e;
    }
    if let Some(c) = args.convention {
        cfg.convention = c;
    }
    if let Some(dt) = &args.dt {
        cfg.dt_ps = parse_dt(dt)?;
    }
    if let Some(n) = args.steps {
        cfg.n_steps = n;
    }
    if let Some(e) = args.eps2q {
        cfg.eps2q = e;
    }
    if let Some(s) = &args.initial {
        let v: BasisState = s.parse()?;
        if args.track.is_empty() && cfg.tracked_states == vec![cfg.initial_state.clone()] {
            cfg.tracked_states = vec![v.clone()];
        }
        cfg.initial_state = v;
    }
    if !args.track.is_empty() {
        cfg.tracked_states = args
            .track
            .iter()
            .flat_map(|t| t.split(';'))
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
    }
    if let Some(g) = &args.grid {
        cfg.spectrum_grid = parse_grid(g)?;
    }
    if let Some(e) = args.engine {
        cfg.engine = e;
    }
    if args.with_reference {
        cfg.with_reference = true;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate(model.n_modes())?;
    Ok((cfg, model))
}

fn create<P: AsRef<Path>>(dir: &Path, name: P) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir, "run.json", cfg)?;
    Ok(cfg.output_dir.clone())
}

fn scheme_for(cfg: &RunConfig, model: &VibrationalModel) -> Result<EncodingScheme> {
    EncodingScheme::new(cfg.encoding, model.n_modes(), cfg.vmax)
}

#[derive(Debug, Clone, Serialize)]
struct TermsSummary {
    encoding: EncodingKind,
    n_sites: usize,
    d: usize,
    n_hq: usize,
    histogram: BTreeMap<usize, usize>,
    n2q: usize,
}

fn terms_summary(tl: &TermList) -> TermsSummary {
    TermsSummary {
        encoding: tl.scheme.kind,
        n_sites: tl.scheme.n_sites(),
        d: tl.scheme.site_dim(),
        n_hq: tl.n_hq(),
        histogram: tl.order_histogram(),
        n2q: tl.two_site_gate_count(),
    }
}

fn cmd_terms(cfg: &RunConfig, model: &VibrationalModel, out: &mut dyn Write) -> Result<()> {
    let scheme = scheme_for(cfg, model)?;
    let tl = build_encoded_hamiltonian(model, &scheme, cfg.convention)?;
    let dir = prepare_output(cfg)?;
    write_json(&dir, "terms.json", &tl.to_dump())?;
    let mut csv = create(&dir, "terms.csv")?;
    tl.write_csv(&mut csv)?;
    csv.flush()?;
    let summary = terms_summary(&tl);
    write_json(&dir, "histogram.json", &summary)?;
    writeln!(out, "{scheme}")?;
    writeln!(out, "N_Hq = {}", summary.n_hq)?;
    for (order, count) in &summary.histogram {
        writeln!(out, "  order {order}: {count}")?;
    }
    writeln!(out, "N_2q = {}", summary.n2q)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ResourceRow {
    #[serde(flatten)]
    resources: SchemeResources,
    n_hq: usize,
    n2q: usize,
}

fn cmd_resources(cfg: &RunConfig, model: &VibrationalModel, out: &mut dyn Write) -> Result<()> {
    let dir = prepare_output(cfg)?;
    let mut rows = Vec::new();
    writeln!(out, "encoding  sites  d   fraction      N_Hq  N_2q")?;
    for kind in EncodingKind::ALL {
        let scheme = EncodingScheme::new(kind, model.n_modes(), cfg.vmax)?;
        let tl = build_encoded_hamiltonian(model, &scheme, cfg.convention)?;
        let row = ResourceRow {
            resources: scheme_resources(&scheme),
            n_hq: tl.n_hq(),
            n2q: tl.two_site_gate_count(),
        };
        writeln!(
            out,
            "{:<8}  {:>5}  {:<2}  {:<12.6e}  {:>4}  {:>4}",
            kind.name(),
            row.resources.n_sites,
            row.resources.d,
            row.resources.encoded_fraction,
            row.n_hq,
            row.n2q
        )?;
        rows.push(row);
    }
    write_json(&dir, "resources.json", &rows)?;
    Ok(())
}

/// Artifacts of one evolve pipeline run.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub terms: TermList,
    pub noisy: EvolutionResult,
    pub noiseless: Option<EvolutionResult>,
    pub exact: Option<Vec<Vec<f64>>>,
    pub eigen: Option<EigenSystem>,
}

#[derive(Debug, Clone, Serialize)]
struct EvolveReport {
    n2q: usize,
    predicted_decay: DecayTime,
    st_error: f64,
    final_fidelity: f64,
    comparisons: Vec<TraceReport>,
}

#[derive(Debug, Clone, Serialize)]
struct TraceReport {
    state: BasisState,
    noiseless_vs_exact: Comparison,
    fitted_decay_ps: Option<f64>,
}

/// Build, order and evolve per `cfg`; with `with_reference` also the
/// noiseless run and the exact populations on the same time grid.
pub fn run_evolve(cfg: &RunConfig, model: &VibrationalModel) -> Result<EvolveOutcome> {
    let scheme = scheme_for(cfg, model)?;
    let terms = build_encoded_hamiltonian(model, &scheme, cfg.convention)?;
    let ordered = optimize_ordering(&terms, cfg.dt_ps)?;
    let noise = NoiseSpec::new(cfg.eps2q)?;
    let run = |n| {
        evolve(
            &ordered,
            &cfg.initial_state,
            cfg.dt_ps,
            cfg.n_steps,
            n,
            &cfg.tracked_states,
            cfg.engine,
        )
    };
    let noisy = run(noise)?;
    let (noiseless, exact, eigen) = if cfg.with_reference {
        let clean = run(NoiseSpec::noiseless())?;
        let eig = diagonalize(&build_full_hamiltonian(model, cfg.vmax, cfg.convention)?)?;
        let exact = cfg
            .tracked_states
            .iter()
            .map(|v| exact_populations(&eig, &cfg.initial_state, v, &noisy.times))
            .collect::<Result<Vec<_>>>()?;
        (Some(clean), Some(exact), Some(eig))
    } else {
        (None, None, None)
    };
    let dir = prepare_output(cfg)?;
    write_json(&dir, "ordering.json", &ordered.to_dump())?;
    Ok(EvolveOutcome {
        terms,
        noisy,
        noiseless,
        exact,
        eigen,
    })
}

fn write_exact_csv(
    dir: &Path,
    name: &str,
    times: &[f64],
    states: &[BasisState],
    exact: &[Vec<f64>],
) -> Result<()> {
    let mut w = create(dir, name)?;
    let header: Vec<String> = std::iter::once("t_ps".to_string())
        .chain(states.iter().map(|s| format!("p_{}", s.label())))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (j, t) in times.iter().enumerate() {
        let row: Vec<String> = std::iter::once(format!("{t:.16e}"))
            .chain(exact.iter().map(|p| format!("{:.16e}", p[j])))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn write_evolve_artifacts(cfg: &RunConfig, o: &EvolveOutcome, out: &mut dyn Write) -> Result<()> {
    let dir = &cfg.output_dir;
    let mut w = create(dir, "populations.csv")?;
    o.noisy.write_csv(&mut w)?;
    w.flush()?;

    let dim = o.terms.full_dim()?;
    let mut comparisons = Vec::new();
    if let (Some(clean), Some(exact)) = (&o.noiseless, &o.exact) {
        let mut w = create(dir, "populations_noiseless.csv")?;
        clean.write_csv(&mut w)?;
        w.flush()?;
        write_exact_csv(
            dir,
            "reference_exact.csv",
            &o.noisy.times,
            &cfg.tracked_states,
            exact,
        )?;
        for ((state, ex), (p_clean, p_noisy)) in cfg
            .tracked_states
            .iter()
            .zip(exact)
            .zip(clean.populations.iter().zip(&o.noisy.populations))
        {
            let fitted = if cfg.eps2q > 0.0 && o.noisy.times.len() >= 10 {
                fit_decay(&o.noisy.times, &p_noisy.values, &p_clean.values, Some(dim)).ok()
            } else {
                None
            };
            comparisons.push(TraceReport {
                state: state.clone(),
                noiseless_vs_exact: compare_series(&p_clean.values, ex)?,
                fitted_decay_ps: fitted,
            });
        }
    }
    let report = EvolveReport {
        n2q: o.terms.two_site_gate_count(),
        predicted_decay: predicted_decay_time(&o.terms, cfg.dt_ps, cfg.eps2q)?,
        st_error: o.noisy.meta.st_error,
        final_fidelity: *o.noisy.fidelity.last().unwrap_or(&1.0),
        comparisons,
    };
    write_json(dir, "evolution.json", &report)?;

    writeln!(
        out,
        "{} steps of {} ps, eps2q = {}",
        cfg.n_steps, cfg.dt_ps, cfg.eps2q
    )?;
    writeln!(out, "epsilon_ST = {:.6e}", report.st_error)?;
    match report.predicted_decay {
        DecayTime::Finite(t) => writeln!(out, "predicted decay time = {t:.6e} ps")?,
        DecayTime::Infinite => writeln!(out, "predicted decay time = infinite")?,
    }
    for c in &report.comparisons {
        writeln!(
            out,
            "p_{}: max |noiseless - exact| = {:.4e}",
            c.state.label(),
            c.noiseless_vs_exact.max_abs_dev
        )?;
    }
    Ok(())
}

fn cmd_evolve(cfg: &RunConfig, model: &VibrationalModel, out: &mut dyn Write) -> Result<()> {
    let o = run_evolve(cfg, model)?;
    write_evolve_artifacts(cfg, &o, out)
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumReport {
    state: BasisState,
    peak_cm1: Option<f64>,
    raw_max: f64,
    display_scale: f64,
    local_maxima: Vec<(f64, f64)>,
}

fn cmd_spectrum(cfg: &RunConfig, model: &VibrationalModel, out: &mut dyn Write) -> Result<()> {
    let o = run_evolve(cfg, model)?;
    write_evolve_artifacts(cfg, &o, out)?;
    let dir = &cfg.output_dir;
    let grid = &cfg.spectrum_grid;
    let trace = &o.noisy.populations[0];
    let eig = match &o.eigen {
        Some(e) => e.clone(),
        None => diagonalize(&build_full_hamiltonian(model, cfg.vmax, cfg.convention)?)?,
    };
    let sticks = transition_sticks(&eig, &cfg.initial_state, &trace.state, STICK_FLOOR)?;
    let spectrum = dft_spectrum(&o.noisy.times, &trace.values, grid, true)?.with_sticks(sticks);
    let mut w = create(dir, "spectrum.csv")?;
    spectrum.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(dir, "sticks.csv")?;
    spectrum.write_sticks_csv(&mut w)?;
    w.flush()?;
    if let Some(exact) = &o.exact {
        let s = dft_spectrum(&o.noisy.times, &exact[0], grid, true)?;
        let mut w = create(dir, "spectrum_exact.csv")?;
        s.write_csv(&mut w)?;
        w.flush()?;
    }
    let report = SpectrumReport {
        state: trace.state.clone(),
        peak_cm1: spectrum.peak().map(|p| p.0),
        raw_max: spectrum.raw_max,
        display_scale: spectrum.display_scale,
        local_maxima: spectrum.local_maxima(grid.nu_min, grid.nu_max),
    };
    write_json(dir, "spectrum.json", &report)?;
    match report.peak_cm1 {
        Some(p) => writeln!(out, "spectrum peak = {p:.4} cm-1")?,
        None => writeln!(out, "spectrum is flat")?,
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    #[serde(flatten)]
    pub label: EigenstateLabel,
    pub fermi_doublet: bool,
}

/// Two leading configurations with comparable weight mark a resonance pair.
fn is_mixed(label: &EigenstateLabel) -> bool {
    label.configurations.len() >= 2
        && label.configurations[0].1 <= 0.7
        && label.configurations[1].1 >= 0.3
}

/// Level table up to [`TABLE_ENERGY_MAX`].
pub fn level_table(
    model: &VibrationalModel,
    vmax: usize,
    convention: MatrixElementConvention,
) -> Result<Vec<TableRow>> {
    let eig = diagonalize(&build_full_hamiltonian(model, vmax, convention)?)?;
    Ok(label_eigenstates(&eig, model, LABEL_THRESHOLD)?
        .into_iter()
        .filter(|l| l.energy_cm1 <= TABLE_ENERGY_MAX)
        .map(|label| TableRow {
            fermi_doublet: is_mixed(&label),
            label,
        })
        .collect())
}

fn cmd_table(cfg: &RunConfig, model: &VibrationalModel, out: &mut dyn Write) -> Result<()> {
    let dir = prepare_output(cfg)?;
    let rows = level_table(model, cfg.vmax, cfg.convention)?;
    let mut w = create(&dir, "table.csv")?;
    writeln!(w, "index,energy_cm1,symmetry,configurations,fermi_doublet")?;
    for r in &rows {
        let sym = r.label.symmetry.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{:.16e},{},\"{}\",{}",
            r.label.index,
            r.label.energy_cm1,
            sym,
            r.label.configuration_string(),
            r.fermi_doublet
        )?;
        writeln!(
            out,
            "{:>3} {:<3} {:>10.2}  {}{}",
            r.label.index,
            r.label.symmetry.map(|s| s.to_string()).unwrap_or_default(),
            r.label.energy_cm1,
            r.label.configuration_string(),
            if r.fermi_doublet {
                "  [Fermi doublet]"
            } else {
                ""
            }
        )?;
    }
    w.flush()?;
    write_json(&dir, "table.json", &rows)?;

    if rows.len() > 1 {
        let e0 = rows[0].label.energy_cm1;
        let mut w = create(&dir, "excitations.csv")?;
        writeln!(w, "index,dominant,delta_e_cm1,experiment_cm1")?;
        writeln!(out, "excitation energies:")?;
        for r in rows.iter().skip(1).take(4) {
            let dominant = r
                .label
                .configurations
                .first()
                .map(|c| c.0.label())
                .unwrap_or_default();
            let de = r.label.energy_cm1 - e0;
            let exp = (cfg.model == "h2o")
                .then(|| {
                    H2O_EXPERIMENTAL
                        .iter()
                        .find(|(k, _)| *k == dominant)
                        .map(|e| e.1)
                })
                .flatten();
            let exp_str = exp.map(|e| format!("{e:.2}")).unwrap_or_default();
            writeln!(w, "{},{},{:.16e},{}", r.label.index, dominant, de, exp_str)?;
            writeln!(
                out,
                "  {}({}) {:>10.2}  {}",
                r.label.index, dominant, de, exp_str
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Run a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let (cmd, args) = match &cli.command {
        Command::Terms(a) => ("terms", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Table(a) => ("table", a),
        Command::Resources(a) => ("resources", a),
    };
    let (cfg, model) = resolve_config(args)?;
    match cmd {
        "terms" => cmd_terms(&cfg, &model, out),
        "evolve" => cmd_evolve(&cfg, &model, out),
        "spectrum" => cmd_spectrum(&cfg, &model, out),
        "table" => cmd_table(&cfg, &model, out),
        _ => cmd_resources(&cfg, &model, out),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResourceLimit { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
