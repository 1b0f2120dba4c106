//! `bsa`: command-line front end for the Bell-state analyzer design toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tfln_bsa::bellstate::{
    error_with_coupling, fidelity_closed_form, oracle_coincidence, DetectionModel, FidelityReport, InputWeights,
};
use tfln_bsa::config::{ModeGeometry, RunConfig};
use tfln_bsa::coupler::TransferCoefficients;
use tfln_bsa::fiber::{na_sweep, FiberCoupling};
use tfln_bsa::geometry::{rasterize, CrossSection, IndexMap};
use tfln_bsa::modesolver::solve_modes;
use tfln_bsa::output::{self, headers, num};
use tfln_bsa::reproduce::{summary_rows, Figure, Reproducer};
use tfln_bsa::sweep::{build_delta_n_table, cached_coupling_strength, run_sweep, Parameter, Range, SweepAxis, SweepSpec};
use tfln_bsa::{coupler::TransferModel, Error, Polarization};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "bsa", version, about = "Polarization-independent directional-coupler Bell-state analyzer design toolkit")]
struct Cli {
    /// TOML configuration file; omitted fields take their defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration field, e.g. `--set grid.dx_nm=20`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve guided modes of the configured cross-section.
    Modes,
    /// Supermode splittings and ξ of the coupled pair.
    CouplingStrength {
        /// Gaps to evaluate (nm); defaults to the device gap.
        #[arg(long = "gap", value_name = "NM")]
        gaps: Vec<f64>,
    },
    /// Per-polarization transfer of the full device.
    Transfer,
    /// Heralded-state fidelity for given splitting ratios.
    Fidelity(FidelityArgs),
    /// Fiber coupling efficiency versus numerical aperture.
    Fiber {
        /// Apertures to evaluate; defaults to the configured sweep.
        #[arg(long = "na")]
        na: Vec<f64>,
    },
    /// One- or two-axis parameter sweep.
    Sweep {
        /// `name=min:max:samples` with name one of width_nm, etch_depth_nm,
        /// gap_nm, coupling_length_um, na.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
    },
    /// Regenerate a figure's data and plot, or `all`.
    Reproduce {
        figure: String,
        /// Generate figures concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Args)]
struct FidelityArgs {
    /// Port powers `P3_TE,P4_TE,P3_TM,P4_TM` (any common scale, e.g. percent).
    #[arg(long, value_delimiter = ',', conflicts_with = "coefficients")]
    splits: Option<Vec<f64>>,
    /// Raw amplitude coefficients `t_h,r_h,t_v,r_v`.
    #[arg(long, value_delimiter = ',')]
    coefficients: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Detection::Resolving)]
    detection: Detection,
    /// Fiber coupling efficiencies `eta_TE,eta_TM` applied before the splitter.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Detection {
    Resolving,
    Bucket,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Modes => modes(&cfg, &out),
        Command::CouplingStrength { gaps } => coupling(&cfg, &out, &gaps),
        Command::Transfer => transfer(&cfg, &out),
        Command::Fidelity(args) => fidelity(&args),
        Command::Fiber { na } => fiber(&cfg, &out, &na),
        Command::Sweep { axes } => sweep(&cfg, &out, &axes),
        Command::Reproduce { figure, parallel } => reproduce(&cfg, &out, &figure, parallel),
    }
}

fn modes(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let d = &cfg.device;
    let map = match cfg.modes.geometry {
        ModeGeometry::Rib => rasterize(&CrossSection::Rib(d.pair.rib), &d.stack, &cfg.grid)?,
        ModeGeometry::Pair => rasterize(&CrossSection::Pair(d.pair), &d.stack, &cfg.grid)?,
        ModeGeometry::Cladding => IndexMap::uniform(&cfg.grid, &d.stack)?,
    };
    let modes = solve_modes(&map, d.stack.wavelength_nm, cfg.modes.count, cfg.solver.n_guess_for(d.stack.n_core), &cfg.solver)?;
    if modes.is_empty() {
        println!("no guided modes");
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:>5}  {:>10}  {:>4}  {:>13}  {:>8}", "index", "n_eff", "pol", "symmetry", "fraction");
    let mut rows = Vec::new();
    for (k, m) in modes.iter().enumerate() {
        println!(
            "{k:>5}  {:>10.6}  {:>4}  {:>13}  {:>8.4}",
            m.n_eff,
            m.polarization.label(),
            m.symmetry.label(),
            m.polarization_fraction
        );
        rows.push(vec![
            k.to_string(),
            num(m.n_eff),
            m.polarization.label().to_string(),
            m.symmetry.label().to_string(),
            num(m.polarization_fraction),
            num(m.residual),
        ]);
        if cfg.modes.write_fields {
            let mut field = Vec::with_capacity(m.ex.len());
            for j in 0..m.ny {
                for i in 0..m.nx {
                    let (x, y) = map.cell_center_nm(i, j);
                    let n = j * m.nx + i;
                    field.push(vec![num(x * 1e-3), num(y * 1e-3), num(m.ex[n]), num(m.ey[n])]);
                }
            }
            output::write_csv(&out.join(format!("mode_{k}_field.csv")), headers::FIELD, &field)?;
        }
    }
    output::write_csv(&out.join("modes.csv"), headers::MODES, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn coupling(cfg: &RunConfig, out: &Path, gaps: &[f64]) -> Result<ExitCode, Error> {
    let d = &cfg.device;
    let gaps = if gaps.is_empty() { vec![d.pair.gap_nm] } else { gaps.to_vec() };
    let mut rows = Vec::new();
    println!("{:>8}  {:>12}  {:>12}  {:>8}", "gap_nm", "delta_n_TE", "delta_n_TM", "xi");
    for g in gaps {
        let c = cached_coupling_strength(&d.pair.with_gap(g), &d.stack, &cfg.grid, &cfg.solver)?;
        println!("{:>8}  {:>12.5e}  {:>12.5e}  {:>8.4}", g, c.delta_n_te, c.delta_n_tm, c.xi);
        rows.push(
            [c.gap_nm, c.delta_n_te, c.delta_n_tm, c.xi, c.n_sym_te, c.n_anti_te, c.n_sym_tm, c.n_anti_tm]
                .map(num)
                .to_vec(),
        );
    }
    output::write_csv(&out.join("coupling_strength.csv"), headers::COUPLING, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn transfer(cfg: &RunConfig, out: &Path) -> Result<ExitCode, Error> {
    let table = build_delta_n_table(&cfg.device, &cfg.grid, &cfg.solver, &cfg.sweeps.table_gaps_nm)?;
    let model = TransferModel::new(&cfg.device, &table)?;
    let l = cfg.device.coupling_length_um;
    let t = model.transfer_at(l);
    let s = t.split();
    let report = fidelity_closed_form(&t)?;
    let mut rows = Vec::new();
    for pol in Polarization::BOTH {
        let (tt, r, p3, p4, bend, factor) = match pol {
            Polarization::Te => (t.t_h, t.r_h, s.p3_te, s.p4_te, model.bend_angle_te, t.transmission_factor_te),
            Polarization::Tm => (t.t_v, t.r_v, s.p3_tm, s.p4_tm, model.bend_angle_tm, t.transmission_factor_tm),
        };
        let total = model.total_angle(pol, l);
        println!("{pol}: t = {tt:.6}  r = {r:.6}  P3 = {p3:.4}  P4 = {p4:.4}  bend angle = {bend:.4} rad  total = {total:.4} rad");
        rows.push(vec![pol.label().to_string(), num(tt), num(r), num(p3), num(p4), num(bend), num(total), num(factor)]);
    }
    println!("zeta = {:.6}  F = {:.8}  E = {:.4e}", s.p3_te - s.p3_tm, report.fidelity, report.error);
    output::write_csv(&out.join("transfer.csv"), headers::TRANSFER, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn fidelity(args: &FidelityArgs) -> Result<ExitCode, Error> {
    for (name, v, n) in [("--splits", &args.splits, 4), ("--coefficients", &args.coefficients, 4), ("--eta", &args.eta, 2)] {
        if v.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Config(format!("{name} takes {n} comma-separated values")));
        }
    }
    let t = match (&args.splits, &args.coefficients) {
        (Some(p), _) => TransferCoefficients::from_port_powers(p[0], p[1], p[2], p[3])?,
        (None, Some(c)) => TransferCoefficients {
            t_h: c[0],
            r_h: c[1],
            t_v: c[2],
            r_v: c[3],
            transmission_factor_te: 1.0,
            transmission_factor_tm: 1.0,
        },
        (None, None) => return Err(Error::Config("give --splits or --coefficients".into())),
    };
    let report = match (args.detection, &args.eta) {
        (Detection::Resolving, Some(eta)) => error_with_coupling(&t, eta[0], eta[1])?,
        (Detection::Resolving, None) => fidelity_closed_form(&t)?,
        (Detection::Bucket, eta) => {
            let w = eta.as_ref().map_or(InputWeights::default(), |e| InputWeights::uniform(e[0].sqrt(), e[1].sqrt()));
            oracle_coincidence(&t, &w, DetectionModel::BucketCoincidence)?
        }
    };
    print_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn print_report(r: &FidelityReport) {
    println!("fidelity = {}", num(r.fidelity));
    println!("error = {}", num(r.error));
    println!("coincidence_probability = {}", num(r.coincidence_probability));
    println!("heralded_state (basis up-up, up-down, down-up, down-down):");
    let rows: Vec<Vec<String>> = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| {
            let z = r.heralded_state[i][j];
            vec![i.to_string(), j.to_string(), num(z.re), num(z.im)]
        })
        .collect();
    print!("{}", output::csv_string(headers::DENSITY, &rows).expect("density rows match header"));
}

fn fiber(cfg: &RunConfig, out: &Path, na: &[f64]) -> Result<ExitCode, Error> {
    let d = &cfg.device;
    let fc = FiberCoupling::solve(&d.pair.rib, &d.stack, &cfg.fiber.grid, &cfg.solver)?;
    let nas = if na.is_empty() { cfg.fiber.na.values() } else { na.to_vec() };
    let rows = na_sweep(&fc, &nas)?;
    println!("{:>6}  {:>8}  {:>8}", "NA", "eta_TE", "eta_TM");
    for r in &rows {
        println!("{:>6.3}  {:>8.4}  {:>8.4}", r.na, r.eta_te, r.eta_tm);
    }
    let csv: Vec<Vec<String>> = rows.iter().map(|r| vec![num(r.na), num(r.eta_te), num(r.eta_tm)]).collect();
    output::write_csv(&out.join("fiber.csv"), headers::NA, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_axis(s: &str) -> Result<SweepAxis, Error> {
    let bad = || Error::Config(format!("axis `{s}` is not of the form name=min:max:samples"));
    let (name, spec) = s.split_once('=').ok_or_else(bad)?;
    let parameter = match name.trim() {
        "width_nm" => Parameter::WidthNm,
        "etch_depth_nm" => Parameter::EtchDepthNm,
        "gap_nm" => Parameter::GapNm,
        "coupling_length_um" => Parameter::CouplingLengthUm,
        "na" => Parameter::Na,
        other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let min = parts[0].trim().parse().map_err(|_| bad())?;
    let max = parts[1].trim().parse().map_err(|_| bad())?;
    let samples = parts[2].trim().parse().map_err(|_| bad())?;
    Ok(SweepAxis { parameter, range: Range::new(min, max, samples) })
}

fn sweep(cfg: &RunConfig, out: &Path, axes: &[String]) -> Result<ExitCode, Error> {
    let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec { axes, device: cfg.device };
    let table = run_sweep(&spec, &cfg.grid, &cfg.fiber.grid, &cfg.solver, &cfg.sweeps.table_gaps_nm)?;
    let header: Vec<&str> = table.header.iter().map(String::as_str).collect();
    let csv = output::csv_string(&header, &table.rows)?;
    print!("{csv}");
    output::write_file(&out.join("sweep.csv"), &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn reproduce(cfg: &RunConfig, out: &Path, figure: &str, parallel: bool) -> Result<ExitCode, Error> {
    let figures = Figure::parse_selection(figure)?;
    let outcomes = Reproducer::new(cfg, out).run(&figures, parallel);
    let rows = summary_rows(&outcomes);
    for r in &rows {
        println!("{:<6} {:<30} {:>14} [{}, {}] {}", r[0], r[1], r[2], r[3], r[4], r[5]);
    }
    output::write_csv(&out.join("summary.csv"), headers::SUMMARY, &rows)?;
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} figure(s) failed");
        return Ok(ExitCode::from(EXIT_NUMERICAL));
    }
    Ok(ExitCode::SUCCESS)
}
