//! `landau`: run simulations, spectra, kernel tables, norms and the
//! verification suite from a TOML configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use landau::config::{parse_config, RunConfig};
use landau::geometry::DistributionField;
use landau::integrator::{LedgerRow, Simulation};
use landau::io;
use landau::kernel::{sigma_eigenvalues, KernelTables};
use landau::norms::{compensated_sum, sigma_norm_sq, weighted_l2_sq, weighted_sup};
use landau::operators::{assemble_l, CollisionOperator};
use landau::projection::{build_macro_basis, macro_fields};
use landau::verify::{self, CHECK_NAMES};
use landau::Error;

#[derive(Parser, Debug)]
#[command(name = "landau", version, about = "Linearized Landau solver with specular walls")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: runs/<config hash>].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true, value_name = "N", env = "LANDAU_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the configured run; writes ledger.csv, snapshots and summary.json.
    Simulate,
    /// Eigenvalues of the assembled collision operator on the configured grid.
    Spectrum,
    /// Run verification checks; exit status 0 iff all selected checks pass.
    Verify {
        /// Check to run (repeatable); all checks when omitted.
        #[arg(long = "check", value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(CHECK_NAMES))]
        checks: Vec<String>,
    },
    /// Per-node σ eigenvalues and the fitted spectral envelope.
    KernelTable,
    /// Weighted L², σ and sup norms of a snapshot or of the initial data.
    Norms {
        /// Snapshot CSV written by `simulate`; must match the configured mesh and grid.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
    },
}

fn load_config(global: &Global) -> landau::Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
        config.validate()?;
    }
    Ok(config)
}

/// Short stable hash of the effective configuration.
fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.to_toml().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn output_dir(global: &Global, config: &RunConfig) -> landau::Result<PathBuf> {
    let dir = global
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(config_hash(config)));
    fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> landau::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn trapezoid(rows: &[LedgerRow], f: impl Fn(&LedgerRow) -> f64) -> f64 {
    rows.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]))).sum()
}

fn simulate(config: &RunConfig, dir: &Path) -> landau::Result<()> {
    write_text(&dir.join("config.toml"), &config.to_toml())?;
    let sim = Simulation::new(config.clone())?;
    let f0 = sim.initial_data()?;
    let mut rows: Vec<LedgerRow> = Vec::new();
    let theta = config.checks.theta.clone();
    let names: Vec<String> = sim.modes.names.iter().map(|s| s.to_string()).collect();
    let result = sim.run_from(f0, |row, field| {
        rows.push(row.clone());
        if let Some(f) = field {
            io::write_snapshot(&dir.join(format!("snapshot_{:06}.csv", row.step)), f)?;
            if config.output.macro_fields {
                let m = macro_fields(f, &sim.basis)?;
                write_text(&dir.join(format!("macro_{:06}.csv", row.step)), &io::macro_fields_to_csv(&m))?;
            }
        }
        Ok(())
    });
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            // Keep what was computed before the failure.
            let partial = landau::integrator::EnergyLedger {
                theta,
                moment_names: names,
                rows,
            };
            io::write_ledger(&dir.join("ledger.csv"), &partial)?;
            return Err(e);
        }
    };
    io::write_ledger(&dir.join("ledger.csv"), &out.ledger)?;
    let r = &out.ledger.rows;
    let p = trapezoid(r, |x| x.p_sigma_sq);
    let q = trapezoid(r, |x| x.q_sigma_sq);
    let d = trapezoid(r, |x| x.dissipation);
    let mut measured = serde_json::Map::new();
    measured.insert("coercivity_c_hat".into(), json!(p / q));
    measured.insert("dissipation_delta_hat".into(), json!(d / q));
    if let Ok(g) = verify::gronwall_constants(&out.ledger, &config.checks.l_list) {
        for (k, v) in g {
            measured.insert(format!("gronwall_{k}"), json!(v));
        }
    }
    let summary = json!({
        "config": config,
        "summary": out.summary,
        "measured": measured,
    });
    io::write_json(&dir.join("summary.json"), &summary)?;
    if let Some(w) = &out.summary.dt_warning {
        eprintln!("warning: {w}");
    }
    let k = out.ledger.theta_index(0.0);
    let last = r.last().expect("ledger has the initial row");
    println!(
        "{} steps, {} cells x {} nodes; final l2 {}; wrote {}",
        out.summary.steps,
        out.summary.cells,
        out.summary.velocity_nodes,
        k.map(|k| format!("{:.6e}", last.l2[k])).unwrap_or_else(|| "n/a".into()),
        dir.display()
    );
    Ok(())
}

fn spectrum(config: &RunConfig, dir: &Path) -> landau::Result<()> {
    let grid = config.velocity_grid()?;
    let op = CollisionOperator::from_grid(&grid);
    let asm = assemble_l(&op)?;
    let ev = asm.eigenvalues();
    let basis = build_macro_basis(&grid)?;
    let residuals = basis
        .e
        .iter()
        .map(|e| {
            let le = op.apply_l(e)?;
            Ok(grid.inner(&le, &le).sqrt() / grid.inner(e, e).sqrt())
        })
        .collect::<landau::Result<Vec<f64>>>()?;
    let rows: Vec<Vec<String>> = ev.iter().enumerate().map(|(i, x)| vec![i.to_string(), io::fmt_f64(*x)]).collect();
    let mut csv = String::from("index,eigenvalue\n");
    for r in &rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    write_text(&dir.join("spectrum.csv"), &csv)?;
    let report = json!({
        "n_per_axis": grid.n_per_axis(),
        "v_max": grid.v_max(),
        "symmetry_defect": asm.symmetry_defect,
        "null_residuals": residuals,
        "smallest": &ev[..ev.len().min(8)],
        "largest": ev.last(),
    });
    io::write_json(&dir.join("spectrum.json"), &report)?;
    println!("{}", io::format_columns(&["index", "eigenvalue"], &rows[..rows.len().min(8)]).trim_end());
    println!("largest {:.6e}; symmetry defect {:.3e}", ev.last().copied().unwrap_or(f64::NAN), asm.symmetry_defect);
    Ok(())
}

fn kernel_table(config: &RunConfig, dir: &Path) -> landau::Result<()> {
    let grid = config.velocity_grid()?;
    let tables = KernelTables::build(&grid);
    let mut csv = String::from("node,v1,v2,v3,speed,lambda_parallel,lambda_perp,trace\n");
    for (idx, v) in grid.nodes().enumerate() {
        let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = &tables.sigma[idx];
        let fields = [v[0], v[1], v[2], speed, tables.lambda_parallel[idx], tables.lambda_perp[idx], s[0][0] + s[1][1] + s[2][2]];
        csv.push_str(&idx.to_string());
        for x in fields {
            csv.push(',');
            csv.push_str(&io::fmt_f64(x));
        }
        csv.push('\n');
    }
    write_text(&dir.join("kernel_table.csv"), &csv)?;
    let radius = (grid.v_max() - 2.0).max(0.0);
    let bounds = tables.spectral_bounds(radius);
    let (l1, l2) = sigma_eigenvalues(0.0);
    let report = json!({
        "n_per_axis": grid.n_per_axis(),
        "v_max": grid.v_max(),
        "fit_radius": radius,
        "bounds": bounds,
        "trace_at_origin": l1 + 2.0 * l2,
        "coarse_warning": tables.coarse_warning,
    });
    io::write_json(&dir.join("kernel_table.json"), &report)?;
    println!(
        "c1 = {:.6e}, c2 = {:.6e} over {} nodes with |v| <= {radius}; trace sigma(0) = {:.6}",
        bounds.c1,
        bounds.c2,
        bounds.nodes_used,
        l1 + 2.0 * l2
    );
    if tables.coarse_warning {
        eprintln!("warning: velocity spacing above 1 does not resolve the kernel scale");
    }
    Ok(())
}

fn norms(config: &RunConfig, dir: &Path, snapshot: Option<&Path>) -> landau::Result<()> {
    let sim = Simulation::new(config.clone())?;
    let f: DistributionField = match snapshot {
        Some(path) => {
            let rows = io::read_snapshot(path)?;
            io::field_from_snapshot(&rows, &DistributionField::zeros(sim.mesh.clone(), sim.grid.clone()))?
        }
        None => sim.initial_data()?,
    };
    let tables = sim.stepper.operator().tables();
    let vol = &sim.mesh.volumes;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for &theta in &config.checks.theta {
        let mut l2 = Vec::with_capacity(f.cells());
        let mut sig = Vec::with_capacity(f.cells());
        let mut sup: f64 = 0.0;
        for c in 0..f.cells() {
            l2.push(vol[c] * weighted_l2_sq(&sim.grid, f.cell(c), theta)?);
            sig.push(vol[c] * sigma_norm_sq(tables, f.cell(c), theta)?);
            sup = sup.max(weighted_sup(&sim.grid, f.cell(c), theta)?);
        }
        let (l2, sig) = (compensated_sum(l2).sqrt(), compensated_sum(sig).sqrt());
        rows.push(vec![format!("{theta}"), format!("{l2:.6e}"), format!("{sig:.6e}"), format!("{sup:.6e}")]);
        entries.push(json!({ "theta": theta, "l2": l2, "sigma": sig, "sup": sup }));
    }
    io::write_json(&dir.join("norms.json"), &json!({ "norms": entries }))?;
    print!("{}", io::format_columns(&["theta", "l2", "sigma", "sup"], &rows));
    Ok(())
}

fn verify_cmd(config: &RunConfig, dir: &Path, checks: &[String]) -> landau::Result<bool> {
    let names: Vec<&str> = if checks.is_empty() {
        CHECK_NAMES.to_vec()
    } else {
        checks.iter().map(String::as_str).collect()
    };
    let results = verify::run_suite(&names, config)?;
    for r in &results {
        io::write_report(&dir.join(format!("{}.json", r.name)), r)?;
    }
    write_text(&dir.join("summary.csv"), &io::summary_table(&results))?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.name.clone(), if r.passed { "pass" } else { "FAIL" }.to_string(), r.details.clone()])
        .collect();
    print!("{}", io::format_columns(&["check", "result", "details"], &rows));
    Ok(results.iter().all(|r| r.passed))
}

fn run(cli: Cli) -> landau::Result<bool> {
    if let Some(n) = cli.global.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let config = load_config(&cli.global)?;
    let dir = output_dir(&cli.global, &config)?;
    match cli.command {
        Command::Simulate => simulate(&config, &dir).map(|_| true),
        Command::Spectrum => spectrum(&config, &dir).map(|_| true),
        Command::Verify { checks } => verify_cmd(&config, &dir, &checks),
        Command::KernelTable => kernel_table(&config, &dir).map(|_| true),
        Command::Norms { snapshot } => norms(&config, &dir, snapshot.as_deref()).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
    }
}
