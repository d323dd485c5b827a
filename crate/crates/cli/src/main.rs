//! `spintomo` command-line tool.
//!
//! Exit codes: 0 on success, 2 for unreadable or malformed input and bad
//! arguments, 3 when well-formed input fails a physical or numerical check.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use spintomo::files::{self, State, Tomogram};
use spintomo::shots::{empirical_tomogram, sample_grid};
use spintomo::spin::{forward_point, forward_tomogram, reconstruct_with, ReconstructOptions};
use spintomo::states::fidelity;
use spintomo::top::{
    energy_table, top_forward_tomogram, top_reconstruct, EnergyConvention, TopParameters,
};
use spintomo::{build_grid, minimal_grid, EulerAngles, Exec, HalfInt, QuadratureGrid};

#[derive(Parser)]
#[command(
    name = "spintomo",
    version,
    about = "Spin tomograms: forward maps, inversion, shot simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the tomogram of a state file.
    Forward {
        #[arg(long)]
        state: PathBuf,
        /// `auto` or `NTxNPxNS`.
        #[arg(long, default_value = "auto")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert a tomogram file to a state file.
    Reconstruct {
        #[arg(long)]
        tomogram: PathBuf,
        /// Replace the raw estimate by the nearest physical state.
        #[arg(long)]
        project: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the double-rotation tomogram of a top state file.
    TopForward {
        #[arg(long)]
        state: PathBuf,
        /// `auto` or `NTxNPxNS`, used for both rotations.
        #[arg(long, default_value = "auto")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert a top tomogram file.
    TopReconstruct {
        #[arg(long)]
        tomogram: PathBuf,
        #[arg(long)]
        project: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write `w(i, θ, φ)` at ψ = 0 on a regular θ × φ lattice as CSV.
    Surface {
        #[arg(long)]
        state: PathBuf,
        /// Twice the spin projection, e.g. 1 or -1 for spin 1/2.
        #[arg(long, allow_negative_numbers = true)]
        outcome: i32,
        /// `NTxNP`: θ from 0 to π inclusive, φ from 0 to 2π inclusive.
        #[arg(long, default_value = "64x64")]
        resolution: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the symmetric-top energies `E(j, k)` for `k = -j … j`.
    Spectrum {
        #[arg(long, allow_negative_numbers = true)]
        twice_j: i32,
        #[arg(long)]
        inertia_a: f64,
        #[arg(long)]
        inertia_c: f64,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long, default_value = "paper")]
        convention: String,
    },
    /// Simulate finite-shot measurements and reconstruct from them.
    Simulate {
        #[arg(long)]
        state: PathBuf,
        /// Shots per axis.
        #[arg(long)]
        shots: u64,
        /// `auto` or `NTxNP` (θ nodes × φ points).
        #[arg(long, default_value = "auto")]
        axes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uhlmann fidelity of two state files.
    Fidelity { a: PathBuf, b: PathBuf },
}

/// Input error (exit 2).
fn input(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(spintomo::Error::Format(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spintomo::Error>() {
        Some(spintomo::Error::Validation(_)) => 3,
        _ => 2,
    }
}

fn dims(spec: &str, n: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(['x', 'X']).collect();
    if parts.len() != n {
        return Err(input(format!(
            "expected {n} sizes separated by 'x', got {spec:?}"
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| input(format!("bad size {p:?} in {spec:?}")))
        })
        .collect()
}

fn parse_grid(spec: &str, auto: impl FnOnce() -> QuadratureGrid) -> Result<QuadratureGrid> {
    if spec == "auto" {
        return Ok(auto());
    }
    let d = dims(spec, 3)?;
    if d.contains(&0) {
        return Err(input(format!("grid sizes must be positive: {spec:?}")));
    }
    Ok(QuadratureGrid::with_sizes(d[0], d[1], d[2])?)
}

fn read_spin(path: &Path) -> Result<spintomo::DensityMatrix> {
    match files::read_state(path).with_context(|| format!("reading {}", path.display()))? {
        State::Spin(rho) => Ok(rho),
        State::Top(_) => Err(input(format!(
            "{} holds a top state, expected spin",
            path.display()
        ))),
    }
}

fn read_state(path: &Path) -> Result<State> {
    files::read_state(path).with_context(|| format!("reading {}", path.display()))
}

fn read_tomogram(path: &Path) -> Result<Tomogram> {
    files::read_tomogram(path).with_context(|| format!("reading {}", path.display()))
}

fn forward(state: State, grid: &str, out: &Path) -> Result<()> {
    let tomo = match state {
        State::Spin(rho) => {
            let grid = parse_grid(grid, || build_grid(rho.twice_j()))?;
            let t = forward_tomogram(&rho, &grid)?;
            println!("points: {}", grid.len());
            println!(
                "max normalization residual: {:e}",
                t.normalization_residual()
            );
            Tomogram::Spin(t)
        }
        State::Top(rho) => {
            let grid = parse_grid(grid, || minimal_grid(rho.twice_j()))?;
            let t = top_forward_tomogram(&rho, &grid, &grid)?;
            println!("point pairs: {}", grid.len() * grid.len());
            println!(
                "max normalization residual: {:e}",
                t.normalization_residual()
            );
            Tomogram::Top(t)
        }
    };
    files::write_tomogram(out, &tomo)?;
    Ok(())
}

fn reconstruct(tomo: Tomogram, project: bool, out: &Path) -> Result<()> {
    let state = match tomo {
        Tomogram::Spin(t) => State::Spin(reconstruct_with(
            &t,
            &ReconstructOptions {
                project,
                exec: Exec::default(),
            },
        )?),
        Tomogram::Top(t) => {
            let raw = top_reconstruct(&t)?;
            State::Top(if project {
                raw.project_to_physical()
            } else {
                raw
            })
        }
    };
    let (herm, trace, low) = match &state {
        State::Spin(r) => (
            r.hermiticity_residual(),
            r.trace_residual(),
            r.min_eigenvalue(),
        ),
        State::Top(r) => (
            r.hermiticity_residual(),
            r.trace_residual(),
            r.min_eigenvalue(),
        ),
    };
    println!("hermiticity residual: {herm:e}");
    println!("trace residual: {trace:e}");
    println!("min eigenvalue: {low:e}");
    files::write_state(out, &state)?;
    Ok(())
}

fn surface(state: &Path, outcome: i32, resolution: &str, out: &Path) -> Result<()> {
    let rho = read_spin(state)?;
    let j = rho.twice_j();
    let i = HalfInt::from_twice(outcome);
    j.check_projection(i)
        .map_err(|e| input(format!("outcome {outcome} for spin {j}: {e}")))?;
    let d = dims(resolution, 2)?;
    let (nt, np) = (d[0], d[1]);
    if nt < 2 || np < 2 {
        return Err(input("resolution needs at least 2 points per axis"));
    }
    let row = j.index_of(i);
    let mut csv = String::from("theta,phi,w\n");
    for a in 0..nt {
        let theta = PI * a as f64 / (nt - 1) as f64;
        for b in 0..np {
            let phi = TAU * b as f64 / (np - 1) as f64;
            let w = forward_point(&rho, &EulerAngles::new(phi, theta, 0.0)?)[row];
            writeln!(csv, "{theta},{phi},{w}").expect("string write");
        }
    }
    fs::write(out, csv)?;
    println!("rows: {}", nt * np);
    Ok(())
}

fn spectrum(twice_j: i32, a: f64, c: f64, hbar: f64, convention: &str) -> Result<()> {
    if twice_j < 0 {
        return Err(input(format!(
            "twice_j must be non-negative, got {twice_j}"
        )));
    }
    let conv: EnergyConvention = convention.parse()?;
    let params = TopParameters::new(a, c, hbar).map_err(|e| match e {
        spintomo::Error::Validation(msg) => input(msg),
        other => other.into(),
    })?;
    println!("k,E");
    for (k, e) in energy_table(HalfInt::from_twice(twice_j), &params, conv)? {
        println!("{k},{e}");
    }
    Ok(())
}

fn simulate(state: &Path, shots: u64, axes: &str, seed: u64, out: &Path) -> Result<()> {
    if shots == 0 {
        return Err(input("shots must be at least 1"));
    }
    let rho = read_spin(state)?;
    let grid = if axes == "auto" {
        build_grid(rho.twice_j())
    } else {
        let d = dims(axes, 2)?;
        if d.contains(&0) {
            return Err(input(format!("axis counts must be positive: {axes:?}")));
        }
        QuadratureGrid::with_sizes(d[0], d[1], d[1])?
    };
    grid.require_design(rho.twice_j())?;
    let records = sample_grid(&rho, &grid, shots, seed, Exec::default())?;
    let tomo = empirical_tomogram(&records, &grid)?;
    let estimate = reconstruct_with(
        &tomo,
        &ReconstructOptions {
            project: true,
            exec: Exec::default(),
        },
    )?;
    files::write_tomogram(out, &Tomogram::Spin(tomo))?;
    println!("axes: {}", grid.n_axes());
    println!("shots per axis: {shots}");
    println!("seed: {seed}");
    println!("fidelity: {}", fidelity(&rho, &estimate)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward { state, grid, out } => forward(read_state(&state)?, &grid, &out),
        Command::TopForward { state, grid, out } => match read_state(&state)? {
            s @ State::Top(_) => forward(s, &grid, &out),
            State::Spin(_) => Err(input("top-forward needs a top state file")),
        },
        Command::Reconstruct {
            tomogram,
            project,
            out,
        } => reconstruct(read_tomogram(&tomogram)?, project, &out),
        Command::TopReconstruct {
            tomogram,
            project,
            out,
        } => match read_tomogram(&tomogram)? {
            t @ Tomogram::Top(_) => reconstruct(t, project, &out),
            Tomogram::Spin(_) => Err(input("top-reconstruct needs a top tomogram file")),
        },
        Command::Surface {
            state,
            outcome,
            resolution,
            out,
        } => surface(&state, outcome, &resolution, &out),
        Command::Spectrum {
            twice_j,
            inertia_a,
            inertia_c,
            hbar,
            convention,
        } => spectrum(twice_j, inertia_a, inertia_c, hbar, &convention),
        Command::Simulate {
            state,
            shots,
            axes,
            seed,
            out,
        } => simulate(&state, shots, &axes, seed, &out),
        Command::Fidelity { a, b } => {
            let f = match (read_state(&a)?, read_state(&b)?) {
                (State::Spin(x), State::Spin(y)) => fidelity(&x, &y)?,
                (State::Top(x), State::Top(y)) => x.fidelity(&y)?,
                _ => bail!(spintomo::Error::Format(
                    "cannot compare a spin state with a top state".into()
                )),
            };
            println!("{f}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
