//! `hwlab`: command-line front end for the Hardy-Weyl operator laboratory.
//!
//! Exit codes: 0 success, 2 residual above tolerance, 3 negative verdict
//! (not an eigenvalue, inadmissible chain, kernel not triangular),
//! 64 usage, 65 malformed data, 66 unreadable input, 73 unwritable output.

mod commands;
mod complex;
mod svg;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Failure, Format, ScanFormat, WitnessSort, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "hwlab", version, about = "Experiments with H, V and M_x on L2[0,1]")]
#[command(after_help = "Set HW_LAB_THREADS to cap worker threads (0 = automatic).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Residual of the closed-form eigenfunction of Z = H - Mx at λ.
    Eigencheck {
        /// Spectral parameter, a+bi.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Gauss points per panel.
        #[arg(long, default_value_t = 16)]
        order: usize,
        /// Geometric grading layers toward the singular point (default: automatic).
        #[arg(long)]
        grading: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generalized eigenvector chain of order m at λ ∈ (-1, 0].
    Chain {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Symbol of an operator word, its essential spectrum and Fredholm indices (JSON).
    ///
    /// Grammar: expr := term (('+'|'-') term)*, term := factor ('*' factor)*,
    /// factor := scalar | letter | letter '^' int | '(' expr ')'.
    /// Letters Mx, H, V, I; scalars are decimals, optionally followed by i.
    Symbol {
        #[arg(long, allow_hyphen_values = true)]
        word: String,
        /// λ at which to report the index; repeat for several.
        #[arg(long = "index-at", allow_hyphen_values = true)]
        index_at: Vec<String>,
        /// Samples per essential-spectrum component.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Pseudospectrum scan: σ_min(A_N - λ) over a grid, as CSV or SVG.
    Scan {
        #[arg(long, default_value = "H - Mx", allow_hyphen_values = true)]
        word: String,
        #[arg(long, default_value_t = 121)]
        nx: usize,
        #[arg(long, default_value_t = 91)]
        ny: usize,
        /// Compression size.
        #[arg(long = "N", default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
        re_min: f64,
        #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
        re_max: f64,
        #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
        im_min: f64,
        #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
        im_max: f64,
        /// Output file; `.svg` selects SVG. Defaults to CSV on stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<ScanFormat>,
    },
    /// Dyadic finite-rank approximation of a triangular kernel.
    ///
    /// The kernel file holds N rows of N comma separated reals: row i is
    /// x = (i+1/2)/N, column j is s = (j+1/2)/N, both ascending.
    CompactApprox {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        levels: usize,
        /// Total SVD truncation budget.
        #[arg(long, default_value_t = hwlab::alglat::DYADIC_EPS)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Witness sequences: spikes χ_n at s, or Υ_α with α -> τ.
    Witness {
        #[arg(long, value_enum)]
        kind: WitnessSort,
        /// Spike centre.
        #[arg(long, default_value_t = 0.3)]
        s: f64,
        /// Spike multiplier g as ascending coefficients.
        #[arg(long, default_value = "0,0,1")]
        g: String,
        /// Spike indices n.
        #[arg(long, default_value = "8,16,32,64")]
        schedule: String,
        /// Upsilon direction τ on the unit circle, τ ≠ -1.
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        tau: String,
        /// Upsilon weight exponent ρ in x^ρ.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Upsilon radii r, α = rτ.
        #[arg(long, default_value = "0.5,0.9,0.99")]
        radii: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HW_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| Failure::usage(format!("HW_LAB_THREADS must be a count, got '{v}'")))?;
    if n > 0 {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> commands::CmdResult {
    configure_threads()?;
    match cli.command {
        Command::Eigencheck { lambda, order, grading, format } => commands::eigencheck(&lambda, order, grading, format),
        Command::Chain { lambda, m, format } => commands::chain(&lambda, m, format),
        Command::Symbol { word, index_at, samples } => commands::symbol(&word, &index_at, samples),
        Command::Scan { word, nx, ny, n, re_min, re_max, im_min, im_max, out, format } => {
            commands::scan(&commands::ScanArgs {
                word: &word,
                nx,
                ny,
                n,
                re: (re_min, re_max),
                im: (im_min, im_max),
                out: out.as_deref(),
                format,
            })
        }
        Command::CompactApprox { kernel, levels, eps, format } => commands::compact_approx(&kernel, levels, eps, format),
        Command::Witness { kind, s, g, schedule, tau, rho, radii, format } => commands::witness(&commands::WitnessArgs {
            kind,
            s,
            g: &g,
            schedule: &schedule,
            tau: &tau,
            rho,
            radii: &radii,
            format,
        }),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            out.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == EXIT_USAGE {
                eprintln!("run `hwlab --help` for usage");
            }
            f.code
        }
    };
    std::process::exit(code);
}
