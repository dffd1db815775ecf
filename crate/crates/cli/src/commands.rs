use std::fmt::Write;

use num_complex::Complex64;
use serde_json::{json, Value};

use hwlab::alglat::{dyadic_approximation, is_triangular, parse_kernel_csv};
use hwlab::calkin::{
    decay_exponent, essential_spectrum, fredholm_index, parse_word, symbol_of, witness_limits, SymbolPoly,
    WitnessKind, WitnessTable,
};
use hwlab::eigen::{
    chain_numeric, chain_zero, chain_zero_residuals, eigen_residual_with, growth_bound_check, ChainPolynomial,
    CHAIN_TOL,
};
use hwlab::scan::{pseudospectrum, ScanGrid};
use hwlab::{LabError, RealPoly};

use crate::complex::{format_complex, parse_complex};
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NOINPUT: i32 = 66;
pub const EXIT_CANTCREAT: i32 = 73;

/// Text for stdout plus the exit code.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

/// Message for stderr plus the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

pub type CmdResult = Result<Outcome, Failure>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

fn lambda_arg(text: &str) -> Result<Complex64, Failure> {
    parse_complex(text).map_err(Failure::usage)
}

fn json_out(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values serialise");
    s.push('\n');
    s
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn eigencheck(lambda: &str, order: usize, grading: Option<usize>, format: Format) -> CmdResult {
    let lam = lambda_arg(lambda)?;
    if !(2..=64).contains(&order) {
        return Err(Failure::usage(format!("--order must lie in 2..=64, got {order}")));
    }
    if let Some(g) = grading {
        if !(1..=2000).contains(&g) {
            return Err(Failure::usage(format!("--grading must lie in 1..=2000, got {g}")));
        }
    }
    match eigen_residual_with(lam, grading, order) {
        Ok(check) => {
            let pass = check.passed();
            let code = if pass { EXIT_OK } else { EXIT_RESIDUAL };
            let stdout = match format {
                Format::Json => json_out(json!({
                    "lambda": format_complex(lam),
                    "verdict": check.class.name(),
                    "residual": check.residual,
                    "tolerance": check.tolerance,
                    "nodes": check.nodes,
                    "layers": check.layers,
                    "order": order,
                    "anchor": check.anchor,
                    "pass": pass,
                })),
                Format::Text => {
                    let mut s = String::new();
                    let _ = writeln!(s, "lambda     {}", format_complex(lam));
                    let _ = writeln!(s, "verdict    {}", check.class.name());
                    let _ = writeln!(s, "residual   {}", sci(check.residual));
                    let _ = writeln!(s, "tolerance  {}", sci(check.tolerance));
                    let _ = writeln!(s, "grid       {} nodes, {} layers toward {}, order {order}", check.nodes, check.layers, check.anchor);
                    let _ = writeln!(s, "status     {}", if pass { "pass" } else { "FAIL" });
                    s
                }
            };
            Ok(Outcome { stdout, code })
        }
        Err(LabError::NotAnEigenvalue(msg)) => {
            let stdout = match format {
                Format::Json => json_out(json!({
                    "lambda": format_complex(lam),
                    "verdict": "none",
                    "message": msg,
                })),
                Format::Text => format!("lambda     {}\nverdict    none\nnot an eigenvalue: {msg}\n", format_complex(lam)),
            };
            Ok(Outcome { stdout, code: EXIT_VERDICT })
        }
        Err(e) => Err(Failure { code: EXIT_DATA, message: e.to_string() }),
    }
}

fn chain_poly_text(p: &ChainPolynomial) -> String {
    let terms: Vec<String> = p.terms().iter().map(|(k, c)| format!("({c})*u^{k}")).collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

pub fn chain(lambda: &str, m: usize, format: Format) -> CmdResult {
    let lam = lambda_arg(lambda)?;
    if !(1..=12).contains(&m) {
        return Err(Failure::usage(format!("--m must lie in 1..=12, got {m}")));
    }
    if lam.im != 0.0 {
        let msg = format!("chains are built on the stick (-1,0]; {} is not real", format_complex(lam));
        return Ok(Outcome { stdout: format!("{msg}\n"), code: EXIT_VERDICT });
    }
    if lam.re == 0.0 {
        let polys = chain_zero(m);
        let residuals = chain_zero_residuals(m).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
        let pass = residuals.iter().all(|r| *r < CHAIN_TOL);
        let stdout = match format {
            Format::Json => json_out(json!({
                "lambda": 0.0,
                "m": m,
                "polynomials": polys.iter().enumerate().map(|(n, p)| json!({
                    "n": n,
                    "degree": p.degree(),
                    "valuation": p.valuation(),
                    "coefficients": p.terms().iter().map(|(k, c)| json!([k, c.to_string()])).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "link_residuals": residuals,
                "tolerance": CHAIN_TOL,
                "pass": pass,
            })),
            Format::Text => {
                let mut s = String::from("n,degree,valuation,p_n(u)\n");
                for (n, p) in polys.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{n},{},{},{}",
                        p.degree().unwrap_or(0),
                        p.valuation().unwrap_or(0),
                        chain_poly_text(p)
                    );
                }
                s.push_str("\nn,residual |Z f_{n+1} - f_n| / |f_n|\n");
                for (n, r) in residuals.iter().enumerate() {
                    let _ = writeln!(s, "{n},{}", sci(*r));
                }
                let _ = writeln!(s, "status {}", if pass { "pass" } else { "FAIL" });
                s
            }
        };
        return Ok(Outcome { stdout, code: if pass { EXIT_OK } else { EXIT_RESIDUAL } });
    }
    let family = match chain_numeric(lam.re, m) {
        Ok(f) => f,
        Err(e @ (LabError::NotInL2(_) | LabError::InvalidArgument(_))) => {
            return Ok(Outcome { stdout: format!("{e}\n"), code: EXIT_VERDICT });
        }
        Err(e) => return Err(Failure { code: EXIT_DATA, message: e.to_string() }),
    };
    let growth = growth_bound_check(&family);
    let pass = family.link_residuals.iter().all(|r| *r < CHAIN_TOL)
        && family.eigen_residual < CHAIN_TOL
        && growth.iter().all(|g| g.dominated());
    let stdout = match format {
        Format::Json => json_out(json!({
            "lambda": lam.re,
            "m": m,
            "eigen_residual": family.eigen_residual,
            "link_residuals": family.link_residuals,
            "growth": growth.iter().map(|g| json!({"n": g.n, "measured": g.measured, "bound": g.bound})).collect::<Vec<_>>(),
            "tolerance": CHAIN_TOL,
            "pass": pass,
        })),
        Format::Text => {
            let mut s = format!("lambda {}, order {m}, {} nodes\n", lam.re, family.grid.len());
            let _ = writeln!(s, "eigen residual |(Z-λ) f_0| / |f_0| = {}", sci(family.eigen_residual));
            s.push_str("n,residual |(Z-λ) f_{n+1} - f_n| / |f_n|\n");
            for (n, r) in family.link_residuals.iter().enumerate() {
                let _ = writeln!(s, "{n},{}", sci(*r));
            }
            s.push_str("\nn,measured M_n,bound\n");
            for g in &growth {
                let _ = writeln!(s, "{},{},{}", g.n, sci(g.measured), sci(g.bound));
            }
            let _ = writeln!(s, "status {}", if pass { "pass" } else { "FAIL" });
            s
        }
    };
    Ok(Outcome { stdout, code: if pass { EXIT_OK } else { EXIT_RESIDUAL } })
}

fn caret(text: &str, pos: usize) -> String {
    format!("  {text}\n  {}^", " ".repeat(pos.min(text.len())))
}

fn symbol_poly_json(p: &SymbolPoly) -> Value {
    Value::Array(p.coeffs().iter().map(|c| json!({"re": c.re.to_string(), "im": c.im.to_string()})).collect())
}

fn point_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn symbol(word: &str, index_at: &[String], samples: usize) -> CmdResult {
    let w = match parse_word(word) {
        Ok(w) => w,
        Err(LabError::Parse { pos, msg }) => {
            return Err(Failure::usage(format!("cannot parse word: {msg}\n{}", caret(word, pos))));
        }
        Err(e) => return Err(Failure::usage(e.to_string())),
    };
    if samples < 16 {
        return Err(Failure::usage(format!("--samples must be >= 16, got {samples}")));
    }
    let lambdas = index_at.iter().map(|t| lambda_arg(t)).collect::<Result<Vec<_>, _>>()?;
    let sym = symbol_of(&w);
    let ess = essential_spectrum(&sym, samples).map_err(|e| Failure::usage(e.to_string()))?;
    let index: Vec<Value> = lambdas
        .iter()
        .map(|&l| {
            let idx = match fredholm_index(&sym, l) {
                Ok(i) => json!(i),
                Err(LabError::IndexUndefined(_)) => json!("undefined: essential"),
                Err(e) => json!(format!("undefined: {e}")),
            };
            json!({"lambda": format_complex(l), "index": idx})
        })
        .collect();
    let v = json!({
        "word": word,
        "f_minus": symbol_poly_json(sym.f_minus()),
        "f_plus": symbol_poly_json(sym.f_plus()),
        "essential_spectrum": {
            "stick": ess[..samples].iter().map(|z| point_json(*z)).collect::<Vec<_>>(),
            "circle": ess[samples..].iter().map(|z| point_json(*z)).collect::<Vec<_>>(),
        },
        "index": index,
    });
    Ok(Outcome { stdout: json_out(v), code: EXIT_OK })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ScanFormat {
    Csv,
    Svg,
}

pub struct ScanArgs<'a> {
    pub word: &'a str,
    pub nx: usize,
    pub ny: usize,
    pub n: usize,
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub out: Option<&'a std::path::Path>,
    pub format: Option<ScanFormat>,
}

pub fn scan(a: &ScanArgs<'_>) -> CmdResult {
    let w = parse_word(a.word).map_err(|e| match e {
        LabError::Parse { pos, msg } => Failure::usage(format!("cannot parse word: {msg}\n{}", caret(a.word, pos))),
        e => Failure::usage(e.to_string()),
    })?;
    if !(1..=256).contains(&a.n) {
        return Err(Failure::usage(format!("--N must lie in 1..=256, got {}", a.n)));
    }
    if a.nx > 4000 || a.ny > 4000 {
        return Err(Failure::usage("--nx and --ny are limited to 4000"));
    }
    let grid = ScanGrid::new(a.re, a.im, a.nx, a.ny).map_err(|e| Failure::usage(e.to_string()))?;
    let format = a.format.unwrap_or(match a.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg")) => ScanFormat::Svg,
        _ => ScanFormat::Csv,
    });
    let result = pseudospectrum(&w, &grid, a.n).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    let body = match format {
        ScanFormat::Svg => svg::render(&result),
        ScanFormat::Csv => {
            let mut s = String::from("re,im,sigma_min\n");
            for (z, sigma) in result.rows() {
                let _ = writeln!(s, "{},{},{:e}", z.re, z.im, sigma);
            }
            s
        }
    };
    match a.out {
        Some(path) => {
            std::fs::write(path, body)
                .map_err(|e| Failure { code: EXIT_CANTCREAT, message: format!("cannot write {}: {e}", path.display()) })?;
            Ok(Outcome { stdout: String::new(), code: EXIT_OK })
        }
        None => Ok(Outcome { stdout: body, code: EXIT_OK }),
    }
}

pub fn compact_approx(kernel: &std::path::Path, levels: usize, eps: f64, format: Format) -> CmdResult {
    if !(1..=16).contains(&levels) {
        return Err(Failure::usage(format!("--levels must lie in 1..=16, got {levels}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::usage("--eps must be positive"));
    }
    let text = std::fs::read_to_string(kernel)
        .map_err(|e| Failure { code: EXIT_NOINPUT, message: format!("cannot read {}: {e}", kernel.display()) })?;
    let k = parse_kernel_csv(&text).map_err(|e| Failure { code: EXIT_DATA, message: format!("{}: {e}", kernel.display()) })?;
    let side = k.side().unwrap_or(0);
    if side % (1usize << levels) != 0 {
        return Err(Failure::usage(format!("kernel side {side} is not a multiple of 2^{levels} = {}", 1usize << levels)));
    }
    if !is_triangular(&k, 0.0).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })? {
        let msg = "kernel has nonzero entries above the diagonal (s > x): not in AlgLat(V)";
        return Ok(Outcome { stdout: format!("{msg}\n"), code: EXIT_VERDICT });
    }
    let d = dyadic_approximation(&k, levels, eps).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    let measured = d.measured_error(&k).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })?;
    let ranks: Vec<usize> = (1..=levels).map(|l| d.pieces.iter().filter(|p| p.level <= l).count()).collect();
    let stdout = match format {
        Format::Json => json_out(json!({
            "side": side,
            "levels": (1..=levels).map(|l| json!({
                "level": l,
                "bound": d.level_bounds[l - 1],
                "diagonal_norm": d.diagonal_norms[l - 1],
                "rank": ranks[l - 1],
            })).collect::<Vec<_>>(),
            "final_rank": d.rank(),
            "truncation": d.truncation,
            "measured_error": measured,
        })),
        Format::Text => {
            let mut s = String::from("level,bound,diagonal_norm,rank\n");
            for l in 1..=levels {
                let _ = writeln!(s, "{l},{},{},{}", sci(d.level_bounds[l - 1]), sci(d.diagonal_norms[l - 1]), ranks[l - 1]);
            }
            let _ = writeln!(s, "final rank      {}", d.rank());
            let _ = writeln!(s, "truncation      {}", sci(d.truncation));
            let _ = writeln!(s, "measured error  {}", sci(measured));
            s
        }
    };
    Ok(Outcome { stdout, code: EXIT_OK })
}

fn float_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Failure::usage(format!("{flag}: expected comma separated numbers, got '{text}'")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum WitnessSort {
    Spike,
    Upsilon,
}

pub struct WitnessArgs<'a> {
    pub kind: WitnessSort,
    pub s: f64,
    pub g: &'a str,
    pub schedule: &'a str,
    pub tau: &'a str,
    pub rho: f64,
    pub radii: &'a str,
    pub format: Format,
}

pub fn witness(a: &WitnessArgs<'_>) -> CmdResult {
    let (kind, schedule) = match a.kind {
        WitnessSort::Spike => {
            let g = RealPoly::new(float_list(a.g, "--g")?);
            (WitnessKind::Spike { s: a.s, g }, float_list(a.schedule, "--schedule")?)
        }
        WitnessSort::Upsilon => {
            let tau = lambda_arg(a.tau)?;
            (WitnessKind::Upsilon { tau, rho: a.rho }, float_list(a.radii, "--radii")?)
        }
    };
    let table = witness_limits(&kind, &schedule).map_err(|e| match e {
        LabError::InvalidArgument(m) | LabError::InvalidForm(m) => Failure::usage(m),
        e => Failure { code: EXIT_DATA, message: e.to_string() },
    })?;
    let stdout = match (&table, a.format) {
        (WitnessTable::Spike(rows), Format::Json) => {
            let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
            json_out(json!({
                "kind": "spike",
                "s": a.s,
                "rows": rows.iter().map(|r| json!({
                    "n": r.n, "inner": r.inner, "predicted": r.limit, "error": r.error,
                    "h_norm": r.h_norm, "h_norm_quadrature": r.h_norm_quadrature,
                })).collect::<Vec<_>>(),
                "error_exponent": if rows.len() >= 2 { json!(decay_exponent(&ns, &errs)) } else { Value::Null },
            }))
        }
        (WitnessTable::Spike(rows), Format::Text) => {
            let mut s = String::from("n,<g chi_n,chi_n>,predicted g(s),error,|H chi_n|\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{},{},{}", r.n, sci(r.inner), sci(r.limit), sci(r.error), sci(r.h_norm));
            }
            if rows.len() >= 2 {
                let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
                let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
                let _ = writeln!(s, "error ~ n^-{:.3}", decay_exponent(&ns, &errs));
            }
            s
        }
        (WitnessTable::Upsilon(rows), Format::Json) => json_out(json!({
            "kind": "upsilon",
            "tau": a.tau,
            "rho": a.rho,
            "rows": rows.iter().map(|r| json!({
                "alpha": format_complex(r.alpha), "inner": r.inner, "formula": r.formula,
                "predicted_limit": r.limit, "eigen_residual": r.eigen_residual,
            })).collect::<Vec<_>>(),
        })),
        (WitnessTable::Upsilon(rows), Format::Text) => {
            let mut s = String::from("alpha,<x^rho U,U>,formula,predicted limit,|H U - (1+alpha) U|\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    format_complex(r.alpha),
                    sci(r.inner),
                    sci(r.formula),
                    sci(r.limit),
                    sci(r.eigen_residual)
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, code: EXIT_OK })
}
