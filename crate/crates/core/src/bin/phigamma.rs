use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phigamma::cohomology::{h0_dim, h1_dims, iota_behavior};
use phigamma::lubin_tate::{LTGroup, PhiChoice};
use phigamma::triangulation::{classify, iso_partner, saturated_count, stratify};
use phigamma::verify::{self, VerifyConfig, SUITES};
use phigamma::{Character, CocyclePair, Cohomology, Field, FieldElem, LInvariant, LaurentSeries, OperatorContext, TriParam, Window};

#[derive(Parser)]
#[command(name = "phigamma", version, about = "Lubin-Tate groups, Robba-ring operators and rank-one (phi_q, Gamma)-cohomology")]
struct Cli {
    /// Field config file (for `verify`: blocks separated by `---`).
    #[arg(long, global = true)]
    config: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Default relative precision N.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Series window `lo:hi`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_window)]
    window: Option<Window>,
    /// Truncation degree D of the group law.
    #[arg(long, global = true, default_value_t = 12)]
    degree: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Print phi, the group law mod degree D+1, t_F, Q and g.
    Group {
        #[arg(long)]
        group: Option<String>,
    },
    /// Apply an operator to a series file (`deg:coeff` lines).
    Op {
        #[arg(long)]
        group: Option<String>,
        /// psi | phi | sigma:<a> | partial | res
        #[arg(long)]
        apply: String,
        #[arg(long = "in")]
        input: String,
    },
    /// Cohomology queries for a character.
    Cohom {
        #[arg(long)]
        group: Option<String>,
        #[arg(long = "char")]
        character: String,
        /// h0 | h1 | iota:<k> | check-cocycle
        #[arg(long)]
        query: String,
        /// Series files for `check-cocycle`: m then n.
        files: Vec<String>,
    },
    /// Stratum and classification of a point, or of the built-in grid.
    Classify {
        #[arg(long)]
        delta1: Option<String>,
        #[arg(long)]
        delta2: Option<String>,
        /// inf | n/a | auto | a field element
        #[arg(long = "L", default_value = "auto")]
        l: String,
        #[arg(long, conflicts_with_all = ["delta1", "delta2"])]
        grid: bool,
    },
    /// Run verification suites.
    Verify {
        #[arg(long)]
        list: bool,
        /// Suite name or `all`.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

fn parse_window(s: &str) -> Result<Window, String> {
    Window::parse(s).ok_or_else(|| format!("expected lo:hi, got `{s}`"))
}

enum Fail {
    Usage(String),
    Run(String),
}

type Out = Result<ExitCode, Fail>;

fn usage<E: std::fmt::Display>(e: E) -> Fail {
    Fail::Usage(e.to_string())
}

fn run<E: std::fmt::Display>(e: E) -> Fail {
    Fail::Run(e.to_string())
}

fn read(path: &str) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))
}

/// Group file: a field block plus optional `phi_coeffs = [...]` (ascending
/// from degree 0) selecting a non-special Frobenius series.
struct GroupSpec {
    field: Field,
    phi: Option<Vec<i64>>,
}

fn group_spec(cli: &Cli, file: Option<&String>) -> Result<GroupSpec, Fail> {
    let Some(path) = file.or(cli.config.as_ref()) else {
        let field = verify::default_fields(cli.precision.unwrap_or(12)).map_err(usage)?[0];
        return Ok(GroupSpec { field, phi: None });
    };
    let text = read(path)?;
    let mut rest = String::new();
    let mut phi = None;
    for line in text.lines() {
        match line.split_once('=') {
            Some((k, v)) if k.trim() == "phi_coeffs" => {
                let coeffs = v
                    .trim()
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|s| s.trim().parse::<i64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| usage(format!("phi_coeffs: {e}")))?;
                phi = Some(coeffs);
            }
            _ => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    let mut field = Field::from_config(&rest).map_err(usage)?;
    if let Some(n) = cli.precision {
        field = field.with_precision(n).map_err(usage)?;
    }
    Ok(GroupSpec { field, phi })
}

fn window(cli: &Cli) -> Window {
    cli.window.unwrap_or(Window::new(-40, 120))
}

fn build_group(cli: &Cli, spec: &GroupSpec) -> Result<LTGroup, Fail> {
    let w = window(cli);
    let choice = match &spec.phi {
        None => PhiChoice::Special,
        Some(c) => PhiChoice::Series(LaurentSeries::from_ints(spec.field, w, 0, c).map_err(usage)?),
    };
    LTGroup::make(spec.field, choice, cli.degree, w).map_err(run)
}

fn parse_value(field: Field, s: &str) -> Result<FieldElem, Fail> {
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Ok(field.from_int(n));
    }
    if let Some((a, b)) = s.split_once('/') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<i64>(), b.trim().parse::<i64>()) {
            if b == 0 {
                return Err(usage("zero denominator"));
            }
            return Ok(field.from_ratio(a, b));
        }
    }
    field.parse_elem(s).map_err(usage)
}

fn emit<T: Serialize>(cli: &Cli, value: &T, text: impl FnOnce() -> String) {
    match cli.format {
        // a closed pipe is not an error worth reporting
        Format::Json => {
            let _ = writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(value).expect("serializable"));
        }
        Format::Text => {
            let _ = write!(io::stdout().lock(), "{}", text());
        }
    }
}

#[derive(Serialize)]
struct GroupOut {
    field: String,
    degree: usize,
    window: String,
    phi: String,
    law: String,
    t: String,
    q: String,
    g: String,
}

fn cmd_group(cli: &Cli, file: Option<&String>) -> Out {
    let spec = group_spec(cli, file)?;
    let g = build_group(cli, &spec)?;
    let w = g.window();
    let out = GroupOut {
        field: verify::field_label(spec.field),
        degree: g.degree(),
        window: format!("{}:{}", w.lo, w.hi),
        phi: g.phi().to_string(),
        law: g.group_law().to_string(),
        t: g.logarithm().to_string(),
        q: g.q_series().to_string(),
        g: g.dmult().to_string(),
    };
    emit(cli, &out, || {
        format!(
            "field: {}\ndegree: {}\nwindow: {}\n[phi]\n{}[F]\n{}[t]\n{}[Q]\n{}[g]\n{}",
            out.field, out.degree, out.window, out.phi, out.law, out.t, out.q, out.g
        )
    });
    Ok(ExitCode::SUCCESS)
}

fn operators(cli: &Cli, file: Option<&String>) -> Result<Arc<OperatorContext>, Fail> {
    let spec = group_spec(cli, file)?;
    let g = build_group(cli, &spec)?;
    Ok(Arc::new(OperatorContext::new(Arc::new(g)).map_err(run)?))
}

/// Reads `deg:coeff` lines; coefficients may be integers, `a/b` or canonical elements.
fn read_series(ops: &OperatorContext, path: &str) -> Result<LaurentSeries, Fail> {
    let field = ops.field();
    let mut text = String::new();
    for line in read(path)?.lines() {
        match line.split_once(':') {
            Some((d, c)) => text.push_str(&format!("{}:{}\n", d.trim(), parse_value(field, c)?)),
            None => {
                text.push_str(line);
                text.push('\n');
            }
        }
    }
    LaurentSeries::parse(field, ops.window(), &text).map_err(usage)
}

#[derive(Serialize)]
struct OpOut {
    op: String,
    result: String,
}

fn cmd_op(cli: &Cli, file: Option<&String>, apply: &str, input: &str) -> Out {
    let ops = operators(cli, file)?;
    let s = read_series(&ops, input)?;
    let result = match apply.split_once(':') {
        Some(("sigma", a)) => ops.sigma_a(&s, parse_value(ops.field(), a)?).map_err(run)?.to_string(),
        Some(_) => return Err(usage(format!("unknown operator `{apply}`"))),
        None => match apply {
            "psi" => ops.psi(&s).map_err(run)?.to_string(),
            "phi" => ops.phi_q(&s).map_err(run)?.to_string(),
            "partial" => ops.partial(&s).map_err(run)?.to_string(),
            "res" => format!("{}\n", ops.residue(&s).map_err(run)?),
            other => return Err(usage(format!("unknown operator `{other}`"))),
        },
    };
    let out = OpOut { op: apply.to_string(), result };
    emit(cli, &out, || out.result.clone());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CohomOut {
    character: String,
    query: String,
    result: String,
}

fn cmd_cohom(cli: &Cli, file: Option<&String>, character: &str, query: &str, files: &[String]) -> Out {
    let delta: Character = character.parse().map_err(usage)?;
    let spec = group_spec(cli, file)?;
    let field = spec.field;
    let result = match query.split_once(':') {
        Some(("iota", k)) => {
            let k: i64 = k.parse().map_err(|_| usage(format!("bad k `{k}`")))?;
            if k < 1 {
                return Err(usage("iota needs k >= 1"));
            }
            iota_behavior(&delta, k, field).map_err(run)?.to_string()
        }
        Some(_) => return Err(usage(format!("unknown query `{query}`"))),
        None => match query {
            "h0" => match h0_dim(&delta, field) {
                (1, Some(i)) => format!("dim=1 generator=t^{i}"),
                (n, _) => format!("dim={n}"),
            },
            "h1" => {
                let h = h1_dims(&delta, field);
                let an = h.an.map_or_else(|| "n/a".to_string(), |a| a.to_string());
                format!("an={an} full={}", h.full)
            }
            "check-cocycle" => {
                let [m, n] = files else {
                    return Err(usage("check-cocycle needs two series files: m n"));
                };
                let ops = operators(cli, file)?;
                let co = Cohomology::new(ops.clone());
                let pair = CocyclePair { m: read_series(&ops, m)?, n: read_series(&ops, n)?, delta };
                let z1 = co.check_z1(&pair).map_err(run)?;
                let cob = if z1 {
                    let (norm, _) = co.normalize_cocycle(&pair).map_err(run)?;
                    co.is_coboundary(&norm).map_err(run)?.is_some().to_string()
                } else {
                    "n/a".to_string()
                };
                format!("z1={z1} coboundary={cob}")
            }
            other => return Err(usage(format!("unknown query `{other}`"))),
        },
    };
    let out = CohomOut { character: delta.to_string(), query: query.to_string(), result };
    emit(cli, &out, || format!("{}\n", out.result));
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PointOut {
    point: String,
    stratum: String,
    slope_zero: bool,
    irreducible: bool,
    analytic: bool,
    partner: String,
    saturated: usize,
}

fn point_record(s: &TriParam, field: Field) -> Result<PointOut, Fail> {
    let stratum = match stratify(s, field) {
        Ok(st) => st.to_string(),
        Err(phigamma::TriError::NonAnalytic) => "non-analytic".to_string(),
        Err(e) => return Err(usage(e)),
    };
    let c = classify(s, field).map_err(usage)?;
    let partner = match iso_partner(s, field) {
        Err(_) => "none".to_string(),
        Ok(p) if p.len() == 1 => "self".to_string(),
        Ok(p) => p[1].to_string(),
    };
    Ok(PointOut {
        point: s.to_string(),
        stratum,
        slope_zero: c.slope_zero,
        irreducible: c.irreducible,
        analytic: c.analytic_etale,
        partner,
        saturated: saturated_count(s, field),
    })
}

fn cmd_classify(cli: &Cli, d1: Option<&String>, d2: Option<&String>, l: &str, grid: bool) -> Out {
    let field = group_spec(cli, None)?.field;
    let points = if grid {
        verify::strata_grid(field)
    } else {
        let (Some(d1), Some(d2)) = (d1, d2) else {
            return Err(usage("classify needs --delta1 and --delta2, or --grid"));
        };
        let d1: Character = d1.parse().map_err(usage)?;
        let d2: Character = d2.parse().map_err(usage)?;
        let s = TriParam::at_infinity(d1, d2, field);
        let l = match l {
            "auto" => s.l,
            "inf" => LInvariant::Infinity,
            "n/a" => LInvariant::NotApplicable,
            v => LInvariant::Finite(parse_value(field, v)?),
        };
        vec![TriParam { l, ..s }]
    };
    let records = points.iter().map(|s| point_record(s, field)).collect::<Result<Vec<_>, _>>()?;
    emit(cli, &records, || {
        records
            .iter()
            .map(|r| {
                format!(
                    "{} -> stratum={} slope_zero={} irreducible={} analytic={} partner={} saturated={}\n",
                    r.point, r.stratum, r.slope_zero, r.irreducible, r.analytic, r.partner, r.saturated
                )
            })
            .collect()
    });
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SuiteRow {
    suite: &'static str,
    statement: &'static str,
}

fn cmd_verify(cli: &Cli, list: bool, suite: Option<&String>, samples: usize) -> Out {
    if list {
        let rows: Vec<SuiteRow> = SUITES.iter().map(|&(suite, statement)| SuiteRow { suite, statement }).collect();
        emit(cli, &rows, || rows.iter().map(|r| format!("{}\t{}\n", r.suite, r.statement)).collect());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(name) = suite else {
        return Err(usage("verify needs --list or --suite <name>"));
    };
    let precision = cli.precision;
    let fields = match &cli.config {
        Some(path) => verify::parse_fields(&read(path)?, precision).map_err(usage)?,
        None => verify::default_fields(precision.unwrap_or(12)).map_err(usage)?,
    };
    let cfg = VerifyConfig { fields, degree: cli.degree, window: window(cli), seed: cli.seed, samples };
    let names: Vec<&str> = if name == "all" { SUITES.iter().map(|s| s.0).collect() } else { vec![name.as_str()] };
    let mut reports = Vec::new();
    for n in names {
        let rs = verify::run_suite(n, &cfg).map_err(usage)?;
        for r in &rs {
            eprintln!("# {} [{}] wall={:.2}s", r.suite, r.field, r.wall.as_secs_f64());
        }
        reports.extend(rs);
    }
    emit(cli, &reports, || reports.iter().map(|r| format!("{r}\n")).collect());
    Ok(if reports.iter().all(|r| r.passed()) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Group { group } => cmd_group(&cli, group.as_ref()),
        Command::Op { group, apply, input } => cmd_op(&cli, group.as_ref(), apply, input),
        Command::Cohom { group, character, query, files } => cmd_cohom(&cli, group.as_ref(), character, query, files),
        Command::Classify { delta1, delta2, l, grid } => cmd_classify(&cli, delta1.as_ref(), delta2.as_ref(), l, *grid),
        Command::Verify { list, suite, samples } => cmd_verify(&cli, *list, suite.as_ref(), *samples),
    };
    match result {
        Ok(code) => code,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
