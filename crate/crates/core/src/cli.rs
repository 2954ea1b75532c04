//! The `lvalue-lab` batch front end.
//!
//! Parameters come from an optional `key=value` config file, overridden by flags. Every
//! JSON document echoes the resolved [`RunConfig`]. Exit codes: 0 success, 1 failed
//! verification or I/O, 2 usage or domain error, 3 numeric non-convergence.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::forms::{self, CatalogForm, NewformRecord};
use crate::stats::{self, Sample, SymmetryGroup};
use crate::trace::{self, FamilySpec, LevelFilter, Truncation};
use crate::{bessel, kloosterman, lfun, verify, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy)]
enum Kind {
    Int,
    Real,
    Text,
    Flag,
}

struct Param {
    name: &'static str,
    kind: Kind,
    /// `None`: required. `Some("")`: optional without default.
    default: Option<&'static str>,
    help: &'static str,
}

const fn p(name: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Param {
    Param {
        name,
        kind,
        default,
        help,
    }
}

struct CommandSpec {
    name: &'static str,
    about: &'static str,
    format: Format,
    params: &'static [Param],
}

use Kind::*;

const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "kloosterman",
        about: "Kloosterman sums S(m, n; c), one value per line",
        format: Format::Csv,
        params: &[
            p("m", Int, None, "first index"),
            p("n", Int, None, "second index"),
            p("c", Text, None, "modulus, list a,b,c or range a..b"),
            p("method", Text, Some("fast"), "fast or direct"),
        ],
    },
    CommandSpec {
        name: "bessel",
        about: "Bessel function J_order(x)",
        format: Format::Json,
        params: &[
            p("order", Int, None, "integer order"),
            p("x", Real, None, "argument"),
        ],
    },
    CommandSpec {
        name: "delta",
        about: "Petersson average Δ_q(m, n) or newform average Δ*_q(m, n)",
        format: Format::Json,
        params: &[
            p("m", Int, None, "first index"),
            p("n", Int, None, "second index"),
            p("q", Int, None, "level"),
            p("k", Int, None, "even weight"),
            p("space", Text, Some("full"), "full or new"),
            p("c-max", Int, Some(""), "truncate at c_max instead of meeting --tail"),
        ],
    },
    CommandSpec {
        name: "family-count",
        about: "Smoothed family count N(Q)",
        format: Format::Json,
        params: &[
            p("Q", Real, None, "family scale"),
            p("k", Int, None, "even weight"),
            p("levels", Text, Some("all"), "all, squarefree, prime or a list a,b,c"),
            p("c-max", Int, Some(""), "truncate at c_max instead of meeting --tail"),
        ],
    },
    CommandSpec {
        name: "qexp",
        about: "q-expansion of a catalog form: n, c(n), a(n)",
        format: Format::Csv,
        params: &[
            p("form", Text, None, "delta, f11 or f5"),
            p("n", Int, None, "number of coefficients"),
        ],
    },
    CommandSpec {
        name: "lvalue",
        about: "L(s, f); the central value when --s is absent",
        format: Format::Json,
        params: &[
            p("form", Text, None, "delta, f11 or f5"),
            p("s", Text, Some(""), "point re,im"),
        ],
    },
    CommandSpec {
        name: "zeros",
        about: "Zeros of L(s, f) on the critical line up to height T",
        format: Format::Csv,
        params: &[
            p("form", Text, None, "delta, f11 or f5"),
            p("T", Real, Some("30"), "scan height"),
        ],
    },
    CommandSpec {
        name: "pfx",
        about: "Prime sum P(f, x) = Σ_{p<x} a_f(p)/√p",
        format: Format::Json,
        params: &[
            p("form", Text, None, "delta, f11 or f5"),
            p("x", Real, None, "prime cutoff"),
        ],
    },
    CommandSpec {
        name: "density",
        about: "One-level density against the Fejér kernel",
        format: Format::Json,
        params: &[
            p("form", Text, None, "delta, f11 or f5"),
            p("T", Real, Some("30"), "scan height"),
            p("scale", Real, Some("4"), "Fourier support of the kernel"),
            p("terms", Int, Some("1000000"), "coefficients loaded for the prime sums"),
        ],
    },
    CommandSpec {
        name: "moments",
        about: "Harmonic moment of P(f, x) over a family",
        format: Format::Json,
        params: &[
            p("Q", Real, None, "family scale"),
            p("k", Int, None, "even weight"),
            p("l", Int, None, "moment order 1..4"),
            p("x", Real, None, "prime cutoff"),
            p("levels", Text, Some("all"), "all, squarefree, prime or a list a,b,c"),
            p("c-max", Int, Some(""), "truncate at c_max instead of meeting --tail"),
        ],
    },
    CommandSpec {
        name: "distribution",
        about: "Weighted empirical distribution against N(0, 1)",
        format: Format::Json,
        params: &[
            p("input", Text, None, "CSV with header value,weight,vanishing"),
            p("alpha", Real, Some("-inf"), "lower end"),
            p("beta", Real, Some("inf"), "upper end"),
        ],
    },
    CommandSpec {
        name: "verify",
        about: "Run the acceptance suite",
        format: Format::Csv,
        params: &[
            p("quick", Flag, Some("false"), "only the fast criteria"),
            p("only", Text, Some(""), "comma-separated criterion numbers"),
            p("vanishing-c-max", Int, Some("200000"), "c_max of the weight-2 vanishing check"),
            p("moment-c-max", Int, Some("1000000"), "c_max of the moment-pipeline oracle"),
        ],
    },
];

const GLOBAL_KEYS: [&str; 4] = ["format", "cache", "threads", "tail"];

/// The fully resolved invocation, echoed in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub format: Format,
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
    pub tail: f64,
}

/// A failure carrying an exit code and a machine-readable code.
#[derive(Debug)]
struct Failure {
    exit: i32,
    code: &'static str,
    message: String,
    extra: Option<Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_USAGE,
            code: "usage",
            message: message.into(),
            extra: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = if e.is_numeric() {
            EXIT_NUMERIC
        } else if matches!(e, Error::Io(_)) {
            EXIT_FAILURE
        } else {
            EXIT_USAGE
        };
        let extra = match &e {
            Error::Unreachable { target, achieved, .. } => Some(json!({"target": target, "achieved": achieved})),
            Error::NonConvergence { achieved, .. } => Some(json!({"achieved": achieved})),
            _ => None,
        };
        Self {
            exit,
            code: e.code(),
            message: e.to_string(),
            extra,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn command_spec(name: &str) -> &'static CommandSpec {
    COMMANDS.iter().find(|c| c.name == name).expect("subcommand from table")
}

fn clap_command() -> clap::Command {
    let mut cmd = clap::Command::new("lvalue-lab")
        .about("Trace formulas, L-values, zeros and moment statistics for newform families")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("key=value config file"))
        .arg(Arg::new("format").long("format").global(true).value_parser(["json", "csv"]).help("output format"))
        .arg(Arg::new("cache").long("cache").global(true).value_name("DIR").help("q-expansion cache directory"))
        .arg(Arg::new("threads").long("threads").global(true).value_name("N").help("worker threads"))
        .arg(Arg::new("tail").long("tail").global(true).value_name("EPS").help("default tail budget"));
    for spec in COMMANDS {
        let mut sub = clap::Command::new(spec.name).about(spec.about);
        for param in spec.params {
            let arg = Arg::new(param.name).long(param.name).help(param.help);
            sub = sub.arg(match param.kind {
                Flag => arg.action(ArgAction::SetTrue),
                _ => arg.value_name(param.name).allow_negative_numbers(true),
            });
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn parse_config_file(path: &Path) -> Outcome<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        exit: EXIT_USAGE,
        code: "config",
        message: format!("cannot read config file {}: {e}", path.display()),
        extra: None,
    })?;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Failure {
            exit: EXIT_USAGE,
            code: "config",
            message: format!("{}:{}: expected key=value", path.display(), i + 1),
            extra: None,
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Flag values over config values over defaults; unknown config keys are rejected.
fn resolve(command: &str, sub: &ArgMatches) -> Outcome<RunConfig> {
    let spec = command_spec(command);
    let mut file = match sub.get_one::<String>("config") {
        Some(path) => parse_config_file(Path::new(path))?,
        None => BTreeMap::new(),
    };
    for key in file.keys() {
        if !GLOBAL_KEYS.contains(&key.as_str()) && !spec.params.iter().any(|p| p.name == key) {
            return Err(Failure {
                exit: EXIT_USAGE,
                code: "unknown_key",
                message: format!("unknown config key {key:?} for {command}"),
                extra: None,
            });
        }
    }
    let take = |file: &mut BTreeMap<String, String>, key: &str| -> Option<String> {
        let flag = sub.get_one::<String>(key).cloned();
        let from_file = file.remove(key);
        flag.or(from_file)
    };

    let format = match take(&mut file, "format").as_deref() {
        None => spec.format,
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(other) => return Err(Failure::usage(format!("format must be json or csv, got {other:?}"))),
    };
    let cache_dir = take(&mut file, "cache").map(PathBuf::from).or_else(forms::cache_dir_from_env);
    let threads = match take(&mut file, "threads") {
        Some(t) => parse_int(&t, "threads").and_then(|n| {
            if n == 0 {
                Err(Failure::usage("threads must be at least 1"))
            } else {
                Ok(n as usize)
            }
        })?,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let tail = match take(&mut file, "tail") {
        Some(t) => parse_real(&t, "tail")?,
        None => DEFAULT_TAIL,
    };

    let mut params = BTreeMap::new();
    for param in spec.params {
        let value = match param.kind {
            Flag => {
                let on = sub.get_flag(param.name)
                    || match file.remove(param.name) {
                        Some(v) => parse_bool(&v, param.name)?,
                        None => false,
                    };
                Value::Bool(on)
            }
            kind => {
                let raw = take(&mut file, param.name).or_else(|| param.default.filter(|d| !d.is_empty()).map(String::from));
                match raw {
                    None if param.default.is_none() => {
                        return Err(Failure::usage(format!("{command}: missing required --{}", param.name)))
                    }
                    None => Value::Null,
                    Some(raw) => match kind {
                        Int => json!(parse_int(&raw, param.name)?),
                        Real => real_value(parse_real(&raw, param.name)?),
                        _ => Value::String(raw),
                    },
                }
            }
        };
        params.insert(param.name.to_string(), value);
    }
    Ok(RunConfig {
        command: command.to_string(),
        params,
        format,
        cache_dir,
        threads,
        tail,
    })
}

fn parse_int(raw: &str, name: &str) -> Outcome<u64> {
    raw.trim()
        .parse::<u64>()
        .or_else(|_| {
            // Accept integral reals such as 1e6.
            let x: f64 = raw.trim().parse().map_err(|_| ())?;
            if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(64) {
                Ok(x as u64)
            } else {
                Err(())
            }
        })
        .map_err(|_| Failure::usage(format!("--{name} expects a nonnegative integer, got {raw:?}")))
}

fn parse_real(raw: &str, name: &str) -> Outcome<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| !x.is_nan())
        .ok_or_else(|| Failure::usage(format!("--{name} expects a real number, got {raw:?}")))
}

fn parse_bool(raw: &str, name: &str) -> Outcome<bool> {
    match raw.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Failure::usage(format!("{name} expects true or false, got {raw:?}"))),
    }
}

/// JSON has no infinities; they are echoed as strings.
fn real_value(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(format_real(x))
    }
}

impl RunConfig {
    fn int(&self, name: &str) -> u64 {
        self.params[name].as_u64().expect("integer parameter")
    }

    fn opt_int(&self, name: &str) -> Option<u64> {
        self.params[name].as_u64()
    }

    fn real(&self, name: &str) -> f64 {
        match &self.params[name] {
            Value::String(s) => s.parse().expect("validated real"),
            v => v.as_f64().expect("real parameter"),
        }
    }

    fn text(&self, name: &str) -> Option<&str> {
        self.params[name].as_str()
    }

    fn flag(&self, name: &str) -> bool {
        self.params[name].as_bool().unwrap_or(false)
    }

    fn weight(&self) -> Outcome<u32> {
        u32::try_from(self.int("k")).map_err(|_| Failure::usage("weight out of range"))
    }

    fn truncation(&self) -> Truncation {
        match self.opt_int("c-max") {
            Some(c) => Truncation::CMax(c),
            None => Truncation::TargetTail(self.tail),
        }
    }

    fn form(&self) -> Outcome<CatalogForm> {
        Ok(self.text("form").expect("required").parse()?)
    }

    fn load(&self, form: CatalogForm, n: usize) -> Outcome<NewformRecord> {
        Ok(NewformRecord::load(form, n, self.cache_dir.as_deref())?)
    }

    /// A record long enough for `Λ` up to height `t` and for prime sums below `x`.
    fn load_for(&self, form: CatalogForm, t: f64, x: f64) -> Outcome<NewformRecord> {
        let probe = self.load(form, 1)?;
        let n = lfun::required_length(&probe, t)?.max(x.ceil() as usize + 1);
        self.load(form, n)
    }

    fn levels(&self) -> Outcome<LevelFilter> {
        Ok(match self.text("levels").unwrap_or("all") {
            "all" => LevelFilter::All,
            "squarefree" => LevelFilter::Squarefree,
            "prime" => LevelFilter::Prime,
            list => LevelFilter::Explicit(
                list.split(',')
                    .map(|s| parse_int(s, "levels"))
                    .collect::<Outcome<_>>()?,
            ),
        })
    }

    fn family(&self) -> Outcome<FamilySpec> {
        Ok(FamilySpec::new(self.real("Q"), self.weight()?).with_levels(self.levels()?))
    }
}

/// `%.17g`: 17 significant digits, `.` as decimal separator.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Output of a command before serialization.
enum Output {
    Json(Value),
    Table { header: Vec<&'static str>, rows: Vec<Vec<String>>, json: Value },
    /// Bare lines (one value per line), with a JSON rendering.
    Lines { lines: Vec<String>, json: Value },
    Verify(Vec<verify::Criterion>),
}

fn execute(config: &RunConfig) -> Outcome<Output> {
    match config.command.as_str() {
        "kloosterman" => cmd_kloosterman(config),
        "bessel" => {
            let order = u32::try_from(config.int("order")).map_err(|_| Failure::usage("order out of range"))?;
            let x = config.real("x");
            let value = bessel::bessel_j(order, x)?;
            Ok(Output::Json(json!({"order": order, "x": x, "value": value})))
        }
        "delta" => {
            let (m, n, q, k) = (config.int("m"), config.int("n"), config.int("q"), config.weight()?);
            let pairs = [(m, n)];
            let est = match config.text("space") {
                Some("full") => trace::delta_full_batch(&pairs, q, k, config.truncation())?,
                Some("new") => trace::delta_new_batch(&pairs, q, k, config.truncation())?,
                other => return Err(Failure::usage(format!("--space must be full or new, got {other:?}"))),
            }
            .remove(0);
            Ok(Output::Json(serde_json::to_value(est).expect("serializable")))
        }
        "family-count" => {
            let count = trace::family_count(&config.family()?, config.truncation())?;
            Ok(Output::Json(serde_json::to_value(count).expect("serializable")))
        }
        "qexp" => cmd_qexp(config),
        "lvalue" => cmd_lvalue(config),
        "zeros" => cmd_zeros(config),
        "pfx" => {
            let x = config.real("x");
            let rec = config.load(config.form()?, x.max(2.0).ceil() as usize + 1)?;
            let value = stats::p_sum(&rec, x)?;
            let loglog = x.ln().ln();
            let rankin = if x >= 10.0 { Some(stats::rankin_sum(&rec, x)?) } else { None };
            Ok(Output::Json(json!({
                "form": rec.form,
                "x": x,
                "p_sum": value,
                "log_log_x": loglog,
                "normalized": if loglog > 0.0 { Some(value / loglog.sqrt()) } else { None },
                "rankin_sum": rankin,
            })))
        }
        "density" => cmd_density(config),
        "moments" => {
            let l = u32::try_from(config.int("l")).map_err(|_| Failure::usage("l out of range"))?;
            let report = stats::harmonic_moment(&config.family()?, l, config.real("x"), config.truncation())?;
            Ok(Output::Json(serde_json::to_value(report).expect("serializable")))
        }
        "distribution" => cmd_distribution(config),
        "verify" => cmd_verify(config),
        other => Err(Failure::usage(format!("unknown command {other}"))),
    }
}

fn moduli(raw: &str) -> Outcome<Vec<u64>> {
    let bad = || Failure::usage(format!("--c expects n, a,b,c or a..b, got {raw:?}"));
    if let Some((a, b)) = raw.split_once("..") {
        let (a, b) = (parse_int(a, "c")?, parse_int(b, "c")?);
        if a > b || b - a > 10_000_000 {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    raw.split(',').map(|s| parse_int(s, "c").map_err(|_| bad())).collect()
}

fn cmd_kloosterman(config: &RunConfig) -> Outcome<Output> {
    let (m, n) = (config.int("m"), config.int("n"));
    let cs = moduli(config.text("c").expect("required"))?;
    let fast = match config.text("method") {
        Some("fast") => true,
        Some("direct") => false,
        other => return Err(Failure::usage(format!("--method must be fast or direct, got {other:?}"))),
    };
    let mut lines = Vec::with_capacity(cs.len());
    let mut values = Vec::with_capacity(cs.len());
    for &c in &cs {
        let s = if fast {
            kloosterman::kloosterman_fast(m, n, c, &crate::arith::factorize(c)?)?
        } else {
            kloosterman::kloosterman(m, n, c)?
        };
        lines.push(format_real(s));
        values.push(json!({"c": c, "value": s, "weil_bound": kloosterman::weil_bound(m, n, c)?}));
    }
    Ok(Output::Lines {
        lines,
        json: json!({"m": m, "n": n, "values": values}),
    })
}

fn cmd_qexp(config: &RunConfig) -> Outcome<Output> {
    let n = config.int("n") as usize;
    let rec = config.load(config.form()?, n)?;
    let mut rows = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    for i in 1..=n {
        let c = rec.expansion.c(i);
        let a = rec.a(i);
        rows.push(vec![i.to_string(), c.to_string(), format_real(a)]);
        // Coefficients of Δ overflow i64 quickly; JSON carries them as decimal strings.
        entries.push(json!({"n": i, "c": c.to_string(), "a": a}));
    }
    Ok(Output::Table {
        header: vec!["n", "c", "a"],
        rows,
        json: json!({"form": rec.form, "level": rec.level, "weight": rec.weight, "coefficients": entries}),
    })
}

fn parse_point(raw: &str) -> Outcome<Complex64> {
    let (re, im) = raw.split_once(',').unwrap_or((raw, "0"));
    Ok(Complex64::new(parse_real(re, "s")?, parse_real(im, "s")?))
}

fn cmd_lvalue(config: &RunConfig) -> Outcome<Output> {
    let form = config.form()?;
    match config.text("s") {
        None => {
            let rec = config.load_for(form, 0.0, 0.0)?;
            let cv = lfun::central_value(&rec)?;
            Ok(Output::Table {
                header: vec!["re", "im"],
                rows: vec![vec![format_real(cv.value), "0".into()]],
                json: json!({
                    "form": form,
                    "s": [0.5, 0.0],
                    "conductor": rec.conductor(),
                    "central_value": cv,
                }),
            })
        }
        Some(raw) => {
            let s = parse_point(raw)?;
            let rec = config.load_for(form, s.im.abs(), 0.0)?;
            let l = lfun::l_value(&rec, s)?;
            let lambda = lfun::completed_lambda(&rec, s)?;
            Ok(Output::Table {
                header: vec!["re", "im"],
                rows: vec![vec![format_real(l.re), format_real(l.im)]],
                json: json!({
                    "form": form,
                    "s": [s.re, s.im],
                    "conductor": rec.conductor(),
                    "root_number": lfun::root_number(&rec)?,
                    "l_value": [l.re, l.im],
                    "completed": [lambda.re, lambda.im],
                }),
            })
        }
    }
}

fn cmd_zeros(config: &RunConfig) -> Outcome<Output> {
    let t = config.real("T");
    let rec = config.load_for(config.form()?, t, 0.0)?;
    let zeros = lfun::find_zeros(&rec, t)?;
    let rescaled: Vec<f64> = zeros.ordinates.iter().map(|&g| lfun::rescale_zero(&rec, g)).collect();
    let rows = zeros
        .ordinates
        .iter()
        .zip(&rescaled)
        .enumerate()
        .map(|(i, (g, r))| vec![(i + 1).to_string(), format_real(*g), format_real(*r)])
        .collect();
    let json = json!({
        "form": rec.form,
        "zeros": zeros,
        "rescaled": rescaled,
        "count": rescaled.len(),
        "predicted_count": lfun::zero_count_prediction(&rec, t),
    });
    Ok(Output::Table {
        header: vec!["index", "gamma", "gamma_tilde"],
        rows,
        json,
    })
}

fn cmd_density(config: &RunConfig) -> Outcome<Output> {
    let t = config.real("T");
    let form = config.form()?;
    let probe = config.load(form, 1)?;
    let terms = (config.int("terms") as usize).max(lfun::required_length(&probe, t)?);
    let rec = config.load(form, terms)?;
    let kernel = stats::fejer_kernel(config.real("scale"))?;
    let zeros = lfun::find_zeros(&rec, t)?;
    let density = stats::one_level_density(&zeros, &rec, &kernel);
    let prediction = stats::density_prediction(&rec, &kernel)?;
    let weil = stats::weil_explicit_formula(&rec, &kernel)?;
    let groups: BTreeMap<String, f64> = SymmetryGroup::ALL
        .iter()
        .map(|&g| (g.to_string(), stats::density_integral_closed(g, &kernel)))
        .collect();
    Ok(Output::Json(json!({
        "form": form,
        "kernel": kernel,
        "zeros_found": zeros.ordinates.len(),
        "density": density,
        "prediction": prediction,
        "explicit_formula": weil,
        "symmetry_integrals": groups,
    })))
}

/// Reads `value,weight,vanishing` rows; the flag is 0 or 1.
fn read_samples(path: &Path) -> Outcome<Vec<Sample>> {
    let bad = |msg: String| Failure {
        exit: EXIT_USAGE,
        code: "input",
        message: format!("{}: {msg}", path.display()),
        extra: None,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["value", "weight", "vanishing"] {
        return Err(bad("header must be value,weight,vanishing".into()));
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let line = i + 2;
        let vanishing = match field(2) {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("line {line}: vanishing must be 0 or 1, got {other:?}"))),
        };
        let real = |j: usize, what: &str| {
            field(j)
                .parse::<f64>()
                .map_err(|_| bad(format!("line {line}: bad {what} {:?}", field(j))))
        };
        let value = if vanishing && field(0).is_empty() { f64::NEG_INFINITY } else { real(0, "value")? };
        samples.push(Sample {
            value,
            weight: real(1, "weight")?,
            vanishing,
        });
    }
    Ok(samples)
}

fn cmd_distribution(config: &RunConfig) -> Outcome<Output> {
    let samples = read_samples(Path::new(config.text("input").expect("required")))?;
    let report = stats::empirical_distribution(&samples, config.real("alpha"), config.real("beta"))?;
    Ok(Output::Json(serde_json::to_value(report).expect("serializable")))
}

fn cmd_verify(config: &RunConfig) -> Outcome<Output> {
    let ids: Vec<u32> = match config.text("only") {
        Some(list) => list
            .split(',')
            .map(|s| match parse_int(s, "only")? {
                id @ 1..=11 => Ok(id as u32),
                id => Err(Failure::usage(format!("no criterion {id}"))),
            })
            .collect::<Outcome<_>>()?,
        None if config.flag("quick") => verify::QUICK.to_vec(),
        None => verify::all_ids(),
    };
    let options = verify::Options {
        vanishing_c_max: config.int("vanishing-c-max"),
        moment_c_max: config.int("moment-c-max"),
        cache: config.cache_dir.clone(),
    };
    Ok(Output::Verify(verify::run_many(&ids, &options, |_| {})))
}

fn error_document(failure: &Failure, config: Option<&RunConfig>) -> Value {
    let mut error = json!({
        "code": failure.code,
        "message": failure.message,
        "exit_code": failure.exit,
    });
    if let Some(extra) = &failure.extra {
        error["details"] = extra.clone();
    }
    let mut doc = json!({ "error": error });
    if let Some(c) = config {
        doc["config"] = serde_json::to_value(c).expect("serializable");
    }
    doc
}

fn write_json<W: Write>(out: &mut W, doc: &Value) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, doc)?;
    writeln!(out)
}

fn emit<W: Write>(out: &mut W, config: &RunConfig, output: Output) -> std::io::Result<i32> {
    let config_json = serde_json::to_value(config).expect("serializable");
    match (output, config.format) {
        (Output::Verify(criteria), format) => {
            let passed = criteria.iter().all(|c| c.passed);
            if format == Format::Json {
                write_json(out, &json!({"config": config_json, "passed": passed, "criteria": criteria}))?;
            } else {
                for c in &criteria {
                    writeln!(out, "{c}")?;
                }
            }
            Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
        }
        (Output::Json(result), _) => {
            write_json(out, &json!({"config": config_json, "result": result}))?;
            Ok(EXIT_OK)
        }
        (Output::Table { json, .. } | Output::Lines { json, .. }, Format::Json) => {
            write_json(out, &json!({"config": config_json, "result": json}))?;
            Ok(EXIT_OK)
        }
        (Output::Table { header, rows, .. }, Format::Csv) => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(EXIT_OK)
        }
        (Output::Lines { lines, .. }, Format::Csv) => {
            for line in lines {
                writeln!(out, "{line}")?;
            }
            Ok(EXIT_OK)
        }
    }
}

/// Runs one invocation, writing the result document to `out`; returns the exit code.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let matches = match clap_command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let failure = Failure::usage(e.render().to_string().trim().to_string());
            let _ = write_json(out, &error_document(&failure, None));
            return EXIT_USAGE;
        }
    };
    let (command, sub) = matches.subcommand().expect("subcommand required");
    let config = match resolve(command, sub) {
        Ok(c) => c,
        Err(f) => {
            let _ = write_json(out, &error_document(&f, None));
            return f.exit;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let f = Failure {
                exit: EXIT_FAILURE,
                code: "threads",
                message: e.to_string(),
                extra: None,
            };
            let _ = write_json(out, &error_document(&f, Some(&config)));
            return f.exit;
        }
    };
    let result = pool.install(|| execute(&config));
    let written = match result {
        Ok(output) => emit(out, &config, output),
        Err(f) => write_json(out, &error_document(&f, Some(&config))).map(|_| f.exit),
    };
    written.unwrap_or(EXIT_FAILURE)
}
