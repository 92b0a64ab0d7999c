//! Command-line front end.
//!
//! Every command writes CSV or JSON to `--out` (stdout by default). Inputs
//! come from flags, optionally layered over a JSON file given by `--config`;
//! flags win. Exit status is 0 on success, 2 on invalid input and 3 when a
//! size guard stops the computation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytic::{
    black_gamma, effective_attachment, p_b, p_c0, p_c1, p_g, red_mean, survival_theta, DEFAULT_P_TOL, DEFAULT_TOL,
};
use crate::error::Error;
use crate::gwsim::{estimate, McEstimate, Quantity};
use crate::pgf::{LawSpec, OffspringLaw};
use crate::rays::{RayRelation, RelationSpec};
use crate::rcm::chain::{heat_bath_chains, ChainConfig};
use crate::rcm::reduce::{dependence_test, reduce_to_attachment_tree};
use crate::rcm::{exact_distribution, RcSpec, TailMode, TreeBox};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_030_101;
/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "ARBOR_RCM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "arbor-rcm", version, about = "Branching-process thresholds and random-cluster measures on regular trees")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file with a command name and parameters; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical values p_c0, p_c1, p_b and p_G over a grid of q.
    Thresholds(ThresholdArgs),
    /// θ(p), γ(p) and the red mean over a grid of p.
    GammaCurve(CurveArgs),
    /// Monte Carlo estimates of θ_D and of k-blackness against exact values.
    McVerify(McArgs),
    /// Exact random-cluster law on a box.
    RcExact(RcArgs),
    /// Heat-bath estimates of edge marginals on a box.
    RcChain(ChainArgs),
    /// Attachment parameter of the reduced tree.
    Reduce(ReduceArgs),
    /// Dependence test on every pair of depth-k vertices.
    Distinguish(DistinguishArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tail {
    AllOpen,
    AllClosed,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; defaults to ARBOR_RCM_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Grid `start:stop:step`.
    #[arg(long, default_value = "1:10:0.5")]
    pub q_grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Offspring law as JSON, e.g. `{"kind":"table","probs":[0,0.4,0.6]}`;
    /// overrides `--m`.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long, default_value = "0:1:0.01")]
    pub p_grid: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub p: f64,
    /// Depth of the blue test.
    #[arg(long, default_value_t = 25)]
    pub horizon: usize,
    /// Cutset depth of the black test; omitted means θ_D only.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    /// `wired`, `free`, or a JSON relation.
    #[arg(long, default_value = "wired")]
    pub relation: String,
    #[arg(long, value_enum, default_value = "all-open")]
    pub tail: Tail,
}

#[derive(Debug, Args)]
pub struct RcArgs {
    #[command(flatten)]
    pub rc: BoxArgs,
    /// Report edge marginals instead of the full table.
    #[arg(long)]
    pub marginals: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    pub rc: BoxArgs,
    #[arg(long, default_value_t = 100_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "wired")]
    pub relation: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DistinguishArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "wired")]
    pub relation: String,
    /// Attachment parameter; defaults to the limit p_∞.
    #[arg(long)]
    pub p_att: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_guard() { EXIT_GUARD } else { EXIT_INVALID };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: EXIT_IO, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_INVALID, message: message.into() }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad grid value {s:?} in {text:?}"))))
        .collect::<CliResult<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(invalid(format!("grid {text:?} is not start:stop:step")));
    };
    if step.is_nan() || step <= 0.0 || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(invalid(format!("grid {text:?} needs step > 0 and start ≤ stop")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(invalid(format!("grid {text:?} has {count} points")));
    }
    // Rounding to 12 decimals keeps 0.1-style steps free of drift.
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn law_of(m: usize, law: &Option<String>) -> CliResult<OffspringLaw> {
    match law {
        Some(text) => {
            let spec: LawSpec = serde_json::from_str(text).map_err(|e| invalid(format!("bad law: {e}")))?;
            Ok(spec.build()?)
        }
        None if m >= 2 => Ok(OffspringLaw::deterministic(m)),
        None => Err(invalid(format!("m = {m} must be at least 2"))),
    }
}

fn law_echo(m: usize, law: &Option<String>) -> Value {
    match law {
        Some(text) => serde_json::from_str(text).unwrap_or(Value::Null),
        None => json!({ "kind": "deterministic", "m": m }),
    }
}

fn relation_of(m: usize, text: &str) -> CliResult<RayRelation> {
    Ok(RelationSpec::parse(text)?.resolve(m)?)
}

fn relation_echo(rel: &RayRelation) -> Value {
    serde_json::to_value(RelationSpec::from(rel)).unwrap_or(Value::Null)
}

fn tail_mode(t: Tail) -> TailMode {
    match t {
        Tail::AllOpen => TailMode::AllOpen,
        Tail::AllClosed => TailMode::AllClosed,
    }
}

fn tail_name(t: Tail) -> &'static str {
    match t {
        Tail::AllOpen => "all_open",
        Tail::AllClosed => "all_closed",
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable output");
    s.push('\n');
    s
}

/// Converts the JSON config into argument tokens placed before the user's
/// own flags, so later flags override it.
fn config_tokens(path: &PathBuf) -> CliResult<(Option<String>, Vec<OsString>)> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("malformed config: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(invalid("config must be a JSON object"));
    };
    let command = match map.remove("command") {
        Some(Value::String(s)) => Some(s),
        None => None,
        Some(other) => return Err(invalid(format!("config command must be a string, got {other}"))),
    };
    if let Some(Value::Object(params)) = map.remove("params") {
        map.extend(params);
    }
    if let Some(out) = map.remove("output") {
        map.insert("out".into(), out);
    }
    let mut tokens = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => tokens.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => {
                tokens.push(flag.into());
                tokens.push(s.into());
            }
            Value::Number(n) => {
                tokens.push(flag.into());
                tokens.push(n.to_string().into());
            }
            other => {
                tokens.push(flag.into());
                tokens.push(other.to_string().into());
            }
        }
    }
    Ok((command, tokens))
}

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

const COMMANDS: [&str; 7] = ["thresholds", "gamma-curve", "mc-verify", "rc-exact", "rc-chain", "reduce", "distinguish"];

/// Splices config tokens in after the subcommand name.
fn expand_args(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let (command, tokens) = config_tokens(&path)?;
    let pos = args.iter().position(|a| COMMANDS.contains(&a.to_string_lossy().as_ref()));
    let mut out: Vec<OsString> = Vec::with_capacity(args.len() + tokens.len() + 1);
    match (pos, command) {
        (Some(i), _) => {
            out.extend_from_slice(&args[..=i]);
            out.extend(tokens);
            out.extend_from_slice(&args[i + 1..]);
        }
        (None, Some(cmd)) => {
            out.push(args.first().cloned().unwrap_or_else(|| "arbor-rcm".into()));
            out.push(cmd.into());
            out.extend(tokens);
            out.extend_from_slice(args.get(1..).unwrap_or_default());
        }
        (None, None) => return Err(invalid("no command given on the command line or in the config")),
    }
    Ok(out)
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| invalid(format!("{THREADS_ENV}={v:?} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(invalid("thread count must be positive"));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn emit(common: &Common, text: &str) -> CliResult<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn tol_or(common: &Common, default: f64) -> CliResult<f64> {
    match common.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(invalid(format!("tolerance {t} must be positive"))),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn thresholds(a: &ThresholdArgs) -> CliResult<String> {
    let tol = tol_or(&a.common, DEFAULT_P_TOL)?;
    let grid = parse_grid(&a.q_grid)?;
    let pb = p_b(a.m)?;
    let pg = p_g(&OffspringLaw::deterministic(a.m), tol)?;
    let mut rows = Vec::with_capacity(grid.len());
    for q in grid {
        rows.push((q, p_c0(a.m, q)?, p_c1(a.m, q, tol)?));
    }
    Ok(match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("m,q,p_c0,p_c1,p_b,p_g,tol\n");
            for (q, c0, c1) in rows {
                let _ = writeln!(s, "{},{q},{c0},{c1},{pb},{pg},{tol}", a.m);
            }
            s
        }
        Format::Json => to_json(&json!({
            "command": "thresholds",
            "m": a.m,
            "tol": tol,
            "rows": rows.iter().map(|&(q, c0, c1)| json!({"q": q, "p_c0": c0, "p_c1": c1, "p_b": pb, "p_g": pg})).collect::<Vec<_>>(),
        })),
    })
}

/// `(θ, γ, residual of γ, red mean)`. At `p = 1` every vertex with a ray is
/// blue and every other vertex has no rays at all, so `γ = 1`.
fn curve_point(law: &OffspringLaw, p: f64, tol: f64) -> CliResult<(f64, f64, f64, f64)> {
    let theta = survival_theta(law, p, tol)?.value;
    let red = red_mean(law, p)?;
    if p == 1.0 {
        return Ok((theta, 1.0, 0.0, red));
    }
    let g = black_gamma(law, p, tol)?;
    Ok((theta, g.value, g.residual, red))
}

fn gamma_curve(a: &CurveArgs) -> CliResult<String> {
    let tol = tol_or(&a.common, DEFAULT_TOL)?;
    let law = law_of(a.m, &a.law)?;
    let grid = parse_grid(&a.p_grid)?;
    let rows = grid.iter().map(|&p| curve_point(&law, p, tol).map(|r| (p, r))).collect::<CliResult<Vec<_>>>()?;
    Ok(match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("p,theta,gamma,gamma_residual,red_mean,tol\n");
            for (p, (t, g, r, mu)) in rows {
                let _ = writeln!(s, "{p},{t},{g},{r},{mu},{tol}");
            }
            s
        }
        Format::Json => to_json(&json!({
            "command": "gamma-curve",
            "law": law_echo(a.m, &a.law),
            "tol": tol,
            "rows": rows.iter().map(|&(p, (t, g, r, mu))| json!({"p": p, "theta": t, "gamma": g, "gamma_residual": r, "red_mean": mu})).collect::<Vec<_>>(),
        })),
    })
}

fn mc_verify(a: &McArgs) -> CliResult<String> {
    let law = law_of(a.m, &a.law)?;
    let seed = a.common.seed;
    let mut runs: Vec<(&str, Option<usize>, McEstimate)> =
        vec![("theta_d", None, estimate(Quantity::ThetaD { horizon: a.horizon }, &law, a.p, a.samples, seed)?)];
    if let Some(k) = a.k {
        let q = Quantity::GammaKD { k, horizon: a.horizon };
        runs.push(("gamma_kd", Some(k), estimate(q, &law, a.p, a.samples, seed)?));
    }
    Ok(match a.common.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut s = String::from("quantity,k,horizon,p,samples,mean,std_error,surrogate,bias_bound,seed\n");
            for (name, k, e) in &runs {
                let k = k.map_or(String::new(), |k| k.to_string());
                let _ = writeln!(
                    s,
                    "{name},{k},{},{},{},{},{},{},{},{seed}",
                    a.horizon, a.p, e.samples, e.mean, e.std_error, e.surrogate, e.bias_bound
                );
            }
            s
        }
        Format::Json => to_json(&json!({
            "command": "mc-verify",
            "law": law_echo(a.m, &a.law),
            "p": a.p,
            "horizon": a.horizon,
            "seed": seed,
            "estimates": runs.iter().map(|(name, k, e)| json!({
                "quantity": name, "k": k, "samples": e.samples, "mean": e.mean, "std_error": e.std_error,
                "surrogate": e.surrogate, "bias_bound": e.bias_bound,
            })).collect::<Vec<_>>(),
        })),
    })
}

fn box_spec(b: &BoxArgs) -> CliResult<(TreeBox, RcSpec, Value)> {
    let tree = TreeBox::new(b.m, b.n)?;
    let relation = relation_of(b.m, &b.relation)?;
    let echo = json!({
        "m": b.m, "n": b.n, "p": b.p, "q": b.q,
        "relation": relation_echo(&relation), "tail": tail_name(b.tail),
    });
    let spec = RcSpec::new(b.p, b.q, relation, tail_mode(b.tail))?;
    Ok((tree, spec, echo))
}

fn marginal_rows(tree: &TreeBox, means: &[(f64, f64)]) -> (String, Vec<Value>) {
    let mut csv = String::from("edge,parent,child,marginal,std_error\n");
    let mut json_rows = Vec::new();
    for (e, &(m, se)) in means.iter().enumerate() {
        let (u, v) = tree.edge(e);
        let _ = writeln!(csv, "{e},{u},{v},{m},{se}");
        json_rows.push(json!({"edge": e, "parent": u, "child": v, "marginal": m, "std_error": se}));
    }
    (csv, json_rows)
}

fn rc_exact(a: &RcArgs) -> CliResult<String> {
    let (tree, spec, echo) = box_spec(&a.rc)?;
    let table = exact_distribution(&tree, &spec)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    if a.marginals {
        let means: Vec<(f64, f64)> = table.marginals().into_iter().map(|m| (m, 0.0)).collect();
        let (csv, rows) = marginal_rows(&tree, &means);
        return Ok(match format {
            Format::Csv => csv,
            Format::Json => to_json(&json!({
                "command": "rc-exact", "spec": echo, "method": "exact", "log_z": table.log_z(), "marginals": rows,
            })),
        });
    }
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("ascii table")
        }
        Format::Json => to_json(&json!({
            "command": "rc-exact", "spec": echo, "log_z": table.log_z(), "probabilities": table.probs(),
        })),
    })
}

fn rc_chain(a: &ChainArgs) -> CliResult<String> {
    let (tree, spec, echo) = box_spec(&a.rc)?;
    let cfg = ChainConfig { sweeps: a.sweeps, burn_in: a.burn_in, seed: a.common.seed, batches: a.batches };
    let run = heat_bath_chains(&tree, &spec, &cfg, a.chains)?;
    let means: Vec<(f64, f64)> = run.marginals.iter().map(|e| (e.mean, e.std_error)).collect();
    let (csv, rows) = marginal_rows(&tree, &means);
    Ok(match a.common.format.unwrap_or(Format::Json) {
        Format::Csv => csv,
        Format::Json => to_json(&json!({
            "command": "rc-chain", "spec": echo, "method": "heat_bath", "seed": a.common.seed,
            "sweeps": a.sweeps, "burn_in": a.burn_in, "batches": a.batches, "chains": a.chains, "marginals": rows,
        })),
    })
}

const ATTACHMENT_LEVELS: usize = 200;

fn reduce(a: &ReduceArgs) -> CliResult<String> {
    let relation = relation_of(a.m, &a.relation)?;
    let t = reduce_to_attachment_tree(a.m, a.p, a.q, a.k, a.n, &relation)?;
    let p_inf = effective_attachment(a.m, a.p, a.q, ATTACHMENT_LEVELS)?.p_inf.value;
    Ok(match a.common.format.unwrap_or(Format::Json) {
        Format::Csv => format!("m,p,q,k,n,p_n,p_inf\n{},{},{},{},{},{},{p_inf}\n", a.m, a.p, a.q, a.k, a.n, t.p_n),
        Format::Json => {
            let attachments: Vec<Value> = t
                .attachment_edges
                .iter()
                .zip(&t.classes)
                .enumerate()
                .map(|(x, (&e, &c))| json!({"vertex": x, "class": c, "edge": e}))
                .collect();
            to_json(&json!({
                "command": "reduce", "m": a.m, "p": a.p, "q": a.q, "k": a.k, "n": a.n,
                "relation": relation_echo(&relation), "p_n": t.p_n, "p_inf": p_inf,
                "graph_vertices": t.graph.vertex_count(), "box_edges": t.box_edges, "attachments": attachments,
            }))
        }
    })
}

fn distinguish(a: &DistinguishArgs) -> CliResult<String> {
    let relation = relation_of(a.m, &a.relation)?;
    let p_att = match a.p_att {
        Some(v) => v,
        None => {
            let v = effective_attachment(a.m, a.p, a.q, ATTACHMENT_LEVELS)?.p_inf.value;
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("limit attachment parameter is {v}; pass --p-att in (0, 1)")));
            }
            v
        }
    };
    let count = TreeBox::new(a.m, a.k)?.boundary().len();
    let mut rows = Vec::new();
    for x in 0..count {
        for y in x + 1..count {
            rows.push((x, y, dependence_test(a.m, a.p, a.q, &relation, a.k, x, y, p_att)?));
        }
    }
    Ok(match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("x,y,same_class,delta,dependent,p_att\n");
            for (x, y, d) in rows {
                let _ = writeln!(s, "{x},{y},{},{},{},{p_att}", d.same_class, d.delta, d.dependent);
            }
            s
        }
        Format::Json => to_json(&json!({
            "command": "distinguish", "m": a.m, "p": a.p, "q": a.q, "k": a.k,
            "relation": relation_echo(&relation), "p_att": p_att,
            "pairs": rows.iter().map(|(x, y, d)| json!({"x": x, "y": y, "same_class": d.same_class, "delta": d.delta, "dependent": d.dependent})).collect::<Vec<_>>(),
        })),
    })
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Thresholds(a) => &a.common,
        Command::GammaCurve(a) => &a.common,
        Command::McVerify(a) => &a.common,
        Command::RcExact(a) => &a.common,
        Command::RcChain(a) => &a.common,
        Command::Reduce(a) => &a.common,
        Command::Distinguish(a) => &a.common,
    }
}

/// Runs a parsed command and writes its output.
pub fn run(cli: &Cli) -> CliResult<()> {
    let c = common(&cli.command);
    configure_threads(c.threads)?;
    let text = match &cli.command {
        Command::Thresholds(a) => thresholds(a)?,
        Command::GammaCurve(a) => gamma_curve(a)?,
        Command::McVerify(a) => mc_verify(a)?,
        Command::RcExact(a) => rc_exact(a)?,
        Command::RcChain(a) => rc_chain(a)?,
        Command::Reduce(a) => reduce(a)?,
        Command::Distinguish(a) => distinguish(a)?,
    };
    emit(c, &text)
}

/// Entry point: parses `args` (program name first) and returns the exit status.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args = match expand_args(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
