use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use hamres::cert::{check_a1, check_a4, check_bundle_r_with, check_expansion_a2a3, ExpansionVariant};
use hamres::digraph::verify_hamilton;
use hamres::oracle::{decide, held_karp, Decision};
use hamres::pipeline::hamiltonize;
use hamres::process::{run_to_hitting_time, sample_dnm, sample_gnp, ProcessSnapshot};
use hamres::profile::ParameterProfile;
use hamres::resilience::{audit_attack, bipartition_attack, resilience_experiment, ResilienceConfig, ResilienceRow};
use hamres::rng::{derive, RNG_ALGORITHM};
use hamres::{par, Digraph};

mod selftest;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Lib(#[from] hamres::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Retryable(String),
    #[error("{0}")]
    Selftest(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(hamres::Error::Input(_)) | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Lib(hamres::Error::Failed { .. }) | CliError::Retryable(_) => 3,
            CliError::Lib(hamres::Error::Consistency(_)) | CliError::Selftest(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Text to emit, plus a failure that still produced a report.
struct Output {
    text: String,
    failure: Option<String>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Output { text, failure: None }
    }
}

#[derive(Parser)]
#[command(name = "hamres", version, about = "Hamilton cycles in pseudorandom digraphs and resilience of the random digraph process")]
struct Cli {
    /// Worker threads for trial-level parallelism (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, env = "HAMRES_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a digraph and dump it as an edge list (`n <count>` then `u v` lines).
    Gen(Source),
    /// Hitting times of δ± ≥ k. CSV columns: n,trial,seed,M_star,oracle
    /// (oracle is HAM, NON-HAM, TIMEOUT, or - without --oracle).
    Hit(HitArgs),
    /// Pseudorandomness certificates A1–A4 (and R1–R6 with --bundle), as JSON.
    Certify(CertifyArgs),
    /// Run the Hamilton-cycle pipeline and print the run report as JSON. Exit 3 if every attempt fails.
    Hamiltonize(HamiltonizeArgs),
    /// Bipartition attack at the hitting time. CSV columns:
    /// n,trial,seed,M_star,attack_ok,flagged,low_degree,cross_edges,steps,failure
    Attack(AttackArgs),
    /// Exact Hamiltonicity of an edge-list file: HAM plus a cycle, NON-HAM, or TIMEOUT (exit 3).
    Oracle(OracleArgs),
    /// Survival table. CSV columns: n,seed,M_star,attack_ok,attack_flagged,alpha,removed,
    /// survival_alpha,oracle_verdict,low_degree,pipeline,pipeline_verified
    Resilience(ResilienceArgs),
    /// Fast invariant suite; one PASS/FAIL line per check.
    Selftest,
}

/// Where the digraph comes from: a file, or a seeded sampler.
#[derive(Args, Clone)]
struct Source {
    /// Edge-list file.
    #[arg(long, conflicts_with_all = ["n", "p", "m", "complete", "hitting"])]
    edges: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability of D(n, p).
    #[arg(long)]
    p: Option<f64>,
    /// Edge count of D(n, M).
    #[arg(long)]
    m: Option<usize>,
    /// Complete digraph on n vertices.
    #[arg(long)]
    complete: bool,
    /// Process snapshot at the δ± ≥ 1 hitting time.
    #[arg(long)]
    hitting: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Source {
    fn load(&self) -> CliResult<(Digraph, Value)> {
        if let Some(path) = &self.edges {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let d = Digraph::parse_edge_list(&text)?;
            return Ok((d, json!({ "edges_file": path.display().to_string() })));
        }
        let n = self.n.ok_or_else(|| CliError::Usage("give --edges or --n".into()))?;
        let kinds = [self.p.is_some(), self.m.is_some(), self.complete, self.hitting];
        if kinds.iter().filter(|&&k| k).count() != 1 {
            return Err(CliError::Usage("with --n give exactly one of --p, --m, --complete, --hitting".into()));
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Usage(format!("--p {p} outside [0, 1]")));
            }
            return Ok((sample_gnp(n, p, self.seed), json!({ "model": "gnp", "n": n, "p": p, "seed": self.seed })));
        }
        if let Some(m) = self.m {
            if m > n * n.saturating_sub(1) {
                return Err(CliError::Usage(format!("--m {m} exceeds n(n-1)")));
            }
            return Ok((sample_dnm(n, m, self.seed), json!({ "model": "dnm", "n": n, "m": m, "seed": self.seed })));
        }
        if self.complete {
            return Ok((Digraph::complete(n), json!({ "model": "complete", "n": n })));
        }
        if n < 2 {
            return Err(CliError::Usage("the process needs n >= 2".into()));
        }
        let (trace, m_star) = run_to_hitting_time(n, self.seed, 1);
        Ok((trace.digraph_at(m_star), json!({ "model": "hitting-time", "n": n, "seed": self.seed, "M_star": m_star })))
    }
}

#[derive(Args)]
struct HitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Decide Hamiltonicity of each D_{M*} exactly.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 20_000_000)]
    budget: u64,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Also check the process bundle R1–R6, reading the digraph as a snapshot D_M.
    #[arg(long)]
    bundle: bool,
    /// Largest n checked exhaustively.
    #[arg(long, default_value_t = 14)]
    cap: usize,
    /// Sampled-search budget above the cap.
    #[arg(long, default_value_t = 4000)]
    budget: usize,
}

#[derive(Args)]
struct HamiltonizeArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Seed for the pipeline's own randomness.
    #[arg(long, default_value_t = 0)]
    run_seed: u64,
    #[arg(long)]
    retry_cap: Option<usize>,
    /// Include the cycle in the report.
    #[arg(long)]
    cycle: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Search-node budget of the backtracking solver (used above n = 16).
    #[arg(long, default_value_t = 50_000_000)]
    budget: u64,
}

#[derive(Args)]
struct ResilienceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
    /// Removal fraction for the positive direction (default 1/2 − eps).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000_000)]
    budget: u64,
}

/// `# key=value` lines describing the run.
fn header(command: &str, config: &Value) -> String {
    let mut s = format!("# hamres {} {command}\n# rng={RNG_ALGORITHM}\n", env!("CARGO_PKG_VERSION"));
    if let Value::Object(map) = config {
        for (k, v) in map {
            let _ = writeln!(s, "# {k}={v}");
        }
    }
    s
}

fn json_doc(command: &str, config: Value, body: (&str, Value)) -> String {
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "rng": RNG_ALGORITHM,
        "config": config,
        body.0: body.1,
    });
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn gen(src: &Source) -> CliResult<String> {
    let (d, desc) = src.load()?;
    Ok(header("gen", &desc) + &d.to_edge_list())
}

fn hit(a: &HitArgs) -> CliResult<String> {
    if a.n < 2 || a.k == 0 || a.k >= a.n {
        return Err(CliError::Usage("need n >= 2 and 1 <= k < n".into()));
    }
    if a.oracle && a.n > 16 {
        return Err(CliError::Usage("--oracle supports n <= 16".into()));
    }
    let rows = par::map_indexed(a.trials, |t| {
        let seed = derive(a.seed, t as u64);
        let (trace, m_star) = run_to_hitting_time(a.n, seed, a.k);
        let verdict = a.oracle.then(|| decide(&trace.digraph_at(m_star), a.budget).decision);
        (t, seed, m_star, verdict)
    });
    let lnn = (a.n as f64).ln();
    let config = json!({
        "n": a.n, "trials": a.trials, "seed": a.seed, "k": a.k, "oracle": a.oracle,
        "band_lo": a.n as f64 * (lnn - 3.0), "band_hi": a.n as f64 * (lnn + 3.0),
    });
    let mut s = header("hit", &config);
    s.push_str("n,trial,seed,M_star,oracle\n");
    for (t, seed, m, v) in &rows {
        let _ = writeln!(s, "{},{t},{seed},{m},{}", a.n, v.map_or("-", decision_name));
    }
    let mean = rows.iter().map(|r| r.2 as f64).sum::<f64>() / rows.len().max(1) as f64;
    let _ = writeln!(s, "# mean_M_star={mean:.3}");
    if a.oracle {
        let ham = rows.iter().filter(|r| r.3 == Some(Decision::Ham)).count();
        let timeout = rows.iter().filter(|r| r.3 == Some(Decision::Timeout)).count();
        let _ = writeln!(s, "# ham={ham}/{} timeout={timeout}", rows.len());
    }
    Ok(s)
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Ham => "HAM",
        Decision::NonHam => "NON-HAM",
        Decision::Timeout => "TIMEOUT",
    }
}

fn certify(a: &CertifyArgs) -> CliResult<String> {
    let (d, desc) = a.source.load()?;
    let mut profile = ParameterProfile::for_digraph(&d, a.eps);
    profile.exhaustive_cap = a.cap;
    profile.search_budget = a.budget;
    let mut certs = vec![
        check_a1(&d, &profile),
        check_expansion_a2a3(&d, &profile, ExpansionVariant::A2),
        check_expansion_a2a3(&d, &profile, ExpansionVariant::A3),
        check_a4(&d, &profile)?,
    ];
    if a.bundle {
        let snap = ProcessSnapshot::from_digraph(d.clone());
        certs.extend(check_bundle_r_with(&snap, a.eps, a.cap, a.budget));
    }
    let config = json!({ "source": desc, "eps": a.eps, "cap": a.cap, "budget": a.budget, "bundle": a.bundle, "d": profile.d, "m": profile.m });
    Ok(json_doc("certify", config, ("certificates", to_value(&certs))))
}

fn run_hamiltonize(a: &HamiltonizeArgs) -> CliResult<Output> {
    let (d, desc) = a.source.load()?;
    let mut profile = ParameterProfile::for_digraph(&d, a.eps);
    if let Some(c) = a.retry_cap {
        profile.retry_cap = c;
    }
    let report = hamiltonize(&d, &profile, a.run_seed)?;
    if let Some(c) = report.cycle() {
        if !verify_hamilton(&d, c) {
            return Err(hamres::Error::consistency("returned cycle fails verification").into());
        }
    }
    let mut body = to_value(&report);
    if !a.cycle {
        if let Some(asm) = body.get_mut("assembly").and_then(Value::as_object_mut) {
            asm.remove("cycle");
        }
    }
    let config = json!({ "source": desc, "eps": a.eps, "run_seed": a.run_seed, "profile": to_value(&profile) });
    let text = json_doc("hamiltonize", config, ("report", body));
    let failure = (!report.succeeded()).then(|| format!("all {} attempts failed", report.attempts.len()));
    Ok(Output { text, failure })
}

fn attack(a: &AttackArgs) -> CliResult<String> {
    if a.n < 2 || !(a.eps > 0.0 && a.eps <= 0.5) {
        return Err(CliError::Usage("need n >= 2 and eps in (0, 1/2]".into()));
    }
    let rows = par::map_indexed(a.trials, |t| -> hamres::Result<String> {
        let seed = derive(a.seed, t as u64);
        let (trace, m_star) = run_to_hitting_time(a.n, seed, 1);
        let snap = ProcessSnapshot::new(&trace, m_star);
        let d = &snap.digraph;
        Ok(match bipartition_attack(d, a.eps, snap.low_threshold(), derive(seed, 1)) {
            Ok(at) => {
                let ok = audit_attack(d, &at, a.eps)?;
                format!("{},{t},{seed},{m_star},{},{},{},{},{},", a.n, u8::from(ok), u8::from(at.flagged), at.low_degree.len(), at.h.len(), at.rounds)
            }
            Err(hamres::Error::Failed { stage, .. }) => format!("{},{t},{seed},{m_star},0,0,,,,{stage}", a.n),
            Err(e) => return Err(e),
        })
    })
    .into_iter()
    .collect::<hamres::Result<Vec<_>>>()?;
    let config = json!({ "n": a.n, "eps": a.eps, "trials": a.trials, "seed": a.seed });
    let mut s = header("attack", &config);
    s.push_str("n,trial,seed,M_star,attack_ok,flagged,low_degree,cross_edges,steps,failure\n");
    let ok = rows.iter().filter(|r| r.split(',').nth(4) == Some("1")).count();
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    let _ = writeln!(s, "# attack_ok={ok}/{}", a.trials);
    Ok(s)
}

fn oracle(a: &OracleArgs) -> CliResult<Output> {
    let text = std::fs::read_to_string(&a.edges).map_err(|source| CliError::Io { path: a.edges.clone(), source })?;
    let d = Digraph::parse_edge_list(&text)?;
    let (res, solver) = if d.n() <= 16 { (held_karp(&d)?, "held-karp") } else { (decide(&d, a.budget), "backtrack") };
    let config = json!({ "edges_file": a.edges.display().to_string(), "n": d.n(), "solver": solver, "budget": a.budget });
    let mut s = header("oracle", &config);
    s.push_str(decision_name(res.decision));
    s.push('\n');
    if let Some(c) = &res.cycle {
        let line: Vec<String> = c.vertices.iter().map(ToString::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    let failure = (res.decision == Decision::Timeout).then(|| "search budget exhausted".to_string());
    Ok(Output { text: s, failure })
}

fn resilience(a: &ResilienceArgs) -> CliResult<String> {
    if a.n > 16 {
        return Err(CliError::Usage("resilience uses the exact oracle; n must be <= 16".into()));
    }
    if !(a.eps > 0.0 && a.eps <= 0.5) {
        return Err(CliError::Usage("eps must lie in (0, 1/2]".into()));
    }
    let mut cfg = ResilienceConfig::new(a.n, a.eps, a.trials, a.seed);
    cfg.oracle_budget = a.budget;
    if let Some(al) = a.alpha {
        cfg.alpha = al;
    }
    let rep = resilience_experiment(&cfg)?;
    let mut s = header("resilience", &to_value(&cfg));
    s.push_str(ResilienceRow::HEADER);
    s.push('\n');
    for row in &rep.rows {
        s.push_str(&row.csv());
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "# attack_rate={:.4} survival_rate={:.4} pipeline_successes={}",
        rep.attack_rate, rep.survival_rate, rep.pipeline_successes
    );
    Ok(s)
}

fn dispatch(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Gen(s) => gen(s).map(Output::from),
        Command::Hit(a) => hit(a).map(Output::from),
        Command::Certify(a) => certify(a).map(Output::from),
        Command::Hamiltonize(a) => run_hamiltonize(a),
        Command::Attack(a) => attack(a).map(Output::from),
        Command::Oracle(a) => oracle(a),
        Command::Resilience(a) => resilience(a).map(Output::from),
        Command::Selftest => {
            let (text, failed) = selftest::run();
            Ok(Output { text, failure: (failed > 0).then(|| format!("{failed} invariant check(s) failed")) })
        }
    }
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = par::with_jobs(cli.jobs, || dispatch(&cli)).and_then(|out| {
        emit(&cli, &out.text)?;
        match out.failure {
            Some(f) if matches!(cli.command, Command::Selftest) => Err(CliError::Selftest(f)),
            Some(f) => Err(CliError::Retryable(f)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
