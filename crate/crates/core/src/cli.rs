//! Command-line front end: `run`, `sweep`, `topology`, `energy`.

use std::fs;
use std::ops::Range;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::adversary::ProfileKind;
use crate::energy::{
    bind, f_e_bound, feasible_region, model, nu_f_bound, region, structure, CostTable,
    CryptoScheme, Fabric, KcastPricing, Medium, Protocol, Psi, Scope, Side,
};
use crate::hypergraph::{
    certify_f_connectivity, degree_profile, generate_topology, necessary_condition, Hypergraph,
    TopologyKind,
};
use crate::report::run_scenario;
use crate::scenario::Scenario;
use crate::sweep::{run_sweep, SweepSpec};

#[derive(Parser, Debug)]
#[command(name = "eesmr-lab", version, about = "EESMR simulation and energy analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Run one scenario and write its report.
    Run(RunArgs),
    /// Run a seed × profile matrix.
    Sweep(SweepArgs),
    /// Certify the f-connectivity of a topology.
    Topology(TopologyArgs),
    /// Evaluate the analytic energy models.
    Energy(EnergyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Dot-path override, `key=value`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub trace: Option<OnOff>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed range `A..B` (half-open).
    #[arg(long, default_value = "0..10", value_parser = parse_seed_range)]
    pub seeds: Range<u64>,
    /// Comma-separated adversary profiles. Empty sweeps delivery policies only.
    #[arg(long, default_value = "silent_leader,equivocator,stale_commit_advertiser,long_chain_spammer,vote_withholder,crash")]
    pub profiles: String,
    /// Comma-separated node counts; defaults to the scenario's `n`.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct TopologyArgs {
    /// Hypergraph JSON file (`{"nodes": n, "edges": [{"s": 0, "r": [1, 2]}]}`).
    #[arg(long, conflicts_with_all = ["ring", "complete"])]
    pub graph: Option<PathBuf>,
    /// Ring k-cast topology, `n,k`.
    #[arg(long, value_delimiter = ',')]
    pub ring: Option<Vec<usize>>,
    /// Complete unicast graph on `n` nodes.
    #[arg(long)]
    pub complete: Option<usize>,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnergyMode {
    FeasibleRegion,
    Compare,
    Bounds,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    #[arg(value_enum)]
    pub mode: EnergyMode,
    #[arg(long, default_value_t = 13)]
    pub n: usize,
    /// Defaults to `(n - 1) / 2`.
    #[arg(long)]
    pub f: Option<usize>,
    /// Ring degree; defaults to `f + 1`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Command bytes per block.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value = "rsa1024")]
    pub crypto: String,
    /// `protocol[-medium]`, e.g. `eesmr-wifi`.
    #[arg(long, default_value = "eesmr-ble")]
    pub protocol: String,
    /// Comparison side: `synchs-ble`, `baseline-4g`, or a bare medium for the baseline.
    #[arg(long, alias = "against", default_value = "synchs-ble")]
    pub baseline: String,
    #[arg(long, value_enum, default_value = "ring")]
    pub fabric: FabricArg,
    #[arg(long, value_enum, default_value = "leader")]
    pub scope: ScopeArg,
    /// Grid for `feasible-region`: node counts `A..=B`.
    #[arg(long, default_value = "4..=50")]
    pub n_range: String,
    /// Grid for `feasible-region`: payload sizes `A..=B:STEP`.
    #[arg(long, default_value = "256..=2048:256")]
    pub m_range: String,
    /// Ring degree used on both sides of `feasible-region`.
    #[arg(long, default_value_t = 3)]
    pub region_k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FabricArg {
    Ring,
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Leader,
    Node,
    Total,
}

/// Parses `A..B` into a half-open range.
pub fn parse_seed_range(s: &str) -> Result<Range<u64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| anyhow!("seed range must look like A..B, got {s:?}"))?;
    let a: u64 = a.trim().parse().context("seed range start")?;
    let b: u64 = b.trim().trim_start_matches('=').parse().context("seed range end")?;
    let b = if s.contains("..=") { b + 1 } else { b };
    if b < a {
        bail!("empty seed range {s}");
    }
    Ok(a..b)
}

pub fn parse_profiles(s: &str) -> Result<Vec<ProfileKind>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            serde_json::from_value(json!(p)).map_err(|_| anyhow!("unknown adversary profile {p:?}"))
        })
        .collect()
}

fn parse_inclusive(s: &str) -> Result<(usize, usize, usize)> {
    let (range, step) = s.split_once(':').unwrap_or((s, "1"));
    let (a, b) = range
        .split_once("..=")
        .ok_or_else(|| anyhow!("range must look like A..=B[:STEP], got {s:?}"))?;
    let step: usize = step.parse()?;
    if step == 0 {
        bail!("range step must be positive");
    }
    Ok((a.parse()?, b.parse()?, step))
}

fn grid(s: &str) -> Result<Vec<usize>> {
    let (a, b, step) = parse_inclusive(s)?;
    Ok((a..=b).step_by(step).collect())
}

fn parse_side(s: &str) -> Result<(Protocol, Option<Medium>)> {
    if let Ok(m) = s.parse::<Medium>() {
        return Ok((Protocol::TrustedBaseline, Some(m)));
    }
    let (p, m) = match s.rsplit_once('-') {
        Some((p, m)) if m.parse::<Medium>().is_ok() => (p, Some(m.parse::<Medium>()?)),
        _ => (s, None),
    };
    Ok((p.parse::<Protocol>()?, m))
}

fn write_out(out: &Option<PathBuf>, name: &str, body: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let p = dir.join(name);
            fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
            Ok(Some(p))
        }
        None => Ok(None),
    }
}

fn load(c: &Common) -> Result<Scenario> {
    let sc = Scenario::load(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
    Ok(sc.with_overrides(&c.overrides)?)
}

/// Structured error payload for invalid input.
fn error_json(e: &anyhow::Error) -> String {
    let field = e
        .chain()
        .find_map(|c| c.downcast_ref::<crate::error::ConfigError>())
        .and_then(|c| match c {
            crate::error::ConfigError::Field { field, .. } => Some(field.clone()),
            _ => None,
        });
    json!({ "error": format!("{e:#}"), "field": field }).to_string()
}

fn cmd_run(a: &RunArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let mut sc = load(&a.common)?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(t) = a.trace {
        sc.trace = t == OnOff::On;
    }
    let (rep, out) = run_scenario(&sc)?;
    let body = rep.to_json();
    let path = write_out(&a.common.out, "report.json", &body)?;
    if sc.trace {
        let lines: String = out.trace.iter().map(|r| r.to_json_line() + "\n").collect();
        write_out(&a.common.out, "trace.jsonl", &lines)?;
    }
    if path.is_none() {
        writeln!(stdout, "{body}")?;
    }
    if rep.passed() {
        return Ok(0);
    }
    let cx = json!({
        "scenario": sc,
        "violation": rep.verdicts.counterexample,
        "trace_tail": out.trace_tail,
    });
    let cx = serde_json::to_string_pretty(&cx)?;
    match write_out(&a.common.out, "counterexample.json", &cx)? {
        Some(p) => eprintln!("checker violation; counterexample at {}", p.display()),
        None => eprintln!("checker violation: {cx}"),
    }
    Ok(2)
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let base = load(&a.common)?;
    let spec = SweepSpec {
        base,
        seeds: a.seeds.clone(),
        profiles: parse_profiles(&a.profiles)?,
        ns: a.ns.clone(),
    };
    let rep = run_sweep(&spec)?;
    let body = rep.to_json();
    if write_out(&a.common.out, "sweep.json", &body)?.is_none() {
        let summary = json!({
            "runs": rep.runs,
            "failures": rep.failures.len(),
            "per_block_mj": rep.per_block_mj,
            "per_block_mj_by_n": rep.per_block_mj_by_n,
            "max_view_change_deltas": rep.max_view_change_deltas,
        });
        writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
    }
    if let Some(f) = rep.failures.first() {
        eprintln!(
            "violation at seed {} profile {:?} n {}: {:?}",
            f.seed, f.profile, f.n, f.failed_checkers
        );
        return Ok(2);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TopologyReport {
    f: usize,
    certified: bool,
    witness: Option<Vec<u32>>,
    subsets_checked: u64,
    f_nec: i64,
    f_coarse: i64,
    d_in: usize,
    d_out: usize,
    k: usize,
}

fn cmd_topology(a: &TopologyArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let g = if let Some(p) = &a.graph {
        let h = Hypergraph::from_json(&fs::read_to_string(p)?)?;
        Hypergraph::new(h.nodes, h.edges)?
    } else if let Some(r) = &a.ring {
        if r.len() != 2 {
            bail!("--ring takes n,k");
        }
        generate_topology(TopologyKind::RingKcast, r[0], r[1])?
    } else if let Some(n) = a.complete {
        generate_topology(TopologyKind::CompleteUnicast, n, 1)?
    } else {
        bail!("one of --graph, --ring or --complete is required");
    };
    let cert = certify_f_connectivity(&g, a.f)?;
    let prof = degree_profile(&g);
    let nec = necessary_condition(&prof);
    let rep = TopologyReport {
        f: a.f,
        certified: cert.certified,
        witness: cert.witness,
        subsets_checked: cert.subsets_checked,
        f_nec: nec.f_nec,
        f_coarse: nec.f_coarse,
        d_in: prof.d_in,
        d_out: prof.d_out,
        k: prof.k,
    };
    let body = serde_json::to_string_pretty(&rep)?;
    if write_out(&a.out, "topology.json", &body)?.is_none() {
        writeln!(stdout, "{body}")?;
    }
    Ok(if rep.certified { 0 } else { 1 })
}

fn psi_json(p: &Psi) -> serde_json::Value {
    json!({ "psi_b": p.b, "psi_w": p.w, "psi_v": p.v })
}

fn cmd_energy(a: &EnergyArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let table = CostTable::builtin();
    let crypto: CryptoScheme = a.crypto.parse()?;
    let f = a.f.unwrap_or((a.n.saturating_sub(1)) / 2);
    let k = a.k.unwrap_or(f + 1);
    let fabric = match a.fabric {
        FabricArg::Ring => Fabric::Ring,
        FabricArg::Complete => Fabric::Complete,
    };
    let scope = match a.scope {
        ScopeArg::Leader => Scope::Leader,
        ScopeArg::Node => Scope::Node,
        ScopeArg::Total => Scope::Total,
    };
    let (pa, ma) = parse_side(&a.protocol)?;
    let (pb, mb) = parse_side(&a.baseline)?;
    let ma = ma.unwrap_or(Medium::Ble);
    let mb = mb.unwrap_or(ma);
    let x = structure(a.n, f, k, a.m);
    let xa = bind(x.clone(), &table, ma, crypto, KcastPricing::Reliable)?;
    let xb = bind(x, &table, mb, crypto, KcastPricing::Reliable)?;

    let (name, body, summary) = match a.mode {
        EnergyMode::Compare => {
            let ea = model(pa, fabric, scope).eval(&xa)?;
            let eb = model(pb, fabric, scope).eval(&xb)?;
            let s = json!({
                "n": a.n, "f": f, "k": k, "m": a.m, "crypto": crypto, "scope": format!("{scope:?}").to_lowercase(),
                "a": { "protocol": pa, "medium": ma, "psi": psi_json(&ea) },
                "b": { "protocol": pb, "medium": mb, "psi": psi_json(&eb) },
                "steady_ratio_b_over_a": eb.b / ea.b,
                "view_change_ratio_a_over_b": if eb.v != 0.0 { Some(ea.v / eb.v) } else { None },
                "nu_f": nu_f_bound(&ea, &eb).ok(),
                "region": region(&ea, &eb),
            });
            let csv = format!(
                "side,protocol,medium,psi_b,psi_w,psi_v\na,{pa},{ma},{},{},{}\nb,{pb},{mb},{},{},{}\n",
                ea.b, ea.w, ea.v, eb.b, eb.w, eb.v
            );
            ("compare.csv", csv, s)
        }
        EnergyMode::Bounds => {
            let ea = model(pa, fabric, Scope::Total).eval(&xa)?;
            let base = model(Protocol::TrustedBaseline, fabric, Scope::Total).eval(&xb)?;
            let fe = f_e_bound(&ea, base.b)?;
            let s = json!({
                "n": a.n, "f": f, "k": k, "m": a.m, "crypto": crypto,
                "protocol": { "name": pa, "medium": ma, "psi": psi_json(&ea) },
                "baseline": { "medium": mb, "psi_b": base.b },
                "f_e": fe,
                "never_favorable": fe < 0,
            });
            let csv = format!("protocol,medium,baseline_medium,f_e\n{pa},{ma},{mb},{fe}\n");
            ("bounds.csv", csv, s)
        }
        EnergyMode::FeasibleRegion => {
            let ns = grid(&a.n_range)?;
            let ms = grid(&a.m_range)?;
            let side_a = Side { model: model(pa, Fabric::Ring, Scope::Total), medium: ma, crypto };
            let side_b = Side { model: model(pb, Fabric::Ring, Scope::Total), medium: mb, crypto };
            let g = feasible_region(&side_a, &side_b, &table, a.region_k, &ns, &ms)?;
            let s = json!({
                "a": { "protocol": pa, "medium": ma },
                "b": { "protocol": pb, "medium": mb },
                "crypto": crypto, "k": a.region_k,
                "favorable_cells_per_n": g.ns.iter().zip(g.favorable_per_n()).collect::<Vec<_>>(),
            });
            ("feasible_region.csv", g.to_csv(), s)
        }
    };
    write_out(&a.out, name, &body)?;
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
    if a.out.is_none() {
        write!(stdout, "{body}")?;
    }
    Ok(0)
}

/// Runs a parsed command, writing human output to `stdout`. Returns the
/// process exit code.
pub fn execute(cli: &Cli, stdout: &mut dyn std::io::Write) -> Result<i32> {
    match &cli.cmd {
        Cmd::Run(a) => cmd_run(a, stdout),
        Cmd::Sweep(a) => cmd_sweep(a, stdout),
        Cmd::Topology(a) => cmd_topology(a, stdout),
        Cmd::Energy(a) => cmd_energy(a, stdout),
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match execute(&cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}
