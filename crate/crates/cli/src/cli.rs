//! Command-line surface.
//!
//! Exit codes: 0 on success, 2 when the instance admits no feasible
//! solution, 1 for every other failure (bad arguments, unreadable or
//! malformed input, verification mismatch).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lcpfilter_core::dist::{solve_dist_flooding, DistConfig};
use lcpfilter_core::dynamic_dp::DynamicSolver;
use lcpfilter_core::flooding::{solve_flooding_coarse, FloodingInstance};
use lcpfilter_core::oracle::{
    kmeans_prefix_baseline, oracle_solve, uniform_rate_limit, OracleBudget, OracleInstance, OracleProblem,
};
use lcpfilter_core::static_dp::{compute_tables, reconstruct_filters, solution_from_tables, Problem};
use lcpfilter_core::{Error, FilterSolution, LcpTree, Prefix, WeightedAddressSet, WhitelistMode};
use serde_json::json;

use crate::dshield::{read_report_log, ReportFilter};
use crate::formats::{self, Metric, Stats};
use crate::generator::{generate_synthetic, SyntheticConfig};

#[derive(Debug, Parser)]
#[command(
    name = "lcpfilter",
    version,
    about = "Prefix filter selection against malicious sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Block every bad address with at most --fmax filters.
    BlockAll(BlockArgs),
    /// Trade collateral damage against blocked bad weight.
    BlockSome(BlockArgs),
    /// Replay a delta stream, re-optimizing after every event.
    Timevary(TimevaryArgs),
    /// Bring traffic under --capacity with least collateral damage.
    Flooding(FloodingArgs),
    /// Coordinate flooding filters across the routers of a topology.
    DistFlooding(DistArgs),
    /// Exhaustive search over candidate prefixes (small instances only).
    Oracle(OracleArgs),
    /// Run a comparison baseline.
    Baseline(BaselineArgs),
    /// Write a seeded synthetic blacklist and whitelist.
    Gen(GenArgs),
    /// Print the LCP tree, one `prefix,good,bad,leaves` line per node.
    LcpDump(DumpArgs),
    /// Recompute metrics for a filters file and compare with a stats file.
    Verify(VerifyArgs),
    /// Turn a report log into a weighted blacklist.
    Dshield(DshieldArgs),
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// CSV of `ip,weight` rows; weight defaults to 1.
    #[arg(long)]
    pub blacklist: PathBuf,
    #[arg(long, conflicts_with = "implicit_whitelist")]
    pub whitelist: Option<PathBuf>,
    /// Treat every address outside the blacklist as good with weight 1.
    #[arg(long)]
    pub implicit_whitelist: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Filters, one CIDR per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stats JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Also solve for every F in `a:b:step` and emit `f,cd` rows.
    #[arg(long, value_name = "A:B:STEP")]
    pub sweep_f: Option<SweepRange>,
    /// Where sweep rows go; standard output if absent.
    #[arg(long, requires = "sweep_f")]
    pub sweep_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    #[command(flatten)]
    pub lists: ListArgs,
    #[arg(long)]
    pub fmax: usize,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BlockProblem {
    BlockAll,
    BlockSome,
}

#[derive(Debug, Args)]
pub struct TimevaryArgs {
    #[command(flatten)]
    pub lists: ListArgs,
    #[arg(long)]
    pub fmax: usize,
    #[arg(long, value_enum, default_value = "block-all")]
    pub problem: BlockProblem,
    /// `ADD ip weight`, `DEL ip` or `ADJ ip weight bad|good` per line.
    #[arg(long)]
    pub deltas: PathBuf,
    /// Per-step CSV `step,cd,benefit,filters_used,recomputed`.
    #[arg(long)]
    pub steps: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FloodingArgs {
    #[arg(long)]
    pub blacklist: PathBuf,
    #[arg(long)]
    pub whitelist: PathBuf,
    #[arg(long)]
    pub fmax: usize,
    #[arg(long)]
    pub capacity: u64,
    /// Capacity grid step; 1 is exact.
    #[arg(long, default_value_t = 1)]
    pub delta_c: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub blacklist: PathBuf,
    #[arg(long)]
    pub whitelist: PathBuf,
    /// EDGE / ROUTER / VICTIM / INGRESS lines.
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 3)]
    pub stable_iters: usize,
    /// Per-iteration CSV `iter,dual,primal_cd,violations`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// `router cidr` lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    BlockAll,
    BlockSome,
    Flooding,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub problem: OracleKind,
    #[command(flatten)]
    pub lists: ListArgs,
    #[arg(long)]
    pub fmax: usize,
    /// Required for flooding.
    #[arg(long)]
    pub capacity: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Kmeans,
    Uniform,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[command(flatten)]
    pub lists: ListArgs,
    /// Required for kmeans.
    #[arg(long)]
    pub fmax: Option<usize>,
    /// Required for uniform.
    #[arg(long)]
    pub capacity: Option<u64>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Required for kmeans.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n_bad: usize,
    #[arg(long, default_value_t = 0)]
    pub n_good: usize,
    /// In [0, 1].
    #[arg(long, default_value_t = 0.9)]
    pub clustering: f64,
    #[arg(long, default_value_t = 1)]
    pub max_weight: u64,
    #[arg(long)]
    pub blacklist_out: PathBuf,
    #[arg(long)]
    pub whitelist_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub lists: ListArgs,
    /// Build over both lists as leaves, as for flooding.
    #[arg(long)]
    pub traffic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub lists: ListArgs,
    #[arg(long)]
    pub filters: PathBuf,
    /// Stats to check against; the recomputed stats are printed either way.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DshieldArgs {
    /// Lines of `timestamp,contributor_id,src_ip,dst_ip`.
    #[arg(long)]
    pub log: PathBuf,
    /// `YYYY-MM-DD`.
    #[arg(long)]
    pub day: Option<String>,
    #[arg(long)]
    pub victim_contributor: Option<String>,
    /// Blacklist CSV; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `a:b:step` with `a <= b` and `step >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl SweepRange {
    pub fn values(self) -> impl Iterator<Item = usize> {
        (self.start..=self.end).step_by(self.step)
    }
}

impl FromStr for SweepRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err("expected a:b:step".into());
        };
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        let r = SweepRange {
            start: num(a)?,
            end: num(b)?,
            step: num(step)?,
        };
        if r.step == 0 || r.start > r.end {
            return Err("need a <= b and step >= 1".into());
        }
        Ok(r)
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// 2 for infeasibility, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::InfeasibleBudget(_) | Error::NoFeasiblePrimal) => 2,
        _ => 1,
    }
}

pub fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::BlockAll(a) => run_block(a, Problem::BlockAll),
        Command::BlockSome(a) => run_block(a, Problem::BlockSome),
        Command::Timevary(a) => run_timevary(a),
        Command::Flooding(a) => run_flooding(a),
        Command::DistFlooding(a) => run_dist(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Gen(a) => run_gen(a),
        Command::LcpDump(a) => run_dump(a),
        Command::Verify(a) => run_verify(a),
        Command::Dshield(a) => run_dshield(a),
    }
}

struct Instance {
    bad: WeightedAddressSet,
    white: WhitelistMode,
}

impl Instance {
    fn n_good(&self) -> Option<usize> {
        match &self.white {
            WhitelistMode::Explicit(w) => Some(w.len()),
            WhitelistMode::ImplicitUnit => None,
        }
    }
}

fn load(lists: &ListArgs) -> anyhow::Result<Instance> {
    if lists.whitelist.is_none() && !lists.implicit_whitelist {
        bail!("one of --whitelist or --implicit-whitelist is required");
    }
    let (bad, good) = formats::read_lists(&lists.blacklist, lists.whitelist.as_deref())?;
    let white = good.map_or(WhitelistMode::ImplicitUnit, WhitelistMode::Explicit);
    Ok(Instance { bad, white })
}

fn load_explicit(blacklist: &Path, whitelist: &Path) -> anyhow::Result<(WeightedAddressSet, WeightedAddressSet)> {
    let (bad, good) = formats::read_lists(blacklist, Some(whitelist))?;
    Ok((bad, good.expect("whitelist path given")))
}

fn problem_name(p: Problem) -> &'static str {
    match p {
        Problem::BlockAll => "block-all",
        Problem::BlockSome => "block-some",
    }
}

fn stats_for(
    problem: &str,
    n_bad: usize,
    n_good: Option<usize>,
    f_max: usize,
    sol: &FilterSolution,
    runtime_ms: f64,
) -> Stats {
    Stats {
        problem: problem.into(),
        n_bad,
        n_good,
        f_max,
        capacity: None,
        collateral_damage: Metric::Exact(sol.collateral_damage),
        benefit: sol.benefit,
        unblocked_bad: sol.unblocked_bad,
        residual_traffic: sol.residual_traffic,
        filters_used: sol.filters_used,
        runtime_ms,
        extra: BTreeMap::new(),
    }
}

fn write_outputs(output: &OutputArgs, filters: &[Prefix], stats: &Stats) -> anyhow::Result<()> {
    if let Some(p) = &output.out {
        formats::write_file(p, &formats::format_filters(filters))?;
    }
    match &output.stats {
        Some(p) => formats::write_file(p, &stats.to_json())?,
        None if output.out.is_none() => formats::emit(None, &formats::format_filters(filters))?,
        None => {}
    }
    Ok(())
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn emit_sweep(sweep: &SweepArgs, rows: &[(usize, Metric)]) -> anyhow::Result<()> {
    formats::emit(sweep.sweep_out.as_deref(), &formats::format_sweep(rows))?;
    Ok(())
}

fn run_block(a: BlockArgs, problem: Problem) -> anyhow::Result<()> {
    let inst = load(&a.lists)?;
    if problem == Problem::BlockAll && a.fmax < 1 {
        return Err(Error::InfeasibleBudget(a.fmax).into());
    }
    let t = Instant::now();
    let tree = LcpTree::build(&inst.bad, &inst.white)?;
    let tables = compute_tables(&tree, problem, a.fmax);
    let sol = solution_from_tables(&tree, &tables);
    let stats = stats_for(
        problem_name(problem),
        inst.bad.len(),
        inst.n_good(),
        a.fmax,
        &sol,
        elapsed_ms(t),
    );
    write_outputs(&a.output, &sol.filters, &stats)?;

    if let Some(range) = a.sweep.sweep_f {
        if problem == Problem::BlockAll && range.start < 1 {
            return Err(Error::InfeasibleBudget(0).into());
        }
        let tables = compute_tables(&tree, problem, range.end);
        let rows: Vec<(usize, Metric)> = range
            .values()
            .map(|f| {
                let s = FilterSolution::evaluate(reconstruct_filters(&tree, &tables, f), &inst.bad, &inst.white);
                (f, Metric::Exact(s.collateral_damage))
            })
            .collect();
        emit_sweep(&a.sweep, &rows)?;
    }
    Ok(())
}

fn run_timevary(a: TimevaryArgs) -> anyhow::Result<()> {
    let inst = load(&a.lists)?;
    let deltas = formats::read_deltas(&a.deltas)?;
    let problem = match a.problem {
        BlockProblem::BlockAll => Problem::BlockAll,
        BlockProblem::BlockSome => Problem::BlockSome,
    };
    let t = Instant::now();
    let mut solver = DynamicSolver::new(&inst.bad, &inst.white, problem, a.fmax)?;
    let mut rows = String::from("step,cd,benefit,filters_used,recomputed\n");
    let mut max_recomputed = 0;
    for (i, &d) in deltas.iter().enumerate() {
        let sol = solver
            .apply_delta(d)
            .with_context(|| format!("delta {} ({d:?})", i + 1))?
            .clone();
        rows += &format!(
            "{},{},{},{},{}\n",
            i + 1,
            sol.collateral_damage,
            sol.benefit,
            sol.filters_used,
            solver.last_recomputed()
        );
        max_recomputed = max_recomputed.max(solver.last_recomputed());
    }
    let runtime = elapsed_ms(t);
    if let Some(p) = &a.steps {
        formats::write_file(p, &rows)?;
    }
    let sol = solver.current();
    let n_bad = solver
        .tree()
        .leaves()
        .filter(|&(_, id)| solver.tree().node(id).bad() > 0)
        .count();
    let mut stats = stats_for(problem_name(problem), n_bad, inst.n_good(), a.fmax, sol, runtime);
    stats.extra.insert("deltas".into(), json!(deltas.len()));
    stats.extra.insert("max_recomputed".into(), json!(max_recomputed));
    write_outputs(&a.output, &sol.filters, &stats)
}

fn run_flooding(a: FloodingArgs) -> anyhow::Result<()> {
    let (bad, good) = load_explicit(&a.blacklist, &a.whitelist)?;
    let inst = FloodingInstance::new(bad, good, a.fmax, a.capacity)?;
    let t = Instant::now();
    let sol = solve_flooding_coarse(&inst, a.delta_c)?;
    let mut stats = stats_for(
        "flooding",
        inst.bad().len(),
        Some(inst.good().len()),
        a.fmax,
        &sol,
        elapsed_ms(t),
    );
    stats.capacity = Some(a.capacity);
    stats.extra.insert("delta_c".into(), json!(a.delta_c));
    write_outputs(&a.output, &sol.filters, &stats)?;

    if let Some(range) = a.sweep.sweep_f {
        let mut rows = Vec::new();
        for f in range.values() {
            let s = solve_flooding_coarse(&inst.with_fmax(f), a.delta_c)?;
            rows.push((f, Metric::Exact(s.collateral_damage)));
        }
        emit_sweep(&a.sweep, &rows)?;
    }
    Ok(())
}

fn run_dist(a: DistArgs) -> anyhow::Result<()> {
    let (bad, good) = load_explicit(&a.blacklist, &a.whitelist)?;
    let topo = formats::read_topology(&a.topology)?;
    let config = DistConfig {
        alpha: a.alpha,
        max_iter: a.max_iter,
        stable_iters: a.stable_iters,
    };
    let t = Instant::now();
    let sol = solve_dist_flooding(&topo, &bad, &good, &config)?;
    let runtime = elapsed_ms(t);

    let filters: BTreeMap<_, _> = sol.routers.iter().map(|(&u, s)| (u, s.filters.clone())).collect();
    let text = formats::format_router_filters(&filters);
    if let Some(p) = &a.out {
        formats::write_file(p, &text)?;
    }
    if let Some(p) = &a.trace {
        formats::write_file(p, &formats::format_trace(&sol.trace))?;
    }
    let benefit = sol.routers.values().map(|s| s.benefit).sum();
    let blocked_bad: u64 = bad
        .iter()
        .filter(|&(ip, _)| filters.values().flatten().any(|p| p.covers(ip)))
        .map(|(_, w)| w)
        .sum();
    let total_bad: u64 = bad.iter().map(|(_, w)| w).sum();
    let stats = Stats {
        problem: "dist-flooding".into(),
        n_bad: bad.len(),
        n_good: Some(good.len()),
        f_max: topo.routers().values().map(|s| s.fmax).sum(),
        capacity: None,
        collateral_damage: Metric::Exact(sol.collateral_damage),
        benefit,
        unblocked_bad: total_bad - blocked_bad,
        residual_traffic: None,
        filters_used: filters.values().map(Vec::len).sum(),
        runtime_ms: runtime,
        extra: BTreeMap::from([
            ("objective".into(), json!(sol.objective)),
            ("best_iter".into(), json!(sol.best_iter)),
            ("iterations".into(), json!(sol.trace.len())),
            ("uncoordinated_cd".into(), json!(sol.uncoordinated_cd)),
            ("uncoordinated_objective".into(), json!(sol.uncoordinated_objective)),
            ("weak_duality".into(), json!(sol.weak_duality_holds())),
        ]),
    };
    match &a.stats {
        Some(p) => formats::write_file(p, &stats.to_json())?,
        None if a.out.is_none() => formats::emit(None, &text)?,
        None => {}
    }
    Ok(())
}

fn run_oracle(a: OracleArgs) -> anyhow::Result<()> {
    let t = Instant::now();
    let (problem, inst, n_good, name) = match a.problem {
        OracleKind::Flooding => {
            let Some(capacity) = a.capacity else {
                bail!("--capacity is required for flooding");
            };
            let Some(white) = &a.lists.whitelist else {
                bail!("flooding needs an explicit --whitelist");
            };
            let (bad, good) = load_explicit(&a.lists.blacklist, white)?;
            let n_good = good.len();
            let fi = FloodingInstance::new(bad, good, a.fmax, capacity)?;
            (
                OracleProblem::Flooding,
                OracleInstance::flooding(&fi),
                Some(n_good),
                "flooding",
            )
        }
        kind => {
            let i = load(&a.lists)?;
            let n_good = i.n_good();
            let (p, name) = if kind == OracleKind::BlockAll {
                (OracleProblem::BlockAll, "block-all")
            } else {
                (OracleProblem::BlockSome, "block-some")
            };
            (p, OracleInstance::blocking(i.bad, i.white, a.fmax), n_good, name)
        }
    };
    let out = oracle_solve(problem, &inst, &OracleBudget::default())?;
    if out.value.is_none() {
        return Err(Error::InfeasibleBudget(a.fmax).into());
    }
    let sol = match &inst.white {
        WhitelistMode::Explicit(good) if problem == OracleProblem::Flooding => {
            FilterSolution::evaluate_traffic(out.filters, &inst.bad, good)
        }
        white => FilterSolution::evaluate(out.filters, &inst.bad, white),
    };
    let mut stats = stats_for(name, inst.bad.len(), n_good, a.fmax, &sol, elapsed_ms(t));
    stats.capacity = a.capacity.filter(|_| problem == OracleProblem::Flooding);
    write_outputs(&a.output, &sol.filters, &stats)
}

fn run_baseline(a: BaselineArgs) -> anyhow::Result<()> {
    match a.method {
        BaselineMethod::Kmeans => {
            let (Some(fmax), Some(seed)) = (a.fmax, a.seed) else {
                bail!("kmeans needs --fmax and --seed");
            };
            let inst = load(&a.lists)?;
            let t = Instant::now();
            let sol = kmeans_prefix_baseline(&inst.bad, &inst.white, fmax, a.runs, seed)?;
            let mut stats = stats_for(
                "baseline-kmeans",
                inst.bad.len(),
                inst.n_good(),
                fmax,
                &sol,
                elapsed_ms(t),
            );
            stats.extra.insert("runs".into(), json!(a.runs));
            stats.extra.insert("seed".into(), json!(seed));
            write_outputs(&a.output, &sol.filters, &stats)?;
            if let Some(range) = a.sweep.sweep_f {
                let mut rows = Vec::new();
                for f in range.values() {
                    let s = kmeans_prefix_baseline(&inst.bad, &inst.white, f, a.runs, seed)?;
                    rows.push((f, Metric::Exact(s.collateral_damage)));
                }
                emit_sweep(&a.sweep, &rows)?;
            }
        }
        BaselineMethod::Uniform => {
            let Some(capacity) = a.capacity else {
                bail!("uniform needs --capacity");
            };
            let Some(white) = &a.lists.whitelist else {
                bail!("uniform needs an explicit --whitelist");
            };
            if a.sweep.sweep_f.is_some() {
                bail!("uniform rate limiting uses no filters; --sweep-f does not apply");
            }
            let (bad, good) = load_explicit(&a.lists.blacklist, white)?;
            let inst = FloodingInstance::new(bad, good, a.fmax.unwrap_or(0), capacity)?;
            let t = Instant::now();
            let r = uniform_rate_limit(&inst);
            let total_bad: u64 = inst.bad().iter().map(|(_, w)| w).sum();
            let benefit = (total_bad as f64 * r.drop_fraction).round() as u64;
            let stats = Stats {
                problem: "baseline-uniform".into(),
                n_bad: inst.bad().len(),
                n_good: Some(inst.good().len()),
                f_max: 0,
                capacity: Some(capacity),
                collateral_damage: Metric::Fractional(r.collateral_damage),
                benefit,
                unblocked_bad: total_bad - benefit,
                residual_traffic: Some(r.residual_traffic),
                filters_used: 0,
                runtime_ms: elapsed_ms(t),
                extra: BTreeMap::from([("drop_fraction".into(), json!(r.drop_fraction))]),
            };
            write_outputs(&a.output, &[], &stats)?;
        }
    }
    Ok(())
}

fn run_gen(a: GenArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&a.clustering) {
        bail!("--clustering must lie in [0, 1]");
    }
    if a.max_weight < 1 {
        bail!("--max-weight must be at least 1");
    }
    if a.n_good > 0 && a.whitelist_out.is_none() {
        bail!("--n-good > 0 needs --whitelist-out");
    }
    let s = generate_synthetic(&SyntheticConfig {
        seed: a.seed,
        n_bad: a.n_bad,
        n_good: a.n_good,
        clustering: a.clustering,
        max_weight: a.max_weight,
    });
    formats::write_file(&a.blacklist_out, &formats::format_weighted_list(&s.bad))?;
    if let Some(p) = &a.whitelist_out {
        formats::write_file(p, &formats::format_weighted_list(&s.good))?;
    }
    Ok(())
}

fn run_dump(a: DumpArgs) -> anyhow::Result<()> {
    let tree = if a.traffic {
        let Some(white) = &a.lists.whitelist else {
            bail!("--traffic needs an explicit --whitelist");
        };
        let (bad, good) = load_explicit(&a.lists.blacklist, white)?;
        LcpTree::build_traffic(&bad, &good)?
    } else {
        let inst = load(&a.lists)?;
        LcpTree::build(&inst.bad, &inst.white)?
    };
    formats::emit(a.out.as_deref(), &tree.dump())?;
    Ok(())
}

fn run_verify(a: VerifyArgs) -> anyhow::Result<()> {
    let inst = load(&a.lists)?;
    let filters = formats::read_filters(&a.filters)?;
    if !lcpfilter_core::model::prefixes_disjoint(&filters) {
        bail!("{}: filters overlap", a.filters.display());
    }
    let expected = a.stats.as_deref().map(formats::read_stats).transpose()?;
    let traffic = expected.as_ref().is_some_and(|s| s.residual_traffic.is_some());
    let sol = match &inst.white {
        WhitelistMode::Explicit(good) if traffic => FilterSolution::evaluate_traffic(filters, &inst.bad, good),
        white => FilterSolution::evaluate(filters, &inst.bad, white),
    };
    let problem = expected.as_ref().map_or("verify".to_owned(), |s| s.problem.clone());
    let f_max = expected.as_ref().map_or(sol.filters_used, |s| s.f_max);
    let mut got = stats_for(&problem, inst.bad.len(), inst.n_good(), f_max, &sol, 0.0);
    got.capacity = expected.as_ref().and_then(|s| s.capacity);
    formats::emit(None, &got.to_json())?;

    if let Some(exp) = expected {
        let mismatches: Vec<String> = [
            ("collateral_damage", exp.collateral_damage == got.collateral_damage),
            ("benefit", exp.benefit == got.benefit),
            ("unblocked_bad", exp.unblocked_bad == got.unblocked_bad),
            ("residual_traffic", exp.residual_traffic == got.residual_traffic),
            ("filters_used", exp.filters_used == got.filters_used),
            ("n_bad", exp.n_bad == got.n_bad),
            ("n_good", exp.n_good == got.n_good),
        ]
        .into_iter()
        .filter(|&(_, ok)| !ok)
        .map(|(k, _)| k.to_owned())
        .collect();
        if !mismatches.is_empty() {
            bail!("stats differ in {}", mismatches.join(", "));
        }
    }
    Ok(())
}

fn run_dshield(a: DshieldArgs) -> anyhow::Result<()> {
    let filter = ReportFilter {
        day: a.day,
        contributor: a.victim_contributor,
    };
    let log = read_report_log(&a.log, &filter)?;
    for w in &log.warnings {
        eprintln!("warning: {}:{w}", a.log.display());
    }
    if log.malformed > log.warnings.len() as u64 {
        eprintln!(
            "warning: {} more malformed lines",
            log.malformed - log.warnings.len() as u64
        );
    }
    formats::emit(a.out.as_deref(), &formats::format_weighted_list(&log.blacklist))?;
    Ok(())
}
