//! Batch front end: one command, one JSON run config, one output directory.
//!
//! Every command writes its CSV files and a `metadata.json` that echoes the
//! run config (with the effective seed) and the resolved instance. Exit
//! codes: 0 success, 1 invalid input, 2 numerical failure, 3 a checked
//! property failed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{InstanceConfig, LoadedRun, RunConfig};
use crate::control::{check_admissible, optimize_with, OptimizeOptions, DEFAULT_STARTS};
use crate::error::{Error, Result};
use crate::inclusion::{
    factorial_envelope, filippov_construct, sample_solution_set, solve_forced, tau_values, validate_multimap,
    FilippovOptions, SelectionStrategy, Trajectory,
};
use crate::io::{write_atomic, write_json, Cell, Csv};
use crate::operators::{smallness_check, validate_hypotheses, Verdict};
use crate::pgconv::{default_functionals, run_pg_experiment, sine_forcing};
use crate::sensitivity::{
    continuity_report, q_liminf_construct, sweep_value, usc_report, SequenceReport, DEFAULT_SET_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

/// Environment variable with the worker-thread count.
pub const WORKERS_ENV: &str = "EVINC_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    SampleSet,
    Filippov,
    Optimize,
    Sweep,
    Continuity,
    Usc,
    Qliminf,
    Pgconv,
    Validate,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Solve,
        Command::SampleSet,
        Command::Filippov,
        Command::Optimize,
        Command::Sweep,
        Command::Continuity,
        Command::Usc,
        Command::Qliminf,
        Command::Pgconv,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SampleSet => "sample-set",
            Command::Filippov => "filippov",
            Command::Optimize => "optimize",
            Command::Sweep => "sweep",
            Command::Continuity => "continuity",
            Command::Usc => "usc",
            Command::Qliminf => "qliminf",
            Command::Pgconv => "pgconv",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command `{s}`")))
    }
}

/// One invocation of the front end.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub verbose: bool,
}

/// Result of a command that ran to completion.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    /// A checked property failed; the message says which.
    Fail(String),
}

struct Output {
    files: Vec<(String, String)>,
    summary: Value,
    outcome: Outcome,
    /// Set when the run produced partial results worth keeping on disk.
    error: Option<Error>,
}

impl Output {
    fn new(summary: Value, outcome: Outcome) -> Self {
        Output {
            files: Vec::new(),
            summary,
            outcome,
            error: None,
        }
    }

    fn file(mut self, name: &str, csv: Csv) -> Self {
        self.files.push((name.to_string(), csv.as_str().to_string()));
        self
    }
}

fn verdict(ok: bool, what: &str) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail(what.to_string())
    }
}

fn trajectory_csv(x: &Trajectory<f64>, selections: Option<&[Vec<f64>]>) -> Csv {
    let n = x.dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    if selections.is_some() {
        header.extend((0..n).map(|i| format!("f_{i}")));
    }
    let mut csv = Csv::new(&header);
    for (k, s) in x.states.iter().enumerate() {
        let mut row = vec![Cell::F(x.grid.t(k))];
        row.extend(s.iter().map(|&v| Cell::F(v)));
        if let Some(f) = selections {
            row.extend(f[k].iter().map(|&v| Cell::F(v)));
        }
        csv.row(&row);
    }
    csv
}

fn sequence_csv(r: &SequenceReport<f64>) -> Csv {
    let mut csv = Csv::new(&["n", "dist", "value_gap", "e_n", "pass"]);
    for e in &r.entries {
        let e_n = e.e_n.map(crate::io::fmt_float).unwrap_or_default();
        csv.row(&[Cell::I(e.n), Cell::F(e.dist), Cell::F(e.value_gap), Cell::S(&e_n), Cell::B(e.pass)]);
    }
    csv
}

fn sequence_summary(r: &SequenceReport<f64>) -> Value {
    json!({
        "target_value": r.target_value,
        "tolerance": r.tolerance,
        "noise_floor": r.noise_floor,
        "trend_ok": r.trend_ok,
        "final_ok": r.final_ok,
        "pass": r.pass,
    })
}

fn dispatch(command: Command, run: &LoadedRun) -> Result<Output> {
    let cfg = &run.run;
    let seed = cfg.seed;
    match command {
        Command::Solve | Command::SampleSet => {
            let prob = run.problem()?;
            let inst = run.instance()?;
            let op = prob.operator.at(inst.lambda)?;
            let count = if command == Command::Solve { 1 } else { cfg.count.unwrap_or(8) };
            let strategy = cfg.strategy.unwrap_or(SelectionStrategy::MinimalNorm);
            let samples = sample_solution_set(&op, &prob.map, &inst.xi, inst.lambda, &prob.grid, strategy, count, seed, prob.tol)?;
            if command == Command::Solve {
                let s = &samples[0];
                let summary = json!({ "steps": prob.grid.steps(), "terminal": s.trajectory.terminal() });
                Ok(Output::new(summary, Outcome::Pass).file("trajectory.csv", trajectory_csv(&s.trajectory, Some(&s.selections))))
            } else {
                let n = prob.dim();
                let mut header = vec!["sample".to_string(), "t".to_string()];
                header.extend((0..n).map(|i| format!("x_{i}")));
                let mut csv = Csv::new(&header);
                for (j, s) in samples.iter().enumerate() {
                    for (k, x) in s.trajectory.states.iter().enumerate() {
                        let mut row = vec![Cell::I(j), Cell::F(prob.grid.t(k))];
                        row.extend(x.iter().map(|&v| Cell::F(v)));
                        csv.row(&row);
                    }
                }
                Ok(Output::new(json!({ "count": count, "strategy": strategy }), Outcome::Pass).file("samples.csv", csv))
            }
        }
        Command::Filippov => {
            let prob = run.problem()?;
            let inst = run.instance()?;
            let fc = cfg.filippov.as_ref().ok_or_else(|| Error::invalid("filippov needs a `filippov` section"))?;
            let op = prob.operator.at(inst.lambda)?;
            let h = vec![fc.forcing.clone(); prob.grid.len()];
            let reference = solve_forced(&op, &h, &inst.xi, &prob.grid, prob.tol)?;
            let mut opts = FilippovOptions::new(fc.epsilon);
            opts.tol = prob.tol;
            if let Some(m) = fc.max_iter {
                opts.max_iter = m;
            }
            let out = filippov_construct(&op, &prob.map, &reference, &h, None, inst.lambda, &opts)?;
            let c = &out.certificate;
            let mut cert = Csv::new(&["t", "tau", "defect", "bound", "deviation", "pass"]);
            for k in 0..c.times.len() {
                cert.row(&[
                    Cell::F(c.times[k]),
                    Cell::F(c.tau[k]),
                    Cell::F(c.defect[k]),
                    Cell::F(c.bound[k]),
                    Cell::F(c.deviation[k]),
                    Cell::B(c.pass[k]),
                ]);
            }
            let tau = tau_values(&prob.map.lipschitz(), &prob.grid);
            let tau_b = tau[tau.len() - 1];
            let eta_l1 = prob.grid.right_sum(&c.defect);
            let b = prob.grid.horizon();
            let mut iters = Csv::new(&["n", "gap", "envelope"]);
            for (i, &g) in out.gaps.iter().enumerate() {
                let env = factorial_envelope(i + 1, tau_b, eta_l1, b, fc.epsilon);
                iters.row(&[Cell::I(i + 1), Cell::F(g), Cell::F(env)]);
            }
            let summary = json!({
                "iterations": out.gaps.len(),
                "all_pass": c.all_pass(),
                "max_deviation": c.deviation.iter().copied().fold(0.0, f64::max),
                "max_bound": c.bound.iter().copied().fold(0.0, f64::max),
            });
            Ok(Output::new(summary, verdict(c.all_pass(), "Filippov deviation exceeds the certificate bound"))
                .file("certificate.csv", cert)
                .file("iterates.csv", iters)
                .file("trajectory.csv", trajectory_csv(&out.trajectory, Some(&out.selections))))
        }
        Command::Optimize => {
            let prob = run.problem()?;
            let inst = run.instance()?;
            let opts = OptimizeOptions {
                budget: cfg.budget,
                starts: cfg.starts.unwrap_or(DEFAULT_STARTS),
                seed,
            };
            let r = optimize_with(&prob, &inst.xi, inst.lambda, &opts)?;
            let tol = cfg.tolerances.admissible.unwrap_or(10.0 * prob.tol);
            let rep = check_admissible(&prob, &r.pair, &inst.xi, inst.lambda, tol)?;
            let n = prob.dim();
            let mut header = vec!["t".to_string()];
            header.extend((0..n).map(|i| format!("x_{i}")));
            header.extend((0..n).map(|i| format!("u_{i}")));
            header.push("inclusion_residual".into());
            header.push("constraint_residual".into());
            let mut csv = Csv::new(&header);
            for k in 0..prob.grid.len() {
                let mut row = vec![Cell::F(prob.grid.t(k))];
                row.extend(r.pair.state.states[k].iter().map(|&v| Cell::F(v)));
                row.extend(r.pair.control[k].iter().map(|&v| Cell::F(v)));
                row.push(Cell::F(rep.inclusion_residual[k]));
                row.push(Cell::F(rep.constraint_residual[k]));
                csv.row(&row);
            }
            let summary = json!({
                "m_hat": r.m_hat,
                "converged": r.converged,
                "sweeps": r.sweeps,
                "best_start": r.start,
                "max_inclusion_residual": rep.max_inclusion,
                "max_constraint_residual": rep.max_constraint,
                "admissible": rep.pass,
            });
            Ok(Output::new(summary, verdict(rep.pass, "optimal pair failed the admissibility check")).file("pair.csv", csv))
        }
        Command::Sweep => {
            let prob = run.problem()?;
            let inst = run.instance()?;
            let xi_grid = cfg.xi_grid.clone().unwrap_or_else(|| vec![inst.xi.clone()]);
            let lambda_grid = cfg.lambda_grid.clone().unwrap_or_else(|| vec![inst.lambda]);
            let s = sweep_value(&prob, &xi_grid, &lambda_grid, cfg.budget, seed)?;
            let n = prob.dim();
            let mut header: Vec<String> = (0..n).map(|i| format!("xi_{i}")).collect();
            header.extend(["lambda", "m_hat", "budget", "seed"].map(String::from));
            let mut csv = Csv::new(&header);
            for e in &s.entries {
                let mut row: Vec<Cell> = e.xi.iter().map(|&v| Cell::F(v)).collect();
                row.extend([Cell::F(e.lambda), Cell::F(e.m_hat), Cell::I(s.budget), Cell::U(e.seed)]);
                csv.row(&row);
            }
            let failed: Vec<Value> = s
                .entries
                .iter()
                .enumerate()
                .filter_map(|(i, e)| e.error.as_ref().map(|m| json!({ "index": i, "error": m })))
                .collect();
            let summary = json!({ "points": s.entries.len(), "failed": failed });
            let mut out = Output::new(summary, Outcome::Pass).file("surface.csv", csv);
            if !failed.is_empty() {
                out.error = Some(Error::Internal(format!("{} sweep point(s) failed", failed.len())));
            }
            Ok(out)
        }
        Command::Continuity | Command::Usc => {
            let prob = run.problem()?;
            let target = run.target()?;
            let seq = cfg
                .sequence
                .as_ref()
                .ok_or_else(|| Error::invalid("this command needs a `sequence`"))?
                .build(&target)?;
            let r = if command == Command::Continuity {
                continuity_report(&prob, &target, &seq, cfg.budget, seed)?
            } else {
                usc_report(
                    &prob,
                    &target,
                    &seq,
                    cfg.budget,
                    cfg.count.unwrap_or(3),
                    cfg.gap.unwrap_or(1e-3),
                    cfg.tolerances.set.unwrap_or(DEFAULT_SET_TOL),
                    seed,
                )?
            };
            let what = if command == Command::Continuity {
                "value gaps fail the trend or final tolerance"
            } else {
                "optimal-set distances fail the trend or final tolerance"
            };
            Ok(Output::new(sequence_summary(&r), verdict(r.pass, what)).file("sequence.csv", sequence_csv(&r)))
        }
        Command::Qliminf => {
            let prob = run.problem()?;
            let target = run.target()?;
            let seq = cfg
                .sequence
                .as_ref()
                .ok_or_else(|| Error::invalid("qliminf needs a `sequence`"))?
                .build(&target)?;
            let opts = OptimizeOptions {
                budget: cfg.budget,
                starts: cfg.starts.unwrap_or(DEFAULT_STARTS),
                seed,
            };
            let pair = optimize_with(&prob, &target.xi, target.lambda, &opts)?.pair;
            let entries = q_liminf_construct(&prob, &pair, &target, &seq)?;
            let mut csv = Csv::new(&[
                "n",
                "dist",
                "state_gap",
                "control_gap",
                "certificate_bound",
                "flow_bound",
                "admissible",
                "pass",
            ]);
            for e in &entries {
                csv.row(&[
                    Cell::I(e.n),
                    Cell::F(e.dist),
                    Cell::F(e.state_gap),
                    Cell::F(e.control_gap),
                    Cell::F(e.certificate_bound),
                    Cell::F(e.flow_bound),
                    Cell::B(e.admissible),
                    Cell::B(e.pass),
                ]);
            }
            let ok = entries.iter().all(|e| e.pass);
            Ok(Output::new(json!({ "points": entries.len(), "pass": ok }), verdict(ok, "a constructed pair failed its bound"))
                .file("qliminf.csv", csv))
        }
        Command::Pgconv => {
            let pg = cfg.pgconv.as_ref().ok_or_else(|| Error::invalid("pgconv needs a `pgconv` section"))?;
            let family = pg.family.build()?;
            let grid = pg.grid.build()?;
            let h = sine_forcing(&family, &pg.forcing, &grid);
            let phis = default_functionals(grid.horizon(), pg.modes, pg.windows);
            let xi = vec![0.0; family.m];
            let r = run_pg_experiment(&family, &h, &xi, &grid, &pg.n_list, &phis, pg.tol)?;
            let mut csv = Csv::new(&["n", "functional_id", "pairing", "limit_pairing", "gap"]);
            for e in &r.entries {
                for (j, (p, g)) in e.pairings.iter().zip(&e.gaps).enumerate() {
                    csv.row(&[Cell::I(e.n), Cell::I(j), Cell::F(*p), Cell::F(r.limit_pairings[j]), Cell::F(*g)]);
                }
            }
            let members: Vec<Value> = r
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "n": e.n,
                        "max_gap": e.max_gap,
                        "strong_gap": e.strong_gap,
                        "gradient_norm": e.gradient_norm,
                        "error": e.error,
                    })
                })
                .collect();
            let summary = json!({
                "a_hom": r.a_hom,
                "functionals": r.functionals,
                "limit_gradient_norm": r.limit_gradient_norm,
                "energy_bound_sup": r.energy_bound_sup,
                "energy_bound_gradient": r.energy_bound_gradient,
                "members": members,
                "trend_ok": r.trend_ok,
                "final_ok": r.final_ok,
                "energy_ok": r.energy_ok,
            });
            Ok(Output::new(summary, verdict(r.pass, "pairing gaps fail the trend, tolerance or energy bound")).file("pgconv.csv", csv))
        }
        Command::Validate => {
            let prob = run.problem()?;
            let inst = run.instance()?;
            let samples = cfg.samples.unwrap_or(1000);
            let b = prob.grid.horizon();
            let op = prob.operator.at(inst.lambda)?;
            let hyp = validate_hypotheses(&op, samples, b, seed);
            let mm = validate_multimap(&prob.map, inst.lambda, b, samples, seed)?;
            let consts = op.constants();
            let (_, c3) = prob.map.growth(inst.lambda);
            let small = if c3 == 0.0 {
                true
            } else {
                smallness_check(consts.c2, c3, inst.embedding, consts.p)?
            };
            let hyp_ok = hyp.verdict == Verdict::Pass;
            let mut csv = Csv::new(&["check", "value", "pass"]);
            csv.row(&[Cell::S("monotonicity_margin"), Cell::F(hyp.monotonicity_margin), Cell::B(hyp_ok)]);
            csv.row(&[Cell::S("growth_margin"), Cell::F(hyp.growth_margin), Cell::B(hyp_ok)]);
            csv.row(&[Cell::S("coercivity_margin"), Cell::F(hyp.coercivity_margin), Cell::B(hyp_ok)]);
            csv.row(&[Cell::S("multimap_lipschitz_margin"), Cell::F(mm.lipschitz_margin), Cell::B(mm.pass)]);
            csv.row(&[Cell::S("multimap_growth_margin"), Cell::F(mm.growth_margin), Cell::B(mm.pass)]);
            csv.row(&[Cell::S("smallness_c3"), Cell::F(c3), Cell::B(small)]);
            let ok = hyp_ok && mm.pass && small;
            let summary = json!({ "hypotheses": hyp, "multimap": mm, "smallness": small, "constants": consts });
            Ok(Output::new(summary, verdict(ok, "a hypothesis check failed")).file("checks.csv", csv))
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    budget: usize,
    run: &'a RunConfig,
    instance: Option<&'a InstanceConfig>,
    outputs: Vec<&'a str>,
    outcome: &'static str,
    summary: &'a Value,
}

fn write_outputs(inv: &Invocation, run: &LoadedRun, out: &Output) -> Result<()> {
    std::fs::create_dir_all(&inv.out)?;
    for (name, text) in &out.files {
        write_atomic(&inv.out.join(name), text.as_bytes())?;
    }
    let meta = Metadata {
        tool: "evinc",
        version: env!("CARGO_PKG_VERSION"),
        command: inv.command.name(),
        seed: run.run.seed,
        budget: run.run.budget,
        run: &run.run,
        instance: run.instance.as_ref(),
        outputs: out.files.iter().map(|(n, _)| n.as_str()).collect(),
        outcome: match (&out.error, &out.outcome) {
            (Some(_), _) => "error",
            (None, Outcome::Pass) => "pass",
            (None, Outcome::Fail(_)) => "fail",
        },
        summary: &out.summary,
    };
    write_json(&inv.out.join("metadata.json"), &meta)
}

fn load(inv: &Invocation) -> Result<LoadedRun> {
    let mut run = LoadedRun::load(&inv.config)?;
    if let Some(c) = &run.run.command {
        if c != inv.command.name() {
            return Err(Error::invalid(format!(
                "config is for `{c}` but the command is `{}`",
                inv.command
            )));
        }
    }
    if let Some(s) = inv.seed {
        run.run.seed = s;
    }
    if run.run.budget == 0 {
        return Err(Error::invalid("budget must be at least 1"));
    }
    Ok(run)
}

/// Runs the command and writes its artifacts.
pub fn execute(inv: &Invocation) -> Result<Outcome> {
    let run = load(inv)?;
    if inv.verbose {
        eprintln!("evinc {}: config {}", inv.command, inv.config.display());
    }
    let mut out = dispatch(inv.command, &run)?;
    write_outputs(inv, &run, &out)?;
    match out.error.take() {
        Some(e) => Err(e),
        None => Ok(out.outcome),
    }
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// [`execute`] with diagnostics on standard error; returns the exit code.
pub fn run(inv: &Invocation) -> i32 {
    match execute(inv) {
        Ok(Outcome::Pass) => {
            if inv.verbose {
                eprintln!("evinc {}: pass ({})", inv.command, inv.out.display());
            }
            EXIT_OK
        }
        Ok(Outcome::Fail(why)) => {
            eprintln!("evinc {}: FAIL: {why}", inv.command);
            EXIT_ASSERTION
        }
        Err(e) => {
            eprintln!("evinc {}: error: {e}", inv.command);
            exit_code(&e)
        }
    }
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Path helper used by the binary: `--out` defaults to `./out/<command>`.
pub fn default_out_dir(command: Command) -> PathBuf {
    Path::new("out").join(command.name())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_roundtrip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("nope".parse::<Command>().is_err());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_INVALID);
        let e = Error::Nonconvergence { iterations: 1, residual: 1.0 }.at_node(3);
        assert_eq!(exit_code(&e), EXIT_NUMERICAL);
    }
}
