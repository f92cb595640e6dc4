//! Runner behind the `pcg` binary: loads an instance, dispatches to the solvers
//! and verifiers, and renders a table or newline-delimited JSON records.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use price_coupling::catalog::{self, CatalogEntry};
use price_coupling::gep::GepOutcome;
use price_coupling::{
    check, construct_sum_potential, construct_tm_potential, enumerate_equilibria, gep,
    parse_input, solve_e1, solve_e2_consistent, solve_t1_best_response, solve_tm,
    verify_full_potential, verify_potential, EquilibriumCertificate, EquilibriumKind, Formulation,
    Game, GameFile, GepScenario, Input, PotentialFunction, PotentialScope, SolveResult,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Solve,
    Verify,
    Enumerate,
    PotentialCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    E1,
    E2,
    T1,
    Tm,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::E1 => Formulation::AnticipativeE1,
            FormulationArg::E2 => Formulation::AnticipativeE2Consistent,
            FormulationArg::T1 => Formulation::TakingT1,
            FormulationArg::Tm => Formulation::TakingTm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    E1,
    E2,
    E2Consistent,
    T,
    Tm,
}

impl From<CheckArg> for EquilibriumKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::E1 => EquilibriumKind::E1,
            CheckArg::E2 => EquilibriumKind::E2,
            CheckArg::E2Consistent => EquilibriumKind::E2Consistent,
            CheckArg::T => EquilibriumKind::T,
            CheckArg::Tm => EquilibriumKind::Tm,
        }
    }
}

/// Command-line arguments of `pcg`.
#[derive(Debug, Clone, Parser)]
#[command(name = "pcg", version, about = "Solve and certify price-coupling games")]
pub struct Args {
    /// Game or GEP scenario file (JSON).
    #[arg(long, conflicts_with = "example")]
    pub input: Option<PathBuf>,
    /// Use a bundled instance instead of --input.
    #[arg(long)]
    pub example: Option<String>,
    /// Print the bundled instances and exit.
    #[arg(long)]
    pub list_examples: bool,
    /// Overrides the formulation given in the file.
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationArg>,
    #[arg(long, value_enum, default_value = "solve")]
    pub mode: Mode,
    /// Equilibrium notion for verify and enumerate; defaults to the formulation's own.
    #[arg(long, value_enum)]
    pub check: Option<CheckArg>,
    /// Coarse-to-fine refinement passes of the surrogate search.
    #[arg(long, default_value_t = 0)]
    pub grid: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_dev: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_sol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub multistarts: usize,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Path(PathBuf),
    Example(String),
}

/// A validated run request.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub source: Source,
    pub formulation: Option<Formulation>,
    pub check: Option<EquilibriumKind>,
    pub config: SolverConfig,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    pub mode: Mode,
}

fn kind_fits(kind: EquilibriumKind, f: Formulation) -> bool {
    match kind {
        EquilibriumKind::T | EquilibriumKind::Tm => f.is_taking(),
        EquilibriumKind::E2Consistent => f == Formulation::AnticipativeE2Consistent,
        EquilibriumKind::E1 | EquilibriumKind::E2 => !f.is_taking(),
    }
}

impl RunSpec {
    pub fn from_args(args: &Args) -> anyhow::Result<Self> {
        let source = match (&args.input, &args.example) {
            (Some(p), None) => Source::Path(p.clone()),
            (None, Some(n)) => Source::Example(n.clone()),
            _ => bail!("give exactly one of --input or --example"),
        };
        let formulation = args.formulation.map(Formulation::from);
        let check = args.check.map(EquilibriumKind::from);
        if let (Some(k), Some(f)) = (check, formulation) {
            if !kind_fits(k, f) {
                bail!("--check {} does not apply to the {f} formulation", k.name());
            }
        }
        if check.is_some() && matches!(args.mode, Mode::Solve | Mode::PotentialCheck) {
            bail!("--check applies to verify and enumerate only");
        }
        let mut config = SolverConfig {
            grid_refinements: args.grid,
            multistarts: args.multistarts,
            seed: args.seed,
            ..SolverConfig::default()
        };
        config.tol.dev = args.tol_dev;
        config.tol.sol = args.tol_sol;
        config.validate().map_err(|e| anyhow::anyhow!(e))?;
        Ok(RunSpec {
            source,
            formulation,
            check,
            config,
            output: args.output.clone(),
            format: args.format,
            mode: args.mode,
        })
    }
}

/// Exit status contract of the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Certified, holds, or enumeration finished.
    Success,
    /// Refuted, inconclusive, or a potential that fails.
    Negative,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Negative => 2,
        }
    }
}

/// Rendered output of one run.
#[derive(Debug, Clone)]
pub struct Report {
    pub status: Status,
    pub records: Vec<Value>,
    pub table: String,
}

impl Report {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Table => self.table.clone(),
            ReportFormat::Records => self
                .records
                .iter()
                .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
                .collect(),
        }
    }
}

fn load(source: &Source) -> anyhow::Result<(String, Input)> {
    match source {
        Source::Path(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))?;
            let input = parse_input(&text).with_context(|| format!("in {}", p.display()))?;
            Ok((p.display().to_string(), input))
        }
        Source::Example(name) => {
            let entry = catalog::example(name)?;
            Ok((entry.name.to_string(), entry.parse()?))
        }
    }
}

fn players_potential(file: &GameFile, game: &Game, cfg: &SolverConfig) -> anyhow::Result<PotentialFunction> {
    match construct_sum_potential(game) {
        Ok(pi) => Ok(pi),
        Err(refused) => match &file.potential {
            Some(expr) => Ok(PotentialFunction::user(expr.clone(), PotentialScope::PlayersOnly).verify(
                game,
                cfg.potential_samples,
                cfg.seed,
                &cfg.tol,
            )?),
            None => Err(anyhow::anyhow!(refused).context("no `potential` given in the file")),
        },
    }
}

fn status_of(cert: &EquilibriumCertificate<f64>) -> Status {
    if cert.is_certified() {
        Status::Success
    } else {
        Status::Negative
    }
}

fn fmt_vecs(xs: &[Vec<f64>]) -> String {
    let inner: Vec<String> = xs.iter().map(|v| fmt_vec(v)).collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_vec(v: &[f64]) -> String {
    let inner: Vec<String> = v.iter().map(|a| format!("{a}")).collect();
    format!("[{}]", inner.join(", "))
}

fn certificate_table(out: &mut String, cert: &EquilibriumCertificate<f64>) {
    let _ = writeln!(out, "check        {}", cert.kind.name());
    let _ = writeln!(out, "verdict      {:?}", cert.verdict);
    let _ = writeln!(out, "x            {}", fmt_vecs(&cert.point.x));
    let _ = writeln!(out, "p            {}", fmt_vec(cert.point.price()));
    let _ = writeln!(out, "player gaps  {}", fmt_vec(&cert.per_player_gap));
    if let Some(g) = cert.price_player_gap {
        let _ = writeln!(out, "price gap    {g}");
    }
    let _ = writeln!(out, "threshold    {}", cert.threshold);
    match &cert.witness {
        Some(w) if w.gain > cert.threshold => {
            let who = w.player.map_or("price player".to_string(), |i| format!("player {}", i + 1));
            let _ = writeln!(
                out,
                "witness      {who} moves to {} at p = {}, gain {}",
                fmt_vec(&w.action),
                fmt_vec(&w.price),
                w.gain
            );
        }
        _ => {
            let _ = writeln!(out, "witness      none");
        }
    }
}

fn solve_summary(r: &SolveResult<f64>) -> Value {
    json!({
        "method": format!("{:?}", r.method),
        "surrogate_value": r.surrogate_value,
        "iterations": r.iterations,
        "evaluations": r.evaluations,
        "converged": r.converged,
    })
}

fn solve_table(out: &mut String, r: &SolveResult<f64>) {
    let _ = writeln!(out, "method       {:?}", r.method);
    let _ = writeln!(out, "surrogate    {}", r.surrogate_value);
    let _ = writeln!(
        out,
        "iterations   {}  evaluations {}  converged {}",
        r.iterations, r.evaluations, r.converged
    );
}

fn header(name: &str, mode: Mode, f: Formulation) -> String {
    format!("instance     {name}\nmode         {mode:?} ({f})\n")
}

fn solve_game(name: &str, file: &GameFile, game: &Game, cfg: &SolverConfig) -> anyhow::Result<Report> {
    let f = game.formulation();
    let result = match f {
        Formulation::AnticipativeE1 => solve_e1(game, &players_potential(file, game, cfg)?, cfg)?,
        Formulation::AnticipativeE2Consistent => {
            solve_e2_consistent(game, &players_potential(file, game, cfg)?, cfg)?
        }
        Formulation::TakingT1 => solve_t1_best_response(game, cfg)?,
        Formulation::TakingTm => {
            let pi = players_potential(file, game, cfg)?;
            let big = construct_tm_potential(game, &pi, cfg.potential_samples, cfg.seed, &cfg.tol)?;
            solve_tm(game, &big, cfg)?
        }
    };
    let kind = EquilibriumKind::for_formulation(f);
    let cert = check(game, kind, &result.point.x, result.point.price(), cfg)?;
    let mut record = cert.to_record();
    record["instance"] = json!(name);
    record["mode"] = json!("solve");
    record["solve"] = solve_summary(&result);
    let mut table = header(name, Mode::Solve, f);
    solve_table(&mut table, &result);
    certificate_table(&mut table, &cert);
    Ok(Report {
        status: status_of(&cert),
        records: vec![record],
        table,
    })
}

fn gep_summary(out: &GepOutcome<f64>) -> Value {
    json!({
        "decisions": out.decisions,
        "prices": out.prices,
        "convexity": out.convexity,
    })
}

fn solve_gep(name: &str, s: &GepScenario, f: Formulation, cfg: &SolverConfig) -> anyhow::Result<Report> {
    let out = match f {
        Formulation::TakingT1 => gep::solve_gep_price_taking::<f64>(s, cfg)?,
        Formulation::AnticipativeE2Consistent => gep::solve_gep_anticipative::<f64>(s, cfg)?,
        other => bail!("GEP scenarios solve under t1 or e2, not {other}"),
    };
    let mut record = out.certificate.to_record();
    record["instance"] = json!(name);
    record["mode"] = json!("solve");
    record["solve"] = solve_summary(&out.result);
    record["gep"] = gep_summary(&out);
    let mut table = header(name, Mode::Solve, f);
    solve_table(&mut table, &out.result);
    for (i, d) in out.decisions.iter().enumerate() {
        let _ = writeln!(
            table,
            "company {:<4} x_c {}  x_o {}  e {}  r {}",
            i + 1,
            d.x_c,
            fmt_vec(&d.x_o),
            fmt_vec(&d.e),
            fmt_vec(&d.r)
        );
    }
    let _ = writeln!(
        table,
        "prices       reserve {}  energy {}  real-time {}",
        fmt_vec(&out.prices.reserve),
        fmt_vec(&out.prices.energy),
        fmt_vec(&out.prices.real_time)
    );
    if let Some(c) = &out.convexity {
        let _ = writeln!(table, "convex costs {}", c.all_convex());
    }
    certificate_table(&mut table, &out.certificate);
    Ok(Report {
        status: status_of(&out.certificate),
        records: vec![record],
        table,
    })
}

fn chosen_kind(spec: &RunSpec, f: Formulation) -> anyhow::Result<EquilibriumKind> {
    let kind = spec.check.unwrap_or_else(|| EquilibriumKind::for_formulation(f));
    if !kind_fits(kind, f) {
        bail!("--check {} does not apply to the {f} formulation", kind.name());
    }
    Ok(kind)
}

fn verify_game(name: &str, file: &GameFile, game: &Game, kind: EquilibriumKind, cfg: &SolverConfig) -> anyhow::Result<Report> {
    let Some((x, p)) = file.candidate::<f64>() else {
        bail!("verify mode needs a `candidate` in the input file");
    };
    let cert = check(game, kind, &x, &p, cfg)?;
    let mut record = cert.to_record();
    record["instance"] = json!(name);
    record["mode"] = json!("verify");
    let mut table = header(name, Mode::Verify, game.formulation());
    certificate_table(&mut table, &cert);
    Ok(Report {
        status: status_of(&cert),
        records: vec![record],
        table,
    })
}

fn enumerate_game(name: &str, game: &Game, kind: EquilibriumKind, cfg: &SolverConfig) -> anyhow::Result<Report> {
    let certs = enumerate_equilibria(game, kind, cfg)?;
    let records = certs
        .iter()
        .map(|c| {
            let mut r = c.to_record();
            r["instance"] = json!(name);
            r["mode"] = json!("enumerate");
            r
        })
        .collect();
    let mut table = header(name, Mode::Enumerate, game.formulation());
    let _ = writeln!(table, "check        {}", kind.name());
    let _ = writeln!(table, "equilibria   {}", certs.len());
    for c in &certs {
        let _ = writeln!(table, "  x {}  p {}", fmt_vecs(&c.point.x), fmt_vec(c.point.price()));
    }
    Ok(Report {
        status: Status::Success,
        records,
        table,
    })
}

fn potential_check(name: &str, file: Option<&GameFile>, game: &Game, cfg: &SolverConfig) -> anyhow::Result<Report> {
    let pi = match file {
        Some(file) => match construct_sum_potential(game) {
            Ok(pi) => pi,
            Err(_) => match &file.potential {
                Some(e) => PotentialFunction::user(e.clone(), PotentialScope::PlayersOnly),
                None => bail!("own terms depend on rivals and the file gives no `potential`"),
            },
        },
        None => construct_sum_potential(game)?,
    };
    let rep = verify_potential(&pi, game, cfg.potential_samples, cfg.seed, &cfg.tol);
    let mut holds = rep.holds;
    let mut record = json!({
        "instance": name,
        "mode": "potential-check",
        "potential": pi.pi.to_string(),
        "holds": rep.holds,
        "max_violation": rep.max_violation,
        "samples": rep.samples,
    });
    let mut table = header(name, Mode::PotentialCheck, game.formulation());
    let _ = writeln!(table, "potential    {}", pi.pi);
    let _ = writeln!(table, "holds        {}  max violation {:e}  samples {}", rep.holds, rep.max_violation, rep.samples);
    if game.formulation() == Formulation::TakingTm && rep.holds {
        let verified = pi.verify(game, cfg.potential_samples, cfg.seed, &cfg.tol);
        match verified.and_then(|v| construct_tm_potential(game, &v, cfg.potential_samples, cfg.seed, &cfg.tol)) {
            Ok(big) => {
                let full = verify_full_potential(&big, game, cfg.potential_samples, cfg.seed, &cfg.tol);
                record["full_game_potential"] = json!(big.pi.to_string());
                record["full_game_max_violation"] = json!(full.max_violation);
                let _ = writeln!(table, "full game    {}  max violation {:e}", big.pi, full.max_violation);
                holds &= full.holds;
            }
            Err(e) => {
                record["full_game_potential"] = Value::Null;
                record["full_game_error"] = json!(e.to_string());
                let _ = writeln!(table, "full game    none: {e}");
                holds = false;
            }
        }
    }
    Ok(Report {
        status: if holds { Status::Success } else { Status::Negative },
        records: vec![record],
        table,
    })
}

/// Executes one run without touching standard output.
pub fn execute(spec: &RunSpec) -> anyhow::Result<Report> {
    let (name, input) = load(&spec.source)?;
    let cfg = &spec.config;
    match input {
        Input::Game(file) => {
            let game: Game = file.build(spec.formulation)?;
            let f = game.formulation();
            match spec.mode {
                Mode::Solve => solve_game(&name, &file, &game, cfg),
                Mode::Verify => verify_game(&name, &file, &game, chosen_kind(spec, f)?, cfg),
                Mode::Enumerate => enumerate_game(&name, &game, chosen_kind(spec, f)?, cfg),
                Mode::PotentialCheck => potential_check(&name, Some(&file), &game, cfg),
            }
        }
        Input::Gep(s) => {
            let f = spec.formulation.unwrap_or(Formulation::TakingT1);
            match spec.mode {
                Mode::Solve => solve_gep(&name, &s, f, cfg),
                Mode::Verify => bail!("GEP scenarios carry no candidate; use solve or enumerate"),
                Mode::Enumerate => {
                    let game: Game = gep::build_gep_game(&s, f)?;
                    enumerate_game(&name, &game, chosen_kind(spec, f)?, cfg)
                }
                Mode::PotentialCheck => {
                    let game: Game = gep::build_gep_game(&s, Formulation::AnticipativeE2Consistent)?;
                    potential_check(&name, None, &game, cfg)
                }
            }
        }
    }
}

/// Runs and writes the report; returns the exit code.
pub fn run(spec: &RunSpec, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    let report = execute(spec)?;
    let text = report.render(spec.format);
    match &spec.output {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            if spec.format == ReportFormat::Records {
                stdout.write_all(report.table.as_bytes())?;
            }
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(report.status.code())
}

pub fn list_examples(out: &mut dyn Write) -> std::io::Result<()> {
    for CatalogEntry {
        name,
        summary,
        oracle,
        expected,
        ..
    } in catalog::catalog()
    {
        writeln!(out, "{name}\n  {summary}\n  oracle:   {oracle}\n  expected: {expected}\n")?;
    }
    Ok(())
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with(args: Args, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if args.list_examples {
        return match list_examples(stdout) {
            Ok(()) => 0,
            Err(_) => 1,
        };
    }
    let outcome = RunSpec::from_args(&args).and_then(|spec| run(&spec, stdout));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}
