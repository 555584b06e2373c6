//! The pipeline phases and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fracplane_core::analysis::{
    boundary_growth, holder_seminorm, lambda_sweep, omega_limit, positivity_alternative, symmetry_verdict, Alternative,
    DecayConfig, SymmetryTolerances, Verdict,
};
use fracplane_core::fracops::{assemble_operator, FracParams, NonlocalOperator, DEFAULT_CAP};
use fracplane_core::geometry::{Domain, Grid};
use fracplane_core::io::{fmt_f64, read_operator, read_trajectory_csv, write_operator, write_trajectory_csv};
use fracplane_core::solver::{ImexStepper, Trajectory};
use sha2::{Digest, Sha256};

use crate::manifest::RunManifest;
use crate::{CliError, RunConfig};

pub const OPERATOR: &str = "operator.bin";
pub const GRID: &str = "grid.csv";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const SWEEP: &str = "sweep.csv";
pub const VERDICTS: &str = "verdicts.csv";
pub const SUMMARY: &str = "summary.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Assemble,
    Simulate,
    Sweep,
    Verify,
    Report,
    Run,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub text: String,
    pub all_pass: bool,
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    Pass,
    Fail,
    Info,
}

impl Mark {
    fn as_str(self) -> &'static str {
        match self {
            Mark::Pass => "PASS",
            Mark::Fail => "FAIL",
            Mark::Info => "INFO",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "PASS" => Some(Mark::Pass),
            "FAIL" => Some(Mark::Fail),
            "INFO" => Some(Mark::Info),
            _ => None,
        }
    }

    fn check(ok: bool) -> Self {
        if ok {
            Mark::Pass
        } else {
            Mark::Fail
        }
    }
}

/// One row of `verdicts.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub phase: String,
    pub check: String,
    pub verdict: Mark,
    pub value: f64,
    pub tolerance: f64,
    pub note: String,
}

fn row(phase: &str, check: impl Into<String>, verdict: Mark, value: f64, tolerance: f64, note: impl Into<String>) -> CheckRow {
    CheckRow { phase: phase.into(), check: check.into(), verdict, value, tolerance, note: note.into() }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

pub fn write_rows(path: &Path, rows: &[CheckRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["phase", "check", "verdict", "value", "tolerance", "note"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([&r.phase, &r.check, r.verdict.as_str(), &fmt_f64(r.value), &fmt_f64(r.tolerance), &r.note])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<CheckRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |what: &str| CliError::Config(format!("{}: malformed {what}", path.display()));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if rec.len() != 6 {
            return Err(bad("row"));
        }
        rows.push(CheckRow {
            phase: rec[0].to_string(),
            check: rec[1].to_string(),
            verdict: Mark::parse(&rec[2]).ok_or_else(|| bad("verdict"))?,
            value: rec[3].parse().map_err(|_| bad("value"))?,
            tolerance: rec[4].parse().map_err(|_| bad("tolerance"))?,
            note: rec[5].to_string(),
        });
    }
    Ok(rows)
}

const PHASE_ORDER: [&str; 2] = ["sweep", "verify"];

/// Replaces the rows of `phase` in `verdicts.csv`, keeping the others.
fn merge_rows(out: &Path, phase: &str, new: Vec<CheckRow>) -> Result<(), CliError> {
    let path = out.join(VERDICTS);
    let mut rows: Vec<CheckRow> = if path.exists() { read_rows(&path)? } else { Vec::new() };
    rows.retain(|r| r.phase != phase);
    rows.extend(new);
    rows.sort_by_key(|r| PHASE_ORDER.iter().position(|p| *p == r.phase).unwrap_or(PHASE_ORDER.len()));
    write_rows(&path, &rows)
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    seed: u64,
    threads: usize,
    domain: Domain,
    grid: Grid,
    timings: Vec<(String, f64)>,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a RunConfig, opts: &RunOptions, threads: usize) -> Result<Self, CliError> {
        let out = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output));
        std::fs::create_dir_all(&out)?;
        Ok(Pipeline {
            cfg,
            out,
            seed: opts.seed.unwrap_or(cfg.seed),
            threads,
            domain: cfg.domain()?,
            grid: cfg.grid()?,
            timings: Vec::new(),
        })
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let start = Instant::now();
        let v = f(self)?;
        self.timings.push((name.into(), start.elapsed().as_secs_f64()));
        Ok(v)
    }

    fn fingerprint(&self) -> [u8; 32] {
        let key = format!("{:?}|{:?}", self.cfg.domain, self.cfg.operator);
        Sha256::digest(key.as_bytes()).into()
    }

    fn params(&self) -> Result<FracParams, CliError> {
        Ok(FracParams::new(self.grid.dim(), self.cfg.operator.s)?)
    }

    fn assemble(&mut self) -> Result<NonlocalOperator, CliError> {
        let op = assemble_operator(&self.grid, &self.domain, &self.params()?, DEFAULT_CAP)?;
        let mut w = BufWriter::new(File::create(self.out.join(OPERATOR))?);
        write_operator(&mut w, &op, &self.fingerprint())?;
        let mut g = String::from("i,x1,x2\n");
        for (i, c) in self.grid.centers().iter().enumerate() {
            writeln!(g, "{i},{},{}", fmt_f64(c[0]), fmt_f64(c[1])).unwrap();
        }
        std::fs::write(self.out.join(GRID), g)?;
        Ok(op)
    }

    fn load_operator(&self) -> Result<NonlocalOperator, CliError> {
        let path = self.out.join(OPERATOR);
        let file = File::open(&path).map_err(|e| CliError::Config(format!("cannot open {}: {e} (run `assemble` first)", path.display())))?;
        let (op, fp) = read_operator(std::io::BufReader::new(file), &self.grid, self.cfg.operator.s)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if fp != self.fingerprint() {
            return Err(CliError::Config(format!("{} was assembled for a different domain or order", path.display())));
        }
        Ok(op)
    }

    fn simulate(&mut self, op: &NonlocalOperator) -> Result<Trajectory, CliError> {
        let u0 = self.cfg.initial_datum(&self.grid, &self.domain, self.seed);
        let f = self.cfg.nonlinearity();
        let t = &self.cfg.time;
        let traj = ImexStepper::new(op, t.dt)?.run(&u0, 0.0, self.cfg.steps(), t.snapshot_every, &f)?;
        let mut w = BufWriter::new(File::create(self.out.join(TRAJECTORY))?);
        write_trajectory_csv(&mut w, &traj)?;
        Ok(traj)
    }

    fn load_trajectory(&self) -> Result<Trajectory, CliError> {
        let path = self.out.join(TRAJECTORY);
        let file = File::open(&path).map_err(|e| CliError::Config(format!("cannot open {}: {e} (run `simulate` first)", path.display())))?;
        let traj = read_trajectory_csv(std::io::BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if traj.states.iter().any(|u| u.len() != self.grid.len()) {
            return Err(CliError::Config(format!("{} does not match the configured grid", path.display())));
        }
        Ok(traj)
    }

    fn decay_config(&self) -> DecayConfig {
        DecayConfig { burn_in: self.cfg.analysis.burn_in, ..DecayConfig::default() }
    }

    fn sweep(&mut self, traj: &Trajectory) -> Result<Vec<CheckRow>, CliError> {
        let lambdas = self.cfg.lambdas()?;
        let rep = lambda_sweep(traj, &self.grid, &lambdas, &self.decay_config())?;
        let mut table = String::from("lambda,rate,fit_residual,verdict,final_neg_sup\n");
        let mut rows = Vec::new();
        for r in &rep.reports {
            let name = format!("decay_{}", fmt_f64(r.lambda));
            let mut csv = String::from("t,neg_sup\n");
            for (t, v) in r.times.iter().zip(&r.series) {
                writeln!(csv, "{},{}", fmt_f64(*t), fmt_f64(*v)).unwrap();
            }
            std::fs::write(self.out.join(format!("{name}.csv")), csv)?;
            let last = r.series.last().copied().unwrap_or(0.0);
            writeln!(table, "{},{},{},{},{}", fmt_f64(r.lambda), fmt_f64(r.rate), fmt_f64(r.fit_residual), r.verdict.as_str(), fmt_f64(last))
                .unwrap();
            rows.push(row("sweep", name, Mark::Info, r.rate, DecayConfig::default().min_rate, r.verdict.as_str()));
        }
        std::fs::write(self.out.join(SWEEP), table)?;
        let n = rep.reports.len();
        let tail = rep.reports[n.saturating_sub(2)..].iter().filter(|r| r.verdict == Verdict::Holds).count();
        rows.push(row("sweep", "lambda0", Mark::check(rep.lambda0 <= rep.spacing * (1.0 + 1e-12)), rep.lambda0, rep.spacing, "at most one plane spacing"));
        rows.push(row("sweep", "tail_planes", Mark::check(tail == 2.min(n)), tail as f64, 2.min(n) as f64, "largest planes hold"));
        merge_rows(&self.out, "sweep", rows.clone())?;
        Ok(rows)
    }

    fn verify(&mut self, traj: &Trajectory) -> Result<Vec<CheckRow>, CliError> {
        let a = &self.cfg.analysis;
        let horizon = *traj.times.last().expect("nonempty");
        let h = self.grid.h();
        let s = self.cfg.operator.s;
        let mut rows = Vec::new();
        if a.symmetry {
            let omega = omega_limit(traj, (self.cfg.omega_start(), horizon), a.omega_tol)?;
            let u0_sup = Trajectory::sup_norm(&traj.states[0]);
            let mut tol = SymmetryTolerances::for_run(h, u0_sup);
            tol.sym = (5.0 * h).max(a.symmetry_floor);
            let verdicts = symmetry_verdict(&omega, &self.grid, &tol);
            for (i, z) in omega.profiles.iter().enumerate() {
                let mut csv = String::from("x1,x2,z\n");
                for (c, v) in self.grid.centers().iter().zip(z) {
                    writeln!(csv, "{},{},{}", fmt_f64(c[0]), fmt_f64(c[1]), fmt_f64(*v)).unwrap();
                }
                std::fs::write(self.out.join(format!("omega_{i}.csv")), csv)?;
            }
            for (i, v) in verdicts.iter().enumerate() {
                let branch = if v.zero { "zero" } else if v.monotone && v.strict { "strictly decreasing" } else { "not monotone" };
                rows.push(row("verify", format!("symmetry_profile_{i}"), Mark::check(v.pass), v.evenness_error, tol.sym, branch));
            }
            let worst = verdicts.iter().map(|v| v.evenness_error).fold(0.0, f64::max);
            rows.push(row("verify", "symmetry", Mark::check(verdicts.iter().all(|v| v.pass)), worst, tol.sym, format!("{} profiles", verdicts.len())));
            rows.push(row("verify", "omega_settled", Mark::Info, f64::from(u8::from(omega.settled)), omega.tol, "last two window snapshots within tol"));
            let lambdas = self.cfg.lambdas()?;
            let mut mixed = 0usize;
            for z in &omega.profiles {
                let atol = 1e-8 * Trajectory::sup_norm(z).max(f64::MIN_POSITIVE);
                for &l in &lambdas {
                    if positivity_alternative(z, &self.grid, l, atol)? == Alternative::Mixed {
                        mixed += 1;
                    }
                }
            }
            rows.push(row("verify", "alternative_mixed", Mark::Info, mixed as f64, 0.0, "profile/plane pairs with neither branch"));
        }
        if a.boundary_growth {
            let b = boundary_growth(traj, &self.grid, &self.domain, s, self.growth_from(horizon));
            rows.push(row("verify", "boundary_growth", Mark::check(b.sup.is_finite()), b.sup, f64::INFINITY, format!("at t = {}", fmt_f64(b.t))));
        }
        if a.holder {
            let deepest = self.grid.centers().iter().map(|c| self.domain.boundary_distance(c)).fold(0.0, f64::max);
            let region = self.grid.select(|c| self.domain.boundary_distance(c) >= 0.5 * deepest);
            let window = ((horizon - 1.0).max(self.growth_from(horizon)), horizon);
            let q = holder_seminorm(traj, &self.grid, &region, s / 2.0, s, window)?;
            rows.push(row("verify", "holder_seminorm", Mark::check(q.is_finite()), q, f64::INFINITY, "alpha = s/2 on the inner half"));
        }
        rows.push(row("verify", "range_warnings", Mark::Info, traj.range_warnings as f64, 0.0, "steps beyond the soft range tolerance"));
        merge_rows(&self.out, "verify", rows.clone())?;
        Ok(rows)
    }

    fn growth_from(&self, horizon: f64) -> f64 {
        1.0f64.min(0.5 * horizon)
    }

    fn report(&mut self) -> Result<Summary, CliError> {
        let path = self.out.join(VERDICTS);
        if !path.exists() {
            return Err(CliError::Config(format!("{} not found (run `sweep` or `verify` first)", path.display())));
        }
        let rows = read_rows(&path)?;
        let summary = render_summary(&rows, &self.out);
        std::fs::write(self.out.join(SUMMARY), &summary.text)?;
        Ok(summary)
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        RunManifest::collect(&self.out, self.cfg.to_toml(), self.seed, self.threads, self.timings.clone())?.write(&self.out)
    }
}

/// Summary text: one line per check, then the overall verdict.
pub fn render_summary(rows: &[CheckRow], out: &Path) -> Summary {
    let mut text = String::from("fracplane summary\n");
    writeln!(text, "{:<28} {:<7} {:<24} {:<24} note", "check", "verdict", "value", "tolerance").unwrap();
    for r in rows {
        writeln!(text, "{:<28} {:<7} {:<24} {:<24} {}", r.check, r.verdict.as_str(), fmt_f64(r.value), fmt_f64(r.tolerance), r.note).unwrap();
    }
    let all_pass = rows.iter().all(|r| r.verdict != Mark::Fail);
    writeln!(text, "overall {}", if all_pass { "PASS" } else { "FAIL" }).unwrap();
    Summary { text, all_pass, out: out.to_path_buf() }
}

fn phase_summary(rows: &[CheckRow], out: &Path, what: &str) -> Summary {
    let all_pass = rows.iter().all(|r| r.verdict != Mark::Fail);
    let failed: Vec<&str> = rows.iter().filter(|r| r.verdict == Mark::Fail).map(|r| r.check.as_str()).collect();
    let text = if failed.is_empty() { format!("{what}: ok\n") } else { format!("{what}: failed checks {}\n", failed.join(", ")) };
    Summary { text, all_pass, out: out.to_path_buf() }
}

fn done(out: &Path, what: &str) -> Summary {
    Summary { text: format!("{what}: ok\n"), all_pass: true, out: out.to_path_buf() }
}

/// Runs one phase (or the whole pipeline) inside a pool of `threads` workers.
pub fn execute(phase: Phase, cfg: &RunConfig, opts: &RunOptions) -> Result<Summary, CliError> {
    let threads = opts.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("`--threads` must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| {
        let mut p = Pipeline::new(cfg, opts, threads)?;
        let summary = match phase {
            Phase::Assemble => {
                p.timed("assemble", |p| p.assemble())?;
                done(&p.out, "assemble")
            }
            Phase::Simulate => {
                let op = p.timed("load", |p| p.load_operator())?;
                p.timed("simulate", |p| p.simulate(&op))?;
                done(&p.out, "simulate")
            }
            Phase::Sweep => {
                let traj = p.timed("load", |p| p.load_trajectory())?;
                let rows = p.timed("sweep", |p| p.sweep(&traj))?;
                phase_summary(&rows, &p.out, "sweep")
            }
            Phase::Verify => {
                let traj = p.timed("load", |p| p.load_trajectory())?;
                let rows = p.timed("verify", |p| p.verify(&traj))?;
                phase_summary(&rows, &p.out, "verify")
            }
            Phase::Report => p.timed("report", |p| p.report())?,
            Phase::Run => {
                let op = p.timed("assemble", |p| p.assemble())?;
                let traj = p.timed("simulate", |p| p.simulate(&op))?;
                // stale rows from an earlier configuration must not leak into the report
                let _ = std::fs::remove_file(p.out.join(VERDICTS));
                if cfg.analysis.sweep {
                    p.timed("sweep", |p| p.sweep(&traj))?;
                }
                p.timed("verify", |p| p.verify(&traj))?;
                p.timed("report", |p| p.report())?
            }
        };
        p.write_manifest()?;
        Ok(summary)
    })
}
