//! Run metrics, sparsity ratio, backend comparison and the sliding-block solution.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_mpm_core::fields::BYTES_PER_NODE;
use sparse_mpm_core::solver::{PhaseTimes, StepReport};
use sparse_mpm_core::Backend;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub time: f64,
    pub dt: f64,
    pub n_active: usize,
    pub allocated: usize,
    pub n_blocks_active: usize,
    pub phases: PhaseTimes,
}

impl From<&StepReport> for StepMetrics {
    fn from(r: &StepReport) -> Self {
        Self {
            step: r.step,
            time: r.time,
            dt: r.dt,
            n_active: r.n_active,
            allocated: r.allocated,
            n_blocks_active: r.n_blocks_active,
            phases: r.phases,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub backend: Backend,
    pub threads: usize,
    pub deterministic: bool,
    pub config_hash: String,
    pub n_dense: usize,
    pub steps: Vec<StepMetrics>,
    /// Time spent writing frames (s), kept out of the compute totals.
    pub io_time: f64,
}

impl RunMetrics {
    pub fn new(backend: Backend, threads: usize, deterministic: bool, config_hash: String, n_dense: usize) -> Self {
        Self {
            backend,
            threads,
            deterministic,
            config_hash,
            n_dense,
            steps: Vec::new(),
            io_time: 0.0,
        }
    }

    pub fn record(&mut self, report: &StepReport) {
        self.steps.push(report.into());
    }

    /// Per-phase compute totals. The first step is a warm-up and is left out
    /// unless it is the only one.
    pub fn phase_totals(&self) -> PhaseTimes {
        let skip = usize::from(self.steps.len() > 1);
        let mut t = PhaseTimes::default();
        for s in &self.steps[skip..] {
            t.accumulate(&s.phases);
        }
        t
    }

    pub fn compute_time(&self) -> f64 {
        self.phase_totals().total()
    }

    pub fn peak_allocated(&self) -> usize {
        self.steps.iter().map(|s| s.allocated).max().unwrap_or(0)
    }

    /// Peak nodal field memory, from allocated nodes × bytes per node.
    pub fn peak_memory_bytes(&self) -> usize {
        self.peak_allocated() * BYTES_PER_NODE
    }

    pub fn sparsity_ratio(&self) -> Result<f64> {
        let active: Vec<usize> = self.steps.iter().map(|s| s.n_active).collect();
        sparsity_ratio(self.n_dense, &active)
    }

    pub fn final_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.time)
    }
}

/// `min_t n_dense / n_active(t)`.
pub fn sparsity_ratio(n_dense: usize, n_active: &[usize]) -> Result<f64> {
    if n_active.is_empty() {
        return Err(Error::Metrics("sparsity ratio needs at least one step".into()));
    }
    let max_active = *n_active.iter().max().expect("non-empty");
    if n_active.contains(&0) {
        return Err(Error::Metrics("a step had no active nodes".into()));
    }
    Ok(n_dense as f64 / max_active as f64)
}

/// Coulomb block on an incline: `½ g (sin θ − μ cos θ) t²`, or 0 when it sticks.
pub fn sliding_box_oracle(theta_deg: f64, mu: f64, g: f64, t: f64) -> f64 {
    let theta = theta_deg.to_radians();
    if theta.tan() <= mu {
        return 0.0;
    }
    0.5 * g * (theta.sin() - mu * theta.cos()) * t * t
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRatio {
    pub phase: &'static str,
    pub baseline: f64,
    pub candidate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline_backend: Backend,
    pub candidate_backend: Backend,
    pub config_hash: String,
    pub baseline_time: f64,
    pub candidate_time: f64,
    pub baseline_memory: usize,
    pub candidate_memory: usize,
    /// Baseline compute time over candidate compute time.
    pub speedup: f64,
    /// Baseline peak nodal memory over candidate peak nodal memory.
    pub memory_reduction: f64,
    pub baseline_r_active: Option<f64>,
    pub candidate_r_active: Option<f64>,
    pub phases: Vec<PhaseRatio>,
}

fn phase_list(t: &PhaseTimes) -> [(&'static str, f64); 6] {
    [
        ("map_build", t.map_build),
        ("alloc", t.alloc),
        ("p2g", t.p2g),
        ("grid_update", t.grid_update),
        ("g2p", t.g2p),
        ("stress", t.stress),
    ]
}

/// Compares a baseline (normally dense) run with a candidate run of the same scenario.
pub fn compare(baseline: &RunMetrics, candidate: &RunMetrics) -> Result<Comparison> {
    if baseline.config_hash != candidate.config_hash {
        return Err(Error::Metrics(format!(
            "runs come from different configurations ({} vs {})",
            baseline.config_hash, candidate.config_hash
        )));
    }
    if baseline.steps.is_empty() || candidate.steps.is_empty() {
        return Err(Error::Metrics("both runs need at least one step".into()));
    }
    let (tb, tc) = (baseline.compute_time(), candidate.compute_time());
    let (mb, mc) = (baseline.peak_memory_bytes(), candidate.peak_memory_bytes());
    let pb = phase_list(&baseline.phase_totals());
    let pc = phase_list(&candidate.phase_totals());
    Ok(Comparison {
        baseline_backend: baseline.backend,
        candidate_backend: candidate.backend,
        config_hash: baseline.config_hash.clone(),
        baseline_time: tb,
        candidate_time: tc,
        baseline_memory: mb,
        candidate_memory: mc,
        speedup: tb / tc,
        memory_reduction: mb as f64 / mc as f64,
        baseline_r_active: baseline.sparsity_ratio().ok(),
        candidate_r_active: candidate.sparsity_ratio().ok(),
        phases: pb
            .iter()
            .zip(pc.iter())
            .map(|(&(phase, b), &(_, c))| PhaseRatio {
                phase,
                baseline: b,
                candidate: c,
            })
            .collect(),
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct MetricsRow {
    kind: String,
    step: u64,
    time_s: f64,
    dt_s: Option<f64>,
    n_active: Option<usize>,
    allocated_nodes: usize,
    n_blocks_active: Option<usize>,
    map_build_s: f64,
    alloc_s: f64,
    p2g_s: f64,
    grid_update_s: f64,
    g2p_s: f64,
    stress_s: f64,
    compute_s: f64,
    backend: Option<String>,
    threads: Option<usize>,
    deterministic: Option<bool>,
    config_hash: Option<String>,
    n_dense: Option<usize>,
    peak_memory_bytes: Option<usize>,
    r_active: Option<f64>,
    io_s: Option<f64>,
}

fn phase_row(kind: &str, step: u64, time: f64, allocated: usize, t: &PhaseTimes) -> MetricsRow {
    MetricsRow {
        kind: kind.into(),
        step,
        time_s: time,
        allocated_nodes: allocated,
        map_build_s: t.map_build,
        alloc_s: t.alloc,
        p2g_s: t.p2g,
        grid_update_s: t.grid_update,
        g2p_s: t.g2p,
        stress_s: t.stress,
        compute_s: t.total(),
        ..MetricsRow::default()
    }
}

/// One `step` row per step followed by a `summary` row with run totals.
pub fn write_metrics(run: &RunMetrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for s in &run.steps {
        let mut row = phase_row("step", s.step, s.time, s.allocated, &s.phases);
        row.dt_s = Some(s.dt);
        row.n_active = Some(s.n_active);
        row.n_blocks_active = Some(s.n_blocks_active);
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    let steps = run.steps.len() as u64;
    let mut summary = phase_row("summary", steps, run.final_time(), run.peak_allocated(), &run.phase_totals());
    summary.backend = Some(run.backend.to_string());
    summary.threads = Some(run.threads);
    summary.deterministic = Some(run.deterministic);
    summary.config_hash = Some(run.config_hash.clone());
    summary.n_dense = Some(run.n_dense);
    summary.peak_memory_bytes = Some(run.peak_memory_bytes());
    summary.r_active = run.sparsity_ratio().ok();
    summary.io_s = Some(run.io_time);
    w.serialize(summary).map_err(|e| Error::csv(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<RunMetrics> {
    let path = path.as_ref();
    let bad = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        message: msg.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut steps = Vec::new();
    let mut summary = None;
    for row in r.deserialize::<MetricsRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        match row.kind.as_str() {
            "step" => steps.push(StepMetrics {
                step: row.step,
                time: row.time_s,
                dt: row.dt_s.ok_or_else(|| bad("step row without dt_s"))?,
                n_active: row.n_active.ok_or_else(|| bad("step row without n_active"))?,
                allocated: row.allocated_nodes,
                n_blocks_active: row.n_blocks_active.unwrap_or(0),
                phases: PhaseTimes {
                    map_build: row.map_build_s,
                    alloc: row.alloc_s,
                    p2g: row.p2g_s,
                    grid_update: row.grid_update_s,
                    g2p: row.g2p_s,
                    stress: row.stress_s,
                },
            }),
            "summary" => summary = Some(row),
            _ => return Err(bad("row kind must be `step` or `summary`")),
        }
    }
    let s = summary.ok_or_else(|| bad("missing summary row"))?;
    let backend = s
        .backend
        .as_deref()
        .ok_or_else(|| bad("summary row without backend"))?
        .parse()
        .map_err(|_| bad("unknown backend"))?;
    Ok(RunMetrics {
        backend,
        threads: s.threads.unwrap_or(1),
        deterministic: s.deterministic.unwrap_or(false),
        config_hash: s.config_hash.ok_or_else(|| bad("summary row without config_hash"))?,
        n_dense: s.n_dense.ok_or_else(|| bad("summary row without n_dense"))?,
        steps,
        io_time: s.io_s.unwrap_or(0.0),
    })
}

/// Comparison report: one row per quantity.
pub fn write_report(c: &Comparison, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let err = |e| Error::csv(path, e);
    w.write_record(["quantity", "baseline", "candidate", "ratio"]).map_err(err)?;
    let f = |v: f64| v.to_string();
    let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
    w.write_record(["backend", c.baseline_backend.as_str(), c.candidate_backend.as_str(), ""])
        .map_err(err)?;
    w.write_record(["config_hash", &c.config_hash, &c.config_hash, ""]).map_err(err)?;
    for p in &c.phases {
        let ratio = if p.candidate > 0.0 { f(p.baseline / p.candidate) } else { String::new() };
        w.write_record([&format!("{}_s", p.phase), &f(p.baseline), &f(p.candidate), &ratio])
            .map_err(err)?;
    }
    w.write_record(["compute_s", &f(c.baseline_time), &f(c.candidate_time), &f(c.speedup)])
        .map_err(err)?;
    w.write_record([
        "peak_memory_bytes",
        &c.baseline_memory.to_string(),
        &c.candidate_memory.to_string(),
        &f(c.memory_reduction),
    ])
    .map_err(err)?;
    w.write_record(["r_active", &opt(c.baseline_r_active), &opt(c.candidate_r_active), ""])
        .map_err(err)?;
    w.write_record(["speedup", "", "", &f(c.speedup)]).map_err(err)?;
    w.write_record(["memory_reduction", "", "", &f(c.memory_reduction)]).map_err(err)?;
    w.flush().map_err(|e| Error::io(path, e))
}
