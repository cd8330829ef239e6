use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use lab_core::extension_field::{
    critical_q, extend_density, lq_norm, remark_rhs, restriction_ratio, rlp_extension_ratio, write_field, Density,
    ExtendMethod, GridSpec, RatioReport, RemarkOptions, CSV_COLUMNS,
};
use lab_core::kakeya_tubes::{bush, cov_ratio, direction_net, dual_exponent, maximal_duality_check, BoxGrid, DualMethod, GridFunction, TubeFamily};
use lab_core::shell_multiplier::{decoupling_ratio, PeriodicField};
use lab_core::sphere_caps::{audit, cap_decompose, BumpProfile, CapSystem};
use lab_core::two_scale_chain::{chain_trial, tube_exponent, ChainOptions, ChainSetup};
use lab_core::{LabError, Result};

use crate::config::{point_seed, ExperimentConfig, Kind};
use crate::fit::{fit_log_exponent, LogFit};
use crate::svg::ratio_plot;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub plots: bool,
    pub threads: usize,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> RunOptions {
        RunOptions {
            out: out.into(),
            plots: true,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    CertificationFailure,
    BudgetAbort,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::CertificationFailure => 2,
            Status::BudgetAbort => 3,
        }
    }
}

/// A report row of the CSV: the ratio columns plus the experiment id and config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub report: RatioReport,
    pub experiment: String,
    pub config_hash: String,
}

impl ReportRow {
    pub fn header() -> Vec<&'static str> {
        CSV_COLUMNS.iter().copied().chain(["experiment", "config_hash"]).collect()
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = self.report.csv_record();
        r.push(self.experiment.clone());
        r.push(self.config_hash.clone());
        r
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub label: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub config_hash: String,
    pub status: Status,
    pub rows: Vec<RatioReportDoc>,
    pub fit: Option<LogFit>,
    pub fit_points: Vec<(f64, f64)>,
    pub failures: Vec<PointFailure>,
    pub uncertified: Vec<String>,
    pub skipped: usize,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Row fields without the wall-clock runtime, for the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReportDoc {
    pub op: String,
    pub delta: Option<f64>,
    pub big_r: Option<f64>,
    pub q: f64,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub method: String,
    pub norm: String,
    pub converged: bool,
}

impl From<&RatioReport> for RatioReportDoc {
    fn from(r: &RatioReport) -> Self {
        RatioReportDoc {
            op: r.op.clone(),
            delta: r.delta,
            big_r: r.big_r,
            q: r.q,
            r: r.r,
            seed: r.seed,
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
            stderr: r.stderr,
            method: r.method.clone(),
            norm: r.norm.clone(),
            converged: r.converged,
        }
    }
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    /// Sweep value: delta, N or R.
    value: f64,
    q: Option<f64>,
    r: Option<f64>,
    /// Grid radius of `kind = extension`.
    radius: Option<f64>,
}

impl Point {
    fn label(&self) -> String {
        let mut s = format!("{}", self.value);
        if let Some(radius) = self.radius {
            s.push_str(&format!("/R={radius}"));
        }
        if let Some(q) = self.q {
            s.push_str(&format!("/q={q}"));
        }
        if let Some(r) = self.r {
            s.push_str(&format!("/r={r}"));
        }
        s
    }
}

struct PointResult {
    rows: Vec<RatioReport>,
    /// `(x, y)` pairs entering the exponent fit.
    samples: Vec<(f64, f64)>,
    detail: Value,
    uncertified: Vec<String>,
}

fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let cross = |values: &[f64], qs: &[f64], rs: &[f64]| {
        let qs: Vec<Option<f64>> = if qs.is_empty() { vec![None] } else { qs.iter().map(|&q| Some(q)).collect() };
        let rs: Vec<Option<f64>> = if rs.is_empty() { vec![None] } else { rs.iter().map(|&r| Some(r)).collect() };
        let mut out = Vec::new();
        for &value in values {
            for &q in &qs {
                for &r in &rs {
                    out.push(Point { value, q, r, radius: None });
                }
            }
        }
        out
    };
    match cfg.kind {
        Kind::Caps | Kind::Rlp | Kind::Twoscale => cross(&cfg.delta, &[], &[]),
        Kind::Decouple => cross(&cfg.delta, &cfg.q, &cfg.r),
        Kind::Extension => {
            let radii = if cfg.big_r.is_empty() { vec![8.0] } else { cfg.big_r.clone() };
            let base = cross(&cfg.delta, &[], &[]);
            base.iter()
                .flat_map(|p| radii.iter().map(move |&radius| Point { radius: Some(radius), ..*p }))
                .collect()
        }
        Kind::Kakeya | Kind::Bush => cross(&cfg.big_n, &[], &cfg.r),
        Kind::Restrict | Kind::Remark => cross(&cfg.big_r, &[], &[]),
        Kind::Fit => Vec::new(),
    }
}

fn random_coefficients(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..m).map(|_| rng.gen::<f64>()).collect()
}

/// Caps at `scale` whose quadrature reaches `reach` when that fits the budget.
fn caps_reaching(n: usize, scale: f64, reach: f64) -> Result<CapSystem> {
    let mut caps = cap_decompose(n, scale, BumpProfile::default())?;
    if n == 2 {
        caps.set_bandwidth(reach, lab_core::sphere_caps::mem_budget())?;
    }
    Ok(caps)
}

fn eval_point(cfg: &ExperimentConfig, pt: &Point, seed: u64, out: &Path, id: &str, index: usize) -> Result<PointResult> {
    let n = cfg.n;
    let policy = cfg.sampling.policy(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = PointResult {
        rows: Vec::new(),
        samples: Vec::new(),
        detail: Value::Null,
        uncertified: Vec::new(),
    };
    match cfg.kind {
        Kind::Caps => {
            let s = pt.value;
            let sys = cap_decompose(n, s, BumpProfile::default())?;
            let report = audit(&sys, 10_000, seed)?;
            let target = if n == 2 {
                (std::f64::consts::TAU / s).ceil()
            } else {
                (4.0 * std::f64::consts::PI / (s * s)).ceil()
            };
            res.rows.push(RatioReport {
                module: "sphere_caps".into(),
                op: "audit".into(),
                n,
                delta: Some(s),
                big_r: None,
                q: 0.0,
                r: None,
                seed: Some(seed),
                lhs: sys.len() as f64,
                rhs: target,
                ratio: sys.len() as f64 / target,
                stderr: 0.0,
                runtime_s: 0.0,
                method: "quadrature".into(),
                norm: "none".into(),
                converged: true,
            });
            for c in report.failures() {
                res.uncertified.push(format!("s={s}: {} = {:e} > {:e}", c.name, c.value, c.limit));
            }
            std::fs::write(out.join(format!("{id}-caps-{index}.json")), sys.to_doc().to_json()?)?;
            res.detail = json!({ "scale": s, "caps": sys.len(), "audit": report });
        }
        Kind::Rlp => {
            let delta = pt.value;
            let caps = caps_reaching(n, delta.sqrt(), 1.0 / delta + 1.0)?;
            let ds: Vec<Density> = (0..cfg.trials)
                .map(|_| {
                    let c = random_coefficients(caps.len(), &mut rng);
                    Density::random_signs(&caps, c, &mut rng)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&Density> = ds.iter().collect();
            for r in rlp_extension_ratio(&refs, delta, &policy)? {
                res.samples.push((1.0 / delta, r.ratio));
                res.rows.push(r);
            }
        }
        Kind::Decouple => {
            let delta = pt.value;
            let q = pt.q.unwrap_or(critical_q(n));
            for t in 0..cfg.trials {
                let f = PeriodicField::random_shell(n, delta, 8.0, point_seed(seed, &format!("trial={t}")))?;
                let r = decoupling_ratio(&f, delta, q, pt.r)?;
                res.samples.push((1.0 / delta, r.ratio));
                res.rows.push(r);
            }
        }
        Kind::Extension => {
            let delta = pt.value;
            let radius = pt.radius.unwrap_or(8.0);
            let grid = GridSpec::new(n, radius, cfg.sampling.spacing)?;
            let caps = cap_decompose(n, delta.sqrt(), BumpProfile::default())?.quadrature_for_bandwidth(grid.diameter() + 1.0)?;
            let q = critical_q(n);
            for t in 0..cfg.trials {
                let c = random_coefficients(caps.len(), &mut rng);
                let g = Density::random_signs(&caps, c, &mut rng)?;
                let started = std::time::Instant::now();
                let field = extend_density(&g, &grid, ExtendMethod::Gridded)?;
                let lhs = lq_norm(&field, radius, q)?;
                let rhs = g.sphere_norm(q);
                if t == 0 {
                    let stem = out.join(format!("{id}-field-{index}"));
                    write_field(&field, &stem, json!({ "experiment": id, "delta": delta, "seed": seed }))?;
                }
                res.samples.push((radius, lhs / rhs));
                res.rows.push(RatioReport {
                    module: "extension_field".into(),
                    op: "extension_norm".into(),
                    n,
                    delta: Some(delta),
                    big_r: Some(radius),
                    q,
                    r: None,
                    seed: Some(seed),
                    lhs,
                    rhs,
                    ratio: lhs / rhs,
                    stderr: 0.0,
                    runtime_s: started.elapsed().as_secs_f64(),
                    method: "gridded".into(),
                    norm: "full_grid".into(),
                    converged: true,
                });
            }
        }
        Kind::Kakeya => {
            let big_n = pt.value;
            let r = pt.r.unwrap_or(tube_exponent(n));
            let grid = BoxGrid::around(n, big_n / 2.0 + 2.0, 0.25)?;
            let mut reports = Vec::new();
            for t in 0..cfg.trials {
                let net = direction_net(n, big_n)?;
                let centers = (0..net.len())
                    .map(|_| {
                        let mut p = [0.0; 3];
                        for v in p.iter_mut().take(n) {
                            *v = rng.gen_range(-2.0..2.0);
                        }
                        p
                    })
                    .collect();
                let coeffs = random_coefficients(net.len(), &mut rng);
                let fam = TubeFamily::new(net, centers, coeffs, 1.0)?;
                let values = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
                let f = GridFunction { grid: grid.clone(), values };
                let started = std::time::Instant::now();
                let rep = maximal_duality_check(&f, &fam, r, 0.5, point_seed(seed, &format!("trial={t}")))?;
                if !rep.holds() {
                    res.uncertified.push(format!("N={big_n} trial {t}: duality check fails"));
                }
                let rhs = rep.f_norm * rep.tube_norm;
                res.rows.push(RatioReport {
                    module: "kakeya_tubes".into(),
                    op: "maximal_duality_check".into(),
                    n,
                    delta: None,
                    big_r: Some(big_n),
                    q: dual_exponent(r),
                    r: Some(r),
                    seed: Some(seed),
                    lhs: rep.pairing,
                    rhs,
                    ratio: rep.pairing / rhs,
                    stderr: 0.0,
                    runtime_s: started.elapsed().as_secs_f64(),
                    method: "grid".into(),
                    norm: "full_grid".into(),
                    converged: true,
                });
                res.samples.push((big_n, rep.pairing / rhs));
                reports.push(rep);
            }
            res.detail = json!({ "N": big_n, "r": r, "reports": reports });
        }
        Kind::Bush => {
            let big_n = pt.value;
            let r = pt.r.unwrap_or(tube_exponent(n));
            let fam = bush(n, big_n, 1.0, [0.0; 3])?;
            let rep = cov_ratio(&fam, r, DualMethod::Auto)?;
            res.samples.push((big_n, rep.ratio));
            res.rows.push(rep);
        }
        Kind::Twoscale => {
            let delta = pt.value;
            let opts = ChainOptions::default();
            let mut traces = Vec::new();
            for t in 0..cfg.trials {
                let setup = ChainSetup::new(n, delta, point_seed(seed, &format!("trial={t}")));
                let started = std::time::Instant::now();
                let trace = chain_trial(&setup, &opts)?;
                if !trace.sound() {
                    res.uncertified.push(format!("delta={delta} trial {t}: chain is not sound"));
                }
                let ratio = trace.direct_lhs / trace.assembled_bound;
                res.rows.push(RatioReport {
                    module: "two_scale_chain".into(),
                    op: "chain".into(),
                    n,
                    delta: Some(delta),
                    big_r: None,
                    q: tube_exponent(n),
                    r: Some(tube_exponent(n)),
                    seed: Some(setup.seed),
                    lhs: trace.direct_lhs,
                    rhs: trace.assembled_bound,
                    ratio,
                    stderr: 0.0,
                    runtime_s: started.elapsed().as_secs_f64(),
                    method: "chain".into(),
                    norm: if trace.converged { "converged" } else { "unconverged" }.into(),
                    converged: trace.converged,
                });
                res.samples.push((1.0 / delta, ratio));
                traces.push(serde_json::to_value(&trace)?);
            }
            res.detail = json!({ "delta": delta, "traces": traces });
        }
        Kind::Restrict => {
            let big_r = pt.value;
            let caps = caps_reaching(n, big_r.powf(-0.5), big_r + 1.0)?;
            let ds: Vec<Density> = (0..cfg.trials)
                .map(|_| {
                    let c = random_coefficients(caps.len(), &mut rng);
                    Density::random_signs(&caps, c, &mut rng)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&Density> = ds.iter().collect();
            for r in restriction_ratio(&refs, big_r, &policy)? {
                res.samples.push((big_r, r.ratio));
                res.rows.push(r);
            }
        }
        Kind::Remark => {
            let big_r = pt.value;
            let caps = cap_decompose(n, big_r.powf(-0.5), BumpProfile::default())?;
            let q = critical_q(n);
            for _ in 0..cfg.trials {
                let c = random_coefficients(caps.len(), &mut rng);
                let g = Density::cap_constant(&caps, c)?;
                let started = std::time::Instant::now();
                let v = remark_rhs(&g, big_r, &RemarkOptions::default())?;
                let norm = g.sphere_norm(q);
                res.samples.push((big_r, v.value / norm));
                res.rows.push(RatioReport {
                    module: "extension_field".into(),
                    op: "remark_rhs".into(),
                    n,
                    delta: None,
                    big_r: Some(big_r),
                    q,
                    r: None,
                    seed: Some(seed),
                    lhs: v.value,
                    rhs: norm,
                    ratio: v.value / norm,
                    stderr: (v.value - v.coarse).abs() / norm,
                    runtime_s: started.elapsed().as_secs_f64(),
                    method: "dyadic".into(),
                    norm: "quadrature".into(),
                    converged: true,
                });
            }
        }
        Kind::Fit => {}
    }
    Ok(res)
}

fn x_label(kind: Kind) -> &'static str {
    match kind {
        Kind::Rlp | Kind::Decouple | Kind::Twoscale => "1/delta",
        Kind::Kakeya | Kind::Bush => "N",
        Kind::Restrict | Kind::Remark | Kind::Extension => "R",
        Kind::Caps => "s",
        Kind::Fit => "x",
    }
}

fn csv_error(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

/// Runs the sweep of `cfg`, writing `<id>.csv`, `<id>.json` and, with plots on,
/// `<id>.svg` to `opts.out`. Errors are returned only for I/O failures of the
/// output files; numerical failures are recorded in the summary status.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    std::fs::create_dir_all(&opts.out)?;
    let id = cfg.experiment_id();
    let hash = cfg.content_hash();
    let pts = points(cfg);

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<PointResult>>>> = Mutex::new((0..pts.len()).map(|_| None).collect());
    let worker = || loop {
        if abort.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= pts.len() {
            break;
        }
        let pt = &pts[i];
        let seed = point_seed(cfg.seed, &format!("{}/{}", cfg.kind, pt.label()));
        let r = eval_point(cfg, pt, seed, &opts.out, &id, i);
        if matches!(&r, Err(e) if e.is_budget()) {
            abort.store(true, Ordering::SeqCst);
        }
        slots.lock().expect("no worker panicked")[i] = Some(r);
    };
    std::thread::scope(|s| {
        for _ in 0..opts.threads.max(1).min(pts.len().max(1)) {
            s.spawn(worker);
        }
    });
    let slots = slots.into_inner().expect("no worker panicked");

    let csv_path = opts.out.join(format!("{id}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path).map_err(csv_error)?;
    writer.write_record(ReportRow::header()).map_err(csv_error)?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut uncertified = Vec::new();
    let mut details = Vec::new();
    let mut skipped = 0;
    let mut budget = false;
    for (pt, slot) in pts.iter().zip(slots) {
        match slot {
            None => skipped += 1,
            Some(Err(e)) => {
                budget |= e.is_budget();
                failures.push(PointFailure {
                    label: pt.label(),
                    error: e.to_string(),
                });
            }
            Some(Ok(res)) => {
                for report in res.rows {
                    let row = ReportRow {
                        report,
                        experiment: id.clone(),
                        config_hash: hash.clone(),
                    };
                    writer.write_record(row.record()).map_err(csv_error)?;
                    rows.push(RatioReportDoc::from(&row.report));
                }
                writer.flush()?;
                samples.extend(res.samples);
                uncertified.extend(res.uncertified);
                if !res.detail.is_null() {
                    details.push(res.detail);
                }
            }
        }
    }
    writer.flush()?;
    if cfg.kind == Kind::Fit {
        samples = cfg.points.clone();
    }

    let fit = fit_log_exponent(&samples).ok();
    if let Some(e) = &cfg.expect {
        match &fit {
            Some(f) if (f.p - e.p).abs() <= e.tolerance && e.max_rms.map_or(true, |m| f.rms <= m) => {}
            Some(f) => uncertified.push(format!(
                "fitted p = {} (rms {}) outside {} +- {}",
                f.p, f.rms, e.p, e.tolerance
            )),
            None => uncertified.push("no exponent fit possible".into()),
        }
    }
    let status = if budget {
        Status::BudgetAbort
    } else if !failures.is_empty() || !uncertified.is_empty() {
        Status::CertificationFailure
    } else {
        Status::Success
    };

    let mut files = vec![csv_path];
    let summary = RunSummary {
        experiment: id.clone(),
        config_hash: hash,
        status,
        rows,
        fit,
        fit_points: samples,
        failures,
        uncertified,
        skipped,
        files: Vec::new(),
    };
    let doc = json!({
        "experiment": summary.experiment,
        "config_hash": summary.config_hash,
        "config": cfg,
        "status": summary.status,
        "exit_code": summary.exit_code(),
        "fit": summary.fit,
        "fit_points": summary.fit_points,
        "rows": summary.rows,
        "failures": summary.failures,
        "uncertified": summary.uncertified,
        "skipped": summary.skipped,
        "details": details,
    });
    let json_path = opts.out.join(format!("{id}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    files.push(json_path);
    if opts.plots && !summary.fit_points.is_empty() {
        let svg_path = opts.out.join(format!("{id}.svg"));
        let title = format!("{} n={}", cfg.kind, cfg.n);
        std::fs::write(&svg_path, ratio_plot(&title, x_label(cfg.kind), &summary.fit_points, summary.fit.as_ref()))?;
        files.push(svg_path);
    }
    Ok(RunSummary { files, ..summary })
}
