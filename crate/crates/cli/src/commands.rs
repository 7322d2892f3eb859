//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sieveboot::bootstrap::{PrefilterConfig, ReplicationMeta, ReplicationSeed};
use sieveboot::harness::report::{build_report, std_dev, Report};
use sieveboot::harness::{run_experiment, ExperimentResult};
use sieveboot::rng::{stream, stream_id, DATA_PURPOSE};
use sieveboot::sieve::{self, select_order_aic};
use sieveboot::stats::estimate_memory;
use sieveboot::{
    arfima_acvf, percentile_set, ArfimaSpec, BootstrapDraws, BootstrapMethod, EdgeworthOptions, EdgeworthPlan, Error,
    ExperimentConfig, FitMethod, GaussianSimulator, MemoryMethod, OrderRule, PreparedBootstrap, Result, Statistic,
};

use crate::manifest::Manifest;
use crate::presets::Suite;
use crate::{
    AcvfArgs, BootstrapArgs, Cli, Command, EdgeworthArgs, ExperimentArgs, FitArgs, Method, ModelArgs, ReportArgs,
    SimulateArgs, DEFAULT_SEED,
};

const CONFIG_FILE: &str = "config.json";
const SUITE_FILE: &str = "suite.json";

struct Context {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // read by rayon when its global pool starts, which has not happened yet
        std::env::set_var("RAYON_NUM_THREADS", n.to_string());
    }
    let ctx = Context { seed: cli.seed, out_dir: cli.out_dir };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, &a),
        Command::Acvf(a) => acvf(&ctx, &a),
        Command::Fit(a) => fit(&ctx, &a),
        Command::Bootstrap(a) => bootstrap(&ctx, &a),
        Command::Edgeworth(a) => edgeworth(&ctx, &a),
        Command::Experiment(a) => experiment(&ctx, &a),
        Command::Report(a) => report(&ctx, &a),
    }
}

/// Errors caused by user-supplied values become configuration errors.
fn user(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Last column of a CSV file; a non-numeric first row is taken as a header.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Some(field) = rec.iter().next_back().filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if i == 0 => {}
            _ => return Err(Error::Config(format!("{}: row {}: not a finite number: {field:?}", path.display(), i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no observations", path.display())));
    }
    Ok(out)
}

fn parse_order(s: &str) -> Result<OrderRule> {
    if s.eq_ignore_ascii_case("aic") {
        return Ok(OrderRule::Aic);
    }
    s.parse::<usize>()
        .map(OrderRule::Fixed)
        .map_err(|_| Error::Config(format!("order must be `aic` or a non-negative integer, got {s:?}")))
}

fn model_spec(m: &ModelArgs) -> Result<ArfimaSpec> {
    ArfimaSpec::new(m.d, m.phi, m.sigma2).map_err(user)
}

/// Collects outputs in `--out-dir`, or prints the primary one to stdout.
struct Sink {
    dir: Option<PathBuf>,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(ctx: &Context) -> Result<Self> {
        if let Some(d) = &ctx.out_dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self { dir: ctx.out_dir.clone(), files: Vec::new() })
    }

    fn emit(&mut self, name: &str, bytes: &[u8], primary: bool) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                std::fs::write(&p, bytes)?;
                self.files.push(p);
            }
            None if primary => std::io::stdout().lock().write_all(bytes)?,
            None => {}
        }
        Ok(())
    }

    fn finish(self, manifest: Manifest) -> Result<()> {
        if let Some(d) = &self.dir {
            manifest.with_files(d, &self.files).write(d)?;
        }
        Ok(())
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s.into_bytes()
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let spec = model_spec(&a.model)?;
    if a.t == 0 {
        return Err(Error::Config("--t must be positive".into()));
    }
    let acvf = arfima_acvf(&spec, a.t)?;
    let sim = GaussianSimulator::new(&acvf, a.t)?;
    let seed = ctx.seed();
    let y = sim.sample(&mut stream(seed, stream_id(a.replication, DATA_PURPOSE)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "value"])?;
    for (i, v) in y.iter().enumerate() {
        w.write_record(&[(i + 1).to_string(), format!("{v:e}")])?;
    }
    let mut sink = Sink::new(ctx)?;
    sink.emit("series.csv", &w.into_inner().map_err(|e| e.into_error())?, true)?;
    sink.finish(Manifest::new("simulate", json!({ "spec": spec, "t": a.t, "replication": a.replication }), seed))
}

fn acvf(ctx: &Context, a: &AcvfArgs) -> Result<()> {
    let spec = model_spec(&a.model)?;
    let g = arfima_acvf(&spec, a.maxlag)?;
    let mut buf = Vec::new();
    g.write_csv(&mut buf)?;
    let mut sink = Sink::new(ctx)?;
    sink.emit("acvf.csv", &buf, true)?;
    sink.finish(Manifest::new("acvf", json!({ "spec": spec, "maxlag": a.maxlag }), ctx.seed()))
}

fn fit(ctx: &Context, a: &FitArgs) -> Result<()> {
    let y = read_series(&a.input)?;
    let method: FitMethod = a.estimator.into();
    let rule = parse_order(&a.order)?;
    let (h, aic) = match rule {
        OrderRule::Aic => {
            let sel = select_order_aic(&y, method)?;
            (sel.h_hat, json!({ "max_order": sel.max_order, "trace": sel.aic_trace }))
        }
        OrderRule::Fixed(h) => {
            if h >= y.len() {
                return Err(Error::Config(format!("order {h} needs more than {h} observations, have {}", y.len())));
            }
            (h, Value::Null)
        }
    };
    let f = sieve::fit(&y, h, method)?;
    let pre = PrefilterConfig::default();
    let memory = estimate_memory(&y, MemoryMethod::LocalWhittle, pre.bandwidth_exponent).ok();
    let report = json!({
        "input": a.input,
        "observations": y.len(),
        "order_rule": rule,
        "fit": f.summary_json(),
        "aic": aic,
        "memory": memory,
    });
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    let mut sink = Sink::new(ctx)?;
    sink.emit("fit.json", &pretty(&report), true)?;
    sink.emit("fit.csv", &buf, false)?;
    let config = json!({ "input": a.input, "order": rule, "estimator": method });
    sink.finish(Manifest::new("fit", config, ctx.seed()))
}

fn bootstrap_method(a: &BootstrapArgs) -> Result<BootstrapMethod> {
    let method = match &a.method_config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => {
            let base = match a.method {
                Method::Sbs => BootstrapMethod::sbs(),
                Method::Pfsbs => BootstrapMethod::pfsbs(),
                Method::Fpfbs => BootstrapMethod::fpfbs(),
            };
            base.with_order(parse_order(&a.order)?).with_estimator(a.estimator.into())
        }
    };
    method.validate().map_err(user)?;
    Ok(method)
}

fn bootstrap(ctx: &Context, a: &BootstrapArgs) -> Result<()> {
    let y = read_series(&a.input)?;
    let method = bootstrap_method(a)?;
    let stats = a.statistics.iter().map(|s| Statistic::parse_id(s)).collect::<Result<Vec<_>>>()?;
    for s in &stats {
        if let Some(k) = s.lag() {
            if k == 0 || k >= y.len() {
                return Err(Error::Config(format!("lag {k} must lie in 1..{}", y.len())));
            }
        }
    }
    if a.draws == 0 {
        return Err(Error::Config("--draws must be positive".into()));
    }
    let seed = ctx.seed();
    let prepared = PreparedBootstrap::new(&y, &method)?;
    let sid = stream_id(0, method.stream_purpose());
    let mut rng = stream(seed, sid);
    let mut values = vec![Vec::with_capacity(a.draws); stats.len()];
    let mut paths = Vec::new();
    for _ in 0..a.draws {
        let p = prepared.draw(&mut rng);
        for (s, out) in stats.iter().zip(values.iter_mut()) {
            out.push(s.evaluate(&p, a.d)?);
        }
        if a.keep_paths {
            paths.push(p);
        }
    }
    let meta = vec![ReplicationMeta { seed: ReplicationSeed { master: seed, stream: sid }, fit: prepared.summary() }];
    let label = method.label();
    let mut sink = Sink::new(ctx)?;
    let mut summaries = Vec::new();
    for (s, v) in stats.iter().zip(values) {
        let set = if v.len() >= sieveboot::bootstrap::MIN_PERCENTILE_DRAWS {
            let p = percentile_set(&v, a.alpha).map_err(user)?;
            json!({ "alpha": p.alpha, "center": p.center, "half_width": p.half_width, "lower": p.lower(), "upper": p.upper() })
        } else {
            Value::Null
        };
        summaries.push(json!({
            "statistic": s.id(),
            "observed": s.evaluate(&y, a.d)?,
            "bootstrap_mean": v.iter().sum::<f64>() / v.len() as f64,
            "bootstrap_sd": std_dev(&v),
            "percentile_set": set,
        }));
        let draws = BootstrapDraws::new(s.id(), method.clone(), vec![v], meta.clone())?;
        let (mut c, mut j) = (Vec::new(), Vec::new());
        draws.write_csv(&mut c)?;
        draws.write_metadata(&mut j)?;
        sink.emit(&format!("draws_{label}_{}.csv", s.id()), &c, false)?;
        sink.emit(&format!("draws_{label}_{}.json", s.id()), &j, false)?;
    }
    if a.keep_paths {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["draw", "t", "value"])?;
        for (b, p) in paths.iter().enumerate() {
            for (t, v) in p.iter().enumerate() {
                w.write_record(&[b.to_string(), (t + 1).to_string(), format!("{v:e}")])?;
            }
        }
        sink.emit(&format!("paths_{label}.csv"), &w.into_inner().map_err(|e| e.into_error())?, false)?;
    }
    let summary = json!({ "method": label, "draws": a.draws, "fit": prepared.summary(), "statistics": summaries });
    sink.emit("bootstrap.json", &pretty(&summary), true)?;
    let config = json!({
        "input": a.input,
        "method": method,
        "draws": a.draws,
        "statistics": stats,
        "d": a.d,
        "alpha": a.alpha,
    });
    sink.finish(Manifest::new("bootstrap", config, seed))
}

fn edgeworth(ctx: &Context, a: &EdgeworthArgs) -> Result<()> {
    let spec = model_spec(&a.model)?;
    if a.k == 0 || a.k >= a.t {
        return Err(Error::Config(format!("--k must lie in 1..{}", a.t)));
    }
    if !a.half_width.is_finite() || a.half_width <= 0.0 || a.points.is_some_and(|n| n < 3) {
        return Err(Error::Config("grid needs a positive half-width and at least 3 points".into()));
    }
    let acvf = arfima_acvf(&spec, a.t)?;
    let opts = EdgeworthOptions { allow_invalid: a.allow_invalid, parallel: true, first_order: a.first_order };
    let plan = EdgeworthPlan::new(a.k, &acvf, a.t, spec.d, &opts).map_err(|e| match e {
        Error::Validity(_) => user(e),
        other => other,
    })?;
    let grid = match a.points {
        Some(n) => plan.default_grid(a.half_width, n),
        None => plan.standard_grid(a.half_width),
    };
    let curve = plan.curve(&grid, opts.parallel)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    let mut sink = Sink::new(ctx)?;
    sink.emit(&format!("edgeworth_k{}.csv", a.k), &buf, true)?;
    let config = json!({
        "spec": spec,
        "t": a.t,
        "k": a.k,
        "half_width": a.half_width,
        "points": grid.len(),
        "allow_invalid": a.allow_invalid,
        "first_order": a.first_order,
    });
    sink.finish(Manifest::new("edgeworth", config, ctx.seed()))
}

fn load_suite(a: &ExperimentArgs) -> Result<Suite> {
    if let Some(p) = a.preset {
        return p.suite();
    }
    let path = a.config.as_ref().expect("clap requires --config without --preset");
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if value.get("runs").is_some() {
        Suite::from_json(&text)
    } else {
        ExperimentConfig::from_json(&text).map(Suite::single)
    }
}

/// The configuration as hashed: fields that cannot change results are dropped.
fn hashed_config(cfg: &ExperimentConfig) -> Value {
    let mut c = cfg.clone();
    c.out_dir = None;
    c.threads = None;
    serde_json::to_value(&c).expect("config serializes")
}

fn experiment(ctx: &Context, a: &ExperimentArgs) -> Result<()> {
    let suite = load_suite(a)?;
    let single_dir = suite.runs[0].config.out_dir.clone().filter(|_| suite.runs.len() == 1);
    let out = ctx
        .out_dir
        .clone()
        .or(single_dir)
        .ok_or_else(|| Error::Config("--out-dir is required for experiments".into()))?;
    let mut index = Vec::new();
    let mut reports = Vec::new();
    for run in &suite.runs {
        let mut cfg = run.config.clone();
        if let Some(s) = ctx.seed {
            cfg.seed = s;
        }
        if let Some(r) = a.replications {
            cfg.replications = r;
        }
        if let Some(b) = a.draws {
            cfg.draws = b;
        }
        cfg.keep_paths |= a.keep_paths;
        cfg.out_dir = None;
        cfg.validate()?;
        let dir = if run.id.is_empty() { out.clone() } else { out.join(&run.id) };
        let start = std::time::Instant::now();
        eprintln!(
            "{}: d={} phi={} T={} R={} B={} methods={}",
            if run.id.is_empty() { "experiment" } else { &run.id },
            cfg.spec.d,
            cfg.spec.phi,
            cfg.t,
            cfg.replications,
            cfg.draws,
            cfg.methods.iter().map(BootstrapMethod::label).collect::<Vec<_>>().join(",")
        );
        let res = run_experiment(&cfg)?;
        let mut files = res.write_dir(&dir)?;
        if a.report {
            let rep = build_report(&res)?;
            files.extend(rep.write_dir(&dir)?);
            reports.push((run.id.clone(), cfg.clone(), rep));
        }
        let manifest = Manifest::new("experiment", hashed_config(&cfg), cfg.seed).with_files(&dir, &files);
        manifest.write(&dir)?;
        eprintln!("  done in {:.1} s", start.elapsed().as_secs_f64());
        index.push(json!({ "id": run.id, "config_hash": manifest.config_hash }));
    }
    let is_suite = !suite.runs[0].id.is_empty();
    if is_suite {
        let mut files = vec![write_suite_index(&out, &suite, &index)?];
        if a.report {
            files.extend(write_suite_summary(&out, &reports)?);
        }
        let seed = ctx.seed.unwrap_or(suite.runs[0].config.seed);
        Manifest::new("experiment", json!({ "suite": suite.name, "runs": index }), seed)
            .with_files(&out, &files)
            .write(&out)?;
    }
    Ok(())
}

fn write_suite_index(out: &Path, suite: &Suite, index: &[Value]) -> Result<PathBuf> {
    let p = out.join(SUITE_FILE);
    let doc = json!({ "name": suite.name, "description": suite.description, "runs": index });
    std::fs::write(&p, pretty(&doc))?;
    Ok(p)
}

/// Suite-wide tables: standard-deviation ratios and fit measures of every run,
/// the latter also relative to SBS.
fn write_suite_summary(out: &Path, reports: &[(String, ExperimentConfig, Report)]) -> Result<Vec<PathBuf>> {
    let ratios = out.join("summary_stdev_ratio.csv");
    let mut w = csv::Writer::from_path(&ratios)?;
    w.write_record(["run", "method", "d", "phi", "t", "ratio_percent", "mean_order", "mean_d_pre"])?;
    for (id, _, rep) in reports {
        for r in &rep.stdev_ratios {
            w.write_record(&[
                id.clone(),
                r.method.clone(),
                r.d.to_string(),
                r.phi.to_string(),
                r.t.to_string(),
                format!("{:.4}", r.ratio),
                format!("{:.4}", r.mean_order),
                r.mean_d_pre.map(|v| format!("{v:.4}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    let gof = out.join("summary_gof.csv");
    let mut w = csv::Writer::from_path(&gof)?;
    w.write_record([
        "run", "d", "phi", "t", "statistic", "subject", "rmsd", "kld", "gini", "rmsd_vs_sbs", "kld_vs_sbs", "gini_vs_sbs",
    ])?;
    for (id, cfg, rep) in reports {
        for g in &rep.gof {
            let rel = rep.gof_ratio(&g.statistic, &g.subject, "sbs").filter(|_| g.subject != "sbs");
            let rel = |i: usize| rel.map(|r| format!("{:.6}", r[i])).unwrap_or_default();
            w.write_record(&[
                id.clone(),
                cfg.spec.d.to_string(),
                cfg.spec.phi.to_string(),
                cfg.t.to_string(),
                g.statistic.clone(),
                g.subject.clone(),
                format!("{:.6e}", g.rmsd),
                format!("{:.6e}", g.kld),
                format!("{:.6e}", g.gini),
                rel(0),
                rel(1),
                rel(2),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![ratios, gof])
}

fn read_run(dir: &Path) -> Result<ExperimentResult> {
    ExperimentResult::read_dir(dir).map_err(|e| Error::Config(format!("{}: {}", dir.display(), user(e))))
}

fn report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    let out = ctx.out_dir.clone().unwrap_or_else(|| a.dir.clone());
    if a.dir.join(CONFIG_FILE).is_file() {
        let res = read_run(&a.dir)?;
        let rep = build_report(&res)?;
        let files = rep.write_dir(&out)?;
        let manifest = Manifest::new("report", hashed_config(&res.config), res.config.seed).with_files(&out, &files);
        // keep the experiment's own manifest when reporting in place
        let name = if out == a.dir { "report_manifest.json" } else { crate::manifest::MANIFEST_FILE };
        std::fs::write(out.join(name), pretty(&serde_json::to_value(&manifest)?))?;
        return Ok(());
    }
    let mut runs: Vec<PathBuf> = std::fs::read_dir(&a.dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CONFIG_FILE).is_file())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::Config(format!("{} holds no experiment output", a.dir.display())));
    }
    let mut reports = Vec::new();
    let mut files = Vec::new();
    let mut index = Vec::new();
    let mut seed = None;
    for run in &runs {
        let id = run.file_name().expect("directory entry has a name").to_string_lossy().into_owned();
        let res = read_run(run)?;
        let rep = build_report(&res)?;
        files.extend(rep.write_dir(&out.join(&id))?);
        seed.get_or_insert(res.config.seed);
        index.push(json!({ "id": id, "config_hash": crate::manifest::config_hash(&hashed_config(&res.config)) }));
        reports.push((id, res.config, rep));
    }
    files.extend(write_suite_summary(&out, &reports)?);
    let manifest = Manifest::new("report", json!({ "runs": index }), seed.unwrap_or(DEFAULT_SEED)).with_files(&out, &files);
    std::fs::write(out.join("report_manifest.json"), pretty(&serde_json::to_value(&manifest)?))?;
    Ok(())
}
