use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rashgam_core::apps::{jump_analysis, monotone_fit, project_edit, vi_range, ChainConstraint, ViMode};
use rashgam_core::box_oracle::all_segments;
use rashgam_core::ellipsoid::Ellipsoid;
use rashgam_core::eval::{estimate_precision, method_ratio_report, tradeoff_curve};
use rashgam_core::gam::fit::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use rashgam_core::gam::{
    bin, fit_erm, make_quantile_spec, BinnedDataset, BinningSpec, GamModel, GamObjective, RawDataset, SmoothLoss,
    Support,
};
use rashgam_core::io::{read_json, EllipsoidDoc, ModelDoc};
use rashgam_core::rset_block::explore;
use rashgam_core::rset_fit::{approximate, FitTrace, RashomonConfig, RashomonFit, Threshold};
use rashgam_service::{AppState, Session};

use crate::args::*;
use crate::output::Artifacts;
use crate::Failure;

type Res<T> = Result<T, Failure>;

pub fn dispatch(cli: &Cli) -> Res<String> {
    let name = command_name(&cli.command);
    if let Command::Serve(a) = &cli.command {
        return serve(a, cli.threads);
    }
    let mut out = Artifacts::new(&cli.out)?;
    let summary = match &cli.command {
        Command::Fit(a) => fit(a, &mut out)?,
        Command::Rset(a) => rset(a, cli.seed, &mut out)?,
        Command::Block(a) => block(a, cli.seed, &mut out)?,
        Command::Vi(a) => vi(a, &mut out)?,
        Command::Monotone(a) => monotone(a, &mut out)?,
        Command::Project(a) => project(a, &mut out)?,
        Command::Sample(a) => sample(a, cli.seed, &mut out)?,
        Command::Jumps(a) => jumps(a, cli.seed, &mut out)?,
        Command::Precision(a) => precision(a, cli.seed, &mut out)?,
        Command::Tradeoff(a) => tradeoff(a, cli.seed, &mut out)?,
        Command::Ratios(a) => ratios(a, cli.seed, &mut out)?,
        Command::BoxVolume(a) => box_volume(a, &mut out)?,
        Command::Serve(_) => unreachable!("handled above"),
    };
    out.finish(name, cli.seed, &cli.command)?;
    Ok(summary)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fit(_) => "fit",
        Command::Rset(_) => "rset",
        Command::Block(_) => "block",
        Command::Vi(_) => "vi",
        Command::Monotone(_) => "monotone",
        Command::Project(_) => "project",
        Command::Sample(_) => "sample",
        Command::Jumps(_) => "jumps",
        Command::Precision(_) => "precision",
        Command::Tradeoff(_) => "tradeoff",
        Command::Ratios(_) => "ratios",
        Command::BoxVolume(_) => "box-volume",
        Command::Serve(_) => "serve",
    }
}

fn input_error(what: &str, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("cannot read {what} {}: {e}", path.display()))
}

fn read_doc<T: for<'de> serde::Deserialize<'de>>(what: &str, path: &Path, out: &mut Artifacts) -> Res<T> {
    out.input(what, path)?;
    read_json(path).map_err(|e| input_error(what, path, e))
}

fn read_raw(path: &Path, out: &mut Artifacts) -> Res<RawDataset> {
    out.input("data", path)?;
    RawDataset::from_csv_path(path).map_err(|e| input_error("data", path, e))
}

fn check_positive(name: &str, n: usize) -> Res<()> {
    if n == 0 {
        return Err(Failure::Usage(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    x.to_string()
}

/// Model, its support and the binned training data.
struct Loaded {
    doc: ModelDoc,
    support: Support,
    data: BinnedDataset,
}

impl Loaded {
    fn objective(&self) -> Res<GamObjective> {
        Ok(GamObjective::for_support(&self.data, &self.support, self.doc.lambda2, self.doc.lambda_s)?)
    }
}

fn load_model_data(a: &ModelData, out: &mut Artifacts) -> Res<Loaded> {
    let doc: ModelDoc = read_doc("model", &a.model, out)?;
    doc.model().map_err(|e| input_error("model", &a.model, e))?;
    let path = match (&a.data, &doc.dataset) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(Failure::Usage("the model records no dataset; pass --data".into())),
    };
    let raw = read_raw(&path, out)?;
    if raw.feature_names() != doc.feature_names.as_slice() {
        return Err(Failure::Usage(format!(
            "columns of {} do not match the model's features",
            path.display()
        )));
    }
    let data = bin(&raw, &doc.spec()?)?;
    let support = doc.support()?;
    Ok(Loaded { doc, support, data })
}

fn load_ellipsoid(path: &Path, out: &mut Artifacts) -> Res<(EllipsoidDoc, Ellipsoid)> {
    let doc: EllipsoidDoc = read_doc("ellipsoid", path, out)?;
    let e = doc.ellipsoid().map_err(|e| input_error("ellipsoid", path, e))?;
    Ok((doc, e))
}

fn matched(l: &Loaded, e: &Ellipsoid) -> Res<()> {
    if e.dim() != l.support.size() + 1 {
        return Err(Failure::Usage(format!(
            "ellipsoid has dimension {} but the model has {} coordinates",
            e.dim(),
            l.support.size() + 1
        )));
    }
    Ok(())
}

fn load_session(a: &ModelEllipsoid, out: &mut Artifacts) -> Res<Session> {
    let m: ModelDoc = read_doc("model", &a.model, out)?;
    let e: EllipsoidDoc = read_doc("ellipsoid", &a.ellipsoid, out)?;
    Session::new(m, e).map_err(|e| Failure::Usage(format!("model and ellipsoid do not fit together: {e}")))
}

fn resolve_feature(names: &[String], s: &str) -> Res<usize> {
    if let Some(j) = names.iter().position(|n| n == s) {
        return Ok(j);
    }
    match s.parse::<usize>() {
        Ok(j) if j < names.len() => Ok(j),
        _ => Err(Failure::Usage(format!("unknown feature `{s}` (have: {})", names.join(", ")))),
    }
}

fn optimizer(cfg: &OptimizerArgs) -> Res<RashomonConfig> {
    let c = RashomonConfig {
        optimizer: cfg.apply(Default::default()),
        ..Default::default()
    };
    c.optimizer.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn fit(a: &FitArgs, out: &mut Artifacts) -> Res<String> {
    let raw = read_raw(&a.data.data, out)?;
    let spec = match &a.data.edges {
        Some(p) => BinningSpec::new(read_doc("edges", p, out)?).map_err(|e| input_error("edges", p, e))?,
        None => {
            check_positive("--bins", a.data.bins)?;
            make_quantile_spec(&raw, a.data.bins)?
        }
    };
    if !(a.lambda2 >= 0.0) || !(a.lambdas >= 0.0) {
        return Err(Failure::Usage("penalties must be non-negative".into()));
    }
    let data = bin(&raw, &spec)?;
    let support = Support::full(&data.bins_per_feature());
    let model = fit_erm(&data, &support, a.lambda2, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let loss = GamObjective::for_support(&data, &support, a.lambda2, a.lambdas)?.value(&model.reduced_params());
    let mut doc = ModelDoc::new(&model, &spec, raw.feature_names(), a.lambda2, a.lambdas, data.pi())?;
    let abs = std::fs::canonicalize(&a.data.data).unwrap_or_else(|_| a.data.data.clone());
    doc.dataset = Some(abs.display().to_string());
    let p = out.json("model.json", &doc)?;
    Ok(format!(
        "fit: n={} p={} steps={} loss={loss:.6} -> {}",
        data.n(),
        data.p(),
        support.size(),
        p.display()
    ))
}

fn rset(a: &RsetArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    if !(a.theta_mult > 1.0) {
        return Err(Failure::Usage("--theta-mult must exceed 1".into()));
    }
    let l = load_model_data(&a.input, out)?;
    let cfg = RashomonConfig {
        theta: Threshold::Multiplier(a.theta_mult),
        lambda2: l.doc.lambda2,
        lambda_s: l.doc.lambda_s,
        ..optimizer(&a.optimizer)?
    };
    let fit = approximate(&l.data, &l.support, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let obj = l.objective()?;
    let doc = |e: &Ellipsoid| EllipsoidDoc::new(e, fit.theta, cfg.lambda2, cfg.lambda_s, obj.value(e.center().as_slice()));
    let p = out.json("ellipsoid.json", &doc(&fit.ellipsoid))?;
    out.json("ellipsoid_init.json", &doc(&fit.init))?;
    out.text("trace.csv", &fit.trace.to_csv())?;
    Ok(format!(
        "rset: dim={} theta={:.6} log_volume={:.4} (init {:.4}) best_iter={} -> {}",
        fit.ellipsoid.dim(),
        fit.theta,
        fit.ellipsoid.log_volume(),
        fit.init.log_volume(),
        fit.trace.best_iter,
        p.display()
    ))
}

fn plan_label(encoded: &[Vec<usize>], names: &[String]) -> String {
    let parts: Vec<String> = encoded
        .iter()
        .enumerate()
        .filter(|(_, pairs)| !pairs.is_empty())
        .map(|(j, pairs)| {
            let ks: Vec<String> = pairs.iter().map(usize::to_string).collect();
            format!("{}:{}", names[j], ks.join(","))
        })
        .collect();
    parts.join(";")
}

fn default_k_tilde(k: usize) -> usize {
    ((0.9 * k as f64).round() as usize).clamp(1, k)
}

fn block(a: &BlockArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--candidates", a.candidates)?;
    let l = load_model_data(&a.input, out)?;
    let (edoc, e) = load_ellipsoid(&a.ellipsoid, out)?;
    matched(&l, &e)?;
    let k = l.support.size();
    let k_tilde = a.k_tilde.unwrap_or_else(|| default_k_tilde(k));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slices = explore(&e, &l.support, k_tilde, a.candidates, edoc.theta, l.doc.lambda_s, &mut rng)?;
    slices.sort_by(|x, y| y.1.u.total_cmp(&x.1.u).then_with(|| x.0.cmp(&y.0)));
    let names = &l.doc.feature_names;
    let rows = slices.iter().map(|(plan, s)| {
        vec![
            plan_label(&plan.encode(&l.support), names),
            fmt(s.u),
            fmt(s.loss_bound),
            s.ellipsoid.as_ref().map_or(String::new(), |e| fmt(e.log_volume())),
        ]
    });
    let p = out.csv("block.csv", &["plan", "u", "loss_bound", "log_volume"], rows)?;
    let Some((plan, best)) = slices.first() else {
        return Ok(format!("block: K={k} K~={k_tilde}: no nonempty slice among the drawn plans -> {}", p.display()));
    };
    let reduced = plan.reduced_support(&l.support)?;
    let be = best.ellipsoid.as_ref().expect("explore keeps nonempty slices");
    let model = GamModel::from_reduced(be.center().as_slice(), reduced.clone())?;
    let spec = l.doc.spec()?;
    let mut mdoc = ModelDoc::new(&model, &spec, names, l.doc.lambda2, l.doc.lambda_s, &l.doc.pi)?;
    mdoc.dataset.clone_from(&l.doc.dataset);
    let obj = GamObjective::for_support(&l.data, &reduced, l.doc.lambda2, l.doc.lambda_s)?;
    out.json("block_best_model.json", &mdoc)?;
    out.json(
        "block_best_ellipsoid.json",
        &EllipsoidDoc::new(be, best.loss_bound, l.doc.lambda2, l.doc.lambda_s, obj.value(be.center().as_slice())),
    )?;
    Ok(format!(
        "block: K={k} K~={k_tilde} nonempty={} best u={:.4} plan={} -> {}",
        slices.len(),
        best.u,
        plan_label(&plan.encode(&l.support), names),
        p.display()
    ))
}

fn vi(a: &ViArgs, out: &mut Artifacts) -> Res<String> {
    let s = load_session(&a.input, out)?;
    let w = s
        .weights()
        .ok_or_else(|| Failure::Usage("the model carries no bin weights; refit it with `fit`".into()))?;
    let mode = if a.fix_others { ViMode::FixOthers } else { ViMode::Free };
    let ranges = s
        .blocks()
        .into_iter()
        .enumerate()
        .map(|(j, b)| vi_range(s.ellipsoid(), j, b.clone(), &w[b.start - 1..b.end - 1], mode))
        .collect::<Result<Vec<_>, _>>()?;
    let mode_s = if a.fix_others { "fix_others" } else { "free" };
    let names = &s.model.feature_names;
    let rows = ranges.iter().map(|r| {
        vec![names[r.feature].clone(), fmt(r.vi_minus), fmt(r.vi_center), fmt(r.vi_plus), mode_s.to_string()]
    });
    let p = out.csv("vi.csv", &["feature", "vi_minus", "vi_center", "vi_plus", "mode"], rows)?;
    out.json("vi.json", &ranges)?;
    let top = ranges
        .iter()
        .max_by(|x, y| x.vi_minus.total_cmp(&y.vi_minus))
        .map_or("-", |r| names[r.feature].as_str());
    Ok(format!("vi ({mode_s}): {} features, largest vi_minus: {top} -> {}", ranges.len(), p.display()))
}

#[derive(Serialize)]
struct MonotoneOut<'a> {
    constraints: Vec<(String, DirectionArg)>,
    #[serde(flatten)]
    result: &'a rashgam_core::apps::MonotoneResult,
    shape_functions: Vec<rashgam_core::io::ShapeFunction>,
}

fn parse_also(s: &str) -> Res<(String, DirectionArg)> {
    let (f, d) = s
        .rsplit_once(':')
        .ok_or_else(|| Failure::Usage(format!("--also expects feature:direction, got `{s}`")))?;
    let dir = match d {
        "increasing" => DirectionArg::Increasing,
        "decreasing" => DirectionArg::Decreasing,
        _ => return Err(Failure::Usage(format!("unknown direction `{d}`"))),
    };
    Ok((f.to_string(), dir))
}

fn monotone(a: &MonotoneArgs, out: &mut Artifacts) -> Res<String> {
    let s = load_session(&a.input, out)?;
    let names = &s.model.feature_names;
    let mut wanted = vec![(a.feature.clone(), a.direction)];
    for x in &a.also {
        wanted.push(parse_also(x)?);
    }
    let mut chains = Vec::new();
    let mut constraints = Vec::new();
    for (f, d) in wanted {
        let j = resolve_feature(names, &f)?;
        chains.push(ChainConstraint {
            block: s.feature_block(j).expect("resolved feature"),
            direction: d.into(),
        });
        constraints.push((names[j].clone(), d));
    }
    let r = monotone_fit(s.ellipsoid(), &chains, &[])?;
    let p = out.json(
        "monotone.json",
        &MonotoneOut {
            constraints,
            result: &r,
            shape_functions: s.model.shape_functions_of(&r.omega)?,
        },
    )?;
    Ok(format!("monotone: q={:.6} feasible={} -> {}", r.q, r.feasible, p.display()))
}

fn read_request(path: &Path, out: &mut Artifacts) -> Res<Vec<f64>> {
    let v: serde_json::Value = read_doc("request", path, out)?;
    let arr = v.get("omega_req").unwrap_or(&v);
    serde_json::from_value(arr.clone()).map_err(|e| input_error("request", path, e))
}

fn project(a: &ProjectArgs, out: &mut Artifacts) -> Res<String> {
    let (_, e) = load_ellipsoid(&a.ellipsoid, out)?;
    let req = read_request(&a.request, out)?;
    if req.len() != e.dim() {
        return Err(Failure::Usage(format!(
            "request has {} entries but the ellipsoid has dimension {}",
            req.len(),
            e.dim()
        )));
    }
    let r = project_edit(&e, &req)?;
    let p = out.json("projected.json", &r)?;
    Ok(format!(
        "project: inside_already={} distance={:.6} -> {}",
        r.inside_already,
        r.distance,
        p.display()
    ))
}

fn sample(a: &SampleArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--n", a.n)?;
    let (_, e) = load_ellipsoid(&a.ellipsoid, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = e.sample_n(a.n, &mut rng);
    let header: Vec<String> = (0..e.dim()).map(|i| format!("w{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let p = out.csv("samples.csv", &header, draws.iter().map(|w| w.iter().map(|&x| fmt(x)).collect::<Vec<_>>()))?;
    Ok(format!("sample: {} draws of dimension {} -> {}", a.n, e.dim(), p.display()))
}

fn jumps(a: &JumpsArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--n", a.n)?;
    let s = load_session(&a.input, out)?;
    let j = resolve_feature(&s.model.feature_names, &a.feature)?;
    let (Some(left), Some(right)) = (s.bin_coordinate(j, a.k), s.bin_coordinate(j, a.k + 1)) else {
        return Err(Failure::Usage(format!("feature {} has {} bins; --k must be below {}", a.feature, s.bins(j), s.bins(j).saturating_sub(1))));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = jump_analysis(s.ellipsoid(), j, a.k, left, right, a.n, a.tau, &mut rng)?;
    let p = out.json("jumps.json", &r)?;
    Ok(format!(
        "jumps: down={:.4} up={:.4} flat={:.4} -> {}",
        r.fraction_down,
        r.fraction_up,
        r.fraction_flat,
        p.display()
    ))
}

#[derive(Serialize)]
struct PrecisionOut {
    theta: f64,
    #[serde(flatten)]
    estimate: rashgam_core::eval::PrecisionEstimate,
}

fn precision(a: &PrecisionArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--n", a.n)?;
    let l = load_model_data(&a.input, out)?;
    let (edoc, e) = load_ellipsoid(&a.ellipsoid, out)?;
    matched(&l, &e)?;
    let est = estimate_precision(&e, &l.objective()?, edoc.theta, a.n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let p = out.json(
        "precision.json",
        &PrecisionOut {
            theta: edoc.theta,
            estimate: est,
        },
    )?;
    Ok(format!(
        "precision: {:.4} +/- {:.4} ({} samples) -> {}",
        est.precision,
        est.half_width,
        a.n,
        p.display()
    ))
}

fn tradeoff(a: &TradeoffArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--n", a.n)?;
    if a.ratios.iter().any(|&r| !(r > 0.0)) {
        return Err(Failure::Usage("--ratios must be positive".into()));
    }
    let l = load_model_data(&a.input, out)?;
    let (edoc, e) = load_ellipsoid(&a.ellipsoid, out)?;
    matched(&l, &e)?;
    let rows = tradeoff_curve(&e, &l.objective()?, edoc.theta, &a.ratios, a.n, seed)?;
    let p = out.csv(
        "tradeoff.csv",
        &["rho", "log_volume", "precision", "half_width"],
        rows.iter().map(|r| vec![fmt(r.rho), fmt(r.log_volume), fmt(r.precision), fmt(r.half_width)]),
    )?;
    Ok(format!("tradeoff: {} scale factors -> {}", rows.len(), p.display()))
}

#[derive(Serialize)]
struct RatiosOut {
    k: usize,
    k_tilde: usize,
    candidates: usize,
    skipped_empty: usize,
    plans: usize,
    median_precision_ratio: f64,
    median_volume_ratio: f64,
}

fn ratios(a: &RatiosArgs, seed: u64, out: &mut Artifacts) -> Res<String> {
    check_positive("--n", a.n)?;
    check_positive("--plans", a.plans)?;
    check_positive("--candidates", a.candidates)?;
    let l = load_model_data(&a.input, out)?;
    let (edoc, e) = load_ellipsoid(&a.ellipsoid, out)?;
    matched(&l, &e)?;
    let erm = l.doc.reduced_params()?;
    let parent = RashomonFit {
        support: l.support.clone(),
        erm_loss: l.objective()?.value(&erm),
        erm,
        theta: edoc.theta,
        lambda2: l.doc.lambda2,
        lambda_s: l.doc.lambda_s,
        init: e.clone(),
        ellipsoid: e,
        trace: FitTrace::default(),
    };
    let k = l.support.size();
    let k_tilde = a.k_tilde.unwrap_or_else(|| default_k_tilde(k));
    let direct = optimizer(&a.optimizer)?;
    let rep = method_ratio_report(&l.data, &parent, k_tilde, a.plans, a.candidates, &direct, a.n, seed)?;
    let names = &l.doc.feature_names;
    let p = out.csv(
        "ratios.csv",
        &[
            "plan",
            "u",
            "precision_direct",
            "precision_sliced",
            "precision_ratio",
            "volume_ratio",
            "time_direct_s",
            "time_sliced_s",
        ],
        rep.rows.iter().map(|r| {
            vec![
                plan_label(&r.plan, names),
                fmt(r.u),
                fmt(r.precision_direct),
                fmt(r.precision_sliced),
                fmt(r.precision_ratio),
                fmt(r.volume_ratio),
                fmt(r.time_direct_s),
                fmt(r.time_sliced_s),
            ]
        }),
    )?;
    // wall times stay in the CSV only, so the JSON is reproducible
    let summary = RatiosOut {
        k,
        k_tilde,
        candidates: rep.candidates,
        skipped_empty: rep.skipped_empty,
        plans: rep.rows.len(),
        median_precision_ratio: rep.median_precision_ratio(),
        median_volume_ratio: rep.median_volume_ratio(),
    };
    out.json("ratios.json", &summary)?;
    Ok(format!(
        "ratios: {} plans, median precision ratio {:.3}, median volume ratio {:.3} -> {}",
        summary.plans,
        summary.median_precision_ratio,
        summary.median_volume_ratio,
        p.display()
    ))
}

#[derive(Serialize)]
struct BoxOut {
    theta: f64,
    delta: f64,
    center: Vec<f64>,
    /// Sum of log interval widths.
    log_volume: f64,
    /// Axis segments of the ellipsoid that leave their interval (only with
    /// `--ellipsoid`).
    axis_violations: Option<usize>,
}

fn box_volume(a: &BoxArgs, out: &mut Artifacts) -> Res<String> {
    if !(a.delta > 0.0) {
        return Err(Failure::Usage("--delta must be positive".into()));
    }
    let l = load_model_data(&a.input, out)?;
    let obj = l.objective()?;
    let (center, theta, e) = match &a.ellipsoid {
        Some(path) => {
            let (edoc, e) = load_ellipsoid(path, out)?;
            matched(&l, &e)?;
            (edoc.center.clone(), edoc.theta, Some(e))
        }
        None => {
            if !(a.theta_mult > 1.0) {
                return Err(Failure::Usage("--theta-mult must exceed 1".into()));
            }
            let w = l.doc.reduced_params()?;
            let t = a.theta_mult * obj.value(&w);
            (w, t, None)
        }
    };
    let segs = all_segments(&obj, &center, theta, a.delta)?;
    let mut violations = 0;
    let rows: Vec<Vec<String>> = segs
        .iter()
        .map(|s| {
            let mut row = vec![s.j.to_string(), fmt(s.left), fmt(s.right), fmt(s.width())];
            if let Some(e) = &e {
                let half = 1.0 / e.q()[(s.j, s.j)].sqrt();
                let (lo, hi) = (center[s.j] - half, center[s.j] + half);
                let inside = lo >= s.left - s.delta && hi <= s.right + s.delta;
                violations += usize::from(!inside);
                row.extend([fmt(lo), fmt(hi), inside.to_string()]);
            }
            row
        })
        .collect();
    let mut header = vec!["coordinate", "left", "right", "width"];
    if e.is_some() {
        header.extend(["axis_left", "axis_right", "axis_contained"]);
    }
    let p = out.csv("box.csv", &header, rows)?;
    let log_volume = segs.iter().map(|s| s.width().ln()).sum();
    out.json(
        "box.json",
        &BoxOut {
            theta,
            delta: a.delta,
            center,
            log_volume,
            axis_violations: e.as_ref().map(|_| violations),
        },
    )?;
    let extra = if e.is_some() {
        format!(", {violations}/{} axis segments outside their interval", segs.len())
    } else {
        String::new()
    };
    Ok(format!("box-volume: log volume {log_volume:.4}{extra} -> {}", p.display()))
}

fn serve(a: &ServeArgs, threads: Option<usize>) -> Res<String> {
    let ip: IpAddr = a
        .host
        .parse()
        .map_err(|e| Failure::Usage(format!("invalid --host `{}`: {e}", a.host)))?;
    let state = AppState::from_files(a.input.model.clone(), a.input.ellipsoid.clone())
        .map_err(|e| Failure::Usage(format!("cannot load session: {e}")))?;
    let addr = SocketAddr::new(ip, a.port);
    eprintln!("serving on http://{addr}");
    rashgam_service::serve_blocking(state, addr, threads).map_err(|e| Failure::Domain(format!("server failed: {e}")))?;
    Ok("serve: stopped".into())
}
