//! Subcommand bodies. Each merges its flags with the config file, runs the
//! library, prints a short summary and writes the requested artifacts.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use orthofree::conflict::{build_conflict_graph_capped, cache_path, load_or_build, ConflictGraph, DEFAULT_MAX_GRAPH_LEVEL};
use orthofree::convexify::{conv_with, HullOptions, MERGE_TOL};
use orthofree::density::{select_dense_cells_with, EpsilonPolicy, MembershipOracle};
use orthofree::grid::{cell_count, CellSet, GridLevel};
use orthofree::scaling::{choose_constants, scale_set_with, verify_scaled_opf, ScaleOverrides};
use orthofree::search::{self, GreedyOrder, SearchResult, BEST_KNOWN_BOUND};
use orthofree::sphere::UnitVector;
use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::output::{measure, tagged, write_json, write_text, Meta};
use crate::{CliError, Command, ConflictArgs, ConvexifyArgs, FilterArgs, GraphArgs, GridArgs, ReportArgs, ScaleArgs, SearchArgs};

pub struct Context {
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
}

pub fn dispatch(command: Command, cfg: Config, ctx: &Context) -> Result<(), CliError> {
    match command {
        Command::Grid(a) => grid(a, cfg, ctx),
        Command::Conflicts(a) => conflicts(a, cfg, ctx),
        Command::Search(a) => search_cmd(a, cfg, ctx),
        Command::Filter(a) => filter(a, cfg, ctx),
        Command::Scale(a) => scale(a, cfg, ctx),
        Command::Convexify(a) => convexify(a, cfg, ctx),
        Command::Report(a) => report(a, cfg, ctx),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config key)")))
}

fn meta(command: &str, started: SystemTime, ctx: &Context) -> Meta {
    Meta { command: command.into(), started, threads: ctx.threads, extra: Map::new() }
}

/// `π/16`-style rendering of π·4^-level.
fn pi_over(level: u32) -> String {
    match level {
        0 => "π".into(),
        _ => format!("π/{}", 1u64 << (2 * level)),
    }
}

fn grid(a: GridArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let level = required(cfg.take("level", a.level)?, "level")?;
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    cfg.finish()?;
    let g = GridLevel::new(level)?;
    let n = cell_count(level);
    println!("level {level}: {n} cells, each {} sr (fraction 1/{n})", pi_over(level));
    println!("total area {:.15} sr", g.total_area());
    if let Some(out) = out {
        write_json(&out, &tagged("cell_set", &CellSet::all(level))?)?;
        meta("grid", started, ctx).write_for(&out)?;
    }
    Ok(())
}

struct Graph {
    graph: ConflictGraph,
    cache_hit: bool,
    cache_file: Option<PathBuf>,
}

fn take_graph_args(a: GraphArgs, cfg: &mut Config) -> Result<(u32, f64, u32), CliError> {
    let level = required(cfg.take("level", a.level)?, "level")?;
    let margin = cfg.take("margin", a.margin)?.unwrap_or(0.0);
    let max_level = cfg.take("max-level", a.max_level)?.unwrap_or(DEFAULT_MAX_GRAPH_LEVEL);
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(CliError::Usage(format!("--margin must be a finite non-negative number, got {margin}")));
    }
    Ok((level, margin, max_level))
}

fn load_graph(level: u32, margin: f64, max_level: u32, ctx: &Context) -> Result<Graph, CliError> {
    if level > max_level {
        return Err(CliError::ResourceCap(format!(
            "conflict graph for level {level} exceeds the limit of level {max_level}; raise it with --max-level"
        )));
    }
    let build = || build_conflict_graph_capped(level, margin, max_level);
    match &ctx.cache_dir {
        Some(dir) => {
            let path = cache_path(dir, level, margin);
            let (graph, cache_hit) = load_or_build(&path, level, margin, build)?;
            Ok(Graph { graph, cache_hit, cache_file: Some(path) })
        }
        None => Ok(Graph { graph: build()?, cache_hit: false, cache_file: None }),
    }
}

fn graph_meta(m: &mut Meta, g: &Graph) {
    m.extra.insert("cache_hit".into(), json!(g.cache_hit));
    if let Some(p) = &g.cache_file {
        m.extra.insert("cache_file".into(), json!(p.display().to_string()));
    }
}

fn conflicts(a: ConflictArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let (level, margin, max_level) = take_graph_args(a.graph, &mut cfg)?;
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    cfg.finish()?;
    let g = load_graph(level, margin, max_level, ctx)?;
    let graph = &g.graph;
    let selfs = graph.self_conflicts();
    let hist = graph.degree_histogram();
    println!("level {level}, margin {margin}: {} cells, {} conflict edges", graph.cell_count(), graph.edge_count());
    println!("self-conflicting cells: {}", selfs.len());
    if let (Some(lo), Some(hi)) = (hist.first(), hist.last()) {
        println!("degree range {}..={} over {} distinct degrees", lo.0, hi.0, hist.len());
    }
    if let Some(out) = out {
        let v = json!({
            "kind": "conflict_graph_stats",
            "level": level,
            "margin": margin,
            "cells": graph.cell_count(),
            "edges": graph.edge_count(),
            "self_conflicts": selfs,
            "degree_histogram": hist,
        });
        write_json(&out, &v)?;
        let mut m = meta("conflicts", started, ctx);
        graph_meta(&mut m, &g);
        m.write_for(&out)?;
    }
    Ok(())
}

fn search_cmd(a: SearchArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let (level, margin, max_level) = take_graph_args(a.graph, &mut cfg)?;
    let method: String = cfg.take("method", a.method)?.unwrap_or_else(|| "greedy".into());
    let seed: u64 = cfg.take("seed", a.seed)?.unwrap_or(0);
    let iters: u64 = cfg.take("iters", a.iters)?.unwrap_or(100_000);
    let init: String = cfg.take("init", a.init)?.unwrap_or_else(|| "baseline".into());
    let node_budget: u64 = cfg.take("node-budget", a.node_budget)?.unwrap_or(10_000_000);
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    let csv: Option<PathBuf> = cfg.take("csv", a.csv)?;
    cfg.finish()?;
    if !matches!(method.as_str(), "baseline" | "greedy" | "random" | "local" | "exact") {
        return Err(CliError::Usage(format!("unknown method `{method}`; expected baseline, greedy, random, local or exact")));
    }
    if !matches!(init.as_str(), "baseline" | "greedy") {
        return Err(CliError::Usage(format!("unknown init `{init}`; expected baseline or greedy")));
    }
    let g = load_graph(level, margin, max_level, ctx)?;
    let graph = &g.graph;
    let result: SearchResult = match method.as_str() {
        "baseline" => search::baseline(graph)?,
        "greedy" => search::greedy_mis(graph, GreedyOrder::MinDegree),
        "random" => search::greedy_mis(graph, GreedyOrder::Random(seed)),
        "local" => {
            let start = if init == "greedy" {
                search::greedy_mis(graph, GreedyOrder::MinDegree).selection
            } else {
                search::baseline(graph)?.selection
            };
            search::local_search(graph, &start, iters, seed)?
        }
        _ => search::exact_mis(graph, node_budget)?,
    };
    println!("level {level}, {}: {} cells, {}", result.method, result.cells, measure(result.measure_sr));
    if let Some(opt) = result.optimal {
        println!("search space exhausted: {opt} ({} nodes)", result.nodes);
    }
    println!("gap to best known bound {BEST_KNOWN_BOUND}: {:.6}", BEST_KNOWN_BOUND - result.fraction);
    if let Some(gap) = result.double_cap_gap {
        println!("gain over double cap: {gap:.6}");
    }
    if let Some(out) = &out {
        write_json(out, &tagged("search_result", &result)?)?;
        let mut m = meta("search", started, ctx);
        graph_meta(&mut m, &g);
        m.write_for(out)?;
    }
    if let Some(csv) = &csv {
        write_text(csv, &search::leaderboard_csv(std::slice::from_ref(&result))?)?;
    }
    if result.exceeds_best_known_bound {
        println!("FINDING: fraction {} exceeds the best known bound {BEST_KNOWN_BOUND}", result.fraction);
        return Err(CliError::Certification("selection exceeds the best known upper bound; check the conflict graph".into()));
    }
    Ok(())
}

fn parse_floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
    if v.len() != n {
        return Err(CliError::Usage(format!("{what}: expected {n} comma-separated numbers")));
    }
    Ok(v)
}

/// Oracle from `all`, `double-cap[:r]`, `cap:θ,φ,r`, `sieve:d`, `cells:PATH`
/// or a path to a JSON oracle.
pub fn parse_oracle(spec: &str) -> Result<MembershipOracle, CliError> {
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (spec, None),
    };
    let oracle = match (head, arg) {
        ("all", None) => MembershipOracle::All,
        ("double-cap", None) => MembershipOracle::DoubleCap { radius: FRAC_PI_4 },
        ("double-cap", Some(r)) => MembershipOracle::DoubleCap { radius: parse_floats(r, 1, "double-cap radius")?[0] },
        ("cap", Some(a)) => {
            let v = parse_floats(a, 3, "cap")?;
            MembershipOracle::Cap { center: UnitVector::from_polar(v[0], v[1]), radius: v[2] }
        }
        ("sieve", Some(d)) => MembershipOracle::SieveFractal {
            depth: d.trim().parse().map_err(|e| CliError::Usage(format!("sieve depth: {e}")))?,
        },
        ("cells", Some(p)) => MembershipOracle::CellSet { cells: load_selection(Path::new(p))? },
        _ if Path::new(spec).is_file() => {
            let text = std::fs::read_to_string(spec)?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("oracle file {spec}: {e}")))?
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown oracle `{spec}`; expected all, double-cap[:r], cap:theta,phi,r, sieve:depth, cells:PATH or a JSON file"
            )))
        }
    };
    oracle.validate()?;
    Ok(oracle)
}

fn filter(a: FilterArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let spec: String = required(cfg.take("oracle", a.oracle)?, "oracle")?;
    let level = required(cfg.take("level", a.level)?, "level")?;
    let epsilon: f64 = required(cfg.take("epsilon", a.epsilon)?, "epsilon")?;
    let samples: usize = cfg.take("samples", a.samples)?.unwrap_or(4000);
    let seed: u64 = cfg.take("seed", a.seed)?.unwrap_or(0);
    let relaxed = cfg.take_flag("allow-outside-theorem-range", a.allow_outside_theorem_range)?;
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    let csv: Option<PathBuf> = cfg.take("csv", a.csv)?;
    cfg.finish()?;
    let policy = if relaxed { EpsilonPolicy::Relaxed } else { EpsilonPolicy::Strict };
    let oracle = parse_oracle(&spec)?;
    let report = select_dense_cells_with(&oracle, level, epsilon, samples, seed, policy)?;
    println!(
        "level {level}, epsilon {epsilon}: {} of {} cells selected",
        report.selected.len(),
        cell_count(level)
    );
    println!("oracle measure {}", measure(report.oracle_measure));
    println!("captured {} ± {:.2e}", measure(report.captured_measure), report.captured_stderr);
    println!("captures more than (1 − ε)·μ(M): {}", report.captures_one_minus_epsilon);
    if let Some(out) = &out {
        write_json(out, &tagged("density_report", &report)?)?;
        let mut m = meta("filter", started, ctx);
        m.extra.insert("oracle".into(), json!(spec));
        m.write_for(out)?;
    }
    if let Some(csv) = &csv {
        write_text(csv, &report.to_csv()?)?;
    }
    Ok(())
}

/// A cell set from a `cell_set`, `search_result` or `density_report` artifact.
pub fn load_selection(path: &Path) -> Result<CellSet, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read selection {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let inner = match v.get("kind").and_then(Value::as_str) {
        Some("search_result") => v.get("selection"),
        Some("density_report") => v.get("selected"),
        Some("cell_set") | None => Some(&v),
        Some(k) => return Err(CliError::Usage(format!("{}: artifact kind `{k}` holds no selection", path.display()))),
    };
    let inner = inner.ok_or_else(|| CliError::Usage(format!("{}: selection field missing", path.display())))?;
    serde_json::from_value(inner.clone()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn scale(a: ScaleArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let path: PathBuf = required(cfg.take("selection", a.selection)?, "selection")?;
    let epsilon: f64 = required(cfg.take("epsilon", a.epsilon)?, "epsilon")?;
    let shrink: Option<f64> = cfg.take("shrink", a.shrink)?;
    let delta: Option<f64> = cfg.take("delta", a.delta)?;
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    cfg.finish()?;
    for (name, v) in [("shrink", shrink), ("delta", delta)] {
        if let Some(x) = v {
            if !(0.0..PI).contains(&x) {
                return Err(CliError::Usage(format!("--{name} must lie in [0, π), got {x}")));
            }
        }
    }
    let selection = load_selection(&path)?;
    if selection.is_empty() {
        return Err(CliError::Usage("selection is empty".into()));
    }
    let constants = choose_constants(epsilon, selection.measure())?;
    let scaled = scale_set_with(&selection, &constants, ScaleOverrides { shrink, delta });
    let cert = verify_scaled_opf(&scaled.regions);
    let s = &scaled.summary;
    println!("epsilon {epsilon}: ε1 = {:.6e}, δ = {:.6e}, N = {}", constants.epsilon1, s.delta, constants.n);
    println!("input {} cells, {}", s.input_cells, measure(s.input_measure));
    println!(
        "polar cells removed {}, loss {:.6e} sr against budget {:.6e} sr",
        s.polar_cells_removed, s.polar_loss, s.polar_budget
    );
    println!("scaled regions {}, lower bound {:.6e} sr, target {:.6e} sr", scaled.regions.len(), s.lower_bound_total, s.target);
    println!("measure claim holds: {}", s.measure_claim_holds);
    if !s.polar_loss_within_budget {
        println!("note: whole-cell polar removal loses more than εμ/2; a finer level narrows the polar band");
    }
    println!("pairs checked {}, violations {}", cert.pairs_checked, cert.violations.len());
    if let Some(out) = &out {
        let v = json!({
            "kind": "scale_result",
            "constants": constants,
            "overrides": scaled.overrides,
            "summary": scaled.summary,
            "certificate": cert,
            "regions": scaled.regions,
        });
        write_json(out, &v)?;
        let mut m = meta("scale", started, ctx);
        m.extra.insert("selection".into(), json!(path.display().to_string()));
        m.write_for(out)?;
    }
    if !cert.is_clean() {
        return Err(CliError::Certification(format!(
            "scaled set has {} orthogonal pair violation(s)",
            cert.violations.len()
        )));
    }
    Ok(())
}

fn convexify(a: ConvexifyArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let path: PathBuf = required(cfg.take("selection", a.selection)?, "selection")?;
    let defaults = HullOptions::default();
    let opts = HullOptions {
        initial_samples: cfg.take("initial-samples", a.initial_samples)?.unwrap_or(defaults.initial_samples),
        max_samples: cfg.take("max-samples", a.max_samples)?.unwrap_or(defaults.max_samples),
        area_tol: cfg.take("area-tol", a.area_tol)?.unwrap_or(defaults.area_tol),
    };
    let merge_tol: f64 = cfg.take("merge-tol", a.merge_tol)?.unwrap_or(MERGE_TOL);
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    cfg.finish()?;
    if opts.initial_samples == 0 || opts.max_samples < opts.initial_samples {
        return Err(CliError::Usage("need 0 < --initial-samples ≤ --max-samples".into()));
    }
    if !(merge_tol >= 0.0 && opts.area_tol >= 0.0) {
        return Err(CliError::Usage("tolerances must be non-negative".into()));
    }
    let selection = load_selection(&path)?;
    let r = conv_with(&selection, &opts, merge_tol)?;
    println!(
        "{} cells in {} components: {} hulls, {} after merging",
        selection.len(),
        r.conv1.components,
        r.conv1.hulls.len(),
        r.polygons
    );
    println!("cell measure {}", measure(r.cell_measure));
    println!("polygon measure {}", measure(r.polygon_measure));
    let unconverged = r.conv1.hulls.iter().filter(|h| !h.converged).count();
    if unconverged > 0 {
        println!("note: {unconverged} hull(s) still changing by more than {:e} sr at {} samples per edge", opts.area_tol, opts.max_samples);
    }
    println!("orthogonality violations: {}", r.violations.len());
    if let Some(out) = &out {
        write_json(out, &tagged("convexify_result", &r)?)?;
        let mut m = meta("convexify", started, ctx);
        m.extra.insert("selection".into(), json!(path.display().to_string()));
        m.write_for(out)?;
    }
    if !r.violations.is_empty() {
        return Err(CliError::Certification(format!("{} polygon pair(s) contain orthogonal points", r.violations.len())));
    }
    Ok(())
}

fn report(a: ReportArgs, mut cfg: Config, ctx: &Context) -> Result<(), CliError> {
    let started = SystemTime::now();
    let out: Option<PathBuf> = cfg.take("out", a.out)?;
    let csv: Option<PathBuf> = cfg.take("csv", a.csv)?;
    cfg.finish()?;
    if a.inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one --input".into()));
    }
    let mut results: Vec<SearchResult> = Vec::new();
    let mut others: Vec<Value> = Vec::new();
    for p in &a.inputs {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        match v.get("kind").and_then(Value::as_str) {
            Some("search_result") => {
                results.push(serde_json::from_value(v).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)
            }
            Some("density_report") => others.push(json!({
                "kind": "density_report",
                "level": v["level"],
                "epsilon": v["epsilon"],
                "selected_cells": v["selected"]["cells"].as_array().map_or(0, Vec::len),
                "captured_measure": v["captured_measure"],
            })),
            Some("scale_result") => others.push(json!({
                "kind": "scale_result",
                "epsilon": v["constants"]["epsilon"],
                "measure_claim_holds": v["summary"]["measure_claim_holds"],
                "violations": v["certificate"]["violations"].as_array().map_or(0, Vec::len),
            })),
            Some("convexify_result") => others.push(json!({
                "kind": "convexify_result",
                "polygons": v["polygons"],
                "polygon_measure": v["polygon_measure"],
                "violations": v["violations"].as_array().map_or(0, Vec::len),
            })),
            Some(k) => return Err(CliError::Usage(format!("{}: cannot report on artifact kind `{k}`", p.display()))),
            None => return Err(CliError::Usage(format!("{}: not an orthofree artifact", p.display()))),
        }
    }
    results.sort_by(|x, y| {
        y.fraction
            .total_cmp(&x.fraction)
            .then(x.level.cmp(&y.level))
            .then(x.method.cmp(&y.method))
            .then(x.seed.cmp(&y.seed))
    });
    // Best fraction per level, ascending level.
    let mut series: Vec<(u32, f64)> = Vec::new();
    for r in &results {
        match series.iter_mut().find(|(l, _)| *l == r.level) {
            Some(e) => e.1 = e.1.max(r.fraction),
            None => series.push((r.level, r.fraction)),
        }
    }
    series.sort_by_key(|e| e.0);
    for (i, r) in results.iter().enumerate() {
        println!("{:>3}. level {} {:<8} {:>6} cells  fraction {:.6}", i + 1, r.level, r.method, r.cells, r.fraction);
    }
    for o in &others {
        println!("also: {o}");
    }
    let leaderboard: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "level": r.level,
                "method": r.method,
                "seed": r.seed,
                "cells": r.cells,
                "fraction": r.fraction,
                "optimal": r.optimal,
                "gap_to_best_known_bound": BEST_KNOWN_BOUND - r.fraction,
                "double_cap_gap": r.double_cap_gap,
            })
        })
        .collect();
    if let Some(out) = &out {
        let v = json!({
            "kind": "report",
            "best_known_bound": BEST_KNOWN_BOUND,
            "leaderboard": leaderboard,
            "series": series.iter().map(|(l, f)| json!({"level": l, "fraction": f})).collect::<Vec<_>>(),
            "other_artifacts": others,
        });
        write_json(out, &v)?;
        let mut m = meta("report", started, ctx);
        m.extra.insert(
            "inputs".into(),
            json!(a.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
        );
        m.write_for(out)?;
    }
    if let Some(csv) = &csv {
        let mut text = String::from("level,fraction\n");
        for (l, f) in &series {
            text.push_str(&format!("{l},{f}\n"));
        }
        write_text(csv, &text)?;
    }
    Ok(())
}
