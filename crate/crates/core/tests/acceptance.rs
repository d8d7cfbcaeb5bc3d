//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use surfc_core::chip::{chip_capacity, ChipConfig, ChipLayout, ChipSpec, Model, SlackPolicy};
use surfc_core::circuit::{GateDag, LogicalCircuit};
use surfc_core::harness::{run, CircuitSource, CutKind, GeneratorSpec, MappingKind, RunConfig, SchedulerKind};
use surfc_core::oracle::{optimal_cycles, OracleBudget};
use surfc_core::placement::{adjust_bandwidth, init_cut_types, random_mapping, snake_mapping, ArrayShape, TileMapping};
use surfc_core::profiler::para_finding;
use surfc_core::router::{route_batch_guaranteed, Route, RoutingGraph, Site};
use surfc_core::scheduler::{schedule_limited, schedule_sufficient, validate, LimitedOptions};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn config(g: GeneratorSpec, model: Model, chip: ChipConfig) -> RunConfig {
    let mut c = RunConfig::new(CircuitSource::Generated(g), model);
    c.chip = chip;
    c
}

/// Golden cases whose cycle count equals the critical path.
fn criterion_1() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, cfg: RunConfig, want: usize| {
        let start = Instant::now();
        match run(&cfg) {
            Ok(out) => {
                let r = &out.report;
                let fast = start.elapsed() < Duration::from_secs(1);
                let good = r.valid && r.delta == want && r.delta == r.alpha && fast;
                ok &= good;
                notes.push(format!("{name} delta={} alpha={} ({:?})", r.delta, r.alpha, start.elapsed()));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    };
    let mut ghz = config(GeneratorSpec::Ghz { n: 23 }, Model::LatticeSurgery, ChipConfig::MinimumViable);
    ghz.scheduler = SchedulerKind::Limited;
    check("ghz23-ls", ghz, 22);
    check("bv10-dd", config(GeneratorSpec::Bv { n: 10, secret: None }, Model::DoubleDefect, ChipConfig::MinimumViable), 5);
    // Chain family: capacity covers the parallelism estimate of 1.
    for (model, chip) in [
        (Model::DoubleDefect, ChipConfig::MinimumViable),
        (Model::DoubleDefect, ChipConfig::FourX),
        (Model::LatticeSurgery, ChipConfig::Bandwidth { lanes: 1 }),
        (Model::LatticeSurgery, ChipConfig::Sufficient),
    ] {
        let cfg = config(GeneratorSpec::QpeLike { n: 8, gates: 42 }, model, chip);
        check(&format!("qpe42-{model}-{chip}"), cfg, 42);
    }
    verdict(ok, notes.join("; "))
}

/// Five independent gates whose endpoints sit on opposite rows in reversed
/// order; every route must cross the middle channel.
fn criterion_2() -> Verdict {
    let start = Instant::now();
    let (rows, cols, d) = (2, 5, 3);
    let spec = ChipSpec { model: Model::DoubleDefect, m1: 60, m2: 75, d };
    let base = match ChipLayout::derive(spec, rows, cols, SlackPolicy::Unassigned) {
        Ok(l) => l,
        Err(e) => return verdict(false, format!("layout: {e}")),
    };
    let mut pos = Vec::new();
    for i in 0..cols {
        pos.push((0, i));
        pos.push((1, cols - 1 - i));
    }
    let mapping = TileMapping::new(rows, cols, pos).unwrap();
    let circuit = LogicalCircuit::new(2 * cols, (0..cols).map(|i| (2 * i, 2 * i + 1))).unwrap();
    let dag = GateDag::build(&circuit);
    let layers = para_finding(&dag);
    let layout = adjust_bandwidth(&base, &mapping, &circuit);
    let middle = layout.bandwidths(surfc_core::chip::Axis::Horizontal)[1];
    let graph = RoutingGraph::build(&layout, &mapping);
    let cuts = init_cut_types(&circuit, &dag);
    let schedule = if layout.capacity().is_some_and(|c| c >= layers.pm()) {
        schedule_sufficient(&circuit, &layers, &graph, &layout, &mapping)
    } else {
        schedule_limited(&circuit, &dag, &graph, &layout, &mapping, &cuts, LimitedOptions::default())
    };
    let before = RoutingGraph::build(&base, &mapping);
    let unadjusted = schedule_limited(&circuit, &dag, &before, &base, &mapping, &cuts, LimitedOptions::default());
    match schedule {
        Ok(s) => {
            let valid = validate(&s, &circuit, &graph, &mapping).is_ok();
            let slow = unadjusted.map(|u| u.delta()).map_or("unroutable".to_string(), |d| d.to_string());
            verdict(
                valid && s.delta() == 1 && start.elapsed() < Duration::from_secs(1),
                format!("delta={} middle channel b={middle}, without adjusting delta={slow} ({:?})", s.delta(), start.elapsed()),
            )
        }
        Err(e) => verdict(false, format!("schedule: {e}")),
    }
}

/// Per-node usage of a set of routes stays within capacity and every route
/// joins its pair.
fn routes_fit(graph: &RoutingGraph, pairs: &[(Site, Site)], routes: &[Route]) -> bool {
    if routes.len() != pairs.len() {
        return false;
    }
    let mut used: HashMap<usize, u32> = HashMap::new();
    for (r, &(a, b)) in routes.iter().zip(pairs) {
        if !graph.route_joins(r, a, b) {
            return false;
        }
        for &node in r.nodes() {
            *used.entry(node).or_default() += 1;
        }
    }
    used.iter().all(|(&node, &u)| u <= graph.capacity(node))
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for b in [1usize, 3, 5] {
        let k = chip_capacity(b).unwrap();
        let failures: usize = (0..1000u64)
            .into_par_iter()
            .filter(|&trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(trial * 7 + b as u64);
                let (rows, cols) = loop {
                    let (r, c) = (rng.gen_range(3..=8), rng.gen_range(3..=8));
                    if r * c >= 2 * k {
                        break (r, c);
                    }
                };
                let mut sites: Vec<Site> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
                for i in 0..2 * k {
                    let j = rng.gen_range(i..sites.len());
                    sites.swap(i, j);
                }
                let pairs: Vec<(Site, Site)> = (0..k).map(|i| (sites[2 * i], sites[2 * i + 1])).collect();
                let layout = ChipLayout::uniform(Model::DoubleDefect, 3, rows, cols, b);
                let graph = RoutingGraph::build(&layout, &snake_mapping(0, ArrayShape { rows, cols }));
                !route_batch_guaranteed(&graph, b, &pairs).is_ok_and(|routes| routes_fit(&graph, &pairs, &routes))
            })
            .count();
        ok &= failures == 0;
        notes.push(format!("b={b} k={k}: {}/1000", 1000 - failures));
    }
    let fast = start.elapsed() < Duration::from_secs(120);
    verdict(ok && fast, format!("{} ({:?})", notes.join(", "), start.elapsed()))
}

fn random_circuit(rng: &mut ChaCha8Rng, max_n: usize, max_g: usize) -> LogicalCircuit {
    let n = rng.gen_range(2..=max_n);
    let g = rng.gen_range(1..=max_g);
    let pairs: Vec<(usize, usize)> = (0..g)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect();
    LogicalCircuit::new(n, pairs).unwrap()
}

/// Two-colours the graph on the given edges.
fn bipartite(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut colour: Vec<Option<bool>> = vec![None; n];
    for s in 0..n {
        if colour[s].is_some() {
            continue;
        }
        colour[s] = Some(false);
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            let cu = colour[u].unwrap();
            for &v in &adj[u] {
                match colour[v] {
                    None => {
                        colour[v] = Some(!cu);
                        stack.push(v);
                    }
                    Some(cv) if cv == cu => return false,
                    Some(_) => {}
                }
            }
        }
    }
    true
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = 0;
    let mut pairs_checked = 0;
    for _ in 0..500 {
        let c = random_circuit(&mut rng, 20, 60);
        let dag = GateDag::build(&c);
        let layers = para_finding(&dag);
        for w in layers.layers().windows(2) {
            let edges: Vec<(usize, usize)> =
                w.iter().flatten().map(|&g| (c.gate(g).control, c.gate(g).target)).collect();
            pairs_checked += 1;
            if !bipartite(c.n(), &edges) {
                bad += 1;
            }
        }
    }
    let fast = start.elapsed() < Duration::from_secs(30);
    verdict(bad == 0 && fast, format!("{bad} non-bipartite of {pairs_checked} layer pairs ({:?})", start.elapsed()))
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let results: Vec<Result<(usize, usize), String>> = (0..200u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(case + 5000);
            let c = random_circuit(&mut rng, 5, 6);
            let model = if case % 2 == 0 { Model::DoubleDefect } else { Model::LatticeSurgery };
            let layout = ChipLayout::uniform(model, 3, 2, 3, 1);
            let mapping = random_mapping(c.n(), ArrayShape { rows: 2, cols: 3 }, rng.gen());
            let graph = RoutingGraph::build(&layout, &mapping);
            let dag = GateDag::build(&c);
            let layers = para_finding(&dag);
            let s = schedule_sufficient(&c, &layers, &graph, &layout, &mapping).map_err(|e| format!("case {case}: {e}"))?;
            validate(&s, &c, &graph, &mapping).map_err(|v| format!("case {case}: {v:?}"))?;
            let opt = optimal_cycles(&c, &layout, &mapping, None, &budget).map_err(|e| format!("case {case}: {e}"))?;
            Ok((s.delta(), opt))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for r in &results {
        match r {
            Ok((resu, opt)) => {
                if *resu > (2.5 * *opt as f64).ceil() as usize {
                    bad.push(format!("{resu} vs {opt}"));
                }
                if *opt > 0 {
                    worst = worst.max(*resu as f64 / *opt as f64);
                }
            }
            Err(e) => bad.push(e.clone()),
        }
    }
    let fast = start.elapsed() < Duration::from_secs(600);
    verdict(
        bad.is_empty() && fast,
        format!("{} of 200 over the bound, worst ratio {worst:.2} ({:?}){}", bad.len(), start.elapsed(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join(", ")) }),
    )
}

fn corpus() -> Vec<GeneratorSpec> {
    vec![
        GeneratorSpec::Ghz { n: 9 },
        GeneratorSpec::Bv { n: 10, secret: None },
        GeneratorSpec::Qft { n: 6 },
        GeneratorSpec::Ising { n: 8, steps: 2 },
        GeneratorSpec::WState { n: 7 },
        GeneratorSpec::SwapTest { n: 7 },
        GeneratorSpec::QpeLike { n: 6, gates: 12 },
        GeneratorSpec::Random { n: 12, depth: 6, parallelism: 4, seed: Some(1) },
        GeneratorSpec::Random { n: 16, depth: 5, parallelism: 8, seed: Some(2) },
    ]
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut configs = Vec::new();
    for g in corpus() {
        for model in [Model::DoubleDefect, Model::LatticeSurgery] {
            for chip in [ChipConfig::MinimumViable, ChipConfig::FourX, ChipConfig::Sufficient, ChipConfig::Bandwidth { lanes: 2 }] {
                for &scheduler in SchedulerKind::ALL {
                    for &mapping in MappingKind::ALL {
                        let cut_kinds: &[CutKind] = if model == Model::DoubleDefect { CutKind::ALL } else { &[CutKind::Ecmas] };
                        for &cuts in cut_kinds {
                            let mut c = config(g.clone(), model, chip);
                            c.scheduler = scheduler;
                            c.mapping = mapping;
                            c.cuts = cuts;
                            c.trials = 4;
                            configs.push(c);
                        }
                    }
                }
            }
        }
    }
    let outcomes: Vec<Result<bool, (bool, String)>> = configs
        .par_iter()
        .map(|c| match run(c) {
            Ok(out) => Ok(out.report.valid && out.report.delta >= out.report.alpha),
            Err(e) => Err((e.is_infeasible(), format!("{c:?}: {e}"))),
        })
        .collect();
    let emitted = outcomes.iter().filter(|o| o.is_ok()).count();
    let bad = outcomes.iter().filter(|o| matches!(o, Ok(false))).count();
    let refused = outcomes.iter().filter(|o| matches!(o, Err((true, _)))).count();
    let errors: Vec<&String> = outcomes.iter().filter_map(|o| match o {
        Err((false, msg)) => Some(msg),
        _ => None,
    }).collect();
    verdict(
        bad == 0 && errors.is_empty(),
        format!(
            "{emitted} schedules, {bad} invalid or below alpha, {refused} refused as infeasible, {} errors ({:?}){}",
            errors.len(),
            start.elapsed(),
            errors.first().map_or(String::new(), |e| format!(": {e}"))
        ),
    )
}

fn mean_delta(configs: &[RunConfig]) -> Result<f64, String> {
    let deltas: Vec<Result<usize, String>> = configs
        .par_iter()
        .map(|c| {
            let out = run(c).map_err(|e| format!("{e}"))?;
            if out.report.valid {
                Ok(out.report.delta)
            } else {
                Err(format!("invalid schedule: {:?}", out.report.violations))
            }
        })
        .collect();
    let mut sum = 0usize;
    for d in deltas {
        sum += d?;
    }
    Ok(sum as f64 / configs.len() as f64)
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let base: Vec<RunConfig> = (0..50u64)
        .map(|seed| {
            let mut c = config(
                GeneratorSpec::Random { n: 16, depth: 20, parallelism: 4, seed: None },
                Model::DoubleDefect,
                ChipConfig::MinimumViable,
            );
            c.seed = seed;
            c
        })
        .collect();
    let variant = |f: &dyn Fn(&mut RunConfig)| -> Vec<RunConfig> {
        base.iter().cloned().map(|mut c| {
            f(&mut c);
            c
        }).collect()
    };
    let baselines: Vec<(&str, Vec<RunConfig>)> = vec![
        ("random-cuts", variant(&|c| c.cuts = CutKind::Random)),
        ("maxcut-cuts", variant(&|c| c.cuts = CutKind::MaxCut)),
        ("circuit-order", variant(&|c| c.scheduler = SchedulerKind::CircuitOrder)),
        ("time-first", variant(&|c| c.scheduler = SchedulerKind::TimeFirst)),
        ("channel-first", variant(&|c| c.scheduler = SchedulerKind::ChannelFirst)),
        ("snake-mapping", variant(&|c| c.mapping = MappingKind::Snake)),
    ];
    let ecmas = match mean_delta(&base) {
        Ok(m) => m,
        Err(e) => return verdict(false, format!("ecmas: {e}")),
    };
    let mut ok = true;
    let mut notes = vec![format!("ecmas {ecmas:.2}")];
    for (name, configs) in &baselines {
        match mean_delta(configs) {
            Ok(m) => {
                let good = ecmas <= 1.02 * m;
                ok &= good;
                notes.push(format!("{name} {m:.2}{}", if good { "" } else { " (beaten)" }));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    let fast = start.elapsed() < Duration::from_secs(300);
    verdict(ok && fast, format!("mean delta {} ({:?})", notes.join(", "), start.elapsed()))
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for model in [Model::DoubleDefect, Model::LatticeSurgery] {
        let at = |lanes: usize| -> Vec<RunConfig> {
            (0..10u64)
                .map(|seed| {
                    let mut c = config(
                        GeneratorSpec::Random { n: 49, depth: 50, parallelism: 21, seed: None },
                        model,
                        ChipConfig::Bandwidth { lanes },
                    );
                    c.seed = seed;
                    c
                })
                .collect()
        };
        match (mean_delta(&at(1)), mean_delta(&at(2))) {
            (Ok(one), Ok(two)) => {
                let cut = (one - two) / one * 100.0;
                ok &= cut >= 5.0;
                notes.push(format!("{model}: bw1 {one:.1}, bw2 {two:.1}, reduction {cut:.1}%"));
            }
            (a, b) => {
                ok = false;
                notes.push(format!("{model}: {:?} {:?}", a.err(), b.err()));
            }
        }
    }
    let fast = start.elapsed() < Duration::from_secs(600);
    verdict(ok && fast, format!("{} ({:?})", notes.join("; "), start.elapsed()))
}

fn main() {
    // Quiet the libtest-style flags cargo may pass.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(usize, fn() -> Verdict); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let mut failed = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|a| a == &id.to_string()) {
            continue;
        }
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {id}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
