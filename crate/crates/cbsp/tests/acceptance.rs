//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod support;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cbsp::commands::{cmd_place, cmd_validate, Bundle, Overrides};
use cbsp::fixtures;
use cbsp_core::controllability::{gramian, gramian_is_nonsingular, gramian_trace, kalman_rank, MetricKind};
use cbsp_core::network::{NodeId, Topology};
use cbsp_core::placement::{
    compare_strategies, solve_step, solve_timeline, weigh_sets, CriticalSteps, PlacementConfig, PlacementTimeline,
    Strategy, WeightPreset,
};
use cbsp_core::structural::{binarize, dimsrs, is_structurally_controllable};
use cbsp_core::wq::{build_state_space, build_state_space_at, remap_state, Scope, StateSpace, WqParams};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use support::{Objective, Simulator};

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 12] = [
        ("gramian oracle equivalence", gramian_equivalence),
        ("kalman/gramian agreement", kalman_agreement),
        ("trace modularity and greedy exactness", trace_exactness),
        ("logdet greedy bound", logdet_bound),
        ("dynamics oracle and mass conservation", dynamics_oracle),
        ("courant safety", courant_safety),
        ("three-node qualitative reproduction", three_node_reproduction),
        ("structural oracle", structural_oracle),
        ("greedy vs random vs uniform", greedy_vs_random),
        ("weighting behavior", weighting_behavior),
        ("determinism", determinism),
        ("scale sanity", scale_sanity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = secs(start.elapsed());
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({took}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({took}): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn gramian_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = support::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (a, b) = support::random_system(&mut rng, 50, 5);
        let horizon = rng.random_range(1..=30);
        let w = gramian(&a, &b, horizon).map_err(|e| e.to_string())?.w;
        worst = worst.max(support::relative_frobenius(&w, &support::explicit_gramian(&a, &b, horizon)));
    }
    let took = start.elapsed();
    ensure(worst <= 1e-10, || format!("worst relative Frobenius error {worst:e}"))?;
    ensure(took < Duration::from_secs(10), || format!("took {}", secs(took)))?;
    Ok(format!("50 systems, worst relative error {worst:.1e}"))
}

fn kalman_agreement() -> Result<String, String> {
    let mut rng = support::rng(2);
    let (mut full, mut agree) = (0, 0);
    let mut bad = Vec::new();
    for trial in 0..100 {
        let (a, b, horizon) = support::cyclic_system(&mut rng, 20);
        let n = a.nrows();
        let kalman = kalman_rank(&a, &b, horizon).map_err(|e| e.to_string())? == n;
        let g = gramian(&a, &b, horizon).map_err(|e| e.to_string())?;
        let nonsingular = gramian_is_nonsingular(&g, b.ncols());
        full += usize::from(kalman);
        if kalman == nonsingular {
            agree += 1;
        } else {
            bad.push(trial);
        }
    }
    ensure(agree == 100, || format!("{agree}/100 agree; disagreeing trials {bad:?}"))?;
    Ok(format!("100/100 agree ({full} full rank, {} deficient)", 100 - full))
}

/// Net1-like steps with the whole node set (11 nodes) as the pool.
fn net1_instances() -> Vec<(usize, usize)> {
    (1..=fixtures::NET1_CASES).flat_map(|case| [2, 10, 18].map(|k| (case, k))).collect()
}

struct Instance {
    topo: Topology,
    names: Vec<NodeId>,
    grams: Vec<DMatrix<f64>>,
    space: StateSpace,
    horizon: usize,
}

fn instance(case: usize, step: usize) -> Instance {
    let f = fixtures::net1_like(case);
    let profile = &f.profiles[0];
    let params = WqParams::new(f.wq_step);
    let space = build_state_space(&f.topology, profile, step, &params).unwrap();
    let n = space.n_states();
    let horizon = params.horizon(profile.step()).unwrap();
    let a = support::dense(space.a().iter(), n);
    let mut names = Vec::new();
    let mut grams = Vec::new();
    for (i, node) in f.topology.nodes().iter().enumerate() {
        let row = space.index().node_state(i).unwrap();
        names.push(node.id.clone());
        grams.push(support::explicit_gramian(&a, &support::unit_columns(n, &[row]), horizon));
    }
    Instance { topo: f.topology, names, grams, space, horizon }
}

fn set_of(names: &[NodeId], picked: &[NodeId]) -> Vec<usize> {
    let mut s: Vec<usize> = picked.iter().map(|p| names.iter().position(|n| n == p).unwrap()).collect();
    s.sort();
    s
}

fn trace_exactness() -> Result<String, String> {
    let (mut checked, mut worst) = (0, 0.0f64);
    for (case, k) in net1_instances() {
        let inst = instance(case, k);
        let f = fixtures::net1_like(case);
        let n = inst.space.n_states();
        let rows: Vec<usize> = (0..inst.names.len()).map(|i| inst.space.index().node_state(i).unwrap()).collect();
        let joint = gramian(inst.space.a(), &support::unit_columns(n, &rows), inst.horizon).unwrap().trace();
        let mut sum = 0.0;
        for &r in &rows {
            sum += gramian_trace(inst.space.a(), &support::unit_columns(n, &[r]), inst.horizon).unwrap();
        }
        let oracle: f64 = inst.grams.iter().map(|g| g.trace()).sum();
        for (x, y) in [(joint, sum), (joint, oracle)] {
            let rel = (x - y).abs() / y.abs();
            worst = worst.max(rel);
            ensure(rel <= 1e-10, || format!("case {case} step {k}: trace {x} vs {y}"))?;
        }
        for ns in 1..=3 {
            let cfg = PlacementConfig::new(ns, MetricKind::Trace, f.wq_step);
            let step = solve_step(&inst.topo, &f.profiles[0], k, &cfg).map_err(|e| e.to_string())?;
            let greedy = set_of(&inst.names, &step.set());
            let all = support::enumerate(&inst.grams, ns, Objective::Trace);
            let best = all.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            let optimal: Vec<&Vec<usize>> =
                all.iter().filter(|s| best - s.1 <= 1e-12 * best.abs()).map(|s| &s.0).collect();
            ensure(optimal.contains(&&greedy), || {
                format!("case {case} step {k} n_s {ns}: greedy {:?} not among optima {optimal:?}", step.set())
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} instances optimal, worst modularity error {worst:.1e}"))
}

fn logdet_bound() -> Result<String, String> {
    let bound = 1.0 - (-1.0f64).exp();
    let (mut checked, mut worst) = (0, f64::INFINITY);
    for (case, k) in net1_instances() {
        let inst = instance(case, k);
        let f = fixtures::net1_like(case);
        let n = inst.space.n_states();
        let total: f64 = inst.grams.iter().map(|g| g.trace()).sum();
        let eps = 1e-12 * (total / n as f64).max(1e-288);
        for ns in 1..=3 {
            let cfg = PlacementConfig::new(ns, MetricKind::LogDet, f.wq_step);
            let step = solve_step(&inst.topo, &f.profiles[0], k, &cfg).map_err(|e| e.to_string())?;
            let used = step.epsilon.unwrap();
            ensure((used - eps).abs() <= 1e-9 * eps, || format!("case {case} step {k}: ε {used:e} vs {eps:e}"))?;
            let objective = Objective::LogDet { eps };
            let greedy = support::set_value(&inst.grams, &set_of(&inst.names, &step.set()), objective);
            let best = support::enumerate(&inst.grams, ns, objective).iter().map(|s| s.1).fold(0.0, f64::max);
            let ratio = if best > 0.0 { greedy / best } else { 1.0 };
            worst = worst.min(ratio);
            ensure(greedy >= bound * best, || format!("case {case} step {k} n_s {ns}: {greedy} < (1-1/e)·{best}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} instances, worst greedy/optimum {worst:.4}"))
}

fn dynamics_oracle() -> Result<String, String> {
    let f = fixtures::three_node();
    let (topo, profile) = (&f.topology, &f.profiles[0]);
    let params = WqParams::new(f.wq_step);
    let per = params.horizon(profile.step()).unwrap();
    let idx = |id: &str| topo.node_index(id).unwrap();
    let (r1, j1, tk1) = (idx("R1"), idx("J1"), idx("TK1"));
    let mut sim = Simulator::new(topo, profile, f.wq_step);
    let mut prev: Option<StateSpace> = None;
    let mut x: Vec<f64> = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut steps = 0;
    for k in 0..profile.step_count() {
        for i in 0..per {
            let t = profile.snapshot(k).time() + i as f64 * f.wq_step;
            let space = build_state_space_at(topo, profile, k, t, &params, &Scope::whole()).map_err(|e| e.to_string())?;
            x = match &prev {
                None => vec![0.0; space.n_states()],
                Some(p) => remap_state(p, &space, &x).map_err(|e| e.to_string())?,
            };
            let s = k * per + i;
            let mut u = vec![0.0; topo.nodes().len()];
            u[r1] = if s == 0 { 1.0 } else { 0.0 };
            u[j1] = if s.is_multiple_of(17) { 0.3 } else { 0.0 };
            u[tk1] = if s.is_multiple_of(41) { 0.05 } else { 0.0 };
            let mut next = space.a().mul_vec(&x);
            for (node, v) in u.iter().enumerate() {
                next[space.index().node_state(node).unwrap()] += v;
            }
            x = next;
            sim.step(&u);
            for (state, kind) in space.index().kinds().iter().enumerate() {
                let d = (x[state] - sim.value(*kind)).abs();
                if d > worst {
                    worst = d;
                    worst_at = format!("{} at step {s}", space.index().label(state));
                }
            }
            prev = Some(space);
            steps += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("trajectory differs by {worst:e} ({worst_at})"))?;

    // Closed loop: no sources, sinks or decay.
    let q: Vec<f64> = (0..24).map(|k| [0.012, 0.02, 0.0, -0.015, 0.008, 0.017][k % 6]).collect();
    let (topo, profile) = support::closed_loop(&q);
    let params = WqParams::new(60.0);
    let mut rng = support::rng(5);
    let mut prev: Option<StateSpace> = None;
    let mut x: Vec<f64> = Vec::new();
    let mut drift = 0.0f64;
    for k in 0..profile.step_count() {
        for i in 0..params.horizon(profile.step()).unwrap() {
            let t = profile.snapshot(k).time() + i as f64 * 60.0;
            let space = build_state_space_at(&topo, &profile, k, t, &params, &Scope::whole()).map_err(|e| e.to_string())?;
            x = match &prev {
                None => (0..space.n_states()).map(|_| rng.random_range(0.0..2.0)).collect(),
                Some(p) => remap_state(p, &space, &x).map_err(|e| e.to_string())?,
            };
            let mass = |v: &[f64], c: &[f64]| -> f64 {
                c.iter().zip(v).zip(space.transit_volumes()).map(|((c, v), t)| c * (v + t)).sum()
            };
            let before = mass(space.storage_volumes(), &x);
            x = space.a().mul_vec(&x);
            let after = mass(space.storage_volumes_next(), &x);
            drift = drift.max((after - before).abs() / before.abs());
            prev = Some(space);
        }
    }
    ensure(drift <= 1e-9, || format!("closed-loop mass drift {drift:e} per step"))?;
    Ok(format!("{steps} steps, max |Δx| {worst:.1e}; closed-loop drift {drift:.1e}"))
}

fn courant_safety() -> Result<String, String> {
    let mut pipes = 0;
    let mut stagnant = 0;
    for f in fixtures::all() {
        let params = WqParams::new(f.wq_step);
        for p in &f.profiles {
            for k in 0..p.step_count() {
                let space = build_state_space(&f.topology, p, k, &params).map_err(|e| format!("{}: {e}", f.name))?;
                for (l, link) in f.topology.links().iter().enumerate() {
                    let Some(layout) = space.index().pipe(l) else { continue };
                    let s = layout.segmentation;
                    let ok = (s.courant > 0.0 && s.courant <= 1.0) || (s.is_stagnant() && s.segments == 1);
                    ensure(ok, || format!("{} step {k}: pipe {} has λ = {}", p.scenario_id(), link.id, s.courant))?;
                    pipes += 1;
                    stagnant += usize::from(s.is_stagnant());
                }
            }
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = support::write_bundle(dir.path(), &fixtures::three_node());
    let overrides = Overrides { wq_step: Some(3600.0), output: Some(dir.path().join("out")), ..Overrides::default() };
    let bundle = Bundle::load(&manifest, &overrides).map_err(|e| e.to_string())?;
    let outcome = cmd_validate(&bundle).map_err(|e| e.to_string())?;
    ensure(outcome.failed, || "validate accepted Δt_WQ = 3600 s".into())?;
    ensure(outcome.messages.iter().any(|m| m.contains("pipe P1")), || format!("messages: {:?}", outcome.messages))?;
    Ok(format!("{pipes} pipe-steps in range ({stagnant} stagnant); oversized step rejected"))
}

fn three_node_reproduction() -> Result<String, String> {
    let start = Instant::now();
    let f = fixtures::three_node();
    let profile = &f.profiles[0];
    let pipe = f.topology.link_index("P1").unwrap();
    let mut report = Vec::new();
    let mut problems = Vec::new();
    for metric in [MetricKind::Trace, MetricKind::LogDet] {
        let cfg = PlacementConfig::new(1, metric, f.wq_step);
        let timeline = solve_timeline(&f.topology, profile, &cfg).map_err(|e| e.to_string())?;
        let (mut drain, mut drain_tk, mut fill, mut fill_r) = (0, 0, 0, 0);
        for s in &timeline.steps {
            let node = s.picks[0].node.as_str();
            if profile.snapshot(s.step).flow(pipe) < 0.0 {
                drain += 1;
                drain_tk += usize::from(node == "TK1");
            } else {
                fill += 1;
                fill_r += usize::from(node == "R1");
            }
        }
        let drain_share = drain_tk as f64 / drain as f64;
        let fill_share = fill_r as f64 / fill as f64;
        report.push(format!("{metric}: TK1 {drain_tk}/{drain} draining, R1 {fill_r}/{fill} filling"));
        if drain_share < 0.9 {
            problems.push(format!("{metric}: TK1 chosen in {:.0}% of draining steps", 100.0 * drain_share));
        }
        if metric == MetricKind::Trace && fill_share < 0.9 {
            problems.push(format!("{metric}: R1 chosen in {:.0}% of filling steps", 100.0 * fill_share));
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(30) {
        problems.push(format!("took {}", secs(took)));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(report.join("; "))
}

fn structural_oracle() -> Result<String, String> {
    let mut rng = support::rng(8);
    let (mut agree, mut sc_count) = (0, 0);
    for _ in 0..100 {
        let p = support::Pattern::random(&mut rng, 15);
        let (a, b) = p.realize(&mut rng);
        let sp = binarize(&a, &b);
        let sc = is_structurally_controllable(&sp);
        sc_count += usize::from(sc);
        ensure(sc == (dimsrs(&sp) == p.n), || format!("sc {sc} but dimsrs {} of {}", dimsrs(&sp), p.n))?;
        if sc == support::generically_controllable(&p, &mut rng, 3) {
            agree += 1;
        }
    }
    ensure(agree >= 99, || format!("numerical rank agrees with sc in {agree}/100 patterns"))?;
    for trial in 0..50 {
        let mut p = support::Pattern::random(&mut rng, 15);
        // Grow the input set by a few extra columns.
        let extra = rng.random_range(1..=3);
        for j in 0..extra {
            p.b.push((rng.random_range(0..p.n), p.m + j));
        }
        let small_m = p.m;
        p.m += extra;
        let (a, b) = p.realize(&mut rng);
        let small = dimsrs(&binarize(&a, &b.columns(0, small_m).into_owned()));
        let large = dimsrs(&binarize(&a, &b));
        ensure(small <= large, || format!("trial {trial}: dimsrs {small} > {large} after adding inputs"))?;
    }
    Ok(format!("sc agrees with numerical rank in {agree}/100 ({sc_count} controllable); 50/50 nested pairs monotone"))
}

fn greedy_vs_random() -> Result<String, String> {
    let f = fixtures::net1_like(1);
    let profile = &f.profiles[0];
    let seeds: Vec<u64> = (1..=25).collect();
    let mut lines = Vec::new();
    let mut problems = Vec::new();
    for metric in [MetricKind::Trace, MetricKind::LogDet] {
        for ns in [3, 5] {
            let cfg = PlacementConfig::new(ns, metric, f.wq_step);
            let rows = compare_strategies(&f.topology, profile, &cfg, &seeds).map_err(|e| e.to_string())?;
            let mut by_step: BTreeMap<usize, (f64, f64, Vec<f64>)> = BTreeMap::new();
            for r in &rows {
                let e = by_step.entry(r.step).or_insert((0.0, 0.0, Vec::new()));
                match r.strategy {
                    Strategy::Greedy => e.0 = r.value,
                    Strategy::Uniform => e.1 = r.value,
                    Strategy::Random => e.2.push(r.value),
                }
            }
            let (mut wins, mut pairs, mut above_uniform) = (0, 0, 0);
            for (greedy, uniform, random) in by_step.values() {
                for r in random {
                    pairs += 1;
                    wins += usize::from(*greedy >= r - 1e-12 * r.abs());
                }
                above_uniform += usize::from(*greedy > uniform + 1e-12 * uniform.abs());
            }
            let share = wins as f64 / pairs as f64;
            lines.push(format!("{metric} n_s={ns}: {:.1}% of {pairs}", 100.0 * share));
            if share < 0.95 {
                problems.push(format!("{metric} n_s={ns}: greedy ≥ random in {:.1}%", 100.0 * share));
            }
            if above_uniform > 0 {
                problems.push(format!("{metric} n_s={ns}: greedy above uniform at {above_uniform} steps"));
            }
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(lines.join(", "))
}

/// Terms computed straight from the definitions.
fn oracle_terms(timelines: &[PlacementTimeline], critical: &CriticalSteps) -> BTreeMap<Vec<NodeId>, [f64; 4]> {
    let total = (timelines.len() * timelines[0].steps.len()) as f64;
    let ns = timelines[0].stations as f64;
    let mut count: BTreeMap<Vec<NodeId>, (f64, f64, bool)> = BTreeMap::new();
    let mut node: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (si, t) in timelines.iter().enumerate() {
        for s in &t.steps {
            let mut set: Vec<NodeId> = s.picks.iter().map(|p| p.node.clone()).collect();
            set.sort();
            for n in &set {
                *node.entry(n.clone()).or_default() += 1.0;
            }
            let e = count.entry(set).or_insert((0.0, 0.0, false));
            e.0 += 1.0;
            e.1 += if s.picks.last().unwrap().sc { 1.0 } else { 0.0 };
            e.2 |= critical.is_critical(si, s.step);
        }
    }
    count
        .into_iter()
        .map(|(set, (c, z, crit))| {
            let member: f64 = set.iter().map(|n| node[n]).sum();
            let terms = [c / total, z / c, member / (ns * total), if crit { 1.0 } else { 0.0 }];
            (set, terms)
        })
        .collect()
}

fn weighting_behavior() -> Result<String, String> {
    Ok(format!("trace: {}; logdet: {}", weighting_for(MetricKind::Trace)?, weighting_for(MetricKind::LogDet)?))
}

fn weighting_for(metric: MetricKind) -> Result<String, String> {
    let f = fixtures::net1_like_all();
    let cfg = PlacementConfig::new(3, metric, f.wq_step);
    let timelines: Vec<PlacementTimeline> = f
        .profiles
        .iter()
        .map(|p| solve_timeline(&f.topology, p, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let critical = CriticalSteps::Steps([7, 8, 19].into_iter().collect());
    let oracle = oracle_terms(&timelines, &critical);
    let mut winners = Vec::new();
    for preset in WeightPreset::ALL {
        let report = weigh_sets(&timelines, preset.mu(), &critical).map_err(|e| e.to_string())?;
        ensure(report.sets.len() == oracle.len(), || "set count differs from oracle".into())?;
        for s in &report.sets {
            let o = oracle[&s.set];
            for i in 0..4 {
                ensure((s.terms[i] - o[i]).abs() <= 1e-12, || format!("{:?} term {} {} vs {}", s.set, i + 1, s.terms[i], o[i]))?;
            }
        }
        for scale in [1e-3, 0.5, 7.0, 1e3] {
            let mu = preset.mu().map(|m| m * scale);
            let scaled = weigh_sets(&timelines, mu, &critical).map_err(|e| e.to_string())?;
            ensure(scaled.winner == report.winner, || format!("{} winner changes under μ × {scale}", preset.name()))?;
        }
        winners.push(format!("{} {:?}", preset.name(), report.winner.iter().map(|n| n.as_str()).collect::<Vec<_>>()));
    }

    let ws3 = weigh_sets(&timelines, WeightPreset::Ws3.mu(), &critical).map_err(|e| e.to_string())?;
    let best_member = oracle.values().map(|t| t[2]).fold(0.0, f64::max);
    ensure(oracle[&ws3.winner][2] == best_member, || "WS3 winner does not maximize member frequency".into())?;

    let ws2 = weigh_sets(&timelines, WeightPreset::Ws2.mu(), &critical).map_err(|e| e.to_string())?;
    let ranking = |r: &cbsp_core::placement::WeightReport| {
        let mut v: Vec<(Vec<NodeId>, f64)> = r.sets.iter().map(|s| (s.set.clone(), s.weight)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    };
    let base = ranking(&ws2);
    let mut rng = support::rng(10);
    let mut flags: Vec<bool> = timelines.iter().flat_map(|t| t.steps.iter().map(|s| s.sc())).collect();
    for trial in 0..20 {
        if trial % 2 == 0 {
            flags.shuffle(&mut rng);
        } else {
            flags.iter_mut().for_each(|z| *z = rng.random_bool(0.5));
        }
        let mut permuted = timelines.clone();
        let mut it = flags.iter();
        for t in &mut permuted {
            for s in &mut t.steps {
                let z = *it.next().unwrap();
                s.picks.iter_mut().for_each(|p| p.sc = z);
            }
        }
        let r = weigh_sets(&permuted, WeightPreset::Ws2.mu(), &critical).map_err(|e| e.to_string())?;
        ensure(ranking(&r) == base && r.winner == ws2.winner, || format!("WS2 ranking moved in trial {trial}"))?;
    }
    Ok(format!("{} sets; {}", oracle.len(), winners.join(", ")))
}

fn read_tree(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = support::write_bundle(dir.path(), &fixtures::net1_like_all());
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let bundle = Bundle::load(&manifest, &Overrides { output: Some(out.clone()), ..Overrides::default() })
            .map_err(|e| e.to_string())?;
        cmd_place(&bundle).map_err(|e| e.to_string())?;
        outputs.push(read_tree(&out));
    }
    ensure(!outputs[0].is_empty(), || "no output files".into())?;
    for (name, bytes) in &outputs[0] {
        ensure(outputs[1].get(name) == Some(bytes), || format!("{name} differs between runs"))?;
    }
    ensure(outputs[0].len() == outputs[1].len(), || "file sets differ".into())?;
    let bytes: usize = outputs[0].values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical", outputs[0].len()))
}

fn scale_sanity() -> Result<String, String> {
    let f = fixtures::grid();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = support::write_bundle(dir.path(), &f);
    let overrides = Overrides {
        output: Some(dir.path().join("out")),
        metrics: Some(vec![MetricKind::Trace]),
        stations: Some(5),
        ..Overrides::default()
    };
    let start = Instant::now();
    let bundle = Bundle::load(&manifest, &overrides).map_err(|e| e.to_string())?;
    let pool = bundle.config.pool(&bundle.topology).map_err(|e| e.to_string())?.map_or(0, |p| p.len());
    cmd_place(&bundle).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let params = WqParams::new(f.wq_step);
    let sizes: Vec<usize> = (0..f.profiles[0].step_count())
        .map(|k| build_state_space(&f.topology, &f.profiles[0], k, &params).unwrap().n_states())
        .collect();
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    ensure(pool == 30 && sizes.len() == 24, || format!("pool {pool}, {} steps", sizes.len()))?;
    ensure(took < Duration::from_secs(120), || format!("took {}", secs(took)))?;
    Ok(format!("n_x {lo}..{hi}, pool {pool}, n_s 5, 24 steps in {}", secs(took)))
}
