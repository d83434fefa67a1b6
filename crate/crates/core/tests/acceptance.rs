//! Acceptance suite: one PASS/FAIL line per criterion, each with its time budget.
//!
//! Runs without the libtest harness. The process fails if any criterion fails,
//! except those listed in `KNOWN_CONFLICTS`, whose stated target contradicts
//! its own derivation. Those are still evaluated at full tolerance and reported
//! as FAIL; if one ever passes, the process fails too, so the list cannot go stale.

mod common;

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use qps_core::dynamics::{
    combine_inertia, rotor_speeds, ControlInput, QpsParams, QpsState, RigidBody,
};
use qps_core::flatness::{decoupling, design_gains, flat_to_state, state_to_flat, FlatState, PoleSets};
use qps_core::mission::{rk4_step, ClosedLoop, Mission, MissionConfig};
use qps_core::route::{astar, simplify, to_waypoints, PlannerConfig};
use qps_core::tempo::{bisect_time, sigma3_eval, Verdict};
use qps_core::terrain::world_to_index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_CONFLICTS: &[u32] = &[1];

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ------------------------------------------------------------------ 1

fn inertia_combination() -> Check {
    let c = combine_inertia(RigidBody::REFERENCE_QUAD, RigidBody::REFERENCE_PAYLOAD, 0.2);
    let expect = [
        ("m", c.mass, 0.8),
        ("d'", c.offset, 0.075),
        ("J_x", c.inertia[0], 0.035225),
        ("J_y", c.inertia[1], 0.035225),
        ("J_z", c.inertia[2], 0.0314),
    ];
    let bad: Vec<String> = expect
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-12)
        .map(|(name, got, want)| format!("{name} = {got} (target {want})"))
        .collect();
    if bad.is_empty() {
        return Ok("m, d', J_x, J_y, J_z all match".into());
    }
    // The target's own parallel-axis expression, term by term.
    let terms = 0.0196 + 0.5 * 0.075f64.powi(2) + 0.005 + 0.3 * (0.2f64 - 0.075).powi(2);
    Err(format!(
        "{}; the parallel-axis terms 0.0196 + 0.5·0.075² + 0.005 + 0.3·0.125² sum to {terms:.6}",
        bad.join(", ")
    ))
}

// ------------------------------------------------------------------ 2

fn hover_feasibility() -> Check {
    let p = QpsParams::default();
    let speeds = rotor_speeds(p.mass * p.gravity, &Vector3::zeros(), &p)
        .map_err(|e| e.to_string())?
        .speeds();
    let oracle = (p.mass * p.gravity / (4.0 * p.thrust_coeff)).sqrt();
    let spread = speeds.iter().fold(0.0f64, |a, s| a.max((s - speeds[0]).abs()));
    ensure(spread <= 1e-9, || format!("rotor spread {spread}"))?;
    ensure((speeds[0] - oracle).abs() <= 1e-9, || format!("{} vs √(mg/4b) = {oracle}", speeds[0]))?;
    ensure((speeds[0] - 255.7).abs() < 0.05, || format!("{} is not ≈ 255.7", speeds[0]))?;
    ensure(speeds[0] < 400.0, || format!("{} ≥ s_max", speeds[0]))?;
    Ok(format!("s = {:.4} rad/s on all four rotors", speeds[0]))
}

// ------------------------------------------------------------------ 3

fn sigma3_contract() -> Check {
    let at0 = sigma3_eval(0.0).map_err(|e| e.to_string())?;
    let at1 = sigma3_eval(1.0).map_err(|e| e.to_string())?;
    let want0 = [0.0, 0.0, 0.0, 0.0];
    let want1 = [1.0, 0.0, 0.0, 0.0];
    for k in 0..4 {
        ensure((at0[k] - want0[k]).abs() <= 1e-12, || format!("derivative {k} at 0 is {}", at0[k]))?;
        ensure((at1[k] - want1[k]).abs() <= 1e-12, || format!("derivative {k} at 1 is {}", at1[k]))?;
    }
    let mid = sigma3_eval(0.5).map_err(|e| e.to_string())?;
    ensure((mid[0] - 0.5).abs() <= 1e-12, || format!("σ₃(0.5) = {}", mid[0]))?;
    ensure((mid[1] - 2.1875).abs() <= 1e-12, || format!("σ̇₃(0.5) = {}", mid[1]))?;
    let (mut best, mut arg) = (f64::MIN, 0.0);
    for i in 0..=10_000 {
        let t = i as f64 / 10_000.0;
        let d1 = sigma3_eval(t).map_err(|e| e.to_string())?[1];
        if d1 > best {
            (best, arg) = (d1, t);
        }
    }
    ensure(arg == 0.5 && (best - 2.1875).abs() <= 1e-12, || format!("σ̇₃ peaks at {arg} with {best}"))?;
    Ok("8 endpoint conditions, σ₃(½) = ½, max σ̇₃ = 2.1875 at ½".into())
}

// ------------------------------------------------------------------ 4

fn flat_round_trip() -> Check {
    let p = QpsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = common::random_state(&mut rng);
        let back = flat_to_state(&state_to_flat(&x, &p), &p).map_err(|e| e.to_string())?;
        worst = worst.max((back.to_vector() - x.to_vector()).amax());
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("1000 states, max componentwise error {worst:.2e}"))
}

// ------------------------------------------------------------------ 5

fn linearization() -> Check {
    let p = QpsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dt = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x0 = common::random_state(&mut rng);
        let u = ControlInput {
            thrust_accel: rng.gen_range(-20.0..20.0),
            angular_accel: Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ),
        };
        let x1 = rk4_step(&x0, &u, dt, &p).map_err(|e| e.to_string())?;
        let x2 = rk4_step(&x1, &u, dt, &p).map_err(|e| e.to_string())?;
        let jerk = |x: &QpsState| state_to_flat(x, &p).jerk;
        // Second-order one-sided difference of the jerk.
        let fd = (-3.0 * jerk(&x0) + 4.0 * jerk(&x1) - jerk(&x2)) / (2.0 * dt);
        let v = decoupling(&x0, &p).map_err(|e| e.to_string())?.apply(&u);
        let predicted = Vector3::new(v[0], v[1], v[2]);
        worst = worst.max((fd - predicted).norm() / predicted.norm());
    }
    ensure(worst < 1e-3, || format!("max relative error {worst:e}"))?;
    Ok(format!("100 states, max relative error {worst:.2e}"))
}

// ------------------------------------------------------------------ 6

fn regulation() -> Check {
    let p = QpsParams::default();
    let gains = design_gains(&PoleSets::default()).map_err(|e| e.to_string())?;
    let target = FlatState::at_rest(Vector3::new(1.0, -0.5, 0.8));
    let mut final_error = f64::NAN;
    let mut at_5 = f64::NAN;
    ClosedLoop::new(p, gains)
        .run(QpsState::hover(Vector3::zeros(), &p), 10.0, 1e-3, |_| target, |r| {
            if (r.t - 5.0).abs() < 1e-9 {
                at_5 = r.error;
            }
            final_error = r.error;
            ControlFlow::Continue(())
        })
        .map_err(|e| e.to_string())?;
    ensure(final_error < 1e-6, || format!("error {final_error:e} m at 10 s"))?;
    ensure(final_error < at_5, || format!("error grew from {at_5:e} to {final_error:e}"))?;
    Ok(format!("error {at_5:.2e} m at 5 s, {final_error:.2e} m at 10 s"))
}

// ------------------------------------------------------------------ 7

fn astar_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut solved, mut unreachable, mut worst_ratio) = (0, 0, 1.0f64);
    for case in 0..50 {
        let map = common::random_columns(&mut rng, 20, 6);
        let start = common::random_free(&mut rng, &map, 7);
        let goal = common::random_free(&mut rng, &map, 7);
        let oracle = common::dijkstra(start, goal, &map);
        let plain = PlannerConfig { weight: 1.0, ..PlannerConfig::default() };
        let weighted = PlannerConfig { weight: 1.1, ..PlannerConfig::default() };
        match (oracle, astar(start, goal, &map, &plain), astar(start, goal, &map, &weighted)) {
            (Some(best), Ok(a), Ok(b)) => {
                let ca = a.edge_class_counts().ok_or("non-adjacent step in A* path")?;
                let cb = b.edge_class_counts().ok_or("non-adjacent step in A* path")?;
                ensure(ca == best, || format!("case {case}: w = 1 counts {ca:?}, optimal {best:?}"))?;
                let ratio = common::counts_cost(cb) / common::counts_cost(best);
                ensure(ratio <= 1.1 + 1e-12, || format!("case {case}: w = 1.1 ratio {ratio}"))?;
                worst_ratio = worst_ratio.max(ratio);
                solved += 1;
            }
            (None, Err(_), Err(_)) => unreachable += 1,
            (o, a, b) => {
                return Err(format!(
                    "case {case}: reachability disagrees (oracle {}, w=1 {}, w=1.1 {})",
                    o.is_some(),
                    a.is_ok(),
                    b.is_ok()
                ))
            }
        }
    }
    ensure(solved >= 40, || format!("only {solved} of 50 instances were solvable"))?;
    Ok(format!(
        "{solved} solvable instances optimal at w = 1, w = 1.1 within {worst_ratio:.4}×; {unreachable} unreachable agreed"
    ))
}

// ------------------------------------------------------------------ 8

fn clearance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut samples, mut min_margin, mut paths) = (0usize, f64::INFINITY, 0);
    for case in 0..50 {
        let map = common::rough_terrain(&mut rng, 30, 1.0);
        let r = rng.gen_range(0.5..3.0);
        let expanded = map.expand(r).map_err(|e| e.to_string())?;
        let grid = expanded.discretize(1.0).map_err(|e| e.to_string())?;
        let k_max = grid.max_level() + 2;
        let start = common::random_free(&mut rng, &grid, k_max);
        let goal = common::random_free(&mut rng, &grid, k_max);
        let path = astar(start, goal, &grid, &PlannerConfig::default())
            .map_err(|e| format!("case {case}: {e}"))?;
        let wp = to_waypoints(&simplify(&path, &grid), grid.delta()).map_err(|e| e.to_string())?;
        paths += 1;

        let (x0, x1, y0, y1) = map.footprint();
        let obstacle: Vec<Vector3<f64>> = (0..=120)
            .flat_map(|a| (0..=120).map(move |b| (a, b)))
            .map(|(a, b)| {
                let (x, y) = (x0 + (x1 - x0) * a as f64 / 120.0, y0 + (y1 - y0) * b as f64 / 120.0);
                Vector3::new(x, y, map.sample(x, y).unwrap())
            })
            .collect();
        let slack = r - std::f64::consts::FRAC_1_SQRT_2 * map.cell_size();
        for seg in wp.points.windows(2) {
            let n = (10.0 * (seg[1] - seg[0]).norm() / grid.delta()).ceil().max(1.0) as usize;
            for s in 0..=n {
                let q = seg[0] + (seg[1] - seg[0]) * (s as f64 / n as f64);
                let top = expanded.sample(q.x, q.y).map_err(|e| e.to_string())?;
                ensure(q.z > top, || format!("case {case}: {q:?} not above M_E = {top}"))?;
                let nearest = obstacle.iter().map(|o| (q - o).norm()).fold(f64::INFINITY, f64::min);
                ensure(nearest > slack, || {
                    format!("case {case}: {q:?} is {nearest} from terrain, needs > {slack}")
                })?;
                min_margin = min_margin.min(nearest - slack);
                samples += 1;
            }
        }
    }
    Ok(format!("{paths} paths, {samples} samples, smallest distance margin {min_margin:.3} m"))
}

// ------------------------------------------------------------------ 9

fn bisection() -> Check {
    let threshold = |t: f64| Ok(if t >= 10.0 { Verdict::Valid } else { Verdict::Invalid });
    let b = bisect_time(threshold, 1.0, 0.05).map_err(|e| e.to_string())?;
    ensure(b.t_max == 10.0, || format!("returned {}", b.t_max))?;
    ensure(b.t_min == 9.75, || format!("bracket low end {}", b.t_min))?;
    ensure(b.ratio() <= 0.05, || format!("ratio {}", b.ratio()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (th, guess, dt) = (rng.gen_range(0.01..500.0), rng.gen_range(0.01..50.0), rng.gen_range(0.01..0.3));
        let r = bisect_time(|t| Ok(if t >= th { Verdict::Valid } else { Verdict::Invalid }), guess, dt)
            .map_err(|e| e.to_string())?;
        ensure(r.t_max >= th && r.ratio() <= dt, || format!("threshold {th}: {r:?}"))?;
    }
    Ok(format!("returns 10.0 with bracket [{}, {}], ratio {:.4}; 200 random thresholds ok", b.t_min, b.t_max, b.ratio()))
}

// ------------------------------------------------------------------ 10

const URBAN_DISTANCES: [f64; 6] = [10.0, 30.0, 60.0, 100.0, 150.0, 200.0];
const URBAN_EXTENT: f64 = 240.0;
const URBAN_ALTITUDE: f64 = 4.0;

fn urban_terrain(seed: u64) -> String {
    format!(
        "terrain.synthetic = {{ extent = [{URBAN_EXTENT:.1}, {URBAN_EXTENT:.1}], seed = {seed}, density = 0.15 }}\n"
    )
}

/// A start/goal pair `dist` apart, both in free space at the flight altitude.
fn urban_pair(seed: u64, dist: f64) -> Result<(Vector3<f64>, Vector3<f64>), String> {
    let probe = MissionConfig::parse(&format!(
        "start = [1.0, 1.0, 100.0]\ngoal = [2.0, 2.0, 100.0]\n{}",
        urban_terrain(seed)
    ))
    .map_err(|e| e.to_string())?;
    let m = Mission::prepare(probe).map_err(|e| e.to_string())?;
    let free = |p: &Vector3<f64>| m.grid.is_free(world_to_index(p, m.grid.delta()));
    let margin = 5.0;
    for a in 0..200 {
        let s = Vector3::new(
            margin + (a as f64 * 37.0) % (URBAN_EXTENT - 2.0 * margin),
            margin + (a as f64 * 53.0) % (URBAN_EXTENT - 2.0 * margin),
            URBAN_ALTITUDE,
        );
        let ang = a as f64 * 0.7;
        let g = s + Vector3::new(dist * ang.cos(), dist * ang.sin(), 0.0);
        let inside = |v: f64| (margin..=URBAN_EXTENT - margin).contains(&v);
        if inside(g.x) && inside(g.y) && free(&s) && free(&g) {
            return Ok((s, g));
        }
    }
    Err(format!("no free pair {dist} m apart for seed {seed}"))
}

fn flagship() -> Check {
    let scratch = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-urban");
    std::fs::create_dir_all(&scratch).map_err(|e| e.to_string())?;
    let mut report = String::new();
    for (n, &dist) in URBAN_DISTANCES.iter().enumerate() {
        let seed = 100 + n as u64;
        let (s, g) = urban_pair(seed, dist)?;
        let text = format!(
            "start = [{}, {}, {}]\ngoal = [{}, {}, {}]\n{}",
            s.x, s.y, s.z, g.x, g.y, g.z,
            urban_terrain(seed)
        );
        let config = MissionConfig::parse(&text).map_err(|e| e.to_string())?;
        let run = || {
            Mission::prepare(config.clone())
                .and_then(|m| m.run())
                .map_err(|e| format!("{dist} m: {} ({})", e.error, e.phase.as_str()))
        };
        let trace = run()?;
        let csv = trace.to_csv();
        ensure(run()?.to_csv() == csv, || format!("{dist} m: rerun trace differs"))?;

        let sum = trace.summary();
        ensure(sum.max_tracking_error <= 0.35, || format!("{dist} m: max error {}", sum.max_tracking_error))?;
        for r in &trace.records {
            let ok = r.rotors.squares.iter().all(|&q| q >= 0.0 && q.sqrt() <= 400.0);
            ensure(ok, || format!("{dist} m: rotor speeds {:?} at t = {}", r.rotors.signed_speeds(), r.t))?;
        }
        let last = trace.records.last().ok_or("empty trace")?;
        let miss = (last.state.position - g).norm();
        ensure(miss <= 0.35, || format!("{dist} m: ends {miss} m from the goal"))?;
        ensure(sum.is_safe(), || format!("{dist} m: {sum:?}"))?;

        // The command-line tool: exit 0 and the same trace bytes.
        let cfg_path = scratch.join(format!("mission-{n}.toml"));
        let trace_path = scratch.join(format!("trace-{n}.csv"));
        std::fs::write(&cfg_path, &text).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_qps"))
            .args(["run", "-c", cfg_path.to_str().unwrap(), "-t", trace_path.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(0), || {
            format!("{dist} m: qps exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
        })?;
        let written = std::fs::read_to_string(&trace_path).map_err(|e| e.to_string())?;
        ensure(written == csv, || format!("{dist} m: CLI trace differs from library trace"))?;

        let _ = write!(
            report,
            "{dist:.0} m: t_N {:.1} s, err {:.3}, rotor {:.1}; ",
            sum.t_n,
            sum.max_tracking_error,
            sum.max_rotor_speed.unwrap_or(f64::NAN)
        );
    }
    Ok(report.trim_end_matches("; ").to_owned())
}

// ------------------------------------------------------------------ 11

fn rk4_order() -> Check {
    let p = QpsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    let mut orders = Vec::new();
    for _ in 0..5 {
        let x0 = common::random_state(&mut rng);
        // Input held for 0.1 s at a time, so every step size lands on its switches.
        let inputs: Vec<ControlInput> = (0..10)
            .map(|_| ControlInput {
                thrust_accel: rng.gen_range(-5.0..5.0),
                angular_accel: Vector3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ),
            })
            .collect();
        let integrate = |steps_per_hold: usize| -> Result<QpsState, String> {
            let h = 0.1 / steps_per_hold as f64;
            let mut x = x0;
            for u in &inputs {
                for _ in 0..steps_per_hold {
                    x = rk4_step(&x, u, h, &p).map_err(|e| e.to_string())?;
                }
            }
            Ok(x)
        };
        let reference = integrate(640)?.to_vector();
        let errors: Vec<f64> = [5, 10, 20]
            .iter()
            .map(|&m| integrate(m).map(|x| (x.to_vector() - reference).amax()))
            .collect::<Result<_, _>>()?;
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            worst = worst.min(order);
            orders.push(order);
        }
    }
    ensure(worst >= 3.8, || format!("observed orders {orders:.3?}"))?;
    Ok(format!("5 random inputs, observed order ≥ {worst:.3}"))
}

// ------------------------------------------------------------------ driver

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let ms = Duration::from_millis;
    let criteria = [
        Criterion { id: 1, name: "inertia combination", budget: ms(1), run: inertia_combination },
        Criterion { id: 2, name: "hover feasibility", budget: ms(1), run: hover_feasibility },
        Criterion { id: 3, name: "σ₃ contract", budget: ms(1), run: sigma3_contract },
        Criterion { id: 4, name: "flat round trip", budget: ms(1000), run: flat_round_trip },
        Criterion { id: 5, name: "linearization (full N)", budget: ms(10_000), run: linearization },
        Criterion { id: 6, name: "regulation", budget: ms(30_000), run: regulation },
        Criterion { id: 7, name: "A* optimality", budget: ms(60_000), run: astar_optimality },
        Criterion { id: 8, name: "clearance", budget: ms(120_000), run: clearance },
        Criterion { id: 9, name: "bisection oracle", budget: ms(1), run: bisection },
        Criterion { id: 10, name: "urban end-to-end", budget: ms(300_000), run: flagship },
        Criterion { id: 11, name: "RK4 order", budget: ms(10_000), run: rk4_order },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();

    let (mut passed, mut failed, mut unexpected) = (0, 0, Vec::new());
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let t0 = Instant::now();
        let outcome = (c.run)();
        let elapsed = t0.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:?}, budget {:?}", c.budget)),
            other => other,
        };
        let known = KNOWN_CONFLICTS.contains(&c.id);
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        let note = if known && outcome.is_err() { " [known conflict]" } else { "" };
        println!("{tag} {:>2} {:<24} {:>10.3?}  {detail}{note}", c.id, c.name, elapsed);
        match (outcome.is_ok(), known) {
            (true, false) => passed += 1,
            (false, true) => failed += 1,
            (true, true) => {
                passed += 1;
                unexpected.push(format!("criterion {} passed but is listed as a known conflict", c.id));
            }
            (false, false) => {
                failed += 1;
                unexpected.push(format!("criterion {} failed", c.id));
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            eprintln!("acceptance: {u}");
        }
        ExitCode::FAILURE
    }
}
