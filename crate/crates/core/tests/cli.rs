use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FLAT_HOP: &str = r#"
start = [10.0, 10.0, 3.0]
goal = [20.0, 10.0, 3.0]
terrain.synthetic = { extent = [30.0, 20.0], seed = 1, density = 0.0, ground_amplitude = 0.0 }
"#;

fn qps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qps"))
        .args(args)
        .output()
        .expect("qps binary runs")
}

/// Fresh scratch directory per test.
fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("not JSON: {text}"))
}

#[test]
fn run_flat_hop_succeeds() {
    let dir = scratch("run");
    let cfg = write(&dir, "hop.toml", FLAT_HOP);
    let trace = dir.join("trace.csv");
    let out = qps(&["run", "-c", &cfg, "-t", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["exit_category"], "ok");
    assert!(summary["max_rotor_speed"].as_f64().unwrap() < 400.0);
    assert!(summary["max_tracking_error"].as_f64().unwrap() <= 0.35);

    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# qps-trace v1"));
    assert_eq!(
        lines.next(),
        Some("t,x,y,z,phi,theta,psi,p,s1,s2,s3,s4,err,flag_rotor,flag_track,flag_clear")
    );
    assert_eq!(lines.count(), summary["samples"].as_u64().unwrap() as usize);
}

#[test]
fn trace_is_byte_identical_on_rerun() {
    let dir = scratch("determinism");
    let cfg = write(&dir, "hop.toml", FLAT_HOP);
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for p in [&a, &b] {
        let out = qps(&["run", "-c", &cfg, "-t", p.to_str().unwrap(), "-s", dir.join("s.json").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn plan_time_simulate_chain() {
    let dir = scratch("chain");
    let cfg = write(&dir, "hop.toml", FLAT_HOP);
    let out = qps(&["plan", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "n,x,y,z\n1,10,10,3\n2,20,10,3\n");

    let timed = dir.join("timed.csv");
    let out = qps(&["time", "-c", &cfg, "-o", timed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(&timed).unwrap();
    assert!(table.starts_with("n,x,y,z,t\n1,10,10,3,0\n2,20,10,3,"), "{table}");

    let run_trace = dir.join("run.csv");
    let sim_trace = dir.join("sim.csv");
    assert_eq!(qps(&["run", "-c", &cfg, "-t", run_trace.to_str().unwrap()]).status.code(), Some(0));
    let out = qps(&["simulate", "-c", &cfg, "-w", timed.to_str().unwrap(), "-t", sim_trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    // Flying the written table reproduces the full pipeline exactly.
    assert_eq!(std::fs::read(&run_trace).unwrap(), std::fs::read(&sim_trace).unwrap());
}

#[test]
fn goal_inside_building_is_no_path() {
    let dir = scratch("nopath");
    // A 10 m square block, 30 m tall, in the middle of a 40 m map; the goal is inside it.
    let mut grid = String::from("ncols 40\nnrows 40\nxll 0\nyll 0\ncellsize 1\n");
    for r in (0..40).rev() {
        let row: Vec<&str> = (0..40)
            .map(|c| if (15..25).contains(&c) && (15..25).contains(&r) { "30" } else { "0" })
            .collect();
        grid.push_str(&row.join(" "));
        grid.push('\n');
    }
    write(&dir, "block.grid", &grid);
    let cfg = write(
        &dir,
        "cfg.toml",
        "start = [5.0, 5.0, 3.0]\ngoal = [20.0, 20.0, 3.0]\nterrain.file = \"block.grid\"\n",
    );
    let out = qps(&["plan", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["category"], "no-path");
    assert_eq!(err["phase"], "plan");
    assert!(out.stdout.is_empty());
}

#[test]
fn terrain_is_deterministic_by_seed() {
    let dir = scratch("terrain");
    let (a, b, c) = (dir.join("a.grid"), dir.join("b.grid"), dir.join("c.grid"));
    for (p, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = qps(&["terrain", "--seed", seed, "--extent", "60", "40", "-o", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_ne!(bytes, std::fs::read(&c).unwrap());
    // The output is a loadable terrain file.
    let map = qps_core::terrain::ElevationMap::load(&a).unwrap();
    assert_eq!((map.width(), map.height()), (60, 40));
}

#[test]
fn config_errors_exit_2() {
    let dir = scratch("config");
    let typo = write(&dir, "typo.toml", &format!("{FLAT_HOP}\nsafety.epsilom = 1.0\n"));
    let out = qps(&["run", "-c", &typo]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["category"], "parse");
    assert_eq!(err["phase"], "config");

    let buried = write(&dir, "buried.toml", &FLAT_HOP.replace("[10.0, 10.0, 3.0]", "[10.0, 10.0, 0.5]"));
    let out = qps(&["run", "-c", &buried]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["category"], "config");

    let out = qps(&["run", "-c", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["category"], "io");

    assert_eq!(qps(&["frobnicate"]).status.code(), Some(2));
    let bad_table = write(&dir, "bad.csv", "n,x,y,z,t\n1,0,0,oops,0\n");
    let cfg = write(&dir, "hop.toml", FLAT_HOP);
    let out = qps(&["simulate", "-c", &cfg, "-w", &bad_table]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["category"], "parse");
}

#[test]
fn safety_violation_exits_4() {
    let dir = scratch("unsafe");
    let cfg = write(&dir, "hop.toml", FLAT_HOP);
    // Too fast for the vehicle, though not enough to tip it over: the monitor
    // must flag it.
    let table = write(&dir, "rush.csv", "n,x,y,z,t\n1,10,10,3,0\n2,20,10,3,2.0\n");
    let trace = dir.join("trace.csv");
    let out = qps(&["simulate", "-c", &cfg, "-w", &table, "-t", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["exit_category"], "safety-violation");

    // Every flag in the trace agrees with the recorded values.
    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut flagged = 0;
    for line in csv.lines().skip(2) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let speeds_ok = f[8..12].iter().all(|&s| (0.0..=400.0).contains(&s));
        assert_eq!(f[13] == 1.0, speeds_ok, "{line}");
        assert_eq!(f[14] == 1.0, f[12] <= 0.35, "{line}");
        flagged += usize::from(f[13] == 0.0 || f[14] == 0.0);
    }
    assert!(flagged > 0);
}
