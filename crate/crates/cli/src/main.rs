use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use tnl::advect::{solve, Remap, SolverConfig};
use tnl::analysis::{self, space_time_battery, weak_gap, weak_gap_grid};
use tnl::config::{config_path, parse_config, Command, Config};
use tnl::flow::{branch_snapshot, Branch};
use tnl::grid::{l1_distance, GridField};
use tnl::mollify::{mollified_data_at, MollifiedField};
use tnl::output::{csv, num, output_root, params_hash, write_outputs};
use tnl::scenario::{self, checkpoints, run_lifted, run_theorem2, Artifacts, Budget, RunManifest};
use tnl::{CellField, Dyadic, Error, FieldSpec, Result, Variant, Window};

const USAGE: &str = "usage: tnl <exact|simulate|norms|residual|scenario|dump> [--key value ...] [--config FILE] [--seed N] [--out DIR]";

/// A run that finished but whose built-in checks failed.
struct CheckFailure(Vec<String>);

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.is_empty() || argv[0] == "--help" || argv[0] == "-h" {
        eprintln!("{USAGE}");
        return ExitCode::from(if argv.is_empty() { 2 } else { 0 });
    }
    let file = match config_path(&argv) {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: {p}: {e}");
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let config = match parse_config(&argv, file.as_deref()) {
        Ok(c) => c,
        Err(Error::Config(list)) => {
            for e in list {
                eprintln!("error: {e}");
            }
            eprintln!("{USAGE}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CheckFailure(fails))) => {
            for f in fails {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(3)
        }
        Err(e @ (Error::InvalidParameter(_) | Error::Dyadic(_) | Error::Config(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type Outcome = std::result::Result<(), CheckFailure>;

fn run(config: &Config) -> Result<Outcome> {
    let (manifest, artifacts, fails) = match config.command {
        Command::Exact => exact(config)?,
        Command::Simulate => simulate(config)?,
        Command::Norms => norms(config)?,
        Command::Residual => residual(config)?,
        Command::Scenario => scenario(config)?,
        Command::Dump => return dump(config).map(Ok),
    };
    let root = output_root(config);
    let mut manifest = manifest;
    manifest.params["config"] = serde_json::Value::String(config.canonical());
    let paths = write_outputs(&manifest, &artifacts, &root, &params_hash(config))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(if fails.is_empty() { Ok(()) } else { Err(CheckFailure(fails)) })
}

type Produced = (RunManifest, Artifacts, Vec<String>);

fn u32_of(config: &Config, key: &str) -> Result<Option<u32>> {
    config
        .int(key)
        .map(|v| u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{key} = {v} is too large"))))
        .transpose()
}

fn window_of(config: &Config) -> Result<Window> {
    let n = u32_of(config, "window")?.unwrap_or(1);
    if n == 0 || n > 64 {
        return Err(Error::InvalidParameter(format!("window N = {n} outside 1..=64")));
    }
    Ok(Window::q(n as i64))
}

fn manifest(name: &str, params: serde_json::Value, diagnostics: serde_json::Value, artifacts: &Artifacts) -> RunManifest {
    RunManifest {
        scenario: name.into(),
        params,
        diagnostics,
        artifacts: artifacts.names(),
        timings_s: Vec::new(),
    }
}

fn exact(config: &Config) -> Result<Produced> {
    let branch = Branch::parse(config.text("branch").unwrap(), u32_of(config, "i")?)?;
    let t = config.dyadic("t").unwrap();
    let window = window_of(config)?;
    let level = match u32_of(config, "level")? {
        Some(l) => l,
        None => branch.required_level(t)?.max(1),
    };
    let snap = branch_snapshot(branch, t, level, window)?;
    let mut rows = Vec::new();
    for l in 0..=level {
        rows.push(vec![l.to_string(), weak_gap(&snap, l, window)?.to_string()]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.push("weak_gaps.csv", csv(&["level", "weak_gap"], &rows).into_bytes());
    artifacts.push("snapshot.txt", snap.to_text().into_bytes());
    let h = Dyadic::pow2(-(level as i32)).to_f64();
    artifacts.push("snapshot.pgm", GridField::from_cells(&snap, h)?.to_pgm());
    let (lo, hi) = snap.range();
    let m = manifest(
        "exact",
        serde_json::json!({ "branch": branch.name(), "t": t, "level": level, "window": window.to_string() }),
        serde_json::json!({ "min": lo, "max": hi }),
        &artifacts,
    );
    Ok((m, artifacts, Vec::new()))
}

fn simulate(config: &Config) -> Result<Produced> {
    let variant = Variant::from_number(config.text("variant").unwrap().parse().unwrap())?;
    let i = u32_of(config, "i")?.unwrap();
    let j = u32_of(config, "j")?.unwrap();
    let h = config.dyadic("h").unwrap();
    let t_end = config.dyadic("t-end").unwrap();
    let window = window_of(config)?;
    let spec = FieldSpec::base().truncate_time(i, variant)?;
    let mut cps: Vec<Dyadic> = checkpoints(&spec)?.into_iter().filter(|c| *c <= t_end).collect();
    if cps.last() != Some(&t_end) {
        cps.push(t_end);
    }
    let hf = h.to_f64();
    let clock = Instant::now();
    let field = MollifiedField::new(&spec, j)?;
    let data = GridField::from_fn(&window, hf, |p| mollified_data_at(j, None, p))?;
    let mut cfg = SolverConfig::new(window, hf, cps);
    cfg.cfl = config.dyadic("cfl").unwrap().to_f64();
    cfg.remap = Remap::AtCheckpoints;
    let traj = solve(&field, &data, &cfg)?;
    let elapsed = clock.elapsed().as_secs_f64();
    let branch = Branch::Truncated(variant, i);
    let q1 = Window::q(1);
    let mut rows = Vec::new();
    let mut artifacts = Artifacts::default();
    for (t, g) in &traj.snapshots {
        let level = branch.required_level(*t)?.max(1);
        let exact = GridField::from_cells(&branch_snapshot(branch, *t, level, window)?, hf)?;
        let (lo, hi) = g.min_max();
        rows.push(vec![
            t.to_string(),
            num(l1_distance(g, &exact, &q1)?),
            num(weak_gap_grid(g, 0, q1)?),
            num(lo),
            num(hi),
            scenario::checksum(g),
        ]);
        let tag = format!("t_{}", t.to_string().replace(['/', '^'], "_"));
        artifacts.push(format!("{tag}.gf01"), g.to_gf01());
        artifacts.push(format!("{tag}.pgm"), g.to_pgm());
    }
    artifacts.push(
        "checkpoints.csv",
        csv(&["t", "l1_to_exact", "weak_gap0", "min", "max", "sha256"], &rows).into_bytes(),
    );
    let mut m = manifest(
        "simulate",
        serde_json::json!({ "variant": variant.number(), "i": i, "j": j, "h": h, "dt": cfg.dt(), "t_end": t_end, "window": window.to_string() }),
        serde_json::json!({ "steps": traj.steps, "dropped_stages": field.dropped }),
        &artifacts,
    );
    m.timings_s.push(("solve".into(), elapsed));
    Ok((m, artifacts, Vec::new()))
}

fn norms(config: &Config) -> Result<Produced> {
    let i_list: Vec<u32> = config.ints("i").unwrap().iter().map(|&v| v as u32).collect();
    let s = config.dyadic("s").unwrap().to_f64();
    let sigma = config.dyadic("sigma").unwrap().to_f64();
    let samples = config.int("samples").unwrap();
    let report = analysis::norm_report(&i_list, s, sigma, samples, config.seed)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.i.to_string(),
                num(r.l1),
                num(r.bv),
                num(r.gagliardo),
                num(r.stderr),
                num(report.slope),
            ]
        })
        .collect();
    let mut artifacts = Artifacts::default();
    artifacts.push("norms.csv", csv(&["i", "L1", "TV", "Ws1_estimate", "stderr", "slope"], &rows).into_bytes());
    let m = manifest(
        "norms",
        serde_json::json!({ "i": i_list, "s": s, "sigma": sigma, "samples": samples, "seed": config.seed }),
        serde_json::to_value(&report).unwrap(),
        &artifacts,
    );
    Ok((m, artifacts, Vec::new()))
}

fn residual(config: &Config) -> Result<Produced> {
    let branch = Branch::parse(config.text("branch").unwrap(), None)?;
    let hs = config.dyadics("h").unwrap();
    let rules = config.int("rules").unwrap() as usize;
    let mut rows = Vec::new();
    for (k, phi) in space_time_battery().iter().enumerate() {
        for h in hs {
            let r = analysis::branch_residual_envelope(branch, phi, h.to_f64(), rules)?;
            rows.push(vec![k.to_string(), h.to_string(), num(r)]);
        }
    }
    let mut artifacts = Artifacts::default();
    artifacts.push("residuals.csv", csv(&["phi_id", "h", "residual"], &rows).into_bytes());
    let m = manifest(
        "residual",
        serde_json::json!({ "branch": branch.name(), "h": hs, "rules": rules }),
        serde_json::json!({ "battery": space_time_battery() }),
        &artifacts,
    );
    Ok((m, artifacts, Vec::new()))
}

fn scenario(config: &Config) -> Result<Produced> {
    match config.text("name").unwrap() {
        "theorem2" => {
            let i_list: Vec<u32> = config.ints("i").unwrap().iter().map(|&v| v as u32).collect();
            let budget = Budget {
                h: config.dyadic("h").unwrap(),
                cfl: 0.5,
                j_start: u32_of(config, "j-start")?.unwrap(),
                j_max: u32_of(config, "j-max")?.unwrap(),
            };
            let target = config.dyadic("target").map(|d| d.to_f64());
            let (mut m, a) = run_theorem2(&i_list, target, &budget)?;
            m.params["N"] = config.int("N").unwrap().into();
            let mut fails = Vec::new();
            for row in m.diagnostics["rows"].as_array().unwrap() {
                let i = &row["i"];
                if row["exact_v1_gap"] != "0" {
                    fails.push(format!("i = {i}: exact variant-1 weak gap {}", row["exact_v1_gap"]));
                }
                if row["exact_v2_is_rho_in"] != true {
                    fails.push(format!("i = {i}: exact variant-2 end state differs from rho_in"));
                }
                if row["common_prefix_identical"] != true {
                    fails.push(format!("i = {i}: the variants differ before they should"));
                }
                if row["selection_met"] != true {
                    fails.push(format!("i = {i}: no tested j met the target"));
                }
            }
            if m.diagnostics["distinctness_floor"] != "1/2^1" {
                fails.push(format!("distinctness floor {}", m.diagnostics["distinctness_floor"]));
            }
            Ok((m, a, fails))
        }
        _ => {
            let level = u32_of(config, "level")?.unwrap();
            let (mut m, mut a) = run_lifted(config.dyadics("t").unwrap(), config.dyadics("y0").unwrap(), level)?;
            let keep = config.text("branch").unwrap();
            if keep != "both" {
                let drop = if keep == "prime" { "_tilde.pgm" } else { "_prime.pgm" };
                a.files.retain(|f| !f.0.ends_with(drop));
                m.artifacts = a.names();
            }
            Ok((m, a, Vec::new()))
        }
    }
}

fn dump(config: &Config) -> Result<()> {
    let input = Path::new(config.text("input").unwrap());
    let bytes = std::fs::read(input).map_err(|e| Error::Io {
        path: input.display().to_string(),
        msg: e.to_string(),
    })?;
    let grid = if bytes.starts_with(tnl::grid::GF01_MAGIC) {
        GridField::from_gf01(&bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Decode("neither GF01 nor UTF-8 text".into()))?;
        let cells = CellField::from_text(&text)?;
        GridField::from_cells(&cells, cells.cell_side())?
    };
    let write = |ext: &str, bytes: Vec<u8>| -> Result<()> {
        let path = input.with_extension(ext);
        std::fs::write(&path, bytes).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        println!("{}", path.display());
        Ok(())
    };
    match config.text("format").unwrap() {
        "pgm" => write("pgm", grid.to_pgm()),
        "csv" => {
            let (nx, ny) = grid.dims();
            let mut rows = Vec::with_capacity(nx * ny);
            for k in 0..ny {
                for i in 0..nx {
                    let p = grid.node(i, k);
                    let mut row = vec![num(p[0]), num(p[1])];
                    row.extend((0..grid.ncomp()).map(|c| num(grid.get(i, k, c))));
                    rows.push(row);
                }
            }
            let mut header = vec!["x".to_string(), "y".to_string()];
            header.extend((0..grid.ncomp()).map(|c| format!("v{c}")));
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            write("csv", csv(&header, &rows).into_bytes())
        }
        _ => {
            let (nx, ny) = grid.dims();
            let (lo, hi) = grid.min_max();
            println!(
                "{nx}x{ny}x{} h={} origin=({}, {}) min={lo} max={hi} integral={}",
                grid.ncomp(),
                grid.h(),
                grid.origin()[0],
                grid.origin()[1],
                grid.integral()
            );
            Ok(())
        }
    }
}
