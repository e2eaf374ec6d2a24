//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcstab_core::network::{self, construct_adjacency, critical_shifts, NetworkOptions};
use rcstab_core::reservoir::{fit_readout, spread, training_error, TrainingResult};
use rcstab_core::signals::SignalSource;
use rcstab_core::stability::{self, basin_verify, classify, cmax_continuous, kstar_continuous, kstar_discrete, Topology};
use rcstab_core::sweep::{run_sweep, Grid, Runtime, SweepConfig, SweepRecord};
use rcstab_core::{NodalDynamics, Regime, ReservoirNetwork, TimeKind};
use rcstab_validation::{configs_dir, rcstab_binary};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn two_node_network() -> ReservoirNetwork {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    ReservoirNetwork::explicit(a, nalgebra::DVector::from_element(2, 1.0)).unwrap()
}

fn poly(c: &[f64]) -> NodalDynamics {
    NodalDynamics::polynomial(c.to_vec()).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for p2 in [4.0, -4.0] {
        let r = cmax_continuous(&poly(&[-3.0, p2, -1.0]), 0.0).map_err(|e| e.to_string())?;
        ok &= r.regime == Regime::FiniteRegion && (r.c_max - 1.0).abs() <= 1e-6;
        details.push(format!("p2={p2}: {} c_max={:.9}", r.regime.as_str(), r.c_max));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    check(ok, format!("{}; {elapsed:.3}s", details.join(", ")))
}

fn criterion_2() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for p2 in [1.0, -1.0] {
        let f = poly(&[-3.0, p2, -1.0]);
        let r = cmax_continuous(&f, 0.0).map_err(|e| e.to_string())?;
        let sup = f.ratio_supremum().map_err(|e| e.to_string())?.unwrap_or(f64::INFINITY);
        ok &= r.regime == Regime::GloballyStable && (sup + 2.75).abs() < 1e-12;
        details.push(format!("p2={p2}: {} sup K*={sup}", r.regime.as_str()));
    }
    check(ok, details.join(", "))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let net = two_node_network();
    let f = poly(&[-3.0, 4.0, -1.0]);
    let c_max = cmax_continuous(&f, 0.0).map_err(|e| e.to_string())?.c_max;
    let inner = basin_verify(&net, &f, 0.999 * c_max, 10_000, 3).map_err(|e| e.to_string())?;
    let outer = basin_verify(&net, &f, 3.0, 10_000, 4).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        inner == 1.0 && outer < 1.0 && elapsed < 60.0,
        format!("fraction at 0.999 c_max = {inner}, at 3.0 = {outer}; {elapsed:.1}s"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for (p1, p2) in [(-2.0, 0.5), (-1.0, 1.0), (-0.3, 3.0), (-5.0, 0.1)] {
        let f = NodalDynamics::scaled_tanh(p1, p2).unwrap();
        for i in 1..=100 {
            let c = i as f64 * 0.1;
            let (lo, _) = kstar_discrete(&f, c).map_err(|e| e.to_string())?;
            worst = worst.max((lo - p1 * p2).abs());
        }
    }
    check(worst <= 1e-12, format!("max |K-* - p1 p2| = {worst:e} over 4 parameter pairs x 100 radii"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(1..=8);
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let a = &a * (rng.random_range(0.05..0.95) / network::spectral_radius(&a).unwrap());
        let s = critical_shifts(&a).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let k = rng.random_range(s.rho_minus..=s.rho_plus);
            let radius = network::spectral_radius(&stability::shifted_matrix(&a, k)).unwrap();
            worst = worst.max(radius);
        }
    }
    check(worst <= 1.0 + 1e-9, format!("largest |eig(K I + A)| = {worst:.12} over 50 x 100 draws"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let omega = DMatrix::from_fn(400, 12, |_, _| rng.random_range(-1.0..1.0));
    let k = nalgebra::DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
    let g = &omega * &k;
    let representable = fit_readout(&omega, g.as_slice()).map_err(|e| e.to_string())?.delta_rc;

    let target: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin()).collect();
    let mean = target.iter().sum::<f64>() / 400.0;
    let target: Vec<f64> = target.iter().map(|t| t - mean).collect();
    let zero = TrainingResult {
        omega: omega.clone(),
        k: vec![0.0; 12],
        delta_rc: f64::NAN,
        fit: nalgebra::DVector::zeros(400),
    };
    let unit = training_error(&zero, &target).map_err(|e| e.to_string())?;
    let s = spread(&[1.0, 2.0, 3.0]);
    check(
        representable <= 1e-8 && (unit - 1.0).abs() <= 1e-9 && (s - (2.0f64 / 3.0).sqrt()).abs() <= 1e-12,
        format!("representable {representable:e}, zero readout {unit}, spread [1,2,3] = {s}"),
    )
}

fn cubic_sweep_config(y_min: f64, y_max: f64, y_steps: usize) -> SweepConfig {
    SweepConfig {
        time_kind: TimeKind::Continuous,
        dynamics_template: poly(&[-3.0, 0.0, 0.0]),
        axis_x: 2,
        axis_y: 3,
        grid: Grid { x_min: -10.0, x_max: 10.0, x_steps: 21, y_min, y_max, y_steps },
        m: 100,
        n_realizations: 1,
        base_seed: 0,
        network: NetworkOptions::default(),
        task: SignalSource::lorenz_x_to_z(),
        runtime: Runtime { transient: 2000, n_keep: 10_000 },
        train: true,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let grid = run_sweep(&cubic_sweep_config(-10.0, 2.0, 21)).map_err(|e| e.to_string())?;
    // The grid stops at p3 = 2, so (a) is also probed on three columns beyond it.
    let beyond = run_sweep(&cubic_sweep_config(2.6, 3.8, 3)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(r) = grid.iter().chain(&beyond).find(|r| r.error.is_some()) {
        return Err(format!("cell ({}, {}) failed: {:?}", r.x, r.y, r.error));
    }

    let above: Vec<&SweepRecord> = grid.iter().chain(&beyond).filter(|r| r.y > 2.0).collect();
    let above_ok = above.iter().filter(|r| !r.diverged).count();
    let a = above_ok == 0;

    let stable = |r: &&SweepRecord| !r.diverged && matches!(r.regime, Some(Regime::GloballyStable | Regime::FiniteRegion));
    let at_zero: Vec<f64> = grid.iter().filter(|r| r.x == 0.0).filter(stable).filter_map(|r| r.delta_rc).collect();
    let zero_min = at_zero.iter().copied().fold(f64::INFINITY, f64::min);
    let global: Vec<f64> = grid
        .iter()
        .filter(|r| r.regime == Some(Regime::GloballyStable) && r.x.abs() >= 1.0 && r.y <= -1.0 && !r.diverged)
        .filter_map(|r| r.delta_rc)
        .collect();
    let n_global = global.len();
    let med = median(global);
    let b = !at_zero.is_empty() && zero_min > 0.5 && med < 0.5;

    let mut asym = 0;
    for r in &grid {
        let mirror = grid.iter().find(|s| s.x == -r.x && s.y == r.y).expect("grid is symmetric in p2");
        if r.regime != mirror.regime || r.c_max.to_bits() != mirror.c_max.to_bits() {
            asym += 1;
        }
    }
    let c = asym == 0;

    check(
        a && b && c && elapsed < 1800.0,
        format!(
            "(a) {} non-diverged of {} cells with p3 > 2 [{}]; (b) min Δ at p2=0 over {} stable cells = {zero_min:.3}, \
             median over {n_global} global cells = {med:.3} [{}]; (c) {asym} asymmetric cells [{}]; {elapsed:.0}s",
            above_ok,
            above.len(),
            verdict(a),
            at_zero.len(),
            verdict(b),
            verdict(c)
        ),
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok { "pass" } else { "fail" }
}

fn globally_stable(net: &ReservoirNetwork, topo: &Topology, p1: f64) -> bool {
    let f = NodalDynamics::sigmoid(p1, 0.5).unwrap();
    matches!(classify(net, &f, topo), Ok((r, _)) if r.regime == Regime::GloballyStable)
}

/// Interval of `p1` in `[-6, 6]` around the stable scan point nearest 0.
fn stability_window(net: &ReservoirNetwork, topo: &Topology) -> Option<(f64, f64)> {
    let scan: Vec<f64> = (0..=60).map(|i| -6.0 + i as f64 * 0.2).collect();
    let flags: Vec<bool> = scan.iter().map(|&p| globally_stable(net, topo, p)).collect();
    let centre = (0..scan.len()).filter(|&i| flags[i]).min_by(|&i, &j| scan[i].abs().total_cmp(&scan[j].abs()))?;
    let mut lo = centre;
    while lo > 0 && flags[lo - 1] {
        lo -= 1;
    }
    let mut hi = centre;
    while hi + 1 < scan.len() && flags[hi + 1] {
        hi += 1;
    }
    let refine = |mut inside: f64, mut outside: f64| {
        while (inside - outside).abs() > 1e-6 {
            let mid = 0.5 * (inside + outside);
            if globally_stable(net, topo, mid) { inside = mid } else { outside = mid }
        }
        inside
    };
    let left = if lo == 0 { scan[0] } else { refine(scan[lo], scan[lo - 1]) };
    let right = if hi + 1 == scan.len() { scan[hi] } else { refine(scan[hi], scan[hi + 1]) };
    Some((left, right))
}

fn criterion_8() -> Outcome {
    let cfg = SweepConfig {
        time_kind: TimeKind::Discrete,
        dynamics_template: NodalDynamics::sigmoid(0.0, 0.5).unwrap(),
        axis_x: 1,
        axis_y: 2,
        grid: Grid { x_min: -6.0, x_max: 6.0, x_steps: 13, y_min: 0.5, y_max: 0.5, y_steps: 1 },
        m: 100,
        n_realizations: 10,
        base_seed: 0,
        network: NetworkOptions::default(),
        task: SignalSource::lorenz_x_to_z(),
        runtime: Runtime { transient: 2000, n_keep: 10_000 },
        train: true,
    };
    let mut windows = Vec::new();
    let mut containing = 0;
    for r in 0..cfg.n_realizations {
        let net = construct_adjacency(cfg.m, cfg.realization_seed(r), &cfg.network).map_err(|e| e.to_string())?;
        let topo = Topology::of(&net, TimeKind::Discrete).map_err(|e| e.to_string())?;
        let w = stability_window(&net, &topo);
        if matches!(w, Some((lo, hi)) if lo <= -4.0 && hi >= 4.0) {
            containing += 1;
        }
        windows.push(w);
    }
    let records = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let inside = |rec: &SweepRecord| matches!(windows[rec.realization], Some((lo, hi)) if rec.x >= lo && rec.x <= hi);
    let runs_inside = records.iter().filter(|r| inside(r)).count();
    let diverged_inside = records.iter().filter(|r| inside(r) && (r.diverged || r.error.is_some())).count();
    let shown: Vec<String> = windows
        .iter()
        .enumerate()
        .map(|(r, w)| match w {
            Some((lo, hi)) => format!("seed {r}: [{lo:.3}, {hi:.3}]"),
            None => format!("seed {r}: empty"),
        })
        .collect();
    check(
        containing == cfg.n_realizations && diverged_inside == 0,
        format!(
            "{containing}/{} windows contain [-4, 4]; {diverged_inside} of {runs_inside} in-window runs diverged; {}",
            cfg.n_realizations,
            shown.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let family = [
        poly(&[-3.0, 4.0, -1.0]),
        poly(&[-3.0, 1.0, -1.0]),
        poly(&[-1.0, 0.5, 2.0, -0.3]),
        poly(&[-3.0, 0.0, -2.0, 1.5, -1.0]),
        poly(&[2.0, -3.0]),
        NodalDynamics::scaled_tanh(-2.0, 0.5).unwrap(),
        NodalDynamics::scaled_tanh(1.5, 2.0).unwrap(),
    ];
    let radii: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
    let mut failures = Vec::new();
    for f in &family {
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &c in &radii {
            let k = kstar_continuous(f, c).map_err(|e| e.to_string())?;
            let (lo, hi) = kstar_discrete(f, c).map_err(|e| e.to_string())?;
            if k < prev.0 - 1e-12 || lo > prev.1 + 1e-12 || hi < prev.2 - 1e-12 {
                failures.push(format!("{f:?} monotonicity at c={c}"));
            }
            prev = (k, lo, hi);
            for j in 1..=400 {
                let r = c * (j as f64 / 200.0 - 1.0);
                if r == 0.0 {
                    continue;
                }
                let ratio = f.eval(r).unwrap() / r;
                if ratio > k + 1e-9 || ratio > hi + 1e-9 || ratio < lo - 1e-9 {
                    failures.push(format!("{f:?} bound at c={c}, r={r}"));
                }
            }
        }
        for j in -100..=100 {
            let r = j as f64 * 0.05;
            let h = 1e-5;
            let fd = (f.eval(r + h).unwrap() - f.eval(r - h).unwrap()) / (2.0 * h);
            let d = f.eval_derivative(r).unwrap();
            if (d - fd).abs() > 1e-6 * d.abs().max(1.0) {
                failures.push(format!("{f:?} derivative at r={r}: {d} vs {fd}"));
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} maps x {} radii, dense grids of 400 points", family.len(), radii.len())
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    )
}

fn run_cli(bin: &Path, args: &[&str], config: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(bin)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--seed")
        .arg("11")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    other.sort();
    if names != other {
        return Err(format!("file sets differ: {names:?} vs {other:?}"));
    }
    for n in &names {
        if fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap() {
            return Err(format!("{} differs", n.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = rcstab_binary().ok_or("rcstab binary not found next to the test executable; run `cargo test --workspace` or build the `rcstab` package first")?;
    let configs = configs_dir();
    let train = tmp.path().join("train.json");
    fs::write(
        &train,
        r#"{"dynamics": {"kind": "polynomial", "coefficients": [-3.0, 1.0, -1.0]},
            "topology": {"m": 40},
            "runtime": {"transient": 500, "n_keep": 2000}}"#,
    )
    .unwrap();
    let basin = tmp.path().join("basin.json");
    fs::write(
        &basin,
        r#"{"dynamics": {"kind": "polynomial", "coefficients": [-3.0, 4.0, -1.0]},
            "topology": {"adjacency": [[0.0, 1.0], [-1.0, 0.0]]},
            "basin": {"window": {"r1_min": -2.0, "r1_max": 2.0, "r2_min": -2.0, "r2_max": 2.0},
                      "resolution": 30, "verify": {"radius": 0.9, "samples": 500}}}"#,
    )
    .unwrap();
    let cases: Vec<(&[&str], std::path::PathBuf)> = vec![
        (&["analyze"][..], configs.join("two_node_cubic.json")),
        (&["analyze"][..], configs.join("tanh_analyze.json")),
        (&["train", "--dump-omega"][..], train),
        (&["sweep"][..], configs.join("smoke_sweep.json")),
        (&["sweep", "--format", "json"][..], configs.join("smoke_sweep.json")),
        (&["basin"][..], basin),
        (&["signal"][..], configs.join("lorenz_signal.json")),
    ];
    let mut files = 0;
    for (i, (args, cfg)) in cases.iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        run_cli(&bin, args, cfg, &a)?;
        run_cli(&bin, args, cfg, &b)?;
        files += same_tree(&a, &b).map_err(|e| format!("{args:?}: {e}"))?;
    }
    Ok(format!("{} command runs repeated, {files} output files byte-identical", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("two-node finite radius", criterion_1),
        ("two-node global stability", criterion_2),
        ("basin containment", criterion_3),
        ("discrete tanh bound", criterion_4),
        ("shift-formula soundness", criterion_5),
        ("training pipeline exactness", criterion_6),
        ("cubic p2 x p3 sweep", criterion_7),
        ("discrete sigmoid window", criterion_8),
        ("monotonicity and bound suite", criterion_9),
        ("determinism", criterion_10),
    ];
    // Numeric arguments select a subset, e.g. `cargo test -p rcstab-validation --test acceptance -- 3 8`.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n} PASS: {name}: {detail}"),
            Err(detail) => {
                println!("criterion {n} FAIL: {name}: {detail}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
