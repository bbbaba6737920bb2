//! Acceptance suite. One line per criterion: `criterion N [name] PASS|FAIL: detail`.
//! Exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use evermap::acquisition::{
    build_profile, sample_phases, Phase, Profile, ProfileOptions, Sample, StreamDecoder, Trace,
};
use evermap::feasibility::{can_traverse, BlockReason, MaterialRules, RobotConfig};
use evermap::kinematics::{
    discrete_material_oracle, extension_from_ticks, sensor_position, DrumConfig, Material, RobotProfile,
};
use evermap::mapping::{
    auto_prominence, detect_peaks, find_peaks, fit_sources, grid_oracle, localize, ForwardModel, LocalizeOptions,
};
use evermap::route::{reference_course, PipeRoute, Pose, Segment};
use evermap::sensor::{FieldModel, Scene, SensorConfig, SensorKind, Source, SourcesConfig};
use evermap::sim::{simulate, CrankSchedule, RunIds, SimParams};

// Pinned tolerances.
const LEAD_IN_SLEEVE: f64 = 5.0;
const LEAD_IN_SOURCE: f64 = 0.5;
const LEAD_IN_RATE_HZ: f64 = 1000.0;
const ORACLE_PAIRS: usize = 1000;
const ORACLE_ELEMENTS: usize = 10_000;
const SPEED_RATIO_TOL: f64 = 1e-9;
const SPIKE_SEEDS: std::ops::Range<u64> = 0..20;
const SPIKE_MIN_SNR_DB: f64 = 20.0;
const SPIKE_POSITION_TOL: f64 = 0.01;
const SPIKE_STRENGTH_TOL: f64 = 0.05;
const GRID_SCENES: usize = 50;
const GRID_STEP: f64 = 0.01;
const GRID_RSS_SLACK: f64 = 1e-9;
const SLOPE_TOL: f64 = 1e-3;
const ROUND_TRIPS: usize = 100;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    fs::read_to_string(configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn hall(sigma: f64) -> SensorConfig {
    SensorConfig {
        kind: SensorKind::Hall {
            sigma,
            adc_bits: 12,
            adc_min: 0.0,
            adc_max: 200.0,
        },
        baseline: 50.0,
        ..SensorConfig::default()
    }
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Sensor enters at half the sleeve length; a source at s0 can only show up
/// as a peak once the sensor has passed it, i.e. for x > (S + s0) / 2.
fn lead_in() -> Verdict {
    let route = PipeRoute::new(vec![Segment::straight(5.5, 0.07)], Pose::default()).unwrap();
    let scene = Scene::new(route, vec![Source::magnet(LEAD_IN_SOURCE, 1e-3)], hall(1.0)).unwrap();
    let robot = RobotProfile::fabric();
    let drum = DrumConfig::default();
    let params = SimParams {
        sample_rate_hz: LEAD_IN_RATE_HZ,
        schedule: CrankSchedule::constant(0.05),
        seed: 11,
    };
    let rules = MaterialRules::defaults(Material::Fabric);
    let trace = simulate(&scene, &robot, &drum, &rules, &params, &RunIds::default())
        .map_err(|e| e.to_string())?
        .trace;
    let tick = drum.extension_per_tick();
    let first = trace
        .samples()
        .iter()
        .map(|s| extension_from_ticks(&drum, s.encoder_ticks))
        .find(|&x| sensor_position(&robot, x.min(robot.sleeve_length)).is_ok_and(|s| s >= 0.0))
        .ok_or("sensor never entered")?;
    let half = LEAD_IN_SLEEVE / 2.0;
    if (first - half).abs() > tick {
        return Err(format!(
            "first in-pipe extension {first:.6} m, expected {half} ± {tick:.2e} m"
        ));
    }

    let threshold = (LEAD_IN_SLEEVE + LEAD_IN_SOURCE) / 2.0;
    let mut first_seen = None;
    let mut x_cut = half;
    while x_cut <= 3.2 {
        let cut = drum.ticks_for_extension(x_cut);
        let mut partial = Trace::new();
        for s in trace.samples().iter().take_while(|s| s.encoder_ticks <= cut) {
            partial.push(*s).unwrap();
        }
        if let Ok(p) = build_profile(&partial, &drum, &robot, &ProfileOptions::default()) {
            let p = p.decoded(&scene.sensor);
            let found = detect_peaks(&p, auto_prominence(&p), 0.05)
                .map(|peaks| peaks.iter().any(|k| (k.s - LEAD_IN_SOURCE).abs() <= 0.02))
                .unwrap_or(false);
            if found {
                first_seen = Some(x_cut);
                break;
            }
        }
        x_cut += 0.005;
    }
    let seen = first_seen.ok_or("peak never resolved")?;
    check(
        seen > threshold,
        format!("first in-pipe at x = {first:.6} m (tick {tick:.2e} m); peak first resolved at x = {seen:.3} m > {threshold} m"),
    )
}

fn kinematics_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_PAIRS {
        let len = rng.random_range(1.0..=10.0);
        let x = rng.random_range(0.0..=len);
        let robot = RobotProfile::new(len, 0.05, Material::Plastic).unwrap();
        let exact = sensor_position(&robot, x).unwrap();
        let discrete = discrete_material_oracle(&robot, x, ORACLE_ELEMENTS);
        let bound = len / ORACLE_ELEMENTS as f64;
        let err = (exact - discrete).abs();
        worst = worst.max(err / bound);
        if err > bound {
            return Err(format!("S = {len}, x = {x}: |{exact} - {discrete}| > {bound}"));
        }
    }
    let mut worst_speed = 0.0f64;
    let dt = 1e-3;
    for i in 0..ORACLE_PAIRS {
        let len = 1.0 + 9.0 * i as f64 / ORACLE_PAIRS as f64;
        let robot = RobotProfile::new(len, 0.05, Material::Plastic).unwrap();
        let v_tip = 0.05;
        let x = (0.1 + 0.8 * (i % 97) as f64 / 97.0) * len;
        let ahead = sensor_position(&robot, x + v_tip * dt).unwrap();
        let behind = sensor_position(&robot, x - v_tip * dt).unwrap();
        let ratio = (ahead - behind) / (2.0 * dt) / v_tip;
        worst_speed = worst_speed.max((ratio - 2.0).abs());
    }
    check(
        worst_speed <= SPEED_RATIO_TOL,
        format!("{ORACLE_PAIRS} pairs, worst error {worst:.3} of S/n; sensor/tip speed off 2 by {worst_speed:.1e}"),
    )
}

fn spike_reconstruction() -> Verdict {
    let route = PipeRoute::from_config(&config("route.cfg")).map_err(|e| e.to_string())?;
    let robot = RobotConfig::from_config(&config("robot.cfg")).map_err(|e| e.to_string())?;
    let sources = SourcesConfig::from_config(&config("sources.cfg")).map_err(|e| e.to_string())?;
    let planted: Vec<(f64, f64)> = sources.sources.iter().map(|s| (s.s, s.strength)).collect();
    let scene = Scene::new(route, sources.sources, sources.sensor).map_err(|e| e.to_string())?;
    let SensorKind::Hall { sigma, .. } = scene.sensor.kind else {
        return Err("expected a hall sensor".into());
    };
    let min_peak = planted
        .iter()
        .map(|&(s, _)| {
            let alone = Scene::new(
                scene.route.clone(),
                scene.sources.iter().filter(|x| x.s == s).cloned().collect(),
                scene.sensor,
            )
            .unwrap();
            alone.expected_reading(s).unwrap() - scene.sensor.baseline
        })
        .fold(f64::INFINITY, f64::min);
    let snr_db = 20.0 * (min_peak / sigma).log10();
    if snr_db < SPIKE_MIN_SNR_DB {
        return Err(format!("scene SNR {snr_db:.2} dB below {SPIKE_MIN_SNR_DB} dB"));
    }
    let mut worst_pos = 0.0f64;
    let mut worst_strength = 0.0f64;
    for seed in SPIKE_SEEDS {
        let params = SimParams {
            seed,
            ..SimParams::default()
        };
        let out = simulate(
            &scene,
            &robot.profile,
            &robot.drum,
            &robot.rules,
            &params,
            &RunIds::default(),
        )
        .map_err(|e| e.to_string())?;
        let report = localize(
            &out.trace,
            &robot.drum,
            &robot.profile,
            &scene.route,
            &scene.sensor,
            &LocalizeOptions::default(),
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        if report.selected_k != planted.len() {
            return Err(format!("seed {seed}: selected_k = {}", report.selected_k));
        }
        for (est, &(s, a)) in report.estimates.iter().zip(&planted) {
            worst_pos = worst_pos.max((est.s - s).abs());
            worst_strength = worst_strength.max((est.strength / a - 1.0).abs());
        }
    }
    check(
        worst_pos <= SPIKE_POSITION_TOL && worst_strength <= SPIKE_STRENGTH_TOL,
        format!(
            "SNR {snr_db:.2} dB, {} seeds all k = 2; worst position error {worst_pos:.4} m, worst strength error {:.2}%",
            SPIKE_SEEDS.end - SPIKE_SEEDS.start,
            100.0 * worst_strength
        ),
    )
}

fn inversion_vs_grid() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let routes = [
        reference_course(),
        PipeRoute::new(vec![Segment::straight(2.0, 0.055)], Pose::default()).unwrap(),
    ];
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_single = 0.0f64;
    let mut fits = 0;
    for scene_idx in 0..GRID_SCENES {
        let route = &routes[scene_idx % 2];
        let model = ForwardModel::new(route, FieldModel::MagneticDipole)
            .with_baseline(50.0)
            .with_bin_averaging(true);
        for k in 1..=2usize {
            let mut truth = Vec::new();
            while truth.len() < k {
                let s = rng.random_range(0.2..1.8);
                if truth.iter().all(|&(t, _): &(f64, f64)| (t - s).abs() >= 0.15) {
                    truth.push((s, rng.random_range(4e-4..1.2e-3)));
                }
            }
            truth.sort_by(|a, b| a.0.total_cmp(&b.0));
            let weakest = truth
                .iter()
                .map(|&(s, a)| a * model.peak_kernel(s))
                .fold(f64::INFINITY, f64::min);
            let noise = Normal::new(0.0, weakest / 20.0).unwrap();
            let xs: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) * 0.01).collect();
            let ys = model.predict_binned(&xs, 0.01, &truth);
            let pts: Vec<(f64, f64)> = xs
                .iter()
                .zip(ys)
                .map(|(&x, y)| (x, y + noise.sample(&mut rng)))
                .collect();
            let profile = Profile::from_points(0.01, &pts);
            let opts = LocalizeOptions::default();
            let peaks = find_peaks(&profile, &opts).map_err(|e| e.to_string())?;
            let fit = fit_sources(&profile, k, &model, &peaks).map_err(|e| e.to_string())?;
            let grid = grid_oracle(&profile, k, &model, GRID_STEP).map_err(|e| e.to_string())?;
            fits += 1;
            let gap = fit.rss - grid.rss;
            worst_gap = worst_gap.max(gap);
            if gap > GRID_RSS_SLACK {
                return Err(format!(
                    "scene {scene_idx}, k = {k}: fit rss {} > grid rss {}",
                    fit.rss, grid.rss
                ));
            }
            if k == 1 {
                let err = (grid.estimates[0].s - truth[0].0).abs();
                worst_single = worst_single.max(err);
                if err > GRID_STEP {
                    return Err(format!("scene {scene_idx}: grid position off by {err:.4} m"));
                }
            }
        }
    }
    check(
        true,
        format!(
            "{fits} fits over {GRID_SCENES} scenes; max(fit rss - grid rss) = {worst_gap:.3e}; single-source grid error ≤ {worst_single:.4} m"
        ),
    )
}

fn slope(kind: FieldModel) -> f64 {
    let n = 200;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let d = 0.1 * 100f64.powf(i as f64 / (n - 1) as f64);
            (d.ln(), kind.kernel(d, 0.0, 1e-3).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn field_slopes() -> Verdict {
    let dipole = slope(FieldModel::MagneticDipole);
    let gamma = slope(FieldModel::GammaPoint);
    check(
        (dipole + 3.0).abs() <= SLOPE_TOL && (gamma + 2.0).abs() <= SLOPE_TOL,
        format!("dipole slope {dipole:.6}, gamma slope {gamma:.6}"),
    )
}

fn traversal_matrix() -> Verdict {
    let fabric = RobotConfig::from_config(&config("fabric.cfg")).map_err(|e| e.to_string())?;
    let plastic = RobotConfig::from_config(&config("robot.cfg")).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let main = PipeRoute::from_config(&config("route.cfg")).map_err(|e| e.to_string())?;
    let v = can_traverse(&fabric.profile, &fabric.rules, &main).map_err(|e| e.to_string())?;
    let blocker = v.blocker.ok_or("fabric traversed the sharp-bend course")?;
    let on_bend = matches!(blocker.reason, BlockReason::SharpBend { angle_deg, .. } if angle_deg == 45.0);
    if !on_bend || (blocker.s - 0.5).abs() > 1e-12 {
        return Err(format!("fabric blocked by {blocker}"));
    }
    lines.push(format!("fabric route.cfg: blocked at s = {} (sharp 45°)", blocker.s));
    for name in ["route.cfg", "constriction.cfg", "swept.cfg"] {
        let route = PipeRoute::from_config(&config(name)).map_err(|e| e.to_string())?;
        let v = can_traverse(&plastic.profile, &plastic.rules, &route).map_err(|e| e.to_string())?;
        if !v.feasible {
            return Err(format!("plastic blocked on {name}: {}", v.blocker.unwrap()));
        }
        lines.push(format!("plastic {name}: feasible"));
    }
    let has_40mm = main.segments().iter().any(|s| s.bore == 0.040) && main.segments().iter().any(|s| s.bore == 0.055);
    check(has_40mm, lines.join("; "))
}

fn random_trace(rng: &mut ChaCha8Rng) -> Trace {
    let mut t = Trace::new();
    for i in 0..rng.random_range(0..4) {
        t.set_meta(format!("key{i}"), format!("value {}", rng.random::<u32>()))
            .unwrap();
    }
    let mut time = rng.random_range(0..1000u64);
    let mut ticks: i64 = rng.random_range(-50..50);
    for _ in 0..rng.random_range(0..1000) {
        t.push(Sample::new(time, ticks, rng.random_range(-5000..5000))).unwrap();
        time += rng.random_range(1..20);
        ticks += rng.random_range(-3..6);
    }
    t
}

fn serialization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..ROUND_TRIPS {
        let trace = random_trace(&mut rng);
        let text = trace.to_csv();
        let back = Trace::parse_csv(&text).map_err(|e| format!("trace {i}: {e}"))?;
        if back.to_csv() != text || back != trace {
            return Err(format!("trace {i} did not round-trip"));
        }
    }
    let trace = random_trace(&mut rng);
    let mut wire = Vec::new();
    let corrupt_at = trace.len() / 2;
    for (i, s) in trace.samples().iter().enumerate() {
        if i == corrupt_at {
            wire.extend_from_slice(b"12,x\xff,,garbage\n");
        }
        wire.extend_from_slice(format!("{},{},{}\r\n", s.t_ms, s.encoder_ticks, s.sensor_raw).as_bytes());
    }
    let mut dec = StreamDecoder::new();
    let mut results = Vec::new();
    for chunk in wire.chunks(7) {
        results.extend(dec.push(chunk));
    }
    let errors = results.iter().filter(|r| r.is_err()).count();
    let good: Vec<Sample> = results.into_iter().filter_map(Result::ok).collect();
    check(
        errors == 1 && good == trace.samples(),
        format!(
            "{ROUND_TRIPS} traces byte-identical; stream: {errors} error(s), {} of {} samples recovered",
            good.len(),
            trace.len()
        ),
    )
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_evermap");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let run = |args: &[&str]| -> Result<(), String> {
            let status = Command::new(bin)
                .args(args)
                .current_dir(dir.path())
                .env("EVERMAP_CONFIG_DIR", configs())
                .output()
                .map_err(|e| e.to_string())?;
            if status.status.success() {
                Ok(())
            } else {
                Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)))
            }
        };
        run(&["simulate", "--seed", "42", "--out", "trace.csv"])?;
        run(&["map", "trace.csv", "--out", "map"])?;
        run(&["plot", "trace.csv", "--out", "plot.svg"])?;
        let files = ["trace.csv", "map.txt", "map.kv", "map.profile.csv", "plot.svg"];
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
        outputs.push(bytes);
    }
    let same = outputs[0] == outputs[1];
    let total: usize = outputs[0].iter().map(Vec::len).sum();
    check(
        same,
        format!("trace, reports and SVG byte-identical across two runs ({total} bytes)"),
    )
}

fn retraction() -> Verdict {
    let robot = RobotProfile::plastic();
    let drum = DrumConfig::default();
    // triangle: 0 → full → 0 in whole ticks
    let top = drum.ticks_for_extension(robot.sleeve_length);
    let mut trace = Trace::new();
    let mut t = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ticks: Vec<i64> = (0..=top).step_by(3).chain((0..top).rev().step_by(2)).collect();
    for tk in ticks {
        trace.push(Sample::new(t, tk, rng.random_range(900..1100))).unwrap();
        t += 5;
    }
    let phases = sample_phases(trace.samples());
    let extend_in_pipe = trace
        .samples()
        .iter()
        .zip(&phases)
        .filter(|(s, p)| {
            **p == Phase::Extend
                && sensor_position(&robot, extension_from_ticks(&drum, s.encoder_ticks).clamp(0.0, 2.0))
                    .is_ok_and(|x| x >= 0.0)
        })
        .count();
    let default = build_profile(&trace, &drum, &robot, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let with = build_profile(
        &trace,
        &drum,
        &robot,
        &ProfileOptions {
            include_retract: true,
            ..ProfileOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    if default.bins.iter().any(|b| b.phase != Phase::Extend) || default.total_samples() != extend_in_pipe {
        return Err(format!(
            "default profile holds {} samples, {} extend-phase in-pipe samples expected",
            default.total_samples(),
            extend_in_pipe
        ));
    }
    let key = |p: &Profile| p.positions().iter().map(|s| s.to_bits()).collect::<BTreeSet<_>>();
    let populations_differ = default.bins.iter().zip(&with.bins).any(|(a, b)| a.n != b.n);
    let on_grid = with
        .bins
        .iter()
        .all(|b| ((b.s_center / with.bin_width - 0.5).round() + 0.5) * with.bin_width == b.s_center);
    check(
        key(&default) == key(&with) && populations_differ && on_grid,
        format!(
            "default uses {} extend samples; with retraction {} samples in the same {} bins",
            default.total_samples(),
            with.total_samples(),
            with.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("half-length lead-in", lead_in),
        ("kinematics oracle", kinematics_oracle),
        ("spike reconstruction", spike_reconstruction),
        ("inversion vs brute force", inversion_vs_grid),
        ("field-law slopes", field_slopes),
        ("traversal matrix", traversal_matrix),
        ("serialization", serialization),
        ("determinism", determinism),
        ("retraction handling", retraction),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} [{name}] PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}] FAIL: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
