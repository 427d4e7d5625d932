//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Training criteria use a desk-scale configuration (narrower MLP, smaller
//! batches, fewer steps) so the whole run fits on one core.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spe_core::encoding::{FourierEncoding, SplineConfig};
use spe_core::geometry::pointcloud::norm;
use spe_core::geometry::{
    chamfer, chamfer_bruteforce, extract_level_set, mae, marching_cubes, mesh_chamfer, psnr, sdf_mae, Aabb,
};
use spe_core::io::{save_checkpoint, save_shape_space};
use spe_core::network::{CheckpointMeta, PretrainConfig};
use spe_core::training::{
    checkerboard, fit_image, fit_new_shape, render_image, sdf_loss_grad, sdf_loss_value, train_sdf, train_shape_space,
    EncoderChoice, ImageFitConfig, LossWeights, SdfBatch, ShapeSpaceConfig, TrainConfig,
};
use spe_core::{AnalyticShape, Checkpoint, FieldModel, PointCloud, ScalarGrid, SplineEncoding};

const FD_STEP: f64 = 1e-6;
/// Sample points closer than this fraction of a knot cell to a knot plane
/// are rejected: degree-1 fields have kinks there.
const KNOT_MARGIN: f64 = 1e-3;
/// Chamfer samples per surface. Two independent samplings of the same
/// r = 0.5 sphere are about 2.5e-3 apart at this size; at 25k they are
/// about 1.1e-2 apart, above the 5e-3 threshold.
const CHAMFER_N: usize = 500_000;
const MC_RES: usize = 128;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

/// True when every projection of `x` stays clear of the knot planes.
fn clear_of_knots(model: &FieldModel, x: &[f64]) -> bool {
    let Some(s) = model.encoder.as_spline() else {
        return true;
    };
    let (r, delta) = (s.domain_radius(), s.knot_spacing());
    (0..s.projections()).all(|k| {
        let t: f64 = s.direction(k).iter().zip(x).map(|(d, v)| d * v).sum();
        let u = (t + r) / delta;
        (u - u.round()).abs() > KNOT_MARGIN
    })
}

fn random_clear_point(model: &FieldModel, half: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-half..half));
        if clear_of_knots(model, &x) {
            return x;
        }
    }
}

fn small_model(encoder: EncoderChoice, k: usize, seed: u64) -> FieldModel {
    let cfg = TrainConfig {
        encoder,
        hidden: 16,
        depth: 3,
        k_schedule: vec![k],
        steps_per_stage: vec![1],
        ..Default::default()
    };
    cfg.initial_model(3, &mut rng(seed)).unwrap()
}

fn spline(c: usize, m: usize, degree: usize) -> EncoderChoice {
    EncoderChoice::Spline {
        channels: c,
        projections: m,
        degree,
        domain_radius: None,
        freeze_directions: false,
    }
}

fn gradient_configs() -> Vec<(&'static str, FieldModel)> {
    vec![
        ("spe degree 1", small_model(spline(8, 3, 1), 8, 1)),
        ("spe degree 2", small_model(spline(8, 3, 2), 8, 2)),
        ("spe degree 2, M=1, K=16", small_model(spline(6, 1, 2), 16, 3)),
        ("fpe", small_model(EncoderChoice::fourier(8), 1, 4)),
        ("identity", small_model(EncoderChoice::Identity, 1, 5)),
    ]
}

fn random_batch(model: &FieldModel, n: usize, rng: &mut ChaCha8Rng) -> SdfBatch {
    let mut b = SdfBatch {
        dim: 3,
        surface: Vec::new(),
        normals: Vec::new(),
        domain: Vec::new(),
    };
    for _ in 0..n {
        b.surface.extend(random_clear_point(model, 0.8, rng));
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let l = norm(&v);
        b.normals.extend(v.map(|c| c / l));
        b.domain.extend(random_clear_point(model, 1.0, rng));
    }
    b
}

fn criterion_1() -> Outcome {
    let w = LossWeights { lambda: 0.1, tau: 1.0 };
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (i, (name, mut model)) in gradient_configs().into_iter().enumerate() {
        let batch = random_batch(&model, 16, &mut rng(100 + i as u64));
        let (_, grads) = sdf_loss_grad(&model, &batch, &w).unwrap();
        let analytic = grads.concat();
        let p0 = model.params();
        let mut fd = vec![0.0; p0.len()];
        let mut p = p0.clone();
        for j in 0..p0.len() {
            p[j] = p0[j] + FD_STEP;
            model.set_params(&p).unwrap();
            let up = sdf_loss_value(&model, &batch, &w).unwrap().total;
            p[j] = p0[j] - FD_STEP;
            model.set_params(&p).unwrap();
            let down = sdf_loss_value(&model, &batch, &w).unwrap().total;
            p[j] = p0[j];
            fd[j] = (up - down) / (2.0 * FD_STEP);
        }
        model.set_params(&p0).unwrap();
        let e = rel_err(&analytic, &fd);
        worst = worst.max(e);
        notes.push(format!("{name} {e:.1e} over {} params", p0.len()));
    }
    outcome(worst < 1e-4, format!("worst relative error {worst:.2e} < 1e-4 ({})", notes.join("; ")))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for (s, model) in [
        small_model(spline(8, 3, 1), 8, 11),
        small_model(spline(8, 3, 2), 8, 12),
    ]
    .iter()
    .enumerate()
    {
        let mut r = rng(200 + s as u64);
        for _ in 0..100 {
            let x = random_clear_point(model, 0.9, &mut r);
            let (_, g) = model.forward_with_input_grad(&x).unwrap();
            let fd: Vec<f64> = (0..3)
                .map(|a| {
                    let (mut up, mut down) = (x, x);
                    up[a] += FD_STEP;
                    down[a] -= FD_STEP;
                    (model.forward(&up).unwrap()[0] - model.forward(&down).unwrap()[0]) / (2.0 * FD_STEP)
                })
                .collect();
            worst = worst.max(rel_err(&g, &fd));
        }
    }
    outcome(
        worst < 1e-5,
        format!("worst relative error {worst:.2e} < 1e-5 at 100 points, degrees 1 and 2"),
    )
}

fn criterion_3() -> Outcome {
    let mut r = rng(300);
    let c = 0.37;
    let mut pou: f64 = 0.0;
    for degree in [1, 2] {
        let mut cfg = SplineConfig::new(3, 16, 4, 5);
        cfg.degree = degree;
        let weights = vec![c; 5 * 17 * 4];
        let angles = (0..10).map(|_| r.random_range(0.0..std::f64::consts::PI)).collect();
        let enc = SplineEncoding::from_angles(cfg, weights, angles).unwrap();
        let (rad, delta) = (enc.domain_radius(), enc.knot_spacing());
        let lim = rad - spe_core::encoding::basis::support_radius(degree) * delta;
        let mut tested = 0;
        while tested < 1000 {
            let x: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
            let inside = (0..5).all(|k| {
                let t: f64 = enc.direction(k).iter().zip(&x).map(|(d, v)| d * v).sum();
                t.abs() <= lim
            });
            if !inside {
                continue;
            }
            tested += 1;
            for v in enc.encode(&x).unwrap() {
                pou = pou.max((v - 5.0 * c).abs());
            }
        }
    }
    let enc = SplineEncoding::new(SplineConfig::new(3, 8, 6, 3), &mut r).unwrap();
    let fine = enc.refine();
    let mut refine: f64 = 0.0;
    for _ in 0..1000 {
        let x: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        let (a, b) = (enc.encode(&x).unwrap(), fine.encode(&x).unwrap());
        refine = refine.max(a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    }
    outcome(
        pou < 1e-12 && refine < 1e-12 && fine.segments() == 16,
        format!("constant weights off by {pou:.1e}, degree-1 refine off by {refine:.1e} (both < 1e-12)"),
    )
}

fn criterion_4() -> Outcome {
    let freqs = [0.5, 1.0, 2.0];
    let enc = SplineEncoding::from_fourier(&freqs, 1024, 3).unwrap();
    // One axis-aligned Fourier encoding per projection.
    let per_axis: Vec<FourierEncoding> = (0..3)
        .map(|a| {
            let rows = freqs
                .iter()
                .flat_map(|f| (0..3).map(move |j| if j == a { *f } else { 0.0 }))
                .collect();
            FourierEncoding::new(3, rows).unwrap()
        })
        .collect();
    let mut r = rng(400);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x: [f64; 3] = std::array::from_fn(|_| r.random_range(-1.0..1.0));
        for (k, fe) in per_axis.iter().enumerate() {
            let (spline, _) = enc.spline_eval(k, x[k]).unwrap();
            let exact = fe.encode(&x).unwrap();
            worst = worst.max(spline.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    outcome(
        worst < 1e-3,
        format!("K=1024 spline vs Fourier features max error {worst:.2e} < 1e-3 over 10^4 samples"),
    )
}

fn desk_sdf_config(seed: u64) -> TrainConfig {
    TrainConfig {
        encoder: EncoderChoice::spline(64, 3),
        hidden: 64,
        depth: 4,
        batch_points: 1000,
        lr: 1e-3,
        k_schedule: vec![2, 8, 32, 128],
        steps_per_stage: vec![200; 4],
        sphere_init: Some(PretrainConfig {
            lr: 3e-3,
            batch: 1024,
            max_steps: 3000,
            ..Default::default()
        }),
        seed,
        ..Default::default()
    }
}

fn fit_shape(shape: &AnalyticShape, seed: u64) -> (PointCloud, FieldModel) {
    let pc = shape.sample_surface(10_000, &mut rng(seed));
    let (model, _) = train_sdf(&pc, &desk_sdf_config(seed)).unwrap();
    (pc, model)
}

fn surface_chamfer(model: &FieldModel, shape: &AnalyticShape, n: usize, seed: u64) -> f64 {
    let mesh = extract_level_set(model, None, MC_RES, 0.0).unwrap();
    let mut r = rng(seed);
    let gt = shape.sample_surface(n, &mut r);
    mesh_chamfer(&mesh, &gt.positions, n, &mut r).unwrap()
}

fn criterion_5(sphere: &AnalyticShape, model: &FieldModel) -> Outcome {
    let cd = surface_chamfer(model, sphere, CHAMFER_N, 501);
    let cd_25k = surface_chamfer(model, sphere, 25_000, 502);
    let err = sdf_mae(model, None, |x| sphere.sdf(x), 64).unwrap();
    outcome(
        cd < 5e-3 && err < 1e-2,
        format!(
            "chamfer {cd:.2e} < 5e-3 (N={CHAMFER_N}; {cd_25k:.2e} at N=25k), MAE on 64^3 {err:.2e} < 1e-2"
        ),
    )
}

fn criterion_6() -> Outcome {
    let torus = AnalyticShape::torus(0.4, 0.15).unwrap();
    let (_, model) = fit_shape(&torus, 6);
    let cd = surface_chamfer(&model, &torus, CHAMFER_N, 601);
    outcome(cd < 8e-3, format!("torus chamfer {cd:.2e} < 8e-3 (N={CHAMFER_N})"))
}

fn criterion_7() -> Outcome {
    let img = checkerboard(64, 8).unwrap();
    let run = |encoder: EncoderChoice| {
        let cfg = ImageFitConfig {
            encoder,
            segments: 128,
            hidden: 64,
            depth: 4,
            lr: 1e-3,
            steps: 300,
            seed: 7,
        };
        let (model, _) = fit_image(&img, &cfg).unwrap();
        psnr(&render_image(&model, 64, 64).unwrap(), &img).unwrap()
    };
    let spe = run(EncoderChoice::spline(64, 32));
    let mlp = run(EncoderChoice::Identity);
    outcome(
        spe - mlp >= 5.0,
        format!("PSNR spe(M=32) {spe:.2} dB vs identity {mlp:.2} dB, gap {:.2} >= 5 dB, 300 steps each", spe - mlp),
    )
}

fn criterion_8(model: &FieldModel) -> Outcome {
    let cell = 2.0 / (MC_RES - 1) as f64;
    let mut radii = Vec::new();
    let mut ok = true;
    for iso in [-0.05, 0.0, 0.05] {
        let mesh = extract_level_set(model, None, MC_RES, iso).unwrap();
        let mean = mesh.vertices.iter().map(norm).sum::<f64>() / mesh.vertices.len().max(1) as f64;
        ok &= !mesh.is_empty() && (mean - (0.5 + iso)).abs() < 2.0 * cell;
        radii.push(mean);
    }
    ok &= radii.windows(2).all(|w| w[0] < w[1]);
    outcome(
        ok,
        format!(
            "mean radii {:.4} / {:.4} / {:.4} at iso -0.05 / 0 / 0.05, increasing, each within 2 cells ({:.4}) of r + iso",
            radii[0],
            radii[1],
            radii[2],
            2.0 * cell
        ),
    )
}

fn criterion_9() -> Outcome {
    let radii = [0.3, 0.4, 0.5];
    let clouds: Vec<PointCloud> = radii
        .iter()
        .enumerate()
        .map(|(i, r)| AnalyticShape::sphere(*r).unwrap().sample_surface(10_000, &mut rng(900 + i as u64)))
        .collect();
    let cfg = ShapeSpaceConfig {
        hidden: 64,
        batch_points: 1000,
        lr: 1e-3,
        steps_per_stage: vec![300; 4],
        sphere_init: Some(PretrainConfig {
            lr: 3e-3,
            batch: 1024,
            max_steps: 3000,
            ..Default::default()
        }),
        seed: 9,
        ..Default::default()
    };
    let (space, _) = train_shape_space(&clouds, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (before, after) = (dir.path().join("before.json"), dir.path().join("after.json"));
    save_shape_space(&before, &space).unwrap();
    let mlp_bytes = |s: &spe_core::training::ShapeSpace| -> Vec<u8> {
        s.mlp.params().iter().flat_map(|v| v.to_le_bytes()).collect()
    };
    let mlp_before = mlp_bytes(&space);

    let held_out = AnalyticShape::sphere(0.45).unwrap();
    let pc = held_out.sample_surface(10_000, &mut rng(945));
    let (enc, _) = fit_new_shape(&space, &pc, Some(&[200; 4]), 945).unwrap();
    save_shape_space(&after, &space).unwrap();
    let frozen = mlp_before == mlp_bytes(&space)
        && std::fs::read(&before).unwrap() == std::fs::read(&after).unwrap();
    let cd = surface_chamfer(&space.model_with(enc).unwrap(), &held_out, CHAMFER_N, 946);
    outcome(
        cd < 2e-2 && frozen,
        format!(
            "held-out r=0.45 chamfer {cd:.2e} < 2e-2, shared MLP bytes {}",
            if frozen { "unchanged" } else { "CHANGED" }
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut r = rng(1000);
    let mut cloud = |n: usize| -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| std::array::from_fn(|_| r.random_range(-1.0..1.0)))
            .collect()
    };
    let (a, b) = (cloud(500), cloud(500));
    let cd_gap = (chamfer(&a, &b).unwrap() - chamfer_bruteforce(&a, &b).unwrap()).abs();

    let mut r = rng(1001);
    let g1 = ScalarGrid::from_fn([9, 7, 5], Aabb::UNIT, |_| r.random_range(-1.0..1.0)).unwrap();
    let g2 = ScalarGrid::from_fn([9, 7, 5], Aabb::UNIT, |_| r.random_range(-1.0..1.0)).unwrap();
    let mut naive = 0.0;
    for i in 0..9 {
        for j in 0..7 {
            for k in 0..5 {
                naive += (g1.get(i, j, k) - g2.get(i, j, k)).abs();
            }
        }
    }
    naive /= (9 * 7 * 5) as f64;
    let mae_gap = (mae(&g1, &g2).unwrap() - naive).abs();

    let sphere = AnalyticShape::sphere(0.5).unwrap();
    let grid = ScalarGrid::from_fn([64; 3], Aabb::UNIT, |x| sphere.sdf(x)).unwrap();
    let mesh = marching_cubes(&grid, 0.0).unwrap();
    let closed = !mesh.is_empty() && mesh.is_closed();
    outcome(
        cd_gap <= 1e-12 && mae_gap <= 1e-12 && closed,
        format!(
            "kd-tree vs brute-force chamfer gap {cd_gap:.1e}, MAE vs naive loop gap {mae_gap:.1e}, sphere mesh {} ({} triangles)",
            if closed { "closed" } else { "NOT closed" },
            mesh.triangles.len()
        ),
    )
}

fn checkpoint_bytes(model: &FieldModel) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_checkpoint(&path, &Checkpoint::from_model(model, CheckpointMeta::default())).unwrap();
    std::fs::read(path).unwrap()
}

fn criterion_11(model: &FieldModel) -> Outcome {
    let sphere = AnalyticShape::sphere(0.5).unwrap();
    let (_, again) = fit_shape(&sphere, 5);
    let (a, b) = (checkpoint_bytes(model), checkpoint_bytes(&again));
    outcome(
        a == b,
        format!("repeated sphere fit with the same seed: checkpoints {} ({} bytes)", if a == b { "identical" } else { "DIFFER" }, a.len()),
    )
}

fn main() {
    let names = [
        "gradient correctness",
        "input-gradient correctness",
        "partition of unity and refinement exactness",
        "Fourier specialization",
        "sphere reconstruction",
        "torus reconstruction",
        "encoder ordering on image fitting",
        "level-set extraction",
        "shape space",
        "metric oracles",
        "determinism",
    ];
    // Time limits in seconds where the criterion states one.
    let limits = [60.0, 10.0, 5.0, 10.0, 600.0];

    let sphere = AnalyticShape::sphere(0.5).unwrap();
    let mut sphere_model = None;
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        let t = Instant::now();
        let mut o = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => {
                let (_, model) = fit_shape(&sphere, 5);
                let o = criterion_5(&sphere, &model);
                sphere_model = Some(model);
                o
            }
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(sphere_model.as_ref().expect("criterion 5 ran")),
            9 => criterion_9(),
            10 => criterion_10(),
            _ => criterion_11(sphere_model.as_ref().expect("criterion 5 ran")),
        };
        let secs = t.elapsed().as_secs_f64();
        if let Some(limit) = limits.get(i) {
            if secs >= *limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {limit} s limit"));
            }
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}  {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", names.len() - failed, names.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
