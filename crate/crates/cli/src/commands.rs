use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use spe_core::geometry::{extract_level_set, mesh_chamfer, psnr, sdf_mae, Point3};
use spe_core::io::{
    load_checkpoint, load_encoding, load_shape_space, read_ppm, read_xyz, save_checkpoint, save_encoding,
    save_shape_space, write_obj, write_ppm, write_xyz, EncodingFile,
};
use spe_core::network::{CheckpointMeta, PretrainConfig};
use spe_core::training::{
    default_steps, fit_image, fit_new_shape, initialize, regress_sdf, render_image, train_sdf_from, train_shape_space,
    EncoderChoice, ImageFitConfig, RegressConfig, ShapeSpaceConfig, TrainConfig, TrainLog,
};
use spe_core::{Checkpoint, FieldModel, PointCloud, Similarity, TriangleMesh};

use crate::args::*;
use crate::error::{existing, CliError, CliResult};
use crate::manifest::{finite_or_string, sidecar, write_json, write_manifest};
use crate::shape::{parse_analytic, parse_ground_truth};

/// Normalized clouds are placed in this ball, leaving margin inside [-1, 1]^3.
const NORMALIZED_RADIUS: f64 = 0.9;

/// Evaluation sampling gets its own stream so it never shifts training draws.
const STREAM_EVAL: u64 = 3;

fn eval_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_EVAL);
    rng
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs always serialize")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_csv(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_loss_csv(path: &Path, losses: &[f64]) -> CliResult<()> {
    write_csv(path, |w| {
        writeln!(w, "step,loss")?;
        for (i, l) in losses.iter().enumerate() {
            writeln!(w, "{},{l:e}", i + 1)?;
        }
        Ok(())
    })
}

fn encoder_choice(e: &EncoderArgs, m: usize) -> CliResult<EncoderChoice> {
    Ok(match e.encoder {
        EncoderKind::Spe => {
            if m == 0 || e.c == 0 {
                return Err(CliError::usage(format!("--m and --c must be at least 1 (got M = {m}, C = {})", e.c)));
            }
            if e.degree > 2 {
                return Err(CliError::usage(format!("--degree must be 0, 1 or 2 (got {})", e.degree)));
            }
            EncoderChoice::Spline {
                channels: e.c,
                projections: m,
                degree: e.degree,
                domain_radius: e.domain_radius,
                freeze_directions: e.freeze_directions,
            }
        }
        EncoderKind::Fpe => EncoderChoice::Fourier {
            frequencies: e.fpe_frequencies,
            sigma: e.fpe_sigma,
        },
        EncoderKind::Identity => EncoderChoice::Identity,
    })
}

fn stage_steps(given: Option<&[usize]>, stages: usize) -> CliResult<Vec<usize>> {
    match given {
        None => Ok(default_steps(stages)),
        Some([one]) => Ok(vec![*one; stages]),
        Some(v) if v.len() == stages => Ok(v.to_vec()),
        Some(v) => Err(CliError::usage(format!(
            "--steps-per-stage has {} entries for {stages} stages",
            v.len()
        ))),
    }
}

/// SDF fitting needs normals and coordinates inside [-1, 1]^3.
fn read_sdf_cloud(path: &Path, normalize: bool) -> CliResult<(PointCloud, Option<Similarity>)> {
    let pc = read_xyz(path)?;
    if pc.normals.is_none() {
        return Err(CliError::usage(format!("{}: SDF fitting needs normals (6 columns)", path.display())));
    }
    if normalize {
        let (pc, t) = pc.normalize_to_ball(NORMALIZED_RADIUS)?;
        return Ok((pc, Some(t)));
    }
    if pc.max_abs_coordinate() > 1.0 {
        return Err(CliError::usage(format!(
            "{}: points leave [-1, 1]^3; pass --normalize",
            path.display()
        )));
    }
    Ok((pc, None))
}

fn print_stages(log: &TrainLog) {
    for s in &log.stages {
        eprintln!(
            "stage K={:<4} steps={:<5} probe loss {:.6e} -> {:.6e}",
            s.k, s.steps, s.start_loss, s.end_loss
        );
    }
}

pub fn make_fixture(args: &MakeFixtureArgs) -> CliResult<()> {
    let shape = parse_analytic(&args.shape)?;
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let pc = shape.sample_surface(args.n, &mut ChaCha8Rng::seed_from_u64(args.seed));
    write_xyz(&args.out, &pc)?;
    write_manifest(&args.out, "make-fixture", args, to_json(&shape), json!({ "points": pc.len() }))?;
    eprintln!("wrote {} points to {}", pc.len(), args.out.display());
    Ok(())
}

/// Resolves the K schedule from --schedule and --k.
fn resolve_schedule(args: &FitSdfArgs) -> CliResult<Vec<usize>> {
    let default = TrainConfig::default().k_schedule;
    match (&args.schedule, args.k) {
        (Some(s), Some(k)) if s.last() != Some(&k) => Err(CliError::usage(format!(
            "--k {k} disagrees with the last --schedule entry {:?}",
            s.last()
        ))),
        (Some(s), _) => Ok(s.clone()),
        (None, Some(k)) => Ok(default.iter().copied().filter(|&s| s < k).chain([k]).collect()),
        (None, None) => Ok(default),
    }
}

enum InitSource {
    Inline,
    Cached(std::path::PathBuf),
}

pub fn fit_sdf(args: &FitSdfArgs) -> CliResult<()> {
    let input = existing(&args.input)?;
    let schedule = resolve_schedule(args)?;
    let steps = stage_steps(args.steps_per_stage.as_deref(), schedule.len())?;
    let (init, sphere_init) = match args.init.as_str() {
        "pretrain" => (
            InitSource::Inline,
            Some(PretrainConfig {
                max_steps: args.pretrain_steps,
                batch: args.pretrain_batch,
                ..Default::default()
            }),
        ),
        "none" => (InitSource::Inline, None),
        path => (InitSource::Cached(existing(path.as_ref())?), None),
    };
    let cfg = TrainConfig {
        lambda: args.lambda,
        tau: args.tau,
        lr: args.lr,
        batch_points: args.batch,
        k_schedule: schedule,
        steps_per_stage: steps,
        seed: args.seed,
        encoder: encoder_choice(&args.encoder, args.m)?,
        hidden: args.encoder.hidden,
        depth: args.encoder.depth,
        sphere_init,
        probe_points: args.probe_points,
        ..Default::default()
    };
    cfg.validate()?;
    let (pc, normalization) = read_sdf_cloud(&input, args.normalize)?;

    let init_ck = match &init {
        InitSource::Inline => initialize(&cfg)?,
        InitSource::Cached(path) => {
            let ck = load_checkpoint(path)?;
            let m = ck.to_model()?;
            if *m.mlp.shape() != cfg.mlp_shape(3) || m.encoder.kind_name() != cfg.encoder.kind_name() {
                return Err(CliError::usage(format!(
                    "{}: initialization does not match the requested encoder and network",
                    path.display()
                )));
            }
            ck
        }
    };
    if let Some(path) = &args.save_init {
        save_checkpoint(path, &init_ck.clone().with_training(to_json(&cfg)))?;
    }
    let (model, mut log) = train_sdf_from(init_ck.to_model()?, &pc, &cfg)?;
    log.init_status = Some(init_ck.meta.status.clone());
    print_stages(&log);

    let final_loss = log.rows.last().map(|r| r.loss);
    let ck = Checkpoint::from_model(
        &model,
        CheckpointMeta {
            step: log.rows.len(),
            loss: final_loss,
            timestamp: None,
            status: "trained".into(),
        },
    )
    .with_training(to_json(&cfg))
    .with_normalization(normalization);
    save_checkpoint(&args.out, &ck)?;
    let log_path = args.log.clone().unwrap_or_else(|| sidecar(&args.out, ".log.csv"));
    write_csv(&log_path, |w| log.write_csv(w))?;
    let init_desc = match &init {
        InitSource::Inline if cfg.sphere_init.is_some() => json!("pretrain"),
        InitSource::Inline => json!("none"),
        InitSource::Cached(p) => json!({ "checkpoint": p }),
    };
    write_manifest(
        &args.out,
        "fit-sdf",
        args,
        json!({
            "encoder": cfg.encoder.kind_name(),
            "init": init_desc,
            "train": cfg,
            "normalization": normalization,
            "log": log_path,
        }),
        json!({
            "final_loss": final_loss,
            "init_status": log.init_status,
            "stages": log.stages,
        }),
    )?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn load_field(src: &FieldSource) -> CliResult<(FieldModel, Option<Similarity>)> {
    if let Some(path) = &src.model {
        let ck = load_checkpoint(existing(path)?)?;
        return Ok((ck.to_model()?, ck.config.normalization));
    }
    let space_path = src.space.as_ref().expect("clap requires --model or --space");
    let space = load_shape_space(existing(space_path)?)?;
    let model = match (src.shape, &src.encoding) {
        (Some(i), _) => {
            if i >= space.len() {
                return Err(CliError::usage(format!("--shape {i} but the space holds {} shapes", space.len())));
            }
            space.model(i)?
        }
        (None, Some(enc)) => space.model_with(load_encoding(existing(enc)?)?.to_encoding()?)?,
        (None, None) => return Err(CliError::usage("--space needs --shape or --encoding")),
    };
    Ok((model, None))
}

fn check_res(name: &str, res: usize) -> CliResult<()> {
    if res < 2 {
        return Err(CliError::usage(format!("{name} must be at least 2 (got {res})")));
    }
    Ok(())
}

fn nonempty(mesh: TriangleMesh) -> CliResult<TriangleMesh> {
    if mesh.is_empty() {
        return Err(CliError::runtime("the field has no zero crossing inside the domain"));
    }
    Ok(mesh)
}

pub fn extract(args: &ExtractArgs) -> CliResult<()> {
    check_res("--res", args.res)?;
    if !args.iso.is_finite() {
        return Err(CliError::usage("--iso must be finite"));
    }
    let (model, t) = load_field(&args.source)?;
    let mesh = extract_level_set(&model, t.as_ref(), args.res, args.iso)?;
    write_obj(&args.out, &mesh)?;
    let stats = json!({ "vertices": mesh.vertices.len(), "triangles": mesh.triangles.len() });
    write_manifest(&args.out, "extract", args, json!({ "normalization": t }), stats)?;
    eprintln!(
        "wrote {} vertices, {} triangles to {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        args.out.display()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let gt = parse_ground_truth(&args.gt_shape)?;
    check_res("--res", args.res)?;
    check_res("--mae-res", args.mae_res)?;
    if args.chamfer_n == 0 {
        return Err(CliError::usage("--chamfer-n must be at least 1"));
    }
    let (model, t) = load_field(&args.source)?;
    let mesh = nonempty(extract_level_set(&model, t.as_ref(), args.res, 0.0)?)?;
    let mut rng = eval_rng(args.seed);
    let reference = gt.sample_surface(args.chamfer_n, &mut rng)?;
    let chamfer = mesh_chamfer(&mesh, &reference.positions, args.chamfer_n, &mut rng)?;
    let mae = sdf_mae(&model, t.as_ref(), |x: &Point3| gt.sdf(x), args.mae_res)?;
    let metrics = json!({ "chamfer": chamfer, "mae": mae });
    println!("{}", serde_json::to_string_pretty(&metrics).expect("numbers serialize"));
    if let Some(out) = &args.out {
        write_json(out, &metrics)?;
        write_manifest(out, "eval", args, json!({ "normalization": t }), metrics)?;
    }
    Ok(())
}

pub fn fit_image_cmd(args: &FitImageArgs) -> CliResult<()> {
    let input = existing(&args.input)?;
    let cfg = ImageFitConfig {
        encoder: encoder_choice(&args.encoder, args.m)?,
        segments: args.k,
        hidden: args.encoder.hidden,
        depth: args.encoder.depth,
        lr: args.lr,
        steps: args.steps,
        seed: args.seed,
    };
    if cfg.segments == 0 || !(cfg.lr > 0.0) {
        return Err(CliError::usage("--k must be at least 1 and --lr positive"));
    }
    let image = read_ppm(&input)?;
    let (model, losses) = fit_image(&image, &cfg)?;
    let rendered = render_image(&model, image.width, image.height)?;
    let db = psnr(&rendered, &image)?;
    let ck = Checkpoint::from_model(
        &model,
        CheckpointMeta {
            step: losses.len(),
            loss: losses.last().copied(),
            timestamp: None,
            status: "trained".into(),
        },
    )
    .with_training(to_json(&cfg));
    save_checkpoint(&args.out, &ck)?;
    let log_path = args.log.clone().unwrap_or_else(|| sidecar(&args.out, ".log.csv"));
    write_loss_csv(&log_path, &losses)?;
    write_manifest(
        &args.out,
        "fit-image",
        args,
        json!({ "encoder": cfg.encoder.kind_name(), "fit": cfg, "log": log_path }),
        json!({ "psnr_db": finite_or_string(db), "final_loss": losses.last() }),
    )?;
    println!("PSNR: {db:.3} dB");
    Ok(())
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::usage(format!("--res expects WxH with positive sizes, got '{s}'"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

pub fn render_image_cmd(args: &RenderImageArgs) -> CliResult<()> {
    let (w, h) = parse_size(&args.res)?;
    let reference = match &args.reference {
        Some(p) => Some(read_ppm(existing(p)?)?),
        None => None,
    };
    let model = load_checkpoint(existing(&args.model)?)?.to_model()?;
    if model.dim() != 2 {
        return Err(CliError::usage(format!("{} is not an image model", args.model.display())));
    }
    let image = render_image(&model, w, h)?;
    write_ppm(&args.out, &image)?;
    let mut results = json!({});
    if let Some(r) = reference {
        if (r.width, r.height, r.channels) != (image.width, image.height, image.channels) {
            return Err(CliError::usage("--reference size or channel count differs from the rendering"));
        }
        let db = psnr(&image, &r)?;
        results = json!({ "psnr_db": finite_or_string(db) });
        println!("PSNR: {db:.3} dB");
    }
    write_manifest(&args.out, "render-image", args, json!({}), results)?;
    Ok(())
}

pub fn regress_sdf_cmd(args: &RegressSdfArgs) -> CliResult<()> {
    let gt = parse_ground_truth(&args.gt_shape)?;
    check_res("--eval-res", args.eval_res)?;
    if args.chamfer_n == 0 {
        return Err(CliError::usage("--chamfer-n must be at least 1"));
    }
    let cfg = RegressConfig {
        encoder: encoder_choice(&args.encoder, args.m)?,
        segments: args.k,
        hidden: args.encoder.hidden,
        depth: args.encoder.depth,
        lr: args.lr,
        steps: args.steps,
        batch: args.batch,
        sample_res: args.sample_res,
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let (model, losses) = regress_sdf(|x: &Point3| gt.sdf(x), &cfg)?;
    let ck = Checkpoint::from_model(
        &model,
        CheckpointMeta {
            step: losses.len(),
            loss: losses.last().copied(),
            timestamp: None,
            status: "trained".into(),
        },
    )
    .with_training(to_json(&cfg));
    save_checkpoint(&args.out, &ck)?;
    let log_path = args.log.clone().unwrap_or_else(|| sidecar(&args.out, ".log.csv"));
    write_loss_csv(&log_path, &losses)?;

    let mesh = nonempty(extract_level_set(&model, None, args.eval_res, 0.0)?)?;
    let mut rng = eval_rng(args.seed);
    let reference = gt.sample_surface(args.chamfer_n, &mut rng)?;
    let chamfer = mesh_chamfer(&mesh, &reference.positions, args.chamfer_n, &mut rng)?;
    write_manifest(
        &args.out,
        "regress-sdf",
        args,
        json!({ "encoder": cfg.encoder.kind_name(), "regress": cfg, "log": log_path }),
        json!({ "chamfer": chamfer, "final_loss": losses.last() }),
    )?;
    println!("chamfer: {chamfer:.6e}");
    Ok(())
}

/// Chamfer between the extracted surface and the cloud the field was fitted to.
fn cloud_chamfer(model: &FieldModel, pc: &PointCloud, res: usize, n: usize, seed: u64) -> CliResult<Option<f64>> {
    if res == 0 {
        return Ok(None);
    }
    check_res("--eval-res", res)?;
    let mesh = extract_level_set(model, None, res, 0.0)?;
    if mesh.is_empty() {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some(mesh_chamfer(&mesh, &pc.positions, n, &mut eval_rng(seed))?))
}

fn read_space_cloud(path: &Path) -> CliResult<PointCloud> {
    read_sdf_cloud(&existing(path)?, false).map(|(pc, _)| pc)
}

pub fn shape_space_train(args: &ShapeSpaceTrainArgs) -> CliResult<()> {
    if args.inputs.len() < 2 {
        return Err(CliError::usage("shape-space training needs at least two --inputs"));
    }
    if args.eval_res == 1 {
        return Err(CliError::usage("--eval-res must be 0 (skip) or at least 2"));
    }
    let cfg = ShapeSpaceConfig {
        channels: args.c,
        projections: args.m,
        degree: args.degree,
        hidden: args.hidden,
        depth: args.depth,
        lambda: args.lambda,
        tau: args.tau,
        lr: args.lr,
        batch_points: args.batch,
        steps_per_stage: stage_steps(args.steps_per_stage.as_deref(), args.schedule.len())?,
        k_schedule: args.schedule.clone(),
        sphere_init: (!args.no_pretrain).then(|| PretrainConfig {
            max_steps: args.pretrain_steps,
            ..Default::default()
        }),
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let clouds = args
        .inputs
        .iter()
        .map(|p| read_space_cloud(p))
        .collect::<CliResult<Vec<_>>>()?;
    let (space, logs) = train_shape_space(&clouds, &cfg)?;
    save_shape_space(&args.out, &space)?;

    let log_path = args.log.clone().unwrap_or_else(|| sidecar(&args.out, ".log.csv"));
    write_csv(&log_path, |w| {
        writeln!(w, "shape,{}", TrainLog::CSV_HEADER)?;
        for (i, log) in logs.iter().enumerate() {
            for r in &log.rows {
                writeln!(
                    w,
                    "{i},{},{},{:e},{:e},{:e},{:e}",
                    r.step, r.stage_k, r.loss, r.eikonal, r.fit, r.normal
                )?;
            }
        }
        Ok(())
    })?;
    let mut shapes = Vec::new();
    for (i, (pc, log)) in clouds.iter().zip(&logs).enumerate() {
        let cd = cloud_chamfer(&space.model(i)?, pc, args.eval_res, args.chamfer_n, args.seed)?;
        if let Some(cd) = cd {
            eprintln!("shape {i}: chamfer to input {cd:.6e}");
        }
        shapes.push(json!({
            "input": args.inputs[i],
            "final_loss": log.rows.last().map(|r| r.loss),
            "chamfer_to_input": cd.map(finite_or_string),
        }));
    }
    write_manifest(
        &args.out,
        "shape-space train",
        args,
        json!({ "space": cfg, "log": log_path }),
        json!({ "shapes": shapes }),
    )?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

pub fn shape_space_fit(args: &ShapeSpaceFitArgs) -> CliResult<()> {
    if args.eval_res == 1 {
        return Err(CliError::usage("--eval-res must be 0 (skip) or at least 2"));
    }
    let space = load_shape_space(existing(&args.space)?)?;
    let pc = read_space_cloud(&args.input)?;
    let (encoding, log) = fit_new_shape(&space, &pc, args.steps_per_stage.as_deref(), args.seed)?;
    print_stages(&log);
    let model = space.model_with(encoding.clone())?;
    let cd = cloud_chamfer(&model, &pc, args.eval_res, args.chamfer_n, args.seed)?;
    let metrics = json!({
        "final_loss": log.rows.last().map(|r| r.loss),
        "chamfer_to_input": cd.map(finite_or_string),
        "stages": log.stages,
    });
    save_encoding(&args.out, &EncodingFile::new(&encoding, metrics.clone()))?;
    let log_path = sidecar(&args.out, ".log.csv");
    write_csv(&log_path, |w| log.write_csv(w))?;
    write_manifest(&args.out, "shape-space fit", args, json!({ "log": log_path }), metrics)?;
    if let Some(cd) = cd {
        eprintln!("chamfer to input {cd:.6e}");
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
