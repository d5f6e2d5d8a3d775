use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use mdc_core::codec::{decode as jpeg_decode, Bitstream, CodecConfig};
use mdc_core::evaluation::{
    code_descriptions, enumerate_outcomes, evaluate_pipeline, export_rd, monte_carlo, plot_rd, read_rd, Bilinear,
    ChannelScenario, Describer, LearnedDescriptions, LearnedReconstruction, Polyphase, Reconstructor, BASELINE_QFS,
    MEAN_IMAGE, PROPOSED_QFS,
};
use mdc_core::imaging::{
    load_corpus, load_image, prepare_patches, save_image, Augmentations, ImageTensor, PatchConfig, PatchSet, SsimConfig,
};
use mdc_core::networks::{init_params_with_width, load_checkpoint, parameter_digest, save_checkpoint, ModelBundle};
use mdc_core::synth::synthetic_corpus;
use mdc_core::training::{train_algorithm1_from, train_algorithm2_from, TrainingConfig};
use mdc_core::Error;
use serde::{Deserialize, Serialize};

use crate::{
    Algorithm, CheckpointArg, DecodeArgs, EncodeArgs, EvaluateArgs, Method, Mode, PlotArgs, PrepareArgs, SimulateArgs,
    SynthArgs, TrainArgs,
};

pub const CHECKPOINT_DIR_ENV: &str = "MDC_CHECKPOINT_DIR";
const SIDECAR: &str = "descriptions.json";
const STREAM_A: &str = "a.jpg";
const STREAM_B: &str = "b.jpg";

/// A failed command: message plus process exit code (2 input, 3 pipeline state).
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn state(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Codec(_) | Error::VersionMismatch { .. } | Error::CorruptCheckpoint(_) | Error::Diverged { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Writes to stdout; a reader that went away early (`| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::input(format!("cannot write to stdout: {e}"))),
        _ => Ok(()),
    }
}

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if !path.is_dir() {
        return Err(Failure::input(format!("{what} {} is not a directory", path.display())));
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if !path.is_file() {
        return Err(Failure::input(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::input(format!("cannot create {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Relative checkpoint paths resolve against `$MDC_CHECKPOINT_DIR` when set.
fn resolve_checkpoint(path: &Path) -> PathBuf {
    match std::env::var_os(CHECKPOINT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn load_model(arg: &CheckpointArg) -> Result<(PathBuf, ModelBundle), Failure> {
    let path = arg
        .checkpoint
        .as_deref()
        .map(resolve_checkpoint)
        .ok_or_else(|| Failure::input("--checkpoint is required"))?;
    require_file(&path, "checkpoint")?;
    let bundle = load_checkpoint(&path)?;
    Ok((path, bundle))
}

fn corpus(dir: &Path) -> Result<Vec<(String, ImageTensor)>, Failure> {
    require_dir(dir, "corpus")?;
    let images = load_corpus(dir)?;
    if images.is_empty() {
        return Err(Failure::input(format!("corpus {} contains no images", dir.display())));
    }
    Ok(images)
}

pub fn synth_corpus(a: SynthArgs) -> CmdResult {
    if a.size == 0 || !a.size.is_multiple_of(2) {
        return Err(Failure::input("--size must be a positive even number"));
    }
    create_dir(&a.out)?;
    for (name, img) in synthetic_corpus(a.count, a.size, a.size, a.seed) {
        save_image(&img, a.out.join(format!("{name}.png")))?;
    }
    log::info!("wrote {} scenes to {}", a.count, a.out.display());
    Ok(())
}

pub fn prepare_data(a: PrepareArgs) -> CmdResult {
    let images = corpus(&a.corpus)?;
    let cfg = PatchConfig {
        patch_size: a.patch,
        total: a.total,
        augmentations: if a.no_augment {
            Augmentations::NONE
        } else {
            Augmentations::ALL
        },
        seed: a.seed,
    };
    let set = prepare_patches(&images, &cfg)?;
    set.save(&a.out)?;
    log::info!(
        "wrote {} patches of {}x{} to {}",
        set.len(),
        a.patch,
        a.patch,
        a.out.display()
    );
    Ok(())
}

fn training_config(a: &TrainArgs) -> Result<TrainingConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            require_file(path, "config")?;
            let text =
                fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => TrainingConfig::default(),
    };
    cfg.qf = a.qf;
    let joint = matches!(a.algorithm, Algorithm::Joint);
    if let Some(r) = a.iters {
        if joint {
            cfg.joint_iterations = r;
        } else {
            cfg.iterations = r;
        }
    }
    if let Some(e) = a.epochs {
        if joint {
            cfg.epochs_l = e;
            cfg.pretrain_epochs = e;
        } else {
            cfg.epochs_p = e;
            cfg.epochs_q = e;
        }
    }
    if let Some(b) = a.batch {
        cfg.batch = b;
    }
    if let Some(w) = a.widths {
        cfg.width = w;
    }
    if let Some(lr) = a.lr {
        cfg.lr0 = lr;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.diagnostic_dir.is_none() {
        cfg.diagnostic_dir = a.out.parent().map(|p| p.join("diagnostics"));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: TrainArgs) -> CmdResult {
    let cfg = training_config(&a)?;
    require_dir(&a.patches, "patch directory")?;
    let patches = PatchSet::load(&a.patches)?.images();
    let bundle = match &a.init {
        Some(p) => {
            let p = resolve_checkpoint(p);
            require_file(&p, "initial checkpoint")?;
            let b = load_checkpoint(&p)?;
            if b.width() != cfg.width {
                return Err(Failure::input(format!(
                    "initial checkpoint has width {}, configuration asks for {}",
                    b.width(),
                    cfg.width
                )));
            }
            b
        }
        None => init_params_with_width(cfg.seed, cfg.width),
    };
    let trained = match a.algorithm {
        Algorithm::Alternating => train_algorithm1_from(bundle, &patches, &cfg)?,
        Algorithm::Joint => train_algorithm2_from(bundle, &patches, &cfg)?,
    };
    let out = resolve_checkpoint(&a.out);
    save_checkpoint(&trained.bundle, &out)?;
    let log_path = a.log.clone().unwrap_or_else(|| out.with_extension("log.jsonl"));
    write_text(&log_path, &trained.log.to_jsonl())?;
    for w in &trained.log.warnings {
        log::warn!("{w}");
    }
    log::info!("wrote {} and {}", out.display(), log_path.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    checkpoint: PathBuf,
    parameter_digest: String,
    method: String,
    qf: u32,
    height: usize,
    width: usize,
    description_height: usize,
    description_width: usize,
    bytes_a: usize,
    bytes_b: usize,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ours => "ours",
        Method::OursBase => "ours-base",
        Method::Bilinear => "bilinear",
    }
}

fn method_from_name(name: &str) -> Result<Method, Failure> {
    match name {
        "ours" => Ok(Method::Ours),
        "ours-base" => Ok(Method::OursBase),
        "bilinear" => Ok(Method::Bilinear),
        other => Err(Failure::input(format!("unknown method {other:?} in sidecar"))),
    }
}

type Pipeline<'a> = (Box<dyn Describer + 'a>, Box<dyn Reconstructor + 'a>);

fn pipeline(method: Method, bundle: Option<&ModelBundle>) -> Result<Pipeline<'_>, Failure> {
    let model = || bundle.ok_or_else(|| Failure::input(format!("method {} needs --checkpoint", method_name(method))));
    Ok(match method {
        Method::Ours => {
            let b = model()?;
            (
                Box::new(LearnedDescriptions(&b.omega)),
                Box::new(LearnedReconstruction(&b.alpha)),
            )
        }
        Method::OursBase => (Box::new(Polyphase), Box::new(LearnedReconstruction(&model()?.alpha))),
        Method::Bilinear => (Box::new(Polyphase), Box::new(Bilinear)),
    })
}

pub fn encode(a: EncodeArgs) -> CmdResult {
    let (ckpt, bundle) = load_model(&a.model)?;
    require_file(&a.input, "input image")?;
    let image = load_image(&a.input)?;
    let codec = CodecConfig::new(a.qf)?;
    let (describer, _) = pipeline(a.method, Some(&bundle))?;
    let pair = describer.describe(&image)?;
    let coded = code_descriptions(&pair, &codec)?;
    create_dir(&a.out)?;
    for (name, stream) in [(STREAM_A, &coded.streams[0]), (STREAM_B, &coded.streams[1])] {
        let path = a.out.join(name);
        fs::write(&path, stream.bytes())
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    let (dh, dw) = pair.dims();
    let sidecar = Sidecar {
        checkpoint: ckpt.canonicalize().unwrap_or(ckpt),
        parameter_digest: parameter_digest(&bundle),
        method: method_name(a.method).to_string(),
        qf: a.qf,
        height: image.height(),
        width: image.width(),
        description_height: dh,
        description_width: dw,
        bytes_a: coded.streams[0].byte_count(),
        bytes_b: coded.streams[1].byte_count(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_text(&a.out.join(SIDECAR), &json)?;
    log::info!(
        "wrote {} ({} + {} bytes)",
        a.out.display(),
        sidecar.bytes_a,
        sidecar.bytes_b
    );
    Ok(())
}

fn read_stream(dir: &Path, name: &str) -> Result<Option<ImageTensor>, Failure> {
    let path = dir.join(name);
    if !path.is_file() {
        return Ok(None);
    }
    let bytes = fs::read(&path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(Some(jpeg_decode(&Bitstream::from_bytes(bytes)?)?))
}

pub fn decode(a: DecodeArgs) -> CmdResult {
    require_dir(&a.input, "description directory")?;
    let sidecar_path = a.input.join(SIDECAR);
    require_file(&sidecar_path, "sidecar")?;
    let text = fs::read_to_string(&sidecar_path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", sidecar_path.display())))?;
    let sidecar: Sidecar =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", sidecar_path.display())))?;
    let model = CheckpointArg {
        checkpoint: Some(a.model.checkpoint.clone().unwrap_or(sidecar.checkpoint.clone())),
    };
    let (_, bundle) = load_model(&model)?;
    if parameter_digest(&bundle) != sidecar.parameter_digest {
        return Err(Failure::state("checkpoint does not match the one used for encoding"));
    }
    let (_, reconstructor) = pipeline(method_from_name(&sidecar.method)?, Some(&bundle))?;
    let da = read_stream(&a.input, STREAM_A)?;
    let db = read_stream(&a.input, STREAM_B)?;
    let missing = |which: &str| {
        Failure::state(format!(
            "missing description: {which} not found in {}",
            a.input.display()
        ))
    };
    let out = match a.mode {
        Mode::SideA => reconstructor.side_a(da.as_ref().ok_or_else(|| missing(STREAM_A))?)?,
        Mode::SideB => reconstructor.side_b(db.as_ref().ok_or_else(|| missing(STREAM_B))?)?,
        Mode::Central => {
            let da = da.as_ref().ok_or_else(|| missing(STREAM_A))?;
            let db = db.as_ref().ok_or_else(|| missing(STREAM_B))?;
            reconstructor.central(da, db)?
        }
    };
    if out.dims() != (sidecar.height, sidecar.width) {
        return Err(Failure::state(format!(
            "reconstruction is {}x{}, expected {}x{}",
            out.height(),
            out.width(),
            sidecar.height,
            sidecar.width
        )));
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_image(&out, &a.out)?;
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let images = corpus(&a.corpus)?;
    let needs_model = a.methods.iter().any(|m| *m != Method::Bilinear);
    let bundle = if needs_model {
        Some(load_model(&a.model)?.1)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut captions = String::new();
    for &m in &a.methods {
        let qfs: Vec<u32> = if !a.qfs.is_empty() {
            a.qfs.clone()
        } else if m == Method::Ours {
            PROPOSED_QFS.to_vec()
        } else {
            BASELINE_QFS.to_vec()
        };
        let (describer, reconstructor) = pipeline(m, bundle.as_ref())?;
        let report = evaluate_pipeline(
            method_name(m),
            describer.as_ref(),
            reconstructor.as_ref(),
            &images,
            &qfs,
            &SsimConfig::default(),
        )?;
        for p in &report.means {
            captions.push_str(&format!("{} qf={:<3} {}\n", method_name(m), p.qf, p.caption()));
        }
        rows.extend(report.rows());
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    export_rd(&rows, &a.out)?;
    emit(&captions)
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let (_, bundle) = load_model(&a.model)?;
    require_file(&a.image, "image")?;
    let image = load_image(&a.image)?;
    let scenario = ChannelScenario {
        p_loss_a: a.ploss_a,
        p_loss_b: a.ploss_b,
        trials: a.trials,
        seed: a.seed,
    };
    scenario.validate()?;
    let quality = mdc_core::evaluation::decoder_quality(&bundle, &image, a.qf, &SsimConfig::default())?;
    let report = if a.exhaustive {
        enumerate_outcomes(&quality, a.ploss_a, a.ploss_b)?
    } else {
        monte_carlo(&quality, &scenario)?
    };
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "scenario": scenario,
        "decoders": quality,
        "report": report,
    }))
    .expect("report serializes");
    if let Some(out) = &a.out {
        write_text(out, &json)?;
    }
    emit(&format!("{json}\n"))
}

pub fn plot(a: PlotArgs) -> CmdResult {
    require_file(&a.csv, "csv")?;
    let rows = read_rd(&a.csv)?;
    let means: Vec<_> = rows.iter().filter(|r| r.image == MEAN_IMAGE).cloned().collect();
    let selected = if a.all_rows || means.is_empty() { rows } else { means };
    let written = plot_rd(&selected, &a.out)?;
    emit(&written.iter().map(|p| format!("{}\n", p.display())).collect::<String>())
}
