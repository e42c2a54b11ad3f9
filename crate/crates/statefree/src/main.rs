//! Thin command-line front end over the library: data collection, training,
//! protocol evaluation, the ablation grids, and a few utilities.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use statefree::config::RunConfig;
use statefree::dataset::{load_dataset, save_dataset};
use statefree::evalsuite::grid::{preset, ExperimentContext, PRESET_NAMES};
use statefree::evalsuite::report::{read_csv, write_csv, write_json, write_svg};
use statefree::evalsuite::xembody::run_cross_embodiment;
use statefree::evalsuite::{run_protocol, run_protocol_hacked};
use statefree::expert::{record_dataset, record_diverse_heights};
use statefree::learner::{gradient_check, load_model, save_model, train_bc, PolicyNet};
use statefree::rngstream::stream;
use statefree::sensing::{observe, render, write_debug_csv, write_debug_pgm};
use statefree::sim::{sample_task, WorldState};

#[derive(Parser)]
#[command(name = "statefree", version, about = "planar pick-and-place imitation lab")]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (datasets/, models/, reports/, figures/).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Force single-threaded reductions (already the default everywhere;
    /// recorded in run.json).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record expert demonstrations to <out>/datasets.
    GenData {
        /// Episode count (default from config, 300).
        #[arg(long)]
        episodes: Option<u32>,
        /// "diverse" records the 75-84 cm table-height grid.
        #[arg(long)]
        preset: Option<String>,
        /// File stem; defaults to a fingerprint of the collection config.
        #[arg(long)]
        name: Option<String>,
    },
    /// Behavior-clone a policy; writes <out>/models/<name>.sfpm.
    Train {
        /// Dataset base path (as written by gen-data, without extension).
        /// When omitted, records a fresh dataset from the config.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Evaluate a model file on a protocol.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// in-domain | height | horizontal | extreme (default from config).
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        trials: Option<u32>,
        /// Evaluation-time state hack: a number, or "auto" for the correct
        /// per-condition table offset.
        #[arg(long)]
        state_hack: Option<String>,
    },
    /// Run a named experiment grid; writes <preset>.csv/.json/.svg.
    Ablate {
        #[arg(long)]
        preset: String,
    },
    /// Cross-embodiment study: fine-tune both state modes onto the second
    /// arm and score them in-domain.
    Xembody {
        #[arg(long, default_value_t = 100)]
        demos: u32,
        /// Comma-separated fine-tune step budgets.
        #[arg(long, default_value = "0,300,600")]
        steps: String,
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck,
    /// Render every camera of the configured preset on a sampled scene.
    RenderDebug,
    /// Re-plot a grid CSV as an SVG bar chart.
    Plot {
        #[arg(long)]
        csv: PathBuf,
    },
}

enum AppError {
    Validation(String),
    Runtime(String),
}

impl AppError {
    fn validation(e: impl std::fmt::Display) -> Self {
        AppError::Validation(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success; keep that
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(AppError::validation)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.task.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    cfg.validate().map_err(AppError::validation)?;
    Ok(cfg)
}

fn short_hash(parts: &[String]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn run(cli: Cli) -> Result<(), AppError> {
    let cfg = resolve_config(&cli)?;
    cfg.write_run_echo().map_err(AppError::runtime)?;
    match &cli.cmd {
        Cmd::GenData { episodes, preset, name } => {
            let n = episodes.unwrap_or(cfg.n_episodes);
            let ds = match preset.as_deref() {
                Some("diverse") => {
                    record_diverse_heights(cfg.seed, n / 10).map_err(AppError::runtime)?
                }
                Some(other) => {
                    return Err(AppError::Validation(format!(
                        "unknown gen-data preset '{other}' (expected \"diverse\")"
                    )))
                }
                None => record_dataset(&cfg.task, n, cfg.seed).map_err(AppError::runtime)?,
            };
            let stem = name.clone().unwrap_or_else(|| {
                short_hash(&[format!("{:?}", cfg.task), n.to_string(), cfg.seed.to_string()])
            });
            let base = cfg.out_dir.join("datasets").join(&stem);
            save_dataset(&ds, &base).map_err(AppError::runtime)?;
            println!(
                "wrote {} episodes ({} rejections) to {}.sfld",
                ds.episodes.len(),
                ds.manifest.rejections,
                base.display()
            );
        }
        Cmd::Train { dataset, name } => {
            let ds = match dataset {
                Some(path) => {
                    let base = strip_dataset_extension(path);
                    load_dataset(&base).map_err(AppError::runtime)?
                }
                None => {
                    record_dataset(&cfg.task, cfg.n_episodes, cfg.seed)
                        .map_err(AppError::runtime)?
                }
            };
            let train_cfg = cfg.train_config().map_err(AppError::validation)?;
            let model = train_bc(&ds, &train_cfg).map_err(AppError::runtime)?;
            let stem = name.clone().unwrap_or_else(|| {
                short_hash(&[serde_json::to_string(&train_cfg).unwrap(), cfg.seed.to_string()])
            });
            let path = cfg.out_dir.join("models").join(format!("{stem}.sfpm"));
            save_model(&model, &path).map_err(AppError::runtime)?;
            println!(
                "trained on {} samples, final loss {:.6}, wrote {}",
                ds.total_steps() - ds.episodes.len(),
                model.loss_curve.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Cmd::Eval { model, protocol, trials, state_hack } => {
            let m = load_model(model).map_err(AppError::runtime)?;
            let proto_name = protocol.clone().unwrap_or_else(|| cfg.protocol.clone());
            let proto = statefree::evalsuite::Protocol::by_name(&proto_name)
                .ok_or_else(|| AppError::Validation(format!("unknown protocol '{proto_name}'")))?
                .with_trials(trials.unwrap_or(cfg.trials));
            let report = match state_hack.as_deref() {
                Some("auto") => run_protocol_hacked(&m, &proto, cfg.seed),
                Some(v) => {
                    let dz: f64 = v
                        .parse()
                        .map_err(|_| AppError::Validation(format!("bad state hack '{v}'")))?;
                    run_protocol(&m, &proto, cfg.seed, Some(dz))
                }
                None => run_protocol(&m, &proto, cfg.seed, None),
            };
            let path = cfg
                .out_dir
                .join("reports")
                .join(format!("{}-{}.json", report.fingerprint, proto.name));
            std::fs::create_dir_all(path.parent().unwrap()).map_err(AppError::runtime)?;
            std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
                .map_err(AppError::runtime)?;
            for c in &report.conditions {
                println!("{}/{}: {}/{}", proto.name, c.name, c.successes, c.trials);
            }
            println!("score {:.3} -> {}", report.score, path.display());
        }
        Cmd::Ablate { preset: preset_name } => {
            let (cells, protocols) = preset(preset_name).ok_or_else(|| {
                AppError::Validation(format!(
                    "unknown preset '{preset_name}' (expected one of {PRESET_NAMES:?})"
                ))
            })?;
            let mut ctx =
                ExperimentContext::new(cfg.seed).with_out_dir(cfg.out_dir.clone());
            let report = statefree::evalsuite::grid::run_ablation_grid(
                &mut ctx, &cells, &protocols, cfg.seed,
            );
            for (label, err) in &report.errors {
                eprintln!("cell {label} failed: {err}");
            }
            let dir = cfg.out_dir.join("reports");
            write_csv(&dir.join(format!("{preset_name}.csv")), &report.rows)
                .map_err(AppError::runtime)?;
            write_json(&dir.join(format!("{preset_name}.json")), &report.rows)
                .map_err(AppError::runtime)?;
            write_svg(
                &cfg.out_dir.join("figures").join(format!("{preset_name}.svg")),
                &report.rows,
            )
            .map_err(AppError::runtime)?;
            for row in &report.rows {
                println!(
                    "{} {} {}: {}/{} ({:.3})",
                    row.label, row.protocol, row.condition, row.successes, row.trials, row.score
                );
            }
            println!("wrote {} rows to {}", report.rows.len(), dir.join(format!("{preset_name}.csv")).display());
        }
        Cmd::Xembody { demos, steps, trials } => {
            let budgets: Vec<usize> = steps
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| AppError::Validation(format!("bad step list '{steps}'")))?;
            let mut ctx =
                ExperimentContext::new(cfg.seed).with_out_dir(cfg.out_dir.clone());
            let report = run_cross_embodiment(
                &mut ctx,
                *demos,
                &budgets,
                cfg.seed,
                trials.unwrap_or(cfg.trials),
            )
            .map_err(AppError::runtime)?;
            let path = cfg.out_dir.join("reports").join("xembody.json");
            std::fs::create_dir_all(path.parent().unwrap()).map_err(AppError::runtime)?;
            std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
                .map_err(AppError::runtime)?;
            for row in &report.rows {
                println!(
                    "{} @ {} steps: {}/{} ({:.3})",
                    row.state_mode, row.finetune_steps, row.successes, row.trials, row.score
                );
            }
        }
        Cmd::Gradcheck => {
            let mut worst = 0.0f64;
            for (sizes, seed) in [
                (vec![10usize, 8, 4], 1u64),
                (vec![6, 7, 5, 3], 2),
                (vec![12, 16, 8, 5], 3),
            ] {
                let mut rng = stream(seed, 0);
                let net = PolicyNet::init(&sizes, &mut rng);
                use rand::Rng;
                let n = 5;
                let inputs: Vec<f64> =
                    (0..n * sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let targets: Vec<f64> = (0..n * sizes[sizes.len() - 1])
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                worst = worst.max(gradient_check(&net, &inputs, &targets, n));
            }
            println!("max relative gradient error: {worst:.3e}");
            if worst > 1e-5 {
                return Err(AppError::Runtime(format!(
                    "gradient check failed: {worst:.3e} > 1e-5"
                )));
            }
        }
        Cmd::RenderDebug => {
            let scene = sample_task(&cfg.task, &mut stream(cfg.seed, 0));
            let world = WorldState::init(scene).map_err(AppError::runtime)?;
            let obs_cfg = cfg.obs_config().map_err(AppError::validation)?;
            let dir = cfg.out_dir.join("figures");
            std::fs::create_dir_all(&dir).map_err(AppError::runtime)?;
            for (i, cam) in obs_cfg.cameras.iter().enumerate() {
                let img = render(&world, cam);
                let csv = dir.join(format!("camera{i}.csv"));
                write_debug_csv(&csv, &img).map_err(AppError::runtime)?;
                for (ch, label) in [(0usize, "color"), (1, "depth")] {
                    let pgm = dir.join(format!("camera{i}-{label}.pgm"));
                    write_debug_pgm(&pgm, &img, ch).map_err(AppError::runtime)?;
                }
                println!("camera {i}: {}", csv.display());
            }
            let obs = observe(&world, &obs_cfg, None);
            println!("observation: {} pixels + {} state dims", obs.pixels.len(), obs.state.len());
        }
        Cmd::Plot { csv } => {
            let rows = read_csv(csv).map_err(AppError::runtime)?;
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
            let path = cfg.out_dir.join("figures").join(format!("{stem}.svg"));
            write_svg(&path, &rows).map_err(AppError::runtime)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn strip_dataset_extension(path: &Path) -> PathBuf {
    let s = path.display().to_string();
    for suffix in [".sfld", ".manifest.json"] {
        if let Some(stripped) = s.strip_suffix(suffix) {
            return PathBuf::from(stripped);
        }
    }
    path.to_path_buf()
}
