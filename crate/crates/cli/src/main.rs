use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taskgrasp::pipeline::{
    evaluate_gsr, execute_winner, run_pipeline, Observation, PipelineConfig, RunOutput, RunTrace, Scenario, TraceStore,
};
use taskgrasp::reasoning::Instruction;
use taskgrasp::scene::{default_camera, generate_scene, render_observation, ObjectClass, SceneDescription};

#[derive(Parser)]
#[command(name = "taskgrasp", version, about = "Task-oriented grasp selection from instructions and RGB-D frames")]
struct Cli {
    /// TOML config file. Environment variables override it and flags
    /// override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigFlags {
    /// mock | remote
    #[arg(long, global = true)]
    reasoning: Option<String>,
    /// oracle | remote
    #[arg(long, global = true)]
    grounding: Option<String>,
    /// sampler | remote
    #[arg(long, global = true)]
    grasp_source: Option<String>,
    /// Sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sampler budget (accepted candidates sought).
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Reasoning backend calls per run.
    #[arg(long, global = true)]
    attempts: Option<usize>,
    /// Rule table for the mock reasoner.
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Where run directories are written.
    #[arg(long, global = true)]
    trace_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once.
    Run {
        #[arg(long, short)]
        instruction: String,
        #[command(flatten)]
        input: Input,
        /// Seed for scenes generated with `--classes`.
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        /// Execute the winner in the scene with the grasp simulator.
        #[arg(long)]
        execute: bool,
        /// Print the trace document instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Grasp success rate over generated scenes.
    Eval {
        /// Comma-separated classes; all when omitted.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<ObjectClass>,
        #[arg(long, default_value = "clutter")]
        scenario: Scenario,
        #[arg(long, default_value_t = 50)]
        runs: u32,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
    },
    /// Write a scene document.
    GenScene {
        #[arg(long, value_delimiter = ',', required = true)]
        classes: Vec<ObjectClass>,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a scene document to an observation directory.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

/// Where a run's observation comes from.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Scene document; rendered from the default camera.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Observation directory written by `render`.
    #[arg(long)]
    observation: Option<PathBuf>,
    /// Generate a scene with these classes.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<ObjectClass>>,
}

fn config(cli: &Cli) -> Result<PipelineConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env()?;
    let f = &cli.flags;
    let flags: HashMap<&str, String> = [
        ("TASKGRASP_REASONING", f.reasoning.clone()),
        ("TASKGRASP_GROUNDING", f.grounding.clone()),
        ("TASKGRASP_GRASP_SOURCE", f.grasp_source.clone()),
        ("TASKGRASP_SEED", f.seed.map(|s| s.to_string())),
        ("TASKGRASP_TRACE_DIR", f.trace_dir.as_ref().map(|p| p.display().to_string())),
    ]
    .into_iter()
    .filter_map(|(k, v)| Some((k, v?)))
    .collect();
    if let Some(b) = f.budget {
        cfg.grasp.sampler.budget = b;
    }
    if let Some(e) = f.epsilon {
        cfg.epsilon = e;
    }
    if let Some(a) = f.attempts {
        cfg.reasoning.attempts = a;
    }
    if let Some(r) = &f.rules {
        cfg.reasoning.rules = Some(r.clone());
    }
    cfg.apply_overrides(|k| flags.get(k).cloned())?;
    Ok(cfg)
}

fn read_scene(path: &Path) -> Result<SceneDescription, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    SceneDescription::from_document(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn render(scene: &SceneDescription) -> Observation {
    let (intr, pose) = default_camera();
    render_observation(scene, &intr, &pose).into()
}

fn summary(trace: &RunTrace) -> String {
    let mut lines = vec![format!("run {}", trace.run_id)];
    if let Some(r) = trace.reasoning() {
        let a = &r.answer;
        lines.push(format!("reasoning: task '{}', object '{}', part '{}' ({})", a.task, a.object, a.part, a.affordance));
    }
    if let Some(g) = trace.grounding() {
        lines.push(format!("grounding: {} mask pixels in {:?}", g.mask_pixels, g.bbox));
    }
    if let Some(s) = trace.selection() {
        let w = &s.report.winner;
        let t = w.translation;
        lines.push(format!(
            "selection: {} candidates from {} points, winner score {:.3} width {:.4} m at ({:.4}, {:.4}, {:.4})",
            s.candidate_count, s.cloud_points, w.score, w.width, t.x, t.y, t.z
        ));
    }
    if let Some(e) = trace.execution() {
        let o = &e.outcome;
        let verdict = match o.failure_reason {
            None => format!("success, object {:?}", o.grasped_object),
            Some(r) => format!("failed: {r:?}"),
        };
        lines.push(format!("execution: {verdict}"));
    }
    if let Some((stage, e)) = trace.error() {
        lines.push(format!("{} failed: {}: {}", stage.name(), e.kind, e.message));
    }
    lines.join("\n")
}

fn run(cfg: PipelineConfig, instruction: &str, input: &Input, scene_seed: u64, execute: bool, json: bool) -> Result<bool, String> {
    let instr = Instruction::new(instruction).map_err(|e| e.to_string())?;
    let scene = match (&input.scene, &input.classes) {
        (Some(path), _) => Some(read_scene(path)?),
        (None, Some(classes)) => Some(generate_scene(classes, scene_seed).map_err(|e| e.to_string())?),
        (None, None) => None,
    };
    let obs = match (&scene, &input.observation) {
        (Some(s), _) => render(s),
        (None, Some(dir)) => Observation::load(dir).map_err(|e| format!("{}: {e}", dir.display()))?,
        (None, None) => unreachable!("clap requires one input"),
    };
    // with execution the trace is published after the outcome is appended
    let store = cfg.trace_dir.clone().filter(|_| execute).map(TraceStore::new);
    let run_cfg = if store.is_some() { PipelineConfig { trace_dir: None, ..cfg } } else { cfg };
    let RunOutput { mut trace, artifacts } = run_pipeline(&instr, &obs, &run_cfg, &mut |_| {}).map_err(|e| e.to_string())?;
    if execute {
        let scene = scene.as_ref().ok_or("--execute needs --scene or --classes")?;
        let target = trace
            .reasoning()
            .and_then(|r| scene.objects.iter().find(|o| o.class.name() == r.answer.object))
            .map(|o| o.id);
        execute_winner(&mut trace, scene, target);
    }
    if let Some(store) = store {
        store.write(&RunOutput { trace: trace.clone(), artifacts }).map_err(|e| e.to_string())?;
    }
    println!("{}", if json { trace.to_json() } else { summary(&trace) });
    let executed_ok = trace.execution().is_none_or(|e| e.outcome.success);
    Ok(trace.is_complete() && executed_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config(&cli).and_then(|cfg| match &cli.command {
        Command::Run { instruction, input, scene_seed, execute, json } => {
            run(cfg, instruction, input, *scene_seed, *execute, *json)
        }
        Command::Eval { classes, scenario, runs, base_seed } => {
            let classes = if classes.is_empty() { ObjectClass::ALL.to_vec() } else { classes.clone() };
            let report = evaluate_gsr(&classes, *scenario, *runs, &cfg, *base_seed);
            println!("{}", report.to_table());
            for (kind, n) in report.failures() {
                println!("{kind}: {n}");
            }
            Ok(true)
        }
        Command::GenScene { classes, scene_seed, out } => {
            let doc = generate_scene(classes, *scene_seed).map_err(|e| e.to_string())?.to_document();
            match out {
                Some(path) => std::fs::write(path, doc).map_err(|e| format!("{}: {e}", path.display()))?,
                None => println!("{doc}"),
            }
            Ok(true)
        }
        Command::Render { scene, out } => {
            render(&read_scene(scene)?).save(out).map_err(|e| format!("{}: {e}", out.display()))?;
            Ok(true)
        }
        Command::Serve { addr } => {
            let cfg = PipelineConfig { trace_dir: Some(cfg.trace_dir.clone().unwrap_or_else(|| "runs".into())), ..cfg };
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(taskgrasp_server::serve(cfg, addr))?;
            Ok(true)
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
