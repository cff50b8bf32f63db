//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;
use tabletop_core::env::{self, EpisodeMetrics, SeatPolicy, Stat};
use tabletop_core::observation::observation_shape;
use tabletop_core::replay::{read_jsonl, write_jsonl};
use tabletop_core::rl::checkpoint;
use tabletop_core::rl::train::METRICS_CSV_HEADER;
use tabletop_core::rl::{train, PpoConfig, TrainConfig};
use tabletop_core::{bench, ActionTree, AgentKind, AgentSpec, EnvConfig, Execution, GameRng, GameState};

use crate::manifest::{RunConfig, RunManifest};
use crate::{Cli, Cmd, GameArgs, MatchArgs, TrainArgs};

const DEFAULT_EVAL_EPISODES: usize = 1000;
const DEFAULT_PLAY_EPISODES: usize = 100;

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Play(args) => play(&args, &cli.out, "play"),
        Cmd::Eval(args) => play(&args, &cli.out, "eval"),
        Cmd::Train(args) => train_cmd(&args, &cli.out),
        Cmd::Bench {
            game,
            seconds,
            max_steps,
            seed,
            json,
        } => bench_cmd(&game, seconds, max_steps, seed, json),
        Cmd::Actions { game, json } => actions(&game, json),
        Cmd::Observe {
            game,
            seed,
            step,
            player,
        } => observe(&game, seed, step, player),
        Cmd::Replay { log, quiet } => replay(&log, quiet),
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn seat_policy(rotate: bool) -> SeatPolicy {
    if rotate {
        SeatPolicy::Rotate
    } else {
        SeatPolicy::Fixed(0)
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Summary row in the layout of a results table: rates and lengths as
/// mean and standard error.
#[derive(Serialize)]
struct MatchSummary<'a> {
    format_version: u32,
    game: &'a str,
    n_players: usize,
    agent: String,
    opponents: Vec<String>,
    episodes: usize,
    win_rate: Stat,
    tie_rate: Stat,
    loss_rate: Stat,
    episode_return: Stat,
    episode_length: Stat,
    fps: f64,
}

fn match_summary<'a>(cfg: &'a RunConfig, m: &EpisodeMetrics) -> MatchSummary<'a> {
    MatchSummary {
        format_version: 1,
        game: cfg.game.name(),
        n_players: cfg.n_players,
        agent: cfg.learner.to_string(),
        opponents: cfg.opponents.iter().map(ToString::to_string).collect(),
        episodes: m.episodes,
        win_rate: m.wins,
        tie_rate: m.ties,
        loss_rate: m.losses,
        episode_return: m.returns,
        episode_length: m.lengths,
        fps: m.fps,
    }
}

fn play(args: &MatchArgs, out: &Path, command: &str) -> Result<ExitCode> {
    let g = &args.game;
    let default = if command == "play" {
        DEFAULT_PLAY_EPISODES
    } else {
        DEFAULT_EVAL_EPISODES
    };
    let episodes = args.episodes.unwrap_or(default);
    let exec = execution(args.sequential);
    let config = RunConfig {
        command: command.to_string(),
        game: g.game,
        n_players: g.players,
        learner: args.agent.clone(),
        opponents: vec![args.opponent.clone(); g.players.saturating_sub(1)],
        learner_seat: seat_policy(args.rotate_seats),
        seeds: vec![args.seed],
        episodes: Some(episodes),
        ppo: None,
        checkpoint_every: None,
        max_decisions: args.max_decisions,
        execution: exec,
    };
    let env_cfg = EnvConfig {
        game: g.game,
        n_players: g.players,
        learner_seat: config.learner_seat,
        opponents: config.opponents.clone(),
        seed: args.seed,
        max_decisions: args.max_decisions,
    };
    env_cfg.validate()?;
    let learner = AgentSpec::resolve(&args.agent, g.game, g.players)?;
    let manifest = RunManifest::new(config, out)?;
    let dir = manifest.write()?;

    let started = Instant::now();
    let recorded = env::play_recorded(&learner, &env_cfg, episodes, exec)?;
    let (infos, logs): (Vec<_>, Vec<_>) = recorded.into_iter().unzip();
    let steps: u64 = infos.iter().map(|e| e.length as u64).sum();
    let fps = steps as f64 / started.elapsed().as_secs_f64().max(1e-9);
    let metrics = EpisodeMetrics::from_episodes(&infos, None, fps);
    let mut csv = create(&dir.join("episodes.csv"))?;
    env::write_episode_csv(&mut csv, &infos)?;
    csv.flush()?;
    let mut jsonl = create(&dir.join("games.jsonl"))?;
    write_jsonl(&mut jsonl, &logs)?;
    jsonl.flush()?;
    let summary = match_summary(&manifest.config, &metrics);
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{} {}p {} vs {}: {} episodes, win {:.3} ± {:.3}, tie {:.3}, loss {:.3}, length {:.2}",
        g.game,
        g.players,
        args.agent,
        args.opponent,
        metrics.episodes,
        metrics.wins.mean,
        metrics.wins.se,
        metrics.ties.mean,
        metrics.losses.mean,
        metrics.lengths.mean
    );
    println!("{}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn ppo_config(a: &TrainArgs) -> PpoConfig {
    let d = PpoConfig::default();
    PpoConfig {
        learning_rate: a.lr.unwrap_or(d.learning_rate),
        anneal_lr: !a.no_anneal,
        gamma: a.gamma.unwrap_or(d.gamma),
        gae_lambda: a.gae_lambda.unwrap_or(d.gae_lambda),
        clip_coef: a.clip.unwrap_or(d.clip_coef),
        update_epochs: a.epochs.unwrap_or(d.update_epochs),
        num_minibatches: a.minibatches.unwrap_or(d.num_minibatches),
        ent_coef: a.ent_coef.unwrap_or(d.ent_coef),
        vf_coef: a.vf_coef.unwrap_or(d.vf_coef),
        max_grad_norm: a.max_grad_norm.unwrap_or(d.max_grad_norm),
        num_steps: a.num_steps.unwrap_or(d.num_steps),
        num_envs: a.num_envs.unwrap_or(d.num_envs),
        total_steps: a.steps,
        ..d
    }
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    steps: u64,
    episodes: usize,
    seconds: f64,
    illegal_actions: u64,
    /// Window metrics over the final episodes.
    final_metrics: EpisodeMetrics,
    checkpoint: PathBuf,
}

fn train_cmd(a: &TrainArgs, out: &Path) -> Result<ExitCode> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let g = &a.game;
    let ppo = ppo_config(a);
    ppo.validate()?;
    let exec = execution(a.sequential);
    let seeds: Vec<u64> = (0..a.seeds).map(|k| a.seed + k).collect();
    let config = RunConfig {
        command: "train".into(),
        game: g.game,
        n_players: g.players,
        learner: AgentKind::Random,
        opponents: vec![a.opponent.clone(); g.players.saturating_sub(1)],
        learner_seat: seat_policy(a.rotate_seats),
        seeds: seeds.clone(),
        episodes: None,
        ppo: Some(ppo.clone()),
        checkpoint_every: a.checkpoint_every,
        max_decisions: a.max_decisions,
        execution: exec,
    };
    let mut env_cfg = EnvConfig {
        game: g.game,
        n_players: g.players,
        learner_seat: config.learner_seat,
        opponents: config.opponents.clone(),
        seed: a.seed,
        max_decisions: a.max_decisions,
    };
    env_cfg.validate()?;
    let manifest = RunManifest::new(config, out)?;
    let dir = manifest.write()?.to_path_buf();

    let mut summaries = Vec::new();
    for &seed in &seeds {
        env_cfg.seed = seed;
        let seed_dir = dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&seed_dir)?;
        let mut cfg = TrainConfig::new(env_cfg.clone(), ppo.clone());
        cfg.execution = exec;
        cfg.checkpoint_every = a.checkpoint_every;
        cfg.checkpoint_dir = Some(seed_dir.join("checkpoints"));

        let mut metrics = create(&seed_dir.join("metrics.csv"))?;
        writeln!(metrics, "{METRICS_CSV_HEADER}")?;
        let updates = ppo.num_updates();
        let every = (updates / 20).max(1);
        let mut io_err = None;
        let report = train(&cfg, |row| {
            if let Err(e) = row.write_csv(&mut metrics) {
                io_err.get_or_insert(e);
            }
            if !a.quiet && (row.update % every == 0 || row.update == updates) {
                eprintln!(
                    "seed {seed} step {:>9} episodes {:>7} win {:.3} len {:.2} fps {:.0}",
                    row.step, row.episodes, row.win_rate, row.episode_length, row.fps
                );
            }
        })?;
        if let Some(e) = io_err {
            return Err(e).context("writing metrics.csv");
        }
        metrics.flush()?;
        let mut eps = create(&seed_dir.join("episodes.csv"))?;
        env::write_episode_csv(&mut eps, &report.episodes)?;
        eps.flush()?;
        let ckpt = seed_dir.join("final.ckpt");
        checkpoint::save(&ckpt, &report.net, &report.header)?;
        let s = SeedSummary {
            seed,
            steps: report.steps,
            episodes: report.episodes.len(),
            seconds: report.seconds,
            illegal_actions: report.illegal_actions,
            final_metrics: report.metrics.clone(),
            checkpoint: ckpt,
        };
        write_json(&seed_dir.join("summary.json"), &s)?;
        println!(
            "seed {seed}: win {:.3} ± {:.3}, length {:.2}, {:.0} steps/s",
            s.final_metrics.wins.mean, s.final_metrics.wins.se, s.final_metrics.lengths.mean, s.final_metrics.fps
        );
        summaries.push(s);
    }

    let across = |f: fn(&SeedSummary) -> f64| Stat::of(summaries.iter().map(f));
    let summary = json!({
        "format_version": 1,
        "game": g.game.name(),
        "n_players": g.players,
        "opponent": a.opponent.to_string(),
        "seeds": summaries,
        "win_rate": across(|s| s.final_metrics.wins.mean),
        "episode_length": across(|s| s.final_metrics.lengths.mean),
        "fps": across(|s| s.final_metrics.fps),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(g: &GameArgs, seconds: f64, max_steps: Option<u64>, seed: u64, json: bool) -> Result<ExitCode> {
    if !(seconds.is_finite() && seconds > 0.0) {
        bail!("--seconds must be positive");
    }
    let r = bench::random_playout(g.game, g.players, Duration::from_secs_f64(seconds), max_steps, seed)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!(
            "{} {}p: {} steps, {} episodes in {:.2} s = {:.0} steps/sec",
            r.game, r.n_players, r.steps, r.episodes, r.seconds, r.steps_per_sec
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn actions(g: &GameArgs, as_json: bool) -> Result<ExitCode> {
    let tree = ActionTree::build(g.game, g.players)?;
    if as_json {
        emit(&(serde_json::to_string_pretty(&tree)? + "\n"))?;
    } else {
        emit(&tree.atlas())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn observe(g: &GameArgs, seed: u64, step: u32, player: Option<usize>) -> Result<ExitCode> {
    let mut state = GameState::reset(g.game, g.players, seed)?;
    let mut rng = GameRng::seed_from_u64(seed);
    let mut taken = Vec::new();
    while taken.len() < step as usize && state.is_running() {
        let legal = state.legal_actions()?;
        let a = legal[rng.random_range(0..legal.len())];
        state.apply(a)?;
        taken.push(a);
    }
    let player = match player {
        Some(p) => p,
        None if state.is_running() => state.current_player()?,
        None => 0,
    };
    let tree = ActionTree::build(g.game, g.players)?;
    let legal: Vec<usize> = if state.is_running() {
        tree.compute_mask(&state)?.legal_actions()
    } else {
        Vec::new()
    };
    let doc = json!({
        "game": g.game.name(),
        "n_players": g.players,
        "seed": seed,
        "step": taken.len(),
        "actions": taken,
        "player": player,
        "running": state.is_running(),
        "shape": observation_shape(g.game, g.players),
        "vector": state.vectorize(player)?,
        "json": state.to_json(player)?,
        "legal_actions": legal,
    });
    emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn replay(path: &Path, quiet: bool) -> Result<ExitCode> {
    let file = if path.is_dir() {
        path.join("games.jsonl")
    } else {
        path.to_path_buf()
    };
    let f = File::open(&file).with_context(|| format!("opening {}", file.display()))?;
    let logs = read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", file.display()))?;
    if logs.is_empty() {
        bail!("{} contains no games", file.display());
    }
    let mut mismatches = 0;
    for (i, log) in logs.iter().enumerate() {
        let (ok, hash) = log.verify().with_context(|| format!("replaying game {i}"))?;
        if !ok {
            mismatches += 1;
            println!("game {i}: MISMATCH expected {} got {hash}", log.hash);
        } else if !quiet {
            println!("game {i}: ok {} actions {hash}", log.actions.len());
        }
    }
    println!("{} games, {} mismatches", logs.len(), mismatches);
    Ok(if mismatches == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
