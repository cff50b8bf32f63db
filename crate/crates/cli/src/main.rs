//! `tabletop`: matches, training, evaluation, throughput and schema dumps.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tabletop_core::{AgentKind, GameId};

#[derive(Parser, Debug)]
#[command(name = "tabletop", version, about = "Tabletop game engines and a masked PPO trainer")]
pub struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "TABLETOP_OUT", default_value = "runs")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// tictactoe, diamant, explodingkittens, loveletter or stratego.
    #[arg(long)]
    pub game: GameId,

    /// Number of players, including the learner.
    #[arg(long, default_value_t = 2)]
    pub players: usize,
}

#[derive(Args, Debug, Clone)]
pub struct MatchArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Agent in the evaluated seat: random, osla or ppo:<checkpoint>.
    #[arg(long, default_value = "random")]
    pub agent: AgentKind,

    /// Agent in every other seat.
    #[arg(long, default_value = "random")]
    pub opponent: AgentKind,

    /// Episodes to play [default: 100 for play, 1000 for eval].
    #[arg(long)]
    pub episodes: Option<usize>,

    /// Base seed; episode seeds derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Move the evaluated agent through all seats, one episode each.
    #[arg(long)]
    pub rotate_seats: bool,

    /// Override the game's decision cap.
    #[arg(long)]
    pub max_decisions: Option<u32>,

    /// Run on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Agent in every other seat: random, osla or ppo:<checkpoint>.
    #[arg(long, default_value = "random")]
    pub opponent: AgentKind,

    /// Learner steps per seed.
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,

    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of consecutive seeds to train.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,

    /// Move the learner to the next seat every episode.
    #[arg(long)]
    pub rotate_seats: bool,

    /// Override the game's decision cap.
    #[arg(long)]
    pub max_decisions: Option<u32>,

    /// Run on the calling thread only.
    #[arg(long)]
    pub sequential: bool,

    /// Save a checkpoint every this many updates.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,

    /// Adam learning rate [default: 2.5e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Keep the learning rate constant instead of decaying it to zero.
    #[arg(long)]
    pub no_anneal: bool,
    /// Discount factor [default: 0.99].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// GAE lambda [default: 0.95].
    #[arg(long)]
    pub gae_lambda: Option<f64>,
    /// Surrogate and value clipping range [default: 0.2].
    #[arg(long)]
    pub clip: Option<f64>,
    /// Passes over each rollout [default: 4].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatches per pass [default: 4].
    #[arg(long)]
    pub minibatches: Option<usize>,
    /// Entropy bonus weight [default: 0.01].
    #[arg(long)]
    pub ent_coef: Option<f64>,
    /// Value loss weight [default: 0.5].
    #[arg(long)]
    pub vf_coef: Option<f64>,
    /// Global gradient norm clip [default: 0.5].
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    /// Rollout length per environment [default: 128].
    #[arg(long)]
    pub num_steps: Option<usize>,
    /// Parallel environments [default: 8].
    #[arg(long)]
    pub num_envs: Option<usize>,

    /// Suppress progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Agent-vs-agent matches with per-episode CSV and replayable game logs.
    Play(MatchArgs),
    /// PPO training runs: metrics CSV, checkpoints and summary per seed.
    Train(TrainArgs),
    /// Win, tie and loss rates of a matchup as summary JSON.
    Eval(MatchArgs),
    /// Random-playout throughput in learner steps per second.
    Bench {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Action atlas: leaf index to action label.
    Actions {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        json: bool,
    },
    /// Both observation forms after `step` random decisions.
    Observe {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        step: u32,
        /// Observing seat (default: the player to move).
        #[arg(long)]
        player: Option<usize>,
    },
    /// Re-executes logged games and checks their final state hashes.
    Replay {
        /// A games.jsonl file or a run directory containing one.
        log: PathBuf,
        #[arg(long, short)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
