//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use tabletop_core::action_space::{mask_logits, softmax};
use tabletop_core::bench::random_playout;
use tabletop_core::env::{evaluate, play_recorded};
use tabletop_core::rl::compute_gae;
use tabletop_core::rl::net::{ConvSpec, NetSpec};
use tabletop_core::rl::{train, PpoConfig, TrainConfig, TrainReport};
use tabletop_core::{
    ActionMask, ActionTree, AgentKind, AgentSpec, EnvConfig, Error, Execution, GameId, GameRng, GameState,
    PlayerResult, SeatPolicy, VecEnv,
};

use common::numeric::{gae_oracle, gradient_error};
use common::tictactoe::{reachable, Board};
use common::{for_random_states, ALL_CONFIGS};

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.failures += usize::from(!pass);
    }
}

fn mask_soundness(r: &mut Report) {
    let started = Instant::now();
    let mut problems = Vec::new();
    let mut total = 0;
    for (k, (game, n)) in ALL_CONFIGS.into_iter().enumerate() {
        let tree = ActionTree::build(game, n).unwrap();
        let leaves = tree.leaf_count();
        let mut states = 0;
        for_random_states(game, n, 10_000, 1_000 + k as u64, |s| {
            states += 1;
            if !s.is_running() {
                return;
            }
            let mask = tree.compute_mask(s).unwrap();
            if mask.legal_actions() != s.legal_actions().unwrap() {
                problems.push(format!("{game}: mask differs from legal set"));
            }
            let mut t = s.copy_state();
            for a in (0..leaves).filter(|&a| !mask.is_legal(a)) {
                if !matches!(t.apply(a), Err(Error::IllegalAction { .. })) {
                    problems.push(format!("{game}: masked-out leaf {a} accepted"));
                }
            }
        });
        total += states;
    }
    let secs = started.elapsed().as_secs_f64();
    r.check(
        "mask soundness",
        problems.is_empty() && secs < 120.0,
        format!("{total} states over 5 games, {} violations, {secs:.1} s", problems.len()),
    );
}

fn oracle_equivalence(r: &mut Report) {
    let all = reachable();
    let mut wrong = 0;
    for (board, path) in &all {
        let mut s = GameState::reset(GameId::TicTacToe, 2, 0).unwrap();
        for &m in path {
            s.apply(m).unwrap();
        }
        let terminal_ok = !s.is_running() == board.terminal();
        let winner_ok = match board.winner() {
            Some(w) => s.status().result(usize::from(w == b'O')) == Some(PlayerResult::Win),
            None if board.terminal() => s.status().result(0) == Some(PlayerResult::Tie),
            None => s.legal_actions().unwrap() == board.moves(),
        };
        wrong += usize::from(!(terminal_ok && winner_ok));
    }
    let value = Board([b'.'; 9]).value(&mut HashMap::new());
    r.check(
        "tic tac toe oracle equivalence",
        wrong == 0 && all.len() == 5478,
        format!("{} reachable positions, {wrong} disagreements, root minimax value {value}", all.len()),
    );
}

fn run(game: GameId, opponent: AgentKind, seed: u64, steps: u64) -> TrainReport {
    let env = EnvConfig::new(game, 2, opponent, seed);
    let ppo = PpoConfig {
        total_steps: steps,
        ..PpoConfig::default()
    };
    train(&TrainConfig::new(env, ppo), |_| {}).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn table(r: &mut Report) -> Vec<TrainReport> {
    let mut first_updates = Vec::new();
    let mut lengths = HashMap::new();
    for (game, threshold) in [(GameId::TicTacToe, 0.85), (GameId::Diamant, 0.70), (GameId::LoveLetter, 0.80)] {
        let runs: Vec<TrainReport> = [1, 2].map(|s| run(game, AgentKind::Random, s, 1_000_000)).into();
        let wins: Vec<f64> = runs.iter().map(|x| x.metrics.wins.mean).collect();
        let lens: Vec<f64> = runs.iter().map(|x| x.metrics.lengths.mean).collect();
        let illegal: u64 = runs.iter().map(|x| x.illegal_actions).sum();
        let secs: f64 = runs.iter().map(|x| x.seconds).sum();
        r.check(
            &format!("{game} 2p vs random, 1M steps, 2 seeds"),
            mean(&wins) >= threshold && illegal == 0,
            format!(
                "final-100 win rates {wins:?} (mean {:.3}, need >= {threshold}), {illegal} illegal actions, {secs:.0} s",
                mean(&wins)
            ),
        );
        lengths.insert(game, mean(&lens));
        first_updates.extend(runs);
    }

    let ttt = lengths[&GameId::TicTacToe];
    let dia = lengths[&GameId::Diamant];
    r.check(
        "episode length tic tac toe",
        (3.0..=4.5).contains(&ttt),
        format!("mean {ttt:.2} learner steps, need [3.0, 4.5]"),
    );
    r.check(
        "episode length diamant 2p",
        (15.0..=22.0).contains(&dia),
        format!("mean {dia:.2} learner steps, need [15, 22]"),
    );

    let ttt_run = &first_updates[0];
    let cfg = EnvConfig::new(GameId::TicTacToe, 2, AgentKind::Random, 77);
    let policy = AgentSpec::Policy(std::sync::Arc::new(ttt_run.net.clone()));
    let eval = evaluate(&policy, &cfg, 2000, None, Execution::Parallel).unwrap();
    let tail = tabletop_core::EpisodeMetrics::from_episodes(&ttt_run.episodes, Some(2000), 0.0);
    let gap = (eval.metrics.wins.mean - tail.wins.mean).abs();
    r.check(
        "checkpoint reproduces training win rate",
        gap <= 0.05,
        format!(
            "eval {:.3} vs last 2000 training episodes {:.3}",
            eval.metrics.wins.mean, tail.wins.mean
        ),
    );
    learning_signal(r, ttt_run);
    first_updates
}

fn learning_signal(r: &mut Report, ttt_run: &TrainReport) {
    let policy = AgentSpec::Policy(std::sync::Arc::new(ttt_run.net.clone()));
    for (label, seats) in [("seat 0", SeatPolicy::Fixed(0)), ("rotated seats", SeatPolicy::Rotate)] {
        let mut cfg = EnvConfig::new(GameId::TicTacToe, 2, AgentKind::Random, 91);
        cfg.learner_seat = seats;
        let p = evaluate(&policy, &cfg, 2000, None, Execution::Parallel).unwrap().metrics.wins;
        let b = evaluate(&AgentSpec::Random, &cfg, 20_000, None, Execution::Parallel)
            .unwrap()
            .metrics
            .wins;
        let z = (p.mean - b.mean) / (p.se * p.se + b.se * b.se).sqrt();
        r.check(
            &format!("tic tac toe learning signal, {label}"),
            z > 2.326,
            format!(
                "ppo {:.3} ± {:.3} over 2000 games vs random-vs-random {:.3} ± {:.3} over 20000, z = {z:.1}, need > 2.326",
                p.mean, p.se, b.mean, b.se
            ),
        );
    }
}

fn versus_osla(r: &mut Report) -> TrainReport {
    let cfg = EnvConfig::new(GameId::TicTacToe, 2, AgentKind::Osla, 500);
    let baseline = evaluate(&AgentSpec::Random, &cfg, 2000, None, Execution::Parallel).unwrap();
    let report = run(GameId::TicTacToe, AgentKind::Osla, 1, 1_000_000);
    let policy = AgentSpec::Policy(std::sync::Arc::new(report.net.clone()));
    let trained = evaluate(&policy, &cfg, 2000, None, Execution::Parallel).unwrap();
    let (p, b) = (trained.metrics.wins, baseline.metrics.wins);
    r.check(
        "tic tac toe vs osla beats random baseline",
        p.mean > b.mean,
        format!(
            "ppo {:.3} ± {:.3} (ties {:.3}) vs random {:.3} ± {:.3} over 2000 games",
            p.mean, p.se, trained.metrics.ties.mean, b.mean, b.se
        ),
    );
    report
}

fn smoke_runs(r: &mut Report) -> Vec<TrainReport> {
    let mut out = Vec::new();
    for game in [GameId::ExplodingKittens, GameId::Stratego] {
        let report = run(game, AgentKind::Random, 1, 100_000);
        let finite = report.rows.iter().all(|row| row.is_finite());
        r.check(
            &format!("{game} 100k-step smoke run"),
            finite && report.illegal_actions == 0 && report.steps >= 100_000,
            format!(
                "{} steps, {} episodes, finite metrics {finite}, {} illegal actions, win {:.2} tie {:.2}, {:.0} s",
                report.steps,
                report.episodes.len(),
                report.illegal_actions,
                report.metrics.wins.mean,
                report.metrics.ties.mean,
                report.seconds
            ),
        );
        out.push(report);
    }
    out
}

fn throughput(r: &mut Report) {
    for (game, floor) in [(GameId::Diamant, 2000.0), (GameId::LoveLetter, 1500.0)] {
        let b = random_playout(game, 2, Duration::from_secs(3), None, 1).unwrap();
        r.check(
            &format!("{game} throughput"),
            b.steps_per_sec >= floor,
            format!("{:.0} learner steps/s single-threaded, need >= {floor}", b.steps_per_sec),
        );
    }
}

fn numerics(r: &mut Report, runs: &[TrainReport]) {
    let mut rng = GameRng::seed_from_u64(2024);
    let mut gae_err = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..5);
        let len = n * rng.random_range(1..40);
        let gamma: f64 = rng.random();
        let lambda: f64 = rng.random();
        let rewards: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let values: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let dones: Vec<bool> = (0..len).map(|_| rng.random_bool(0.15)).collect();
        let next: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let (adv, _) = compute_gae(&rewards, &values, &dones, &next, n, gamma, lambda);
        let oracle = gae_oracle(&rewards, &values, &dones, &next, n, gamma, lambda);
        for (a, o) in adv.iter().zip(&oracle) {
            gae_err = gae_err.max((a - o).abs());
        }
    }
    r.check("gae oracle", gae_err <= 1e-10, format!("max abs error {gae_err:.2e} over 500 buffers"));

    let mlp = NetSpec {
        obs_len: 7,
        conv: None,
        hidden: 6,
        n_actions: 5,
    };
    let conv = NetSpec {
        obs_len: 24,
        conv: Some(ConvSpec {
            in_channels: 2,
            height: 3,
            width: 4,
            out_channels: 3,
        }),
        hidden: 5,
        n_actions: 6,
    };
    let fd = (0..3)
        .flat_map(|s| [gradient_error(mlp.clone(), s, true), gradient_error(conv.clone(), s, true)])
        .fold(0.0f64, f64::max);
    r.check("finite-difference gradients", fd < 1e-4, format!("max relative error {fd:.2e}"));

    let (mut masked_max, mut sum_err) = (0.0f64, 0.0f64);
    for _ in 0..2000 {
        let len = rng.random_range(1..80);
        let logits: Vec<f64> = (0..len).map(|_| 30.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut bits: Vec<bool> = (0..len).map(|_| rng.random_bool(0.4)).collect();
        bits[rng.random_range(0..len)] = true;
        let mask = ActionMask::from_bits(bits);
        let p = softmax(&mask_logits(&logits, &mask).unwrap());
        let legal: f64 = (0..len).filter(|&a| mask.is_legal(a)).map(|a| p[a]).sum();
        sum_err = sum_err.max((legal - 1.0).abs());
        for a in (0..len).filter(|&a| !mask.is_legal(a)) {
            masked_max = masked_max.max(p[a]);
        }
    }
    r.check(
        "masked softmax",
        masked_max < 1e-12 && sum_err <= 1e-9,
        format!("max masked probability {masked_max:.1e}, max |sum - 1| {sum_err:.1e}"),
    );

    let dev = runs.iter().map(|x| x.first_update.first_ratio_dev).fold(0.0f64, f64::max);
    r.check(
        "first-epoch importance ratio",
        dev == 0.0,
        format!("max |ratio - 1| {dev:e} over {} runs", runs.len()),
    );
}

fn determinism(r: &mut Report) {
    let mut games = 0;
    let mut mismatches = 0;
    for (game, n) in ALL_CONFIGS {
        let cfg = EnvConfig::new(game, n, AgentKind::Osla, 13);
        let count = if game == GameId::Stratego { 10 } else { 100 };
        for (_, log) in play_recorded(&AgentSpec::Random, &cfg, count, Execution::Parallel).unwrap() {
            games += 1;
            mismatches += usize::from(!log.verify().unwrap().0);
        }
    }
    r.check(
        "replay determinism",
        mismatches == 0,
        format!("{games} recorded games, {mismatches} terminal hash mismatches"),
    );

    let mut diverged = Vec::new();
    for (game, n) in ALL_CONFIGS {
        let cfg = EnvConfig::new(game, n, AgentKind::Random, 404);
        let mut one = VecEnv::new(&cfg, 1, Execution::Sequential).unwrap();
        let mut eight = VecEnv::new(&cfg, 8, Execution::Parallel).unwrap();
        let a0 = one.reset().pop().unwrap().unwrap();
        let b: Vec<_> = eight.reset().into_iter().map(Result::unwrap).collect();
        let mut same = a0 == b[0];
        let mut masks: Vec<_> = b.into_iter().map(|x| x.mask).collect();
        for t in 0..2000 {
            let actions: Vec<usize> = masks
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let l = m.legal_actions();
                    l[(t * 13 + i * 5) % l.len()]
                })
                .collect();
            let a = one.step(&actions[..1]).unwrap().pop().unwrap().unwrap();
            let b: Vec<_> = eight.step(&actions).unwrap().into_iter().map(Result::unwrap).collect();
            same &= a == b[0];
            masks = b.into_iter().map(|x| x.mask).collect();
        }
        if !same {
            diverged.push(game);
        }
    }
    r.check(
        "vectorization invariance",
        diverged.is_empty(),
        format!("slot 0 of N=8 vs N=1 over 2000 steps per game, diverged: {diverged:?}"),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    mask_soundness(&mut r);
    oracle_equivalence(&mut r);
    let mut runs = table(&mut r);
    runs.push(versus_osla(&mut r));
    runs.extend(smoke_runs(&mut r));
    throughput(&mut r);
    numerics(&mut r, &runs);
    determinism(&mut r);
    if r.failures > 0 {
        println!("{} acceptance criteria failed", r.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
