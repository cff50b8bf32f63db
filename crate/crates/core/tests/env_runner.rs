mod common;

use std::sync::Arc;

use tabletop_core::env::{read_episode_csv, write_episode_csv, DEFAULT_WINDOW};
use tabletop_core::rl::checkpoint;
use tabletop_core::rl::{train, PpoConfig, TrainConfig};
use tabletop_core::{AgentKind, AgentSpec, Env, EnvConfig, EpisodeMetrics, Error, Execution, GameId, SeatPolicy};

use common::ALL_CONFIGS;

fn smoke(game: GameId, n: usize, steps: u64) -> tabletop_core::rl::TrainReport {
    let env = EnvConfig::new(game, n, AgentKind::Random, 1);
    let ppo = PpoConfig {
        num_steps: 128,
        num_envs: 8,
        total_steps: steps,
        ..PpoConfig::default()
    };
    train(&TrainConfig::new(env, ppo), |_| {}).unwrap()
}

#[test]
fn short_training_runs_stay_finite_and_legal() {
    for (game, n) in ALL_CONFIGS {
        let r = smoke(game, n, 2048);
        assert_eq!(r.steps, 2048, "{game}");
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.illegal_actions, 0, "{game}");
        assert!(r.rows.iter().all(|row| row.is_finite()), "{game}");
        assert!(r.net.params().iter().all(|p| p.is_finite()));
    }
}

#[test]
fn metrics_can_be_recomputed_from_the_episode_csv() {
    let r = smoke(GameId::TicTacToe, 2, 4096);
    let mut csv = Vec::new();
    write_episode_csv(&mut csv, &r.episodes).unwrap();
    let back = read_episode_csv(std::str::from_utf8(&csv).unwrap()).unwrap();
    assert_eq!(back, r.episodes);
    let m = EpisodeMetrics::from_episodes(&back, Some(DEFAULT_WINDOW), r.metrics.fps);
    assert_eq!(m, r.metrics);
    let last = r.rows.last().unwrap();
    assert_eq!(last.win_rate, m.wins.mean);
    assert_eq!(last.episode_length, m.lengths.mean);
    assert_eq!(last.episodes as usize, back.len());
}

#[test]
fn checkpoints_reproduce_the_policy() {
    let r = smoke(GameId::LoveLetter, 2, 1024);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    checkpoint::save(&path, &r.net, &r.header).unwrap();
    let (net, header) = checkpoint::load(&path).unwrap();
    assert_eq!(header, r.header);
    let (mut a, mut b) = (r.net.workspace(), net.workspace());
    common::for_random_states(GameId::LoveLetter, 2, 200, 3, |s| {
        let obs = s.vectorize(0).unwrap();
        r.net.forward(&obs, &mut a).unwrap();
        net.forward(&obs, &mut b).unwrap();
        assert_eq!(r.net.all_logits(&a), net.all_logits(&b));
        assert_eq!(a.value(), b.value());
    });

    let cfg = EnvConfig::new(GameId::LoveLetter, 2, AgentKind::Random, 5);
    let spec = AgentSpec::resolve(&AgentKind::Ppo(path.clone()), GameId::LoveLetter, 2).unwrap();
    let direct = AgentSpec::Policy(Arc::new(r.net.clone()));
    let x = tabletop_core::env::evaluate(&spec, &cfg, 50, None, Execution::Sequential).unwrap();
    let y = tabletop_core::env::evaluate(&direct, &cfg, 50, None, Execution::Sequential).unwrap();
    assert_eq!(x.episodes, y.episodes);
    assert!(AgentSpec::resolve(&AgentKind::Ppo(path), GameId::LoveLetter, 3).is_err());
}

#[test]
fn illegal_learner_actions_leave_the_env_unchanged() {
    for (game, n) in ALL_CONFIGS {
        let mut env = Env::new(EnvConfig::new(game, n, AgentKind::Random, 2)).unwrap();
        let first = env.reset().unwrap();
        let bad = (0..first.mask.len()).find(|&a| !first.mask.is_legal(a)).unwrap_or(first.mask.len());
        let before = env.state().canonical_hash();
        assert!(matches!(env.step(bad), Err(Error::IllegalAction { .. })));
        assert_eq!(env.state().canonical_hash(), before);
        assert_eq!(env.steps(), 0);
    }
}

#[test]
fn episodes_end_with_terminal_rewards_and_auto_reset() {
    for (game, n) in ALL_CONFIGS {
        let mut env = Env::new(EnvConfig::new(game, n, AgentKind::Random, 3)).unwrap();
        let mut cur = env.reset().unwrap();
        let mut finished = 0;
        let mut t = 0usize;
        while finished < 3 {
            let legal = cur.mask.legal_actions();
            let next = env.step_auto_reset(legal[t % legal.len()]).unwrap();
            t += 1;
            if next.done {
                let info = next.info.clone().unwrap();
                assert_eq!(next.reward, info.result.reward());
                assert_eq!(info.ret, next.reward);
                assert!(next.mask.count() > 0, "{game}: reset must hand back a live mask");
                finished += 1;
            } else {
                assert_eq!(next.reward, 0.0);
                assert!(next.info.is_none());
            }
            cur = next;
        }
    }
}

#[test]
fn rotating_seats_cycles_the_learner() {
    let mut cfg = EnvConfig::new(GameId::Diamant, 3, AgentKind::Random, 7);
    cfg.learner_seat = SeatPolicy::Rotate;
    let eval = tabletop_core::env::evaluate(&AgentSpec::Random, &cfg, 9, None, Execution::Sequential).unwrap();
    let seats: Vec<usize> = eval.episodes.iter().map(|e| e.seat).collect();
    assert_eq!(seats, vec![0, 1, 2, 0, 1, 2, 0, 1, 2]);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(Env::new(EnvConfig::new(GameId::TicTacToe, 3, AgentKind::Random, 0)).is_err());
    let mut cfg = EnvConfig::new(GameId::Diamant, 2, AgentKind::Random, 0);
    cfg.learner_seat = SeatPolicy::Fixed(2);
    assert!(Env::new(cfg).is_err());
    let mut cfg = EnvConfig::new(GameId::Diamant, 3, AgentKind::Random, 0);
    cfg.opponents.pop();
    assert!(Env::new(cfg).is_err());
    let bad = PpoConfig {
        clip_coef: 0.0,
        ..PpoConfig::default()
    };
    let env = EnvConfig::new(GameId::TicTacToe, 2, AgentKind::Random, 0);
    assert!(train(&TrainConfig::new(env, bad), |_| {}).is_err());
    assert!(AgentSpec::resolve(&AgentKind::Ppo("/nonexistent.ckpt".into()), GameId::TicTacToe, 2).is_err());
}
