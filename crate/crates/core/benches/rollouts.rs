use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use tabletop_core::env::evaluate;
use tabletop_core::rl::net::{NetSpec, PolicyNet};
use tabletop_core::rl::ppo::{minibatch_grad, LossCoefs, Sample};
use tabletop_core::rl::PpoConfig;
use tabletop_core::{AgentKind, AgentSpec, EnvConfig, Execution, GameId, GameRng, GameState, VecEnv};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn vec_env_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("vec_env_step");
    for game in [GameId::Diamant, GameId::LoveLetter, GameId::Stratego] {
        for (name, exec) in MODES {
            let cfg = EnvConfig::new(game, 2, AgentKind::Random, 1);
            let mut venv = VecEnv::new(&cfg, 8, exec).unwrap();
            let mut masks: Vec<_> = venv.reset().into_iter().map(|r| r.unwrap().mask).collect();
            let mut rng = GameRng::seed_from_u64(2);
            group.bench_function(BenchmarkId::new(name, game), |b| {
                b.iter(|| {
                    let actions: Vec<usize> = masks
                        .iter()
                        .map(|m| {
                            let l = m.legal_actions();
                            l[rng.random_range(0..l.len())]
                        })
                        .collect();
                    let out = venv.step(&actions).unwrap();
                    masks = out.into_iter().map(|r| r.unwrap().mask).collect();
                })
            });
        }
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_osla_64_games");
    for game in [GameId::TicTacToe, GameId::LoveLetter] {
        let cfg = EnvConfig::new(game, 2, AgentKind::Random, 3);
        for (name, exec) in MODES {
            group.bench_function(BenchmarkId::new(name, game), |b| {
                b.iter(|| black_box(evaluate(&AgentSpec::Osla, &cfg, 64, None, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("minibatch_grad_256");
    for game in [GameId::LoveLetter, GameId::Stratego] {
        let spec = NetSpec::for_game(game, 2).unwrap();
        let net = PolicyNet::<f32>::new(spec, 5).unwrap();
        let mut rng = GameRng::seed_from_u64(6);
        let mut data = Vec::new();
        while data.len() < 256 {
            let mut s = GameState::reset(game, 2, rng.random()).unwrap();
            for _ in 0..rng.random_range(0..30) {
                if !s.is_running() {
                    break;
                }
                let l = s.legal_actions().unwrap();
                s.apply(l[rng.random_range(0..l.len())]).unwrap();
            }
            if s.is_running() {
                let legal = s.legal_actions().unwrap();
                let action = legal[rng.random_range(0..legal.len())];
                let obs = s.vectorize(s.current_player().unwrap()).unwrap();
                data.push((obs, legal, action, rng.random::<f32>() - 0.5));
            }
        }
        let samples: Vec<Sample<'_, f32>> = data
            .iter()
            .map(|(obs, legal, action, adv)| Sample {
                obs,
                legal,
                action: *action,
                old_log_prob: -(legal.len() as f32).ln(),
                old_value: 0.0,
                advantage: *adv,
                ret: *adv,
            })
            .collect();
        let coefs = LossCoefs::from_config(&PpoConfig::default());
        for (name, exec) in MODES {
            group.bench_function(BenchmarkId::new(name, game), |b| {
                b.iter(|| black_box(minibatch_grad(&net, &samples, &coefs, exec).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default()
        .sample_size(10)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2));
    targets = vec_env_step, evaluation, gradients
}
criterion_main!(benches);
