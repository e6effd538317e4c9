mod common;

use common::{
    toy_a2c_config, toy_dqn_config, toy_greedy, toy_policy, toy_sac_config, train_on, two_state_value_iteration,
    TOY_GAMMA as GAMMA,
};
use dnlrl::envs::{Bandit, Environment, TwoStateMdp};
use dnlrl::policy::{DnlPolicy, PolicyConfig};
use dnlrl::predicates::TransformKb;
use dnlrl::trainers::dqn::QModelKind;
use dnlrl::trainers::{
    A2cConfig, A2cTrainer, DqnConfig, DqnTrainer, ReinforceConfig, ReinforceTrainer, ReplayBuffer, SacConfig,
    SacTrainer, Trainer, Transition, UpdateOutcome,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn value_iteration_oracle_matches_closed_form() {
    let (q, greedy) = two_state_value_iteration(GAMMA);
    // V*(1) = 1/(1-γ) = 10, V*(0) = γ·10 = 9
    assert!((q[1][1] - 10.0).abs() < 1e-9);
    assert!((q[0][0] - 9.0).abs() < 1e-9);
    assert!((q[0][1] - 8.4).abs() < 1e-9);
    assert!((q[1][0] - 8.1).abs() < 1e-9);
    assert_eq!(greedy, [0, 1]);
    // a short horizon makes the myopic action optimal
    assert_eq!(two_state_value_iteration(0.2).1, [1, 1]);
}

#[test]
fn sac_recovers_the_optimal_toy_policy() {
    let (_, optimal) = two_state_value_iteration(GAMMA);
    for seed in 0..3 {
        let mut agent = SacTrainer::new(toy_policy(seed), toy_sac_config(), seed).unwrap();
        train_on(&mut TwoStateMdp::new(20), &mut agent, 150, seed);
        assert_eq!(toy_greedy(&mut agent), optimal, "seed {seed}");
    }
}

#[test]
fn dqn_recovers_optimal_policy_and_values() {
    let (q_star, optimal) = two_state_value_iteration(GAMMA);
    let cfg = toy_dqn_config();
    for seed in 0..3 {
        let mut agent = DqnTrainer::new(toy_policy(seed), cfg.clone(), seed).unwrap();
        train_on(&mut TwoStateMdp::new(20), &mut agent, 400, seed);
        assert_eq!(toy_greedy(&mut agent), optimal, "seed {seed}");
        let obs: Vec<Vec<f64>> = (0..2).map(TwoStateMdp::observation).collect();
        let raw: Vec<&[f64]> = obs.iter().map(|o| o.as_slice()).collect();
        let q = agent.model().q_values(&raw).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                assert!(
                    (q[s * 2 + a] - q_star[s][a]).abs() < 0.05,
                    "seed {seed} Q({s},{a}) = {} vs {}",
                    q[s * 2 + a],
                    q_star[s][a]
                );
            }
        }
    }
}

#[test]
fn dqn_with_a_logic_value_head_learns_the_toy_policy() {
    let (_, optimal) = two_state_value_iteration(GAMMA);
    let cfg = DqnConfig {
        model: QModelKind::Dnl,
        q_scale: 12.0,
        gamma: GAMMA,
        lr: 1e-2,
        batch_size: 32,
        warmup_steps: 200,
        epsilon_decay_steps: 2000,
        target_update_every: 100,
        ..Default::default()
    };
    let mut agent = DqnTrainer::new(toy_policy(0), cfg, 0).unwrap();
    train_on(&mut TwoStateMdp::new(20), &mut agent, 400, 0);
    assert_eq!(toy_greedy(&mut agent), optimal);
    assert!(agent.policy().is_some());
}

#[test]
fn a2c_recovers_the_optimal_toy_policy() {
    let (_, optimal) = two_state_value_iteration(GAMMA);
    let cfg = toy_a2c_config();
    for seed in 0..3 {
        let mut agent = A2cTrainer::new(toy_policy(seed), cfg.clone(), seed).unwrap();
        train_on(&mut TwoStateMdp::new(20), &mut agent, 300, seed);
        assert_eq!(toy_greedy(&mut agent), optimal, "seed {seed}");
    }
}

fn bandit_policy(seed: u64) -> DnlPolicy {
    let env = Bandit::new([0.0, 1.0]);
    DnlPolicy::new(env.schema(), TransformKb::empty(), env.action_names(), &PolicyConfig::default(), seed).unwrap()
}

#[test]
fn reinforce_converges_on_a_bandit() {
    let cfg = ReinforceConfig {
        gamma: 1.0,
        lr: 5e-2,
        ..Default::default()
    };
    let mut agent = ReinforceTrainer::new(bandit_policy(0), cfg, 0).unwrap();
    train_on(&mut Bandit::new([0.0, 1.0]), &mut agent, 400, 0);
    let p = agent.policy().unwrap().action_probs(&[0.0]).unwrap();
    assert!(p[1] > 0.9, "probabilities {p:?}");
}

#[test]
fn zero_reward_episodes_leave_reinforce_unchanged() {
    let policy = bandit_policy(1);
    let before = policy.params();
    let mut agent = ReinforceTrainer::new(policy, ReinforceConfig::default(), 1).unwrap();
    train_on(&mut Bandit::new([0.0, 0.0]), &mut agent, 20, 1);
    assert_eq!(agent.policy().unwrap().params(), before);
}

#[test]
fn reinforce_waits_for_the_episode_end() {
    let mut agent = ReinforceTrainer::new(bandit_policy(2), ReinforceConfig::default(), 2).unwrap();
    let t = |done| Transition {
        state: vec![0.0],
        action: 1,
        reward: 1.0,
        next_state: vec![0.0],
        done,
        truncated: false,
    };
    agent.observe(t(false)).unwrap();
    assert!(matches!(agent.update().unwrap(), UpdateOutcome::Skipped(_)));
    agent.observe(t(true)).unwrap();
    assert!(matches!(agent.update().unwrap(), UpdateOutcome::Updated(_)));
}

#[test]
fn replay_sampling_is_uniform() {
    let n_items = 10;
    let mut buf = ReplayBuffer::new(n_items);
    for i in 0..25 {
        buf.push(Transition {
            state: vec![i as f64],
            action: 0,
            reward: i as f64,
            next_state: vec![0.0],
            done: false,
            truncated: false,
        })
        .unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let mut counts = vec![0usize; n_items];
    for t in buf.sample(draws, &mut rng) {
        counts[t.reward as usize - 15] += 1;
    }
    let e = draws as f64 / n_items as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 9 degrees of freedom, p = 0.001
    assert!(chi2 < 27.88, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn sac_critic_error_falls_on_a_fixed_buffer() {
    let mut agent = SacTrainer::new(toy_policy(0), toy_sac_config(), 0).unwrap();
    let mut env = TwoStateMdp::new(20);
    let mut state = env.reset(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..500 {
        let a = rand::Rng::random_range(&mut rng, 0..2);
        let r = env.step(a).unwrap();
        agent
            .observe(Transition {
                state,
                action: a,
                reward: r.reward,
                next_state: r.state.clone(),
                done: r.done,
                truncated: r.truncated,
            })
            .unwrap();
        state = if r.episode_over() { env.reset(1) } else { r.state };
    }
    let mut losses = Vec::new();
    for _ in 0..600 {
        losses.push(agent.sac_update().unwrap().metrics().unwrap().critic_loss.unwrap());
    }
    let early: f64 = losses[..50].iter().sum::<f64>() / 50.0;
    let late: f64 = losses[550..].iter().sum::<f64>() / 50.0;
    assert!(late < 0.2 * early, "critic loss {early} -> {late}");
}

#[test]
fn unit_tau_copies_the_critics() {
    let mut agent = SacTrainer::new(toy_policy(0), toy_sac_config(), 0).unwrap();
    // give the online critics something to learn so they diverge from the targets
    let mut env = TwoStateMdp::new(5);
    let mut state = env.reset(3);
    for i in 0..64 {
        let r = env.step(i % 2).unwrap();
        agent
            .observe(Transition {
                state,
                action: i % 2,
                reward: r.reward,
                next_state: r.state.clone(),
                done: false,
                truncated: r.truncated,
            })
            .unwrap();
        state = r.state;
    }
    agent.sac_update().unwrap();
    agent.soft_update_targets(0.5);
    assert_ne!(agent.critics()[0], agent.targets()[0]);
    agent.soft_update_targets(1.0);
    assert_eq!(agent.critics(), agent.targets());
}

#[test]
fn invalid_trainer_configs_are_rejected() {
    let bad_sac = SacConfig {
        gamma: 1.5,
        tau: 0.0,
        ..Default::default()
    };
    assert!(SacTrainer::new(toy_policy(0), bad_sac, 0).is_err());
    let bad_dqn = DqnConfig {
        batch_size: 0,
        ..Default::default()
    };
    assert!(DqnTrainer::new(toy_policy(0), bad_dqn, 0).is_err());
    let bad_a2c = A2cConfig {
        n_steps: 0,
        ..Default::default()
    };
    assert!(A2cTrainer::new(toy_policy(0), bad_a2c, 0).is_err());
    let bad_reinforce = ReinforceConfig {
        lr: -1.0,
        ..Default::default()
    };
    assert!(ReinforceTrainer::new(toy_policy(0), bad_reinforce, 0).is_err());
}
