//! Oracles and fixtures shared by the integration test targets.
#![allow(dead_code)]

use dnlrl::envs::{Environment, TwoStateMdp};
use dnlrl::optim::Adam;
use dnlrl::policy::{DnlPolicy, PolicyConfig, ProcessedState, SampleMode};
use dnlrl::predicates::{Feature, FeatureSchema, Transform, TransformKb, TransformSpec};
use dnlrl::rules::{crisp_evaluate, extract_policy, ExtractedRule};
use dnlrl::trainers::{A2cConfig, DqnConfig, SacConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent scalar logistic function.
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// A small policy with random shape, weights and bounds, plus random states.
pub fn random_policy(seed: u64) -> (DnlPolicy, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cont = rng.random_range(1..=3);
    let n_disc = rng.random_range(0..=2);
    let mut features = Vec::new();
    for i in 0..n_cont {
        let low = rng.random_range(-2.0..0.0);
        let high = low + rng.random_range(0.5..3.0);
        features.push(Feature::continuous(&format!("C{i}"), low, high, rng.random_range(1..=3)));
    }
    for i in 0..n_disc {
        features.push(Feature::discrete(&format!("D{i}")));
    }
    let schema = FeatureSchema::new(features).unwrap();
    let kb = if rng.random_bool(0.5) {
        let t = [Transform::Sine, Transform::Cosine, Transform::Square][rng.random_range(0..3)];
        TransformKb::new(vec![TransformSpec::new("C0", t)], &schema).unwrap()
    } else {
        TransformKb::empty()
    };
    let n_actions = rng.random_range(2..=3);
    let actions = (0..n_actions).map(|a| format!("a{a}")).collect();
    let cfg = PolicyConfig {
        n_terms: rng.random_range(1..=3),
        boundary_c: rng.random_range(2.0..8.0),
        ..Default::default()
    };
    let mut policy = DnlPolicy::new(schema.clone(), kb, actions, &cfg, seed).unwrap();
    // spread the weights so memberships and predicates are away from saturation
    let mut params = policy.params();
    let n_bounds = policy.bank().num_params();
    for (i, p) in params.iter_mut().enumerate() {
        if i < n_bounds {
            *p += rng.random_range(-0.3..0.3);
        } else {
            *p = rng.random_range(-0.6..0.6);
        }
    }
    policy.set_params(&params).unwrap();
    let states = (0..3)
        .map(|_| {
            schema
                .features()
                .iter()
                .map(|f| match f.kind {
                    dnlrl::predicates::FeatureKind::Continuous { low, high, .. } => rng.random_range(low..high),
                    dnlrl::predicates::FeatureKind::Discrete => f64::from(u8::from(rng.random_bool(0.5))),
                })
                .collect()
        })
        .collect();
    (policy, states)
}

pub fn weighted_sum(values: &[f64], coeffs: &[f64]) -> f64 {
    values.iter().zip(coeffs).map(|(v, c)| v * c).sum()
}

/// Largest `|analytic − central FD| / max(1, |analytic|)` over every policy
/// parameter, for the loss `Σ coeffs · truths` (or `· probs`).
pub fn policy_fd_error(policy: &DnlPolicy, states: &[Vec<f64>], coeffs: &[f64], through_probs: bool) -> (f64, usize) {
    let raw: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let processed = policy.process_batch(&raw).unwrap();
    let trace = policy.forward_trace(&processed).unwrap();
    let analytic = if through_probs {
        policy.backward_probs(&trace, coeffs)
    } else {
        policy.backward_truths(&trace, coeffs)
    };
    let loss = |p: &DnlPolicy| {
        let out = p.forward(&p.process_batch(&raw).unwrap()).unwrap();
        if through_probs {
            weighted_sum(out.all_probs(), coeffs)
        } else {
            weighted_sum(out.all_truths(), coeffs)
        }
    };
    let h = 1e-5;
    let base = policy.params();
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).unwrap();
        let up = loss(&probe);
        p[i] = base[i] - h;
        probe.set_params(&p).unwrap();
        let down = loss(&probe);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs() / analytic[i].abs().max(1.0));
    }
    (worst, base.len())
}

/// Exact value iteration on the two-state MDP; returns (Q, greedy action per state).
pub fn two_state_value_iteration(gamma: f64) -> ([[f64; 2]; 2], [usize; 2]) {
    let table = TwoStateMdp::TABLE;
    let mut v = [0.0f64; 2];
    let mut q = [[0.0f64; 2]; 2];
    for _ in 0..10_000 {
        for s in 0..2 {
            for a in 0..2 {
                let (r, next) = table[s][a];
                q[s][a] = r + gamma * v[next];
            }
        }
        let nv = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        if (nv[0] - v[0]).abs() < 1e-13 && (nv[1] - v[1]).abs() < 1e-13 {
            break;
        }
        v = nv;
    }
    let greedy = [usize::from(q[0][1] > q[0][0]), usize::from(q[1][1] > q[1][0])];
    (q, greedy)
}

/// Greedy action of a trained agent in each toy state.
pub fn toy_greedy(agent: &mut impl Trainer) -> [usize; 2] {
    [
        agent.act(&TwoStateMdp::observation(0), SampleMode::Greedy).unwrap(),
        agent.act(&TwoStateMdp::observation(1), SampleMode::Greedy).unwrap(),
    ]
}

/// Runs `episodes` learning episodes of `env` with `agent`.
pub fn train_on(env: &mut dyn Environment, agent: &mut impl Trainer, episodes: usize, seed: u64) -> Vec<f64> {
    let mut totals = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let mut state = env.reset(seed.wrapping_mul(7919).wrapping_add(e as u64));
        let mut total = 0.0;
        loop {
            let a = agent.act(&state, SampleMode::Stochastic).unwrap();
            let r = env.step(a).unwrap();
            total += r.reward;
            let over = r.episode_over();
            agent
                .observe(dnlrl::trainers::Transition {
                    state,
                    action: a,
                    reward: r.reward,
                    next_state: r.state.clone(),
                    done: r.done,
                    truncated: r.truncated,
                })
                .unwrap();
            agent.update().unwrap();
            state = r.state;
            if over {
                break;
            }
        }
        totals.push(total);
    }
    totals
}

/// Discount used on the toy MDP, where the myopic action is suboptimal.
pub const TOY_GAMMA: f64 = 0.9;

pub fn toy_sac_config() -> SacConfig {
    SacConfig {
        gamma: TOY_GAMMA,
        alpha: 0.05,
        batch_size: 32,
        warmup_steps: 200,
        buffer_capacity: 10_000,
        actor_lr: 1e-2,
        critic_lr: 3e-3,
        tau: 0.02,
        hidden: vec![32, 32],
        ..Default::default()
    }
}

pub fn toy_dqn_config() -> DqnConfig {
    DqnConfig {
        gamma: TOY_GAMMA,
        lr: 3e-3,
        batch_size: 32,
        warmup_steps: 200,
        epsilon_decay_steps: 2000,
        epsilon_end: 0.1,
        target_update_every: 100,
        hidden: vec![32, 32],
        ..Default::default()
    }
}

pub fn toy_a2c_config() -> A2cConfig {
    A2cConfig {
        gamma: TOY_GAMMA,
        n_steps: 10,
        actor_lr: 1e-2,
        critic_lr: 3e-3,
        hidden: vec![32, 32],
        ..Default::default()
    }
}

pub fn toy_policy(seed: u64) -> DnlPolicy {
    let env = TwoStateMdp::new(20);
    DnlPolicy::new(env.schema(), TransformKb::empty(), env.action_names(), &PolicyConfig::default(), seed).unwrap()
}

/// Outcome of fitting a one-predicate dNL network to a labelled 2-D concept.
pub struct ConceptFit {
    pub policy: DnlPolicy,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub rules: Vec<ExtractedRule>,
    /// Agreement of the extracted crisp rule with the concept on a uniform grid.
    pub grid_agreement: f64,
}

/// Fits `target() :- x > 0.5 ∧ y < 0.3` on `[0,1]²` with two bins per axis,
/// minimising binary cross-entropy on the network's truth value.
pub fn fit_concept(seed: u64, n_train: usize, steps: usize) -> ConceptFit {
    let concept = |x: f64, y: f64| x > 0.5 && y < 0.3;
    let schema = FeatureSchema::new(vec![
        Feature::continuous("X", 0.0, 1.0, 2),
        Feature::continuous("Y", 0.0, 1.0, 2),
    ])
    .unwrap();
    let cfg = PolicyConfig {
        n_terms: 2,
        ..Default::default()
    };
    let mut policy = DnlPolicy::new(schema, TransformKb::empty(), vec!["target".into()], &cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    let sample = |rng: &mut ChaCha8Rng, n: usize| -> Vec<(Vec<f64>, bool)> {
        (0..n)
            .map(|_| {
                let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
                (vec![x, y], concept(x, y))
            })
            .collect()
    };
    let train = sample(&mut rng, n_train);
    let test = sample(&mut rng, 5000);
    let raw: Vec<&[f64]> = train.iter().map(|(s, _)| s.as_slice()).collect();
    let processed: Vec<ProcessedState> = policy.process_batch(&raw).unwrap();
    let mut opt = Adam::new(policy.num_params(), 0.05);
    let n = train.len() as f64;
    for _ in 0..steps {
        let trace = policy.forward_trace(&processed).unwrap();
        let d: Vec<f64> = train
            .iter()
            .enumerate()
            .map(|(i, (_, label))| {
                let p = trace.output.truths(i)[0].clamp(1e-9, 1.0 - 1e-9);
                let y = f64::from(u8::from(*label));
                (p - y) / (p * (1.0 - p)) / n
            })
            .collect();
        let g = policy.backward_truths(&trace, &d);
        let mut params = policy.params();
        opt.step(&mut params, &g).unwrap();
        policy.set_params(&params).unwrap();
    }
    let accuracy = |data: &[(Vec<f64>, bool)]| {
        let raw: Vec<&[f64]> = data.iter().map(|(s, _)| s.as_slice()).collect();
        let out = policy.forward_raw(&raw).unwrap();
        let hits = data
            .iter()
            .enumerate()
            .filter(|(i, (_, label))| (out.truths(*i)[0] > 0.5) == *label)
            .count();
        hits as f64 / data.len() as f64
    };
    let train_accuracy = accuracy(&train);
    let test_accuracy = accuracy(&test);
    let rules = extract_policy(&policy, 0.5, 0.95).unwrap();
    let mut agree = 0;
    let grid = 100;
    for i in 0..grid {
        for j in 0..grid {
            let (x, y) = ((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
            let s = policy.process_state(&[x, y]).unwrap();
            let crisp = crisp_evaluate(&rules, 1, &s)[0] == 1.0;
            if crisp == concept(x, y) {
                agree += 1;
            }
        }
    }
    ConceptFit {
        policy,
        train_accuracy,
        test_accuracy,
        rules,
        grid_agreement: agree as f64 / (grid * grid) as f64,
    }
}
