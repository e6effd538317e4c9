//! Planar lunar lander with simplified rigid-body dynamics.
//!
//! Units are normalised so the landing pad sits at the origin, the lander
//! starts near height 1.4 and the playfield spans `|x| < 1`. The observation
//! is `(x, y, v_x, v_y, θ, ω, left_contact, right_contact)`.
//!
//! Actions: 0 do nothing, 1 fire left thruster (pushes toward +x and spins
//! counter-clockwise), 2 fire main engine (thrust along the body axis),
//! 3 fire right thruster (mirror of 1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Environment, StepResult};
use crate::error::Result;
use crate::predicates::{Feature, FeatureSchema};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderParams {
    pub dt: f64,
    pub gravity: f64,
    /// Acceleration produced by the main engine along the body axis.
    pub main_accel: f64,
    /// Lateral acceleration produced by a side thruster.
    pub side_accel: f64,
    /// Angular acceleration produced by a side thruster.
    pub side_angular_accel: f64,
    /// Horizontal distance from body centre to each leg tip.
    pub leg_span: f64,
    /// Vertical drop from body centre to the leg tips when upright.
    pub leg_drop: f64,
    /// Touchdown faster than this (downwards) is a crash.
    pub crash_speed: f64,
    /// Touchdown tilted beyond this is a crash.
    pub crash_angle: f64,
    /// Below this speed on both legs the lander is at rest.
    pub rest_speed: f64,
    /// Fraction of horizontal speed kept per grounded step.
    pub ground_friction: f64,
    pub main_fuel_cost: f64,
    pub side_fuel_cost: f64,
    pub start_height: f64,
    pub max_steps: usize,
}

impl Default for LanderParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            gravity: 0.5,
            main_accel: 1.2,
            side_accel: 0.25,
            side_angular_accel: 1.5,
            leg_span: 0.08,
            leg_drop: 0.05,
            crash_speed: 0.5,
            crash_angle: 0.6,
            rest_speed: 0.05,
            ground_friction: 0.8,
            main_fuel_cost: 0.3,
            side_fuel_cost: 0.03,
            start_height: 1.4,
            max_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LanderState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub angle: f64,
    pub angular_vel: f64,
    pub left_contact: bool,
    pub right_contact: bool,
}

impl LanderState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.x,
            self.y,
            self.vx,
            self.vy,
            self.angle,
            self.angular_vel,
            f64::from(u8::from(self.left_contact)),
            f64::from(u8::from(self.right_contact)),
        ]
    }

    /// Reflection through the vertical axis: left and right swap.
    pub fn mirrored(self) -> Self {
        Self {
            x: -self.x,
            vx: -self.vx,
            angle: -self.angle,
            angular_vel: -self.angular_vel,
            left_contact: self.right_contact,
            right_contact: self.left_contact,
            ..self
        }
    }
}

// sin evaluated on |θ| so that sin(−θ) == −sin(θ) bit for bit
#[inline]
fn odd_sin(v: f64) -> f64 {
    if v < 0.0 {
        -(-v).sin()
    } else {
        v.sin()
    }
}

#[inline]
fn even_cos(v: f64) -> f64 {
    v.abs().cos()
}

#[derive(Debug, Clone)]
pub struct LunarLander {
    params: LanderParams,
    state: LanderState,
    prev_shaping: f64,
    steps: usize,
    finished: bool,
}

impl LunarLander {
    pub fn new(params: LanderParams) -> Self {
        let mut env = Self {
            params,
            state: LanderState::default(),
            prev_shaping: 0.0,
            steps: 0,
            finished: false,
        };
        env.set_state(LanderState {
            y: params.start_height,
            ..Default::default()
        });
        env
    }

    pub fn params(&self) -> &LanderParams {
        &self.params
    }

    pub fn state(&self) -> LanderState {
        self.state
    }

    pub fn set_state(&mut self, state: LanderState) {
        self.state = state;
        self.prev_shaping = Self::shaping(&state);
        self.steps = 0;
        self.finished = false;
    }

    fn shaping(s: &LanderState) -> f64 {
        -100.0 * (s.x * s.x + s.y * s.y).sqrt() - 100.0 * (s.vx * s.vx + s.vy * s.vy).sqrt() - 100.0 * s.angle.abs()
            + 10.0 * f64::from(u8::from(s.left_contact))
            + 10.0 * f64::from(u8::from(s.right_contact))
    }

    /// Heights of the (left, right) leg tips above the ground.
    fn leg_heights(&self, s: &LanderState) -> (f64, f64) {
        let p = &self.params;
        let (sin, cos) = (odd_sin(s.angle), even_cos(s.angle));
        let base = s.y + p.leg_drop * (1.0 - cos);
        (base - p.leg_span * sin, base + p.leg_span * sin)
    }
}

impl Default for LunarLander {
    fn default() -> Self {
        Self::new(LanderParams::default())
    }
}

impl Environment for LunarLander {
    fn name(&self) -> &'static str {
        "lunarlander"
    }

    fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("CoordX", -1.0, 1.0, 3),
            Feature::continuous("CoordY", 0.0, 1.5, 3),
            Feature::continuous("LinearVelocX", -1.0, 1.0, 3),
            Feature::continuous("LinearVelocY", -1.5, 0.5, 3),
            Feature::continuous("Angle", -0.6, 0.6, 3),
            Feature::continuous("AngularVeloc", -1.5, 1.5, 3),
            Feature::discrete("LeftLegContact"),
            Feature::discrete("RightLegContact"),
        ])
        .expect("static schema")
    }

    fn action_names(&self) -> Vec<String> {
        ["doNothing", "fireLeft", "fireMain", "fireRight"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = LanderState {
            x: rng.random_range(-0.2..=0.2),
            y: self.params.start_height,
            vx: rng.random_range(-0.3..=0.3),
            vy: rng.random_range(-0.3..=0.0),
            angle: rng.random_range(-0.05..=0.05),
            angular_vel: rng.random_range(-0.1..=0.1),
            left_contact: false,
            right_contact: false,
        };
        self.set_state(state);
        state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 4)?;
        if self.finished {
            return Ok(StepResult {
                state: self.state.to_vec(),
                reward: 0.0,
                done: true,
                truncated: false,
            });
        }
        let p = self.params;
        let mut s = self.state;
        let (sin, cos) = (odd_sin(s.angle), even_cos(s.angle));

        let mut ax = 0.0;
        let mut ay = -p.gravity;
        let mut alpha = 0.0;
        let mut fuel = 0.0;
        match action {
            2 => {
                ax -= p.main_accel * sin;
                ay += p.main_accel * cos;
                fuel = p.main_fuel_cost;
            }
            1 | 3 => {
                let dir = if action == 1 { 1.0 } else { -1.0 };
                ax += dir * p.side_accel * cos;
                ay += dir * p.side_accel * sin;
                alpha += dir * p.side_angular_accel;
                fuel = p.side_fuel_cost;
            }
            _ => {}
        }

        s.vx += ax * p.dt;
        s.vy += ay * p.dt;
        s.angular_vel += alpha * p.dt;
        s.x += s.vx * p.dt;
        s.y += s.vy * p.dt;
        s.angle += s.angular_vel * p.dt;

        let mut crashed = false;
        let (hl, hr) = self.leg_heights(&s);
        let lowest = hl.min(hr);
        if lowest <= 0.0 {
            if s.vy < -p.crash_speed || s.angle.abs() > p.crash_angle {
                crashed = true;
            } else {
                s.y -= lowest;
                s.vy = s.vy.max(0.0);
                s.vx *= p.ground_friction;
                // grounded legs level the body
                s.angle *= 0.8;
                s.angular_vel *= 0.5;
            }
        }
        let (hl, hr) = self.leg_heights(&s);
        s.left_contact = !crashed && hl <= 1e-3;
        s.right_contact = !crashed && hr <= 1e-3;

        let shaping = Self::shaping(&s);
        let mut reward = shaping - self.prev_shaping - fuel;
        self.prev_shaping = shaping;

        let at_rest = s.left_contact
            && s.right_contact
            && s.vx.abs() < p.rest_speed
            && s.vy.abs() < p.rest_speed
            && s.angular_vel.abs() < p.rest_speed;
        let out_of_bounds = s.x.abs() >= 1.0;
        let done = crashed || out_of_bounds || at_rest;
        if crashed || out_of_bounds {
            reward = -100.0;
        } else if at_rest {
            reward = 100.0;
        }
        self.steps += 1;
        let truncated = !done && self.steps >= p.max_steps;
        self.state = s;
        self.finished = done;
        Ok(StepResult {
            state: s.to_vec(),
            reward,
            done,
            truncated,
        })
    }
}
