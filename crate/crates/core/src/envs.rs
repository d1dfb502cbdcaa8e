//! Built-in deterministic environments.
//!
//! Three purpose-built tasks spanning the axes that matter for the
//! protocol: discrete vs continuous actions and single vs multiple actors.
//! Transitions are deterministic; randomness enters only at reset (initial
//! placement), keyed by `purpose = EnvNoise`. Optimal returns are
//! analytically computable, which is what the acceptance checks lean on.

use crate::codec::ActionSpace;
use crate::dist::Action;
use crate::prng::{uniform64, Purpose, StreamKey};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("unknown environment '{0}'")]
    UnknownEnv(String),
    #[error("expected {0} actions, got {1}")]
    WrongActionCount(usize, usize),
    #[error("action type does not match the environment's action space")]
    WrongActionType,
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    /// Per-actor observation width.
    pub obs_dim: usize,
    /// Width of the global state fed to the shared value network.
    pub global_obs_dim: usize,
    pub action_space: ActionSpace,
    pub max_steps: u32,
    pub num_actors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Per-actor observations of the next state.
    pub obs: Vec<Vec<f64>>,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;
    /// Place the initial state; returns per-actor observations.
    fn reset(&mut self, key: StreamKey) -> Vec<Vec<f64>>;
    /// Global state for the critic.
    fn global_obs(&self) -> Vec<f64>;
    /// Advance one step with the joint action.
    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, EnvError>;
}

pub const ENV_NAMES: [&str; 3] = ["gridworld", "pointnav", "spreadlite"];

pub fn make_env(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        "gridworld" => Ok(Box::new(GridWorld::new())),
        "pointnav" => Ok(Box::new(PointNav::new())),
        "spreadlite" => Ok(Box::new(SpreadLite::new())),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

fn reset_uniform(key: StreamKey, counter: u64) -> f64 {
    uniform64(key.with_purpose(Purpose::EnvNoise).with_counter(counter))
}

// ── GridWorld ───────────────────────────────────────────────────
//
// 8x8 grid, four moves. Every step costs -0.01 and landing on the goal
// adds +1 and ends the episode, so the optimal return from a placement at
// Manhattan distance d is 1 - 0.01 d. Agent and goal cells are placed
// uniformly at reset; a goal colliding with the agent shifts one cell
// (deterministic, no rejection loop).

pub const GRID_SIZE: i32 = 8;
pub const GRID_STEP_PENALTY: f64 = -0.01;
pub const GRID_GOAL_BONUS: f64 = 1.0;
pub const GRID_MAX_STEPS: u32 = 64;

pub struct GridWorld {
    spec: EnvSpec,
    agent: (i32, i32),
    goal: (i32, i32),
    steps: u32,
}

impl GridWorld {
    pub fn new() -> Self {
        GridWorld {
            spec: EnvSpec {
                name: "gridworld",
                obs_dim: 4,
                global_obs_dim: 4,
                action_space: ActionSpace::Discrete(4),
                max_steps: GRID_MAX_STEPS,
                num_actors: 1,
            },
            agent: (0, 0),
            goal: (GRID_SIZE - 1, GRID_SIZE - 1),
            steps: 0,
        }
    }

    fn obs(&self) -> Vec<f64> {
        let s = (GRID_SIZE - 1) as f64;
        vec![
            self.agent.0 as f64 / s,
            self.agent.1 as f64 / s,
            self.goal.0 as f64 / s,
            self.goal.1 as f64 / s,
        ]
    }

    #[cfg(test)]
    fn place(agent: (i32, i32), goal: (i32, i32)) -> Self {
        let mut env = GridWorld::new();
        env.agent = agent;
        env.goal = goal;
        env
    }
}

impl Default for GridWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for GridWorld {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, key: StreamKey) -> Vec<Vec<f64>> {
        let cells = (GRID_SIZE * GRID_SIZE) as u64;
        let a = (reset_uniform(key, 0) * cells as f64) as u64;
        let mut g = (reset_uniform(key, 1) * cells as f64) as u64;
        if g == a {
            g = (g + 1) % cells;
        }
        self.agent = ((a % GRID_SIZE as u64) as i32, (a / GRID_SIZE as u64) as i32);
        self.goal = ((g % GRID_SIZE as u64) as i32, (g / GRID_SIZE as u64) as i32);
        self.steps = 0;
        vec![self.obs()]
    }

    fn global_obs(&self) -> Vec<f64> {
        self.obs()
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, EnvError> {
        if actions.len() != 1 {
            return Err(EnvError::WrongActionCount(1, actions.len()));
        }
        let a = actions[0].as_discrete().ok_or(EnvError::WrongActionType)?;
        let (dx, dy) = match a {
            0 => (0, -1),
            1 => (0, 1),
            2 => (-1, 0),
            3 => (1, 0),
            _ => return Err(EnvError::WrongActionType),
        };
        let nx = (self.agent.0 + dx).clamp(0, GRID_SIZE - 1);
        let ny = (self.agent.1 + dy).clamp(0, GRID_SIZE - 1);
        self.agent = (nx, ny);
        self.steps += 1;

        let mut reward = GRID_STEP_PENALTY;
        let mut done = self.steps >= self.spec.max_steps;
        if self.agent == self.goal {
            reward += GRID_GOAL_BONUS;
            done = true;
        }
        Ok(StepOutcome {
            obs: vec![self.obs()],
            reward,
            done,
        })
    }
}

// ── PointNav ────────────────────────────────────────────────────
//
// Continuous 2-d navigation in the box [-1, 1]^2. Actions are clipped to
// [-1, 1]^2 and scaled by 0.1; positions stay clamped to the box, so the
// per-step reward -||x' - goal|| is bounded by -sqrt(8).

pub const POINTNAV_MAX_STEPS: u32 = 64;
pub const POINTNAV_GAIN: f64 = 0.1;

pub struct PointNav {
    spec: EnvSpec,
    pos: [f64; 2],
    goal: [f64; 2],
    steps: u32,
}

impl PointNav {
    pub fn new() -> Self {
        PointNav {
            spec: EnvSpec {
                name: "pointnav",
                obs_dim: 4,
                global_obs_dim: 4,
                action_space: ActionSpace::Continuous { dim: 2 },
                max_steps: POINTNAV_MAX_STEPS,
                num_actors: 1,
            },
            pos: [0.0; 2],
            goal: [0.0; 2],
            steps: 0,
        }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.goal[0], self.goal[1]]
    }

    #[cfg(test)]
    fn place(pos: [f64; 2], goal: [f64; 2]) -> Self {
        let mut env = PointNav::new();
        env.pos = pos;
        env.goal = goal;
        env
    }
}

impl Default for PointNav {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointNav {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, key: StreamKey) -> Vec<Vec<f64>> {
        for (i, v) in self.pos.iter_mut().chain(self.goal.iter_mut()).enumerate() {
            *v = 2.0 * reset_uniform(key, i as u64) - 1.0;
        }
        self.steps = 0;
        vec![self.obs()]
    }

    fn global_obs(&self) -> Vec<f64> {
        self.obs()
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, EnvError> {
        if actions.len() != 1 {
            return Err(EnvError::WrongActionCount(1, actions.len()));
        }
        let a = actions[0].as_continuous().ok_or(EnvError::WrongActionType)?;
        if a.len() != 2 {
            return Err(EnvError::WrongActionType);
        }
        for k in 0..2 {
            self.pos[k] = (self.pos[k] + POINTNAV_GAIN * a[k].clamp(-1.0, 1.0)).clamp(-1.0, 1.0);
        }
        self.steps += 1;
        let reward = -((self.pos[0] - self.goal[0]).powi(2) + (self.pos[1] - self.goal[1]).powi(2))
            .sqrt();
        Ok(StepOutcome {
            obs: vec![self.obs()],
            reward,
            done: self.steps >= self.spec.max_steps,
        })
    }
}

// ── SpreadLite ──────────────────────────────────────────────────
//
// Three agents and three landmarks in [-1, 1]^2 with a shared reward:
// minus the sum over landmarks of the distance to the nearest agent. The
// reward is global; under the remote schemes only the controller sees it.
// Each agent observes its own position plus all landmark positions.

pub const SPREAD_AGENTS: usize = 3;
pub const SPREAD_LANDMARKS: usize = 3;
pub const SPREAD_MAX_STEPS: u32 = 32;
pub const SPREAD_GAIN: f64 = 0.1;

pub struct SpreadLite {
    spec: EnvSpec,
    agents: [[f64; 2]; SPREAD_AGENTS],
    landmarks: [[f64; 2]; SPREAD_LANDMARKS],
    steps: u32,
}

impl SpreadLite {
    pub fn new() -> Self {
        SpreadLite {
            spec: EnvSpec {
                name: "spreadlite",
                obs_dim: 2 + 2 * SPREAD_LANDMARKS,
                global_obs_dim: 2 * SPREAD_AGENTS + 2 * SPREAD_LANDMARKS,
                action_space: ActionSpace::Continuous { dim: 2 },
                max_steps: SPREAD_MAX_STEPS,
                num_actors: SPREAD_AGENTS,
            },
            agents: [[0.0; 2]; SPREAD_AGENTS],
            landmarks: [[0.0; 2]; SPREAD_LANDMARKS],
            steps: 0,
        }
    }

    fn actor_obs(&self, i: usize) -> Vec<f64> {
        let mut o = Vec::with_capacity(self.spec.obs_dim);
        o.extend_from_slice(&self.agents[i]);
        for l in &self.landmarks {
            o.extend_from_slice(l);
        }
        o
    }

    fn all_obs(&self) -> Vec<Vec<f64>> {
        (0..SPREAD_AGENTS).map(|i| self.actor_obs(i)).collect()
    }

    fn reward(&self) -> f64 {
        -self
            .landmarks
            .iter()
            .map(|l| {
                self.agents
                    .iter()
                    .map(|a| ((a[0] - l[0]).powi(2) + (a[1] - l[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
    }

    #[cfg(test)]
    fn place(agents: [[f64; 2]; SPREAD_AGENTS], landmarks: [[f64; 2]; SPREAD_LANDMARKS]) -> Self {
        let mut env = SpreadLite::new();
        env.agents = agents;
        env.landmarks = landmarks;
        env
    }
}

impl Default for SpreadLite {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for SpreadLite {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, key: StreamKey) -> Vec<Vec<f64>> {
        let mut c = 0;
        for slot in self
            .agents
            .iter_mut()
            .chain(self.landmarks.iter_mut())
            .flat_map(|p| p.iter_mut())
        {
            *slot = 2.0 * reset_uniform(key, c) - 1.0;
            c += 1;
        }
        self.steps = 0;
        self.all_obs()
    }

    fn global_obs(&self) -> Vec<f64> {
        let mut o = Vec::with_capacity(self.spec.global_obs_dim);
        for a in &self.agents {
            o.extend_from_slice(a);
        }
        for l in &self.landmarks {
            o.extend_from_slice(l);
        }
        o
    }

    fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, EnvError> {
        if actions.len() != SPREAD_AGENTS {
            return Err(EnvError::WrongActionCount(SPREAD_AGENTS, actions.len()));
        }
        for (i, action) in actions.iter().enumerate() {
            let a = action.as_continuous().ok_or(EnvError::WrongActionType)?;
            if a.len() != 2 {
                return Err(EnvError::WrongActionType);
            }
            for k in 0..2 {
                self.agents[i][k] =
                    (self.agents[i][k] + SPREAD_GAIN * a[k].clamp(-1.0, 1.0)).clamp(-1.0, 1.0);
            }
        }
        self.steps += 1;
        Ok(StepOutcome {
            obs: self.all_obs(),
            reward: self.reward(),
            done: self.steps >= self.spec.max_steps,
        })
    }
}
