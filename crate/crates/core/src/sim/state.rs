use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::dist::{AgentState, EmpiricalMeasure, ModelParams};
use crate::error::{Error, Result};

const NOT_RICH: usize = usize::MAX;

/// Initial dollar allocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dollars", rename_all = "kebab-case")]
pub enum AgentInit {
    /// Every agent holds `mu`.
    AllEqual,
    /// The last agent holds `N mu`, everybody else nothing.
    SingleRich,
    Custom(Vec<u32>),
}

impl AgentInit {
    pub fn dollars(&self, params: &ModelParams) -> Result<Vec<u32>> {
        let n = params.n_agents;
        let total = params.total();
        match self {
            Self::AllEqual => Ok(vec![params.mu; n]),
            Self::SingleRich => {
                let top = u32::try_from(total)
                    .map_err(|_| Error::InvalidParams(format!("N*mu={total} overflows u32")))?;
                let mut v = vec![0; n];
                v[n - 1] = top;
                Ok(v)
            }
            Self::Custom(v) => {
                if v.len() != n {
                    return Err(Error::InvalidParams(format!(
                        "custom allocation has {} agents, expected {n}",
                        v.len()
                    )));
                }
                let got: u64 = v.iter().map(|&d| u64::from(d)).sum();
                if got != total {
                    return Err(Error::BadInitialSum {
                        got,
                        expected: total,
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

/// One dollar moved from `giver` to `receiver` at absolute time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub time_delta: f64,
    pub giver: usize,
    pub receiver: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Event(Event),
    /// Nobody holds a dollar; the chain is frozen.
    Absorbed,
}

/// Exact continuous-time simulation of the N-agent chain.
///
/// Each ordered pair `(i, j)`, `i != j`, `S_i >= 1` fires at rate
/// `lambda / N`. Events are drawn without null events: the total rate is
/// `lambda |rich| (N - 1) / N`, the giver is uniform among rich agents and
/// the receiver uniform among the other `N - 1`.
#[derive(Debug, Clone)]
pub struct SimState {
    params: ModelParams,
    agents: AgentState,
    time: f64,
    rich: Vec<usize>,
    rich_pos: Vec<usize>,
    rng: ChaCha8Rng,
    event_count: u64,
}

/// Builds a simulation at time 0.
pub fn new_simulation(params: ModelParams, init: &AgentInit, seed: u64) -> Result<SimState> {
    params.validate()?;
    if params.n_agents < 2 {
        return Err(Error::InvalidParams(
            "simulation needs at least 2 agents".into(),
        ));
    }
    let dollars = init.dollars(&params)?;
    let mut rich = Vec::new();
    let mut rich_pos = vec![NOT_RICH; dollars.len()];
    for (i, &d) in dollars.iter().enumerate() {
        if d > 0 {
            rich_pos[i] = rich.len();
            rich.push(i);
        }
    }
    Ok(SimState {
        params,
        agents: AgentState::new(dollars),
        time: 0.0,
        rich,
        rich_pos,
        rng: ChaCha8Rng::seed_from_u64(seed),
        event_count: 0,
    })
}

impl SimState {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn agents(&self) -> &AgentState {
        &self.agents
    }

    pub fn dollars(&self) -> &[u32] {
        &self.agents.dollars
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn rich_count(&self) -> usize {
        self.rich.len()
    }

    /// Rich agent ids in internal order.
    pub fn rich_index(&self) -> &[usize] {
        &self.rich
    }

    pub fn empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::from_dollars(&self.agents.dollars)
    }

    /// `lambda |rich| (N - 1) / N`.
    pub fn total_rate(&self) -> f64 {
        let n = self.params.n_agents as f64;
        self.params.lambda * self.rich.len() as f64 * (n - 1.0) / n
    }

    /// Rich index equals `{i : S_i >= 1}` and the dollar total is conserved.
    pub fn check_invariants(&self) -> bool {
        let recomputed: Vec<usize> = (0..self.agents.n_agents())
            .filter(|&i| self.agents.dollars[i] > 0)
            .collect();
        let mut current = self.rich.clone();
        current.sort_unstable();
        let positions_ok = self
            .rich
            .iter()
            .enumerate()
            .all(|(k, &i)| self.rich_pos[i] == k);
        current == recomputed && positions_ok && self.agents.is_conserved()
    }

    fn remove_rich(&mut self, agent: usize) {
        let k = self.rich_pos[agent];
        let last = self.rich.pop().expect("rich index not empty");
        if last != agent {
            self.rich[k] = last;
            self.rich_pos[last] = k;
        }
        self.rich_pos[agent] = NOT_RICH;
    }

    fn add_rich(&mut self, agent: usize) {
        self.rich_pos[agent] = self.rich.len();
        self.rich.push(agent);
    }

    fn draw_delta(&mut self) -> Option<f64> {
        if self.rich.is_empty() {
            return None;
        }
        let e: f64 = self.rng.sample(Exp1);
        Some(e / self.total_rate())
    }

    fn transfer(&mut self, time_delta: f64) -> Event {
        let giver = self.rich[self.rng.random_range(0..self.rich.len())];
        let mut receiver = self.rng.random_range(0..self.params.n_agents - 1);
        if receiver >= giver {
            receiver += 1;
        }
        let dollars = &mut self.agents.dollars;
        debug_assert!(dollars[giver] >= 1);
        dollars[giver] -= 1;
        let became_poor = dollars[giver] == 0;
        let was_poor = dollars[receiver] == 0;
        dollars[receiver] = dollars[receiver]
            .checked_add(1)
            .expect("dollar count overflow");
        if became_poor {
            self.remove_rich(giver);
        }
        if was_poor {
            self.add_rich(receiver);
        }
        self.time += time_delta;
        self.event_count += 1;
        Event {
            time: self.time,
            time_delta,
            giver,
            receiver,
        }
    }

    /// Performs the next event.
    pub fn gillespie_step(&mut self) -> Step {
        match self.draw_delta() {
            None => Step::Absorbed,
            Some(dt) => Step::Event(self.transfer(dt)),
        }
    }

    /// Runs events up to `t_target` and sets the clock to `t_target`. The
    /// first event beyond the target is discarded, which is exact by the
    /// memoryless property.
    pub fn advance_to(&mut self, t_target: f64) {
        self.advance_to_with(t_target, |_| {});
    }

    /// As [`advance_to`](Self::advance_to), reporting every event.
    pub fn advance_to_with(&mut self, t_target: f64, mut on_event: impl FnMut(&Event)) {
        assert!(
            t_target >= self.time,
            "cannot go back in time from {} to {t_target}",
            self.time
        );
        while let Some(dt) = self.draw_delta() {
            if self.time + dt > t_target {
                break;
            }
            let ev = self.transfer(dt);
            on_event(&ev);
        }
        self.time = t_target;
    }

    /// Performs up to `count` events; returns how many happened.
    pub fn advance_events(&mut self, count: u64) -> u64 {
        for done in 0..count {
            if let Step::Absorbed = self.gillespie_step() {
                return done;
            }
        }
        count
    }
}
