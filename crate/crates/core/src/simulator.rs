//! Agent-level simulation of GBP over a message-passing network.
//!
//! Agent `n` owns variable `x_n` and factor `f_n`; factors without a
//! same-indexed variable go to the agent of their lowest-indexed neighbour.
//! An agent sees only its own parameters and its inbox. The [`Network`]
//! routes envelopes and refuses any that would travel between nodes that are
//! not adjacent in the factor graph.
//!
//! The synchronous schedule performs the same floating-point operations as
//! [`engine::run`](crate::engine::run) in the same order, so its output is
//! bitwise identical. The random-sequential schedule has no convergence
//! guarantee; its results are empirical.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    init_messages, kernel, variable_messages, BeliefSet, EngineError, InitStrategy, Message, RunStatus,
    DIVERGENCE_GUARD,
};
use crate::exec::Execution;
use crate::graph::{build_factor_graph, FactorGraph, Node};
use crate::model::LinearGaussianModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Every tick: all variable messages, then all factor messages.
    Synchronous,
    /// Every tick one agent refreshes all of its outgoing messages; agents
    /// take turns in a fresh seeded permutation each round.
    RandomSequential { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub schedule: Schedule,
    pub tolerance: f64,
    pub max_ticks: usize,
    pub init: InitStrategy,
    pub record_events: bool,
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            schedule: Schedule::Synchronous,
            tolerance: crate::engine::DEFAULT_TOLERANCE,
            max_ticks: crate::engine::DEFAULT_MAX_ITERS,
            init: InitStrategy::Zero,
            record_events: false,
            execution: Execution::default(),
        }
    }
}

/// A message in flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub tick: usize,
    pub sender: Node,
    pub receiver: Node,
    pub message: Message,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("locality violation: {sender:?} is not adjacent to {receiver:?}")]
    Locality { sender: Node, receiver: Node },
    #[error("agent {agent} tried to send on behalf of {sender:?}, which it does not own")]
    Impersonation { agent: usize, sender: Node },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
struct LocalVariable {
    index: usize,
    prior_precision: f64,
    /// Neighbouring factors, ascending.
    factors: Vec<usize>,
}

#[derive(Debug, Clone)]
struct LocalFactor {
    index: usize,
    noise_var: f64,
    obs: f64,
    /// `(variable, A_{n,i})`, ascending variable.
    scope: Vec<(usize, f64)>,
}

/// Largest `(precision, mean)` change per message direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WireChange {
    pub fv: (f64, f64),
    pub vf: (f64, f64),
}

impl WireChange {
    fn merge(self, other: WireChange) -> WireChange {
        let max = |a: (f64, f64), b: (f64, f64)| (a.0.max(b.0), a.1.max(b.1));
        WireChange {
            fv: max(self.fv, other.fv),
            vf: max(self.vf, other.vf),
        }
    }

    fn below(&self, tol: f64) -> bool {
        self.fv.0 < tol && self.fv.1 < tol && self.vf.0 < tol && self.vf.1 < tol
    }
}

/// One network participant.
#[derive(Debug, Clone)]
pub struct Agent {
    id: usize,
    variables: Vec<LocalVariable>,
    factors: Vec<LocalFactor>,
    /// Latest message per `(receiver, sender)`.
    inbox: BTreeMap<(Node, Node), Message>,
}

impl Agent {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn owns(&self, node: Node) -> bool {
        match node {
            Node::Variable(j) => self.variables.iter().any(|v| v.index == j),
            Node::Factor(n) => self.factors.iter().any(|f| f.index == n),
        }
    }

    fn received(&self, receiver: Node, sender: Node) -> Message {
        self.inbox[&(receiver, sender)]
    }

    fn receive(&mut self, env: &Envelope) {
        self.inbox.insert((env.receiver, env.sender), env.message);
    }

    fn variable_messages(&self, tick: usize) -> Vec<Envelope> {
        let mut out = Vec::new();
        for var in &self.variables {
            let me = Node::Variable(var.index);
            for &target in &var.factors {
                let incoming = var
                    .factors
                    .iter()
                    .filter(|&&k| k != target)
                    .map(|&k| self.received(me, Node::Factor(k)));
                out.push(Envelope {
                    tick,
                    sender: me,
                    receiver: Node::Factor(target),
                    message: kernel::variable_message(var.prior_precision, incoming),
                });
            }
        }
        out
    }

    fn factor_messages(&self, tick: usize) -> Vec<Envelope> {
        let mut out = Vec::new();
        for fac in &self.factors {
            let me = Node::Factor(fac.index);
            for &(target, coeff) in &fac.scope {
                let others = fac
                    .scope
                    .iter()
                    .filter(|&&(j, _)| j != target)
                    .map(|&(j, a)| (a, self.received(me, Node::Variable(j))));
                out.push(Envelope {
                    tick,
                    sender: me,
                    receiver: Node::Variable(target),
                    message: kernel::factor_message(coeff, fac.noise_var, fac.obs, others),
                });
            }
        }
        out
    }

    fn beliefs(&self) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        self.variables.iter().map(move |var| {
            let me = Node::Variable(var.index);
            let incoming = var.factors.iter().map(|&k| self.received(me, Node::Factor(k)));
            (var.index, kernel::belief(var.prior_precision, incoming))
        })
    }
}

/// Agents plus the routing fabric. Only the network knows the topology.
#[derive(Debug, Clone)]
pub struct Network {
    graph: FactorGraph,
    agents: Vec<Agent>,
    owner: Vec<usize>,
    /// Latest message per fv edge and per vf edge, as seen on the wire.
    wire: Vec<Message>,
    vf_wire: Vec<Message>,
    messages_sent: usize,
    events: Option<Vec<Envelope>>,
}

impl Network {
    pub fn new(model: &LinearGaussianModel, init: &InitStrategy, record_events: bool) -> Result<Self, SimError> {
        let graph = build_factor_graph(model);
        let num_vars = model.num_variables();
        let mut agents: Vec<Agent> = (0..num_vars)
            .map(|id| Agent {
                id,
                variables: Vec::new(),
                factors: Vec::new(),
                inbox: BTreeMap::new(),
            })
            .collect();

        let mut owner = vec![0; num_vars + model.num_factors()];
        for (j, v) in model.variables().iter().enumerate() {
            agents[j].variables.push(LocalVariable {
                index: j,
                prior_precision: v.prior_precision(),
                factors: graph.variable_neighbors(j).to_vec(),
            });
            owner[graph.flat_node(Node::Variable(j))] = j;
        }
        for (n, f) in model.factors().iter().enumerate() {
            let agent = if n < num_vars { n } else { f.coeffs()[0].0 };
            agents[agent].factors.push(LocalFactor {
                index: n,
                noise_var: f.noise_var(),
                obs: f.obs(),
                scope: f.coeffs().to_vec(),
            });
            owner[graph.flat_node(Node::Factor(n))] = agent;
        }

        // Seed inboxes with the initial messages of both directions.
        let state = init_messages(&graph, model, init)?;
        let vf = variable_messages(&graph, model, &state, Execution::Serial);
        let mut net = Network {
            agents,
            owner,
            wire: (0..state.len()).map(|e| state.message(e)).collect(),
            vf_wire: (0..graph.num_edges()).map(|t| vf.message(t)).collect(),
            messages_sent: 0,
            events: record_events.then(Vec::new),
            graph,
        };
        for (e, edge) in net.graph.fv_edges().to_vec().into_iter().enumerate() {
            let receiver = Node::Variable(edge.variable);
            let a = net.owner_of(receiver);
            net.agents[a]
                .inbox
                .insert((receiver, Node::Factor(edge.factor)), state.message(e));
        }
        for (t, edge) in net.graph.vf_edges().to_vec().into_iter().enumerate() {
            let receiver = Node::Factor(edge.factor);
            let a = net.owner_of(receiver);
            net.agents[a]
                .inbox
                .insert((receiver, Node::Variable(edge.variable)), vf.message(t));
        }
        Ok(net)
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn messages_sent(&self) -> usize {
        self.messages_sent
    }

    pub fn owner_of(&self, node: Node) -> usize {
        self.owner[self.graph.flat_node(node)]
    }

    /// Routes envelopes emitted by `agent` and reports how far they moved
    /// the messages on their edges.
    pub fn deliver(&mut self, agent: usize, envelopes: &[Envelope]) -> Result<WireChange, SimError> {
        let mut delta = WireChange::default();
        for env in envelopes {
            if !self.agents[agent].owns(env.sender) {
                return Err(SimError::Impersonation {
                    agent,
                    sender: env.sender,
                });
            }
            if !self.graph.is_adjacent(env.sender, env.receiver) {
                return Err(SimError::Locality {
                    sender: env.sender,
                    receiver: env.receiver,
                });
            }
            let (slot, change) = match (env.sender, env.receiver) {
                (Node::Factor(n), Node::Variable(i)) => (
                    &mut self.wire[self.graph.fv_index(n, i).expect("adjacent")],
                    &mut delta.fv,
                ),
                (Node::Variable(j), Node::Factor(n)) => (
                    &mut self.vf_wire[self.graph.vf_index(j, n).expect("adjacent")],
                    &mut delta.vf,
                ),
                _ => unreachable!("adjacency is bipartite"),
            };
            change.0 = change.0.max((slot.precision - env.message.precision).abs());
            change.1 = change.1.max((slot.mean - env.message.mean).abs());
            *slot = env.message;
            let dest = self.owner_of(env.receiver);
            self.agents[dest].receive(env);
            self.messages_sent += 1;
            if let Some(log) = &mut self.events {
                log.push(*env);
            }
        }
        Ok(delta)
    }

    fn diverged(&self) -> bool {
        self.wire
            .iter()
            .any(|m| !m.mean.is_finite() || m.mean.abs() > DIVERGENCE_GUARD || !m.precision.is_finite())
    }

    /// Beliefs each agent computes from its own inbox.
    pub fn beliefs(&self, iteration: usize) -> BeliefSet {
        let n = self.graph.num_variables();
        let mut variances = vec![0.0; n];
        let mut means = vec![0.0; n];
        for agent in &self.agents {
            for (j, (p, mu)) in agent.beliefs() {
                variances[j] = p;
                means[j] = mu;
            }
        }
        BeliefSet {
            variances,
            means,
            iteration,
        }
    }

    fn sync_tick(&mut self, tick: usize, exec: Execution) -> Result<WireChange, SimError> {
        let mut delta = WireChange::default();
        let outgoing = exec.map_slice(&self.agents, |a| a.variable_messages(tick));
        for (a, envs) in outgoing.iter().enumerate() {
            delta = delta.merge(self.deliver(a, envs)?);
        }
        let outgoing = exec.map_slice(&self.agents, |a| a.factor_messages(tick));
        for (a, envs) in outgoing.iter().enumerate() {
            delta = delta.merge(self.deliver(a, envs)?);
        }
        Ok(delta)
    }

    fn agent_tick(&mut self, agent: usize, tick: usize) -> Result<WireChange, SimError> {
        let envs = self.agents[agent].variable_messages(tick);
        let first = self.deliver(agent, &envs)?;
        let envs = self.agents[agent].factor_messages(tick);
        Ok(first.merge(self.deliver(agent, &envs)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub beliefs: BeliefSet,
    pub ticks: usize,
    pub status: RunStatus,
    pub messages_sent: usize,
    pub events: Vec<Envelope>,
}

pub fn simulate(model: &LinearGaussianModel, config: &SimConfig) -> Result<SimOutcome, SimError> {
    if config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(SimError::Tolerance(config.tolerance));
    }
    let mut net = Network::new(model, &config.init, config.record_events)?;
    let tol = config.tolerance;
    let mut ticks = 0;
    let mut status = RunStatus::MaxIters;

    match config.schedule {
        Schedule::Synchronous => {
            while ticks < config.max_ticks {
                ticks += 1;
                let d = net.sync_tick(ticks, config.execution)?;
                if net.diverged() {
                    status = RunStatus::Diverged;
                    break;
                }
                // same stopping rule as the engine: factor→variable edges only
                if d.fv.0 < tol && d.fv.1 < tol {
                    status = RunStatus::Converged;
                    break;
                }
            }
        }
        Schedule::RandomSequential { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..net.agents.len()).collect();
            'rounds: while ticks < config.max_ticks {
                order.shuffle(&mut rng);
                let mut round = WireChange::default();
                for &agent in &order {
                    if ticks == config.max_ticks {
                        break 'rounds;
                    }
                    ticks += 1;
                    let d = net.agent_tick(agent, ticks)?;
                    round = round.merge(d);
                }
                if net.diverged() {
                    status = RunStatus::Diverged;
                    break;
                }
                // A factor can fire before its inputs refresh, so the residual
                // may sit on variable→factor edges alone.
                if round.below(tol) {
                    status = RunStatus::Converged;
                    break;
                }
            }
        }
    }

    Ok(SimOutcome {
        beliefs: net.beliefs(ticks),
        ticks,
        status,
        messages_sent: net.messages_sent(),
        events: net.events.take().unwrap_or_default(),
    })
}

/// CSV event log `tick,sender,receiver,precision,mean`; nodes are written as
/// their model ids.
pub fn write_event_csv(events: &[Envelope], model: &LinearGaussianModel, mut out: impl Write) -> io::Result<()> {
    let label = |node: Node| match node {
        Node::Variable(j) => model.variables()[j].id(),
        Node::Factor(n) => model.factors()[n].id(),
    };
    writeln!(out, "tick,sender,receiver,precision,mean")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{:.16e},{:.16e}",
            e.tick,
            label(e.sender),
            label(e.receiver),
            e.message.precision,
            e.message.mean
        )?;
    }
    Ok(())
}
