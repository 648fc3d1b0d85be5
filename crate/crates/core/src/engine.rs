//! Discrete-time world engine: arrivals, staging, offload transfers, queue
//! processing, result returns, and deadline enforcement.
//!
//! Each `advance_step` runs a fixed phase order (required for
//! determinism):
//!
//! 1. apply offload decisions, agents ascending by id;
//! 2. deliver transfers due by the end of the step;
//! 3. process queues, one cycle budget per node, leftover budget rolling
//!    across tasks within the step;
//! 4. drop tasks whose age exceeds their deadline, wherever they sit;
//! 5. sample new arrivals into staging;
//! 6. advance the clock and refresh broadcast snapshots.
//!
//! Broadcasts are free and instantaneous; observations built from them are
//! at worst one step stale.

use crate::comm::{channel_gain, transmission_time};
use crate::domain::{validate_config, NodeId, SimConfig, TaskId, TaskInstance};
use crate::error::{Result, SimError};
use crate::metrics::EpisodeMetrics;
use crate::workload::TaskTemplate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Offload,
    ResultReturn,
}

/// A payload in flight between two nodes.
#[derive(Debug, Clone)]
pub struct TransferEvent {
    pub task: TaskInstance,
    pub from: NodeId,
    pub to: NodeId,
    pub payload_bits: u64,
    /// Absolute arrival time, fractional steps. Delivered during the step
    /// in which `arrive_at <= step_end`.
    pub arrive_at: f64,
    pub kind: TransferKind,
    seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOutcome {
    Completed,
    DroppedOverflow,
    DroppedDeadline,
}

/// Final fate of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalRecord {
    pub task_id: TaskId,
    pub outcome: TaskOutcome,
    pub finished_at: u64,
    /// `finished_at - created_at`; completed tasks only.
    pub response_time: Option<u64>,
}

/// Pre-action state snapshot for one agent's offload decision, consumed by
/// the reward computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSnapshot {
    pub agent: NodeId,
    pub target: NodeId,
    pub task_id: TaskId,
    pub rho: u64,
    pub xi: u64,
    pub alpha_out_bits: u64,
    pub queue_agent: usize,
    pub rate_agent: u64,
    pub queue_target: usize,
    pub rate_target: u64,
    pub cap_target: usize,
    /// Channel terms agent -> target; zeroed gain and default bandwidth
    /// when the action is local.
    pub bandwidth_hz: f64,
    pub power_dbm: f64,
    pub gain_db: f64,
    pub noise_dbm: f64,
}

/// Everything that happened during one step.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    /// One snapshot per agent whose staging head was acted on, ascending
    /// by agent id.
    pub acted: Vec<ActionSnapshot>,
    pub completed: Vec<TerminalRecord>,
    /// One entry per overload event (full-queue rejection) this step.
    pub overloads: Vec<NodeId>,
    pub deadline_drops: Vec<TaskId>,
}

impl StepOutcome {
    fn empty() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Default)]
struct NodeRuntime {
    queue: VecDeque<TaskInstance>,
    current: Option<TaskInstance>,
    /// Tasks awaiting an offload decision by this node's controller.
    staging: VecDeque<TaskInstance>,
}

/// The simulated world. One instance per episode; never shared across
/// threads (the RNG is owned).
#[derive(Debug, Clone)]
pub struct SimState {
    config: SimConfig,
    time: u64,
    nodes: Vec<NodeRuntime>,
    /// Queue lengths as last broadcast (end of previous step).
    announced_queue: Vec<usize>,
    in_transit: Vec<TransferEvent>,
    rng: ChaCha8Rng,
    next_task_id: TaskId,
    next_event_seq: u64,
    metrics: EpisodeMetrics,
    terminals: Vec<TerminalRecord>,
}

impl SimState {
    /// Builds the initial world; fails with the full violation list if the
    /// config is invalid.
    pub fn init(config: SimConfig) -> Result<Self> {
        let violations = validate_config(&config);
        if !violations.is_empty() {
            return Err(SimError::InvalidConfig(violations));
        }
        let n = config.topology.len();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            time: 0,
            nodes: vec![NodeRuntime::default(); n],
            announced_queue: vec![0; n],
            in_transit: Vec::new(),
            next_task_id: 0,
            next_event_seq: 0,
            metrics: EpisodeMetrics::default(),
            terminals: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn is_finished(&self) -> bool {
        self.time >= self.config.horizon
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.nodes[node].queue.len()
    }

    pub fn staging_len(&self, node: NodeId) -> usize {
        self.nodes[node].staging.len()
    }

    pub fn has_current_task(&self, node: NodeId) -> bool {
        self.nodes[node].current.is_some()
    }

    /// Queue length of `node` as last announced (one-hop broadcast).
    pub fn announced_queue_len(&self, node: NodeId) -> usize {
        self.announced_queue[node]
    }

    pub fn in_transit_count(&self) -> usize {
        self.in_transit.len()
    }

    pub fn metrics(&self) -> &EpisodeMetrics {
        &self.metrics
    }

    pub fn metrics_mut(&mut self) -> &mut EpisodeMetrics {
        &mut self.metrics
    }

    pub fn terminals(&self) -> &[TerminalRecord] {
        &self.terminals
    }

    /// Tasks currently anywhere in the system.
    pub fn resident_count(&self) -> u64 {
        let in_nodes: u64 = self
            .nodes
            .iter()
            .map(|n| (n.queue.len() + n.staging.len() + usize::from(n.current.is_some())) as u64)
            .sum();
        in_nodes + self.in_transit.len() as u64
    }

    /// Exact conservation check: every generated task is completed,
    /// dropped, or still resident.
    pub fn conservation_check(&self) -> std::result::Result<(), String> {
        let m = &self.metrics;
        let accounted =
            m.completed + m.dropped_overflow + m.dropped_deadline + self.resident_count();
        if accounted != m.generated {
            return Err(format!(
                "step {}: generated {} but accounted {} (completed {} overflow {} deadline {} resident {})",
                self.time,
                m.generated,
                accounted,
                m.completed,
                m.dropped_overflow,
                m.dropped_deadline,
                self.resident_count()
            ));
        }
        Ok(())
    }

    /// Stages an externally built task at a controller node, as if a
    /// client had just delivered it. Counts toward `generated`.
    pub fn stage_external_task(&mut self, node: NodeId, mut task: TaskInstance) {
        if *task.offload_chain.last().expect("chain non-empty") != node {
            task.offload_chain.push(node);
        }
        self.nodes[node].staging.push_back(task);
        self.metrics.generated += 1;
    }

    /// Runs one step of the world under the given joint action. Keys must
    /// be exactly the controller set; targets must be the agent itself or
    /// one of its neighbors.
    pub fn advance_step(&mut self, joint_action: &BTreeMap<NodeId, NodeId>) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(SimError::EpisodeFinished {
                horizon: self.config.horizon,
            });
        }
        self.validate_joint_action(joint_action)?;

        let mut outcome = StepOutcome::empty();

        // Phase 1: offload decisions, ascending agent id.
        for (&agent, &target) in joint_action {
            if let Some(snapshot) = self.apply_offload_unchecked(agent, target, &mut outcome)? {
                outcome.acted.push(snapshot);
            }
        }

        // Phase 2: deliveries due by the end of this step.
        self.deliver_due(&mut outcome)?;

        // Phase 3: processing.
        self.process_nodes(&mut outcome)?;

        // Phase 4: deadline enforcement.
        self.enforce_deadlines(&mut outcome);

        // Phase 5: new arrivals enter staging.
        self.sample_step_arrivals();

        // Phase 6: clock and broadcasts.
        self.time += 1;
        for i in 0..self.nodes.len() {
            self.announced_queue[i] = self.nodes[i].queue.len();
        }
        if self.is_finished() {
            self.metrics.resident_at_end = self.resident_count();
        }

        Ok(outcome)
    }

    /// Validates and applies a single agent's offload decision. Public
    /// entry point for driving the engine without a full joint action;
    /// overloads raised by a rejected local enqueue still count.
    pub fn apply_offload(
        &mut self,
        agent: NodeId,
        target: NodeId,
    ) -> Result<Option<ActionSnapshot>> {
        self.check_action(agent, target)?;
        let mut outcome = StepOutcome::empty();
        self.apply_offload_unchecked(agent, target, &mut outcome)
    }

    fn validate_joint_action(&self, joint_action: &BTreeMap<NodeId, NodeId>) -> Result<()> {
        for node in &self.config.topology.nodes {
            if node.has_controller && !joint_action.contains_key(&node.id) {
                return Err(SimError::IncompleteJointAction { agent: node.id });
            }
        }
        for (&agent, &target) in joint_action {
            self.check_action(agent, target)?;
        }
        Ok(())
    }

    fn check_action(&self, agent: NodeId, target: NodeId) -> Result<()> {
        let topo = &self.config.topology;
        if agent >= topo.len() || !topo.nodes[agent].has_controller {
            return Err(SimError::UnknownAgent { agent });
        }
        if target != agent && !topo.neighbors(agent).contains(&target) {
            return Err(SimError::IllegalAction {
                agent,
                detail: format!("target {target} is not the agent or one of its neighbors"),
            });
        }
        Ok(())
    }

    fn apply_offload_unchecked(
        &mut self,
        agent: NodeId,
        target: NodeId,
        outcome: &mut StepOutcome,
    ) -> Result<Option<ActionSnapshot>> {
        let Some(mut task) = self.nodes[agent].staging.pop_front() else {
            return Ok(None); // empty staging: no-op
        };
        let topo = &self.config.topology;
        let channel = &self.config.channel;
        let agent_spec = &topo.nodes[agent];
        let target_spec = &topo.nodes[target];

        let gain_db = if target == agent {
            0.0
        } else {
            channel_gain(
                agent_spec.position,
                target_spec.position,
                channel.gain_model,
            )?
        };
        let snapshot = ActionSnapshot {
            agent,
            target,
            task_id: task.id,
            rho: task.rho,
            xi: task.xi,
            alpha_out_bits: task.alpha_out_bits,
            queue_agent: self.nodes[agent].queue.len(),
            rate_agent: agent_spec.processing_rate(),
            queue_target: self.nodes[target].queue.len(),
            rate_target: target_spec.processing_rate(),
            cap_target: target_spec.queue_capacity,
            bandwidth_hz: topo.bandwidth(agent, target, channel.default_bandwidth_hz),
            power_dbm: agent_spec.transmit_power_dbm,
            gain_db,
            noise_dbm: channel.noise_dbm,
        };

        if target == agent {
            // Local delivery bypasses the channel entirely.
            self.enqueue_or_drop(task, agent, outcome);
        } else {
            task.offload_chain.push(target);
            let time = transmission_time(
                task.alpha_in_bits as f64,
                snapshot.bandwidth_hz,
                snapshot.power_dbm,
                snapshot.gain_db,
                snapshot.noise_dbm,
            )?;
            let payload = task.alpha_in_bits;
            self.push_transfer(
                task,
                agent,
                target,
                payload,
                self.time as f64 + time,
                TransferKind::Offload,
            );
        }
        Ok(Some(snapshot))
    }

    fn enqueue_or_drop(&mut self, task: TaskInstance, node: NodeId, outcome: &mut StepOutcome) {
        let cap = self.config.topology.nodes[node].queue_capacity;
        if self.nodes[node].queue.len() < cap {
            self.nodes[node].queue.push_back(task);
        } else {
            self.record_overload(node, outcome);
            self.record_terminal(task.id, TaskOutcome::DroppedOverflow, None);
            self.metrics.dropped_overflow += 1;
        }
    }

    fn record_overload(&mut self, node: NodeId, outcome: &mut StepOutcome) {
        *self.metrics.overloads_by_node.entry(node).or_insert(0) += 1;
        outcome.overloads.push(node);
    }

    fn record_terminal(
        &mut self,
        task_id: TaskId,
        outcome: TaskOutcome,
        response: Option<u64>,
    ) -> TerminalRecord {
        let record = TerminalRecord {
            task_id,
            outcome,
            finished_at: self.time + 1,
            response_time: response,
        };
        self.terminals.push(record.clone());
        record
    }

    fn push_transfer(
        &mut self,
        task: TaskInstance,
        from: NodeId,
        to: NodeId,
        payload_bits: u64,
        arrive_at: f64,
        kind: TransferKind,
    ) {
        let seq = self.next_event_seq;
        self.next_event_seq += 1;
        self.in_transit.push(TransferEvent {
            task,
            from,
            to,
            payload_bits,
            arrive_at,
            kind,
            seq,
        });
    }

    /// Delivers every transfer due by the end of this step, in
    /// (arrive_at, creation order). Result returns may chain into further
    /// hops that are themselves due this step.
    fn deliver_due(&mut self, outcome: &mut StepOutcome) -> Result<()> {
        let step_end = (self.time + 1) as f64;
        loop {
            let due = self
                .in_transit
                .iter()
                .enumerate()
                .filter(|(_, e)| e.arrive_at <= step_end)
                .min_by(|(_, a), (_, b)| {
                    a.arrive_at
                        .partial_cmp(&b.arrive_at)
                        .expect("finite arrival times")
                        .then(a.seq.cmp(&b.seq))
                })
                .map(|(i, _)| i);
            let Some(idx) = due else { break };
            let event = self.in_transit.swap_remove(idx);
            match event.kind {
                TransferKind::Offload => {
                    self.enqueue_or_drop(event.task, event.to, outcome);
                }
                TransferKind::ResultReturn => {
                    self.handle_result_arrival(event, outcome)?;
                }
            }
        }
        Ok(())
    }

    fn handle_result_arrival(
        &mut self,
        event: TransferEvent,
        outcome: &mut StepOutcome,
    ) -> Result<()> {
        let mut task = event.task;
        if task.offload_chain.len() <= 1 {
            // Arrived back at the origin client.
            let response = (self.time + 1).saturating_sub(task.created_at);
            let record = self.record_terminal(task.id, TaskOutcome::Completed, Some(response));
            self.metrics.completed += 1;
            self.metrics.response_times.push(response);
            outcome.completed.push(record);
            return Ok(());
        }
        // Forward along the chain, continuing from the real arrival time.
        let start = event.arrive_at;
        self.emit_return_hop(
            task.offload_chain.pop().expect("non-empty chain"),
            task,
            start,
        )
    }

    /// Sends the result one hop backward along the offload chain.
    fn emit_return_hop(&mut self, from: NodeId, task: TaskInstance, start: f64) -> Result<()> {
        let to = *task.offload_chain.last().expect("chain keeps the origin");
        let topo = &self.config.topology;
        let channel = &self.config.channel;
        let gain = channel_gain(
            topo.nodes[from].position,
            topo.nodes[to].position,
            channel.gain_model,
        )?;
        let hop = transmission_time(
            task.alpha_out_bits as f64,
            topo.bandwidth(from, to, channel.default_bandwidth_hz),
            topo.nodes[from].transmit_power_dbm,
            gain,
            channel.noise_dbm,
        )?;
        let payload = task.alpha_out_bits;
        self.push_transfer(
            task,
            from,
            to,
            payload,
            start + hop,
            TransferKind::ResultReturn,
        );
        Ok(())
    }

    /// Spends each node's cycle budget on its queue, FIFO, rolling leftover
    /// budget into the next task within the same step.
    fn process_nodes(&mut self, outcome: &mut StepOutcome) -> Result<()> {
        for node in 0..self.nodes.len() {
            let mut budget = self.config.topology.nodes[node].processing_rate();
            while budget > 0 {
                if self.nodes[node].current.is_none() {
                    self.nodes[node].current = self.nodes[node].queue.pop_front();
                }
                let Some(task) = self.nodes[node].current.as_mut() else {
                    break;
                };
                let used = budget.min(task.remaining_cycles);
                task.remaining_cycles -= used;
                task.cycles_consumed += used;
                budget -= used;
                if task.remaining_cycles == 0 {
                    let done = self.nodes[node]
                        .current
                        .take()
                        .expect("current task present");
                    self.finish_processing(node, done, outcome)?;
                }
            }
        }
        Ok(())
    }

    fn finish_processing(
        &mut self,
        node: NodeId,
        mut task: TaskInstance,
        outcome: &mut StepOutcome,
    ) -> Result<()> {
        debug_assert_eq!(task.cycles_consumed, task.total_cycles());
        if task.offload_chain.len() <= 1 {
            // Processed at the origin client; the result is already home.
            let response = (self.time + 1).saturating_sub(task.created_at);
            let record = self.record_terminal(task.id, TaskOutcome::Completed, Some(response));
            self.metrics.completed += 1;
            self.metrics.response_times.push(response);
            outcome.completed.push(record);
            return Ok(());
        }
        // The result becomes available at the end of this step.
        let start = (self.time + 1) as f64;
        let from = task.offload_chain.pop().expect("non-empty chain");
        debug_assert_eq!(from, node);
        self.emit_return_hop(from, task, start)
    }

    /// Drops every task whose age at the end of this step exceeds its
    /// deadline, wherever it currently sits (staging, queue, in
    /// processing, or in flight).
    fn enforce_deadlines(&mut self, outcome: &mut StepOutcome) {
        let now = self.time;
        let mut expired: Vec<TaskId> = Vec::new();
        for node in self.nodes.iter_mut() {
            node.staging.retain(|t| {
                let keep = t.age_at_step_end(now) <= t.deadline;
                if !keep {
                    expired.push(t.id);
                }
                keep
            });
            node.queue.retain(|t| {
                let keep = t.age_at_step_end(now) <= t.deadline;
                if !keep {
                    expired.push(t.id);
                }
                keep
            });
            if let Some(t) = &node.current {
                if t.age_at_step_end(now) > t.deadline {
                    expired.push(t.id);
                    node.current = None;
                }
            }
        }
        self.in_transit.retain(|e| {
            let keep = e.task.age_at_step_end(now) <= e.task.deadline;
            if !keep {
                expired.push(e.task.id);
            }
            keep
        });
        expired.sort_unstable();
        for id in expired {
            self.record_terminal(id, TaskOutcome::DroppedDeadline, None);
            self.metrics.dropped_deadline += 1;
            outcome.deadline_drops.push(id);
        }
    }

    /// Phase 5: every client samples a Poisson arrival count and delivers
    /// the new tasks into a controller's staging buffer (its own when it
    /// has one, else a uniformly chosen controller neighbor). Initial
    /// delivery is free: offloading is the only charged communication.
    fn sample_step_arrivals(&mut self) {
        let clients = self.config.clients();
        for client in clients {
            let tasks = sample_arrivals(
                &self.config.task_template,
                self.config.lambda,
                &mut self.rng,
                &mut self.next_task_id,
                client,
                self.time,
            );
            for mut task in tasks {
                let stager = if self.config.topology.nodes[client].has_controller {
                    client
                } else {
                    let candidates: Vec<NodeId> = self
                        .config
                        .topology
                        .neighbors(client)
                        .iter()
                        .copied()
                        .filter(|&nb| self.config.topology.nodes[nb].has_controller)
                        .collect();
                    candidates[self.rng.random_range(0..candidates.len())]
                };
                if stager != client {
                    task.offload_chain.push(stager);
                }
                self.nodes[stager].staging.push_back(task);
                self.metrics.generated += 1;
            }
        }
    }
}

/// Samples one client's arrivals for one step: a Poisson(lambda) count of
/// tasks drawn from the template. Consumes the RNG deterministically.
pub fn sample_arrivals(
    template: &TaskTemplate,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    next_id: &mut TaskId,
    client: NodeId,
    now: u64,
) -> Vec<TaskInstance> {
    let count = poisson_count(rng, lambda);
    (0..count)
        .map(|_| {
            let id = *next_id;
            *next_id += 1;
            template.sample(rng, id, client, now)
        })
        .collect()
}

fn poisson_count(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive finite lambda");
    dist.sample(rng) as u64
}
