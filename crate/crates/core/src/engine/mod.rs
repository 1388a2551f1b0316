//! The event-driven simulator: wires a parsed scenario into source state
//! machines, switch ports and link channels, then runs the cell-level
//! exchange and leaves a trace behind.
//!
//! Every link becomes two directed channels. A channel whose feeding node is
//! a switch carries that switch's output-port measurement state; forward RM
//! cells collect rate decisions at those ports on their way out, turn around
//! at the destination, and ride the reverse channels home.

mod event;
mod link;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cell::{DataCell, RmCell, RmDirection};
use crate::scenario::{InitialRate, NodeKind, Scenario, TimerPhase, Traffic};
use crate::source::{SourceConfig, SourceError, SourceState};
use crate::switch::{SwitchConfig, SwitchError, SwitchPortState};
use crate::trace::{Subject, TraceKind, TraceRecord};
use crate::units::{link_cell_rate, CellRate, LinkDir, LinkId, PortId, SimTime, UnitError, VcId};

use event::EventQueue;
use link::Channel;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("link {link:?} names unknown node {node:?}")]
    UnknownNode { link: String, node: String },
    #[error("vc {vc} has no declared link between {from:?} and {to:?}")]
    MissingLink { vc: VcId, from: String, to: String },
    #[error("vc {vc} path needs at least one link")]
    EmptyPath { vc: VcId },
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
}

#[derive(Debug, Clone)]
enum Payload {
    Data(DataCell),
    Rm(RmCell),
}

#[derive(Debug, Clone)]
enum Event {
    /// A source's pacing timer expired.
    CellTimer { vc: VcId },
    /// A source's averaging timer expired: measure and emit a forward RM cell.
    AveragingTimer { vc: VcId },
    /// A switch output port's measurement interval expired.
    IntervalTimer { channel: usize },
    /// A cell finished arriving at the far end of a channel.
    Arrival { channel: usize, payload: Payload },
    /// The application hands cells to a source's queue.
    Burst { vc: VcId, cells: u64 },
    /// Periodic link-state sampling for the trace.
    Sample,
}

/// A forward RM cell crossing one switch output port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmHopObservation {
    pub time_us: f64,
    pub vc: VcId,
    pub seq: u64,
    pub port: PortId,
    /// The port's raw decision, before max-combining.
    pub decision: f64,
    pub laf_before: f64,
    pub laf_after: f64,
}

/// What an RM observer gets to see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RmEvent {
    /// A forward cell visited a switch output port.
    PortVisit(RmHopObservation),
    /// Feedback arrived back at its source (a full returned cell, or a BECN
    /// copy when `becn` is set).
    Delivered {
        time_us: f64,
        vc: VcId,
        seq: u64,
        laf: f64,
        becn: bool,
    },
}

pub type RmObserver = Box<dyn FnMut(&RmEvent)>;

/// Whole-run cell accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub data_cells_injected: u64,
    pub data_cells_delivered: u64,
    pub rm_cells_emitted: u64,
    pub rm_cells_returned: u64,
    pub becn_cells_emitted: u64,
    pub becn_cells_delivered: u64,
}

struct VcRuntime {
    state: SourceState,
    /// First channel on the forward path (the access line).
    access_channel: usize,
    /// Forward routing: channel just crossed -> next channel, or delivery.
    fwd_next: BTreeMap<usize, Option<usize>>,
    /// Return routing for backward RM cells.
    bwd_next: BTreeMap<usize, Option<usize>>,
}

pub struct Simulation {
    cell_size_bits: u32,
    sample_interval_us: f64,
    channels: Vec<Channel>,
    /// Output-port state, keyed by the channel the port feeds.
    ports: BTreeMap<usize, SwitchPortState>,
    vcs: BTreeMap<VcId, VcRuntime>,
    queue: EventQueue<Event>,
    records: Vec<TraceRecord>,
    counters: RunCounters,
    rm_observer: Option<RmObserver>,
    started: bool,
    now_us: f64,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Simulation, EngineError> {
        // Node table: declaration order, name -> index.
        let mut nodes: Vec<(NodeKind, usize)> = Vec::new();
        let mut node_index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, s) in scenario.sources.iter().enumerate() {
            node_index.insert(&s.name, nodes.len());
            nodes.push((NodeKind::Source, i));
        }
        for (i, s) in scenario.switches.iter().enumerate() {
            node_index.insert(&s.name, nodes.len());
            nodes.push((NodeKind::Switch, i));
        }
        for (i, d) in scenario.destinations.iter().enumerate() {
            node_index.insert(d, nodes.len());
            nodes.push((NodeKind::Destination, i));
        }

        // Two directed channels per declared link.
        let mut channels = Vec::with_capacity(scenario.links.len() * 2);
        for (i, l) in scenario.links.iter().enumerate() {
            let lookup = |name: &str| {
                node_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| EngineError::UnknownNode {
                        link: l.name.clone(),
                        node: name.to_string(),
                    })
            };
            let from = lookup(&l.from)?;
            let to = lookup(&l.to)?;
            let bandwidth = l
                .bandwidth_bps
                .unwrap_or(scenario.defaults.link_bandwidth_bps);
            let delay = l.delay_us.unwrap_or(scenario.defaults.link_delay_us);
            let link_id = LinkId(i as u32 + 1);
            for (a, dir) in [(from, LinkDir::Fwd), (to, LinkDir::Rev)] {
                let port = PortId { link: link_id, dir };
                channels.push(Channel::new(a, port, bandwidth, delay));
            }
        }

        // Measurement state for every switch-fed channel.
        let mut ports = BTreeMap::new();
        for (idx, ch) in channels.iter().enumerate() {
            let (kind, decl_idx) = nodes[ch.from_node];
            if kind != NodeKind::Switch {
                continue;
            }
            let decl = &scenario.switches[decl_idx];
            let d = &scenario.defaults;
            let cfg = SwitchConfig {
                link_bandwidth_bps: ch.bandwidth_bps,
                cell_size_bits: scenario.cell_size_bits,
                target_utilization: decl.target_utilization.unwrap_or(d.target_utilization),
                tub_half_width: decl.tub_half_width.unwrap_or(d.tub_half_width),
                averaging_interval_us: decl
                    .averaging_interval_us
                    .unwrap_or(d.averaging_interval_us),
                option: scenario.option,
                becn_option: scenario.becn,
                count_rm_cells: false,
            };
            ports.insert(idx, SwitchPortState::new(cfg)?);
        }

        // Per-VC source state and routing.
        let mut vcs = BTreeMap::new();
        for decl in &scenario.vcs {
            let vc = VcId(decl.id);
            let mut path_channels = Vec::new();
            for pair in decl.path.windows(2) {
                let found = scenario.links.iter().enumerate().find_map(|(i, l)| {
                    if l.from == pair[0] && l.to == pair[1] {
                        Some(2 * i)
                    } else if l.from == pair[1] && l.to == pair[0] {
                        Some(2 * i + 1)
                    } else {
                        None
                    }
                });
                path_channels.push(found.ok_or_else(|| EngineError::MissingLink {
                    vc,
                    from: pair[0].clone(),
                    to: pair[1].clone(),
                })?);
            }
            if path_channels.is_empty() {
                return Err(EngineError::EmptyPath { vc });
            }
            let mut fwd_next = BTreeMap::new();
            for (k, &c) in path_channels.iter().enumerate() {
                fwd_next.insert(c, path_channels.get(k + 1).copied());
            }
            let return_path: Vec<usize> = path_channels.iter().rev().map(|&c| c ^ 1).collect();
            let mut bwd_next = BTreeMap::new();
            for (k, &c) in return_path.iter().enumerate() {
                bwd_next.insert(c, return_path.get(k + 1).copied());
            }

            let access_channel = path_channels[0];
            let peak = link_cell_rate(
                channels[access_channel].bandwidth_bps,
                scenario.cell_size_bits,
            )?;
            let interval = scenario.defaults.source_averaging_interval_us;
            let min = CellRate::measured(1, interval);
            let initial = match decl.initial_rate {
                InitialRate::Peak => peak,
                InitialRate::Min => min,
                InitialRate::CellsPerSecond(v) => CellRate::new(v)?,
            };
            let state = SourceState::new(SourceConfig {
                vc,
                cell_size_bits: scenario.cell_size_bits,
                initial_cell_rate: initial,
                peak_cell_rate: peak,
                min_cell_rate: min,
                averaging_interval_us: interval,
                becn_option: scenario.becn,
                taa_guard: true,
                greedy: matches!(decl.traffic, Traffic::Greedy),
            })?;
            vcs.insert(
                vc,
                VcRuntime {
                    state,
                    access_channel,
                    fwd_next,
                    bwd_next,
                },
            );
        }

        // Initial timers. Scheduling order fixes the tie-break at equal
        // times, so it must stay deterministic: VCs in id order, then ports
        // in channel order, then the sampler.
        let mut queue = EventQueue::new();
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        for (&vc, rt) in &vcs {
            queue.schedule(0.0, Event::CellTimer { vc });
            queue.schedule(
                rt.state.averaging_interval_us(),
                Event::AveragingTimer { vc },
            );
        }
        for decl in &scenario.vcs {
            if let Traffic::Bursts(bursts) = &decl.traffic {
                for b in bursts {
                    queue.schedule(
                        b.at_us,
                        Event::Burst {
                            vc: VcId(decl.id),
                            cells: b.cells,
                        },
                    );
                }
            }
        }
        for (&idx, port) in &ports {
            let interval = port.config().averaging_interval_us;
            let phase = match scenario.timer_phase {
                TimerPhase::Zero => 0.0,
                TimerPhase::Seeded => rng.gen::<f64>() * interval,
            };
            queue.schedule(phase + interval, Event::IntervalTimer { channel: idx });
        }
        let sample_interval_us = scenario.defaults.averaging_interval_us;
        queue.schedule(sample_interval_us, Event::Sample);

        Ok(Simulation {
            cell_size_bits: scenario.cell_size_bits,
            sample_interval_us,
            channels,
            ports,
            vcs,
            queue,
            records: Vec::new(),
            counters: RunCounters::default(),
            rm_observer: None,
            started: false,
            now_us: 0.0,
        })
    }

    /// Registers an observer for RM-cell port visits and deliveries.
    pub fn set_rm_observer(&mut self, observer: impl FnMut(&RmEvent) + 'static) {
        self.rm_observer = Some(Box::new(observer));
    }

    /// Runs all events strictly before `until_us`.
    pub fn run(&mut self, until_us: f64) {
        if until_us > 0.0 && !self.started {
            self.started = true;
            let initial: Vec<(VcId, f64)> = self
                .vcs
                .iter()
                .map(|(&vc, rt)| (vc, rt.state.tcr().per_second()))
                .collect();
            for (vc, rate) in initial {
                self.push_record(0.0, TraceKind::Tcr, Subject::Vc(vc), rate);
            }
        }
        while let Some(t) = self.queue.peek_time() {
            if t.us >= until_us {
                break;
            }
            let (time, event) = self.queue.pop().expect("peeked event vanished");
            self.now_us = time.us;
            self.dispatch(time, event);
        }
        self.now_us = self.now_us.max(until_us);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn counters(&self) -> RunCounters {
        self.counters
    }

    pub fn source(&self, vc: VcId) -> Option<&SourceState> {
        self.vcs.get(&vc).map(|rt| &rt.state)
    }

    pub fn port(&self, port: PortId) -> Option<&SwitchPortState> {
        let idx = self.channels.iter().position(|c| c.port == port)?;
        self.ports.get(&idx)
    }

    /// Largest output queue a channel ever held, in cells.
    pub fn max_queue_cells(&self, port: PortId) -> Option<usize> {
        self.channels
            .iter()
            .find(|c| c.port == port)
            .map(|c| c.max_queue_cells)
    }

    /// Data cells still in flight (queued arrival events).
    pub fn pending_data_cells(&self) -> u64 {
        self.queue
            .events()
            .filter(|e| {
                matches!(
                    e,
                    Event::Arrival {
                        payload: Payload::Data(_),
                        ..
                    }
                )
            })
            .count() as u64
    }

    fn push_record(&mut self, time_us: f64, kind: TraceKind, subject: Subject, value: f64) {
        self.records
            .push(TraceRecord::new(time_us, kind, subject, value));
    }

    /// Puts a cell onto a channel; the arrival lands back in the queue.
    fn send(&mut self, channel: usize, now_us: f64, payload: Payload) {
        let bits = match &payload {
            Payload::Data(cell) => cell.size_bits as f64,
            Payload::Rm(_) => self.cell_size_bits as f64,
        };
        let arrival = self.channels[channel].transmit(now_us, bits);
        self.queue
            .schedule(arrival, Event::Arrival { channel, payload });
    }

    fn dispatch(&mut self, now: SimTime, event: Event) {
        match event {
            Event::CellTimer { vc } => {
                let rt = self.vcs.get_mut(&vc).expect("timer for unknown vc");
                let (cell, delay) = rt.state.on_cell_timer();
                let access = rt.access_channel;
                if let Some(cell) = cell {
                    self.counters.data_cells_injected += 1;
                    self.send(access, now.us, Payload::Data(cell));
                }
                self.queue.schedule(now.us + delay, Event::CellTimer { vc });
            }
            Event::AveragingTimer { vc } => {
                let rt = self.vcs.get_mut(&vc).expect("timer for unknown vc");
                let (rm, delay) = rt.state.on_averaging_timer(now);
                let access = rt.access_channel;
                let measured = rm.ocr.per_second();
                self.counters.rm_cells_emitted += 1;
                self.push_record(now.us, TraceKind::Ocr, Subject::Vc(vc), measured);
                self.send(access, now.us, Payload::Rm(rm));
                self.queue
                    .schedule(now.us + delay, Event::AveragingTimer { vc });
            }
            Event::IntervalTimer { channel } => {
                let port = self
                    .ports
                    .get_mut(&channel)
                    .expect("timer for unknown port");
                let delay = port.on_interval_timer();
                let z = port.load_level();
                let subject = Subject::Link(self.channels[channel].port);
                self.push_record(now.us, TraceKind::Z, subject, z);
                self.queue
                    .schedule(now.us + delay, Event::IntervalTimer { channel });
            }
            Event::Arrival { channel, payload } => match payload {
                Payload::Data(cell) => self.on_data_arrival(channel, now, cell),
                Payload::Rm(cell) => self.on_rm_arrival(channel, now, cell),
            },
            Event::Burst { vc, cells } => {
                let rt = self.vcs.get_mut(&vc).expect("burst for unknown vc");
                rt.state.on_data_from_host(cells);
            }
            Event::Sample => {
                let window_us = self.sample_interval_us;
                for idx in 0..self.channels.len() {
                    let (port, util, queue_cells) = {
                        let ch = &mut self.channels[idx];
                        let bits = ch.serialized_bits - ch.last_sample_bits;
                        ch.last_sample_bits = ch.serialized_bits;
                        let util = bits / (ch.bandwidth_bps * window_us * 1e-6);
                        (ch.port, util, ch.queue_len(now.us) as f64)
                    };
                    self.push_record(now.us, TraceKind::LinkUtil, Subject::Link(port), util);
                    self.push_record(
                        now.us,
                        TraceKind::QueueLen,
                        Subject::Link(port),
                        queue_cells,
                    );
                }
                self.queue.schedule(now.us + window_us, Event::Sample);
            }
        }
    }

    fn on_data_arrival(&mut self, channel: usize, now: SimTime, cell: DataCell) {
        let next = self.vcs[&cell.vc].fwd_next[&channel];
        match next {
            Some(out) => {
                if let Some(port) = self.ports.get_mut(&out) {
                    port.on_data_cell(&cell);
                }
                self.send(out, now.us, Payload::Data(cell));
            }
            None => self.counters.data_cells_delivered += 1,
        }
    }

    fn on_rm_arrival(&mut self, channel: usize, now: SimTime, mut cell: RmCell) {
        match cell.direction {
            RmDirection::Forward => {
                let next = self.vcs[&cell.vc].fwd_next[&channel];
                match next {
                    Some(out) => {
                        let mut becn_copy = None;
                        if let Some(port) = self.ports.get_mut(&out) {
                            let laf_before = cell.laf.value();
                            if let Some(visit) = port.on_rm_cell(&mut cell) {
                                becn_copy = visit.becn_copy;
                                if let Some(watch) = self.rm_observer.as_mut() {
                                    watch(&RmEvent::PortVisit(RmHopObservation {
                                        time_us: now.us,
                                        vc: cell.vc,
                                        seq: cell.seq,
                                        port: self.channels[out].port,
                                        decision: visit.decision,
                                        laf_before,
                                        laf_after: cell.laf.value(),
                                    }));
                                }
                            }
                        }
                        if let Some(copy) = becn_copy {
                            self.counters.becn_cells_emitted += 1;
                            self.send(channel ^ 1, now.us, Payload::Rm(copy));
                        }
                        self.send(out, now.us, Payload::Rm(cell));
                    }
                    None => {
                        // Destination: turn the cell around on the reverse
                        // channel, feedback fields intact.
                        let back = cell.turned_around();
                        self.send(channel ^ 1, now.us, Payload::Rm(back));
                    }
                }
            }
            RmDirection::Backward => {
                let next = self.vcs[&cell.vc].bwd_next[&channel];
                match next {
                    Some(out) => self.send(out, now.us, Payload::Rm(cell)),
                    None => self.deliver_feedback(now, &cell),
                }
            }
        }
    }

    fn deliver_feedback(&mut self, now: SimTime, cell: &RmCell) {
        let (before, after) = {
            let rt = self.vcs.get_mut(&cell.vc).expect("feedback for unknown vc");
            let before = rt.state.tcr().per_second();
            if cell.becn_bit {
                self.counters.becn_cells_delivered += 1;
                rt.state.on_becn_cell(cell);
            } else {
                self.counters.rm_cells_returned += 1;
                rt.state.on_returned_rm_cell(cell);
            }
            (before, rt.state.tcr().per_second())
        };
        if let Some(watch) = self.rm_observer.as_mut() {
            watch(&RmEvent::Delivered {
                time_us: now.us,
                vc: cell.vc,
                seq: cell.seq,
                laf: cell.laf.value(),
                becn: cell.becn_bit,
            });
        }
        self.push_record(
            now.us,
            TraceKind::LafFeedback,
            Subject::Vc(cell.vc),
            cell.laf.value(),
        );
        if after != before {
            self.push_record(now.us, TraceKind::Tcr, Subject::Vc(cell.vc), after);
        }
    }
}

/// Records plus accounting from one finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub counters: RunCounters,
}

/// Builds and runs `scenario` for its declared duration.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, EngineError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run(scenario.duration_us);
    let counters = sim.counters();
    Ok(RunOutput {
        records: sim.into_records(),
        counters,
    })
}
