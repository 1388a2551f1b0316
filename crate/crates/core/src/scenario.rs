//! Scenario descriptions: the line-oriented text format that names the
//! topology (sources, switches, destinations, links), the virtual circuits
//! over it, and the protocol options for a run.
//!
//! ```text
//! [scenario]
//! name = two_source_bottleneck
//! duration_us = 200000
//!
//! [options]
//! fairness = basic
//!
//! [source src1]
//! [switch sw1]
//! [destination dst1]
//!
//! [link a1]
//! from = src1
//! to = sw1
//!
//! [vc 1]
//! path = src1 sw1 dst1
//! initial_cell_rate = peak
//! traffic = greedy
//! ```
//!
//! `#` starts a comment. Links are bidirectional: one declaration carries a
//! forward and a reverse channel. Unset option keys take the defaults below.
//! Parsing collects every problem it can find, not just the first.

use std::fmt;

use thiserror::Error;

use crate::switch::FairnessOption;

pub const DEFAULT_CELL_SIZE_BITS: u32 = 424;
pub const DEFAULT_TARGET_UTILIZATION: f64 = 0.9;
pub const DEFAULT_TUB_HALF_WIDTH: f64 = 0.1;
pub const DEFAULT_AVERAGING_INTERVAL_US: f64 = 1000.0;
pub const DEFAULT_LINK_BANDWIDTH_BPS: f64 = 155.52e6;
/// Engineering default for campus-scale propagation.
pub const LAN_LINK_DELAY_US: f64 = 10.0;
/// Engineering default for wide-area propagation.
pub const WAN_LINK_DELAY_US: f64 = 5000.0;

/// One problem found while parsing or validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioIssue {
    /// 1-based source line, or 0 for whole-scenario problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "scenario: {}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Everything wrong with a scenario text, together.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct ScenarioErrors(pub Vec<ScenarioIssue>);

impl fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerPhase {
    /// All periodic timers start aligned at zero offset.
    Zero,
    /// Switch interval timers start at a seeded random offset within one
    /// interval, breaking measurement lockstep.
    Seeded,
}

impl TimerPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            TimerPhase::Zero => "zero",
            TimerPhase::Seeded => "seeded",
        }
    }
}

/// Option defaults that apply wherever a declaration does not override them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolDefaults {
    pub target_utilization: f64,
    pub tub_half_width: f64,
    /// Switch measurement interval.
    pub averaging_interval_us: f64,
    /// Source measurement interval.
    pub source_averaging_interval_us: f64,
    pub link_bandwidth_bps: f64,
    pub link_delay_us: f64,
}

impl Default for ProtocolDefaults {
    fn default() -> Self {
        ProtocolDefaults {
            target_utilization: DEFAULT_TARGET_UTILIZATION,
            tub_half_width: DEFAULT_TUB_HALF_WIDTH,
            averaging_interval_us: DEFAULT_AVERAGING_INTERVAL_US,
            source_averaging_interval_us: DEFAULT_AVERAGING_INTERVAL_US,
            link_bandwidth_bps: DEFAULT_LINK_BANDWIDTH_BPS,
            link_delay_us: LAN_LINK_DELAY_US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDecl {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDecl {
    pub name: String,
    pub target_utilization: Option<f64>,
    pub tub_half_width: Option<f64>,
    pub averaging_interval_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub name: String,
    pub from: String,
    pub to: String,
    pub bandwidth_bps: Option<f64>,
    pub delay_us: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialRate {
    /// Start at the access link's full cell rate.
    Peak,
    /// Start at the pacing floor.
    Min,
    CellsPerSecond(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub at_us: f64,
    pub cells: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    /// Always has a cell to send.
    Greedy,
    /// Hands the queue bursts of cells at fixed times.
    Bursts(Vec<Burst>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcDecl {
    pub id: u32,
    /// Node names from the source endpoint to the destination endpoint.
    pub path: Vec<String>,
    pub initial_rate: InitialRate,
    pub traffic: Traffic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Switch,
    Destination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub cell_size_bits: u32,
    pub duration_us: f64,
    pub seed: u64,
    pub timer_phase: TimerPhase,
    pub option: FairnessOption,
    pub becn: bool,
    pub defaults: ProtocolDefaults,
    pub sources: Vec<SourceDecl>,
    pub switches: Vec<SwitchDecl>,
    pub destinations: Vec<String>,
    pub links: Vec<LinkDecl>,
    pub vcs: Vec<VcDecl>,
}

impl Scenario {
    pub fn node_kind(&self, name: &str) -> Option<NodeKind> {
        if self.sources.iter().any(|s| s.name == name) {
            Some(NodeKind::Source)
        } else if self.switches.iter().any(|s| s.name == name) {
            Some(NodeKind::Switch)
        } else if self.destinations.iter().any(|d| d == name) {
            Some(NodeKind::Destination)
        } else {
            None
        }
    }

    pub fn switch_decl(&self, name: &str) -> Option<&SwitchDecl> {
        self.switches.iter().find(|s| s.name == name)
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&LinkDecl> {
        self.links
            .iter()
            .find(|l| (l.from == a && l.to == b) || (l.from == b && l.to == a))
    }

    /// Canonical text form; [`parse`] of it reproduces the scenario exactly.
    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "[scenario]").unwrap();
        writeln!(w, "name = {}", self.name).unwrap();
        writeln!(w, "cell_size_bits = {}", self.cell_size_bits).unwrap();
        writeln!(w, "duration_us = {}", self.duration_us).unwrap();
        writeln!(w, "seed = {}", self.seed).unwrap();
        writeln!(w, "timer_phase = {}", self.timer_phase.as_str()).unwrap();
        writeln!(w).unwrap();
        writeln!(w, "[options]").unwrap();
        writeln!(w, "fairness = {}", self.option.as_str()).unwrap();
        writeln!(w, "becn = {}", if self.becn { "on" } else { "off" }).unwrap();
        let d = &self.defaults;
        writeln!(w, "target_utilization = {}", d.target_utilization).unwrap();
        writeln!(w, "tub_half_width = {}", d.tub_half_width).unwrap();
        writeln!(w, "averaging_interval_us = {}", d.averaging_interval_us).unwrap();
        writeln!(
            w,
            "source_averaging_interval_us = {}",
            d.source_averaging_interval_us
        )
        .unwrap();
        writeln!(w, "link_bandwidth_bps = {}", d.link_bandwidth_bps).unwrap();
        writeln!(w, "link_delay_us = {}", d.link_delay_us).unwrap();
        for s in &self.sources {
            writeln!(w, "\n[source {}]", s.name).unwrap();
        }
        for s in &self.switches {
            writeln!(w, "\n[switch {}]", s.name).unwrap();
            if let Some(u) = s.target_utilization {
                writeln!(w, "target_utilization = {u}").unwrap();
            }
            if let Some(h) = s.tub_half_width {
                writeln!(w, "tub_half_width = {h}").unwrap();
            }
            if let Some(i) = s.averaging_interval_us {
                writeln!(w, "averaging_interval_us = {i}").unwrap();
            }
        }
        for name in &self.destinations {
            writeln!(w, "\n[destination {name}]").unwrap();
        }
        for l in &self.links {
            writeln!(w, "\n[link {}]", l.name).unwrap();
            writeln!(w, "from = {}", l.from).unwrap();
            writeln!(w, "to = {}", l.to).unwrap();
            if let Some(b) = l.bandwidth_bps {
                writeln!(w, "bandwidth_bps = {b}").unwrap();
            }
            if let Some(delay) = l.delay_us {
                writeln!(w, "delay_us = {delay}").unwrap();
            }
        }
        for vc in &self.vcs {
            writeln!(w, "\n[vc {}]", vc.id).unwrap();
            writeln!(w, "path = {}", vc.path.join(" ")).unwrap();
            let rate = match vc.initial_rate {
                InitialRate::Peak => "peak".to_string(),
                InitialRate::Min => "min".to_string(),
                InitialRate::CellsPerSecond(r) => r.to_string(),
            };
            writeln!(w, "initial_cell_rate = {rate}").unwrap();
            let traffic = match &vc.traffic {
                Traffic::Greedy => "greedy".to_string(),
                Traffic::Bursts(bursts) => {
                    let items: Vec<String> = bursts
                        .iter()
                        .map(|b| format!("{}:{}", b.at_us, b.cells))
                        .collect();
                    format!("bursts {}", items.join(","))
                }
            };
            writeln!(w, "traffic = {traffic}").unwrap();
        }
        out
    }
}

/// Parses and validates a scenario text, reporting every problem found.
pub fn parse(text: &str) -> Result<Scenario, ScenarioErrors> {
    Parser::default().run(text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Scenario,
    Options,
    Source,
    Switch(usize),
    Destination,
    Link(usize),
    Vc(usize),
    Unknown,
}

#[derive(Default)]
struct Parser {
    issues: Vec<ScenarioIssue>,
    name: Option<String>,
    cell_size_bits: Option<u32>,
    duration_us: Option<f64>,
    seed: Option<u64>,
    timer_phase: Option<TimerPhase>,
    option: Option<FairnessOption>,
    becn: Option<bool>,
    defaults: Option<ProtocolDefaults>,
    sources: Vec<SourceDecl>,
    switches: Vec<SwitchDecl>,
    destinations: Vec<String>,
    links: Vec<LinkDecl>,
    vcs: Vec<VcDecl>,
}

impl Parser {
    fn issue(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(ScenarioIssue {
            line,
            message: message.into(),
        });
    }

    fn run(mut self, text: &str) -> Result<Scenario, ScenarioErrors> {
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = self.open_section(line_no, line);
            } else if let Some((key, value)) = line.split_once('=') {
                self.key_value(line_no, section, key.trim(), value.trim());
            } else {
                self.issue(line_no, format!("expected `key = value`, got {line:?}"));
            }
        }
        self.finish()
    }

    fn open_section(&mut self, line_no: usize, line: &str) -> Section {
        let inner = match line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            Some(inner) => inner.trim(),
            None => {
                self.issue(line_no, format!("malformed section header {line:?}"));
                return Section::Unknown;
            }
        };
        let mut words = inner.split_whitespace();
        let kind = words.next().unwrap_or("");
        let arg = words.next();
        if words.next().is_some() {
            self.issue(
                line_no,
                format!("too many words in section header {line:?}"),
            );
            return Section::Unknown;
        }
        match (kind, arg) {
            ("scenario", None) => Section::Scenario,
            ("options", None) => Section::Options,
            ("source", Some(name)) => {
                self.declare_node(line_no, name);
                self.sources.push(SourceDecl {
                    name: name.to_string(),
                });
                Section::Source
            }
            ("switch", Some(name)) => {
                self.declare_node(line_no, name);
                self.switches.push(SwitchDecl {
                    name: name.to_string(),
                    target_utilization: None,
                    tub_half_width: None,
                    averaging_interval_us: None,
                });
                Section::Switch(self.switches.len() - 1)
            }
            ("destination", Some(name)) => {
                self.declare_node(line_no, name);
                self.destinations.push(name.to_string());
                Section::Destination
            }
            ("link", Some(name)) => {
                if self.links.iter().any(|l| l.name == name) {
                    self.issue(line_no, format!("duplicate link name {name:?}"));
                }
                self.links.push(LinkDecl {
                    name: name.to_string(),
                    from: String::new(),
                    to: String::new(),
                    bandwidth_bps: None,
                    delay_us: None,
                });
                Section::Link(self.links.len() - 1)
            }
            ("vc", Some(id)) => match id.parse::<u32>() {
                Ok(id) => {
                    if self.vcs.iter().any(|vc| vc.id == id) {
                        self.issue(line_no, format!("duplicate vc id {id}"));
                    }
                    self.vcs.push(VcDecl {
                        id,
                        path: Vec::new(),
                        initial_rate: InitialRate::Peak,
                        traffic: Traffic::Greedy,
                    });
                    Section::Vc(self.vcs.len() - 1)
                }
                Err(_) => {
                    self.issue(line_no, format!("vc id must be a number, got {id:?}"));
                    Section::Unknown
                }
            },
            ("scenario" | "options", Some(_)) => {
                self.issue(line_no, format!("section [{kind}] takes no name"));
                Section::Unknown
            }
            ("source" | "switch" | "destination" | "link" | "vc", None) => {
                self.issue(line_no, format!("section [{kind}] needs a name"));
                Section::Unknown
            }
            _ => {
                self.issue(line_no, format!("unknown section kind {kind:?}"));
                Section::Unknown
            }
        }
    }

    fn declare_node(&mut self, line_no: usize, name: &str) {
        let taken = self.sources.iter().any(|s| s.name == name)
            || self.switches.iter().any(|s| s.name == name)
            || self.destinations.iter().any(|d| d == name);
        if taken {
            self.issue(line_no, format!("duplicate node name {name:?}"));
        }
    }

    fn key_value(&mut self, line_no: usize, section: Section, key: &str, value: &str) {
        match section {
            Section::None => self.issue(line_no, "key before any section header"),
            Section::Unknown => {} // the section header already got an issue
            Section::Scenario => self.scenario_key(line_no, key, value),
            Section::Options => self.options_key(line_no, key, value),
            Section::Source | Section::Destination => {
                self.issue(line_no, format!("unknown key {key:?} in this section"));
            }
            Section::Switch(idx) => self.switch_key(line_no, idx, key, value),
            Section::Link(idx) => self.link_key(line_no, idx, key, value),
            Section::Vc(idx) => self.vc_key(line_no, idx, key, value),
        }
    }

    fn scenario_key(&mut self, line_no: usize, key: &str, value: &str) {
        match key {
            "name" => self.name = Some(value.to_string()),
            "cell_size_bits" => {
                if let Some(v) = self.parse_num::<u32>(line_no, key, value) {
                    if v == 0 {
                        self.issue(line_no, "cell_size_bits must be positive");
                    }
                    self.cell_size_bits = Some(v);
                }
            }
            "duration_us" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    if !(v > 0.0 && v.is_finite()) {
                        self.issue(line_no, "duration_us must be positive");
                    }
                    self.duration_us = Some(v);
                }
            }
            "seed" => self.seed = self.parse_num::<u64>(line_no, key, value),
            "timer_phase" => {
                self.timer_phase = match value {
                    "zero" => Some(TimerPhase::Zero),
                    "seeded" => Some(TimerPhase::Seeded),
                    other => {
                        self.issue(
                            line_no,
                            format!("timer_phase must be zero or seeded, got {other:?}"),
                        );
                        None
                    }
                }
            }
            _ => self.issue(line_no, format!("unknown key {key:?} in [scenario]")),
        }
    }

    fn options_key(&mut self, line_no: usize, key: &str, value: &str) {
        let d = self.defaults.get_or_insert_with(ProtocolDefaults::default);
        match key {
            "fairness" => {
                self.option = match value {
                    "basic" => Some(FairnessOption::Basic),
                    "aggressive" => Some(FairnessOption::Aggressive),
                    "precise" => Some(FairnessOption::Precise),
                    other => {
                        self.issue(
                            line_no,
                            format!("fairness must be basic, aggressive or precise, got {other:?}"),
                        );
                        None
                    }
                }
            }
            "becn" => {
                self.becn = match value {
                    "on" => Some(true),
                    "off" => Some(false),
                    other => {
                        self.issue(line_no, format!("becn must be on or off, got {other:?}"));
                        None
                    }
                }
            }
            "target_utilization" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.target_utilization = v;
                    check_utilization(line_no, v, &mut self.issues);
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            "tub_half_width" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.tub_half_width = v;
                    check_half_width(line_no, v, &mut self.issues);
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            "averaging_interval_us" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.averaging_interval_us = v;
                    check_interval(line_no, key, v, &mut self.issues);
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            "source_averaging_interval_us" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.source_averaging_interval_us = v;
                    check_interval(line_no, key, v, &mut self.issues);
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            "link_bandwidth_bps" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.link_bandwidth_bps = v;
                    if !(v > 0.0 && v.is_finite()) {
                        self.issues.push(ScenarioIssue {
                            line: line_no,
                            message: "link_bandwidth_bps must be positive".into(),
                        });
                    }
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            "link_delay_us" => {
                if let Ok(v) = value.parse::<f64>() {
                    d.link_delay_us = v;
                    if !(v >= 0.0 && v.is_finite()) {
                        self.issues.push(ScenarioIssue {
                            line: line_no,
                            message: "link_delay_us must be non-negative".into(),
                        });
                    }
                } else {
                    self.issue(line_no, format!("bad number for {key}: {value:?}"));
                }
            }
            _ => self.issue(line_no, format!("unknown key {key:?} in [options]")),
        }
    }

    fn switch_key(&mut self, line_no: usize, idx: usize, key: &str, value: &str) {
        match key {
            "target_utilization" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    check_utilization(line_no, v, &mut self.issues);
                    self.switches[idx].target_utilization = Some(v);
                }
            }
            "tub_half_width" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    check_half_width(line_no, v, &mut self.issues);
                    self.switches[idx].tub_half_width = Some(v);
                }
            }
            "averaging_interval_us" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    check_interval(line_no, key, v, &mut self.issues);
                    self.switches[idx].averaging_interval_us = Some(v);
                }
            }
            _ => self.issue(line_no, format!("unknown key {key:?} in [switch]")),
        }
    }

    fn link_key(&mut self, line_no: usize, idx: usize, key: &str, value: &str) {
        match key {
            "from" => self.links[idx].from = value.to_string(),
            "to" => self.links[idx].to = value.to_string(),
            "bandwidth_bps" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    if !(v > 0.0 && v.is_finite()) {
                        self.issue(line_no, "bandwidth_bps must be positive");
                    }
                    self.links[idx].bandwidth_bps = Some(v);
                }
            }
            "delay_us" => {
                if let Some(v) = self.parse_num::<f64>(line_no, key, value) {
                    if !(v >= 0.0 && v.is_finite()) {
                        self.issue(line_no, "delay_us must be non-negative");
                    }
                    self.links[idx].delay_us = Some(v);
                }
            }
            _ => self.issue(line_no, format!("unknown key {key:?} in [link]")),
        }
    }

    fn vc_key(&mut self, line_no: usize, idx: usize, key: &str, value: &str) {
        match key {
            "path" => {
                self.vcs[idx].path = value.split_whitespace().map(str::to_string).collect();
            }
            "initial_cell_rate" => {
                self.vcs[idx].initial_rate = match value {
                    "peak" => InitialRate::Peak,
                    "min" => InitialRate::Min,
                    number => match number.parse::<f64>() {
                        Ok(v) if v > 0.0 && v.is_finite() => InitialRate::CellsPerSecond(v),
                        _ => {
                            self.issue(
                                line_no,
                                format!(
                                    "initial_cell_rate must be peak, min or a positive \
                                     cells/s value, got {value:?}"
                                ),
                            );
                            InitialRate::Peak
                        }
                    },
                }
            }
            "traffic" => {
                if value == "greedy" {
                    self.vcs[idx].traffic = Traffic::Greedy;
                } else if let Some(list) = value.strip_prefix("bursts") {
                    let mut bursts = Vec::new();
                    for item in list.trim().split(',') {
                        match item
                            .split_once(':')
                            .map(|(t, n)| (t.trim().parse::<f64>(), n.trim().parse::<u64>()))
                        {
                            Some((Ok(at_us), Ok(cells)))
                                if at_us >= 0.0 && at_us.is_finite() && cells > 0 =>
                            {
                                bursts.push(Burst { at_us, cells });
                            }
                            _ => self.issue(
                                line_no,
                                format!("bad burst {item:?}, expected time_us:cells"),
                            ),
                        }
                    }
                    self.vcs[idx].traffic = Traffic::Bursts(bursts);
                } else {
                    self.issue(
                        line_no,
                        format!("traffic must be greedy or bursts t:n,..., got {value:?}"),
                    );
                }
            }
            _ => self.issue(line_no, format!("unknown key {key:?} in [vc]")),
        }
    }

    fn parse_num<T: std::str::FromStr>(
        &mut self,
        line_no: usize,
        key: &str,
        value: &str,
    ) -> Option<T> {
        match value.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issue(line_no, format!("bad number for {key}: {value:?}"));
                None
            }
        }
    }

    fn finish(mut self) -> Result<Scenario, ScenarioErrors> {
        let scenario = Scenario {
            name: self.name.clone().unwrap_or_default(),
            cell_size_bits: self.cell_size_bits.unwrap_or(DEFAULT_CELL_SIZE_BITS),
            duration_us: self.duration_us.unwrap_or(0.0),
            seed: self.seed.unwrap_or(1),
            timer_phase: self.timer_phase.unwrap_or(TimerPhase::Zero),
            option: self.option.unwrap_or(FairnessOption::Basic),
            becn: self.becn.unwrap_or(false),
            defaults: self.defaults.clone().unwrap_or_default(),
            sources: self.sources.clone(),
            switches: self.switches.clone(),
            destinations: self.destinations.clone(),
            links: self.links.clone(),
            vcs: self.vcs.clone(),
        };
        if self.name.is_none() {
            self.issue(0, "missing `name` in [scenario]");
        }
        if self.duration_us.is_none() {
            self.issue(0, "missing `duration_us` in [scenario]");
        }
        self.check_topology(&scenario);
        if self.issues.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioErrors(self.issues))
        }
    }

    fn check_topology(&mut self, s: &Scenario) {
        for link in &s.links {
            for end in [&link.from, &link.to] {
                if end.is_empty() {
                    self.issue(0, format!("link {:?} is missing from/to", link.name));
                } else if s.node_kind(end).is_none() {
                    self.issue(
                        0,
                        format!("link {:?} names unknown node {end:?}", link.name),
                    );
                }
            }
            if !link.from.is_empty() && link.from == link.to {
                self.issue(0, format!("link {:?} joins a node to itself", link.name));
            }
        }
        if s.vcs.is_empty() {
            self.issue(0, "scenario declares no VCs");
        }
        for vc in &s.vcs {
            if vc.path.len() < 2 {
                self.issue(0, format!("vc {} path needs at least two nodes", vc.id));
                continue;
            }
            let mut broken = false;
            for name in &vc.path {
                if s.node_kind(name).is_none() {
                    self.issue(0, format!("vc {} path names unknown node {name:?}", vc.id));
                    broken = true;
                }
            }
            if broken {
                continue;
            }
            if s.node_kind(&vc.path[0]) != Some(NodeKind::Source) {
                self.issue(0, format!("vc {} path must start at a source", vc.id));
            }
            if s.node_kind(vc.path.last().unwrap()) != Some(NodeKind::Destination) {
                self.issue(0, format!("vc {} path must end at a destination", vc.id));
            }
            for name in &vc.path[1..vc.path.len() - 1] {
                if s.node_kind(name) != Some(NodeKind::Switch) {
                    self.issue(
                        0,
                        format!("vc {} path crosses non-switch node {name:?}", vc.id),
                    );
                }
            }
            for window in vc.path.windows(2) {
                if s.link_between(&window[0], &window[1]).is_none() {
                    self.issue(
                        0,
                        format!(
                            "vc {} path hop {:?} -> {:?} has no declared link",
                            vc.id, window[0], window[1]
                        ),
                    );
                }
            }
            let mut seen = std::collections::BTreeSet::new();
            for name in &vc.path {
                if !seen.insert(name) {
                    self.issue(0, format!("vc {} path revisits node {name:?}", vc.id));
                }
            }
        }
    }
}

fn check_utilization(line: usize, v: f64, issues: &mut Vec<ScenarioIssue>) {
    if !(v > 0.0 && v < 1.0) {
        issues.push(ScenarioIssue {
            line,
            message: format!("target_utilization must lie in (0, 1), got {v}"),
        });
    }
}

fn check_half_width(line: usize, v: f64, issues: &mut Vec<ScenarioIssue>) {
    if !(v > 0.0 && v < 0.5) {
        issues.push(ScenarioIssue {
            line,
            message: format!("tub_half_width must lie in (0, 0.5), got {v}"),
        });
    }
}

fn check_interval(line: usize, key: &str, v: f64, issues: &mut Vec<ScenarioIssue>) {
    if !(v > 0.0 && v.is_finite()) {
        issues.push(ScenarioIssue {
            line,
            message: format!("{key} must be positive, got {v}"),
        });
    }
}

/// Scenarios compiled into the crate.
pub mod bundled {
    /// Four sources over a two-bottleneck chain; one VC crosses both
    /// bottlenecks and is limited upstream, freeing downstream capacity.
    pub const UPSTREAM_BOTTLENECK: &str = include_str!("../scenarios/upstream_bottleneck.scn");
    /// Two sources into one bottleneck link: the minimal fairness scenario.
    pub const TWO_SOURCE_BOTTLENECK: &str = include_str!("../scenarios/two_source_bottleneck.scn");
    /// One source, one switch: the smallest closed loop.
    pub const SINGLE_VC: &str = include_str!("../scenarios/single_vc.scn");

    pub fn all() -> [(&'static str, &'static str); 3] {
        [
            ("upstream_bottleneck", UPSTREAM_BOTTLENECK),
            ("two_source_bottleneck", TWO_SOURCE_BOTTLENECK),
            ("single_vc", SINGLE_VC),
        ]
    }

    pub fn named(name: &str) -> Option<&'static str> {
        all()
            .into_iter()
            .find_map(|(n, text)| (n == name).then_some(text))
    }
}
