//! Hierarchical power-state-machine device model.
//!
//! A device is a tree of regions and states. Every region holds a set of
//! mutually exclusive states, exactly one of which is active while the
//! region's parent state is active. A composite state owns one or more
//! concurrent regions. Power is additive: the device draws the sum of the
//! power functions of all active states, so a composite state's function only
//! covers its own constant share.
//!
//! Events are broadcast: every active region with a transition for the event
//! fires it in the same step.
//!
//! The text format is documented in `docs/model-format.md`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use log::warn;

use crate::error::{Error, Result};
use crate::lexer::{is_ident, Cursor, Tok};
use crate::trace::Event;

/// Parameter environment: parameter name to numeric value.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerKind {
    Constant,
    Affine,
}

/// Power drawn in a state: `base + Σ coefficient × parameter`.
///
/// Values are stored in milliwatts, matching the model file, so that a model
/// survives a text round-trip bit for bit. [`PowerFunction::evaluate`] returns
/// watts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerFunction {
    base_mw: f64,
    coefficients_mw: BTreeMap<String, f64>,
}

impl PowerFunction {
    pub fn constant(base_mw: f64) -> Self {
        Self {
            base_mw,
            coefficients_mw: BTreeMap::new(),
        }
    }

    pub fn affine(base_mw: f64, coefficients_mw: BTreeMap<String, f64>) -> Self {
        Self {
            base_mw,
            coefficients_mw,
        }
    }

    pub fn kind(&self) -> PowerKind {
        if self.coefficients_mw.is_empty() {
            PowerKind::Constant
        } else {
            PowerKind::Affine
        }
    }

    pub fn base_mw(&self) -> f64 {
        self.base_mw
    }

    pub fn coefficients_mw(&self) -> &BTreeMap<String, f64> {
        &self.coefficients_mw
    }

    /// Evaluates the function in watts. Parameters missing from `params`
    /// count as zero. Negative results are clamped to zero.
    pub fn evaluate(&self, params: &Params) -> f64 {
        let mw = self.coefficients_mw.iter().fold(self.base_mw, |acc, (name, c)| {
            acc + c * params.get(name).copied().unwrap_or(0.0)
        });
        if mw < 0.0 {
            warn!("power function evaluated to {mw} mW, clamping to 0");
            0.0
        } else {
            mw / 1000.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub event: String,
    /// Parameter assignments applied when the transition fires.
    pub updates: Params,
}

impl Transition {
    pub fn new(event: impl Into<String>, from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            event: event.into(),
            updates: Params::new(),
        }
    }

    pub fn with_update(mut self, param: impl Into<String>, value: f64) -> Self {
        self.updates.insert(param.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateNode {
    pub name: String,
    pub power: PowerFunction,
    pub initial: bool,
    /// Concurrent sub-regions; empty for an atomic state.
    pub regions: Vec<Region>,
}

impl StateNode {
    pub fn atomic(name: impl Into<String>, power: PowerFunction) -> Self {
        Self {
            name: name.into(),
            power,
            initial: false,
            regions: Vec::new(),
        }
    }

    pub fn initial(mut self) -> Self {
        self.initial = true;
        self
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.regions.push(region);
        self
    }

    pub fn is_composite(&self) -> bool {
        !self.regions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    pub name: String,
    pub states: Vec<StateNode>,
    pub transitions: Vec<Transition>,
}

impl Region {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            states: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn with_state(mut self, state: StateNode) -> Self {
        self.states.push(state);
        self
    }

    pub fn with_transition(mut self, transition: Transition) -> Self {
        self.transitions.push(transition);
        self
    }
}

/// Active states (by qualified name) plus the current parameter environment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Configuration {
    pub active: BTreeSet<String>,
    pub params: Params,
}

impl Configuration {
    pub fn is_active(&self, qualified: &str) -> bool {
        self.active.contains(qualified)
    }
}

type StateId = usize;
type RegionId = usize;

#[derive(Debug, Clone)]
struct FlatState {
    qname: String,
    regions: Vec<RegionId>,
}

#[derive(Debug, Clone)]
struct FlatTransition {
    to: StateId,
    updates: Params,
}

#[derive(Debug, Clone)]
struct FlatRegion {
    parent: Option<StateId>,
    states: Vec<StateId>,
    initial: StateId,
    transitions: HashMap<(StateId, String), FlatTransition>,
}

/// Flattened view of the tree; regions and states are numbered in preorder.
#[derive(Debug, Clone, Default)]
struct Index {
    states: Vec<FlatState>,
    powers: Vec<PowerFunction>,
    regions: Vec<FlatRegion>,
    by_name: HashMap<String, StateId>,
}

/// A validated device model. Immutable once built.
#[derive(Debug, Clone)]
pub struct PowerModel {
    root: Region,
    events: BTreeSet<String>,
    params: Params,
    index: Index,
}

impl PartialEq for PowerModel {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.events == other.events && self.params == other.params
    }
}

impl PowerModel {
    /// Validates and indexes a model tree.
    pub fn new(root: Region, events: BTreeSet<String>, params: Params) -> Result<Self> {
        let mut index = Index::default();
        let mut builder = IndexBuilder {
            index: &mut index,
            events: &events,
            params: &params,
        };
        builder.region(&root, None, "")?;
        Ok(Self {
            root,
            events,
            params,
            index,
        })
    }

    /// Parses and validates a model file.
    pub fn parse(text: &str) -> Result<Self> {
        parse_model(text)
    }

    pub fn root(&self) -> &Region {
        &self.root
    }

    pub fn events(&self) -> &BTreeSet<String> {
        &self.events
    }

    /// Declared parameters with their default values.
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn declares_event(&self, name: &str) -> bool {
        self.events.contains(name)
    }

    /// Qualified names of all states in preorder.
    pub fn qualified_names(&self) -> impl Iterator<Item = &str> {
        self.index.states.iter().map(|s| s.qname.as_str())
    }

    pub fn state_power(&self, qualified: &str) -> Option<&PowerFunction> {
        self.index.by_name.get(qualified).map(|&id| &self.index.powers[id])
    }

    pub fn initial_configuration(&self) -> Configuration {
        let mut active = BTreeSet::new();
        let root = &self.index.regions[0];
        self.enter(root.initial, &mut active);
        Configuration {
            active: active
                .into_iter()
                .map(|id| self.index.states[id].qname.clone())
                .collect(),
            params: self.params.clone(),
        }
    }

    fn enter(&self, state: StateId, active: &mut BTreeSet<StateId>) {
        active.insert(state);
        for &r in &self.index.states[state].regions {
            self.enter(self.index.regions[r].initial, active);
        }
    }

    fn exit(&self, state: StateId, active: &mut BTreeSet<StateId>, exited: &mut BTreeSet<StateId>) {
        active.remove(&state);
        exited.insert(state);
        for &r in &self.index.states[state].regions {
            for &s in &self.index.regions[r].states {
                if active.contains(&s) {
                    self.exit(s, active, exited);
                }
            }
        }
    }

    fn ids(&self, config: &Configuration) -> Result<BTreeSet<StateId>> {
        config
            .active
            .iter()
            .map(|name| {
                self.index
                    .by_name
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown state `{name}` in configuration")))
            })
            .collect()
    }

    /// Broadcasts `event` to every active region.
    ///
    /// Firing transitions are selected from the configuration before the
    /// event. They are then applied outermost first; a transition whose source
    /// state was left by an enclosing transition in the same step is dropped.
    /// Parameter updates of fired transitions are applied in that order, then
    /// the event's own parameter bindings.
    pub fn apply_event(&self, config: &Configuration, event: &Event) -> Result<Configuration> {
        if !self.events.contains(&event.name) {
            return Err(Error::UndeclaredEvent {
                name: event.name.clone(),
                t: Some(event.t),
            });
        }
        if let Some(p) = event.params.keys().find(|p| !self.params.contains_key(*p)) {
            return Err(Error::UndeclaredParameter {
                name: p.clone(),
                t: Some(event.t),
            });
        }
        let before = self.ids(config)?;
        let mut firing = Vec::new();
        for region in &self.index.regions {
            if region.parent.is_some_and(|p| !before.contains(&p)) {
                continue;
            }
            let Some(&current) = region.states.iter().find(|s| before.contains(s)) else {
                continue;
            };
            if let Some(t) = region.transitions.get(&(current, event.name.clone())) {
                firing.push((current, t));
            }
        }

        let mut active = before;
        let mut exited = BTreeSet::new();
        let mut params = config.params.clone();
        for (from, t) in firing {
            if exited.contains(&from) || !active.contains(&from) {
                continue;
            }
            self.exit(from, &mut active, &mut exited);
            self.enter(t.to, &mut active);
            params.extend(t.updates.iter().map(|(k, v)| (k.clone(), *v)));
        }
        params.extend(event.params.iter().map(|(k, v)| (k.clone(), *v)));

        Ok(Configuration {
            active: active
                .into_iter()
                .map(|id| self.index.states[id].qname.clone())
                .collect(),
            params,
        })
    }

    /// Total modeled power in watts: the sum of every active state's power
    /// function at the configuration's parameters. Parameters absent from the
    /// configuration take their declared defaults.
    pub fn power_at(&self, config: &Configuration) -> f64 {
        let mut params = self.params.clone();
        params.extend(config.params.iter().map(|(k, v)| (k.clone(), *v)));
        config
            .active
            .iter()
            .filter_map(|name| self.state_power(name))
            .map(|f| f.evaluate(&params))
            .sum()
    }

    /// Checks the single-active-per-region invariant for `config`.
    pub fn check_configuration(&self, config: &Configuration) -> Result<()> {
        let active = self.ids(config)?;
        for (ri, region) in self.index.regions.iter().enumerate() {
            let parent_active = region.parent.is_none_or(|p| active.contains(&p));
            let n = region.states.iter().filter(|s| active.contains(s)).count();
            let ok = if parent_active { n == 1 } else { n == 0 };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "region #{ri} has {n} active states (parent active: {parent_active})"
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the model text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

struct IndexBuilder<'a> {
    index: &'a mut Index,
    events: &'a BTreeSet<String>,
    params: &'a Params,
}

impl IndexBuilder<'_> {
    fn region(&mut self, region: &Region, parent: Option<StateId>, prefix: &str) -> Result<RegionId> {
        let label = if prefix.is_empty() {
            region.name.clone()
        } else {
            format!("{prefix}.{}", region.name)
        };
        if !is_ident(&region.name) {
            return Err(Error::InvalidModel(format!("invalid region name `{}`", region.name)));
        }
        let initials: Vec<_> = region.states.iter().filter(|s| s.initial).collect();
        match initials.len() {
            0 => {
                return Err(Error::InvalidModel(format!(
                    "region `{label}` has no initial state"
                )))
            }
            1 => {}
            _ => {
                return Err(Error::InvalidModel(format!(
                    "region `{label}` has more than one initial state"
                )))
            }
        }

        let rid = self.index.regions.len();
        self.index.regions.push(FlatRegion {
            parent,
            states: Vec::new(),
            initial: 0,
            transitions: HashMap::new(),
        });

        let mut local: HashMap<&str, StateId> = HashMap::new();
        for state in &region.states {
            if !is_ident(&state.name) {
                return Err(Error::InvalidModel(format!("invalid state name `{}`", state.name)));
            }
            if local.contains_key(state.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate state `{}` in region `{label}`",
                    state.name
                )));
            }
            if state.power.base_mw < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "state `{}` has negative base power",
                    state.name
                )));
            }
            if let Some(p) = state.power.coefficients_mw.keys().find(|p| !self.params.contains_key(*p)) {
                return Err(Error::InvalidModel(format!(
                    "state `{}` uses undeclared parameter `{p}`",
                    state.name
                )));
            }
            let qname = if parent.is_none() {
                state.name.clone()
            } else {
                format!("{label}.{}", state.name)
            };
            let sid = self.index.states.len();
            self.index.states.push(FlatState {
                qname: qname.clone(),
                regions: Vec::new(),
            });
            self.index.powers.push(state.power.clone());
            if self.index.by_name.insert(qname.clone(), sid).is_some() {
                return Err(Error::InvalidModel(format!("duplicate qualified state name `{qname}`")));
            }
            local.insert(&state.name, sid);
            self.index.regions[rid].states.push(sid);
            if state.initial {
                self.index.regions[rid].initial = sid;
            }

            let mut region_names = BTreeSet::new();
            for sub in &state.regions {
                if !region_names.insert(sub.name.as_str()) {
                    return Err(Error::InvalidModel(format!(
                        "duplicate region `{}` in state `{qname}`",
                        sub.name
                    )));
                }
                let sub_id = self.region(sub, Some(sid), &qname)?;
                self.index.states[sid].regions.push(sub_id);
            }
        }

        for t in &region.transitions {
            if !self.events.contains(&t.event) {
                return Err(Error::UndeclaredEvent {
                    name: t.event.clone(),
                    t: None,
                });
            }
            if let Some(p) = t.updates.keys().find(|p| !self.params.contains_key(*p)) {
                return Err(Error::UndeclaredParameter {
                    name: p.clone(),
                    t: None,
                });
            }
            let lookup = |name: &str| {
                local.get(name).copied().ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "transition on `{}` references `{name}`, which is not a state of region `{label}`",
                        t.event
                    ))
                })
            };
            let from = lookup(&t.from)?;
            let to = lookup(&t.to)?;
            let flat = FlatTransition {
                to,
                updates: t.updates.clone(),
            };
            if self.index.regions[rid]
                .transitions
                .insert((from, t.event.clone()), flat)
                .is_some()
            {
                return Err(Error::InvalidModel(format!(
                    "nondeterministic transition: `{}` has two transitions on `{}` in region `{label}`",
                    t.from, t.event
                )));
            }
        }
        Ok(rid)
    }
}

fn parse_model(text: &str) -> Result<PowerModel> {
    let mut cur = Cursor::new(text)?;
    let mut events = BTreeSet::new();
    let mut params = Params::new();
    let mut root: Option<Region> = None;

    while !cur.at_end() {
        let (line, column) = cur.position();
        if cur.eat_keyword("event") {
            loop {
                let (line, column) = cur.position();
                let name = cur.ident("event name")?;
                if !events.insert(name.clone()) {
                    return Err(Error::Parse {
                        line,
                        column,
                        message: format!("event `{name}` declared twice"),
                    });
                }
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
        } else if cur.eat_keyword("param") {
            let name = cur.ident("parameter name")?;
            cur.expect(Tok::Eq)?;
            let value = cur.number("parameter default")?;
            if params.insert(name.clone(), value).is_some() {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("parameter `{name}` declared twice"),
                });
            }
        } else if cur.eat_keyword("region") {
            if root.is_some() {
                return Err(Error::Parse {
                    line,
                    column,
                    message: "a model has exactly one top-level region".into(),
                });
            }
            root = Some(parse_region_body(&mut cur)?);
        } else {
            return Err(cur.error_here("expected `event`, `param` or `region`"));
        }
    }
    let root = root.ok_or_else(|| cur.error_here("model has no top-level region"))?;
    PowerModel::new(root, events, params)
}

/// Parses `NAME { ... }` after the `region` keyword.
fn parse_region_body(cur: &mut Cursor) -> Result<Region> {
    let mut region = Region::new(cur.ident("region name")?);
    cur.expect(Tok::LBrace)?;
    loop {
        if cur.eat(&Tok::RBrace) {
            return Ok(region);
        }
        if cur.eat_keyword("state") {
            region.states.push(parse_state(cur)?);
        } else if cur.eat_keyword("on") {
            let event = cur.ident("event name")?;
            cur.expect(Tok::Colon)?;
            let from = cur.ident("source state")?;
            cur.expect(Tok::Arrow)?;
            let to = cur.ident("target state")?;
            let mut t = Transition::new(event, from, to);
            if cur.eat_keyword("set") {
                loop {
                    let name = cur.ident("parameter name")?;
                    cur.expect(Tok::Eq)?;
                    let value = cur.number("parameter value")?;
                    t.updates.insert(name, value);
                    if !cur.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            region.transitions.push(t);
        } else {
            return Err(cur.error_here("expected `state`, `on` or `}`"));
        }
    }
}

fn parse_state(cur: &mut Cursor) -> Result<StateNode> {
    let mut state = StateNode {
        name: cur.ident("state name")?,
        ..Default::default()
    };
    if cur.eat_keyword("initial") {
        state.initial = true;
    }
    if cur.eat_keyword("power") {
        let base = cur.number("base power in mW")?;
        let mut coefficients = BTreeMap::new();
        while cur.eat(&Tok::Plus) {
            let c = cur.number("coefficient in mW per unit")?;
            cur.expect(Tok::Star)?;
            let (line, column) = cur.position();
            let p = cur.ident("parameter name")?;
            if coefficients.insert(p.clone(), c).is_some() {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("parameter `{p}` appears twice in power expression"),
                });
            }
        }
        state.power = PowerFunction::affine(base, coefficients);
    }
    if cur.eat(&Tok::LBrace) {
        loop {
            if cur.eat(&Tok::RBrace) {
                break;
            }
            if !cur.eat_keyword("region") {
                return Err(cur.error_here("expected `region` or `}`"));
            }
            state.regions.push(parse_region_body(cur)?);
        }
    }
    Ok(state)
}

impl fmt::Display for PowerFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base_mw)?;
        for (p, c) in &self.coefficients_mw {
            write!(f, " + {c} * {p}")?;
        }
        Ok(())
    }
}

fn write_region(f: &mut fmt::Formatter<'_>, region: &Region, depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    writeln!(f, "{pad}region {} {{", region.name)?;
    for s in &region.states {
        write!(f, "{pad}  state {}", s.name)?;
        if s.initial {
            write!(f, " initial")?;
        }
        write!(f, " power {}", s.power)?;
        if s.regions.is_empty() {
            writeln!(f)?;
        } else {
            writeln!(f, " {{")?;
            for sub in &s.regions {
                write_region(f, sub, depth + 2)?;
            }
            writeln!(f, "{pad}  }}")?;
        }
    }
    for t in &region.transitions {
        write!(f, "{pad}  on {}: {} -> {}", t.event, t.from, t.to)?;
        if !t.updates.is_empty() {
            let updates: Vec<_> = t.updates.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            write!(f, " set {}", updates.join(", "))?;
        }
        writeln!(f)?;
    }
    writeln!(f, "{pad}}}")
}

impl fmt::Display for PowerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.events.is_empty() {
            let events: Vec<_> = self.events.iter().map(String::as_str).collect();
            writeln!(f, "event {}", events.join(", "))?;
        }
        for (name, value) in &self.params {
            writeln!(f, "param {name} = {value}")?;
        }
        write_region(f, &self.root, 0)
    }
}
