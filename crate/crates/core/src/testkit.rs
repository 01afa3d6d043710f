//! Random model and trace generators for property tests.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Params, PowerFunction, PowerModel, Region, StateNode, Transition};
use crate::trace::{Event, EventTrace};

/// Declared by every generated model but never used by a transition.
pub const SILENT_EVENT: &str = "quiet";

#[derive(Debug, Clone, Copy)]
pub struct ModelShape {
    pub max_regions: usize,
    pub max_states_per_region: usize,
    pub events: usize,
    pub params: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            max_regions: 5,
            max_states_per_region: 6,
            events: 6,
            params: 3,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn event_name(i: usize) -> String {
    format!("e{i}")
}

fn param_name(i: usize) -> String {
    format!("p{i}")
}

pub fn random_model(rng: &mut impl Rng, shape: ModelShape) -> PowerModel {
    let mut budget = shape.max_regions - 1;
    let root = random_region(rng, shape, "root".into(), 0, &mut budget);
    let mut events: BTreeSet<String> = (0..shape.events).map(event_name).collect();
    events.insert(SILENT_EVENT.into());
    let params: Params = (0..shape.params)
        .map(|i| (param_name(i), (rng.random_range(0.0..10.0_f64) * 4.0).round() / 4.0))
        .collect();
    PowerModel::new(root, events, params).expect("generated model is valid")
}

fn random_power(rng: &mut impl Rng, shape: ModelShape) -> PowerFunction {
    let base = rng.random_range(0.0..500.0);
    if shape.params > 0 && rng.random_bool(0.3) {
        let mut coefficients = std::collections::BTreeMap::new();
        for _ in 0..rng.random_range(1..=shape.params) {
            coefficients.insert(
                param_name(rng.random_range(0..shape.params)),
                rng.random_range(-5.0..20.0),
            );
        }
        PowerFunction::affine(base, coefficients)
    } else {
        PowerFunction::constant(base)
    }
}

fn random_region(rng: &mut impl Rng, shape: ModelShape, name: String, depth: usize, budget: &mut usize) -> Region {
    let n = rng.random_range(1..=shape.max_states_per_region);
    let initial = rng.random_range(0..n);
    let mut region = Region::new(name);
    for i in 0..n {
        let mut state = StateNode::atomic(format!("s{i}"), random_power(rng, shape));
        state.initial = i == initial;
        if depth < 3 && *budget > 0 && rng.random_bool(0.35) {
            let subs = rng.random_range(1..=(*budget).min(2));
            *budget -= subs;
            for r in 0..subs {
                let sub = random_region(rng, shape, format!("r{r}"), depth + 1, budget);
                state.regions.push(sub);
            }
        }
        region.states.push(state);
    }
    for from in 0..n {
        for e in 0..shape.events {
            if rng.random_bool(0.3) {
                let mut t = Transition::new(event_name(e), format!("s{from}"), format!("s{}", rng.random_range(0..n)));
                if shape.params > 0 && rng.random_bool(0.2) {
                    t.updates
                        .insert(param_name(rng.random_range(0..shape.params)), rng.random_range(0.0..10.0));
                }
                region.transitions.push(t);
            }
        }
    }
    region
}

/// Trace of up to `max_events` events over the model's declared events, with
/// occasional simultaneous events and parameter bindings.
pub fn random_trace(rng: &mut impl Rng, model: &PowerModel, max_events: usize) -> EventTrace {
    let names: Vec<&String> = model.events().iter().collect();
    let params: Vec<&String> = model.params().keys().collect();
    let n = rng.random_range(0..=max_events);
    let mut t = 0.0;
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        if !rng.random_bool(0.15) {
            t += rng.random_range(0.001..2.0);
        }
        let mut e = Event::new(t, names[rng.random_range(0..names.len())].clone());
        if !params.is_empty() && rng.random_bool(0.1) {
            e.params
                .insert(params[rng.random_range(0..params.len())].clone(), rng.random_range(0.0..10.0));
        }
        events.push(e);
    }
    EventTrace::new(events, Some("sync".into())).expect("generated trace is sorted")
}

/// Oracles that re-derive expected behaviour straight from the model tree,
/// without the flattened index used by the implementation.
pub mod oracle {
    use std::collections::BTreeSet;

    use crate::model::{Configuration, PowerModel, Region, StateNode};
    use crate::trace::EventTrace;

    fn qualify(prefix: Option<&str>, region: &Region, state: &StateNode) -> String {
        match prefix {
            None => state.name.clone(),
            Some(p) => format!("{p}.{}.{}", region.name, state.name),
        }
    }

    fn enter_initial(region: &Region, prefix: Option<&str>, out: &mut BTreeSet<String>) {
        let state = region.states.iter().find(|s| s.initial).expect("region has an initial state");
        enter(region, state, prefix, out);
    }

    fn enter(region: &Region, state: &StateNode, prefix: Option<&str>, out: &mut BTreeSet<String>) {
        let q = qualify(prefix, region, state);
        for sub in &state.regions {
            enter_initial(sub, Some(&q), out);
        }
        out.insert(q);
    }

    /// Active set expected right after entering the model.
    pub fn initial_active(model: &PowerModel) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        enter_initial(model.root(), None, &mut out);
        out
    }

    /// Every region under an active parent has exactly one active state,
    /// nothing below an inactive parent is active, and no unknown names.
    pub fn is_valid(model: &PowerModel, config: &Configuration) -> Result<(), String> {
        let mut known = 0usize;
        fn walk(
            region: &Region,
            prefix: Option<&str>,
            parent_active: bool,
            config: &Configuration,
            known: &mut usize,
        ) -> Result<(), String> {
            let mut active = 0;
            for s in &region.states {
                let q = qualify(prefix, region, s);
                let on = config.active.contains(&q);
                if on {
                    active += 1;
                    *known += 1;
                }
                for sub in &s.regions {
                    walk(sub, Some(&q), on, config, known)?;
                }
            }
            match (parent_active, active) {
                (true, 1) | (false, 0) => Ok(()),
                _ => Err(format!(
                    "region `{}` under {:?}: {active} active (parent active {parent_active})",
                    region.name, prefix
                )),
            }
        }
        walk(model.root(), None, true, config, &mut known)?;
        if known != config.active.len() {
            return Err("configuration names unknown states".into());
        }
        Ok(())
    }

    /// Whether any active region has a transition triggered by `event`.
    pub fn has_enabled_transition(model: &PowerModel, config: &Configuration, event: &str) -> bool {
        fn walk(region: &Region, prefix: Option<&str>, config: &Configuration, event: &str) -> bool {
            region.states.iter().any(|s| {
                let q = qualify(prefix, region, s);
                config.active.contains(&q)
                    && (region.transitions.iter().any(|t| t.from == s.name && t.event == event)
                        || s.regions.iter().any(|sub| walk(sub, Some(&q), config, event)))
            })
        }
        walk(model.root(), None, config, event)
    }

    /// One broadcast step computed by recursion over the tree: in each active
    /// region either the active state's transition fires (re-entering the
    /// target's initial substates) or the state stays and its subregions
    /// see the event.
    pub fn step(model: &PowerModel, config: &Configuration, event: &crate::trace::Event) -> Configuration {
        fn walk(
            region: &Region,
            prefix: Option<&str>,
            config: &Configuration,
            event: &str,
            active: &mut BTreeSet<String>,
            updates: &mut Vec<(String, f64)>,
        ) {
            let Some(state) = region
                .states
                .iter()
                .find(|s| config.active.contains(&qualify(prefix, region, s)))
            else {
                return;
            };
            match region.transitions.iter().find(|t| t.from == state.name && t.event == event) {
                Some(t) => {
                    let target = region.states.iter().find(|s| s.name == t.to).expect("target exists");
                    enter(region, target, prefix, active);
                    updates.extend(t.updates.iter().map(|(k, v)| (k.clone(), *v)));
                }
                None => {
                    let q = qualify(prefix, region, state);
                    for sub in &state.regions {
                        walk(sub, Some(&q), config, event, active, updates);
                    }
                    active.insert(q);
                }
            }
        }
        let mut active = BTreeSet::new();
        let mut updates = Vec::new();
        walk(model.root(), None, config, &event.name, &mut active, &mut updates);
        let mut params = config.params.clone();
        params.extend(updates);
        params.extend(event.params.iter().map(|(k, v)| (k.clone(), *v)));
        Configuration { active, params }
    }

    /// Energy over `[0, t_end]` by walking the events and summing
    /// `power_at(config) · Δt` between consecutive event times.
    pub fn event_walk_energy(model: &PowerModel, trace: &EventTrace, t_end: f64) -> f64 {
        let mut config = model.initial_configuration();
        let mut t = 0.0;
        let mut energy = 0.0;
        for e in trace.events() {
            if trace.sync_name() == Some(e.name.as_str()) && !model.declares_event(&e.name) {
                continue;
            }
            energy += model.power_at(&config) * (e.t - t);
            t = e.t;
            config = model.apply_event(&config, e).expect("replayable trace");
        }
        energy + model.power_at(&config) * (t_end - t)
    }

    /// Midpoint rectangle sum of `f` over `[a, b]` with step `dt`.
    pub fn rectangle_sum(f: impl Fn(f64) -> f64, a: f64, b: f64, dt: f64) -> f64 {
        let n = ((b - a) / dt).round() as usize;
        (0..n).map(|k| f(a + (k as f64 + 0.5) * dt) * dt).sum()
    }
}
