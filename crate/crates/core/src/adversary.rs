//! Byzantine strategies.
//!
//! A faulty node has no modelled state; each round it only decides what to
//! put on each of its outgoing edges to fault-free nodes. Strategies see the
//! whole execution through [`AdversaryView`] and may send different values
//! to different receivers, or nothing at all.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::weight_a;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, FaultConfig, FaultFreeIndex, NodeId};

/// Names accepted by [`Strategy::from_spec`].
pub const BUILTIN_STRATEGIES: &[&str] = &[
    "silent",
    "constant",
    "boundary_push",
    "split_random",
    "mimic_extreme",
];

/// Read-only snapshot of the execution at the start of round `t`.
#[derive(Clone, Copy, Debug)]
pub struct AdversaryView<'a> {
    pub t: usize,
    pub graph: &'a DirectedGraph,
    pub faults: &'a FaultConfig,
    pub index: &'a FaultFreeIndex,
    /// `v[t-1]`, indexed by fault-free position.
    pub states: &'a [f64],
    pub seed: u64,
}

impl AdversaryView<'_> {
    pub fn state_of(&self, id: NodeId) -> Option<f64> {
        self.index.position(id).map(|p| self.states[p])
    }

    /// `U[t-1]`.
    pub fn max_state(&self) -> f64 {
        self.states
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `μ[t-1]`.
    pub fn min_state(&self) -> f64 {
        self.states.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Averaging weight used by fault-free node `i`.
    pub fn weight(&self, i: NodeId) -> Result<f64> {
        weight_a(self.graph, self.faults.f, i)
    }

    /// Edges from faulty senders to fault-free receivers, ascending.
    pub fn faulty_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.faults.faulty.iter().flat_map(move |&j| {
            self.graph
                .out_neighbors(j)
                .iter()
                .filter(move |i| !self.faults.is_faulty(**i))
                .map(move |&i| (j, i))
        })
    }

    /// Values fault-free in-neighbors of `i` transmit this round, ascending.
    pub fn honest_values_into(&self, i: NodeId) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .graph
            .in_neighbors(i)
            .iter()
            .filter_map(|&j| self.state_of(j))
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Deterministic generator for this round, derived from the scenario seed.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.t as u64);
        rng
    }
}

/// Messages chosen by the faulty nodes for one round. A missing key or a
/// `None` value means the message is withheld.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FaultyEmission {
    pub messages: BTreeMap<(NodeId, NodeId), Option<f64>>,
}

impl FaultyEmission {
    pub fn send(&mut self, from: NodeId, to: NodeId, value: f64) {
        self.messages.insert((from, to), Some(value));
    }

    pub fn withhold(&mut self, from: NodeId, to: NodeId) {
        self.messages.insert((from, to), None);
    }

    /// The value delivered on `from -> to`, if any.
    pub fn value(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.messages.get(&(from, to)).copied().flatten()
    }
}

/// A Byzantine strategy. Implementations must be deterministic functions of
/// the view.
pub trait Adversary: Send + Sync {
    fn name(&self) -> &str;

    fn emit(&self, view: &AdversaryView<'_>) -> FaultyEmission;
}

/// Which side of a receiver's trim window `mimic_extreme` hugs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Low,
    High,
    /// Alternate by receiver: even fault-free positions get `Low`.
    Split,
}

/// Built-in strategies.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// Withholds every message.
    Silent,
    /// Sends the same value on every edge.
    Constant { value: f64 },
    /// Sends `U + delta` to even-positioned receivers and `μ - delta` to the
    /// others. These values are always trimmed.
    BoundaryPush { delta: f64 },
    /// Independent uniform value per edge. Bounds default to
    /// `[μ - w, U + w]` with `w = max(U - μ, 1)`.
    SplitRandom {
        low: Option<f64>,
        high: Option<f64>,
        withhold: f64,
    },
    /// Sends each receiver a value just inside the window of honest values
    /// that survive its trim, so the faulty value is kept.
    MimicExtreme { side: Side, inset: f64 },
}

/// Strategy selection as it appears in scenario files:
/// `{"name": "constant", "params": {"value": 100}, "seed": 7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AdversarySpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            params: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }
}

impl Strategy {
    pub fn from_spec(spec: &AdversarySpec) -> Result<Self> {
        let name = spec.name.as_str();
        let number = |key: &str| -> Result<Option<f64>> {
            match spec.params.get(key) {
                None => Ok(None),
                Some(v) => v
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::BadStrategyParam {
                        strategy: name.to_owned(),
                        param: key.to_owned(),
                        reason: format!("expected a finite number, got {v}"),
                    }),
            }
        };
        let allowed: &[&str] = match name {
            "silent" => &[],
            "constant" => &["value"],
            "boundary_push" => &["delta"],
            "split_random" => &["low", "high", "withhold"],
            "mimic_extreme" => &["side", "inset"],
            other => return Err(Error::UnknownStrategy(other.to_owned())),
        };
        if let Some(key) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::BadStrategyParam {
                strategy: name.to_owned(),
                param: key.clone(),
                reason: "unknown parameter".into(),
            });
        }
        let bad = |param: &str, reason: &str| Error::BadStrategyParam {
            strategy: name.to_owned(),
            param: param.to_owned(),
            reason: reason.to_owned(),
        };
        Ok(match name {
            "silent" => Strategy::Silent,
            "constant" => Strategy::Constant {
                value: number("value")?.ok_or_else(|| bad("value", "required"))?,
            },
            "boundary_push" => Strategy::BoundaryPush {
                delta: number("delta")?.unwrap_or(1.0),
            },
            "split_random" => {
                let (low, high) = (number("low")?, number("high")?);
                if let (Some(l), Some(h)) = (low, high) {
                    if l > h {
                        return Err(bad("low", "must not exceed `high`"));
                    }
                }
                let withhold = number("withhold")?.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&withhold) {
                    return Err(bad("withhold", "must be a probability"));
                }
                Strategy::SplitRandom {
                    low,
                    high,
                    withhold,
                }
            }
            "mimic_extreme" => {
                let side = match spec.params.get("side") {
                    None => Side::Split,
                    Some(v) => serde_json::from_value(v.clone())
                        .map_err(|_| bad("side", "expected \"low\", \"high\" or \"split\""))?,
                };
                let inset = number("inset")?.unwrap_or(0.1);
                if !(inset > 0.0 && inset < 1.0) {
                    return Err(bad("inset", "must lie strictly between 0 and 1"));
                }
                Strategy::MimicExtreme { side, inset }
            }
            _ => unreachable!(),
        })
    }

    fn mimic_value(view: &AdversaryView<'_>, receiver: NodeId, side: Side, inset: f64) -> f64 {
        let honest = view.honest_values_into(receiver);
        let f = view.faults.f;
        let m = honest.len();
        if m == 0 {
            return view.state_of(receiver).unwrap_or(0.0);
        }
        // The f smallest and f largest honest values bracket the slots a
        // faulty value can occupy without being trimmed.
        let cut = f.clamp(1, m);
        let (lo, hi) = (honest[cut - 1], honest[m - cut]);
        let low_side = match side {
            Side::Low => true,
            Side::High => false,
            Side::Split => view.index.position(receiver).unwrap_or(0).is_multiple_of(2),
        };
        if lo < hi {
            if low_side {
                lo + inset * (hi - lo)
            } else {
                hi - inset * (hi - lo)
            }
        } else {
            honest[(m - 1) / 2]
        }
    }
}

impl Adversary for Strategy {
    fn name(&self) -> &str {
        match self {
            Strategy::Silent => "silent",
            Strategy::Constant { .. } => "constant",
            Strategy::BoundaryPush { .. } => "boundary_push",
            Strategy::SplitRandom { .. } => "split_random",
            Strategy::MimicExtreme { .. } => "mimic_extreme",
        }
    }

    fn emit(&self, view: &AdversaryView<'_>) -> FaultyEmission {
        let mut out = FaultyEmission::default();
        match *self {
            Strategy::Silent => {
                for (j, i) in view.faulty_edges() {
                    out.withhold(j, i);
                }
            }
            Strategy::Constant { value } => {
                for (j, i) in view.faulty_edges() {
                    out.send(j, i, value);
                }
            }
            Strategy::BoundaryPush { delta } => {
                let (hi, lo) = (view.max_state(), view.min_state());
                for (j, i) in view.faulty_edges() {
                    let even = view.index.position(i).unwrap_or(0).is_multiple_of(2);
                    out.send(j, i, if even { hi + delta } else { lo - delta });
                }
            }
            Strategy::SplitRandom {
                low,
                high,
                withhold,
            } => {
                let (u, mu) = (view.max_state(), view.min_state());
                let width = (u - mu).max(1.0);
                let low = low.unwrap_or(mu - width);
                let high = high.unwrap_or(u + width).max(low);
                let mut rng = view.rng();
                for (j, i) in view.faulty_edges() {
                    let drop = withhold > 0.0 && rng.random_bool(withhold);
                    let value = rng.random_range(low..=high);
                    if drop {
                        out.withhold(j, i);
                    } else {
                        out.send(j, i, value);
                    }
                }
            }
            Strategy::MimicExtreme { side, inset } => {
                for (j, i) in view.faulty_edges() {
                    out.send(j, i, Self::mimic_value(view, i, side, inset));
                }
            }
        }
        out
    }
}

/// Evaluates a strategy on a view.
pub fn emit(strategy: &dyn Adversary, view: &AdversaryView<'_>) -> FaultyEmission {
    strategy.emit(view)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        g: DirectedGraph,
        fc: FaultConfig,
        idx: FaultFreeIndex,
        states: Vec<f64>,
    }

    fn k4() -> Fixture {
        let g = DirectedGraph::complete(4);
        let fc = FaultConfig::new(1, [4]).unwrap();
        let idx = FaultFreeIndex::new(4, &fc);
        Fixture {
            g,
            fc,
            idx,
            states: vec![0.0, 6.0, 12.0],
        }
    }

    impl Fixture {
        fn view(&self, t: usize, seed: u64) -> AdversaryView<'_> {
            AdversaryView {
                t,
                graph: &self.g,
                faults: &self.fc,
                index: &self.idx,
                states: &self.states,
                seed,
            }
        }
    }

    #[test]
    fn silent_withholds_everything() {
        let fx = k4();
        let e = Strategy::Silent.emit(&fx.view(1, 0));
        assert_eq!(e.messages.len(), 3);
        assert!(e.messages.values().all(Option::is_none));
    }

    #[test]
    fn constant_fills_every_out_edge() {
        let fx = k4();
        let s = Strategy::from_spec(&AdversarySpec::named("constant").with_param("value", 100))
            .unwrap();
        let e = s.emit(&fx.view(1, 0));
        let expected: Vec<_> = [1, 2, 3].iter().map(|&i| ((4, i), Some(100.0))).collect();
        assert_eq!(e.messages.into_iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn mimic_lands_inside_the_window() {
        let fx = k4();
        let default = Strategy::from_spec(&AdversarySpec::named("mimic_extreme")).unwrap();
        let v = default.emit(&fx.view(1, 0)).value(4, 1).unwrap();
        assert!(v > 6.0 && v < 12.0, "{v}");

        let tuned = Strategy::MimicExtreme {
            side: Side::Low,
            inset: 1.0 / 6.0,
        };
        assert_eq!(tuned.emit(&fx.view(1, 0)).value(4, 1), Some(7.0));
    }

    #[test]
    fn boundary_push_targets_both_extremes() {
        let fx = k4();
        let e = Strategy::BoundaryPush { delta: 2.0 }.emit(&fx.view(1, 0));
        assert_eq!(e.value(4, 1), Some(14.0));
        assert_eq!(e.value(4, 2), Some(-2.0));
        assert_eq!(e.value(4, 3), Some(14.0));
    }

    #[test]
    fn split_random_is_seeded() {
        let fx = k4();
        let s = Strategy::SplitRandom {
            low: None,
            high: None,
            withhold: 0.0,
        };
        let a = s.emit(&fx.view(3, 42));
        assert_eq!(a, s.emit(&fx.view(3, 42)));
        assert_ne!(a, s.emit(&fx.view(4, 42)));
        assert!(a
            .messages
            .values()
            .all(|v| (-12.0..=24.0).contains(&v.unwrap())));
    }

    #[test]
    fn rejects_bad_strategy_params() {
        assert!(matches!(
            Strategy::from_spec(&AdversarySpec::named("chaos_monkey")),
            Err(Error::UnknownStrategy(_))
        ));
        assert!(Strategy::from_spec(&AdversarySpec::named("constant")).is_err());
        assert!(Strategy::from_spec(
            &AdversarySpec::named("mimic_extreme").with_param("side", "sideways")
        )
        .is_err());
        assert!(
            Strategy::from_spec(&AdversarySpec::named("silent").with_param("value", 1)).is_err()
        );
        for name in BUILTIN_STRATEGIES {
            let spec = AdversarySpec::named(name);
            let spec = if *name == "constant" {
                spec.with_param("value", 0.5)
            } else {
                spec
            };
            assert_eq!(Strategy::from_spec(&spec).unwrap().name(), *name);
        }
    }
}
