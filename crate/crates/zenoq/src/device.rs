//! Device snapshots: coupling map, basis gates, per-qubit decoherence and
//! readout parameters, gate durations, timing constants.
//!
//! Snapshots are local JSON files; nothing here talks to a vendor service.
//! The bundled snapshots freeze the devices' documented timing constants
//! (dt = 2/9 ns,
//! 16 dt alignment granularity, 160 dt single-qubit gates, 1350 dt CNOTs)
//! with estimated per-qubit data, so runs stay reproducible after the real
//! machines are gone.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNAPSHOT_SCHEMA: &str = "zenoq-device-v1";

/// Decoherence and readout parameters of one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitProperties {
    pub t1_us: f64,
    pub t2_us: f64,
    /// P(read 1 | prepared 0).
    pub readout_p01: f64,
    /// P(read 0 | prepared 1).
    pub readout_p10: f64,
}

/// Durations for one gate kind: a default plus per-qubit(-pair) overrides.
/// Override keys are `"q"` for single-qubit gates and `"a,b"` (directed) for
/// two-qubit gates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GateDurations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSnapshot {
    pub schema: String,
    pub name: String,
    pub n_qubits: usize,
    /// Hardware time quantum in nanoseconds (2/9 ns on the modeled devices).
    pub dt_ns: f64,
    /// Delay durations must be multiples of this many dt.
    pub granularity_dt: u64,
    /// Directed edges; CNOT(a→b) is native exactly when (a, b) is listed.
    pub coupling_edges: Vec<(usize, usize)>,
    pub basis_gates: Vec<String>,
    pub qubits: Vec<QubitProperties>,
    pub durations_dt: BTreeMap<String, GateDurations>,
    /// True when durations are means rather than per-edge calibration data.
    #[serde(default)]
    pub durations_estimated: bool,
}

impl DeviceSnapshot {
    /// Parse and validate a snapshot document.
    pub fn from_json(text: &str) -> Result<DeviceSnapshot> {
        let snap: DeviceSnapshot =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        snap.validate()?;
        Ok(snap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization cannot fail")
    }

    /// A bundled snapshot by name: `nairobi-like`, `lima-like` or `linear-5`.
    pub fn builtin(name: &str) -> Option<DeviceSnapshot> {
        let text = match name {
            "nairobi-like" => include_str!("../snapshots/nairobi-like.json"),
            "lima-like" => include_str!("../snapshots/lima-like.json"),
            "linear-5" => include_str!("../snapshots/linear-5.json"),
            _ => return None,
        };
        Some(DeviceSnapshot::from_json(text).expect("bundled snapshot must validate"))
    }

    /// Names of the bundled snapshots.
    pub fn builtin_names() -> &'static [&'static str] {
        &["nairobi-like", "lima-like", "linear-5"]
    }

    /// Synthetic linear-topology snapshot with uniform parameters.
    pub fn linear(n_qubits: usize) -> DeviceSnapshot {
        let mut edges = Vec::new();
        for q in 0..n_qubits.saturating_sub(1) {
            edges.push((q, q + 1));
            edges.push((q + 1, q));
        }
        let mut durations = BTreeMap::new();
        for (gate, dt) in [("rz", 0u64), ("sx", 160), ("x", 160), ("cx", 1350), ("measure", 5120)]
        {
            durations.insert(
                gate.to_string(),
                GateDurations {
                    default: Some(dt),
                    overrides: BTreeMap::new(),
                },
            );
        }
        let snap = DeviceSnapshot {
            schema: SNAPSHOT_SCHEMA.to_string(),
            name: format!("linear-{n_qubits}"),
            n_qubits,
            dt_ns: 2.0 / 9.0,
            granularity_dt: 16,
            coupling_edges: edges,
            basis_gates: ["rz", "sx", "x", "cx"].iter().map(|s| s.to_string()).collect(),
            qubits: (0..n_qubits)
                .map(|_| QubitProperties {
                    t1_us: 120.0,
                    t2_us: 90.0,
                    readout_p01: 0.02,
                    readout_p10: 0.03,
                })
                .collect(),
            durations_dt: durations,
            durations_estimated: true,
        };
        snap.validate().expect("synthetic snapshot must validate");
        snap
    }

    /// Check every snapshot invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, message: String| -> Result<()> {
            Err(Error::SnapshotValidation {
                path: path.to_string(),
                message,
            })
        };
        if self.schema != SNAPSHOT_SCHEMA {
            return fail("schema", format!("unrecognized schema '{}'", self.schema));
        }
        if self.n_qubits == 0 {
            return fail("n_qubits", "device must have at least one qubit".into());
        }
        if !(self.dt_ns.is_finite() && self.dt_ns > 0.0) {
            return fail("dt_ns", format!("dt must be positive, got {}", self.dt_ns));
        }
        if self.granularity_dt == 0 {
            return fail("granularity_dt", "granularity must be positive".into());
        }
        if self.qubits.len() != self.n_qubits {
            return fail(
                "qubits",
                format!("expected {} entries, got {}", self.n_qubits, self.qubits.len()),
            );
        }
        for (q, props) in self.qubits.iter().enumerate() {
            let base = format!("qubits[{q}]");
            if !(props.t1_us > 0.0) {
                return fail(&format!("{base}.t1_us"), format!("T1 must be positive, got {}", props.t1_us));
            }
            if !(props.t2_us > 0.0) {
                return fail(&format!("{base}.t2_us"), format!("T2 must be positive, got {}", props.t2_us));
            }
            if props.t2_us > 2.0 * props.t1_us {
                return fail(
                    &format!("{base}.t2_us"),
                    format!(
                        "T2 = {} exceeds 2*T1 = {} on qubit {q}",
                        props.t2_us,
                        2.0 * props.t1_us
                    ),
                );
            }
            for (field, p) in [("readout_p01", props.readout_p01), ("readout_p10", props.readout_p10)] {
                if !(0.0..=1.0).contains(&p) {
                    return fail(
                        &format!("{base}.{field}"),
                        format!("probability {p} outside [0, 1]"),
                    );
                }
            }
        }
        for (i, &(a, b)) in self.coupling_edges.iter().enumerate() {
            if a >= self.n_qubits || b >= self.n_qubits || a == b {
                return fail(
                    &format!("coupling_edges[{i}]"),
                    format!("invalid edge ({a}, {b}) for {} qubits", self.n_qubits),
                );
            }
        }
        for (gate, durs) in &self.durations_dt {
            for key in durs.overrides.keys() {
                let parts: Vec<&str> = key.split(',').collect();
                let ok = parts
                    .iter()
                    .all(|p| p.parse::<usize>().map(|q| q < self.n_qubits).unwrap_or(false));
                if !ok {
                    return fail(
                        &format!("durations_dt.{gate}.overrides.{key}"),
                        "override key must name valid qubits".into(),
                    );
                }
            }
        }
        Ok(())
    }

    pub fn qubit(&self, q: usize) -> Result<&QubitProperties> {
        self.qubits.get(q).ok_or(Error::QubitOutOfRange {
            index: q,
            n_qubits: self.n_qubits,
        })
    }

    /// Duration in dt of a named gate on the given qubits (directed for
    /// two-qubit gates), falling back to the gate's default.
    pub fn duration_dt(&self, gate: &str, qubits: &[usize]) -> Result<u64> {
        let missing = || Error::MissingDuration {
            gate: gate.to_string(),
            qubits: qubits.to_vec(),
            snapshot: self.name.clone(),
        };
        let durs = self.durations_dt.get(gate).ok_or_else(missing)?;
        let key = qubits
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",");
        if let Some(&dt) = durs.overrides.get(&key) {
            return Ok(dt);
        }
        durs.default.ok_or_else(missing)
    }

    /// Round a duration in nanoseconds to the nearest whole dt.
    pub fn ns_to_dt(&self, ns: f64) -> u64 {
        (ns / self.dt_ns).round() as u64
    }

    pub fn dt_to_us(&self, dt: u64) -> f64 {
        dt as f64 * self.dt_ns * 1e-3
    }

    pub fn us_to_dt(&self, us: f64) -> u64 {
        (us * 1e3 / self.dt_ns).round() as u64
    }

    pub fn is_basis_gate(&self, gate: &str) -> bool {
        self.basis_gates.iter().any(|g| g == gate)
    }

    pub fn has_directed_edge(&self, a: usize, b: usize) -> bool {
        self.coupling_edges.contains(&(a, b))
    }

    /// Derived adjacency view of the coupling edges.
    pub fn coupling_map(&self) -> CouplingMap {
        CouplingMap::new(self)
    }

    /// Summed 3-CNOT duration of a SWAP on edge (a, b) for the orientation
    /// starting with control `first`: CX(first→second) CX(second→first)
    /// CX(first→second).
    pub fn swap_orientation_cost(&self, first: usize, second: usize) -> Result<u64> {
        let fwd = self.duration_dt("cx", &[first, second])?;
        let rev = self.duration_dt("cx", &[second, first])?;
        Ok(2 * fwd + rev)
    }
}

/// Undirected adjacency derived from the snapshot's directed edges.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    n_qubits: usize,
    adjacency: Vec<Vec<usize>>,
    directed: HashSet<(usize, usize)>,
}

impl CouplingMap {
    pub fn new(snapshot: &DeviceSnapshot) -> CouplingMap {
        let mut adjacency = vec![Vec::new(); snapshot.n_qubits];
        let mut directed = HashSet::new();
        for &(a, b) in &snapshot.coupling_edges {
            directed.insert((a, b));
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
            }
            if !adjacency[b].contains(&a) {
                adjacency[b].push(a);
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        CouplingMap {
            n_qubits: snapshot.n_qubits,
            adjacency,
            directed,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Sorted neighbors of a qubit.
    pub fn neighbors(&self, q: usize) -> Result<&[usize]> {
        self.adjacency
            .get(q)
            .map(|v| v.as_slice())
            .ok_or(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            })
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).map(|v| v.contains(&b)).unwrap_or(false)
    }

    pub fn has_directed_edge(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
    }

    /// BFS distances from a source (usize::MAX where unreachable).
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_qubits];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Minimal-length path from `a` to `b`; among shortest paths the
    /// lexicographically smallest is returned, so transpilation stays
    /// deterministic.
    pub fn shortest_path(&self, a: usize, b: usize) -> Result<Vec<usize>> {
        if a >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: a, n_qubits: self.n_qubits });
        }
        if b >= self.n_qubits {
            return Err(Error::QubitOutOfRange { index: b, n_qubits: self.n_qubits });
        }
        if a == b {
            return Err(Error::InvalidArgument("path endpoints coincide".into()));
        }
        let dist_to_b = self.distances_from(b);
        if dist_to_b[a] == usize::MAX {
            return Err(Error::Disconnected(a, b));
        }
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            // Greedy descent: the smallest neighbor strictly closer to b.
            let next = self.adjacency[cur]
                .iter()
                .copied()
                .find(|&v| dist_to_b[v] + 1 == dist_to_b[cur])
                .expect("BFS distance must decrease along some neighbor");
            path.push(next);
            cur = next;
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_snapshots_validate_and_round_trip() {
        for name in DeviceSnapshot::builtin_names() {
            let snap = DeviceSnapshot::builtin(name).unwrap();
            let json = snap.to_json();
            let back = DeviceSnapshot::from_json(&json).unwrap();
            assert_eq!(snap, back, "round trip failed for {name}");
        }
    }

    #[test]
    fn nairobi_like_qubit_5_neighbors() {
        let snap = DeviceSnapshot::builtin("nairobi-like").unwrap();
        let map = snap.coupling_map();
        assert_eq!(map.neighbors(5).unwrap(), &[3, 4, 6]);
    }

    #[test]
    fn neighbors_edge_cases() {
        let snap = DeviceSnapshot::linear(3);
        let map = snap.coupling_map();
        assert_eq!(map.neighbors(1).unwrap(), &[0, 2]);
        assert!(matches!(
            map.neighbors(9),
            Err(Error::QubitOutOfRange { .. })
        ));
        // An isolated qubit has no neighbors.
        let mut isolated = DeviceSnapshot::linear(3);
        isolated.coupling_edges.retain(|&(a, b)| a != 2 && b != 2);
        assert!(isolated.coupling_map().neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn t2_above_twice_t1_is_rejected_with_path() {
        let mut snap = DeviceSnapshot::linear(3);
        snap.qubits[1].t2_us = 3.0 * snap.qubits[1].t1_us;
        match snap.validate() {
            Err(Error::SnapshotValidation { path, message }) => {
                assert_eq!(path, "qubits[1].t2_us");
                assert!(message.contains("2*T1"));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn duration_of_300ns_cnot_is_1350_dt() {
        let snap = DeviceSnapshot::builtin("nairobi-like").unwrap();
        assert_eq!(snap.ns_to_dt(300.0), 1350);
        assert_eq!(snap.duration_dt("cx", &[3, 5]).unwrap(), 1350);
        assert!(matches!(
            snap.duration_dt("u3", &[0]),
            Err(Error::MissingDuration { .. })
        ));
    }

    #[test]
    fn shortest_path_on_nairobi_like() {
        let snap = DeviceSnapshot::builtin("nairobi-like").unwrap();
        let map = snap.coupling_map();
        assert_eq!(map.shortest_path(5, 0).unwrap(), vec![5, 3, 1, 0]);
        assert_eq!(map.shortest_path(5, 3).unwrap(), vec![5, 3]);
    }

    #[test]
    fn shortest_path_matches_bfs_distance_everywhere() {
        // Independent BFS oracle over every pair of every bundled snapshot.
        for name in DeviceSnapshot::builtin_names() {
            let map = DeviceSnapshot::builtin(name).unwrap().coupling_map();
            for a in 0..map.n_qubits() {
                let dist = map.distances_from(a);
                for b in 0..map.n_qubits() {
                    if a == b {
                        continue;
                    }
                    let path = map.shortest_path(a, b).unwrap();
                    assert_eq!(path.len() - 1, dist[b], "{name}: {a}->{b}");
                    assert_eq!(path[0], a);
                    assert_eq!(*path.last().unwrap(), b);
                    for w in path.windows(2) {
                        assert!(map.are_adjacent(w[0], w[1]));
                    }
                }
            }
        }
    }

    #[test]
    fn shortest_path_prefers_lexicographically_smallest() {
        // Ring 0-1-2-3-0: both [0,1,2] and [0,3,2] are shortest; pick [0,1,2].
        let mut snap = DeviceSnapshot::linear(4);
        snap.coupling_edges.push((3, 0));
        snap.coupling_edges.push((0, 3));
        let map = snap.coupling_map();
        assert_eq!(map.shortest_path(0, 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn disconnected_pair_errors() {
        let mut snap = DeviceSnapshot::linear(4);
        snap.coupling_edges.retain(|&(a, b)| a.max(b) < 2 || a.min(b) > 1);
        let map = snap.coupling_map();
        assert!(matches!(map.shortest_path(0, 3), Err(Error::Disconnected(0, 3))));
    }

    #[test]
    fn swap_orientation_cost_uses_directed_durations() {
        let mut snap = DeviceSnapshot::linear(2);
        let cx = snap.durations_dt.get_mut("cx").unwrap();
        cx.overrides.insert("0,1".into(), 1000);
        cx.overrides.insert("1,0".into(), 1600);
        assert_eq!(snap.swap_orientation_cost(0, 1).unwrap(), 3600);
        assert_eq!(snap.swap_orientation_cost(1, 0).unwrap(), 4200);
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let mut snap = DeviceSnapshot::linear(2);
        snap.schema = "something-else".into();
        assert!(matches!(
            snap.validate(),
            Err(Error::SnapshotValidation { path, .. }) if path == "schema"
        ));
    }
}
