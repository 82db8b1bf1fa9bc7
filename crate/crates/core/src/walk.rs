//! Users, topologies and token walks.
//!
//! User indices are 1-based in memory. Serialized traces use 0-based
//! indices (`step,user` CSV, both columns starting at 0).

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{RngContract, WALK_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    DirectedRing,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n: usize,
}

impl Topology {
    pub fn ring(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("a directed ring needs n >= 2, got {n}")));
        }
        Ok(Self {
            kind: TopologyKind::DirectedRing,
            n,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("a complete graph needs n >= 1"));
        }
        Ok(Self {
            kind: TopologyKind::Complete,
            n,
        })
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            TopologyKind::DirectedRing => Self::ring(self.n).map(|_| ()),
            TopologyKind::Complete => Self::complete(self.n).map(|_| ()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkOptions {
    /// On the complete graph, whether the holder may send the token to itself.
    pub allow_self_transition: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            allow_self_transition: true,
        }
    }
}

/// Ordered token holders of one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub topology: Topology,
    steps: Vec<u32>,
    pub seed: u64,
}

impl WalkTrace {
    /// Builds a trace from 1-based holders, checking it against the topology.
    pub fn from_steps(topology: Topology, steps: Vec<u32>, seed: u64) -> Result<Self> {
        topology.validate()?;
        if steps.is_empty() {
            return Err(invalid("a walk needs at least one step"));
        }
        let n = topology.n as u32;
        if let Some(bad) = steps.iter().find(|&&u| u == 0 || u > n) {
            return Err(invalid(format!("user {bad} outside [1, {n}]")));
        }
        if topology.kind == TopologyKind::DirectedRing {
            if !steps.len().is_multiple_of(topology.n) {
                return Err(invalid("ring walk length must be a multiple of n"));
            }
            if steps
                .iter()
                .enumerate()
                .any(|(i, &u)| u != (i % topology.n) as u32 + 1)
            {
                return Err(invalid("ring walk must visit 1, 2, ..., n in order"));
            }
        }
        Ok(Self {
            topology,
            steps,
            seed,
        })
    }

    pub fn steps(&self) -> &[u32] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn n(&self) -> usize {
        self.topology.n
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["step", "user"])?;
        for (i, &u) in self.steps.iter().enumerate() {
            wr.write_record([i.to_string(), (u - 1).to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a `step,user` CSV written by [`WalkTrace::write_csv`].
    pub fn read_csv<R: Read>(r: R, topology: Topology, seed: u64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut steps = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let step: usize = field(&rec, 0)?;
            if step != i {
                return Err(invalid(format!("expected step {i}, found {step}")));
            }
            let user: u32 = field(&rec, 1)?;
            steps.push(user + 1);
        }
        Self::from_steps(topology, steps, seed)
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| invalid(format!("bad or missing column {i} in trace row")))
}

/// Samples a walk of `t` steps. The ring starts at user 1 and goes round in
/// order; the complete graph picks each holder uniformly at random.
pub fn sample_walk(topology: Topology, t: usize, seed: u64) -> Result<WalkTrace> {
    sample_walk_with(topology, t, seed, WalkOptions::default())
}

pub fn sample_walk_with(
    topology: Topology,
    t: usize,
    seed: u64,
    opts: WalkOptions,
) -> Result<WalkTrace> {
    topology.validate()?;
    if t == 0 {
        return Err(invalid("walk length T must be at least 1"));
    }
    let n = topology.n;
    let steps = match topology.kind {
        TopologyKind::DirectedRing => {
            if !t.is_multiple_of(n) {
                return Err(invalid(format!(
                    "ring walk length {t} is not a multiple of n = {n}"
                )));
            }
            (0..t).map(|i| (i % n) as u32 + 1).collect()
        }
        TopologyKind::Complete => {
            let mut rng = RngContract::new(seed, WALK_STREAM).rng();
            if opts.allow_self_transition || n == 1 {
                (0..t).map(|_| rng.random_range(1..=n as u32)).collect()
            } else {
                let mut steps = Vec::with_capacity(t);
                let mut cur = rng.random_range(1..=n as u32);
                steps.push(cur);
                for _ in 1..t {
                    // uniform over the n - 1 other users
                    let mut next = rng.random_range(1..n as u32);
                    if next >= cur {
                        next += 1;
                    }
                    cur = next;
                    steps.push(cur);
                }
                steps
            }
        }
    };
    Ok(WalkTrace {
        topology,
        steps,
        seed,
    })
}

/// Number of times each user holds the token; entry `i` is user `i + 1`.
pub fn visit_counts(walk: &WalkTrace) -> Vec<u64> {
    let mut counts = vec![0u64; walk.n()];
    for &u in &walk.steps {
        counts[u as usize - 1] += 1;
    }
    counts
}

/// Cycle lengths seen by `v`: the gap from the start to the first visit,
/// then the gaps between consecutive visits. Steps after the last visit are
/// never observed by `v` and are dropped.
pub fn cycle_lengths(walk: &WalkTrace, v: u32) -> Result<Vec<usize>> {
    if v == 0 || v as usize > walk.n() {
        return Err(invalid(format!("user {v} outside [1, {}]", walk.n())));
    }
    let mut out = Vec::new();
    let mut prev = 0usize;
    for (i, &u) in walk.steps.iter().enumerate() {
        if u == v {
            out.push(i + 1 - prev);
            prev = i + 1;
        }
    }
    Ok(out)
}
