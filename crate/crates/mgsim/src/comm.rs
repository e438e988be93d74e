//! Deterministic synchronous-round message exchange over the undirected CIG
//! communication graph.
//!
//! Rounds are loss- and delay-free by default; an optional per-edge drop
//! probability and fixed delay are available for robustness experiments.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;

/// Undirected communication graph with unit edge weights.
#[derive(Debug, Clone)]
pub struct CommGraph {
    n: usize,
    adjacency: Vec<Vec<u8>>,
    neighbors: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds and validates a graph from a symmetric 0/1 adjacency matrix.
    pub fn from_adjacency(adjacency: Vec<Vec<u8>>) -> Result<Self, ConfigError> {
        let n = adjacency.len();
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "comm adjacency matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0 {
                return Err(ConfigError::Invalid(format!(
                    "comm adjacency matrix has a self-loop at CIG {i}"
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if w > 1 {
                    return Err(ConfigError::Invalid(format!(
                        "comm edge weights must be 0 or 1, got {w} at ({i},{j})"
                    )));
                }
                if w != adjacency[j][i] {
                    return Err(ConfigError::Invalid(format!(
                        "comm adjacency matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i][j] == 1).collect())
            .collect();
        let graph = CommGraph {
            n,
            adjacency,
            neighbors,
        };
        let components = graph.components();
        if components.len() > 1 {
            return Err(ConfigError::Invalid(format!(
                "comm graph is disconnected; components: {}",
                components
                    .iter()
                    .map(|c| format!("{c:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        Ok(graph)
    }

    /// Builds a graph on `n` CIGs from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, ConfigError> {
        let mut adjacency = vec![vec![0u8; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(ConfigError::Invalid(format!(
                    "comm edge ({a},{b}) references a CIG out of range (n={n})"
                )));
            }
            if a == b {
                return Err(ConfigError::Invalid(format!(
                    "comm edge ({a},{b}) is a self-loop"
                )));
            }
            adjacency[a][b] = 1;
            adjacency[b][a] = 1;
        }
        Self::from_adjacency(adjacency)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Neighbor indices of CIG `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j] == 1
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                comp.push(i);
                for &j in &self.neighbors[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Per-round broadcast payload of one CIG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    /// Sampled output frequency ω̂ (rad/s).
    pub omega_hat: f64,
    /// Droop-scaled reactive sharing signal Q̂ (rad/s).
    pub q_hat: f64,
    /// Consensus agreement state x (V).
    pub x: f64,
    pub round: u64,
}

/// Delivers one synchronous round: every CIG's inbox receives exactly the
/// messages of its graph neighbors for round `k1`.
///
/// Panics if the sample list violates the one-message-per-CIG-per-round
/// engine invariant.
pub fn broadcast_round(graph: &CommGraph, k1: u64, samples: &[Message]) -> Vec<Vec<Message>> {
    assert_eq!(
        samples.len(),
        graph.len(),
        "broadcast_round: expected one message per CIG"
    );
    for (i, msg) in samples.iter().enumerate() {
        assert_eq!(msg.sender, i, "broadcast_round: message {i} has wrong sender");
        assert_eq!(msg.round, k1, "broadcast_round: message {i} has wrong round");
    }
    (0..graph.len())
        .map(|i| graph.neighbors(i).iter().map(|&j| samples[j]).collect())
        .collect()
}

/// Round-based delivery channel with optional per-edge message drop and a
/// fixed delay in whole rounds. With both off it reduces to
/// [`broadcast_round`].
pub struct Channel {
    drop_prob: f64,
    delay_rounds: u32,
    rng: ChaCha8Rng,
    pending: VecDeque<Vec<Message>>,
}

impl Channel {
    pub fn new(drop_prob: f64, delay_rounds: u32, seed: u64) -> Self {
        Channel {
            drop_prob,
            delay_rounds,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: VecDeque::new(),
        }
    }

    /// Accepts this round's samples and returns the inboxes due now (the
    /// samples submitted `delay_rounds` rounds ago). Inboxes are empty until
    /// the pipeline fills.
    pub fn deliver(
        &mut self,
        graph: &CommGraph,
        k1: u64,
        samples: &[Message],
    ) -> Vec<Vec<Message>> {
        if self.delay_rounds == 0 && self.drop_prob == 0.0 {
            return broadcast_round(graph, k1, samples);
        }
        self.pending.push_back(samples.to_vec());
        if self.pending.len() <= self.delay_rounds as usize {
            return vec![Vec::new(); graph.len()];
        }
        let due = self.pending.pop_front().expect("pipeline non-empty");
        let mut inboxes: Vec<Vec<Message>> = Vec::with_capacity(graph.len());
        for i in 0..graph.len() {
            let mut inbox = Vec::with_capacity(graph.neighbors(i).len());
            for &j in graph.neighbors(i) {
                let dropped = self.drop_prob > 0.0 && self.rng.gen::<f64>() < self.drop_prob;
                if !dropped {
                    inbox.push(due[j]);
                }
            }
            inboxes.push(inbox);
        }
        inboxes
    }
}
