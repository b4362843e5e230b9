//! Spin-glass problem instances and the two homogenization strategies.
//!
//! A [`SpinGraph`] is the abstract optimization problem: sites carrying an
//! XY or Ising spin, joined by signed edges (ferromagnetic or
//! antiferromagnetic). Energies follow
//!
//! ```text
//! H = -Σ_edges ±cos(θ_a - θ_b)     (+ for FM, - for AFM)
//! ```
//!
//! Because the stationary intensity of a pumped cavity drops with the number
//! of neighbours it feeds, an irregular graph biases the machine. Two fixes
//! are provided here: [`SpinGraph::extend_with_dangling`] equalizes degrees
//! by attaching throw-away degree-1 "extra" sites, and
//! [`compensated_pump_xy`] / [`compensated_pump_ising`] raise each site's
//! pump in proportion to its degree.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign of a spin-spin coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Coupling {
    /// Ferromagnetic: aligned phases are favoured.
    Fm,
    /// Antiferromagnetic: opposite phases are favoured.
    Afm,
}

impl Coupling {
    /// The ± factor entering the energy: +1 for FM, -1 for AFM.
    pub fn sign(self) -> f64 {
        match self {
            Coupling::Fm => 1.0,
            Coupling::Afm => -1.0,
        }
    }

    /// Integer version of [`Coupling::sign`], for exact enumeration.
    pub fn sign_i(self) -> i64 {
        match self {
            Coupling::Fm => 1,
            Coupling::Afm => -1,
        }
    }
}

/// One signed edge of the problem graph.
///
/// Serializes as `[a, b, "FM"]` to match the on-disk graph format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, Coupling)", into = "(usize, usize, Coupling)")]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub coupling: Coupling,
}

impl From<(usize, usize, Coupling)> for Edge {
    fn from((a, b, coupling): (usize, usize, Coupling)) -> Self {
        Edge { a, b, coupling }
    }
}

impl From<Edge> for (usize, usize, Coupling) {
    fn from(e: Edge) -> Self {
        (e.a, e.b, e.coupling)
    }
}

/// A spin-glass instance: sites, signed edges and per-site "extra" flags.
///
/// Extra sites are the dangling degree-1 spins introduced by
/// [`SpinGraph::extend_with_dangling`]; they are part of the physical device
/// but not of the original problem, so energy readouts can exclude them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpinGraph", into = "RawSpinGraph")]
pub struct SpinGraph {
    n_sites: usize,
    edges: Vec<Edge>,
    extra_flags: Vec<bool>,
}

/// On-disk shape of [`SpinGraph`]; `extra_flags` may be omitted.
#[derive(Serialize, Deserialize)]
struct RawSpinGraph {
    n_sites: usize,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extra_flags: Option<Vec<bool>>,
}

impl TryFrom<RawSpinGraph> for SpinGraph {
    type Error = Error;

    fn try_from(raw: RawSpinGraph) -> Result<Self> {
        match raw.extra_flags {
            Some(flags) => SpinGraph::with_extra_flags(raw.n_sites, raw.edges, flags),
            None => SpinGraph::new(raw.n_sites, raw.edges),
        }
    }
}

impl From<SpinGraph> for RawSpinGraph {
    fn from(g: SpinGraph) -> Self {
        let extra_flags = if g.extra_flags.iter().any(|&f| f) {
            Some(g.extra_flags)
        } else {
            None
        };
        RawSpinGraph {
            n_sites: g.n_sites,
            edges: g.edges,
            extra_flags,
        }
    }
}

impl SpinGraph {
    /// Builds a graph with no extra sites, validating the edge list.
    pub fn new(n_sites: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::with_extra_flags(n_sites, edges, vec![false; n_sites])
    }

    /// Builds a graph with explicit extra flags, validating all invariants.
    pub fn with_extra_flags(
        n_sites: usize,
        edges: Vec<Edge>,
        extra_flags: Vec<bool>,
    ) -> Result<Self> {
        if extra_flags.len() != n_sites {
            return Err(Error::InvalidInstance(format!(
                "extra_flags length {} does not match n_sites {}",
                extra_flags.len(),
                n_sites
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.a >= n_sites || e.b >= n_sites {
                return Err(Error::InvalidInstance(format!(
                    "edge ({}, {}) out of range for {} sites",
                    e.a, e.b, n_sites
                )));
            }
            if e.a == e.b {
                return Err(Error::InvalidInstance(format!("self-loop at site {}", e.a)));
            }
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
        }
        let graph = SpinGraph {
            n_sites,
            edges,
            extra_flags,
        };
        for (site, &extra) in graph.extra_flags.iter().enumerate() {
            if extra && graph.degree(site) != 1 {
                return Err(Error::InvalidInstance(format!(
                    "extra site {} has degree {}, expected 1",
                    site,
                    graph.degree(site)
                )));
            }
        }
        Ok(graph)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn extra_flags(&self) -> &[bool] {
        &self.extra_flags
    }

    pub fn is_extra(&self, site: usize) -> bool {
        self.extra_flags[site]
    }

    pub fn has_extras(&self) -> bool {
        self.extra_flags.iter().any(|&f| f)
    }

    /// Number of sites belonging to the original problem.
    pub fn n_non_extra(&self) -> usize {
        self.extra_flags.iter().filter(|&&f| !f).count()
    }

    /// Edges of the original problem (no endpoint flagged extra).
    pub fn non_extra_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges
            .iter()
            .filter(|e| !self.extra_flags[e.a] && !self.extra_flags[e.b])
    }

    pub fn degree(&self, site: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.a == site || e.b == site)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_sites];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// True when every site can reach every other through edges.
    pub fn is_connected(&self) -> bool {
        if self.n_sites == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n_sites];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        let mut seen = vec![false; self.n_sites];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = stack.pop() {
            for &t in &adj[s] {
                if !seen[t] {
                    seen[t] = true;
                    count += 1;
                    stack.push(t);
                }
            }
        }
        count == self.n_sites
    }

    /// Raises every site's degree to the maximum degree of the input by
    /// attaching dangling degree-1 "extra" sites.
    ///
    /// Attachment edges are ferromagnetic: the extra spin then simply copies
    /// its neighbour's phase at optimum and leaves the original problem
    /// untouched. Original edges and indices are unchanged; extra sites are
    /// appended after the original indices. A regular graph comes back as an
    /// identical copy.
    pub fn extend_with_dangling(&self) -> Result<SpinGraph> {
        if self.has_extras() {
            return Err(Error::InvalidInstance(
                "graph already contains extra sites".into(),
            ));
        }
        let target = self.max_degree();
        let degrees = self.degrees();
        let mut edges = self.edges.clone();
        let mut n_sites = self.n_sites;
        let mut extra_flags = vec![false; self.n_sites];
        for site in 0..self.n_sites {
            for _ in degrees[site]..target {
                edges.push(Edge {
                    a: site,
                    b: n_sites,
                    coupling: Coupling::Fm,
                });
                extra_flags.push(true);
                n_sites += 1;
            }
        }
        SpinGraph::with_extra_flags(n_sites, edges, extra_flags)
    }

    /// Parses the JSON graph format (`n_sites`, `edges`, optional `extra_flags`).
    pub fn from_json(text: &str) -> Result<SpinGraph> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("graph JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }
}

/// Generates an Erdős–Rényi-style benchmark instance.
///
/// Each unordered pair `(i, j)` with `i < j`, visited in row-major order,
/// becomes an edge with probability `connectivity`; an edge drawn is FM with
/// probability `fm_fraction`, AFM otherwise. The sign draw happens
/// immediately after the pair draw, so seeds are portable across
/// implementations that follow the same order. Identical seeds give
/// bit-identical edge lists.
pub fn generate_random_graph(
    n_sites: usize,
    connectivity: f64,
    fm_fraction: f64,
    seed: u64,
) -> Result<SpinGraph> {
    if n_sites < 2 {
        return Err(Error::InvalidInstance(format!(
            "need at least 2 sites, got {n_sites}"
        )));
    }
    for (name, v) in [("connectivity", connectivity), ("fm_fraction", fm_fraction)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} outside [0, 1]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n_sites {
        for j in (i + 1)..n_sites {
            if rng.gen::<f64>() < connectivity {
                let coupling = if rng.gen::<f64>() < fm_fraction {
                    Coupling::Fm
                } else {
                    Coupling::Afm
                };
                edges.push(Edge { a: i, b: j, coupling });
            }
        }
    }
    SpinGraph::new(n_sites, edges)
}

/// Degree-compensated pump for the XY regime: `P + 8 n_nb J² / γ`.
///
/// The offset exactly cancels the extra linear loss a site suffers through
/// its `n_nb` connecting-mode pairs, so every site settles at the same
/// intensity regardless of degree.
pub fn compensated_pump_xy(base_p: f64, degree: usize, j: f64, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be > 0")));
    }
    Ok(base_p + 8.0 * degree as f64 * j * j / gamma)
}

/// Degree-compensated pump for the Ising regime:
/// `P + 8 n_nb J² / (γ + 2 Γ'_NL |χ|²)`.
///
/// With nonlinear loss on the connecting sites their effective decay
/// stiffens, so the compensation shrinks accordingly. `chi_abs` is the
/// stationary connecting-mode amplitude from
/// [`crate::analysis::solve_chi_cubic`]; it is taken as an argument so the
/// cubic is solved in exactly one place.
pub fn compensated_pump_ising(
    base_p: f64,
    degree: usize,
    j: f64,
    gamma: f64,
    gamma_nl_prime: f64,
    chi_abs: f64,
) -> Result<f64> {
    let effective_decay = gamma + 2.0 * gamma_nl_prime * chi_abs * chi_abs;
    if effective_decay <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "effective decay {effective_decay} must be > 0"
        )));
    }
    Ok(base_p + 8.0 * degree as f64 * j * j / effective_decay)
}

/// One phase per site; the spin configuration read out of (or fed into) the machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinConfig {
    phases: Vec<f64>,
}

impl SpinConfig {
    pub fn from_phases(phases: Vec<f64>) -> Self {
        SpinConfig { phases }
    }

    /// Ising configuration from ±1 signs: + maps to phase 0, - to π.
    pub fn from_signs(signs: &[i8]) -> Self {
        SpinConfig {
            phases: signs
                .iter()
                .map(|&s| if s >= 0 { 0.0 } else { std::f64::consts::PI })
                .collect(),
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// True when every pairwise phase difference lies within `tol` of 0 or π
    /// (mod 2π), i.e. the configuration is Ising-like.
    pub fn is_binary(&self, tol: f64) -> bool {
        self.phases.iter().all(|&p| {
            let d = angle_dist_to_binary(p - self.phases[0]);
            d <= tol
        })
    }

    /// Folds the configuration onto ±1 signs relative to site 0 (+1),
    /// snapping each relative phase to the nearer of {0, π}.
    pub fn snap_signs(&self) -> Vec<i8> {
        self.phases
            .iter()
            .map(|&p| {
                if (p - self.phases[0]).cos() >= 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    /// Signs relative to site 0 if the configuration is binary within `tol`.
    pub fn binary_signs(&self, tol: f64) -> Option<Vec<i8>> {
        if self.is_binary(tol) {
            Some(self.snap_signs())
        } else {
            None
        }
    }
}

/// Distance from an angle to the nearest multiple of π.
fn angle_dist_to_binary(delta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = delta.rem_euclid(two_pi);
    let d0 = r.min(two_pi - r);
    let dpi = (r - std::f64::consts::PI).abs();
    d0.min(dpi)
}

/// Spin energy `-Σ_edges ±cos(θ_a - θ_b)`, + for FM and - for AFM.
///
/// With `include_extra = false`, edges incident to extra sites are skipped,
/// giving the energy of the original problem.
pub fn spin_energy(graph: &SpinGraph, config: &SpinConfig, include_extra: bool) -> Result<f64> {
    if config.len() != graph.n_sites() {
        return Err(Error::InvalidInstance(format!(
            "config has {} phases for a {}-site graph",
            config.len(),
            graph.n_sites()
        )));
    }
    let phases = config.phases();
    let mut energy = 0.0;
    for e in graph.edges() {
        if !include_extra && (graph.is_extra(e.a) || graph.is_extra(e.b)) {
            continue;
        }
        energy -= e.coupling.sign() * (phases[e.a] - phases[e.b]).cos();
    }
    Ok(energy)
}
