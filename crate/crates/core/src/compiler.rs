//! Compilation of a spin graph into the physical coupled-cavity network.
//!
//! Every problem site becomes a pumped "spin" mode; every edge becomes an
//! undriven pair of "connecting" modes, one symmetric (S) and one
//! antisymmetric (A). All Josephson couplings have strength +J except the
//! single link between the A mode and the edge's second endpoint, which is
//! -J. That one flipped sign makes the S and A transport paths between the
//! two spin modes interfere destructively, so particles never flow from one
//! spin to the other and the amplitudes stay homogeneous.
//!
//! Ferromagnetic and antiferromagnetic edges are physically identical; the
//! edge sign only decides which connecting mode (S for FM, A for AFM) is
//! summed at energy readout.

use serde::{Deserialize, Serialize};

use crate::analysis::solve_chi_cubic;
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::graph::{compensated_pump_ising, compensated_pump_xy, Coupling, SpinGraph};

/// Which connecting mode of a pair is meant: symmetric or antisymmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    S,
    A,
}

/// Per-site pump assignment produced by [`compile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpStrategy {
    /// Every spin mode is pumped at `params.p`.
    Uniform,
    /// Each spin mode is pumped at `params.p` plus its degree-dependent
    /// compensation offset.
    Compensated,
}

/// The four coupling signs of one edge cell. `a`/`b` are the edge endpoints,
/// `s`/`a_mode` the connecting branches; exactly `b_a` is -1 in a valid
/// network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSigns {
    pub a_s: f64,
    pub b_s: f64,
    pub a_a: f64,
    pub b_a: f64,
}

impl EdgeSigns {
    pub fn canonical() -> Self {
        EdgeSigns {
            a_s: 1.0,
            b_s: 1.0,
            a_a: 1.0,
            b_a: -1.0,
        }
    }
}

/// One compiled edge: endpoints, the indices of its S/A modes in the state
/// vector, the coupling-sign cell and the readout selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub spin_a: usize,
    pub spin_b: usize,
    pub s_mode: usize,
    pub a_mode: usize,
    pub signs: EdgeSigns,
    pub readout_selector: Branch,
    /// True when either endpoint is a dangling extra site; such edges are
    /// excluded from problem-energy readouts.
    pub extra: bool,
}

/// The compiled device: mode layout, sign table and per-site pumps.
///
/// Mode indexing is fixed for reproducible state dumps: spin modes first in
/// graph order, then S and A modes per edge in edge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityNetwork {
    pub n_spin_modes: usize,
    pub edge_records: Vec<EdgeRecord>,
    /// Total pump per spin mode (base + compensation offset).
    pub pump: Vec<f64>,
    /// Compensation offset alone; the pulsed protocol re-adds it on top of
    /// the feedback gain.
    pub pump_offset: Vec<f64>,
    /// Which spin modes are dangling extras.
    pub extra_flags: Vec<bool>,
    /// Parameters the network was compiled with. `params.p` is the base
    /// pump; analysis routines use the physical rates stored here.
    pub params: SimParams,
}

impl CavityNetwork {
    pub fn total_modes(&self) -> usize {
        self.n_spin_modes + 2 * self.edge_records.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_records.len()
    }

    /// Edges of the original problem (no extra endpoint).
    pub fn non_extra_edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edge_records.iter().filter(|e| !e.extra)
    }

    /// Structural degree (number of incident edges) of each spin mode.
    pub fn spin_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_spin_modes];
        for e in &self.edge_records {
            deg[e.spin_a] += 1;
            deg[e.spin_b] += 1;
        }
        deg
    }

    /// Returns a copy with every spin-mode pump set to `gain` plus the
    /// stored compensation offset. Used by the pulsed protocol to switch
    /// between readout and feedback gains.
    pub fn with_spin_gain(&self, gain: f64) -> CavityNetwork {
        let mut out = self.clone();
        for (p, off) in out.pump.iter_mut().zip(&self.pump_offset) {
            *p = gain + off;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }
}

/// Compiles a spin graph into its cavity network.
///
/// `params.p` is the base pump; under [`PumpStrategy::Compensated`] each
/// site additionally receives its degree-dependent offset (the XY formula
/// when `gamma_nl_prime == 0`, the effective-decay formula otherwise).
pub fn compile(
    graph: &SpinGraph,
    params: &SimParams,
    pump_strategy: PumpStrategy,
) -> Result<CavityNetwork> {
    params.validate()?;
    if params.gamma <= 0.0 {
        return Err(Error::InvalidParameter(
            "compilation requires gamma > 0".into(),
        ));
    }

    let n_spin = graph.n_sites();
    let degrees = graph.degrees();

    let pump_offset: Vec<f64> = match pump_strategy {
        PumpStrategy::Uniform => vec![0.0; n_spin],
        PumpStrategy::Compensated => {
            if params.gamma_nl_prime == 0.0 {
                degrees
                    .iter()
                    .map(|&d| Ok(compensated_pump_xy(0.0, d, params.j, params.gamma)?))
                    .collect::<Result<_>>()?
            } else {
                let chi_abs = solve_chi_cubic(params)?;
                degrees
                    .iter()
                    .map(|&d| {
                        Ok(compensated_pump_ising(
                            0.0,
                            d,
                            params.j,
                            params.gamma,
                            params.gamma_nl_prime,
                            chi_abs,
                        )?)
                    })
                    .collect::<Result<_>>()?
            }
        }
    };
    let pump: Vec<f64> = pump_offset.iter().map(|off| params.p + off).collect();

    let mut edge_records = Vec::with_capacity(graph.edges().len());
    for (i, e) in graph.edges().iter().enumerate() {
        edge_records.push(EdgeRecord {
            spin_a: e.a,
            spin_b: e.b,
            s_mode: n_spin + 2 * i,
            a_mode: n_spin + 2 * i + 1,
            signs: EdgeSigns::canonical(),
            readout_selector: match e.coupling {
                Coupling::Fm => Branch::S,
                Coupling::Afm => Branch::A,
            },
            extra: graph.is_extra(e.a) || graph.is_extra(e.b),
        });
    }

    Ok(CavityNetwork {
        n_spin_modes: n_spin,
        edge_records,
        pump,
        pump_offset,
        extra_flags: graph.extra_flags().to_vec(),
        params: params.clone(),
    })
}

/// Verifies the one-minus-per-edge sign pattern; returns the indices of
/// violating edges (empty on pass).
pub fn edge_sign_audit(network: &CavityNetwork) -> Vec<usize> {
    network
        .edge_records
        .iter()
        .enumerate()
        .filter(|(_, e)| e.signs != EdgeSigns::canonical())
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_random_graph, Edge, SpinGraph};

    fn params() -> SimParams {
        SimParams::default()
    }

    #[test]
    fn two_spin_fm_graph_compiles_to_four_modes() {
        let g = SpinGraph::new(2, vec![Edge { a: 0, b: 1, coupling: Coupling::Fm }]).unwrap();
        let net = compile(&g, &params(), PumpStrategy::Uniform).unwrap();
        assert_eq!(net.total_modes(), 4);
        let e = &net.edge_records[0];
        // Exactly one -1 entry, on the A mode's second endpoint.
        let signs = [e.signs.a_s, e.signs.b_s, e.signs.a_a, e.signs.b_a];
        assert_eq!(signs.iter().filter(|&&s| s == -1.0).count(), 1);
        assert_eq!(e.signs.b_a, -1.0);
        assert_eq!(e.readout_selector, Branch::S);
    }

    #[test]
    fn afm_edges_select_the_antisymmetric_mode() {
        let g = SpinGraph::new(2, vec![Edge { a: 0, b: 1, coupling: Coupling::Afm }]).unwrap();
        let net = compile(&g, &params(), PumpStrategy::Uniform).unwrap();
        assert_eq!(net.edge_records[0].readout_selector, Branch::A);
        // Identical sign table regardless of the edge sign.
        assert_eq!(net.edge_records[0].signs, EdgeSigns::canonical());
    }

    #[test]
    fn mode_count_matches_extended_reference_instance() {
        // A 7-site, 10-edge instance with max degree 4 gains 8 extras; every
        // edge adds 2 modes.
        let mut seed = 0;
        let g = loop {
            let g = generate_random_graph(7, 0.5, 0.0, seed).unwrap();
            if g.max_degree() == 4 && g.edges().len() == 10 {
                break g;
            }
            seed += 1;
        };
        let ext = g.extend_with_dangling().unwrap();
        assert_eq!(ext.n_sites(), 7 + 8);
        let net = compile(&ext, &params(), PumpStrategy::Compensated).unwrap();
        assert_eq!(net.n_spin_modes, 15);
        assert_eq!(net.total_modes(), 15 + 2 * ext.edges().len());
    }

    #[test]
    fn compile_is_deterministic() {
        let g = generate_random_graph(8, 0.5, 0.5, 11).unwrap();
        let a = compile(&g, &params(), PumpStrategy::Compensated).unwrap();
        let b = compile(&g, &params(), PumpStrategy::Compensated).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compensated_pumps_follow_site_degree() {
        let g = SpinGraph::new(
            3,
            vec![
                Edge { a: 0, b: 1, coupling: Coupling::Fm },
                Edge { a: 1, b: 2, coupling: Coupling::Fm },
            ],
        )
        .unwrap();
        let p = params();
        let net = compile(&g, &p, PumpStrategy::Compensated).unwrap();
        // Degrees 1, 2, 1 at J = 0.5, gamma = 4: offsets 0.5, 1.0, 0.5.
        assert_eq!(net.pump_offset, vec![0.5, 1.0, 0.5]);
        assert_eq!(net.pump, vec![p.p + 0.5, p.p + 1.0, p.p + 0.5]);

        let uni = compile(&g, &p, PumpStrategy::Uniform).unwrap();
        assert!(uni.pump.iter().all(|&x| x == p.p));
    }

    #[test]
    fn sign_audit_passes_compile_output_and_catches_corruption() {
        let g = generate_random_graph(6, 0.8, 0.5, 2).unwrap();
        let mut net = compile(&g, &params(), PumpStrategy::Uniform).unwrap();
        assert!(edge_sign_audit(&net).is_empty());

        net.edge_records[3].signs.a_s = -1.0;
        assert_eq!(edge_sign_audit(&net), vec![3]);

        let empty = compile(
            &SpinGraph::new(2, vec![]).unwrap(),
            &params(),
            PumpStrategy::Uniform,
        )
        .unwrap();
        assert!(edge_sign_audit(&empty).is_empty());
    }

    #[test]
    fn unphysical_params_are_rejected() {
        let g = SpinGraph::new(2, vec![Edge { a: 0, b: 1, coupling: Coupling::Fm }]).unwrap();
        let mut p = params();
        p.gamma = 0.0;
        assert!(compile(&g, &p, PumpStrategy::Uniform).is_err());
        let mut q = params();
        q.gamma_nl = -1.0;
        assert!(compile(&g, &q, PumpStrategy::Uniform).is_err());
    }

    #[test]
    fn with_spin_gain_swaps_base_and_keeps_offsets() {
        let g = SpinGraph::new(
            3,
            vec![
                Edge { a: 0, b: 1, coupling: Coupling::Fm },
                Edge { a: 1, b: 2, coupling: Coupling::Fm },
            ],
        )
        .unwrap();
        let net = compile(&g, &params(), PumpStrategy::Compensated).unwrap();
        let fed = net.with_spin_gain(3.25);
        assert_eq!(fed.pump, vec![3.75, 4.25, 3.75]);
        assert_eq!(fed.pump_offset, net.pump_offset);
    }
}
