//! Closed-form stationary predictions and state analysis.
//!
//! For a converged network the spin intensities, the connecting-mode
//! intensities and the spin energy are all fixed by algebra:
//!
//! * spin intensity: `I0 = (P - γ)/(2Γ_NL) - 4 n_nb J²/(γ Γ_NL)` (XY), with
//!   the `γ → γ + 2Γ'_NL|χ|²` replacement in the Ising regime,
//! * connecting intensity: `|χ^{S,A}|² = (8J²/γ²) I0 (1 ± cos Δφ)`,
//! * the Ising connecting amplitude solves
//!   `Γ'_NL|χ|³ + (γ/2)|χ| = 2J sqrt((P-γ)/(2Γ_NL))`.
//!
//! Inverting the connecting-intensity law turns the summed emission of the
//! selected modes into the spin energy, which is how the device is read out.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compiler::{Branch, CavityNetwork};
use crate::dynamics::{rhs, CavityState, SimParams};
use crate::error::{Error, Result};
use crate::graph::SpinConfig;

/// Predicted stationary spin intensity for a site with the given pump and
/// degree: `(pump - γ)/(2Γ_NL) - 4·degree·J²/(γ Γ_NL)`.
///
/// May be ≤ 0 (below threshold); the value is returned as-is, see
/// [`StationaryPrediction`] for the flagged bundle.
pub fn predicted_i0(params: &SimParams, pump: f64, degree: usize) -> f64 {
    (pump - params.gamma) / (2.0 * params.gamma_nl)
        - 4.0 * degree as f64 * params.j * params.j / (params.gamma * params.gamma_nl)
}

/// Predicted connecting-mode intensity `(8J²/γ²)·i0·(1 ± cos Δφ)`,
/// + for the S branch and - for A.
pub fn predicted_chi_intensity(params: &SimParams, i0: f64, phase_diff: f64, branch: Branch) -> f64 {
    let base = 8.0 * params.j * params.j / (params.gamma * params.gamma) * i0;
    match branch {
        Branch::S => base * (1.0 + phase_diff.cos()),
        Branch::A => base * (1.0 - phase_diff.cos()),
    }
}

/// Solves `Γ'_NL x³ + (γ/2) x = rhs_val` for the unique root x ≥ 0.
///
/// The left side is strictly increasing for `Γ'_NL ≥ 0`, so a bracketed
/// Newton/bisection hybrid converges unconditionally; a closed-form Cardano
/// solution would lose digits as `Γ'_NL → 0`.
fn solve_increasing_cubic(gamma_nl_prime: f64, gamma: f64, rhs_val: f64) -> f64 {
    if rhs_val == 0.0 {
        return 0.0;
    }
    if gamma_nl_prime == 0.0 {
        return 2.0 * rhs_val / gamma;
    }
    let f = |x: f64| gamma_nl_prime * x * x * x + 0.5 * gamma * x - rhs_val;
    let df = |x: f64| 3.0 * gamma_nl_prime * x * x + 0.5 * gamma;

    // The linear (Γ' = 0) root bounds the true root from above; cube-root
    // bound covers the γ = 0 end.
    let mut hi = (2.0 * rhs_val / gamma.max(f64::MIN_POSITIVE))
        .min((rhs_val / gamma_nl_prime).cbrt().max(f64::MIN_POSITIVE));
    if f(hi) < 0.0 {
        hi = (rhs_val / gamma_nl_prime).cbrt() + 2.0 * rhs_val / gamma.max(1e-300);
    }
    let mut lo = 0.0f64;
    let mut x = 0.5 * hi;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / df(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= f64::EPSILON * x.abs() {
            break;
        }
    }
    x
}

/// Stationary connecting-mode amplitude `|χ|` in the Ising regime: the
/// positive root of `Γ'_NL|χ|³ + (γ/2)|χ| - 2J sqrt((P-γ)/(2Γ_NL)) = 0`.
///
/// Uses the base pump `params.p`; errors below threshold (`P ≤ γ`).
pub fn solve_chi_cubic(params: &SimParams) -> Result<f64> {
    if params.p <= params.gamma {
        return Err(Error::BelowThreshold(format!(
            "p = {} does not exceed gamma = {}",
            params.p, params.gamma
        )));
    }
    let psi_abs = ((params.p - params.gamma) / (2.0 * params.gamma_nl)).sqrt();
    Ok(solve_increasing_cubic(
        params.gamma_nl_prime,
        params.gamma,
        2.0 * params.j * psi_abs,
    ))
}

/// Corrected stationary spin intensity once the connecting modes carry the
/// Ising amplitude: `(P-γ)/(2Γ_NL) - 4·degree·J²/((γ + 2|χ|²Γ'_NL)Γ_NL)`.
pub fn i0_mod(params: &SimParams, degree: usize, chi_abs: f64) -> f64 {
    let effective_decay = params.gamma + 2.0 * chi_abs * chi_abs * params.gamma_nl_prime;
    (params.p - params.gamma) / (2.0 * params.gamma_nl)
        - 4.0 * degree as f64 * params.j * params.j / (effective_decay * params.gamma_nl)
}

/// Bundle of closed-form predictions for one site.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryPrediction {
    pub i0: f64,
    pub above_threshold: bool,
    pub chi_abs_ising: f64,
    pub i0_mod: f64,
}

impl StationaryPrediction {
    pub fn compute(params: &SimParams, pump: f64, degree: usize) -> StationaryPrediction {
        let i0 = predicted_i0(params, pump, degree);
        let chi_abs_ising = if params.p > params.gamma {
            solve_chi_cubic(params).expect("checked threshold")
        } else {
            0.0
        };
        let mut pp = params.clone();
        pp.p = pump;
        StationaryPrediction {
            i0,
            above_threshold: i0 > 0.0 && params.p > params.gamma,
            chi_abs_ising,
            i0_mod: i0_mod(&pp, degree, chi_abs_ising),
        }
    }

    /// Connecting intensity at a given spin phase difference.
    pub fn chi_intensity(&self, params: &SimParams, phase_diff: f64, branch: Branch) -> f64 {
        predicted_chi_intensity(params, self.i0, phase_diff, branch)
    }
}

/// The common predicted spin intensity of a network: the per-site prediction
/// averaged over non-extra sites (identical across sites when the network is
/// properly homogenized).
pub fn network_i0(network: &CavityNetwork) -> f64 {
    let degrees = network.spin_degrees();
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in 0..network.n_spin_modes {
        if !network.extra_flags[m] {
            sum += predicted_i0(&network.params, network.pump[m], degrees[m]);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Reads the spin configuration out of a state: one phase `arg(ψ_n)` and one
/// intensity `|ψ_n|²` per spin site.
///
/// Errors when any spin mode is dimmer than `10⁻⁶` of the predicted
/// intensity: an empty condensate carries no phase.
pub fn extract_spins(network: &CavityNetwork, state: &CavityState) -> Result<(SpinConfig, Vec<f64>)> {
    let i0 = network_i0(network);
    if i0 <= 0.0 {
        return Err(Error::BelowThreshold(format!(
            "predicted spin intensity {i0} is not positive"
        )));
    }
    let mut phases = Vec::with_capacity(network.n_spin_modes);
    let mut intensities = Vec::with_capacity(network.n_spin_modes);
    for (site, a) in state.amplitudes[..network.n_spin_modes].iter().enumerate() {
        let intensity = a.norm_sqr();
        if intensity < 1e-6 * i0 {
            return Err(Error::EmptyCondensate { site, intensity });
        }
        phases.push(a.arg());
        intensities.push(intensity);
    }
    Ok((SpinConfig::from_phases(phases), intensities))
}

/// Largest relative deviation of the non-extra spin intensities from their
/// mean. This is the amplitude heterogeneity the whole scheme exists to
/// cancel.
pub fn homogeneity_deviation(network: &CavityNetwork, state: &CavityState) -> Result<f64> {
    let mut intensities = Vec::new();
    for m in 0..network.n_spin_modes {
        if !network.extra_flags[m] {
            intensities.push(state.amplitudes[m].norm_sqr());
        }
    }
    let mean: f64 = intensities.iter().sum::<f64>() / intensities.len().max(1) as f64;
    if mean == 0.0 {
        return Err(Error::Undefined(
            "homogeneity of an all-zero state".into(),
        ));
    }
    Ok(intensities
        .iter()
        .map(|&i| (i - mean).abs() / mean)
        .fold(0.0, f64::max))
}

/// Which affine inversion maps summed connecting intensities to energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    Xy,
    Ising,
}

/// Result of an energy readout.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReadout {
    /// `Σ_edges |χ^X|²` over non-extra edges, X selected per edge sign.
    pub sum_chi2: f64,
    /// The spin energy recovered from `sum_chi2` by the affine calibration.
    pub e_spin: f64,
}

/// Sums the selected connecting-mode intensity per non-extra edge and
/// inverts the intensity law to the spin energy:
/// `e_spin = n_edges - κ·sum_chi2` with `κ = γ²/(8J²I0)` (XY) or
/// `κ = 2/|χ|²` from the cubic (Ising).
pub fn readout_energy(
    network: &CavityNetwork,
    state: &CavityState,
    calibration: Calibration,
) -> Result<EnergyReadout> {
    let params = &network.params;
    let mut sum_chi2 = 0.0;
    let mut n_edges = 0usize;
    for e in network.non_extra_edges() {
        let mode = match e.readout_selector {
            Branch::S => e.s_mode,
            Branch::A => e.a_mode,
        };
        sum_chi2 += state.amplitudes[mode].norm_sqr();
        n_edges += 1;
    }
    let kappa = match calibration {
        Calibration::Xy => {
            let i0 = network_i0(network);
            if i0 <= 0.0 {
                return Err(Error::BelowThreshold(format!(
                    "predicted spin intensity {i0} is not positive"
                )));
            }
            params.gamma * params.gamma / (8.0 * params.j * params.j * i0)
        }
        Calibration::Ising => {
            let chi_abs = solve_chi_cubic(params)?;
            if chi_abs <= 0.0 {
                return Err(Error::BelowThreshold(
                    "connecting modes stay empty (J = 0?)".into(),
                ));
            }
            2.0 / (chi_abs * chi_abs)
        }
    };
    Ok(EnergyReadout {
        sum_chi2,
        e_spin: n_edges as f64 - kappa * sum_chi2,
    })
}

/// Builds the candidate stationary state for a spin configuration and
/// returns the max modulus of the equations of motion evaluated on it.
/// Near zero certifies a fixed point.
///
/// Spin amplitudes take the corrected intensity for their site's pump and
/// degree; each connecting mode takes its stationary amplitude — the
/// positive root of `Γ'_NL|χ|³ + (γ/2)|χ| = J|ψ_a ± ψ_b|` — with a π/2
/// phase offset against `ψ_a ± ψ_b`. For a binary configuration this is
/// exactly one filled mode per edge at the cubic amplitude while the other
/// stays empty; non-binary configurations with `Γ'_NL > 0` yield a residual
/// of order one, certifying they are not fixed points.
pub fn ising_fixed_point_residual(
    network: &CavityNetwork,
    config: &SpinConfig,
    params: &SimParams,
) -> Result<f64> {
    if config.len() != network.n_spin_modes {
        return Err(Error::InvalidInstance(format!(
            "config has {} phases for {} spin modes",
            config.len(),
            network.n_spin_modes
        )));
    }
    let chi_abs_base = solve_chi_cubic(params)?;
    let degrees = network.spin_degrees();

    let mut amps = vec![Complex64::ZERO; network.total_modes()];
    for m in 0..network.n_spin_modes {
        let mut site_params = params.clone();
        site_params.p = network.pump[m];
        let intensity = i0_mod(&site_params, degrees[m], chi_abs_base);
        if intensity <= 0.0 {
            return Err(Error::BelowThreshold(format!(
                "site {m}: corrected intensity {intensity} is not positive"
            )));
        }
        amps[m] = Complex64::from_polar(intensity.sqrt(), config.phases()[m]);
    }
    for e in &network.edge_records {
        let psi_a = amps[e.spin_a];
        let psi_b = amps[e.spin_b];
        for (mode, drive) in [
            (e.s_mode, e.signs.a_s * psi_a + e.signs.b_s * psi_b),
            (e.a_mode, e.signs.a_a * psi_a + e.signs.b_a * psi_b),
        ] {
            let modulus =
                solve_increasing_cubic(params.gamma_nl_prime, params.gamma, params.j * drive.norm());
            if modulus > 0.0 {
                amps[mode] = Complex64::i() * modulus * drive / drive.norm();
            }
        }
    }

    let state = CavityState {
        amplitudes: amps,
        time: 0.0,
    };
    let mut derivative = vec![Complex64::ZERO; network.total_modes()];
    rhs(network, params, &state.amplitudes, &mut derivative);
    Ok(derivative.iter().map(|d| d.norm()).fold(0.0, f64::max))
}
