//! Mean-field equations of motion of the coupled-cavity network.
//!
//! Spin modes see gain, linear decay and saturable nonlinear loss;
//! connecting modes see decay and (in the Ising regime) their own nonlinear
//! loss. With the amplitudes written so that the coupling enters as `iJ`:
//!
//! ```text
//! dψ_m/dt      = (½(P_m - γ) - Γ_NL |ψ_m|²) ψ_m + iJ Σ_e (s_mS χ_e^S + s_mA χ_e^A)
//! dχ_e^X/dt    = (-γ/2 - Γ'_NL |χ_e^X|²) χ_e^X + iJ (s_aX ψ_a + s_bX ψ_b)
//! ```
//!
//! where the sign table `s` comes from the compiler and has exactly one -1
//! per edge. Integration uses fixed-step classical RK4: the system is
//! non-stiff at the reference rates and a fixed step keeps trajectories
//! bit-reproducible; adaptive stepping would trade that away for accuracy
//! nobody needs here.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compiler::CavityNetwork;
use crate::error::{Error, Result};

/// Physical and numerical parameters, in units where the spin-site
/// nonlinear loss sets the scale (`gamma_nl = 1` defines time and
/// amplitude units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Spin-site gain (base value; compensation offsets come on top).
    pub p: f64,
    /// Linear decay on every cavity.
    pub gamma: f64,
    /// Nonlinear loss on spin sites.
    pub gamma_nl: f64,
    /// Nonlinear loss on connecting sites; 0 gives XY behaviour, > 0 Ising.
    pub gamma_nl_prime: f64,
    /// Josephson coupling rate.
    pub j: f64,
    /// Integrator time step.
    pub dt: f64,
    /// Standard deviation per quadrature of initial/injected noise.
    pub noise_amp: f64,
    /// Default integration time.
    pub duration: f64,
}

impl Default for SimParams {
    /// Reference parameter set: `P = 12`, `γ = 4`, `J = 0.5` in units of
    /// `Γ_NL`, XY regime. The step 0.005 keeps `dt·max(p, γ, 4J) < 0.1`
    /// even after degree compensation raises the pump.
    fn default() -> Self {
        SimParams {
            p: 12.0,
            gamma: 4.0,
            gamma_nl: 1.0,
            gamma_nl_prime: 0.0,
            j: 0.5,
            dt: 0.005,
            noise_amp: 1e-3,
            duration: 1000.0,
        }
    }
}

impl SimParams {
    /// Checks ranges and the step-size guard `dt·max(p, γ, 4J) < 0.1`.
    ///
    /// `gamma = 0` is admitted (undamped connecting modes are used by the
    /// decoupling tests); operations that divide by `gamma` check positivity
    /// themselves.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if !(self.gamma_nl > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_nl = {} must be > 0",
                self.gamma_nl
            )));
        }
        if !(self.gamma_nl_prime >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma_nl_prime = {}",
                self.gamma_nl_prime
            )));
        }
        if !(self.j >= 0.0) {
            return Err(Error::InvalidParameter(format!("j = {}", self.j)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration = {}",
                self.duration
            )));
        }
        if !(self.noise_amp >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_amp = {}",
                self.noise_amp
            )));
        }
        let fastest = self.p.max(self.gamma).max(4.0 * self.j);
        if self.dt * fastest >= 0.1 {
            return Err(Error::InvalidParameter(format!(
                "dt = {} too coarse: dt*max(p, gamma, 4j) = {} must stay below 0.1",
                self.dt,
                self.dt * fastest
            )));
        }
        Ok(())
    }
}

/// Complex amplitudes of every mode at one instant (compiler mode order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl CavityState {
    pub fn zero(network: &CavityNetwork) -> Self {
        CavityState {
            amplitudes: vec![Complex64::ZERO; network.total_modes()],
            time: 0.0,
        }
    }

    /// Intensities `|ψ_n|²` of the spin modes only.
    pub fn spin_intensities(&self, network: &CavityNetwork) -> Vec<f64> {
        self.amplitudes[..network.n_spin_modes]
            .iter()
            .map(|a| a.norm_sqr())
            .collect()
    }

    /// Mean spin-mode intensity over non-extra sites.
    pub fn mean_spin_intensity(&self, network: &CavityNetwork) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, a) in self.amplitudes[..network.n_spin_modes].iter().enumerate() {
            if !network.extra_flags[i] {
                sum += a.norm_sqr();
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

/// Draws an initial state with independent complex Gaussian noise of
/// standard deviation `noise_amp` per quadrature on every mode.
/// Deterministic per seed; `noise_amp = 0` yields the zero state.
pub fn init_noise(network: &CavityNetwork, noise_amp: f64, seed: u64) -> Result<CavityState> {
    if !(noise_amp >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise_amp = {noise_amp}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = CavityState::zero(network);
    add_noise(&mut state, noise_amp, &mut rng);
    Ok(state)
}

/// Adds independent complex Gaussian noise (per-quadrature std `amp`) to
/// every mode, drawing re then im in mode order.
pub fn add_noise<R: rand::Rng>(state: &mut CavityState, amp: f64, rng: &mut R) {
    if amp == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, amp).expect("valid std");
    for a in &mut state.amplitudes {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        *a += Complex64::new(re, im);
    }
}

/// Evaluates the right-hand side of the equations of motion into `out`.
pub(crate) fn rhs(
    network: &CavityNetwork,
    params: &SimParams,
    amps: &[Complex64],
    out: &mut [Complex64],
) {
    let n_spin = network.n_spin_modes;
    let ij = Complex64::new(0.0, params.j);

    for m in 0..n_spin {
        let a = amps[m];
        let lin = 0.5 * (network.pump[m] - params.gamma) - params.gamma_nl * a.norm_sqr();
        out[m] = lin * a;
    }
    for e in &network.edge_records {
        let s = amps[e.s_mode];
        let aa = amps[e.a_mode];
        out[e.spin_a] += ij * (e.signs.a_s * s + e.signs.a_a * aa);
        out[e.spin_b] += ij * (e.signs.b_s * s + e.signs.b_a * aa);

        let psi_a = amps[e.spin_a];
        let psi_b = amps[e.spin_b];
        let decay_s = -0.5 * params.gamma - params.gamma_nl_prime * s.norm_sqr();
        let decay_a = -0.5 * params.gamma - params.gamma_nl_prime * aa.norm_sqr();
        out[e.s_mode] = decay_s * s + ij * (e.signs.a_s * psi_a + e.signs.b_s * psi_b);
        out[e.a_mode] = decay_a * aa + ij * (e.signs.a_a * psi_a + e.signs.b_a * psi_b);
    }
}

/// Scratch buffers for one RK4 step, reused across steps of a trajectory.
struct Rk4Buffers {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Buffers {
    fn new(n: usize) -> Self {
        Rk4Buffers {
            k1: vec![Complex64::ZERO; n],
            k2: vec![Complex64::ZERO; n],
            k3: vec![Complex64::ZERO; n],
            k4: vec![Complex64::ZERO; n],
            tmp: vec![Complex64::ZERO; n],
        }
    }
}

/// One classical RK4 step, in place. Errors with the offending mode index
/// if any amplitude turns non-finite.
fn step_in_place(
    network: &CavityNetwork,
    params: &SimParams,
    state: &mut CavityState,
    bufs: &mut Rk4Buffers,
) -> Result<()> {
    let dt = params.dt;
    let y = &mut state.amplitudes;
    let n = y.len();

    rhs(network, params, y, &mut bufs.k1);
    for i in 0..n {
        bufs.tmp[i] = y[i] + 0.5 * dt * bufs.k1[i];
    }
    rhs(network, params, &bufs.tmp, &mut bufs.k2);
    for i in 0..n {
        bufs.tmp[i] = y[i] + 0.5 * dt * bufs.k2[i];
    }
    rhs(network, params, &bufs.tmp, &mut bufs.k3);
    for i in 0..n {
        bufs.tmp[i] = y[i] + dt * bufs.k3[i];
    }
    rhs(network, params, &bufs.tmp, &mut bufs.k4);

    let w = dt / 6.0;
    for i in 0..n {
        y[i] += w * (bufs.k1[i] + 2.0 * bufs.k2[i] + 2.0 * bufs.k3[i] + bufs.k4[i]);
    }
    state.time += dt;

    for (i, a) in y.iter().enumerate() {
        if !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::Divergence {
                mode: i,
                time: state.time,
            });
        }
    }
    Ok(())
}

/// Advances the state by one time step `params.dt`.
pub fn step(network: &CavityNetwork, state: &CavityState, params: &SimParams) -> Result<CavityState> {
    if state.amplitudes.len() != network.total_modes() {
        return Err(Error::InvalidInstance(format!(
            "state has {} modes, network {}",
            state.amplitudes.len(),
            network.total_modes()
        )));
    }
    let mut next = state.clone();
    let mut bufs = Rk4Buffers::new(next.amplitudes.len());
    step_in_place(network, params, &mut next, &mut bufs)?;
    Ok(next)
}

/// Integrates for `⌈duration / dt⌉` steps.
pub fn evolve(
    network: &CavityNetwork,
    state: &CavityState,
    params: &SimParams,
    duration: f64,
) -> Result<CavityState> {
    evolve_sampled(network, state, params, duration, None, &mut |_| {})
}

/// Like [`evolve`], invoking `on_sample` every `sample_stride` steps (and on
/// the final state) when a stride is given. Both entry points share the same
/// step loop, so trajectories are bit-identical either way.
pub fn evolve_sampled(
    network: &CavityNetwork,
    state: &CavityState,
    params: &SimParams,
    duration: f64,
    sample_stride: Option<usize>,
    on_sample: &mut dyn FnMut(&CavityState),
) -> Result<CavityState> {
    if state.amplitudes.len() != network.total_modes() {
        return Err(Error::InvalidInstance(format!(
            "state has {} modes, network {}",
            state.amplitudes.len(),
            network.total_modes()
        )));
    }
    if duration < params.dt {
        return Err(Error::InvalidParameter(format!(
            "duration {} shorter than one step {}",
            duration, params.dt
        )));
    }
    let n_steps = (duration / params.dt).ceil() as u64;
    let mut current = state.clone();
    let mut bufs = Rk4Buffers::new(current.amplitudes.len());
    for k in 0..n_steps {
        step_in_place(network, params, &mut current, &mut bufs)?;
        if let Some(stride) = sample_stride {
            if stride > 0 && ((k + 1) % stride as u64 == 0 || k + 1 == n_steps) {
                on_sample(&current);
            }
        }
    }
    Ok(current)
}

/// Stationarity test: the largest per-mode rate of change, relative to the
/// mode amplitude, must stay below `tol`. A global phase drift between the
/// two states is removed first, so slowly rotating but otherwise settled
/// states count as stationary.
pub fn is_stationary(prev: &CavityState, next: &CavityState, tol: f64) -> bool {
    assert_eq!(prev.amplitudes.len(), next.amplitudes.len());
    let dt = next.time - prev.time;
    assert!(dt > 0.0, "next state must be later than prev");

    // Optimal global rotation aligning next onto prev.
    let overlap: Complex64 = next
        .amplitudes
        .iter()
        .zip(&prev.amplitudes)
        .map(|(n, p)| n * p.conj())
        .sum();
    let rot = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        Complex64::ONE
    };

    let scale = prev
        .amplitudes
        .iter()
        .map(|a| a.norm())
        .fold(0.0f64, f64::max);
    let eps_floor = 1e-12 * scale;

    let mut worst = 0.0f64;
    for (p, n) in prev.amplitudes.iter().zip(&next.amplitudes) {
        let change = (n * rot - p).norm();
        if change == 0.0 {
            continue;
        }
        let rate = change / (dt * (p.norm() + eps_floor));
        worst = worst.max(rate);
    }
    worst < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile, PumpStrategy};
    use crate::graph::{Coupling, Edge, SpinGraph};

    fn single_site_network(params: &SimParams) -> CavityNetwork {
        // Two sites, no edges: site 1 stays dark, site 0 is the probe.
        let g = SpinGraph::new(2, vec![]).unwrap();
        compile(&g, params, PumpStrategy::Uniform).unwrap()
    }

    fn plaquette(params: &SimParams) -> CavityNetwork {
        let g = SpinGraph::new(2, vec![Edge { a: 0, b: 1, coupling: Coupling::Fm }]).unwrap();
        compile(&g, params, PumpStrategy::Uniform).unwrap()
    }

    #[test]
    fn params_validation_enforces_guard() {
        let mut p = SimParams::default();
        assert!(p.validate().is_ok());
        p.dt = 0.01; // 0.01 * 12 >= 0.1
        assert!(p.validate().is_err());
        let mut q = SimParams::default();
        q.gamma = -1.0;
        assert!(q.validate().is_err());
        let mut r = SimParams::default();
        r.gamma = 0.0; // allowed: decoupling tests run undamped
        assert!(r.validate().is_ok());
    }

    #[test]
    fn noise_init_is_seed_deterministic_and_small() {
        let params = SimParams::default();
        let net = plaquette(&params);
        let a = init_noise(&net, 1e-3, 5).unwrap();
        let b = init_noise(&net, 1e-3, 5).unwrap();
        assert_eq!(a, b);
        let c = init_noise(&net, 1e-3, 6).unwrap();
        assert_ne!(a, c);
        // All amplitudes far below the condensate scale sqrt(I0) ~ 2.
        assert!(a.amplitudes.iter().all(|x| x.norm() < 1e-2));

        let z = init_noise(&net, 0.0, 5).unwrap();
        assert!(z.amplitudes.iter().all(|x| x.norm() == 0.0));
        assert!(init_noise(&net, -1.0, 0).is_err());
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let params = SimParams::default();
        let net = plaquette(&params);
        let z = CavityState::zero(&net);
        let next = step(&net, &z, &params).unwrap();
        assert!(next.amplitudes.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn uncoupled_site_follows_logistic_intensity_law() {
        // With J = 0 the intensity obeys dI/dt = (P - γ)I - 2Γ_NL I², whose
        // closed form is I(t) = I_inf / (1 + (I_inf/I(0) - 1) e^{-(P-γ)t}).
        let mut params = SimParams::default();
        params.j = 0.0;
        params.p = 9.0;
        let net = single_site_network(&params);
        let mut state = CavityState::zero(&net);
        state.amplitudes[0] = Complex64::new(0.05, 0.02);
        let i0 = state.amplitudes[0].norm_sqr();
        let i_inf = (params.p - params.gamma) / (2.0 * params.gamma_nl);

        let t_end = 3.0;
        let evolved = evolve(&net, &state, &params, t_end).unwrap();
        let t = evolved.time;
        let expected = i_inf / (1.0 + (i_inf / i0 - 1.0) * (-(params.p - params.gamma) * t).exp());
        let got = evolved.amplitudes[0].norm_sqr();
        assert!(
            (got - expected).abs() / expected < 1e-8,
            "got {got}, expected {expected}"
        );

        // And it settles at (P - γ)/(2 Γ_NL).
        let settled = evolve(&net, &evolved, &params, 20.0).unwrap();
        assert!((settled.amplitudes[0].norm_sqr() - i_inf).abs() / i_inf < 1e-10);
    }

    #[test]
    fn plaquette_reaches_predicted_common_intensity() {
        // Degree-1 sites at P = 14: I0 = (14-4)/2 - 4*0.25/4 = 4.75.
        let mut params = SimParams::default();
        params.p = 14.0;
        let net = plaquette(&params);
        let state = init_noise(&net, 1e-3, 9).unwrap();
        let end = evolve(&net, &state, &params, 300.0).unwrap();
        for m in 0..2 {
            let i = end.amplitudes[m].norm_sqr();
            assert!((i - 4.75).abs() / 4.75 < 1e-6, "site {m}: {i}");
        }
    }

    #[test]
    fn evolve_one_step_equals_step() {
        let params = SimParams::default();
        let net = plaquette(&params);
        let state = init_noise(&net, 1e-3, 1).unwrap();
        let a = step(&net, &state, &params).unwrap();
        let b = evolve(&net, &state, &params, params.dt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn global_phase_rotation_commutes_with_evolution() {
        let params = SimParams::default();
        let net = plaquette(&params);
        let state = init_noise(&net, 1e-3, 3).unwrap();
        let alpha = Complex64::from_polar(1.0, 0.7341);
        let mut rotated = state.clone();
        for a in &mut rotated.amplitudes {
            *a *= alpha;
        }
        let end = evolve(&net, &state, &params, 5.0).unwrap();
        let end_rotated = evolve(&net, &rotated, &params, 5.0).unwrap();
        for (x, y) in end.amplitudes.iter().zip(&end_rotated.amplitudes) {
            assert!((x * alpha - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn spin_sites_decouple_through_the_connecting_pair() {
        // Undamped, linear connecting modes: the S and A paths interfere so
        // that ψ1 never feels ψ2. Two runs differing only in ψ2's initial
        // phase must give identical |ψ1|(t).
        let mut params = SimParams::default();
        params.gamma = 0.0;
        params.gamma_nl_prime = 0.0;
        params.p = 6.0;
        let g = SpinGraph::new(2, vec![Edge { a: 0, b: 1, coupling: Coupling::Fm }]).unwrap();
        // Bypass compile: it rejects gamma = 0 since predictions divide by it.
        let mut net = compile(&g, &SimParams { gamma: 4.0, ..params.clone() }, PumpStrategy::Uniform)
            .unwrap();
        net.params = params.clone();

        let mut a = CavityState::zero(&net);
        a.amplitudes[0] = Complex64::new(0.02, -0.01);
        a.amplitudes[1] = Complex64::new(0.015, 0.005);
        let mut b = a.clone();
        b.amplitudes[1] *= Complex64::from_polar(1.0, 2.1);

        let mut run_a = a.clone();
        let mut run_b = b.clone();
        for _ in 0..10 {
            run_a = evolve(&net, &run_a, &params, 2.0).unwrap();
            run_b = evolve(&net, &run_b, &params, 2.0).unwrap();
            let na = run_a.amplitudes[0].norm();
            let nb = run_b.amplitudes[0].norm();
            assert!(
                (na - nb).abs() <= 1e-8 * na.max(1e-30),
                "|ψ1| diverged between runs: {na} vs {nb}"
            );
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // End-state error against a dt/8 reference must shrink ~16x when dt
        // halves.
        let mut params = SimParams::default();
        params.p = 14.0;
        let net = plaquette(&params);
        let mut state = CavityState::zero(&net);
        state.amplitudes = vec![
            Complex64::new(0.4, 0.1),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.05, 0.0),
            Complex64::new(0.0, -0.04),
        ];
        let t_end = 2.0;

        let run = |dt: f64| {
            let p = SimParams { dt, ..params.clone() };
            evolve(&net, &state, &p, t_end).unwrap()
        };
        let reference = run(0.0005);
        let err = |s: &CavityState| -> f64 {
            s.amplitudes
                .iter()
                .zip(&reference.amplitudes)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err(&run(0.004));
        let e2 = err(&run(0.002));
        let ratio = e1 / e2;
        assert!(
            (10.0..24.0).contains(&ratio),
            "convergence ratio {ratio} not ~16 (e1 = {e1:.3e}, e2 = {e2:.3e})"
        );
    }

    #[test]
    fn stationarity_detection() {
        let mut params = SimParams::default();
        params.p = 14.0;
        let net = plaquette(&params);

        // Identical states are stationary.
        let s = init_noise(&net, 1e-3, 4).unwrap();
        let mut same = s.clone();
        same.time += params.dt;
        assert!(is_stationary(&s, &same, 1e-6));

        // Early growth is not.
        let grown = evolve(&net, &s, &params, 1.0).unwrap();
        let next = step(&net, &grown, &params).unwrap();
        assert!(!is_stationary(&grown, &next, 1e-6));

        // A converged run is.
        let settled = evolve(&net, &s, &params, 1000.0).unwrap();
        let next = step(&net, &settled, &params).unwrap();
        assert!(is_stationary(&settled, &next, 1e-6));
    }

    #[test]
    fn divergence_is_reported_with_mode_index() {
        // A huge pump with a large dt blows up; the error names a mode.
        let mut params = SimParams::default();
        params.p = 14.0;
        let net = plaquette(&params);
        let mut bad = params.clone();
        bad.p = 1e18;
        let mut state = init_noise(&net, 1e-3, 0).unwrap();
        state.amplitudes[0] = Complex64::new(1e154, 0.0);
        let err = evolve(&net, &state, &bad, 1.0).unwrap_err();
        match err {
            Error::Divergence { .. } => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
