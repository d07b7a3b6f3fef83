//! Time integration of the Zakharov system in reduced transport form
//! `i u_t + u_xx = (n₊+n₋)u`, `(∂_t ± ∂_x) n_± = ∓½∂_x|u|² + ½n_{1L}`,
//! and of the rescaled small-dispersion system used by the decoherence
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linear::WaveData;
use crate::spectral::{
    dealias, derivative, shift_symbol, spectral_l2_norm, translate, ComplexField, FftEngine, FourierGrid,
    RealField, Spectral, C64,
};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Spectrum magnitude treated as blowup.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct ZakharovState {
    pub u: ComplexField,
    pub n_plus: RealField,
    pub n_minus: RealField,
    pub time: f64,
}

impl ZakharovState {
    /// Initial state from `u0` and wave data, splitting `n0, n1` into `n_±`.
    pub fn from_data(u0: &ComplexField, wave: &WaveData) -> Result<Self> {
        let grid = u0.grid();
        if wave.grid() != grid {
            return Err(param("u0 and wave data live on different grids"));
        }
        let (p, m) = wave.initial_split();
        Ok(Self {
            u: u0.clone(),
            n_plus: RealField::from_spectrum(grid, &p)?,
            n_minus: RealField::from_spectrum(grid, &m)?,
            time: 0.0,
        })
    }

    pub fn zero(grid: &FourierGrid) -> Self {
        Self {
            u: ComplexField::zeros(grid),
            n_plus: RealField::zeros(grid),
            n_minus: RealField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        self.u.grid()
    }

    pub fn n(&self) -> RealField {
        let s: Vec<f64> = self
            .n_plus
            .samples()
            .iter()
            .zip(self.n_minus.samples())
            .map(|(a, b)| a + b)
            .collect();
        RealField::new(self.grid(), s).expect("same grid")
    }

    pub fn mass(&self) -> f64 {
        self.u.l2_norm()
    }

    /// `∫ |u_x|² + n|u|² + n₊² + n₋² dx`, conserved when `n_{1L} = 0`.
    pub fn energy(&self) -> f64 {
        let grid = self.grid();
        let ux = ComplexField::from_spectrum(grid, derivative(grid, self.u.spectrum(), 1)).expect("same grid");
        let dx = grid.dx();
        let mut e = 0.0;
        for m in 0..grid.num_points() {
            let (p, q) = (self.n_plus.samples()[m], self.n_minus.samples()[m]);
            e += ux.samples()[m].norm_sqr() + (p + q) * self.u.samples()[m].norm_sqr() + p * p + q * q;
        }
        e * dx
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Splitting2,
    IfRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias: bool,
}

impl StepControl {
    pub fn new(dt: f64) -> Result<Self> {
        Self::with_scheme(dt, Scheme::IfRk4)
    }

    pub fn with_scheme(dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(param(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            scheme,
            dealias: true,
        })
    }
}

/// Parameters of the rescaled system
/// `i u_t + ν²u_xx = ½[n₀(x+μ₋t) + n₀(x−μ₊t)]u + (n₊+n₋)u`,
/// `∂_t n₊ = −μ₊(∂_x n₊ + ½(1+2N)∂_x|u|²)`, `∂_t n₋ = μ₋(∂_x n₋ + ½(1−2N)∂_x|u|²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedParams {
    pub lambda: f64,
    pub nu: f64,
    pub velocity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModifiedRegime {
    /// `T ≤ 2|ln ν|` and `λ ≥ ν^{-5}`.
    pub schedule_ok: bool,
    pub time_window: bool,
    pub lambda_large: bool,
}

impl ModifiedParams {
    pub fn new(lambda: f64, nu: f64, velocity: f64) -> Result<Self> {
        if !(lambda >= 1.0) {
            return Err(param(format!("lambda must be >= 1, got {lambda}")));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(param(format!("nu must lie in (0, 1], got {nu}")));
        }
        if !(velocity.abs() < 0.5) {
            return Err(param(format!("velocity must satisfy |N| < 1/2, got {velocity}")));
        }
        Ok(Self { lambda, nu, velocity })
    }

    pub fn mu_plus(&self) -> f64 {
        self.nu * (1.0 - 2.0 * self.velocity) / self.lambda
    }

    pub fn mu_minus(&self) -> f64 {
        self.nu * (1.0 + 2.0 * self.velocity) / self.lambda
    }

    pub fn regime(&self, t_final: f64) -> ModifiedRegime {
        let time_window = t_final <= 2.0 * self.nu.ln().abs();
        let lambda_large = self.lambda >= self.nu.powf(-5.0);
        ModifiedRegime {
            schedule_ok: time_window && lambda_large,
            time_window,
            lambda_large,
        }
    }
}

/// Coefficients shared by the full and rescaled systems.
struct Dynamics {
    grid: FourierGrid,
    dispersion: f64,
    speed_plus: f64,
    speed_minus: f64,
    kappa_plus: f64,
    kappa_minus: f64,
    low_forcing: Option<Vec<C64>>,
    background: Option<Background>,
    dealias: bool,
}

struct Background {
    n0_hat: Vec<C64>,
    mu_plus: f64,
    mu_minus: f64,
}

impl Background {
    /// Spectrum of `½[n₀(x+μ₋t) + n₀(x−μ₊t)]`.
    fn spectrum(&self, grid: &FourierGrid, t: f64) -> Vec<C64> {
        self.n0_hat
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                0.5 * v * (shift_symbol(grid, idx, -self.mu_minus * t) + shift_symbol(grid, idx, self.mu_plus * t))
            })
            .collect()
    }
}

impl Dynamics {
    fn full(grid: &FourierGrid, low_forcing: Option<Vec<C64>>, dealias: bool) -> Self {
        Self {
            grid: grid.clone(),
            dispersion: 1.0,
            speed_plus: 1.0,
            speed_minus: 1.0,
            kappa_plus: 0.5,
            kappa_minus: 0.5,
            low_forcing,
            background: None,
            dealias,
        }
    }

    fn modified(grid: &FourierGrid, p: &ModifiedParams, n0: &RealField, dealias: bool) -> Self {
        let (mp, mm) = (p.mu_plus(), p.mu_minus());
        Self {
            grid: grid.clone(),
            dispersion: p.nu * p.nu,
            speed_plus: mp,
            speed_minus: mm,
            kappa_plus: 0.5 * (1.0 + 2.0 * p.velocity) * mp,
            kappa_minus: 0.5 * (1.0 - 2.0 * p.velocity) * mm,
            low_forcing: None,
            background: Some(Background {
                n0_hat: n0.spectrum().to_vec(),
                mu_plus: mp,
                mu_minus: mm,
            }),
            dealias,
        }
    }

    /// Linear symbols `(−iaξ², −ic₊ξ, +ic₋ξ)` at index `idx`.
    fn linear(&self, idx: usize) -> [C64; 3] {
        let xi = self.grid.wavenumber(idx);
        let xo = self.grid.odd_wavenumber(idx);
        [
            -I * self.dispersion * xi * xi,
            -I * self.speed_plus * xo,
            I * self.speed_minus * xo,
        ]
    }

    fn propagators(&self, h: f64) -> [Vec<C64>; 3] {
        let m = self.grid.num_points();
        let mut out = [vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]];
        for idx in 0..m {
            for (c, l) in self.linear(idx).into_iter().enumerate() {
                out[c][idx] = (l * h).exp();
            }
        }
        out
    }
}

/// Spectral state `[û, n̂₊, n̂₋]`.
type Spec = [Vec<C64>; 3];

struct Workspace {
    engine: FftEngine,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Workspace {
    fn new(grid: &FourierGrid) -> Self {
        let m = grid.num_points();
        Self {
            engine: grid.engine(),
            a: vec![ZERO; m],
            b: vec![ZERO; m],
        }
    }
}

impl Dynamics {
    /// `F[|u|²]` of the current `û`, dealiased if requested. Leaves `u(x)` in `ws.a`.
    fn density(&self, ws: &mut Workspace, u: &[C64]) -> Vec<C64> {
        ws.a.copy_from_slice(u);
        ws.engine.inverse_in_place(&mut ws.a);
        let mut rho: Vec<C64> = ws.a.iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
        ws.engine.forward_in_place(&mut rho);
        if self.dealias {
            dealias(&self.grid, &mut rho);
        }
        rho
    }

    /// Physical potential `n₊ + n₋ (+ background)` at time `t`, into `ws.b`.
    fn potential(&self, ws: &mut Workspace, y: &Spec, t: f64) {
        for (idx, v) in ws.b.iter_mut().enumerate() {
            *v = y[1][idx] + y[2][idx];
        }
        if let Some(bg) = &self.background {
            for (v, w) in ws.b.iter_mut().zip(bg.spectrum(&self.grid, t)) {
                *v += w;
            }
        }
        ws.engine.inverse_in_place(&mut ws.b);
    }

    fn rhs(&self, ws: &mut Workspace, t: f64, y: &Spec) -> Spec {
        let rho = self.density(ws, &y[0]);
        self.potential(ws, y, t);
        let mut nu: Vec<C64> = ws.a.iter().zip(&ws.b).map(|(u, n)| u * n.re).collect();
        ws.engine.forward_in_place(&mut nu);
        if self.dealias {
            dealias(&self.grid, &mut nu);
        }
        let m = self.grid.num_points();
        let mut out = [vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]];
        for idx in 0..m {
            let dx_rho = I * self.grid.odd_wavenumber(idx) * rho[idx];
            out[0][idx] = -I * nu[idx];
            out[1][idx] = -self.kappa_plus * dx_rho;
            out[2][idx] = self.kappa_minus * dx_rho;
            if let Some(low) = &self.low_forcing {
                out[1][idx] += 0.5 * low[idx];
                out[2][idx] += 0.5 * low[idx];
            }
        }
        out
    }

    fn if_rk4(&self, ws: &mut Workspace, t: f64, h: f64, y: &Spec, e: &[Vec<C64>; 3], e2: &[Vec<C64>; 3]) -> Spec {
        let m = self.grid.num_points();
        let combine = |f: &dyn Fn(usize, usize) -> C64| -> Spec {
            let mut out = [vec![ZERO; m], vec![ZERO; m], vec![ZERO; m]];
            for (c, comp) in out.iter_mut().enumerate() {
                for (idx, v) in comp.iter_mut().enumerate() {
                    *v = f(c, idx);
                }
            }
            out
        };
        let k1 = self.rhs(ws, t, y);
        let y2 = combine(&|c, i| e2[c][i] * (y[c][i] + 0.5 * h * k1[c][i]));
        let k2 = self.rhs(ws, t + 0.5 * h, &y2);
        let y3 = combine(&|c, i| e2[c][i] * y[c][i] + 0.5 * h * k2[c][i]);
        let k3 = self.rhs(ws, t + 0.5 * h, &y3);
        let y4 = combine(&|c, i| e[c][i] * y[c][i] + h * e2[c][i] * k3[c][i]);
        let k4 = self.rhs(ws, t + h, &y4);
        combine(&|c, i| {
            e[c][i] * y[c][i] + h / 6.0 * (e[c][i] * k1[c][i] + 2.0 * e2[c][i] * (k2[c][i] + k3[c][i]) + k4[c][i])
        })
    }

    /// Exact flow of the nonlinear part over `h`: `|u|` is frozen, so `n_±`
    /// move linearly in time and `u` picks up the integrated phase.
    fn nonlinear_flow(&self, ws: &mut Workspace, t: f64, h: f64, y: &mut Spec) {
        let rho = self.density(ws, &y[0]);
        let m = self.grid.num_points();
        let mut drift = vec![ZERO; m];
        for idx in 0..m {
            let dx_rho = I * self.grid.odd_wavenumber(idx) * rho[idx];
            let mut fp = -self.kappa_plus * dx_rho;
            let mut fm = self.kappa_minus * dx_rho;
            if let Some(low) = &self.low_forcing {
                fp += 0.5 * low[idx];
                fm += 0.5 * low[idx];
            }
            drift[idx] = fp + fm;
            // phase uses the potential at the start of the substep, so update n after
            y[1][idx] += h * fp;
            y[2][idx] += h * fm;
        }
        // ∫_0^h n(s) ds = h n(0) + h²/2 · drift, with n(0) = n(h) − h·drift
        let mut phase: Vec<C64> = (0..m)
            .map(|idx| h * (y[1][idx] + y[2][idx]) - 0.5 * h * h * drift[idx])
            .collect();
        if let Some(bg) = &self.background {
            for (v, w) in phase.iter_mut().zip(bg.spectrum(&self.grid, t + 0.5 * h)) {
                *v += h * w;
            }
        }
        ws.engine.inverse_in_place(&mut phase);
        for (u, p) in ws.a.iter_mut().zip(&phase) {
            *u *= C64::from_polar(1.0, -p.re);
        }
        // no projection of u here: the pointwise phase is unitary and the
        // potential is already dealiased
        y[0].copy_from_slice(&ws.a);
        ws.engine.forward_in_place(&mut y[0]);
    }

    fn strang(&self, ws: &mut Workspace, t: f64, h: f64, y: &mut Spec, e2: &[Vec<C64>; 3]) {
        for c in 0..3 {
            for (v, p) in y[c].iter_mut().zip(&e2[c]) {
                *v *= p;
            }
        }
        self.nonlinear_flow(ws, t, h, y);
        for c in 0..3 {
            for (v, p) in y[c].iter_mut().zip(&e2[c]) {
                *v *= p;
            }
        }
    }
}

fn blown_up(y: &Spec) -> bool {
    y.iter()
        .flat_map(|c| c.iter())
        .any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > BLOWUP_THRESHOLD)
}

/// Integrator bound to one system and step control.
struct Stepper {
    dyn_: Dynamics,
    control: StepControl,
    ws: Workspace,
    cached_h: f64,
    e: [Vec<C64>; 3],
    e2: [Vec<C64>; 3],
}

impl Stepper {
    fn new(dyn_: Dynamics, control: StepControl) -> Self {
        let ws = Workspace::new(&dyn_.grid);
        let e = dyn_.propagators(control.dt);
        let e2 = dyn_.propagators(0.5 * control.dt);
        Self {
            dyn_,
            control,
            ws,
            cached_h: control.dt,
            e,
            e2,
        }
    }

    fn step(&mut self, t: f64, h: f64, y: &mut Spec) {
        if h != self.cached_h {
            self.e = self.dyn_.propagators(h);
            self.e2 = self.dyn_.propagators(0.5 * h);
            self.cached_h = h;
        }
        match self.control.scheme {
            Scheme::IfRk4 => *y = self.dyn_.if_rk4(&mut self.ws, t, h, y, &self.e, &self.e2),
            Scheme::Splitting2 => self.dyn_.strang(&mut self.ws, t, h, y, &self.e2),
        }
    }
}

fn to_spec(state: &ZakharovState, dealias_on: bool) -> Spec {
    let grid = state.grid();
    let mut y = [
        state.u.spectrum().to_vec(),
        state.n_plus.spectrum().to_vec(),
        state.n_minus.spectrum().to_vec(),
    ];
    if dealias_on {
        y.iter_mut().for_each(|c| dealias(grid, c));
    }
    y
}

fn from_spec(engine: &mut FftEngine, y: &Spec, time: f64) -> ZakharovState {
    ZakharovState {
        u: ComplexField::from_spectrum_with(engine, y[0].clone()),
        n_plus: RealField::from_spectrum_with(engine, &y[1]),
        n_minus: RealField::from_spectrum_with(engine, &y[2]),
        time,
    }
}

/// When trajectory snapshots are taken.
#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    /// Only the final state.
    Final,
    /// Every `interval` time units (the final state is always included).
    Every(f64),
    /// At the given times; steps are shortened to land on them exactly.
    Times(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub mass: f64,
    /// `|‖u(t)‖ − ‖u(0)‖| / ‖u(0)‖`.
    pub mass_drift: f64,
    /// `∫|u_x|² + n|u|² + n₊² + n₋²`; meaningful for the full system with `n_{1L} = 0`.
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<ZakharovState>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Largest relative mass drift seen at any step.
    pub max_mass_drift: f64,
    pub control: StepControl,
}

fn output_times(output: &Output, t_final: f64) -> Result<Vec<f64>> {
    let mut times = match output {
        Output::Final => vec![],
        Output::Every(dt) => {
            if !(*dt > 0.0) {
                return Err(param("output interval must be positive"));
            }
            let n = (t_final / dt).floor() as usize;
            (1..=n).map(|j| j as f64 * dt).collect()
        }
        Output::Times(ts) => ts.clone(),
    };
    if times.iter().any(|&t| !(t > 0.0 && t <= t_final * (1.0 + 1e-12))) {
        return Err(param("output times must lie in (0, T]"));
    }
    times.push(t_final);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_final.max(1.0));
    Ok(times)
}

fn integrate(mut stepper: Stepper, initial: &ZakharovState, t_final: f64, output: &Output) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return Err(param(format!("final time must be positive, got {t_final}")));
    }
    let grid = initial.grid().clone();
    let control = stepper.control;
    let mut y = to_spec(initial, control.dealias);
    let mass0 = spectral_l2_norm(&grid, &y[0]);
    let drift = |y: &Spec| {
        if mass0 == 0.0 {
            0.0
        } else {
            (spectral_l2_norm(&grid, &y[0]) - mass0).abs() / mass0
        }
    };
    let mut engine = grid.engine();
    let mut snapshots = vec![from_spec(&mut engine, &y, initial.time)];
    let mut max_mass_drift = 0.0f64;
    let mut t = initial.time;
    let t0 = initial.time;
    for target in output_times(output, t_final)? {
        let span = t0 + target - t;
        let steps = ((span / control.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            let last_good = y.clone();
            stepper.step(t, h, &mut y);
            if blown_up(&y) {
                return Err(Error::Blowup {
                    time: t + h,
                    last_good: Box::new(from_spec(&mut engine, &last_good, t)),
                });
            }
            t += h;
            max_mass_drift = max_mass_drift.max(drift(&y));
        }
        t = t0 + target;
        snapshots.push(from_spec(&mut engine, &y, t));
    }
    let diagnostics = snapshots
        .iter()
        .map(|s| StepDiagnostics {
            time: s.time,
            mass: s.mass(),
            mass_drift: if mass0 == 0.0 { 0.0 } else { (s.mass() - mass0).abs() / mass0 },
            energy: s.energy(),
        })
        .collect();
    Ok(Trajectory {
        snapshots,
        diagnostics,
        max_mass_drift,
        control,
    })
}

/// One step of the full system (no `n_{1L}` forcing).
pub fn step_full(state: &ZakharovState, control: &StepControl) -> Result<ZakharovState> {
    step_full_forced(state, None, control)
}

/// One step with optional low-frequency velocity data `n_{1L}` as forcing.
pub fn step_full_forced(
    state: &ZakharovState,
    low_forcing: Option<&[C64]>,
    control: &StepControl,
) -> Result<ZakharovState> {
    let grid = state.grid();
    let dyn_ = Dynamics::full(grid, low_forcing.map(|s| s.to_vec()), control.dealias);
    single_step(Stepper::new(dyn_, *control), state)
}

fn single_step(mut stepper: Stepper, state: &ZakharovState) -> Result<ZakharovState> {
    let grid = state.grid().clone();
    let mut y = to_spec(state, stepper.control.dealias);
    let h = stepper.control.dt;
    stepper.step(state.time, h, &mut y);
    let mut engine = grid.engine();
    if blown_up(&y) {
        return Err(Error::Blowup {
            time: state.time + h,
            last_good: Box::new(state.clone()),
        });
    }
    Ok(from_spec(&mut engine, &y, state.time + h))
}

/// Evolves the full system from `(u0, n0, n1)` to `t_final`.
pub fn solve_full(
    u0: &ComplexField,
    wave: &WaveData,
    t_final: f64,
    control: &StepControl,
    output: &Output,
) -> Result<Trajectory> {
    let initial = ZakharovState::from_data(u0, wave)?;
    let (low, _) = wave.split_n1();
    let low = if low.iter().all(|v| *v == ZERO) { None } else { Some(low) };
    let dyn_ = Dynamics::full(u0.grid(), low, control.dealias);
    integrate(Stepper::new(dyn_, *control), &initial, t_final, output)
}

pub fn step_modified(
    state: &ZakharovState,
    params: &ModifiedParams,
    n0_profile: &RealField,
    control: &StepControl,
) -> Result<ZakharovState> {
    let dyn_ = Dynamics::modified(state.grid(), params, n0_profile, control.dealias);
    single_step(Stepper::new(dyn_, *control), state)
}

/// Evolves the rescaled system from `u0` with `n_±(0) = 0`.
pub fn solve_modified(
    u0: &ComplexField,
    params: &ModifiedParams,
    n0_profile: &RealField,
    t_final: f64,
    control: &StepControl,
    output: &Output,
) -> Result<Trajectory> {
    let grid = u0.grid();
    if n0_profile.grid() != grid {
        return Err(param("u0 and n0 live on different grids"));
    }
    let initial = ZakharovState {
        u: u0.clone(),
        n_plus: RealField::zeros(grid),
        n_minus: RealField::zeros(grid),
        time: 0.0,
    };
    let dyn_ = Dynamics::modified(grid, params, n0_profile, control.dealias);
    integrate(Stepper::new(dyn_, *control), &initial, t_final, output)
}

/// `e^{−itn₀(x)}u₀(x)`, the dispersionless limit.
pub fn small_dispersion_exact(u0: &ComplexField, n0: &RealField, t: f64) -> ComplexField {
    let samples = u0
        .samples()
        .iter()
        .zip(n0.samples())
        .map(|(u, n)| u * C64::from_polar(1.0, -t * n))
        .collect();
    ComplexField::new(u0.grid(), samples).expect("same grid")
}

/// Snapshot of the rescaled solution mapped back to the original variables:
/// `u = c e^{i(xN − tN²)} w`, `w(x,t) = U(λν(x − 2tN), λ²t)`, `c = λ√(1−4N²)`.
#[derive(Clone, Debug)]
pub struct LiftedSnapshot {
    pub time: f64,
    /// `w` sampled on the lifted grid (length `L/(λν)`).
    pub envelope: ComplexField,
    pub amplitude: f64,
    pub velocity: f64,
    /// `λ²n₊^m(λν(x−2tN)) + ½λ²n₀(λν(x−t))`.
    pub n_plus: RealField,
    /// `λ²n₋^m(λν(x−2tN)) + ½λ²n₀(λν(x+t))`.
    pub n_minus: RealField,
}

impl LiftedSnapshot {
    pub fn grid(&self) -> &FourierGrid {
        self.envelope.grid()
    }

    /// The original-variable field `u(x,t)`; the carrier `e^{ixN}` is not
    /// periodic, so this is for pointwise use, not spectral.
    pub fn u(&self) -> Vec<C64> {
        let g = self.grid();
        (0..g.num_points())
            .map(|m| {
                let x = g.x(m);
                let phase = x * self.velocity - self.time * self.velocity * self.velocity;
                self.amplitude * C64::from_polar(1.0, phase) * self.envelope.samples()[m]
            })
            .collect()
    }

    pub fn u_l2_norm(&self) -> f64 {
        self.amplitude * self.envelope.l2_norm()
    }
}

/// Fraction of the box at each end that must be empty for a lift.
const COVERAGE_MARGIN: f64 = 0.05;

pub fn scale_lift(traj: &Trajectory, params: &ModifiedParams, n0: &RealField) -> Result<Vec<LiftedSnapshot>> {
    let grid = n0.grid();
    let scale = params.lambda * params.nu;
    let lifted = FourierGrid::new(grid.num_points(), grid.length() / scale)?;
    let lam2 = params.lambda * params.lambda;
    let amplitude = params.lambda * (1.0 - 4.0 * params.velocity.powi(2)).sqrt();
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        if snap.grid() != grid {
            return Err(param("trajectory and n0 live on different grids"));
        }
        let t = snap.time / lam2;
        let shift = scale * 2.0 * t * params.velocity;
        let w = translate(grid, snap.u.spectrum(), shift);
        let w = ComplexField::from_spectrum(grid, w)?;
        let peak = w.max_abs();
        let edge = (COVERAGE_MARGIN * grid.num_points() as f64).ceil() as usize;
        let m = grid.num_points();
        let tail = w.samples()[..edge]
            .iter()
            .chain(&w.samples()[m - edge..])
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if tail > 1e-6 * peak {
            return Err(param(format!(
                "grid coverage insufficient at t = {t}: edge amplitude {tail:e} vs peak {peak:e}"
            )));
        }
        let lift_n = |nm: &RealField, travel: f64| -> Result<RealField> {
            let moving = translate(grid, nm.spectrum(), shift);
            let bg = translate(grid, n0.spectrum(), travel);
            let spec: Vec<C64> = moving.iter().zip(&bg).map(|(a, b)| lam2 * (a + 0.5 * b)).collect();
            RealField::from_spectrum(&lifted, &rescale_spectrum(&spec, scale))
        };
        out.push(LiftedSnapshot {
            time: t,
            envelope: ComplexField::new(&lifted, w.samples().to_vec())?,
            amplitude,
            velocity: params.velocity,
            n_plus: lift_n(&snap.n_plus, scale * t)?,
            n_minus: lift_n(&snap.n_minus, -scale * t)?,
        });
    }
    Ok(out)
}

/// Coefficients of `f(λν x)` on the lifted grid from those of `f(X)`.
fn rescale_spectrum(spec: &[C64], scale: f64) -> Vec<C64> {
    spec.iter().map(|v| v / scale).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LiftResidual {
    /// `‖i w_t + w_xx + 2iN w_x − n w‖` over the sum of the term norms.
    pub schrodinger: f64,
    /// Worst of the two transport residuals, relative the same way.
    pub wave: f64,
}

/// Residual of the original system for lifted snapshot `idx`, using its two
/// neighbours for a centered time difference. Snapshots must be equally spaced.
pub fn lift_residual(lifted: &[LiftedSnapshot], idx: usize) -> Result<LiftResidual> {
    if idx == 0 || idx + 1 >= lifted.len() {
        return Err(param("residual needs a snapshot on each side"));
    }
    let (prev, cur, next) = (&lifted[idx - 1], &lifted[idx], &lifted[idx + 1]);
    let h = next.time - cur.time;
    if ((cur.time - prev.time) - h).abs() > 1e-9 * h.abs().max(1e-300) {
        return Err(param("snapshots are not equally spaced"));
    }
    let grid = cur.grid();
    let n_vec = |s: &LiftedSnapshot| -> Vec<f64> {
        s.n_plus.samples().iter().zip(s.n_minus.samples()).map(|(a, b)| a + b).collect()
    };
    let w = cur.envelope.samples();
    let wt: Vec<C64> = next
        .envelope
        .samples()
        .iter()
        .zip(prev.envelope.samples())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let wx = ComplexField::from_spectrum(grid, derivative(grid, cur.envelope.spectrum(), 1))?;
    let wxx = ComplexField::from_spectrum(grid, derivative(grid, cur.envelope.spectrum(), 2))?;
    let n = n_vec(cur);
    let v = cur.velocity;
    let l2 = |it: &mut dyn Iterator<Item = f64>| (grid.dx() * it.sum::<f64>()).sqrt();
    let res = l2(&mut (0..w.len()).map(|m| {
        (I * wt[m] + wxx.samples()[m] + 2.0 * I * v * wx.samples()[m] - n[m] * w[m]).norm_sqr()
    }));
    let scale_s = l2(&mut wt.iter().map(|z| z.norm_sqr()))
        + wxx.l2_norm()
        + 2.0 * v.abs() * wx.l2_norm()
        + l2(&mut (0..w.len()).map(|m| (n[m] * w[m]).norm_sqr()));

    let c2 = cur.amplitude * cur.amplitude;
    let rho: Vec<f64> = w.iter().map(|z| c2 * z.norm_sqr()).collect();
    let rho = RealField::new(grid, rho)?;
    let rho_x = RealField::from_spectrum(grid, &derivative(grid, rho.spectrum(), 1))?;
    let mut wave = 0.0f64;
    for (sign, field_of) in [
        (1.0, (|s: &LiftedSnapshot| s.n_plus.clone()) as fn(&LiftedSnapshot) -> RealField),
        (-1.0, |s: &LiftedSnapshot| s.n_minus.clone()),
    ] {
        let f = field_of(cur);
        let ft: Vec<f64> = field_of(next)
            .samples()
            .iter()
            .zip(field_of(prev).samples())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let fx = RealField::from_spectrum(grid, &derivative(grid, f.spectrum(), 1))?;
        let r = l2(&mut (0..w.len()).map(|m| {
            (ft[m] + sign * fx.samples()[m] + sign * 0.5 * rho_x.samples()[m]).powi(2)
        }));
        let s = l2(&mut ft.iter().map(|v| v * v)) + fx.l2_norm() + 0.5 * rho_x.l2_norm();
        wave = wave.max(if s == 0.0 { 0.0 } else { r / s });
    }
    Ok(LiftResidual {
        schrodinger: if scale_s == 0.0 { 0.0 } else { res / scale_s },
        wave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::data::{soliton, soliton_initial_data, SolitonParams};
    use crate::spectral::make_grid;

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(64, 20.0).unwrap();
        let mut s = ZakharovState::zero(&g);
        for scheme in [Scheme::IfRk4, Scheme::Splitting2] {
            let c = StepControl::with_scheme(0.01, scheme).unwrap();
            for _ in 0..5 {
                s = step_full(&s, &c).unwrap();
            }
            assert_eq!(s.u.max_abs(), 0.0);
            assert_eq!(s.n().max_abs(), 0.0);
        }
    }

    #[test]
    fn control_rejects_bad_dt() {
        assert!(StepControl::new(0.0).is_err());
        assert!(StepControl::new(f64::NAN).is_err());
    }

    #[test]
    fn short_soliton_run_tracks_exact_solution() {
        let g = make_grid(512, 16.0 * PI).unwrap();
        let p = SolitonParams::new(1.0, 0.1).unwrap();
        let (u0, wave) = soliton_initial_data(&p, &g).unwrap();
        let c = StepControl::new(2e-3).unwrap();
        let traj = solve_full(&u0, &wave, 0.2, &c, &Output::Final).unwrap();
        let last = traj.snapshots.last().unwrap();
        let (u, n) = soliton(&p, 0.2, &g).unwrap();
        let err: f64 = last
            .u
            .samples()
            .iter()
            .zip(u.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * g.dx().sqrt();
        assert!(err / u.l2_norm() < 1e-8, "u error {err}");
        let nerr: f64 = last
            .n()
            .samples()
            .iter()
            .zip(n.samples())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            * g.dx().sqrt();
        assert!(nerr / n.l2_norm() < 1e-8, "n error {nerr}");
    }

    #[test]
    fn blowup_is_reported_with_last_state() {
        let g = make_grid(64, 20.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| C64::new(1e13 * (-x * x).exp(), 0.0));
        let wave = WaveData::zero(&g);
        let c = StepControl::new(1e-3).unwrap();
        match solve_full(&u0, &wave, 0.01, &c, &Output::Final) {
            Err(Error::Blowup { last_good, .. }) => assert_eq!(last_good.time, 0.0),
            other => panic!("expected blowup, got {:?}", other.map(|t| t.snapshots.len())),
        }
    }

    #[test]
    fn output_times_land_exactly() {
        let g = make_grid(64, 20.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), 0.0));
        let c = StepControl::new(0.03).unwrap();
        let traj = solve_full(&u0, &WaveData::zero(&g), 0.5, &c, &Output::Times(vec![0.1, 0.25])).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 0.1, 0.25, 0.5]);
    }

    #[test]
    fn small_dispersion_limit_is_a_phase() {
        let g = make_grid(64, 20.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), 0.2));
        let n0 = RealField::from_fn(&g, |_| 0.7);
        let v = small_dispersion_exact(&u0, &n0, 2.0);
        let phase = C64::from_polar(1.0, -1.4);
        for (a, b) in v.samples().iter().zip(u0.samples()) {
            assert!((a - b * phase).norm() < 1e-15);
        }
        let v0 = small_dispersion_exact(&u0, &n0, 0.0);
        assert_eq!(v0.samples(), u0.samples());
    }

    #[test]
    fn modified_params_derived_speeds() {
        let p = ModifiedParams::new(4.0, 0.5, 0.25).unwrap();
        assert!((p.mu_plus() - 0.0625).abs() < 1e-15);
        assert!((p.mu_minus() - 0.1875).abs() < 1e-15);
        assert!(ModifiedParams::new(0.5, 0.5, 0.0).is_err());
        assert!(ModifiedParams::new(2.0, 0.0, 0.0).is_err());
        assert!(ModifiedParams::new(2.0, 0.5, 0.5).is_err());
        let r = ModifiedParams::new(1e6, 0.05, 0.0).unwrap().regime(1.0);
        assert!(r.time_window && !r.lambda_large && !r.schedule_ok);
    }
}
