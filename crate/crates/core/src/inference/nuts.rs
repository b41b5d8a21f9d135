//! Multinomial no-U-turn sampler with a diagonal metric.
//!
//! Warmup follows the usual windowed scheme: a fast initial buffer for the
//! step size, doubling slow windows that re-estimate the metric, and a
//! terminal buffer where only the step size moves.

use rand::Rng;
use rand_distr::StandardNormal;

use super::posterior::LogDensity;

const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutsSettings {
    pub max_depth: usize,
    pub target_accept: f64,
    /// Initial step size before the heuristic search.
    pub init_step: f64,
}

impl Default for NutsSettings {
    fn default() -> Self {
        Self {
            max_depth: 10,
            target_accept: 0.8,
            init_step: 0.1,
        }
    }
}

/// Result of one transition.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransitionInfo {
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
}

#[derive(Debug, Clone)]
struct Phase {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    lp: f64,
}

/// Dual-averaging step-size controller.
#[derive(Debug, Clone)]
struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(target: f64, step: f64) -> Self {
        Self {
            mu: (10.0 * step).ln(),
            target,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    fn restart(&mut self, step: f64) {
        self.mu = (10.0 * step).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    fn learn(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Schedule of slow metric-adaptation windows during warmup.
#[derive(Debug, Clone)]
struct Windows {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    enabled: bool,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Windows {
    fn new(warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        let enabled = warmup >= 20;
        if init + term + base > warmup {
            init = (0.15 * warmup as f64) as usize;
            term = (0.1 * warmup as f64) as usize;
            base = warmup.saturating_sub(init + term);
        }
        Self {
            warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: (init + base).saturating_sub(1),
            counter: 0,
            enabled,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.warmup - self.term_buffer
            && self.counter != self.warmup
    }

    fn at_window_end(&self) -> bool {
        self.counter == self.next_window && self.counter != self.warmup
    }

    fn compute_next(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.warmup - self.term_buffer {
                self.next_window = last;
            }
        }
    }

    /// Records `q`; returns the regularized variance at the end of a window.
    fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if !self.enabled {
            return None;
        }
        if self.in_window() {
            self.n += 1;
            let nf = self.n as f64;
            for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
                let d = v - *m;
                *m += d / nf;
                *s += d * (v - *m);
            }
        }
        if self.at_window_end() {
            self.compute_next();
            let nf = self.n as f64;
            let var = self
                .m2
                .iter()
                .map(|s| {
                    let v = if self.n > 1 { s / (nf - 1.0) } else { 1.0 };
                    (nf / (nf + 5.0)) * v + 1e-3 * (5.0 / (nf + 5.0))
                })
                .collect();
            self.n = 0;
            self.mean.iter_mut().for_each(|v| *v = 0.0);
            self.m2.iter_mut().for_each(|v| *v = 0.0);
            self.counter += 1;
            return Some(var);
        }
        self.counter += 1;
        None
    }
}

/// One NUTS chain.
pub struct Nuts<'a, T: LogDensity + ?Sized> {
    target: &'a T,
    inv_mass: Vec<f64>,
    step: f64,
    settings: NutsSettings,
    current: Phase,
}

struct TreeCtx {
    h0: f64,
    n_leapfrog: usize,
    sum_metro: f64,
    divergent: bool,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

impl<'a, T: LogDensity + ?Sized> Nuts<'a, T> {
    /// Starts a chain at `q`, which must have finite log density.
    pub fn new(target: &'a T, q: Vec<f64>, settings: NutsSettings) -> Option<Self> {
        let dim = target.dim();
        let mut g = vec![0.0; dim];
        let lp = target.log_density_grad(&q, &mut g);
        if !lp.is_finite() {
            return None;
        }
        Some(Self {
            target,
            inv_mass: vec![1.0; dim],
            step: settings.init_step,
            settings,
            current: Phase {
                q,
                p: vec![0.0; dim],
                g,
                lp,
            },
        })
    }

    pub fn position(&self) -> &[f64] {
        &self.current.q
    }

    pub fn log_density(&self) -> f64 {
        self.current.lp
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn inv_mass(&self) -> &[f64] {
        &self.inv_mass
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, z: &Phase) -> f64 {
        let h = -z.lp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_mass).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum<R: Rng + ?Sized>(&self, p: &mut [f64], rng: &mut R) {
        for (v, m) in p.iter_mut().zip(&self.inv_mass) {
            let e: f64 = rng.sample(StandardNormal);
            *v = e / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut Phase, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_mass) {
            *q += eps * m * p;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.g);
        if !z.lp.is_finite() {
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    /// Doubles the step size until the one-step acceptance crosses 0.8.
    fn init_step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let start = self.current.clone();
        let mut z = start.clone();
        self.sample_momentum(&mut z.p, rng);
        let h0 = self.hamiltonian(&z);
        self.leapfrog(&mut z, self.step);
        let dh = h0 - self.hamiltonian(&z);
        let up = dh > 0.8f64.ln();
        for _ in 0..100 {
            let mut z = start.clone();
            self.sample_momentum(&mut z.p, rng);
            let h0 = self.hamiltonian(&z);
            self.leapfrog(&mut z, self.step);
            let dh = h0 - self.hamiltonian(&z);
            if (up && !(dh > 0.8f64.ln())) || (!up && !(dh < 0.8f64.ln())) {
                break;
            }
            self.step = if up { 2.0 * self.step } else { 0.5 * self.step };
            if self.step > 1e7 || self.step < 1e-12 {
                self.step = self.step.clamp(1e-12, 1e7);
                break;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng + ?Sized>(
        &self,
        depth: usize,
        z: &mut Phase,
        z_propose: &mut Phase,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        sign: f64,
        log_sum_weight: &mut f64,
        ctx: &mut TreeCtx,
        rng: &mut R,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step);
            ctx.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - ctx.h0 > MAX_DELTA_H {
                ctx.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, ctx.h0 - h);
            ctx.sum_metro += if ctx.h0 - h > 0.0 { 1.0 } else { (ctx.h0 - h).exp() };
            z_propose.clone_from(z);
            *p_sharp_beg = self.p_sharp(&z.p);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !ctx.divergent;
        }
        let dim = z.q.len();

        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut lsw_init,
            ctx,
            rng,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut lsw_final,
            ctx,
            rng,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            std::mem::swap(z_propose, &mut z_propose_final);
        }

        let rho_subtree: Vec<f64> = rho_init.iter().zip(&rho_final).map(|(a, b)| a + b).collect();
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let ext: Vec<f64> = rho_init.iter().zip(&p_final_beg).map(|(a, b)| a + b).collect();
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &ext);
        let ext: Vec<f64> = rho_final.iter().zip(&p_init_end).map(|(a, b)| a + b).collect();
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &ext);
        persist
    }

    /// One NUTS transition from the current point.
    pub fn transition<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TransitionInfo {
        let dim = self.current.q.len();
        let mut z0 = self.current.clone();
        self.sample_momentum(&mut z0.p, rng);
        let h0 = self.hamiltonian(&z0);

        let mut z_fwd = z0.clone();
        let mut z_bck = z0.clone();
        let mut z_sample = z0.clone();
        let mut z_propose = z0.clone();

        let p_sharp0 = self.p_sharp(&z0.p);
        let (mut p_fwd_fwd, mut p_fwd_bck) = (z0.p.clone(), z0.p.clone());
        let (mut p_bck_fwd, mut p_bck_bck) = (z0.p.clone(), z0.p.clone());
        let (mut ps_fwd_fwd, mut ps_fwd_bck) = (p_sharp0.clone(), p_sharp0.clone());
        let (mut ps_bck_fwd, mut ps_bck_bck) = (p_sharp0.clone(), p_sharp0);
        let mut rho = z0.p.clone();

        let mut log_sum_weight = 0.0;
        let mut ctx = TreeCtx {
            h0,
            n_leapfrog: 0,
            sum_metro: 0.0,
            divergent: false,
        };
        let mut depth = 0;

        while depth < self.settings.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if rng.random::<f64>() > 0.5 {
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                ps_bck_fwd.clone_from(&ps_fwd_bck);
                self.build_tree(
                    depth,
                    &mut z_fwd,
                    &mut z_propose,
                    &mut ps_fwd_bck,
                    &mut ps_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    1.0,
                    &mut lsw_subtree,
                    &mut ctx,
                    rng,
                )
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                ps_fwd_bck.clone_from(&ps_bck_fwd);
                self.build_tree(
                    depth,
                    &mut z_bck,
                    &mut z_propose,
                    &mut ps_bck_fwd,
                    &mut ps_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    -1.0,
                    &mut lsw_subtree,
                    &mut ctx,
                    rng,
                )
            };
            if !valid {
                break;
            }
            depth += 1;
            if lsw_subtree > log_sum_weight || rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
                z_sample.clone_from(&z_propose);
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

            rho = rho_bck.iter().zip(&rho_fwd).map(|(a, b)| a + b).collect();
            let mut persist = no_u_turn(&ps_bck_bck, &ps_fwd_fwd, &rho);
            let ext: Vec<f64> = rho_bck.iter().zip(&p_fwd_bck).map(|(a, b)| a + b).collect();
            persist &= no_u_turn(&ps_bck_bck, &ps_fwd_bck, &ext);
            let ext: Vec<f64> = rho_fwd.iter().zip(&p_bck_fwd).map(|(a, b)| a + b).collect();
            persist &= no_u_turn(&ps_bck_fwd, &ps_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }

        self.current = z_sample;
        TransitionInfo {
            accept_stat: if ctx.n_leapfrog > 0 {
                ctx.sum_metro / ctx.n_leapfrog as f64
            } else {
                0.0
            },
            depth,
            n_leapfrog: ctx.n_leapfrog,
            divergent: ctx.divergent,
        }
    }
}

/// Warmup driver: step-size dual averaging plus windowed metric updates.
pub struct Adapter {
    da: DualAveraging,
    windows: Windows,
}

impl Adapter {
    pub fn new<T: LogDensity + ?Sized, R: Rng + ?Sized>(chain: &mut Nuts<'_, T>, warmup: usize, rng: &mut R) -> Self {
        chain.init_step(rng);
        Self {
            da: DualAveraging::new(chain.settings.target_accept, chain.step),
            windows: Windows::new(warmup, chain.current.q.len()),
        }
    }

    pub fn adapt<T: LogDensity + ?Sized, R: Rng + ?Sized>(
        &mut self,
        chain: &mut Nuts<'_, T>,
        info: &TransitionInfo,
        rng: &mut R,
    ) {
        chain.step = self.da.learn(info.accept_stat);
        if let Some(var) = self.windows.learn(&chain.current.q) {
            chain.inv_mass = var;
            chain.init_step(rng);
            self.da.restart(chain.step);
        }
    }

    pub fn finish<T: LogDensity + ?Sized>(&self, chain: &mut Nuts<'_, T>) {
        if self.da.counter > 0.0 {
            chain.step = self.da.final_step();
        }
    }
}
