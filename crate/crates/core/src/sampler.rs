//! No-U-Turn sampler with multinomial trajectory sampling, dual-averaging step
//! size adaptation and windowed diagonal metric adaptation.
//!
//! Chains run on scoped threads. Chain `c` draws from a ChaCha8 generator
//! seeded with the user seed on stream `c`, so results depend only on
//! `(seed, chain)` and not on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DELTA_H: f64 = 1000.0;
const INIT_TRIES: usize = 100;

/// Differentiable log density on an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Log density; `grad` is overwritten. Non-finite values mark points outside the support.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Quantities generated once per retained draw with the chain's generator.
    fn generated(&self, _x: &[f64], _rng: &mut ChaCha8Rng) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub iters: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_treedepth: usize,
    /// Initial values are drawn uniformly from `(-r, r)`.
    pub init_radius: f64,
    /// Chains run concurrently; 0 runs them all at once.
    pub threads: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup: 1000,
            iters: 1000,
            seed: 1,
            target_accept: 0.95,
            max_treedepth: 10,
            init_radius: 2.0,
            threads: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iters == 0 {
            return Err(Error::Config("chains and iters must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        if self.max_treedepth == 0 || !(self.init_radius >= 0.0) {
            return Err(Error::Config("max_treedepth must be positive and init_radius non-negative".into()));
        }
        Ok(())
    }
}

/// Retained iterations of one chain.
#[derive(Debug, Clone, Default)]
pub struct ChainDraws {
    pub positions: Vec<Vec<f64>>,
    pub generated: Vec<Vec<f64>>,
    pub lp: Vec<f64>,
    pub divergent: Vec<bool>,
    pub stepsize: Vec<f64>,
    pub treedepth: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub accept_stat: Vec<f64>,
    pub inv_metric: Vec<f64>,
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    lp: f64,
}

struct DualAveraging {
    counter: f64,
    s_bar: f64,
    x_bar: f64,
    mu: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const KAPPA: f64 = 0.75;
    const T0: f64 = 10.0;

    fn new(delta: f64, eps: f64) -> Self {
        DualAveraging {
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
            mu: (10.0 * eps).ln(),
            delta,
        }
    }

    fn restart(&mut self, eps: f64) {
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
        self.mu = (10.0 * eps).ln();
    }

    fn learn(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    fn final_stepsize(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Expanding variance windows between an initial fast buffer and a terminal one.
struct Windows {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Windows {
    fn new(warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        if warmup < init + term + base {
            init = (0.15 * warmup as f64) as usize;
            term = (0.1 * warmup as f64) as usize;
            base = warmup.saturating_sub(init + term);
        }
        Windows {
            warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: (init + base).saturating_sub(1),
            counter: 0,
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.warmup.saturating_sub(self.term_buffer)
            && self.counter != self.warmup
    }

    fn end_of_window(&self) -> bool {
        self.counter == self.next_window && self.counter != self.warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.warmup.saturating_sub(self.term_buffer + 1);
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Returns the regularized variance at the end of a window.
    fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if self.in_window() {
            self.n += 1.0;
            for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
                let d = x - *m;
                *m += d / self.n;
                *s += d * (x - *m);
            }
        }
        let mut out = None;
        if self.end_of_window() {
            self.compute_next_window();
            let n = self.n;
            if n >= 2.0 {
                out = Some(
                    self.m2
                        .iter()
                        .map(|s| (n / (n + 5.0)) * (s / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0)))
                        .collect(),
                );
            }
            self.n = 0.0;
            self.mean.fill(0.0);
            self.m2.fill(0.0);
        }
        self.counter += 1;
        out
    }
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

struct Nuts<'a, D: LogDensity> {
    target: &'a D,
    inv_metric: Vec<f64>,
    eps: f64,
    max_depth: usize,
    n_leapfrog: usize,
    divergent: bool,
    sum_metro: f64,
}

struct Transition {
    accept_stat: f64,
    depth: usize,
    n_leapfrog: usize,
    divergent: bool,
}

impl<D: LogDensity> Nuts<'_, D> {
    fn hamiltonian(&self, z: &State) -> f64 {
        let k: f64 = z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum();
        let h = -z.lp + 0.5 * k;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, z: &State) -> Vec<f64> {
        z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&self, z: &mut State, rng: &mut ChaCha8Rng) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut State, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.lp = self.target.log_density_grad(&z.q, &mut z.g);
        if !z.lp.is_finite() {
            z.lp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
        dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut State,
        z_propose: &mut State,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.eps);
            self.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            self.sum_metro += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            z_propose.clone_from(z);
            *p_sharp_beg = self.p_sharp(z);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(p_beg);
            return !self.divergent;
        }
        let n = z.q.len();
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            sign,
            &mut lsw_init,
            rng,
        ) {
            return false;
        }
        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            sign,
            &mut lsw_final,
            rng,
        ) {
            return false;
        }
        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            *z_propose = z_propose_final;
        }
        let rho_subtree: Vec<f64> = rho_init.iter().zip(&rho_final).map(|(a, b)| a + b).collect();
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = Self::criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let ext: Vec<f64> = rho_init.iter().zip(&p_final_beg).map(|(a, b)| a + b).collect();
        persist &= Self::criterion(p_sharp_beg, &p_sharp_final_beg, &ext);
        let ext: Vec<f64> = rho_final.iter().zip(&p_init_end).map(|(a, b)| a + b).collect();
        persist &= Self::criterion(&p_sharp_init_end, p_sharp_end, &ext);
        persist
    }

    fn transition(&mut self, z: &mut State, rng: &mut ChaCha8Rng) -> Transition {
        self.sample_momentum(z, rng);
        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let ps = self.p_sharp(z);
        let (mut p_fwd_fwd, mut p_fwd_bck, mut p_bck_fwd, mut p_bck_bck) =
            (z.p.clone(), z.p.clone(), z.p.clone(), z.p.clone());
        let (mut ps_fwd_fwd, mut ps_fwd_bck, mut ps_bck_fwd, mut ps_bck_bck) =
            (ps.clone(), ps.clone(), ps.clone(), ps);
        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let h0 = self.hamiltonian(z);
        self.n_leapfrog = 0;
        self.sum_metro = 0.0;
        self.divergent = false;
        let n = z.q.len();
        let mut depth = 0;
        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; n];
            let mut rho_bck = vec![0.0; n];
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
                    h0,
                    1.0,
                    &mut lsw_subtree,
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
                    h0,
                    -1.0,
                    &mut lsw_subtree,
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
            let mut persist = Self::criterion(&ps_bck_bck, &ps_fwd_fwd, &rho);
            let ext: Vec<f64> = rho_bck.iter().zip(&p_fwd_bck).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&ps_bck_bck, &ps_fwd_bck, &ext);
            let ext: Vec<f64> = rho_fwd.iter().zip(&p_bck_fwd).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&ps_bck_fwd, &ps_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }
        *z = z_sample;
        Transition {
            accept_stat: if self.n_leapfrog > 0 {
                self.sum_metro / self.n_leapfrog as f64
            } else {
                0.0
            },
            depth,
            n_leapfrog: self.n_leapfrog,
            divergent: self.divergent,
        }
    }

    /// Heuristic initial step size: double or halve until the acceptance of a
    /// single leapfrog step crosses 0.8.
    fn init_stepsize(&mut self, z: &State, rng: &mut ChaCha8Rng) {
        let log_08 = 0.8f64.ln();
        let delta = |s: &mut Self, rng: &mut ChaCha8Rng| {
            let mut w = z.clone();
            s.sample_momentum(&mut w, rng);
            let h0 = s.hamiltonian(&w);
            s.leapfrog(&mut w, s.eps);
            h0 - s.hamiltonian(&w)
        };
        let d = delta(self, rng);
        let direction = if d > log_08 { 1.0 } else { -1.0 };
        for _ in 0..100 {
            let d = delta(self, rng);
            if (direction > 0.0 && !(d > log_08)) || (direction < 0.0 && !(d < log_08)) {
                break;
            }
            self.eps = if direction > 0.0 { 2.0 * self.eps } else { 0.5 * self.eps };
            if self.eps > 1e7 || self.eps < 1e-12 {
                self.eps = self.eps.clamp(1e-12, 1e7);
                break;
            }
        }
    }
}

fn initial_state<D: LogDensity>(target: &D, radius: f64, rng: &mut ChaCha8Rng) -> Result<State> {
    let n = target.dim();
    let mut g = vec![0.0; n];
    for _ in 0..INIT_TRIES {
        let q: Vec<f64> = (0..n)
            .map(|_| if radius > 0.0 { rng.random_range(-radius..radius) } else { 0.0 })
            .collect();
        let lp = target.log_density_grad(&q, &mut g);
        if lp.is_finite() && g.iter().all(|v| v.is_finite()) {
            return Ok(State {
                q,
                p: vec![0.0; n],
                g,
                lp,
            });
        }
    }
    Err(Error::NonFiniteInit(INIT_TRIES))
}

/// Run one chain.
pub fn run_chain<D: LogDensity>(target: &D, cfg: &SamplerConfig, chain: usize) -> Result<ChainDraws> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let mut z = initial_state(target, cfg.init_radius, &mut rng)?;
    let n = target.dim();
    let mut nuts = Nuts {
        target,
        inv_metric: vec![1.0; n],
        eps: 1.0,
        max_depth: cfg.max_treedepth,
        n_leapfrog: 0,
        divergent: false,
        sum_metro: 0.0,
    };
    nuts.init_stepsize(&z, &mut rng);
    let mut da = DualAveraging::new(cfg.target_accept, nuts.eps);
    let mut windows = Windows::new(cfg.warmup, n);
    for _ in 0..cfg.warmup {
        let t = nuts.transition(&mut z, &mut rng);
        nuts.eps = da.learn(t.accept_stat);
        if let Some(var) = windows.learn(&z.q) {
            nuts.inv_metric = var;
            nuts.init_stepsize(&z, &mut rng);
            da.restart(nuts.eps);
        }
    }
    if cfg.warmup > 0 {
        nuts.eps = da.final_stepsize();
    }
    let mut out = ChainDraws {
        inv_metric: nuts.inv_metric.clone(),
        ..Default::default()
    };
    for _ in 0..cfg.iters {
        let t = nuts.transition(&mut z, &mut rng);
        out.generated.push(target.generated(&z.q, &mut rng));
        out.positions.push(z.q.clone());
        out.lp.push(z.lp);
        out.divergent.push(t.divergent);
        out.stepsize.push(nuts.eps);
        out.treedepth.push(t.depth);
        out.n_leapfrog.push(t.n_leapfrog);
        out.accept_stat.push(t.accept_stat);
    }
    Ok(out)
}

/// Run all chains concurrently; outputs are in chain order.
pub fn run_chains<D: LogDensity>(target: &D, cfg: &SamplerConfig) -> Result<Vec<ChainDraws>> {
    cfg.validate()?;
    let batch = if cfg.threads == 0 { cfg.chains } else { cfg.threads };
    let mut results: Vec<Result<ChainDraws>> = Vec::with_capacity(cfg.chains);
    for start in (0..cfg.chains).step_by(batch) {
        let end = (start + batch).min(cfg.chains);
        std::thread::scope(|s| {
            let handles: Vec<_> = (start..end)
                .map(|c| s.spawn(move || run_chain(target, cfg, c)))
                .collect();
            results.extend(
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("sampler thread panicked".into())))),
            );
        });
    }
    let chains = results.into_iter().collect::<Result<Vec<_>>>()?;
    if chains.iter().all(|c| c.divergent.iter().all(|&d| d)) {
        return Err(Error::AllDivergent);
    }
    Ok(chains)
}
