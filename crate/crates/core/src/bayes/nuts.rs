use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::LogDensity;
use super::BayesError;

/// Energy error above which a trajectory is flagged divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutsConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_depth: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        Self { chains: 4, warmup: 500, draws: 1000, target_accept: 0.8, max_depth: 10, seed: 0 }
    }
}

impl NutsConfig {
    pub fn validate(&self) -> Result<(), BayesError> {
        if self.chains == 0 || self.draws == 0 || self.max_depth == 0 {
            return Err(BayesError::Config("chains, draws and max_depth must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(BayesError::Config(format!("target_accept must lie in (0, 1), got {}", self.target_accept)));
        }
        Ok(())
    }
}

/// Output of one chain in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub draws: Vec<Vec<f64>>,
    pub accept_stat: Vec<f64>,
    pub tree_depth: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub divergent: Vec<bool>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

impl ChainRun {
    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    pub fn mean_accept(&self) -> f64 {
        self.accept_stat.iter().sum::<f64>() / self.accept_stat.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
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

/// Dual averaging of the log step size.
#[derive(Debug, Clone)]
struct StepSizeAdapter {
    mu: f64,
    delta: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl StepSizeAdapter {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(delta: f64) -> Self {
        Self { mu: 0.0, delta, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    fn restart(&mut self, epsilon: f64) {
        self.mu = (10.0 * epsilon).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    fn learn(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Windowed diagonal metric estimation: an initial fast buffer, doubling
/// slow windows, and a terminal fast buffer.
#[derive(Debug, Clone)]
struct MetricAdapter {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MetricAdapter {
    fn new(warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        if init + term + base > warmup {
            init = (0.15 * warmup as f64) as usize;
            term = (0.1 * warmup as f64) as usize;
            base = warmup - (init + term);
        }
        Self {
            warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: (init + base).saturating_sub(1),
            counter: 0,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer && self.counter + self.term_buffer < self.warmup
    }

    fn end_of_window(&self) -> bool {
        self.counter == self.next_window && self.counter != self.warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Returns the regularized variance when a slow window closes.
    fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if self.in_window() {
            self.n += 1;
            for i in 0..q.len() {
                let d = q[i] - self.mean[i];
                self.mean[i] += d / self.n as f64;
                self.m2[i] += d * (q[i] - self.mean[i]);
            }
        }
        let mut out = None;
        if self.end_of_window() {
            self.compute_next_window();
            let n = self.n as f64;
            if self.n > 1 {
                out = Some(
                    self.m2.iter().map(|m| (n / (n + 5.0)) * (m / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0))).collect(),
                );
            }
            self.n = 0;
            self.mean.iter_mut().for_each(|v| *v = 0.0);
            self.m2.iter_mut().for_each(|v| *v = 0.0);
        }
        self.counter += 1;
        out
    }
}

struct Sampler<'a, D: LogDensity> {
    target: &'a D,
    rng: ChaCha8Rng,
    epsilon: f64,
    inv_metric: Vec<f64>,
    max_depth: usize,
    divergent: bool,
}

/// Accumulators threaded through tree building.
struct TreeStats {
    n_leapfrog: usize,
    sum_metro_prob: f64,
}

impl<D: LogDensity> Sampler<'_, D> {
    fn evaluate(&self, q: &[f64]) -> (f64, Vec<f64>) {
        match self.target.log_density_grad(q) {
            Ok((lp, g)) if lp.is_finite() && g.iter().all(|v| v.is_finite()) => (lp, g),
            _ => (f64::NEG_INFINITY, vec![0.0; q.len()]),
        }
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let k: f64 = z.p.iter().zip(&self.inv_metric).map(|(p, m)| m * p * p).sum();
        let h = -z.logp + 0.5 * k;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn velocity(&self, z: &Point) -> Vec<f64> {
        z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&mut self, z: &mut Point) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = self.rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for i in 0..z.q.len() {
            z.p[i] += 0.5 * eps * z.grad[i];
        }
        for i in 0..z.q.len() {
            z.q[i] += eps * self.inv_metric[i] * z.p[i];
        }
        let (lp, g) = self.evaluate(&z.q);
        z.logp = lp;
        z.grad = g;
        for i in 0..z.q.len() {
            z.p[i] += 0.5 * eps * z.grad[i];
        }
    }

    fn init_stepsize(&mut self, z: &Point) -> Result<(), BayesError> {
        let mut trial = z.clone();
        self.sample_momentum(&mut trial);
        let h0 = self.hamiltonian(&trial);
        self.leapfrog(&mut trial, self.epsilon);
        let dh = h0 - self.hamiltonian(&trial);
        let up = dh > 0.8f64.ln();
        loop {
            let mut trial = z.clone();
            self.sample_momentum(&mut trial);
            let h0 = self.hamiltonian(&trial);
            self.leapfrog(&mut trial, self.epsilon);
            let dh = h0 - self.hamiltonian(&trial);
            if (up && !(dh > 0.8f64.ln())) || (!up && !(dh < 0.8f64.ln())) {
                return Ok(());
            }
            self.epsilon = if up { 2.0 * self.epsilon } else { 0.5 * self.epsilon };
            if self.epsilon > 1e7 || self.epsilon == 0.0 {
                return Err(BayesError::NonFinite(format!("step size search diverged at epsilon = {}", self.epsilon)));
            }
        }
    }

    fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
        dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        eps: f64,
        log_sum_weight: &mut f64,
        stats: &mut TreeStats,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, eps);
            stats.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            stats.sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            *z_propose = z.clone();
            *p_sharp_beg = self.velocity(z);
            *p_sharp_end = p_sharp_beg.clone();
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            *p_beg = z.p.clone();
            *p_end = z.p.clone();
            return !self.divergent;
        }
        let dim = z.q.len();

        let mut p_sharp_init_end = vec![0.0; dim];
        let mut p_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let mut lsw_init = f64::NEG_INFINITY;
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
            eps,
            &mut lsw_init,
            stats,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut p_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let mut lsw_final = f64::NEG_INFINITY;
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
            eps,
            &mut lsw_final,
            stats,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || self.rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
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

    /// One NUTS transition from `z`; returns the accept statistic and depth.
    fn transition(&mut self, z: &mut Point) -> (f64, usize, usize) {
        self.sample_momentum(z);
        self.divergent = false;
        let dim = z.q.len();
        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let mut p_sharp_fwd_fwd = self.velocity(z);
        let mut p_sharp_fwd_bck = p_sharp_fwd_fwd.clone();
        let mut p_sharp_bck_fwd = p_sharp_fwd_fwd.clone();
        let mut p_sharp_bck_bck = p_sharp_fwd_fwd.clone();
        let mut p_fwd_fwd = z.p.clone();
        let mut p_fwd_bck = z.p.clone();
        let mut p_bck_fwd = z.p.clone();
        let mut p_bck_bck = z.p.clone();
        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let h0 = self.hamiltonian(z);
        let mut stats = TreeStats { n_leapfrog: 0, sum_metro_prob: 0.0 };
        let mut depth = 0;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if self.rng.random::<f64>() > 0.5 {
                let mut zc = z_fwd.clone();
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
                let v = self.build_tree(
                    depth,
                    &mut zc,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    h0,
                    self.epsilon,
                    &mut lsw_subtree,
                    &mut stats,
                );
                z_fwd = zc;
                v
            } else {
                let mut zc = z_bck.clone();
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
                let v = self.build_tree(
                    depth,
                    &mut zc,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    h0,
                    -self.epsilon,
                    &mut lsw_subtree,
                    &mut stats,
                );
                z_bck = zc;
                v
            };
            if !valid {
                break;
            }
            depth += 1;

            if lsw_subtree > log_sum_weight || self.rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp() {
                z_sample = z_propose.clone();
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

            for i in 0..dim {
                rho[i] = rho_bck[i] + rho_fwd[i];
            }
            let mut persist = Self::criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let ext: Vec<f64> = rho_bck.iter().zip(&p_fwd_bck).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &ext);
            let ext: Vec<f64> = rho_fwd.iter().zip(&p_bck_fwd).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }

        *z = z_sample;
        let accept = if stats.n_leapfrog > 0 { stats.sum_metro_prob / stats.n_leapfrog as f64 } else { 0.0 };
        (accept, depth, stats.n_leapfrog)
    }
}

/// Runs one adapted chain from `init` using stream `chain` of `seed`.
pub fn run_chain<D: LogDensity>(
    target: &D,
    init: &[f64],
    config: &NutsConfig,
    chain: u64,
) -> Result<ChainRun, BayesError> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(BayesError::Config(format!("initial point has {} coordinates, target has {dim}", init.len())));
    }
    let (logp, grad) = target.log_density_grad(init)?;
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(BayesError::NonFinite(format!("log density or gradient at the initial point of chain {chain}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain);
    let mut s = Sampler { target, rng, epsilon: 1.0, inv_metric: vec![1.0; dim], max_depth: config.max_depth, divergent: false };
    let mut z = Point { q: init.to_vec(), p: vec![0.0; dim], grad, logp };

    let adapt = config.warmup > 0;
    let mut step = StepSizeAdapter::new(config.target_accept);
    let mut metric = MetricAdapter::new(config.warmup, dim);
    let metric_on = config.warmup >= 20;
    if adapt {
        s.init_stepsize(&z)?;
        step.restart(s.epsilon);
    }
    for _ in 0..config.warmup {
        let (accept, _, _) = s.transition(&mut z);
        s.epsilon = step.learn(accept);
        if metric_on {
            if let Some(var) = metric.learn(&z.q) {
                s.inv_metric = var;
                s.init_stepsize(&z)?;
                step.restart(s.epsilon);
            }
        }
    }
    if adapt {
        s.epsilon = step.final_step();
    }

    let mut run = ChainRun {
        draws: Vec::with_capacity(config.draws),
        accept_stat: Vec::with_capacity(config.draws),
        tree_depth: Vec::with_capacity(config.draws),
        n_leapfrog: Vec::with_capacity(config.draws),
        divergent: Vec::with_capacity(config.draws),
        step_size: s.epsilon,
        inv_metric: s.inv_metric.clone(),
    };
    for _ in 0..config.draws {
        let (accept, depth, n) = s.transition(&mut z);
        run.draws.push(z.q.clone());
        run.accept_stat.push(accept);
        run.tree_depth.push(depth);
        run.n_leapfrog.push(n);
        run.divergent.push(s.divergent);
    }
    Ok(run)
}

/// Runs `config.chains` chains in parallel; chain `c` starts at `inits[c]`.
pub fn run_chains<D: LogDensity>(target: &D, inits: &[Vec<f64>], config: &NutsConfig) -> Result<Vec<ChainRun>, BayesError> {
    config.validate()?;
    if inits.len() != config.chains {
        return Err(BayesError::Config(format!("{} initial points for {} chains", inits.len(), config.chains)));
    }
    inits.par_iter().enumerate().map(|(c, init)| run_chain(target, init, config, c as u64)).collect()
}
