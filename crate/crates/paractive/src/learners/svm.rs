//! Online kernel SVM in the LASVM style, adapted to importance-weighted
//! examples: the box constraint of a support vector queried with probability
//! `p` becomes `alpha in [0, C/p]`, and the change of any alpha within a
//! single process or reprocess step is capped at `C`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RBF kernel `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    assert_eq!(x.len(), y.len(), "kernel argument dimension mismatch");
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let d = a - b;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// SVM trade-off parameter.
    pub c: f64,
    /// RBF bandwidth.
    pub gamma: f64,
    /// KKT violation tolerance for direction-step selection.
    pub kkt_tol: f64,
    /// Kernel row cache capacity (rows).
    pub cache_rows: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: 0.012,
            kkt_tol: 1e-3,
            cache_rows: 256,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SupportVector {
    /// Global stream index of the example.
    pub index: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// Query probability; scales the box to `[0, C/p]`.
    pub p: f64,
    /// Signed dual coefficient `beta = alpha * y`.
    pub beta: f64,
    /// Cached gradient `y - sum_j beta_j K(x_j, x)`.
    pub g: f64,
}

impl SupportVector {
    pub fn alpha(&self) -> f64 {
        self.beta * self.y
    }
}

/// LRU cache of kernel rows, keyed by global example index. Counts actual
/// kernel evaluations so cache hits cost nothing in the abstract timing
/// model.
#[derive(Clone, Debug, Default)]
struct KernelCache {
    cap: usize,
    clock: u64,
    evals: u64,
    rows: HashMap<usize, CacheRow>,
}

#[derive(Clone, Debug)]
struct CacheRow {
    last_used: u64,
    vals: HashMap<usize, f64>,
}

impl KernelCache {
    fn new(cap: usize) -> Self {
        KernelCache {
            cap,
            ..Default::default()
        }
    }

    fn get(&mut self, gamma: f64, ia: usize, xa: &[f64], ib: usize, xb: &[f64]) -> f64 {
        if ia == ib {
            return 1.0;
        }
        self.clock += 1;
        let clock = self.clock;
        if let Some(row) = self.rows.get_mut(&ia) {
            if let Some(&v) = row.vals.get(&ib) {
                row.last_used = clock;
                return v;
            }
        }
        if let Some(row) = self.rows.get_mut(&ib) {
            if let Some(&v) = row.vals.get(&ia) {
                row.last_used = clock;
                return v;
            }
        }
        let v = rbf_kernel(xa, xb, gamma);
        self.evals += 1;
        if self.cap > 0 {
            if !self.rows.contains_key(&ia) && self.rows.len() >= self.cap {
                self.evict();
            }
            let row = self.rows.entry(ia).or_insert_with(|| CacheRow {
                last_used: clock,
                vals: HashMap::new(),
            });
            row.last_used = clock;
            row.vals.insert(ib, v);
        }
        v
    }

    fn evict(&mut self) {
        if let Some(&key) = self
            .rows
            .iter()
            .min_by_key(|(k, row)| (row.last_used, **k))
            .map(|(k, _)| k)
        {
            self.rows.remove(&key);
        }
    }
}

/// Online kernel SVM state: support set, dual coefficients, cached gradients
/// and prediction bias.
#[derive(Clone, Debug)]
pub struct KernelSvm {
    cfg: SvmConfig,
    svs: Vec<SupportVector>,
    bias: f64,
    cache: KernelCache,
    /// Dual objective tracked only when auditing.
    last_dual: f64,
    audit: bool,
}

impl KernelSvm {
    pub fn new(cfg: SvmConfig) -> Self {
        let cache = KernelCache::new(cfg.cache_rows);
        KernelSvm {
            cfg,
            svs: Vec::new(),
            bias: 0.0,
            cache,
            last_dual: 0.0,
            audit: false,
        }
    }

    /// Enable per-step invariant assertions (box, step cap, dual ascent,
    /// gradient cache coherence). Panics on violation.
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
        if on {
            self.last_dual = self.dual_objective();
        }
    }

    pub fn config(&self) -> &SvmConfig {
        &self.cfg
    }

    pub fn support_count(&self) -> usize {
        self.svs.len()
    }

    pub fn support_vectors(&self) -> &[SupportVector] {
        &self.svs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub(crate) fn restore(cfg: SvmConfig, svs: Vec<SupportVector>, bias: f64) -> Self {
        let cache = KernelCache::new(cfg.cache_rows);
        KernelSvm {
            cfg,
            svs,
            bias,
            cache,
            last_dual: 0.0,
            audit: false,
        }
    }

    /// `sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for sv in &self.svs {
            if sv.beta != 0.0 {
                f += sv.beta * rbf_kernel(&sv.x, x, self.cfg.gamma);
            }
        }
        f
    }

    fn upper(&self, s: &SupportVector) -> f64 {
        if s.y > 0.0 {
            self.cfg.c / s.p
        } else {
            0.0
        }
    }

    fn lower(&self, s: &SupportVector) -> f64 {
        if s.y > 0.0 {
            0.0
        } else {
            -self.cfg.c / s.p
        }
    }

    fn movable_up(&self, s: &SupportVector) -> bool {
        s.beta < self.upper(s)
    }

    fn movable_down(&self, s: &SupportVector) -> bool {
        s.beta > self.lower(s)
    }

    fn argmax_up(&self, exclude: Option<usize>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.svs.iter().enumerate() {
            if Some(i) == exclude || !self.movable_up(s) {
                continue;
            }
            if best.is_none_or(|b| s.g > self.svs[b].g) {
                best = Some(i);
            }
        }
        best
    }

    fn argmin_down(&self, exclude: Option<usize>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.svs.iter().enumerate() {
            if Some(i) == exclude || !self.movable_down(s) {
                continue;
            }
            if best.is_none_or(|b| s.g < self.svs[b].g) {
                best = Some(i);
            }
        }
        best
    }

    fn kernel(&mut self, a: usize, b: usize) -> f64 {
        let gamma = self.cfg.gamma;
        let svs = &self.svs;
        let cache = &mut self.cache;
        cache.get(gamma, svs[a].index, &svs[a].x, svs[b].index, &svs[b].x)
    }

    /// One direction step moving `up` (+lambda) and/or `down` (-lambda).
    /// Returns whether a step was taken.
    fn direction_step(&mut self, up: Option<usize>, down: Option<usize>) -> bool {
        let tol = self.cfg.kkt_tol;
        let (lambda, up, down) = match (up, down) {
            (Some(u), Some(d)) if self.svs[u].g - self.svs[d].g > tol => {
                let kuu = self.kernel(u, u);
                let kdd = self.kernel(d, d);
                let kud = self.kernel(u, d);
                let denom = kuu + kdd - 2.0 * kud;
                let gap = self.svs[u].g - self.svs[d].g;
                let unconstrained = if denom > f64::EPSILON {
                    gap / denom
                } else {
                    f64::INFINITY
                };
                let lambda = unconstrained
                    .min(self.upper(&self.svs[u]) - self.svs[u].beta)
                    .min(self.svs[d].beta - self.lower(&self.svs[d]))
                    .min(self.cfg.c);
                (lambda, Some(u), Some(d))
            }
            (Some(u), _) if self.svs[u].g > tol => {
                let kuu = self.kernel(u, u);
                let lambda = (self.svs[u].g / kuu)
                    .min(self.upper(&self.svs[u]) - self.svs[u].beta)
                    .min(self.cfg.c);
                (lambda, Some(u), None)
            }
            (_, Some(d)) if self.svs[d].g < -tol => {
                let kdd = self.kernel(d, d);
                let lambda = (-self.svs[d].g / kdd)
                    .min(self.svs[d].beta - self.lower(&self.svs[d]))
                    .min(self.cfg.c);
                (lambda, None, Some(d))
            }
            _ => return false,
        };
        if lambda <= 0.0 {
            return false;
        }
        if let Some(u) = up {
            self.svs[u].beta += lambda;
        }
        if let Some(d) = down {
            self.svs[d].beta -= lambda;
        }
        // gradient maintenance: dg_s = -lambda*K(up,s) + lambda*K(down,s)
        for s in 0..self.svs.len() {
            let mut dg = 0.0;
            if let Some(u) = up {
                dg -= lambda * self.kernel(u, s);
            }
            if let Some(d) = down {
                dg += lambda * self.kernel(d, s);
            }
            self.svs[s].g += dg;
        }
        if self.audit {
            self.assert_invariants(lambda);
        }
        true
    }

    /// Insert a new example and take one direction step against its most
    /// violating partner (single-variable step if no partner is movable).
    /// Returns the abstract operation count (kernel evaluations).
    pub fn process(&mut self, index: usize, x: &[f64], y: f64, p: f64) -> Result<u64> {
        if self.svs.iter().any(|s| s.index == index) {
            return Err(Error::DuplicateSupportVector(index));
        }
        let evals0 = self.cache.evals;
        let mut g = y;
        {
            let gamma = self.cfg.gamma;
            let svs = &self.svs;
            let cache = &mut self.cache;
            for sv in svs {
                if sv.beta != 0.0 {
                    g -= sv.beta * cache.get(gamma, sv.index, &sv.x, index, x);
                }
            }
        }
        self.svs.push(SupportVector {
            index,
            x: x.to_vec(),
            y,
            p,
            beta: 0.0,
            g,
        });
        let t = self.svs.len() - 1;
        if y > 0.0 {
            let down = self.argmin_down(Some(t));
            self.direction_step(Some(t), down);
        } else {
            let up = self.argmax_up(Some(t));
            self.direction_step(up, Some(t));
        }
        Ok(self.cache.evals - evals0)
    }

    /// One most-violating-pair step among existing support vectors, removal
    /// of blatant non-support-vectors, and bias refresh from the active
    /// gradient extremes. Returns the abstract operation count.
    pub fn reprocess(&mut self) -> u64 {
        let evals0 = self.cache.evals;
        if self.svs.is_empty() {
            return 0;
        }
        let up = self.argmax_up(None);
        let down = self.argmin_down(None);
        let stepped = self.direction_step(up, down);

        let up = self.argmax_up(None);
        let down = self.argmin_down(None);
        let g_up = up.map(|i| self.svs[i].g);
        let g_down = down.map(|i| self.svs[i].g);

        if stepped {
            self.svs.retain(|s| {
                if s.beta != 0.0 {
                    return true;
                }
                let blatant_pos = s.y > 0.0 && g_down.is_some_and(|gd| s.g <= gd);
                let blatant_neg = s.y < 0.0 && g_up.is_some_and(|gu| s.g >= gu);
                !(blatant_pos || blatant_neg)
            });
        }

        self.bias = match (g_up, g_down) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => 0.0,
        };
        self.cache.evals - evals0
    }

    /// One process step followed by exactly two reprocess steps.
    pub fn update_one(&mut self, index: usize, x: &[f64], y: f64, p: f64) -> Result<u64> {
        let mut ops = self.process(index, x, y, p)?;
        ops += self.reprocess();
        ops += self.reprocess();
        Ok(ops)
    }

    /// Dual objective `sum_i beta_i y_i - 1/2 sum_ij beta_i beta_j K_ij`,
    /// recomputed from scratch.
    pub fn dual_objective(&self) -> f64 {
        let mut w = 0.0;
        for (i, a) in self.svs.iter().enumerate() {
            w += a.beta * a.y;
            if a.beta == 0.0 {
                continue;
            }
            for b in &self.svs[..i] {
                if b.beta != 0.0 {
                    w -= a.beta * b.beta * rbf_kernel(&a.x, &b.x, self.cfg.gamma);
                }
            }
            w -= 0.5 * a.beta * a.beta;
        }
        w
    }

    /// Max deviation between the cached gradients and a from-scratch
    /// recomputation.
    pub fn gradient_cache_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.svs {
            let mut g = a.y;
            for b in &self.svs {
                if b.beta != 0.0 {
                    g -= b.beta * rbf_kernel(&b.x, &a.x, self.cfg.gamma);
                }
            }
            worst = worst.max((g - a.g).abs());
        }
        worst
    }

    fn assert_invariants(&mut self, lambda: f64) {
        assert!(
            lambda <= self.cfg.c + 1e-12,
            "step size {lambda} exceeds the per-step cap C = {}",
            self.cfg.c
        );
        for s in &self.svs {
            let alpha = s.alpha();
            assert!(
                (-1e-12..=self.cfg.c / s.p + 1e-12).contains(&alpha),
                "alpha {} outside [0, C/p] = [0, {}]",
                alpha,
                self.cfg.c / s.p
            );
        }
        let dual = self.dual_objective();
        assert!(
            dual >= self.last_dual - 1e-10,
            "dual objective decreased: {} -> {}",
            self.last_dual,
            dual
        );
        self.last_dual = dual;
        let dev = self.gradient_cache_deviation();
        assert!(dev < 1e-8, "gradient cache deviates by {dev}");
    }
}
