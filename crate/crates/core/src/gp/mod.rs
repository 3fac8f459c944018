//! Online correction of skill outcomes: Gaussian-process residual models over
//! (skill, contact mask) with the repertoire outcome as prior mean, the
//! match score between an outcome and a target, and UCB mask selection.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gait::{ContactMask, NUM_LEGS};
use crate::se2::{wrap_angle, Pose2};

pub const EPS_K: f64 = 4.0;
pub const EPS_C: f64 = 0.5;
pub const EPS_FLOOR: f64 = 0.25;
pub const YAW_WEIGHT: f64 = 0.3;
pub const DEFAULT_BETA: f64 = 0.1;

const MASKS: usize = 1 << NUM_LEGS;

/// Weighted distance between two displacements.
pub fn delta(obs: &Pose2<f64>, des: &Pose2<f64>) -> f64 {
    let dx = obs.x - des.x;
    let dy = obs.y - des.y;
    let dyaw = YAW_WEIGHT * wrap_angle(obs.yaw - des.yaw);
    (dx * dx + dy * dy + dyaw * dyaw).sqrt()
}

/// Match score in `(0, 1]` between an observed and a desired displacement.
pub fn epsilon(obs: &Pose2<f64>, des: &Pose2<f64>) -> f64 {
    epsilon_of(delta(obs, des), des)
}

fn epsilon_of(delta: f64, des: &Pose2<f64>) -> f64 {
    let denom = (2.0 * des.translation_norm() - EPS_C).max(EPS_FLOOR);
    (-EPS_K * delta / denom).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpParams {
    pub signal_var: f64,
    pub length_scale: f64,
    /// Weight on the distance between mask bit vectors scaled to unit diameter.
    pub mask_weight: f64,
    pub noise_var: f64,
    pub window: usize,
}

impl Default for GpParams {
    fn default() -> Self {
        Self { signal_var: 1.0, length_scale: 0.4, mask_weight: 0.5, noise_var: 0.01, window: 50 }
    }
}

impl GpParams {
    fn spatial(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Squared mask part of the input distance. The bit vector is scaled to
    /// unit diameter before weighting.
    fn mask_distance2(&self, hamming: u32) -> f64 {
        self.mask_weight * self.mask_weight * hamming as f64 / NUM_LEGS as f64
    }

    /// Mask factor of the kernel by Hamming distance.
    fn mask_table(&self) -> [f64; NUM_LEGS + 1] {
        std::array::from_fn(|h| (-self.mask_distance2(h as u32) / (2.0 * self.length_scale * self.length_scale)).exp())
    }

    pub fn kernel(&self, a: &GpInput, b: &GpInput) -> f64 {
        let dm2 = self.mask_distance2((a.mask.bits() ^ b.mask.bits()).count_ones());
        let d2 = (a.bd[0] - b.bd[0]).powi(2) + (a.bd[1] - b.bd[1]).powi(2) + dm2;
        self.signal_var * (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

/// Kernel input: normalised skill descriptor and a contact mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpInput {
    pub bd: [f64; 2],
    pub mask: ContactMask,
}

impl GpInput {
    pub fn to_vec(&self) -> [f64; 2 + NUM_LEGS] {
        let bits = self.mask.to_unit::<f64>();
        let mut v = [0.0; 2 + NUM_LEGS];
        v[..2].copy_from_slice(&self.bd);
        v[2..].copy_from_slice(&bits);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub input: GpInput,
    pub prior: Pose2<f64>,
    pub observed: Pose2<f64>,
}

impl Observation {
    pub fn residual(&self) -> [f64; 3] {
        [self.observed.x - self.prior.x, self.observed.y - self.prior.y, wrap_angle(self.observed.yaw - self.prior.yaw)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: Pose2<f64>,
    /// Identical for the three outputs, which share inputs and kernel.
    pub var: [f64; 3],
}

impl Prediction {
    /// Root mean of the per-output variances.
    pub fn pooled_std(&self) -> f64 {
        (self.var.iter().sum::<f64>() / 3.0).max(0.0).sqrt()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("non-finite observation {0:?} rejected")]
    NonFinite(Pose2<f64>),
    #[error("kernel matrix is not positive definite")]
    Singular,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Three residual GPs over a sliding window of observations.
#[derive(Debug, Clone)]
pub struct GpBank {
    params: GpParams,
    b_top: f64,
    obs: VecDeque<Observation>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    /// `K^-1 r` for each output.
    alpha: Vec<[f64; 3]>,
}

impl GpBank {
    pub fn new(b_top: f64) -> Self {
        Self::with_params(b_top, GpParams::default())
    }

    pub fn with_params(b_top: f64, params: GpParams) -> Self {
        assert!(b_top > 0.0 && params.window > 0);
        Self { params, b_top, obs: VecDeque::new(), chol: None, alpha: Vec::new() }
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    pub fn b_top(&self) -> f64 {
        self.b_top
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.obs.iter()
    }

    pub fn input(&self, bd: [f64; 2], mask: ContactMask) -> GpInput {
        GpInput { bd: [bd[0] / self.b_top, bd[1] / self.b_top], mask }
    }

    /// Adds an observation of skill `bd` run with `mask` whose archive
    /// outcome is `prior`, then refits.
    pub fn update(&mut self, bd: [f64; 2], mask: ContactMask, prior: Pose2<f64>, observed: Pose2<f64>) -> Result<(), GpError> {
        let finite = [observed.x, observed.y, observed.yaw, prior.x, prior.y, prior.yaw, bd[0], bd[1]].iter().all(|v| v.is_finite());
        if !finite {
            return Err(GpError::NonFinite(observed));
        }
        self.push(Observation { input: self.input(bd, mask), prior, observed })
    }

    fn push(&mut self, o: Observation) -> Result<(), GpError> {
        self.obs.push_back(o);
        while self.obs.len() > self.params.window {
            self.obs.pop_front();
        }
        self.refit()
    }

    fn refit(&mut self) -> Result<(), GpError> {
        let n = self.obs.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| self.params.kernel(&self.obs[i].input, &self.obs[j].input));
        for i in 0..n {
            k[(i, i)] += self.params.noise_var;
        }
        let chol = k.cholesky().ok_or(GpError::Singular)?;
        let mut alpha = vec![[0.0; 3]; n];
        for out in 0..3 {
            let r = DVector::from_iterator(n, self.obs.iter().map(|o| o.residual()[out]));
            let a = chol.solve(&r);
            for (dst, v) in alpha.iter_mut().zip(a.iter()) {
                dst[out] = *v;
            }
        }
        self.chol = Some(chol);
        self.alpha = alpha;
        Ok(())
    }

    fn cross(&self, x: &GpInput) -> DVector<f64> {
        DVector::from_iterator(self.obs.len(), self.obs.iter().map(|o| self.params.kernel(x, &o.input)))
    }

    pub fn predict(&self, bd: [f64; 2], mask: ContactMask, prior: Pose2<f64>) -> Prediction {
        let x = self.input(bd, mask);
        let prior_var = self.params.signal_var + self.params.noise_var;
        let Some(chol) = &self.chol else {
            return Prediction { mean: prior, var: [prior_var; 3] };
        };
        let k = self.cross(&x);
        let mut r = [0.0; 3];
        for (kj, a) in k.iter().zip(&self.alpha) {
            for out in 0..3 {
                r[out] += kj * a[out];
            }
        }
        let v = chol.l().solve_lower_triangular(&k).expect("cholesky factor has a non-zero diagonal");
        let var = (prior_var - v.norm_squared()).max(0.0);
        Prediction { mean: apply(prior, r), var: [var; 3] }
    }

    /// Posterior mean only.
    pub fn mean(&self, bd: [f64; 2], mask: ContactMask, prior: Pose2<f64>) -> Pose2<f64> {
        let x = self.input(bd, mask);
        let mut r = [0.0; 3];
        for (o, a) in self.obs.iter().zip(&self.alpha) {
            let k = self.params.kernel(&x, &o.input);
            for c in 0..3 {
                r[c] += k * a[c];
            }
        }
        apply(prior, r)
    }

    /// Posterior residual means for every mask at one skill.
    ///
    /// Observations sharing a mask are pooled first, so the cost is linear in
    /// the window plus 64 times the number of distinct observed masks.
    pub fn mask_residuals(&self, bd: [f64; 2]) -> [[f64; 3]; MASKS] {
        let mut out = [[0.0; 3]; MASKS];
        if self.obs.is_empty() {
            return out;
        }
        let q = [bd[0] / self.b_top, bd[1] / self.b_top];
        let mut pooled: Vec<(u8, [f64; 3])> = Vec::new();
        for (o, a) in self.obs.iter().zip(&self.alpha) {
            let w = self.params.signal_var * self.params.spatial(q, o.input.bd);
            let bits = o.input.mask.bits();
            let slot = match pooled.iter().position(|(m, _)| *m == bits) {
                Some(i) => i,
                None => {
                    pooled.push((bits, [0.0; 3]));
                    pooled.len() - 1
                }
            };
            for c in 0..3 {
                pooled[slot].1[c] += w * a[c];
            }
        }
        let table = self.params.mask_table();
        for (m, r) in out.iter_mut().enumerate() {
            for (bits, p) in &pooled {
                let f = table[((m as u8) ^ bits).count_ones() as usize];
                for c in 0..3 {
                    r[c] += f * p[c];
                }
            }
        }
        out
    }

    /// Posterior means for every mask at one skill.
    pub fn mask_means(&self, bd: [f64; 2], prior: Pose2<f64>) -> [Pose2<f64>; MASKS] {
        let r = self.mask_residuals(bd);
        std::array::from_fn(|m| apply(prior, r[m]))
    }

    /// Posterior mean averaged over all masks.
    pub fn marginal_mean(&self, bd: [f64; 2], prior: Pose2<f64>) -> Pose2<f64> {
        let r = self.mask_residuals(bd);
        let mut s = [0.0; 3];
        for v in &r {
            for c in 0..3 {
                s[c] += v[c] / MASKS as f64;
            }
        }
        apply(prior, s)
    }

    /// Mask with the best predicted match to `desired` (no exploration bonus)
    /// and its predicted outcome.
    pub fn best_mask(&self, bd: [f64; 2], prior: Pose2<f64>, desired: &Pose2<f64>, feasible: &[ContactMask]) -> (ContactMask, Pose2<f64>) {
        assert!(!feasible.is_empty(), "no feasible masks");
        let means = self.mask_means(bd, prior);
        let mut best = (feasible[0], f64::NEG_INFINITY);
        for &m in feasible {
            let s = epsilon(&means[m.index()], desired);
            if s > best.1 || (s == best.1 && m.bits() < best.0.bits()) {
                best = (m, s);
            }
        }
        (best.0, means[best.0.index()])
    }

    /// UCB over masks: predicted match to `desired` plus `beta` times the
    /// pooled predictive std. Ties go to the lowest mask.
    pub fn ucb_select_mask(&self, bd: [f64; 2], prior: Pose2<f64>, desired: &Pose2<f64>, beta: f64, feasible: &[ContactMask]) -> ContactMask {
        assert!(!feasible.is_empty(), "no feasible masks");
        let mut best = (feasible[0], f64::NEG_INFINITY);
        for &m in feasible {
            let p = self.predict(bd, m, prior);
            let s = epsilon(&p.mean, desired) + beta * p.pooled_std();
            if s > best.1 || (s == best.1 && m.bits() < best.0.bits()) {
                best = (m, s);
            }
        }
        best.0
    }

    /// One observation per line: `bd_x bd_y mask prior_x prior_y prior_yaw obs_x obs_y obs_yaw`
    /// with the descriptor already normalised.
    pub fn to_text(&self) -> String {
        let mut s = format!("#gp b_top={} window={}\n", self.b_top, self.params.window);
        for o in &self.obs {
            let p = o.prior;
            let v = o.observed;
            let _ = writeln!(s, "{} {} {} {} {} {} {} {} {}", o.input.bd[0], o.input.bd[1], o.input.mask, p.x, p.y, p.yaw, v.x, v.y, v.yaw);
        }
        s
    }

    /// Rebuilds a bank from [`GpBank::to_text`] output.
    pub fn from_text(text: &str, params: GpParams) -> Result<Self, GpError> {
        let perr = |line: usize, msg: &str| GpError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| perr(1, "empty"))?;
        let b_top = head
            .split_whitespace()
            .find_map(|t| t.strip_prefix("b_top="))
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| *v > 0.0)
            .ok_or_else(|| perr(1, "missing b_top"))?;
        let mut bank = Self::with_params(b_top, params);
        for (i, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.is_empty() {
                continue;
            }
            if tok.len() != 9 {
                return Err(perr(i + 1, "expected 9 fields"));
            }
            let mask: ContactMask = tok[2].parse().map_err(|_| perr(i + 1, "bad mask"))?;
            let mut v = [0.0f64; 8];
            for (dst, t) in v.iter_mut().zip(tok.iter().enumerate().filter(|(k, _)| *k != 2).map(|(_, t)| t)) {
                *dst = t.parse().map_err(|_| perr(i + 1, "bad number"))?;
            }
            let prior = Pose2 { x: v[2], y: v[3], yaw: v[4] };
            let observed = Pose2 { x: v[5], y: v[6], yaw: v[7] };
            if !v.iter().all(|x| x.is_finite()) {
                return Err(GpError::NonFinite(observed));
            }
            bank.push(Observation { input: GpInput { bd: [v[0], v[1]], mask }, prior, observed })?;
        }
        Ok(bank)
    }
}

fn apply(prior: Pose2<f64>, r: [f64; 3]) -> Pose2<f64> {
    Pose2 { x: prior.x + r[0], y: prior.y + r[1], yaw: wrap_angle(prior.yaw + r[2]) }
}
