//! The cylinder walk in `B_r(0) x [0, r]`.
//!
//! Three independent constructions are combined: a vertical fair walk
//! `t~_i` with steps `+-eps` started at `t0`, a horizontal walk `x~_i` with
//! increments uniform in the `eps`-ball started at the origin, and a
//! Bernoulli(`alpha`) clock `U_j` counting the vertical steps taken by time
//! `j`. The walk itself is `t_j = t~_{U_j}`, `x_j = x~_{j - U_j}`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{self, RegularityConstants};
use crate::domain::Domain;
use crate::point::{add, norm};
use crate::rng::{derive_seed, sample_ball, SimRng};
use crate::stats::{fit_through_origin, OriginFit, Proportion};
use crate::{Error, Result};
use rand::SeedableRng;

/// Relative tolerance, in units of `eps`, for deciding that the vertical
/// walk has reached `0` or `r`.
const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderParams {
    pub n: usize,
    pub r: f64,
    pub eps: f64,
    pub alpha: f64,
    pub t0: f64,
    pub max_steps: u64,
}

impl CylinderParams {
    /// Uses `alpha = (p - 2) / (p + n)` and the default horizon
    /// `ceil(100 (r / eps)^2)` composite steps.
    pub fn new(n: usize, p: f64, r: f64, eps: f64, t0: f64) -> Result<Self> {
        let (alpha, _) = crate::game::compute_probabilities(n, p)?;
        let params = CylinderParams {
            n,
            r,
            eps,
            alpha,
            t0,
            max_steps: (100.0 * (r / eps).powi(2)).ceil() as u64,
        };
        params.validate(false)?;
        Ok(params)
    }

    /// Diagnostic clock probability anywhere in `[0, 1]`.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate(true)?;
        Ok(self)
    }

    pub fn with_t0(mut self, t0: f64) -> Result<Self> {
        self.t0 = t0;
        self.validate(true)?;
        Ok(self)
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    fn validate(&self, diagnostic: bool) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("cylinder dimension must be at least 1"));
        }
        if !(self.r > 0.0 && self.eps > 0.0 && self.eps < self.r) {
            return Err(Error::param("cylinder needs 0 < eps < r"));
        }
        if !(self.t0 > 0.0 && self.t0 < self.r) {
            return Err(Error::param("starting height must satisfy 0 < t0 < r"));
        }
        let ok = if diagnostic {
            (0.0..=1.0).contains(&self.alpha)
        } else {
            self.alpha > 0.0 && self.alpha < 1.0
        };
        if !ok {
            return Err(Error::param(format!(
                "clock probability {} out of range",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `min(t0, r - t0)`.
    pub fn margin(&self) -> f64 {
        self.t0.min(self.r - self.t0)
    }

    /// Integer vertical levels at which the vertical walk has left `(0, r)`.
    fn exit_levels(&self) -> (i64, i64) {
        let lo = (-self.t0 / self.eps + LEVEL_TOL).floor() as i64;
        let hi = ((self.r - self.t0) / self.eps - LEVEL_TOL).ceil() as i64;
        (lo, hi)
    }

    fn height(&self, level: i64) -> f64 {
        self.t0 + self.eps * level as f64
    }
}

/// Seeds of the three independent streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CylinderSeeds {
    pub vertical: u64,
    pub horizontal: u64,
    pub clock: u64,
}

impl CylinderSeeds {
    pub fn derive(master: u64, index: u64) -> Self {
        CylinderSeeds {
            vertical: derive_seed(master, "cylinder-vertical", index),
            horizontal: derive_seed(master, "cylinder-horizontal", index),
            clock: derive_seed(master, "cylinder-clock", index),
        }
    }
}

/// Whether to generate the horizontal walk. Estimators that only look at
/// the clock and the vertical walk skip it; the horizontal stream is
/// independent so this does not change the law of anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizontal {
    Track,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderOutcome {
    /// First composite index with `t_j` outside `(0, r)`.
    pub tau_g: u64,
    /// First vertical-walk index outside `(0, r)`.
    pub tau_tilde_g: u64,
    /// First composite index with `|x_j| >= r`, if it happened by `tau_g`.
    pub tau_b: Option<u64>,
    /// `t_{tau_g} <= 0`.
    pub bottom_exit: bool,
    /// `x_{tau_g}`; `None` when the horizontal walk was skipped.
    pub exit_position: Option<Vec<f64>>,
    /// Clock value `U_{tau_g}`.
    pub u_at_tau_g: u64,
}

impl CylinderOutcome {
    /// `tau_g - tau~_g`, the number of horizontal moves before `tau_g`.
    pub fn horizontal_moves(&self) -> u64 {
        self.tau_g - self.tau_tilde_g
    }
}

/// State of a walk cut off by the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPartial {
    pub steps: u64,
    pub vertical_steps: u64,
    pub height: f64,
    pub tau_b: Option<u64>,
}

/// One composite step, as written to the audit log.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditStep {
    pub j: u64,
    pub vertical: bool,
    pub t: f64,
    pub x: Vec<f64>,
}

struct Streams {
    vertical: SimRng,
    horizontal: SimRng,
    clock: SimRng,
}

impl Streams {
    fn new(seeds: CylinderSeeds) -> Self {
        Streams {
            vertical: SimRng::seed_from_u64(seeds.vertical),
            horizontal: SimRng::seed_from_u64(seeds.horizontal),
            clock: SimRng::seed_from_u64(seeds.clock),
        }
    }
}

fn walk(
    params: &CylinderParams,
    seeds: CylinderSeeds,
    horizontal: Horizontal,
    mut audit: Option<&mut Vec<AuditStep>>,
) -> Result<CylinderOutcome> {
    let (lo, hi) = params.exit_levels();
    let mut s = Streams::new(seeds);
    let track = horizontal == Horizontal::Track || audit.is_some();
    let mut x = vec![0.0; params.n];
    let mut dx = vec![0.0; params.n];
    let mut level = 0i64;
    let mut u = 0u64;
    let mut tau_b = None;
    let r2 = params.r * params.r;
    for j in 1..=params.max_steps {
        let vertical = s.clock.random_bool(params.alpha);
        if vertical {
            level += if s.vertical.random::<bool>() { 1 } else { -1 };
            u += 1;
        } else if track {
            sample_ball(&mut s.horizontal, params.eps, &mut dx);
            crate::point::add_assign(&mut x, &dx);
            if tau_b.is_none() && x.iter().map(|v| v * v).sum::<f64>() >= r2 {
                tau_b = Some(j);
            }
        }
        if let Some(log) = audit.as_deref_mut() {
            log.push(AuditStep {
                j,
                vertical,
                t: params.height(level),
                x: x.clone(),
            });
        }
        if level <= lo || level >= hi {
            return Ok(CylinderOutcome {
                tau_g: j,
                tau_tilde_g: u,
                tau_b,
                bottom_exit: level <= lo,
                exit_position: track.then_some(x),
                u_at_tau_g: u,
            });
        }
    }
    Err(Error::TruncatedCylinder(Box::new(CylinderPartial {
        steps: params.max_steps,
        vertical_steps: u,
        height: params.height(level),
        tau_b,
    })))
}

/// Runs one cylinder walk until the vertical coordinate leaves `(0, r)`.
/// `tau_b` is monitored along the way but does not stop the walk.
pub fn run_cylinder_walk(params: &CylinderParams, seeds: CylinderSeeds) -> Result<CylinderOutcome> {
    walk(params, seeds, Horizontal::Track, None)
}

pub fn run_cylinder_walk_with(
    params: &CylinderParams,
    seeds: CylinderSeeds,
    horizontal: Horizontal,
) -> Result<CylinderOutcome> {
    walk(params, seeds, horizontal, None)
}

/// Runs one walk and records every composite step.
pub fn run_cylinder_walk_audited(
    params: &CylinderParams,
    seeds: CylinderSeeds,
) -> Result<(CylinderOutcome, Vec<AuditStep>)> {
    let mut log = Vec::new();
    let out = walk(params, seeds, Horizontal::Track, Some(&mut log))?;
    Ok((out, log))
}

/// Writes the audit log as text, one step per line: `j branch t_j |x_j|`.
pub fn write_audit_log<W: Write>(steps: &[AuditStep], mut w: W) -> std::io::Result<()> {
    for s in steps {
        let branch = if s.vertical { "v" } else { "h" };
        writeln!(w, "{} {} {:.17e} {:.17e}", s.j, branch, s.t, norm(&s.x))?;
    }
    Ok(())
}

/// The three streams generated separately: the vertical walk heights
/// `t~_0..=t~_v`, the horizontal positions `x~_0..=x~_h` and the clock bits
/// of steps `1..=steps`.
pub fn generate_streams(
    params: &CylinderParams,
    seeds: CylinderSeeds,
    steps: usize,
    vertical_len: usize,
    horizontal_len: usize,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<bool>) {
    let mut s = Streams::new(seeds);
    let mut level = 0i64;
    let mut heights = vec![params.height(0)];
    for _ in 0..vertical_len {
        level += if s.vertical.random::<bool>() { 1 } else { -1 };
        heights.push(params.height(level));
    }
    let mut x = vec![0.0; params.n];
    let mut dx = vec![0.0; params.n];
    let mut positions = vec![x.clone()];
    for _ in 0..horizontal_len {
        sample_ball(&mut s.horizontal, params.eps, &mut dx);
        crate::point::add_assign(&mut x, &dx);
        positions.push(x.clone());
    }
    let clock = (0..steps)
        .map(|_| s.clock.random_bool(params.alpha))
        .collect();
    (heights, positions, clock)
}

/// Exit index of a plain `+-eps` walk from `t0` out of `(0, r)`, simulated
/// on its own. Used as an independent reference for `tau~_g`.
pub fn vertical_exit_time<R: Rng + ?Sized>(params: &CylinderParams, rng: &mut R) -> (u64, bool) {
    let (lo, hi) = params.exit_levels();
    let mut level = 0i64;
    let mut i = 0u64;
    while level > lo && level < hi {
        level += if rng.random::<bool>() { 1 } else { -1 };
        i += 1;
    }
    (i, level <= lo)
}

/// Runs `episodes` walks in parallel and returns the outcomes in index
/// order; `None` marks a truncated run.
pub fn run_many(
    params: &CylinderParams,
    episodes: u64,
    seed: u64,
    horizontal: Horizontal,
) -> Result<Vec<Option<CylinderOutcome>>> {
    if episodes < 1 {
        return Err(Error::param("episodes must be at least 1"));
    }
    (0..episodes)
        .into_par_iter()
        .map(
            |i| match walk(params, CylinderSeeds::derive(seed, i), horizontal, None) {
                Ok(o) => Ok(Some(o)),
                Err(Error::TruncatedCylinder(_)) => Ok(None),
                Err(e) => Err(e),
            },
        )
        .collect()
}

/// A Monte Carlo proportion together with the number of discarded runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderEstimate {
    pub prob: f64,
    pub std_error: f64,
    pub episodes: u64,
    pub truncated: u64,
}

impl CylinderEstimate {
    fn from_outcomes(
        outcomes: &[Option<CylinderOutcome>],
        event: impl Fn(&CylinderOutcome) -> bool,
    ) -> Result<Self> {
        let done: Vec<&CylinderOutcome> = outcomes.iter().flatten().collect();
        if done.is_empty() {
            return Err(Error::Estimation(
                "every cylinder run hit the horizon".into(),
            ));
        }
        let hits = done.iter().filter(|o| event(o)).count() as u64;
        let p = Proportion::new(hits, done.len() as u64);
        Ok(CylinderEstimate {
            prob: p.value(),
            std_error: p.std_error(),
            episodes: done.len() as u64,
            truncated: (outcomes.len() - done.len()) as u64,
        })
    }

    /// More than 1% of the runs were truncated.
    pub fn unreliable(&self) -> bool {
        self.truncated as f64 > 0.01 * (self.episodes + self.truncated) as f64
    }
}

/// Probability that the walk leaves through the bottom `t <= 0`.
pub fn estimate_bottom_exit(
    params: &CylinderParams,
    episodes: u64,
    seed: u64,
) -> Result<CylinderEstimate> {
    let outcomes = run_many(params, episodes, seed, Horizontal::Skip)?;
    CylinderEstimate::from_outcomes(&outcomes, |o| o.bottom_exit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockWindowEstimate {
    pub estimate: CylinderEstimate,
    /// Gaussian-tail lower bound `gaussian_tail(min(t0, r - t0) nu / sqrt(a))`.
    pub analytic_lower: f64,
}

/// Probability that `a / eps <= tau_g - tau~_g < a / eps^2`.
pub fn estimate_clock_window(
    params: &CylinderParams,
    a: f64,
    episodes: u64,
    seed: u64,
) -> Result<ClockWindowEstimate> {
    if !(a > 0.0) {
        return Err(Error::param("window scale a must be positive"));
    }
    let lo = a / params.eps;
    let hi = a / (params.eps * params.eps);
    let outcomes = run_many(params, episodes, seed, Horizontal::Skip)?;
    let estimate = CylinderEstimate::from_outcomes(&outcomes, |o| {
        let h = o.horizontal_moves() as f64;
        lo <= h && h < hi
    })?;
    let nu = bounds::nu_from_alpha(params.alpha)?;
    Ok(ClockWindowEstimate {
        estimate,
        analytic_lower: bounds::gaussian_tail(params.margin() * nu / a.sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventBEstimate {
    /// `P(0.99 alpha tau_g < tau~_g < 1.01 alpha tau_g)`.
    pub estimate: CylinderEstimate,
    /// Empirical `P(tau_g < a / eps)` with `a = min(t0, r - t0)^2`.
    pub short_run: f64,
    /// Hoeffding series plus `short_run`: a ceiling for `P(not B)`.
    pub ceiling: f64,
}

pub fn estimate_event_b(
    params: &CylinderParams,
    episodes: u64,
    seed: u64,
) -> Result<EventBEstimate> {
    let outcomes = run_many(params, episodes, seed, Horizontal::Skip)?;
    let al = params.alpha;
    let estimate = CylinderEstimate::from_outcomes(&outcomes, |o| {
        let (tg, tt) = (o.tau_g as f64, o.tau_tilde_g as f64);
        bounds::SPLIT_LOW * al * tg < tt && tt < bounds::SPLIT_HIGH * al * tg
    })?;
    let a = params.margin().powi(2);
    let start = a / params.eps;
    let short = CylinderEstimate::from_outcomes(&outcomes, |o| (o.tau_g as f64) < start)?;
    let series = bounds::clock_hoeffding_series(params.alpha, start.ceil() as u64);
    Ok(EventBEstimate {
        estimate,
        short_run: short.prob,
        ceiling: series + short.prob,
    })
}

/// Empirical tails of the vertical exit index `tau~_g`:
/// `P(tau~_g >= a / eps)` and `P(tau~_g >= d / eps^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalTails {
    pub beyond_a: Proportion,
    pub beyond_d: Proportion,
}

pub fn estimate_vertical_tails(
    params: &CylinderParams,
    a: f64,
    d: f64,
    episodes: u64,
    seed: u64,
) -> Result<VerticalTails> {
    if episodes < 1 || !(a > 0.0) || !(d > 0.0) {
        return Err(Error::param("need episodes >= 1 and a, d > 0"));
    }
    let times: Vec<u64> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            vertical_exit_time(
                params,
                &mut crate::rng::stream_rng(seed, "vertical-tail", i),
            )
            .0
        })
        .collect();
    let count = |thr: f64| times.iter().filter(|&&t| t as f64 >= thr).count() as u64;
    Ok(VerticalTails {
        beyond_a: Proportion::new(count(a / params.eps), episodes),
        beyond_d: Proportion::new(count(d / (params.eps * params.eps)), episodes),
    })
}

/// Fits `1 - P(bottom) = C (t0 + eps) / r` through the origin with weights
/// `1 / std_error^2`. The slope is the empirical bottom-exit constant.
pub fn fit_bottom_exit_constant(
    params: &CylinderParams,
    points: &[(f64, CylinderEstimate)],
) -> Result<OriginFit> {
    if points.len() < 2 {
        return Err(Error::param("need at least two starting heights"));
    }
    let x: Vec<f64> = points
        .iter()
        .map(|(t0, _)| (t0 + params.eps) / params.r)
        .collect();
    let y: Vec<f64> = points.iter().map(|(_, e)| 1.0 - e.prob).collect();
    let w: Vec<f64> = points
        .iter()
        .map(|(_, e)| 1.0 / e.std_error.max(1e-12).powi(2))
        .collect();
    Ok(fit_through_origin(&x, &y, &w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BadEventResult {
    pub prob_bad: f64,
    pub std_error: f64,
    pub episodes: u64,
    pub truncated: u64,
    /// `theta` of the regularity constants.
    pub theta_reference: f64,
}

/// Probability of the bad event `{tau_b <= tau_g} or {top exit} or
/// {y + x_{tau_g} not in the complement of the domain}` for the walk in the
/// cylinder of radius and height `r = delta / 3` placed at the boundary
/// point `y`.
pub fn bad_event_experiment(
    params: &CylinderParams,
    domain: &Domain,
    boundary_point: &[f64],
    delta: f64,
    lambda: f64,
    constants: &RegularityConstants,
    episodes: u64,
    seed: u64,
) -> Result<BadEventResult> {
    if (params.r - delta / 3.0).abs() > 1e-12 * delta {
        return Err(Error::param("cylinder radius must equal delta / 3"));
    }
    if boundary_point.len() != params.n || domain.dim() != params.n {
        return Err(Error::param(
            "dimension mismatch between cylinder, domain and boundary point",
        ));
    }
    let c_hat = constants.c_np_empirical;
    if params.t0 > delta * lambda / (3.0 * c_hat) {
        return Err(Error::param(format!(
            "start height {} exceeds delta lambda / (3 C) = {}",
            params.t0,
            delta * lambda / (3.0 * c_hat)
        )));
    }
    let outcomes = run_many(params, episodes, seed, Horizontal::Track)?;
    let est = CylinderEstimate::from_outcomes(&outcomes, |o| {
        if o.tau_b.is_some() || !o.bottom_exit {
            return true;
        }
        let x = o.exit_position.as_deref().expect("horizontal walk tracked");
        domain.contains(&add(boundary_point, x))
    })?;
    Ok(BadEventResult {
        prob_bad: est.prob,
        std_error: est.std_error,
        episodes: est.episodes,
        truncated: est.truncated,
        theta_reference: constants.theta,
    })
}
