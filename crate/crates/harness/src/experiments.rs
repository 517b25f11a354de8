//! Configured experiments.
//!
//! Every experiment reads a [`Config`] and produces a [`Report`]: a few
//! human-readable `key=value` lines plus the [`Metric`]s that end up in
//! result records. The typed entry points for the regularity experiments
//! ([`estimate_measure_density`], [`run_regularity`]) and refinement ladders
//! ([`run_eps_ladder`]) are public so they can be driven without a config.

use std::fs::File;
use std::io::{BufWriter, Write};

use rayon::prelude::*;
use tugwar_core::bounds::{self, ClockBounds};
use tugwar_core::cylinder::{self, CylinderEstimate, CylinderParams, CylinderSeeds};
use tugwar_core::density::{self, DensityConstants};
use tugwar_core::domain::Domain;
use tugwar_core::dpp;
use tugwar_core::game::{self, GameParams, Payoff};
use tugwar_core::point::{dist, norm, sub, unit};
use tugwar_core::rng::{sample_ball, stream_rng};
use tugwar_core::stats::{monotone_within_error, Direction, LadderPoint, Proportion};
use tugwar_core::strategy::{
    adversary, race_conditions, CancellationStrategy, Condition, Idle, PullStrategy, RosterContext,
    Strategy, ROSTER_NAMES,
};

use crate::config::Config;
use crate::record::Metric;
use crate::HarnessError;

type Result<T> = std::result::Result<T, HarnessError>;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EPISODES: u64 = 10_000;
pub const DEFAULT_FRACTION: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_SAMPLES: u64 = 100_000;

/// Experiments reachable through [`run`].
pub const EXPERIMENTS: &[&str] = &[
    "probabilities",
    "play",
    "value",
    "cylinder-bottom",
    "cylinder-clock",
    "cylinder-eventb",
    "cylinder-theorem3",
    "density-exact",
    "density-inversion",
    "density-mc",
    "density-bounds",
    "density-constants",
    "bounds-hoeffding",
    "bounds-tail",
    "bounds-reflection",
    "bounds-sin",
    "bounds-constants",
    "bounds-clock",
    "dpp-solve",
    "dpp-compare",
    "regularity",
    "ladder",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<String>,
    pub metrics: Vec<Metric>,
}

impl Report {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn analytic(&mut self, name: &str, value: f64) {
        self.line(format!("{name}={value}"));
        self.metrics.push(Metric::analytic(name, value));
    }

    fn simulated(&mut self, name: &str, value: f64, se: f64, episodes: u64, truncated: u64) {
        self.line(format!(
            "{name}={value} std_error={se} episodes={episodes} truncated={truncated}"
        ));
        self.metrics
            .push(Metric::simulated(name, value, se, episodes, truncated));
    }

    fn estimate(&mut self, name: &str, e: &CylinderEstimate) {
        self.simulated(name, e.prob, e.std_error, e.episodes, e.truncated);
        if e.unreliable() {
            self.line(format!(
                "warning: {name}: {} of {} runs truncated",
                e.truncated,
                e.episodes + e.truncated
            ));
        }
    }

    /// A quantity computed from simulated data without its own standard error.
    fn derived(&mut self, name: &str, value: f64) {
        self.line(format!("{name}={value}"));
        let mut m = Metric::simulated(name, value, f64::NAN, 0, 0);
        m.std_error = None;
        m.episodes = None;
        m.truncated = None;
        self.metrics.push(m);
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Runs the named experiment.
pub fn run(experiment: &str, cfg: &Config) -> Result<Report> {
    match experiment {
        "probabilities" => probabilities(cfg),
        "play" => play(cfg),
        "value" => value(cfg),
        "cylinder-bottom" => cylinder_bottom(cfg),
        "cylinder-clock" => cylinder_clock(cfg),
        "cylinder-eventb" => cylinder_eventb(cfg),
        "cylinder-theorem3" => cylinder_bad_event(cfg),
        "density-exact" => density_exact(cfg),
        "density-inversion" => density_inversion(cfg),
        "density-mc" => density_mc(cfg),
        "density-bounds" => density_bounds(cfg),
        "density-constants" => density_constants(cfg),
        "bounds-hoeffding" => bounds_hoeffding(cfg),
        "bounds-tail" => bounds_tail(cfg),
        "bounds-reflection" => bounds_reflection(cfg),
        "bounds-sin" => bounds_sin(cfg),
        "bounds-constants" => bounds_constants(cfg),
        "bounds-clock" => bounds_clock(cfg),
        "dpp-solve" => dpp_solve(cfg),
        "dpp-compare" => dpp_compare(cfg),
        "regularity" => regularity(cfg),
        "ladder" => ladder(cfg).map(|t| t.report),
        other => Err(HarnessError::Config(format!(
            "unknown experiment `{other}`"
        ))),
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn seed(cfg: &Config) -> u64 {
    cfg.int("seed").unwrap_or(DEFAULT_SEED)
}

fn episodes(cfg: &Config) -> u64 {
    cfg.int("episodes").unwrap_or(DEFAULT_EPISODES)
}

fn dim(cfg: &Config, domain: Option<&Domain>) -> Result<usize> {
    match (cfg.int("n"), domain) {
        (Some(n), Some(d)) if n as usize != d.dim() => Err(config_err(format!(
            "n = {n} does not match the {}-dimensional domain",
            d.dim()
        ))),
        (Some(n), _) => Ok(n as usize),
        (None, Some(d)) => Ok(d.dim()),
        (None, None) => Err(config_err("missing required key `n`")),
    }
}

fn u32_key(cfg: &Config, key: &str) -> Result<u32> {
    let v = cfg.require_int(key)?;
    u32::try_from(v).map_err(|_| config_err(format!("`{key}` is too large")))
}

fn game_params(cfg: &Config, n: usize) -> Result<GameParams> {
    let params = GameParams::new(n, cfg.require_float("p")?, cfg.require_float("eps")?)?;
    Ok(match cfg.float("alpha") {
        Some(a) => params.with_alpha_override(a)?,
        None => params,
    })
}

/// Payoff functions selectable by name:
/// `constant:C`, `linear` (first coordinate), `right-exit` (indicator of
/// leaving through the upper face of the bounding box in the first
/// coordinate) and `radial-p-harmonic` (`|x|^((p - n)/(p - 1))`, or `ln|x|`
/// when `p = n`).
pub fn build_payoff(spec: &str, params: &GameParams, domain: &Domain) -> Result<Payoff> {
    let (lo, hi) = domain.bounding_box();
    let reach = norm(&lo).max(norm(&hi)) + params.eps;
    if let Some(c) = spec.strip_prefix("constant:") {
        let c: f64 = c
            .trim()
            .parse()
            .map_err(|_| config_err(format!("bad constant payoff `{spec}`")))?;
        return Ok(Payoff::constant(c));
    }
    match spec {
        "linear" => Ok(Payoff::new(reach, |x| x[0])),
        "right-exit" => {
            let edge = hi[0];
            Ok(Payoff::new(
                1.0,
                move |x| if x[0] >= edge { 1.0 } else { 0.0 },
            ))
        }
        "radial-p-harmonic" => {
            let (n, p) = (params.n as f64, params.p);
            if (p - n).abs() < 1e-12 {
                let inner = match domain {
                    Domain::Annulus { inner, .. } if *inner > params.eps => inner - params.eps,
                    _ => {
                        return Err(config_err(
                            "radial-p-harmonic with p = n needs an annulus with inner > eps",
                        ))
                    }
                };
                let bound = inner.ln().abs().max(reach.ln().abs());
                return Ok(Payoff::new(bound, |x| norm(x).ln()));
            }
            let e = (p - n) / (p - 1.0);
            let bound = if e >= 0.0 {
                reach.powf(e)
            } else {
                match domain {
                    Domain::Annulus { inner, .. } if *inner > params.eps => {
                        (inner - params.eps).powf(e)
                    }
                    _ => {
                        return Err(config_err(
                            "radial-p-harmonic with p < n needs an annulus with inner > eps",
                        ))
                    }
                }
            };
            Ok(Payoff::new(bound, move |x| norm(x).powf(e)))
        }
        other => Err(config_err(format!("unknown payoff `{other}`"))),
    }
}

/// Strategy by name: `idle`, `cancellation` (needs `y`), `pull:<point>` or
/// a roster adversary (needs `y`).
pub fn build_strategy(
    name: &str,
    domain: &Domain,
    y: Option<&[f64]>,
    fraction: f64,
) -> Result<Box<dyn Strategy>> {
    let need_y = || {
        y.map(<[f64]>::to_vec)
            .ok_or_else(|| config_err(format!("strategy `{name}` needs `y`")))
    };
    if let Some(goal) = name.strip_prefix("pull:") {
        let goal = tugwar_core::domain::parse_coordinates(goal)?;
        if goal.len() != domain.dim() {
            return Err(config_err("pull target has the wrong dimension"));
        }
        return Ok(Box::new(PullStrategy::new(goal, fraction)?));
    }
    match name {
        "idle" => Ok(Box::new(Idle)),
        "cancellation" => Ok(Box::new(CancellationStrategy::new(need_y()?))),
        _ => {
            let ctx = RosterContext {
                domain: domain.clone(),
                boundary_point: need_y()?,
                fraction,
            };
            Ok(adversary(name, &ctx)?)
        }
    }
}

struct GameSetup {
    params: GameParams,
    domain: Domain,
    x0: Vec<f64>,
    s1: Box<dyn Strategy>,
    s2: Box<dyn Strategy>,
    payoff: Payoff,
    max_steps: Option<u64>,
}

fn game_setup(cfg: &Config) -> Result<GameSetup> {
    let domain = cfg.require_domain("domain")?;
    let n = dim(cfg, Some(&domain))?;
    let params = game_params(cfg, n)?;
    let x0 = cfg.require_point("x0", n)?;
    let y = cfg.point("y", n)?;
    let fraction = cfg.float("fraction").unwrap_or(DEFAULT_FRACTION);
    let s1 = build_strategy(
        cfg.require_text("strategy1")?,
        &domain,
        y.as_deref(),
        fraction,
    )?;
    let s2 = build_strategy(
        cfg.require_text("strategy2")?,
        &domain,
        y.as_deref(),
        fraction,
    )?;
    let payoff = build_payoff(cfg.require_text("payoff")?, &params, &domain)?;
    Ok(GameSetup {
        params,
        domain,
        x0,
        s1,
        s2,
        payoff,
        max_steps: cfg.int("max_steps"),
    })
}

fn create(path: &str) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(format!("{path}: {e}")))
}

fn io(path: &str) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(format!("{path}: {e}"))
}

fn probabilities(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let (alpha, beta) = game::compute_probabilities(n, cfg.require_float("p")?)?;
    let mut r = Report::default();
    r.analytic("alpha", alpha);
    r.analytic("beta", beta);
    Ok(r)
}

fn play(cfg: &Config) -> Result<Report> {
    let mut g = game_setup(cfg)?;
    let max_steps = g
        .max_steps
        .unwrap_or_else(|| g.params.default_max_steps(&g.domain));
    let mut rng = stream_rng(seed(cfg), "play", 0);
    let trace = game::play_episode(
        &g.params,
        &g.domain,
        &g.x0,
        g.s1.as_mut(),
        g.s2.as_mut(),
        &g.payoff,
        &mut rng,
        max_steps,
    )?;
    if let Some(path) = cfg.text("trace") {
        let mut w = create(path)?;
        let cols: Vec<String> = (0..trace.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "j,coin,{}", cols.join(",")).map_err(io(path))?;
        for (j, p) in trace.positions().enumerate() {
            let coin = if j == 0 {
                String::new()
            } else {
                trace.coins()[j - 1].tag().to_string()
            };
            let xs: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{j},{coin},{}", xs.join(",")).map_err(io(path))?;
        }
        w.flush().map_err(io(path))?;
    }
    let mut r = Report::default();
    let tau = trace.tau().expect("finished trace") as f64;
    let exit = trace.exit_point().expect("finished trace");
    r.line(format!(
        "exit_point={}",
        exit.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    r.simulated("tau", tau, 0.0, 1, 0);
    r.simulated("payoff", trace.payoff().expect("finished trace"), 0.0, 1, 0);
    Ok(r)
}

fn value(cfg: &Config) -> Result<Report> {
    let g = game_setup(cfg)?;
    let v = game::estimate_value(
        &g.params,
        &g.domain,
        &g.x0,
        g.s1.as_ref(),
        g.s2.as_ref(),
        &g.payoff,
        episodes(cfg),
        seed(cfg),
        g.max_steps,
    )?;
    let mut r = Report::default();
    r.simulated("value", v.mean, v.std_error, v.episodes, v.truncated);
    Ok(r)
}

fn cylinder_params(cfg: &Config, t0: f64) -> Result<CylinderParams> {
    let n = dim(cfg, None)?;
    let mut params = CylinderParams::new(
        n,
        cfg.require_float("p")?,
        cfg.require_float("r")?,
        cfg.require_float("eps")?,
        t0,
    )?;
    if let Some(a) = cfg.float("alpha") {
        params = params.with_alpha(a)?;
    }
    if let Some(m) = cfg.int("max_steps") {
        params = params.with_max_steps(m);
    }
    Ok(params)
}

fn single_t0(cfg: &Config) -> Result<f64> {
    cfg.single_float("t0")?
        .ok_or_else(|| config_err("missing required key `t0`"))
}

fn write_audit(cfg: &Config, params: &CylinderParams) -> Result<()> {
    if let Some(path) = cfg.text("audit") {
        let (_, log) =
            cylinder::run_cylinder_walk_audited(params, CylinderSeeds::derive(seed(cfg), 0))?;
        let mut w = create(path)?;
        cylinder::write_audit_log(&log, &mut w).map_err(io(path))?;
        w.flush().map_err(io(path))?;
    }
    Ok(())
}

fn cylinder_bottom(cfg: &Config) -> Result<Report> {
    let t0s = cfg.require_floats("t0")?;
    let mut r = Report::default();
    let mut points = Vec::new();
    for &t0 in &t0s {
        let params = cylinder_params(cfg, t0)?;
        let est = cylinder::estimate_bottom_exit(&params, episodes(cfg), seed(cfg))?;
        let name = if t0s.len() == 1 {
            "prob_bottom".to_string()
        } else {
            format!("prob_bottom[t0={t0}]")
        };
        r.estimate(&name, &est);
        points.push((t0, est));
    }
    let first = cylinder_params(cfg, t0s[0])?;
    write_audit(cfg, &first)?;
    if points.len() >= 2 {
        let fit = cylinder::fit_bottom_exit_constant(&first, &points)?;
        r.line(format!(
            "c_np_hat={} std_error={}",
            fit.slope, fit.slope_std_error
        ));
        let mut m = Metric::simulated("c_np_hat", fit.slope, fit.slope_std_error, 0, 0);
        m.episodes = None;
        m.truncated = None;
        r.metrics.push(m);
        r.derived("r_squared", fit.r_squared);
    }
    Ok(r)
}

fn cylinder_clock(cfg: &Config) -> Result<Report> {
    let params = cylinder_params(cfg, single_t0(cfg)?)?;
    let a = cfg.require_float("a")?;
    let w = cylinder::estimate_clock_window(&params, a, episodes(cfg), seed(cfg))?;
    write_audit(cfg, &params)?;
    let mut r = Report::default();
    r.estimate("window_prob", &w.estimate);
    r.analytic("window_lower", w.analytic_lower);
    let e = &w.estimate;
    r.simulated(
        "window_deficit",
        w.analytic_lower - e.prob,
        e.std_error,
        e.episodes,
        e.truncated,
    );
    Ok(r)
}

fn cylinder_eventb(cfg: &Config) -> Result<Report> {
    let params = cylinder_params(cfg, single_t0(cfg)?)?;
    let b = cylinder::estimate_event_b(&params, episodes(cfg), seed(cfg))?;
    write_audit(cfg, &params)?;
    let mut r = Report::default();
    r.estimate("prob_b", &b.estimate);
    r.derived("short_run", b.short_run);
    r.derived("not_b_ceiling", b.ceiling);
    Ok(r)
}

/// Starting heights used to measure the bottom-exit constant, as fractions
/// of the cylinder radius.
pub const BOTTOM_FIT_HEIGHTS: [f64; 4] = [0.02, 0.04, 0.08, 0.16];

fn cylinder_bad_event(cfg: &Config) -> Result<Report> {
    let domain = cfg.require_domain("domain")?;
    let n = dim(cfg, Some(&domain))?;
    let p = cfg.require_float("p")?;
    let eps = cfg.require_float("eps")?;
    let y = cfg.require_point("y", n)?;
    let delta = cfg.require_float("delta")?;
    let lambda = cfg.float("lambda").unwrap_or(DEFAULT_LAMBDA);
    let r_cyl = delta / 3.0;
    let (episodes, seed) = (episodes(cfg), seed(cfg));
    let mut r = Report::default();

    let c_np = match cfg.float("c_np") {
        Some(c) => c,
        None => {
            let mut points = Vec::new();
            let base = CylinderParams::new(n, p, r_cyl, eps, 0.5 * r_cyl)?;
            for f in BOTTOM_FIT_HEIGHTS {
                let params = base.with_t0(f * r_cyl)?;
                points.push((
                    f * r_cyl,
                    cylinder::estimate_bottom_exit(&params, episodes, seed)?,
                ));
            }
            let fit = cylinder::fit_bottom_exit_constant(&base, &points)?;
            r.derived("c_np_hat", fit.slope);
            fit.slope
        }
    };
    let c_density = match cfg.float("c_density") {
        Some(c) => c,
        None => {
            let md = estimate_measure_density(
                &domain,
                &y,
                &default_radii(delta),
                DEFAULT_SAMPLES,
                seed,
            )?;
            r.derived("c_density_hat", md.c_hat);
            md.c_hat
        }
    };
    let constants =
        bounds::compute_regularity_constants(n, p, c_density, c_np, cfg.float("cstar"))?;
    let t0 = match cfg.single_float("t0")? {
        Some(t) => t,
        None => delta * lambda / (3.0 * c_np),
    };
    let mut params = CylinderParams::new(n, p, r_cyl, eps, t0)?;
    if let Some(m) = cfg.int("max_steps") {
        params = params.with_max_steps(m);
    }
    let res = cylinder::bad_event_experiment(
        &params, &domain, &y, delta, lambda, &constants, episodes, seed,
    )?;
    r.simulated(
        "prob_bad",
        res.prob_bad,
        res.std_error,
        res.episodes,
        res.truncated,
    );
    r.analytic("theta_reference", res.theta_reference);
    Ok(r)
}

fn density_exact(cfg: &Config) -> Result<Report> {
    let k = u32_key(cfg, "k")?;
    let v = density::density1d_exact(k, cfg.require_float("eps")?, cfg.float("x").unwrap_or(0.0))?;
    let mut r = Report::default();
    r.metrics.push(Metric::analytic("value", v));
    r.line(v.to_string());
    Ok(r)
}

fn density_inversion(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let k = u32_key(cfg, "k")?;
    let tol = cfg.float("tol").unwrap_or(density::DEFAULT_INVERSION_TOL);
    let res = density::density_inversion(
        n,
        cfg.require_float("eps")?,
        k,
        cfg.float("radius").unwrap_or(0.0),
        tol,
    )?;
    let mut r = Report::default();
    r.analytic("value", res.value);
    r.analytic("error_bound", res.error_bound);
    r.analytic("cutoff", res.cutoff);
    Ok(r)
}

fn density_mc(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let k = u32_key(cfg, "k")?;
    let samples = cfg.int("samples").unwrap_or(1_000_000);
    let bins = cfg.int("bins").unwrap_or(50) as usize;
    let prof =
        density::mc_radial_profile(n, cfg.require_float("eps")?, k, samples, bins, seed(cfg))?;
    let mut r = Report::default();
    match cfg.text("profile") {
        Some(path) => {
            let mut w = create(path)?;
            prof.write_csv(&mut w).map_err(io(path))?;
            w.flush().map_err(io(path))?;
        }
        None => {
            let mut buf = Vec::new();
            prof.write_csv(&mut buf).expect("write to memory");
            r.lines.extend(
                String::from_utf8(buf)
                    .expect("ascii")
                    .lines()
                    .map(String::from),
            );
        }
    }
    r.derived("mass_check", prof.mass_check);
    r.derived("worst_increase_sigmas", prof.worst_increase());
    Ok(r)
}

fn density_bounds(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let k = u32_key(cfg, "k")?;
    let eps = cfg.require_float("eps")?;
    let c = density::density_constants(n)?;
    let mut r = Report::default();
    let origin = density::density_origin_inversion(n, eps, k, density::DEFAULT_INVERSION_TOL)?;
    r.analytic("origin_value", origin.value);
    r.analytic("upper_bound", c.upper_bound_at_origin(eps, k));
    if n == 1 {
        r.analytic("origin_bound_1d", density::density1d_origin_bound(k, eps)?);
    }
    let cstar = cfg.float("cstar").unwrap_or(0.5 * c.cstar_max);
    r.analytic("lower_bound", c.lower_bound(eps, k, cstar));
    if let Some(samples) = cfg.int("samples") {
        let chk = density::lower_bound_check(&c, eps, k, cstar, samples, seed(cfg))?;
        r.simulated("mc_value", chk.mc_value, chk.std_error, samples, 0);
        r.derived("lower_bound_pass", if chk.pass { 1.0 } else { 0.0 });
    }
    Ok(r)
}

fn density_constant_metrics(r: &mut Report, c: &DensityConstants) {
    r.analytic("c1_term", c.c1_term);
    r.analytic("c2_term", c.c2_term);
    r.analytic("c_n", c.c_n);
    r.analytic("c_one", c.c_one);
    r.analytic("k0", c.k0 as f64);
    r.analytic("cstar_max", c.cstar_max);
    r.analytic("omega_n", c.omega_n);
    r.analytic("first_zero", c.first_zero);
    r.analytic("rayleigh_sum", c.rayleigh_sum);
}

fn density_constants(cfg: &Config) -> Result<Report> {
    let c = density::density_constants(dim(cfg, None)?)?;
    let mut r = Report::default();
    density_constant_metrics(&mut r, &c);
    Ok(r)
}

fn bounds_hoeffding(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    let v = bounds::hoeffding_bound(
        cfg.require_int("N")?,
        cfg.require_float("b")?,
        dim(cfg, None)?,
        cfg.require_float("lambda")?,
    );
    r.analytic("bound", v);
    Ok(r)
}

fn bounds_tail(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    r.analytic("tail", bounds::gaussian_tail(cfg.require_float("l")?));
    Ok(r)
}

fn bounds_reflection(cfg: &Config) -> Result<Report> {
    let steps = u32_key(cfg, "N")?;
    let l = cfg.require_float("l")?;
    if l.fract() != 0.0 || l < 1.0 {
        return Err(config_err(
            "the reflection identity needs an integer level l >= 1",
        ));
    }
    let c = bounds::reflection_identity_check(steps, l as u32)?;
    let mut r = Report::default();
    r.line(format!("lhs={} rhs={} equal={}", c.lhs, c.rhs, c.equal));
    let ratio = |n: i64, d: i64| n as f64 / d as f64;
    r.metrics.push(Metric::analytic(
        "lhs",
        ratio(*c.lhs.numer(), *c.lhs.denom()),
    ));
    r.metrics.push(Metric::analytic(
        "rhs",
        ratio(*c.rhs.numer(), *c.rhs.denom()),
    ));
    r.metrics
        .push(Metric::analytic("equal", if c.equal { 1.0 } else { 0.0 }));
    Ok(r)
}

fn bounds_sin(cfg: &Config) -> Result<Report> {
    let mut r = Report::default();
    r.analytic(
        "max_violation",
        bounds::sin_inequality_check(cfg.require_float("m")?)?,
    );
    Ok(r)
}

fn bounds_constants(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let c = bounds::compute_regularity_constants(
        n,
        cfg.require_float("p")?,
        cfg.require_float("c_density")?,
        cfg.require_float("c_np")?,
        cfg.float("cstar"),
    )?;
    let mut r = Report::default();
    r.lines.extend(c.to_key_values().lines().map(String::from));
    for (name, v) in [
        ("nu_np", c.nu_np),
        ("ctilde_np", c.ctilde_np),
        ("theta_np", c.theta_np),
        ("theta", c.theta),
        ("cstar", c.cstar),
    ] {
        r.metrics.push(Metric::analytic(name, v));
    }
    Ok(r)
}

fn bounds_clock(cfg: &Config) -> Result<Report> {
    let n = dim(cfg, None)?;
    let b = bounds::lemma_a_clock_bounds(
        n,
        cfg.require_float("p")?,
        cfg.require_float("r")?,
        single_t0(cfg)?,
        cfg.require_float("eps")?,
        cfg.require_float("a")?,
        cfg.require_float("d")?,
    )?;
    let mut r = Report::default();
    r.analytic("hoeffding_series", b.hoeffding_series);
    r.analytic("vertical_term", b.vertical_term);
    r.analytic("lower_eps1", b.lower_eps1);
    r.analytic("upper_eps2", b.upper_eps2);
    r.line(format!("slack={}", ClockBounds::SLACK));
    Ok(r)
}

fn dpp_inputs(cfg: &Config) -> Result<(GameParams, Domain, Payoff, f64)> {
    let domain = cfg.require_domain("domain")?;
    let params = game_params(cfg, dim(cfg, Some(&domain))?)?;
    let payoff = build_payoff(cfg.require_text("payoff")?, &params, &domain)?;
    let h = cfg.float("h").unwrap_or(params.eps / 4.0);
    Ok((params, domain, payoff, h))
}

fn dpp_solve(cfg: &Config) -> Result<Report> {
    let (params, domain, payoff, h) = dpp_inputs(cfg)?;
    let max_iters = cfg
        .int("max_iters")
        .map_or(dpp::DEFAULT_MAX_ITERS, |m| m as usize);
    let field = dpp::solve_dpp(&params, &domain, &payoff, h, cfg.float("tol"), max_iters)?;
    let mut r = Report::default();
    r.analytic("iterations", field.iterations as f64);
    r.analytic("residual", field.residual);
    r.analytic("dpp_residual", field.dpp_residual());
    if let Some(x0) = cfg.point("x0", domain.dim())? {
        r.analytic("value_at_x0", field.interpolate(&x0)?);
    }
    if let Some(path) = cfg.text("field") {
        let mut w = create(path)?;
        field.write_csv(&mut w).map_err(io(path))?;
        w.flush().map_err(io(path))?;
    }
    Ok(r)
}

fn dpp_compare(cfg: &Config) -> Result<Report> {
    let (params, domain, payoff, h) = dpp_inputs(cfg)?;
    let x0 = cfg.require_point("x0", domain.dim())?;
    let c = dpp::compare_mc_vs_dpp(&params, &domain, &payoff, &x0, episodes(cfg), h, seed(cfg))?;
    let mut r = Report::default();
    r.simulated(
        "mc",
        c.mc.mean,
        c.mc.std_error,
        c.mc.episodes,
        c.mc.truncated,
    );
    r.analytic("dpp", c.dpp);
    r.simulated("gap", c.gap, c.mc.std_error, c.mc.episodes, c.mc.truncated);
    r.derived(
        "gap_allowance",
        3.0 * c.mc.std_error + 5.0 * (h + params.eps),
    );
    Ok(r)
}

/// Volume ratios `|complement ∩ B_r(y)| / |B_r(y)|` on a radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDensity {
    pub radii: Vec<f64>,
    pub ratios: Vec<Proportion>,
    /// Smallest ratio over the grid.
    pub c_hat: f64,
    /// Standard error of the smallest ratio.
    pub c_hat_std_error: f64,
    /// Set when some ratio is indistinguishable from zero, which means `y`
    /// is not a boundary point with positive density.
    pub warning: Option<String>,
}

/// Monte Carlo measure density of the complement at `y`. The same unit-ball
/// samples are scaled to every radius, so the ratios of a scale-invariant
/// complement (a half-space or a cone with vertex `y`) coincide exactly.
pub fn estimate_measure_density(
    domain: &Domain,
    y: &[f64],
    radii: &[f64],
    samples: u64,
    seed: u64,
) -> Result<MeasureDensity> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(config_err("radii must be positive and non-empty"));
    }
    if samples < 1 {
        return Err(config_err("samples must be at least 1"));
    }
    if y.len() != domain.dim() {
        return Err(config_err(
            "boundary point dimension does not match the domain",
        ));
    }
    let n = y.len();
    let counts = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "measure-density", i);
            let mut u = vec![0.0; n];
            sample_ball(&mut rng, 1.0, &mut u);
            radii
                .iter()
                .map(|&r| {
                    let x: Vec<f64> = y.iter().zip(&u).map(|(y, u)| y + r * u).collect();
                    u64::from(!domain.contains(&x))
                })
                .collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0; radii.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    let ratios: Vec<Proportion> = counts
        .iter()
        .map(|&c| Proportion::new(c, samples))
        .collect();
    let pmin = *ratios
        .iter()
        .min_by(|a, b| a.value().total_cmp(&b.value()))
        .expect("non-empty");
    let warning = ratios.iter().zip(radii).find(|(p, _)| p.value() - 3.0 * p.std_error() <= 0.0).map(|(_, r)| {
        format!("complement density at radius {r} is indistinguishable from zero; y may not be a boundary point")
    });
    Ok(MeasureDensity {
        radii: radii.to_vec(),
        c_hat: pmin.value(),
        c_hat_std_error: pmin.std_error(),
        ratios,
        warning,
    })
}

fn default_radii(delta: f64) -> Vec<f64> {
    vec![delta / 8.0, delta / 4.0, delta / 2.0, delta]
}

/// One configured run of the regularity experiment.
#[derive(Debug, Clone)]
pub struct RegularitySetup {
    pub params: GameParams,
    pub domain: Domain,
    pub y: Vec<f64>,
    /// Unit direction from `y` to the starting point.
    pub direction: Vec<f64>,
    pub delta: f64,
    pub delta0: f64,
    pub adversary: String,
    pub fraction: f64,
    pub episodes: u64,
    pub seed: u64,
    pub max_steps: Option<u64>,
}

impl RegularitySetup {
    pub fn x0(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.direction)
            .map(|(y, d)| y + self.delta0 * d)
            .collect()
    }
}

/// Event frequencies of the cancellation strategy against one adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityOutcome {
    pub adversary: String,
    pub delta0: f64,
    /// Every position up to and including the exit stays in `B_delta(y)`.
    pub ends_in_ball: Proportion,
    /// The exit point lies in `B_delta(y)`.
    pub exit_near_y: Proportion,
    /// The toss surplus reaches `M` before the other two conditions and the
    /// game ends at that moment.
    pub event_x: Proportion,
    /// `event_x`, or the game ended before any of the three conditions
    /// fired. Both keep every position within `delta` of `y`.
    pub good: Proportion,
    /// How often each condition fired first: surplus, opponent ahead,
    /// noise escaped, none.
    pub first: [u64; 4],
    pub truncated: u64,
}

/// Plays the cancellation strategy for Player 1 against the configured
/// adversary from `y + delta0 * direction`.
pub fn run_regularity(setup: &RegularitySetup) -> Result<RegularityOutcome> {
    let RegularitySetup {
        params,
        domain,
        y,
        delta,
        delta0,
        ..
    } = setup;
    if !(*delta0 > 0.0 && delta0 <= delta) {
        return Err(config_err(format!(
            "need 0 < delta0 <= delta, got delta0 = {delta0}, delta = {delta}"
        )));
    }
    if setup.episodes < 1 {
        return Err(config_err("episodes must be at least 1"));
    }
    let x0 = setup.x0();
    if !domain.contains(&x0) {
        return Err(config_err(format!(
            "starting point {x0:?} is not inside the domain"
        )));
    }
    let ctx = RosterContext {
        domain: domain.clone(),
        boundary_point: y.clone(),
        fraction: setup.fraction,
    };
    let template = adversary(&setup.adversary, &ctx)?;
    let s1_template = CancellationStrategy::new(y.clone());
    let (yc, d) = (y.clone(), *delta);
    let payoff = Payoff::new(1.0, move |x| if dist(x, &yc) < d { 1.0 } else { 0.0 });
    let max_steps = setup
        .max_steps
        .unwrap_or_else(|| params.default_max_steps(domain));
    let stream = format!("regularity/{}", setup.adversary);
    let per_episode: Vec<Result<Option<(bool, bool, Option<Condition>, bool)>>> = (0..setup
        .episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(setup.seed, &stream, i);
            let mut s1 = s1_template.clone();
            let mut s2 = template.clone_box();
            match game::play_episode(
                params,
                domain,
                &x0,
                &mut s1,
                s2.as_mut(),
                &payoff,
                &mut rng,
                max_steps,
            ) {
                Ok(trace) => {
                    let inside = trace.positions().all(|p| dist(p, y) < *delta);
                    let near = trace.payoff() == Some(1.0);
                    let race = race_conditions(&trace, domain, y, params.eps, *delta);
                    Ok(Some((inside, near, race.first, race.event_x)))
                }
                Err(tugwar_core::Error::TruncatedGame(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let (mut inside, mut near, mut event_x, mut good, mut done, mut truncated) =
        (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    let mut first = [0u64; 4];
    for r in per_episode {
        match r? {
            Some((i, nr, f, x)) => {
                done += 1;
                inside += u64::from(i);
                near += u64::from(nr);
                event_x += u64::from(x);
                good += u64::from(x || f.is_none());
                let slot = match f {
                    Some(Condition::SurplusReached) => 0,
                    Some(Condition::OpponentAhead) => 1,
                    Some(Condition::NoiseEscaped) => 2,
                    None => 3,
                };
                first[slot] += 1;
            }
            None => truncated += 1,
        }
    }
    if done == 0 {
        return Err(tugwar_core::Error::Estimation(format!(
            "all {} episodes truncated",
            setup.episodes
        ))
        .into());
    }
    Ok(RegularityOutcome {
        adversary: setup.adversary.clone(),
        delta0: *delta0,
        ends_in_ball: Proportion::new(inside, done),
        exit_near_y: Proportion::new(near, done),
        event_x: Proportion::new(event_x, done),
        good: Proportion::new(good, done),
        first,
        truncated,
    })
}

/// Default direction from `y` to the starting points: towards the domain's
/// interior witness.
fn default_direction(domain: &Domain, y: &[f64]) -> Result<Vec<f64>> {
    let w = domain.interior_witness()?;
    unit(&sub(&w, y))
        .ok_or_else(|| config_err("y coincides with the interior witness; set `direction`"))
}

fn regularity(cfg: &Config) -> Result<Report> {
    let domain = cfg.require_domain("domain")?;
    let n = dim(cfg, Some(&domain))?;
    let params = game_params(cfg, n)?;
    let y = cfg.require_point("y", n)?;
    let delta = cfg.require_float("delta")?;
    let delta0s = cfg.require_floats("delta0")?;
    let direction = match cfg.point("direction", n)? {
        Some(d) => unit(&d).ok_or_else(|| config_err("direction must be non-zero"))?,
        None => default_direction(&domain, &y)?,
    };
    let adversaries: Vec<String> = match cfg.text("adversaries") {
        Some(list) => list.split(',').map(String::from).collect(),
        None => ROSTER_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let (episodes, seed) = (episodes(cfg), seed(cfg));
    let mut r = Report::default();

    let radii = cfg.floats("radii").unwrap_or_else(|| default_radii(delta));
    let samples = cfg.int("samples").unwrap_or(DEFAULT_SAMPLES);
    let md = estimate_measure_density(&domain, &y, &radii, samples, seed)?;
    for (rad, p) in md.radii.iter().zip(&md.ratios) {
        r.simulated(
            &format!("density_ratio[r={rad}]"),
            p.value(),
            p.std_error(),
            samples,
            0,
        );
    }
    r.simulated("c_hat", md.c_hat, md.c_hat_std_error, samples, 0);
    if let Some(w) = &md.warning {
        r.line(format!("warning: {w}"));
    }

    for adv in &adversaries {
        for &delta0 in &delta0s {
            let setup = RegularitySetup {
                params,
                domain: domain.clone(),
                y: y.clone(),
                direction: direction.clone(),
                delta,
                delta0,
                adversary: adv.clone(),
                fraction: cfg.float("fraction").unwrap_or(DEFAULT_FRACTION),
                episodes,
                seed,
                max_steps: cfg.int("max_steps"),
            };
            let o = run_regularity(&setup)?;
            let tag = format!("[{adv},delta0={delta0}]");
            for (name, p) in [
                ("ends_in_ball", o.ends_in_ball),
                ("exit_near_y", o.exit_near_y),
                ("event_x", o.event_x),
                ("good_event", o.good),
            ] {
                r.simulated(
                    &format!("{name}{tag}"),
                    p.value(),
                    p.std_error(),
                    p.trials,
                    o.truncated,
                );
            }
            r.line(format!(
                "first{tag}: surplus={} opponent_ahead={} noise={} none={}",
                o.first[0], o.first[1], o.first[2], o.first[3]
            ));
        }
    }
    if let Some(c_np) = cfg.float("c_np") {
        let c = bounds::compute_regularity_constants(
            n,
            params.p,
            md.c_hat.min(1.0),
            c_np,
            cfg.float("cstar"),
        )?;
        r.analytic("theta_reference", c.theta);
    }
    Ok(r)
}

/// Verdict of a refinement ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub experiment: String,
    pub metric: String,
    pub direction: Direction,
    /// One point per ladder level, in ladder order.
    pub points: Vec<LadderPoint>,
    /// Weighted least-squares slope of the metric against `eps`.
    pub slope: f64,
    pub slope_std_error: f64,
    /// Trend holds between consecutive levels within 2 combined standard
    /// errors.
    pub holds: bool,
    pub report: Report,
}

/// Allowed wrong-way movement between ladder levels, in combined standard
/// errors.
pub const LADDER_Z: f64 = 2.0;

fn default_metric(experiment: &str) -> Option<&'static str> {
    Some(match experiment {
        "value" => "value",
        "cylinder-bottom" => "prob_bottom",
        "cylinder-clock" => "window_deficit",
        "cylinder-eventb" => "prob_b",
        "dpp-compare" => "gap",
        _ => return None,
    })
}

fn parse_trend(s: &str) -> Result<Direction> {
    match s {
        "nondecreasing" => Ok(Direction::NonDecreasing),
        "nonincreasing" => Ok(Direction::NonIncreasing),
        "stable" => Ok(Direction::Stable),
        other => Err(config_err(format!("unknown trend `{other}`"))),
    }
}

/// Weighted fit of `value = a + b eps`; returns `b` and its standard error.
/// Levels without a standard error get unit weight.
fn weighted_slope(points: &[LadderPoint]) -> (f64, f64) {
    let w: Vec<f64> = points
        .iter()
        .map(|p| {
            if p.std_error > 0.0 {
                1.0 / (p.std_error * p.std_error)
            } else {
                1.0
            }
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let xbar = points.iter().zip(&w).map(|(p, w)| w * p.eps).sum::<f64>() / sw;
    let ybar = points.iter().zip(&w).map(|(p, w)| w * p.value).sum::<f64>() / sw;
    let sxx: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.eps - xbar).powi(2))
        .sum();
    let sxy: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.eps - xbar) * (p.value - ybar))
        .sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Runs `experiment` once per step length of `eps_ladder` (same seed at
/// every level) and checks the configured trend of `metric`.
pub fn ladder(cfg: &Config) -> Result<TrendReport> {
    let experiment = cfg.require_text("experiment")?.to_string();
    if experiment == "ladder" || !EXPERIMENTS.contains(&experiment.as_str()) {
        return Err(config_err(format!(
            "`{experiment}` cannot be run on a ladder"
        )));
    }
    let metric = match cfg.text("metric") {
        Some(m) => m.to_string(),
        None => default_metric(&experiment)
            .ok_or_else(|| config_err(format!("set `metric` for a ladder over `{experiment}`")))?
            .to_string(),
    };
    let direction = parse_trend(cfg.text("trend").unwrap_or("nondecreasing"))?;
    let ladder = cfg.require_floats("eps_ladder")?;
    if ladder.len() < 3 {
        return Err(config_err("a ladder needs at least three levels"));
    }
    let mut report = Report::default();
    let mut points = Vec::new();
    for &eps in &ladder {
        let level = cfg.clone().with("eps", &eps.to_string())?;
        let out = run(&experiment, &level)?;
        let m = out
            .metric(&metric)
            .ok_or_else(|| config_err(format!("`{experiment}` produced no metric `{metric}`")))?
            .clone();
        points.push(LadderPoint {
            eps,
            value: m.value,
            std_error: m.std_error.unwrap_or(0.0),
        });
        let mut named = m;
        named.name = format!("{metric}[eps={eps}]");
        report.line(format!(
            "{}={} std_error={}",
            named.name,
            named.value,
            named.std_error.map_or("none".into(), |s| s.to_string())
        ));
        report.metrics.push(named);
    }
    let (slope, slope_se) = weighted_slope(&points);
    let holds = monotone_within_error(&points, direction, LADDER_Z);
    report.derived("trend_slope", slope);
    report.derived("trend_holds", if holds { 1.0 } else { 0.0 });
    Ok(TrendReport {
        experiment,
        metric,
        direction,
        points,
        slope,
        slope_std_error: slope_se,
        holds,
        report,
    })
}

/// Ladder entry point with an explicit verdict.
pub fn run_eps_ladder(cfg: &Config) -> Result<TrendReport> {
    ladder(cfg)
}
