//! The tug-of-war with noise as a state machine.
//!
//! At each turn a biased coin decides between a tug-of-war round
//! (probability `alpha`, then a fair coin picks the player who moves) and a
//! noise move uniform in the open `eps`-ball (probability `beta`). The game
//! stops the first time the position leaves the domain.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::domain::Domain;
use crate::point::{add, dist, sub};
use crate::rng::{sample_ball, stream_rng};
use crate::stats::Moments;
use crate::strategy::Strategy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => f.write_str("player 1"),
            Player::Two => f.write_str("player 2"),
        }
    }
}

/// Returns `(alpha, beta) = ((p - 2) / (p + n), (n + 2) / (p + n))`.
pub fn compute_probabilities(n: usize, p: f64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::param("dimension n must be at least 1"));
    }
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::param(format!(
            "exponent p must satisfy 2 < p < inf, got {p}"
        )));
    }
    let nf = n as f64;
    Ok(((p - 2.0) / (p + nf), (nf + 2.0) / (p + nf)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    diagnostic: bool,
}

impl GameParams {
    pub fn new(n: usize, p: f64, eps: f64) -> Result<Self> {
        let (alpha, beta) = compute_probabilities(n, p)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::param("step eps must be positive"));
        }
        Ok(GameParams {
            n,
            p,
            eps,
            alpha,
            beta,
            diagnostic: false,
        })
    }

    /// Diagnostic variant with `alpha` forced to any value in `[0, 1]` and
    /// `beta = 1 - alpha`. Used to isolate the noise or the tug-of-war part.
    pub fn with_alpha_override(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("forced alpha must lie in [0, 1]"));
        }
        self.alpha = alpha;
        self.beta = 1.0 - alpha;
        self.diagnostic = true;
        Ok(self)
    }

    pub fn is_diagnostic(&self) -> bool {
        self.diagnostic
    }

    /// `ceil(50 * (diam / eps)^2)`: diffusive scale of the noise component.
    pub fn default_max_steps(&self, domain: &Domain) -> u64 {
        (50.0 * (domain.diameter() / self.eps).powi(2)).ceil() as u64
    }
}

/// Coin outcome coded as in the game history: 0, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CoinOutcome {
    P1Win = 0,
    P2Win = 1,
    RandomMove = 2,
}

impl CoinOutcome {
    pub fn draw<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Self {
        let u: f64 = rng.random();
        if u < 0.5 * alpha {
            CoinOutcome::P1Win
        } else if u < alpha {
            CoinOutcome::P2Win
        } else {
            CoinOutcome::RandomMove
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }
}

/// Moves grouped by who made them; each entry is `(turn index, vector)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveDecomposition {
    pub player1: Vec<(usize, Vec<f64>)>,
    pub player2: Vec<(usize, Vec<f64>)>,
    pub random: Vec<(usize, Vec<f64>)>,
}

/// Game history `x_0, (c_1, x_1), ..., (c_k, x_k)`.
///
/// Positions are stored flat with stride `n`. `tau` and `payoff` are set
/// once the position has left the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    n: usize,
    positions: Vec<f64>,
    coins: Vec<CoinOutcome>,
    tau: Option<usize>,
    payoff: Option<f64>,
}

impl GameTrace {
    pub fn start(x0: &[f64]) -> Self {
        GameTrace {
            n: x0.len(),
            positions: x0.to_vec(),
            coins: Vec::new(),
            tau: None,
            payoff: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of turns played so far.
    pub fn steps(&self) -> usize {
        self.coins.len()
    }

    pub fn position(&self, j: usize) -> &[f64] {
        &self.positions[j * self.n..(j + 1) * self.n]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.n)
    }

    pub fn current(&self) -> &[f64] {
        self.position(self.steps())
    }

    pub fn coins(&self) -> &[CoinOutcome] {
        &self.coins
    }

    pub fn tau(&self) -> Option<usize> {
        self.tau
    }

    pub fn exit_point(&self) -> Option<&[f64]> {
        self.tau.map(|t| self.position(t))
    }

    pub fn payoff(&self) -> Option<f64> {
        self.payoff
    }

    /// The move made at turn `j >= 1`, `x_j - x_{j-1}`.
    pub fn move_vector(&self, j: usize) -> Vec<f64> {
        sub(self.position(j), self.position(j - 1))
    }

    fn push(&mut self, coin: CoinOutcome, next: &[f64]) {
        self.coins.push(coin);
        self.positions.extend_from_slice(next);
    }

    pub fn move_decomposition(&self) -> MoveDecomposition {
        let mut d = MoveDecomposition::default();
        for (i, &c) in self.coins.iter().enumerate() {
            let j = i + 1;
            let v = self.move_vector(j);
            match c {
                CoinOutcome::P1Win => d.player1.push((j, v)),
                CoinOutcome::P2Win => d.player2.push((j, v)),
                CoinOutcome::RandomMove => d.random.push((j, v)),
            }
        }
        d
    }

    /// Checks the trace invariants: positions before `tau` lie in the
    /// domain, the exit point does not, every move is shorter than `eps`
    /// and positions equal `x_0` plus the decomposed moves.
    pub fn check_invariants(&self, domain: &Domain, eps: f64) -> std::result::Result<(), String> {
        let tau = self.tau.ok_or("trace is not finished")?;
        if tau != self.steps() {
            return Err(format!("tau {tau} but {} turns recorded", self.steps()));
        }
        for j in 0..tau {
            if !domain.contains(self.position(j)) {
                return Err(format!("x_{j} left the domain before tau"));
            }
        }
        if domain.contains(self.position(tau)) {
            return Err("exit point is inside the domain".into());
        }
        let mut acc = self.position(0).to_vec();
        for j in 1..=tau {
            let v = self.move_vector(j);
            let len = crate::point::norm(&v);
            if len >= eps {
                return Err(format!("move {j} has length {len} >= {eps}"));
            }
            crate::point::add_assign(&mut acc, &v);
            let err = dist(&acc, self.position(j));
            if err > 1e-12 * j as f64 {
                return Err(format!("decomposition off by {err} at step {j}"));
            }
        }
        Ok(())
    }
}

/// A bounded payoff function on the complement of the domain.
#[derive(Clone)]
pub struct Payoff {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    bound: f64,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl Payoff {
    /// `bound` is the caller's promise `|F| <= bound`; every evaluation is
    /// checked against it.
    pub fn new(bound: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Payoff {
            f: Arc::new(f),
            bound,
        }
    }

    pub fn constant(c: f64) -> Self {
        Payoff::new(c.abs(), move |_| c)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x);
        if !(v.abs() <= self.bound) {
            return Err(Error::param(format!(
                "payoff {v} exceeds configured bound {}",
                self.bound
            )));
        }
        Ok(v)
    }
}

/// What a strategy may look at when choosing its move.
pub struct GameView<'a> {
    pub params: &'a GameParams,
    pub domain: &'a Domain,
    pub history: &'a GameTrace,
}

impl GameView<'_> {
    pub fn current(&self) -> &[f64] {
        self.history.current()
    }
}

/// A finished move as reported to both strategies.
#[derive(Debug, Clone, Copy)]
pub struct MoveEvent<'a> {
    pub coin: CoinOutcome,
    pub from: &'a [f64],
    pub to: &'a [f64],
}

fn checked_target(
    player: Player,
    strategy: &mut dyn Strategy,
    view: &GameView<'_>,
) -> Result<Vec<f64>> {
    let target = strategy.target(player, view)?;
    let current = view.current();
    let d = if target.len() == current.len() {
        dist(&target, current)
    } else {
        f64::NAN
    };
    if !(d < view.params.eps) {
        return Err(Error::StrategyViolation {
            player,
            strategy: strategy.name().to_string(),
            distance: d,
            eps: view.params.eps,
        });
    }
    Ok(target)
}

/// Resolves the move for an already drawn coin outcome.
pub fn resolve_move<R: Rng + ?Sized>(
    params: &GameParams,
    domain: &Domain,
    history: &GameTrace,
    coin: CoinOutcome,
    s1: &mut dyn Strategy,
    s2: &mut dyn Strategy,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let view = GameView {
        params,
        domain,
        history,
    };
    match coin {
        CoinOutcome::P1Win => checked_target(Player::One, s1, &view),
        CoinOutcome::P2Win => checked_target(Player::Two, s2, &view),
        CoinOutcome::RandomMove => {
            let mut v = vec![0.0; params.n];
            sample_ball(rng, params.eps, &mut v);
            Ok(add(history.current(), &v))
        }
    }
}

/// One transition of the game from the end of `history`.
pub fn step<R: Rng + ?Sized>(
    params: &GameParams,
    domain: &Domain,
    history: &GameTrace,
    s1: &mut dyn Strategy,
    s2: &mut dyn Strategy,
    rng: &mut R,
) -> Result<(Vec<f64>, CoinOutcome)> {
    if !domain.contains(history.current()) {
        return Err(Error::param("step called from a point outside the domain"));
    }
    let coin = CoinOutcome::draw(params.alpha, rng);
    let next = resolve_move(params, domain, history, coin, s1, s2, rng)?;
    Ok((next, coin))
}

/// Plays one game from `x0` until the position leaves the domain.
///
/// Both strategies are reset at the start and observe every move. Hitting
/// `max_steps` first returns [`Error::TruncatedGame`] with the partial trace.
pub fn play_episode<R: Rng + ?Sized>(
    params: &GameParams,
    domain: &Domain,
    x0: &[f64],
    s1: &mut dyn Strategy,
    s2: &mut dyn Strategy,
    payoff: &Payoff,
    rng: &mut R,
    max_steps: u64,
) -> Result<GameTrace> {
    if x0.len() != params.n || domain.dim() != params.n {
        return Err(Error::param(
            "dimension mismatch between params, domain and x0",
        ));
    }
    if !domain.contains(x0) {
        return Err(Error::param("starting point is not inside the domain"));
    }
    if max_steps < 1 {
        return Err(Error::param("max_steps must be at least 1"));
    }
    let mut trace = GameTrace::start(x0);
    s1.reset(Player::One, params, domain, x0);
    s2.reset(Player::Two, params, domain, x0);
    while (trace.steps() as u64) < max_steps {
        let (next, coin) = step(params, domain, &trace, s1, s2, rng)?;
        let from = trace.current().to_vec();
        let event = MoveEvent {
            coin,
            from: &from,
            to: &next,
        };
        s1.observe(Player::One, &event);
        s2.observe(Player::Two, &event);
        trace.push(coin, &next);
        if !domain.contains(&next) {
            trace.tau = Some(trace.steps());
            trace.payoff = Some(payoff.eval(&next)?);
            return Ok(trace);
        }
    }
    Err(Error::TruncatedGame(Box::new(trace)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: u64,
    pub truncated: u64,
}

/// Monte Carlo estimate of the expected payoff under `(s1, s2)`.
///
/// Episode `i` draws from the stream `(seed, "value", i)`; per-episode
/// results are reduced in index order so the output is bit-identical for a
/// given seed regardless of the thread count.
pub fn estimate_value(
    params: &GameParams,
    domain: &Domain,
    x0: &[f64],
    s1: &dyn Strategy,
    s2: &dyn Strategy,
    payoff: &Payoff,
    episodes: u64,
    seed: u64,
    max_steps: Option<u64>,
) -> Result<ValueEstimate> {
    if episodes < 1 {
        return Err(Error::param("episodes must be at least 1"));
    }
    let max_steps = max_steps.unwrap_or_else(|| params.default_max_steps(domain));
    let outcomes: Vec<Result<Option<f64>>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "value", i);
            let (mut a, mut b) = (s1.clone_box(), s2.clone_box());
            match play_episode(
                params,
                domain,
                x0,
                a.as_mut(),
                b.as_mut(),
                payoff,
                &mut rng,
                max_steps,
            ) {
                Ok(t) => Ok(t.payoff()),
                Err(Error::TruncatedGame(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut m = Moments::default();
    let mut truncated = 0;
    for o in outcomes {
        match o? {
            Some(v) => m.push(v),
            None => truncated += 1,
        }
    }
    if m.count == 0 {
        return Err(Error::Estimation(format!(
            "all {episodes} episodes truncated"
        )));
    }
    Ok(ValueEstimate {
        mean: m.mean(),
        std_error: m.std_error(),
        episodes: m.count,
        truncated,
    })
}
