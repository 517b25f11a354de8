//! Player strategies: baseline pulls, an adversary roster for Player 2 and
//! the cancellation strategy that drives Player 1 in the regularity
//! experiments.

use std::collections::VecDeque;

use crate::domain::Domain;
use crate::game::{CoinOutcome, GameParams, GameTrace, GameView, MoveEvent, Player};
use crate::point::{add, add_assign, dist, norm, sub, towards, unit};
use crate::{Error, Result};

/// A history-dependent strategy.
///
/// `target` must return a point strictly inside the `eps`-ball around the
/// current position. `observe` is called after every move of the game,
/// whoever made it, so strategies can keep replayable internal state.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Called once at the start of every episode.
    fn reset(&mut self, _me: Player, _params: &GameParams, _domain: &Domain, _x0: &[f64]) {}

    fn target(&mut self, me: Player, view: &GameView<'_>) -> Result<Vec<f64>>;

    fn observe(&mut self, _me: Player, _event: &MoveEvent<'_>) {}

    fn clone_box(&self) -> Box<dyn Strategy>;
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

fn won(me: Player, coin: CoinOutcome) -> bool {
    matches!(
        (me, coin),
        (Player::One, CoinOutcome::P1Win) | (Player::Two, CoinOutcome::P2Win)
    )
}

fn check_fraction(fraction: f64) -> Result<f64> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(fraction)
    } else {
        Err(Error::param(format!(
            "pull fraction must lie in (0, 1), got {fraction}"
        )))
    }
}

/// Moves `fraction * eps` towards a fixed point without overshooting it.
#[derive(Debug, Clone)]
pub struct PullStrategy {
    name: String,
    goal: Vec<f64>,
    fraction: f64,
}

impl PullStrategy {
    pub fn new(goal: Vec<f64>, fraction: f64) -> Result<Self> {
        Ok(PullStrategy {
            name: "pull".into(),
            goal,
            fraction: check_fraction(fraction)?,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }
}

impl Strategy for PullStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let x = view.current();
        let step = (self.fraction * view.params.eps).min(dist(x, &self.goal));
        Ok(towards(x, &self.goal, step))
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Always returns the current position.
#[derive(Debug, Clone, Default)]
pub struct Idle;

impl Strategy for Idle {
    fn name(&self) -> &str {
        "idle"
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        Ok(view.current().to_vec())
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Moves radially away from the boundary point, so every one of its moves
/// strictly increases the distance to it.
#[derive(Debug, Clone)]
pub struct PushAway {
    from: Vec<f64>,
    fallback: Vec<f64>,
    fraction: f64,
}

impl Strategy for PushAway {
    fn name(&self) -> &str {
        "push-away"
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let x = view.current();
        let step = self.fraction * view.params.eps;
        let dir = unit(&sub(x, &self.from))
            .or_else(|| unit(&sub(&self.fallback, x)))
            .unwrap_or_else(|| {
                let mut e = vec![0.0; x.len()];
                e[0] = 1.0;
                e
            });
        Ok(x.iter().zip(&dir).map(|(a, d)| a + step * d).collect())
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Pulls towards the bounding-box corner farthest from the boundary point.
#[derive(Debug, Clone)]
pub struct PullFarthest {
    pull: PullStrategy,
}

impl Strategy for PullFarthest {
    fn name(&self) -> &str {
        "pull-farthest"
    }

    fn target(&mut self, me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        self.pull.target(me, view)
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Repeats the opponent's last move, scaled by `fraction`.
#[derive(Debug, Clone)]
pub struct Mirror {
    fraction: f64,
    last: Option<Vec<f64>>,
}

impl Strategy for Mirror {
    fn name(&self) -> &str {
        "mirror"
    }

    fn reset(&mut self, _me: Player, _params: &GameParams, _domain: &Domain, _x0: &[f64]) {
        self.last = None;
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let x = view.current();
        Ok(match &self.last {
            Some(v) => x
                .iter()
                .zip(v)
                .map(|(a, b)| a + self.fraction * b)
                .collect(),
            None => x.to_vec(),
        })
    }

    fn observe(&mut self, me: Player, event: &MoveEvent<'_>) {
        let theirs = match me {
            Player::One => CoinOutcome::P2Win,
            Player::Two => CoinOutcome::P1Win,
        };
        if event.coin == theirs {
            self.last = Some(sub(event.to, event.from));
        }
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Pulls back towards the starting point of the episode.
#[derive(Debug, Clone)]
pub struct StayNearStart {
    fraction: f64,
    start: Vec<f64>,
}

impl Strategy for StayNearStart {
    fn name(&self) -> &str {
        "stay-near-start"
    }

    fn reset(&mut self, _me: Player, _params: &GameParams, _domain: &Domain, x0: &[f64]) {
        self.start = x0.to_vec();
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let x = view.current();
        let step = (self.fraction * view.params.eps).min(dist(x, &self.start));
        Ok(towards(x, &self.start, step))
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// What the roster adversaries are configured against.
#[derive(Debug, Clone)]
pub struct RosterContext {
    pub domain: Domain,
    pub boundary_point: Vec<f64>,
    /// Step length as a fraction of `eps`, in `(0, 1)`.
    pub fraction: f64,
}

pub const ROSTER_NAMES: [&str; 4] = ["push-away", "pull-farthest", "mirror", "stay-near-start"];

/// The fixed Player 2 roster. No worst-case coverage is claimed.
pub fn adversary_roster(ctx: &RosterContext) -> Result<Vec<Box<dyn Strategy>>> {
    ROSTER_NAMES
        .iter()
        .map(|name| adversary(name, ctx))
        .collect()
}

pub fn adversary(name: &str, ctx: &RosterContext) -> Result<Box<dyn Strategy>> {
    let fraction = check_fraction(ctx.fraction)?;
    if ctx.boundary_point.len() != ctx.domain.dim() {
        return Err(Error::param(
            "boundary point dimension does not match the domain",
        ));
    }
    let s: Box<dyn Strategy> = match name {
        "push-away" => Box::new(PushAway {
            from: ctx.boundary_point.clone(),
            fallback: ctx.domain.interior_witness()?,
            fraction,
        }),
        "pull-farthest" => {
            let (lo, hi) = ctx.domain.bounding_box();
            let corner: Vec<f64> = ctx
                .boundary_point
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(y, (a, b))| {
                    if (y - a).abs() >= (b - y).abs() {
                        *a
                    } else {
                        *b
                    }
                })
                .collect();
            Box::new(PullFarthest {
                pull: PullStrategy::new(corner, fraction)?,
            })
        }
        "mirror" => Box::new(Mirror {
            fraction,
            last: None,
        }),
        "stay-near-start" => Box::new(StayNearStart {
            fraction,
            start: Vec::new(),
        }),
        other => return Err(Error::param(format!("unknown adversary `{other}`"))),
    };
    Ok(s)
}

/// Toss-surplus target `M = 2 ceil(|x0 - y| / eps)`.
pub fn toss_target(x0: &[f64], y: &[f64], eps: f64) -> i64 {
    2 * (dist(x0, y) / eps).ceil() as i64
}

/// Bookkeeping of the cancellation strategy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CancellationState {
    /// Opponent moves not cancelled yet, oldest first.
    pub uncancelled: VecDeque<Vec<f64>>,
    /// Own toss wins minus opponent toss wins.
    pub net_wins: i64,
    pub m: i64,
    pub x0: Vec<f64>,
    /// Running sum of the noise moves.
    pub random_sum: Vec<f64>,
    /// Number of drift moves made so far.
    pub drifts: i64,
    /// Set once the toss surplus has reached `m`.
    pub target_reached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plan {
    Cancel,
    Drift,
    Jump,
    Stay,
}

/// Player 1 cancels the opponent's earliest uncancelled move; with nothing
/// to cancel it drifts by `eps/2` towards the boundary point `y`. The toss
/// that brings the surplus to `M` moves the position to `y` plus the noise
/// accumulated so far. Afterwards it only cancels.
#[derive(Debug, Clone)]
pub struct CancellationStrategy {
    y: Vec<f64>,
    eps: f64,
    dir: Vec<f64>,
    state: CancellationState,
}

impl CancellationStrategy {
    pub fn new(boundary_point: Vec<f64>) -> Self {
        CancellationStrategy {
            y: boundary_point,
            eps: 0.0,
            dir: Vec::new(),
            state: CancellationState::default(),
        }
    }

    pub fn state(&self) -> &CancellationState {
        &self.state
    }

    pub fn boundary_point(&self) -> &[f64] {
        &self.y
    }

    /// Where the bookkeeping says the game position is:
    /// `x0 - drifts * (eps/2) * dir + sum(uncancelled) + random_sum` before
    /// the target is reached and `y + sum(uncancelled) + random_sum` after.
    pub fn expected_position(&self) -> Vec<f64> {
        let s = &self.state;
        let mut p = if s.target_reached {
            self.y.clone()
        } else {
            s.x0.iter()
                .zip(&self.dir)
                .map(|(x, d)| x - s.drifts as f64 * 0.5 * self.eps * d)
                .collect()
        };
        for v in &s.uncancelled {
            add_assign(&mut p, v);
        }
        add_assign(&mut p, &s.random_sum);
        p
    }

    fn plan(&self) -> Plan {
        let s = &self.state;
        if !s.uncancelled.is_empty() {
            Plan::Cancel
        } else if s.target_reached {
            Plan::Stay
        } else if s.net_wins < s.m - 1 {
            Plan::Drift
        } else {
            Plan::Jump
        }
    }
}

impl Strategy for CancellationStrategy {
    fn name(&self) -> &str {
        "cancellation"
    }

    fn reset(&mut self, _me: Player, params: &GameParams, _domain: &Domain, x0: &[f64]) {
        self.eps = params.eps;
        let m = toss_target(x0, &self.y, params.eps);
        // A start at y itself has nothing to drift towards: the target
        // counts as reached at time zero and only cancellation remains.
        self.dir = unit(&sub(x0, &self.y)).unwrap_or_else(|| vec![0.0; x0.len()]);
        self.state = CancellationState {
            uncancelled: VecDeque::new(),
            net_wins: 0,
            m,
            x0: x0.to_vec(),
            random_sum: vec![0.0; x0.len()],
            drifts: 0,
            target_reached: m == 0,
        };
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let x = view.current();
        let eps = view.params.eps;
        match self.plan() {
            Plan::Cancel => Ok(sub(x, &self.state.uncancelled[0])),
            Plan::Stay => Ok(x.to_vec()),
            Plan::Drift => Ok(x
                .iter()
                .zip(&self.dir)
                .map(|(a, d)| a - 0.5 * eps * d)
                .collect()),
            Plan::Jump => {
                let goal = add(&self.y, &self.state.random_sum);
                let jump = dist(&goal, x);
                if jump >= eps {
                    return Err(Error::Invariant(format!(
                        "cancellation final jump {jump} is not shorter than eps {eps}"
                    )));
                }
                Ok(goal)
            }
        }
    }

    fn observe(&mut self, me: Player, event: &MoveEvent<'_>) {
        let v = sub(event.to, event.from);
        match event.coin {
            CoinOutcome::RandomMove => add_assign(&mut self.state.random_sum, &v),
            c if won(me, c) => {
                match self.plan() {
                    Plan::Cancel => {
                        self.state.uncancelled.pop_front();
                    }
                    Plan::Drift => self.state.drifts += 1,
                    Plan::Jump => self.state.target_reached = true,
                    Plan::Stay => {}
                }
                self.state.net_wins += 1;
            }
            _ => {
                self.state.uncancelled.push_back(v);
                self.state.net_wins -= 1;
            }
        }
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Which of the three race conditions of the cancellation argument fired
/// first along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Player 1's toss surplus reached `M`.
    SurplusReached,
    /// Player 2 got ahead by the configured number of tosses.
    OpponentAhead,
    /// The accumulated noise reached length `delta / 3`.
    NoiseEscaped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceOutcome {
    pub first: Option<Condition>,
    /// Turn index at which `first` fired.
    pub index: Option<usize>,
    /// True when the surplus was reached first and the position was outside
    /// the domain at that moment, i.e. the game ended right there.
    pub event_x: bool,
}

/// `ceil(delta / (3 eps))`: the toss deficit that counts as Player 2 being
/// ahead. Rounding up only makes the monitored event stricter.
pub fn opponent_ahead_threshold(delta: f64, eps: f64) -> i64 {
    (delta / (3.0 * eps)).ceil() as i64
}

/// Replays a finished (or truncated) trace and reports the first of the
/// three conditions to fire.
pub fn race_conditions(
    trace: &GameTrace,
    domain: &Domain,
    y: &[f64],
    eps: f64,
    delta: f64,
) -> RaceOutcome {
    let m = toss_target(trace.position(0), y, eps);
    let ahead = opponent_ahead_threshold(delta, eps);
    let mut net = 0i64;
    let mut noise = vec![0.0; trace.dim()];
    let fired = |cond, j: usize| RaceOutcome {
        first: Some(cond),
        index: Some(j),
        event_x: cond == Condition::SurplusReached && !domain.contains(trace.position(j)),
    };
    if m == 0 {
        return fired(Condition::SurplusReached, 0);
    }
    for (i, &c) in trace.coins().iter().enumerate() {
        let j = i + 1;
        match c {
            CoinOutcome::P1Win => net += 1,
            CoinOutcome::P2Win => net -= 1,
            CoinOutcome::RandomMove => add_assign(&mut noise, &trace.move_vector(j)),
        }
        if net == m {
            return fired(Condition::SurplusReached, j);
        }
        if -net >= ahead {
            return fired(Condition::OpponentAhead, j);
        }
        if norm(&noise) >= delta / 3.0 {
            return fired(Condition::NoiseEscaped, j);
        }
    }
    RaceOutcome {
        first: None,
        index: None,
        event_x: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameParams, GameTrace};

    fn view_at<'a>(
        params: &'a GameParams,
        domain: &'a Domain,
        trace: &'a GameTrace,
    ) -> GameView<'a> {
        GameView {
            params,
            domain,
            history: trace,
        }
    }

    #[test]
    fn pull_does_not_overshoot() {
        let params = GameParams::new(2, 4.0, 0.1).unwrap();
        let domain = Domain::ball(vec![0.0, 0.0], 2.0).unwrap();
        let mut s = PullStrategy::new(vec![0.0, 0.0], 0.5).unwrap();
        let trace = GameTrace::start(&[0.01, 0.0]);
        let t = s
            .target(Player::One, &view_at(&params, &domain, &trace))
            .unwrap();
        assert!(norm(&t) < 1e-15);
        let trace = GameTrace::start(&[1.0, 0.0]);
        let t = s
            .target(Player::One, &view_at(&params, &domain, &trace))
            .unwrap();
        assert!((t[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn toss_target_examples() {
        assert_eq!(toss_target(&[0.7, 0.0], &[0.0, 0.0], 0.1), 14);
        assert_eq!(toss_target(&[0.0], &[0.0], 0.1), 0);
        assert_eq!(toss_target(&[0.05], &[0.0], 0.1), 2);
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(PullStrategy::new(vec![0.0], 1.0).is_err());
        assert!(PullStrategy::new(vec![0.0], 0.0).is_err());
    }
}
