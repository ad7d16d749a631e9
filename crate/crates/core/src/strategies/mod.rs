//! Seller and spread-trader strategies driven by median paths or prediction
//! bands, with optional intra-trajectory updates of the trading plan.

mod grid;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bands::{
    inverse_mae_weights_path, kernel_weights_path, BandSide, EnsembleTails, PredictionBand,
    ReweightParams,
};
use crate::ensembles::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::metrics::{extended_f64, DownsideReference};
use crate::stats;

pub use grid::{grid_search, CalibrationCase, Grid, GridCell, GridResult, Objective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Seller,
    SpreadTrader,
}

impl Agent {
    pub fn label(self) -> &'static str {
        match self {
            Agent::Seller => "seller",
            Agent::SpreadTrader => "spread",
        }
    }

    pub fn downside_reference(self) -> DownsideReference {
        match self {
            Agent::Seller => DownsideReference::Mean,
            Agent::SpreadTrader => DownsideReference::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Median,
    Band,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandAttitude {
    None,
    RiskAverse,
    RiskSeeking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Static,
    DynamicKernel,
    DynamicMae,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    ThreeSigma,
    Iqr,
    Ipr595,
    Mae,
    /// Fixed threshold, used as is even for a single residual.
    Constant(f64),
}

impl ThresholdMethod {
    pub fn label(self) -> String {
        match self {
            ThresholdMethod::ThreeSigma => "3sigma".into(),
            ThresholdMethod::Iqr => "iqr".into(),
            ThresholdMethod::Ipr595 => "ipr_5_95".into(),
            ThresholdMethod::Mae => "mae".into(),
            ThresholdMethod::Constant(c) => format!("const_{c}"),
        }
    }
}

/// Trust threshold from the residuals of the initial forecast observed so
/// far. A single residual r gives |r| for every data-driven method.
pub fn threshold_eta(residuals: &[f64], method: ThresholdMethod) -> Result<f64> {
    if let ThresholdMethod::Constant(c) = method {
        return Ok(c);
    }
    match residuals {
        [] => Err(Error::Empty("residuals")),
        [r] => Ok(r.abs()),
        _ => Ok(match method {
            ThresholdMethod::ThreeSigma => 3.0 * stats::std_pop(residuals),
            ThresholdMethod::Iqr => {
                stats::quantile(residuals, 0.75) - stats::quantile(residuals, 0.25)
            }
            ThresholdMethod::Ipr595 => {
                stats::quantile(residuals, 0.95) - stats::quantile(residuals, 0.05)
            }
            ThresholdMethod::Mae => {
                residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64
            }
            ThresholdMethod::Constant(_) => unreachable!(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub agent: Agent,
    pub family: Family,
    #[serde(default = "default_attitude")]
    pub band_attitude: BandAttitude,
    pub dynamics: Dynamics,
    #[serde(default)]
    pub scp: Option<f64>,
    #[serde(default)]
    pub reweight: Option<ReweightParams>,
    pub threshold_method: ThresholdMethod,
}

fn default_attitude() -> BandAttitude {
    BandAttitude::None
}

/// Which extremes of which curves define a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Median,
    RiskSeeking,
    RiskAverse,
}

impl StrategySpec {
    pub fn median(agent: Agent, dynamics: Dynamics) -> Self {
        Self {
            agent,
            family: Family::Median,
            band_attitude: BandAttitude::None,
            dynamics,
            scp: None,
            reweight: (dynamics == Dynamics::DynamicKernel).then(ReweightParams::default),
            threshold_method: ThresholdMethod::Iqr,
        }
    }

    pub fn band(agent: Agent, attitude: BandAttitude, scp: f64, dynamics: Dynamics) -> Self {
        Self {
            family: Family::Band,
            band_attitude: attitude,
            scp: Some(scp),
            ..Self::median(agent, dynamics)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("{}: {m}", self.label())));
        match self.family {
            Family::Median => {
                if self.band_attitude != BandAttitude::None || self.scp.is_some() {
                    return bad("band fields set on a median strategy");
                }
            }
            Family::Band => {
                if self.band_attitude == BandAttitude::None {
                    return bad("band strategy needs a band_attitude");
                }
                match self.scp {
                    Some(s) if s > 0.0 && s < 1.0 => {}
                    _ => return bad("band strategy needs scp in (0, 1)"),
                }
            }
        }
        match (self.dynamics, &self.reweight) {
            (Dynamics::DynamicKernel, Some(r)) => r.validate()?,
            (Dynamics::DynamicKernel, None) => return bad("kernel dynamics need reweight"),
            (_, Some(_)) => return bad("reweight set without kernel dynamics"),
            _ => {}
        }
        if let ThresholdMethod::Constant(c) = self.threshold_method {
            if !(c >= 0.0) {
                return bad("constant threshold must be nonnegative");
            }
        }
        Ok(())
    }

    pub fn rule(&self) -> Rule {
        match (self.family, self.band_attitude) {
            (Family::Median, _) => Rule::Median,
            (Family::Band, BandAttitude::RiskAverse) => Rule::RiskAverse,
            (Family::Band, _) => Rule::RiskSeeking,
        }
    }

    pub fn label(&self) -> String {
        let family = match self.rule() {
            Rule::Median => "median",
            Rule::RiskSeeking => "band_seeking",
            Rule::RiskAverse => "band_averse",
        };
        let dynamics = match self.dynamics {
            Dynamics::Static => "static",
            Dynamics::DynamicKernel => "kernel",
            Dynamics::DynamicMae => "mae",
        };
        format!("{}_{family}_{dynamics}", self.agent.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Buy first, sell later.
    Long,
    /// Sell first, buy back later.
    Short,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
        }
    }
}

/// Steps are 1-based path positions. Sellers have no entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradePlan {
    pub entry: Option<usize>,
    pub exit: usize,
    pub direction: Option<Direction>,
}

impl TradePlan {
    /// (buy step, sell step) for a spread plan.
    pub fn buy_sell(&self) -> Option<(usize, usize)> {
        match (self.entry, self.direction) {
            (Some(e), Some(Direction::Long)) => Some((e, self.exit)),
            (Some(e), Some(Direction::Short)) => Some((self.exit, e)),
            _ => None,
        }
    }
}

impl fmt::Display for TradePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.entry, self.direction) {
            (Some(e), Some(Direction::Long)) => write!(f, "buy@{e}>sell@{}", self.exit),
            (Some(e), Some(Direction::Short)) => write!(f, "sell@{e}>buy@{}", self.exit),
            _ => write!(f, "sell@{}", self.exit),
        }
    }
}

/// Valuation curves over steps `offset + 1 ..= offset + len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    pub offset: usize,
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
}

impl Curves {
    pub fn median(offset: usize, median: Vec<f64>) -> Self {
        Self {
            offset,
            buy: median.clone(),
            sell: median,
        }
    }

    /// Sellers value sales on the upper band (risk seeking) or the lower band
    /// (risk averse). Spread traders buy on the lower and sell on the upper.
    pub fn bands(
        agent: Agent,
        rule: Rule,
        offset: usize,
        upper: Vec<f64>,
        lower: Vec<f64>,
    ) -> Self {
        match agent {
            Agent::Seller => {
                let sell = if rule == Rule::RiskAverse {
                    lower
                } else {
                    upper
                };
                Self {
                    offset,
                    buy: sell.clone(),
                    sell,
                }
            }
            Agent::SpreadTrader => Self {
                offset,
                buy: lower,
                sell: upper,
            },
        }
    }

    pub fn last_step(&self) -> usize {
        self.offset + self.sell.len()
    }
}

fn arg_first(
    values: &[f64],
    skip: Option<usize>,
    better: impl Fn(f64, f64) -> bool,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best.is_none_or(|b| better(v, values[b])) {
            best = Some(i);
        }
    }
    best
}

fn argmax(values: &[f64], skip: Option<usize>) -> Option<usize> {
    arg_first(values, skip, |a, b| a > b)
}

fn argmin(values: &[f64], skip: Option<usize>) -> Option<usize> {
    arg_first(values, skip, |a, b| a < b)
}

/// Apply the planning rule to the curves. `None` if a spread trader has
/// fewer than two steps left.
pub fn plan_on_curves(agent: Agent, rule: Rule, curves: &Curves) -> Option<TradePlan> {
    let off = curves.offset + 1;
    match agent {
        Agent::Seller => argmax(&curves.sell, None).map(|k| TradePlan {
            entry: None,
            exit: off + k,
            direction: None,
        }),
        Agent::SpreadTrader => {
            if curves.sell.len() < 2 {
                return None;
            }
            let averse = rule == Rule::RiskAverse;
            let pick_sell = |skip| {
                if averse {
                    argmin(&curves.sell, skip)
                } else {
                    argmax(&curves.sell, skip)
                }
            };
            let buy = if averse {
                argmax(&curves.buy, None)?
            } else {
                argmin(&curves.buy, None)?
            };
            let mut sell = pick_sell(None)?;
            if sell == buy {
                sell = pick_sell(Some(buy))?;
            }
            Some(if buy < sell {
                TradePlan {
                    entry: Some(off + buy),
                    exit: off + sell,
                    direction: Some(Direction::Long),
                }
            } else {
                TradePlan {
                    entry: Some(off + sell),
                    exit: off + buy,
                    direction: Some(Direction::Short),
                }
            })
        }
    }
}

pub fn plan_median(agent: Agent, median: &[f64]) -> Result<TradePlan> {
    plan_on_curves(agent, Rule::Median, &Curves::median(0, median.to_vec())).ok_or(
        Error::InvalidParameter("spread plans need at least two steps".into()),
    )
}

pub fn plan_band(
    agent: Agent,
    attitude: BandAttitude,
    upper: &PredictionBand,
    lower: &PredictionBand,
) -> Result<TradePlan> {
    if upper.values.len() != lower.values.len() || upper.from_step != lower.from_step {
        return Err(Error::ShapeMismatch("bands cover different steps".into()));
    }
    let rule = match attitude {
        BandAttitude::RiskAverse => Rule::RiskAverse,
        _ => Rule::RiskSeeking,
    };
    let curves = Curves::bands(
        agent,
        rule,
        upper.from_step,
        upper.values.clone(),
        lower.values.clone(),
    );
    plan_on_curves(agent, rule, &curves).ok_or(Error::InvalidParameter(
        "spread plans need at least two steps".into(),
    ))
}

fn value_at(curve: &[f64], offset: usize, realized: &[f64], step: usize) -> f64 {
    if step <= offset {
        realized[step - 1]
    } else {
        curve[step - offset - 1]
    }
}

/// Expected gain of a plan, with realized prices for steps already reached.
pub fn plan_gain(plan: &TradePlan, curves: &Curves, realized: &[f64]) -> f64 {
    let sell = |u| value_at(&curves.sell, curves.offset, realized, u);
    let buy = |u| value_at(&curves.buy, curves.offset, realized, u);
    match plan.buy_sell() {
        Some((b, s)) => sell(s) - buy(b),
        None => sell(plan.exit),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeSide {
    Buy,
    Sell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub step: usize,
    pub side: TradeSide,
    pub price: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Plan,
    Reschedule,
    Enter,
    Exit,
    CloseEarly,
    Postpone,
    ForcedLiquidation,
}

impl AuditAction {
    fn executes(self) -> bool {
        matches!(
            self,
            AuditAction::Enter
                | AuditAction::Exit
                | AuditAction::CloseEarly
                | AuditAction::ForcedLiquidation
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub tau: usize,
    pub action: AuditAction,
    /// Plan in force after the action.
    pub plan: TradePlan,
    /// Left and right side of the inequality that triggered the action
    /// (NaN when no test was involved).
    #[serde(with = "extended_f64")]
    pub lhs: f64,
    #[serde(with = "extended_f64")]
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeOutcome {
    pub agent: Agent,
    pub trades: Vec<Execution>,
    pub profit: f64,
    pub audit: Vec<AuditEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Position {
    Pending,
    Open { step: usize, price: f64 },
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyState {
    pub agent: Agent,
    pub rule: Rule,
    pub horizon: usize,
    pub plan: TradePlan,
    pub position: Position,
    pub trades: Vec<Execution>,
    pub audit: Vec<AuditEntry>,
}

impl StrategyState {
    pub fn new(agent: Agent, rule: Rule, horizon: usize, plan: TradePlan) -> Result<Self> {
        check_plan(agent, &plan, horizon)?;
        Ok(Self {
            agent,
            rule,
            horizon,
            plan,
            position: match agent {
                // a seller holds the energy from the start
                Agent::Seller => Position::Open {
                    step: 0,
                    price: 0.0,
                },
                Agent::SpreadTrader => Position::Pending,
            },
            trades: Vec::new(),
            audit: vec![AuditEntry {
                tau: 0,
                action: AuditAction::Plan,
                plan,
                lhs: f64::NAN,
                rhs: f64::NAN,
            }],
        })
    }

    fn log(&mut self, tau: usize, action: AuditAction, lhs: f64, rhs: f64) {
        self.audit.push(AuditEntry {
            tau,
            action,
            plan: self.plan,
            lhs,
            rhs,
        });
    }

    fn enter(&mut self, tau: usize, price: f64) {
        let side = match self.plan.direction {
            Some(Direction::Short) => TradeSide::Sell,
            _ => TradeSide::Buy,
        };
        self.trades.push(Execution {
            step: tau,
            side,
            price,
        });
        self.position = Position::Open { step: tau, price };
    }

    fn close(&mut self, tau: usize, price: f64) {
        let side = match self.plan.direction {
            Some(Direction::Long) | None => TradeSide::Sell,
            Some(Direction::Short) => TradeSide::Buy,
        };
        self.trades.push(Execution {
            step: tau,
            side,
            price,
        });
        self.position = Position::Closed;
    }

    /// Execute whatever the current plan schedules at `tau`.
    pub fn execute_scheduled(&mut self, tau: usize, price: f64) -> Result<()> {
        match self.position {
            Position::Pending if self.plan.entry == Some(tau) => {
                self.enter(tau, price);
                self.log(tau, AuditAction::Enter, f64::NAN, f64::NAN);
            }
            Position::Open { .. } if self.plan.exit == tau => {
                self.close(tau, price);
                self.log(tau, AuditAction::Exit, f64::NAN, f64::NAN);
            }
            Position::Open { .. } | Position::Pending if tau == self.horizon => {
                return Err(Error::InconsistentState(format!(
                    "position still open at the last step under plan {}",
                    self.plan
                )));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn outcome(&self) -> Result<TradeOutcome> {
        if self.position != Position::Closed {
            return Err(Error::InconsistentState(
                "outcome of an open position".into(),
            ));
        }
        Ok(TradeOutcome {
            agent: self.agent,
            trades: self.trades.clone(),
            profit: profit_of(&self.trades),
            audit: self.audit.clone(),
        })
    }
}

fn check_plan(agent: Agent, plan: &TradePlan, horizon: usize) -> Result<()> {
    let ok = (1..=horizon).contains(&plan.exit)
        && match agent {
            Agent::Seller => plan.entry.is_none(),
            Agent::SpreadTrader => {
                plan.direction.is_some() && plan.entry.is_some_and(|e| e >= 1 && e < plan.exit)
            }
        };
    if ok {
        Ok(())
    } else {
        Err(Error::InconsistentState(format!(
            "invalid {} plan {plan:?} for horizon {horizon}",
            agent.label()
        )))
    }
}

fn profit_of(trades: &[Execution]) -> f64 {
    trades
        .iter()
        .map(|t| match t.side {
            TradeSide::Sell => t.price,
            TradeSide::Buy => -t.price,
        })
        .sum()
}

/// One update at step `tau` given the realized prices up to `tau` and the
/// updated curves after `tau` (`None` at the last step).
pub fn dynamic_step(
    state: &mut StrategyState,
    tau: usize,
    realized: &[f64],
    curves: Option<&Curves>,
    eta: f64,
) -> Result<()> {
    if realized.len() != tau || tau == 0 || tau > state.horizon {
        return Err(Error::InconsistentState(format!(
            "step {tau} with {} realized prices",
            realized.len()
        )));
    }
    let price = realized[tau - 1];
    if let Some(c) = curves {
        if c.offset != tau || c.last_step() != state.horizon {
            return Err(Error::InconsistentState(
                "curves do not cover the future".into(),
            ));
        }
    }
    let future = curves.filter(|c| !c.sell.is_empty());
    match state.position {
        Position::Closed => Ok(()),
        Position::Pending => {
            let Some(entry) = state.plan.entry else {
                return Err(Error::InconsistentState(
                    "pending position without entry".into(),
                ));
            };
            if entry < tau || state.plan.exit <= entry {
                return Err(Error::InconsistentState(format!(
                    "plan {} at step {tau}",
                    state.plan
                )));
            }
            if let Some(c) = future {
                if let Some(candidate) = plan_on_curves(state.agent, state.rule, c) {
                    let lhs = plan_gain(&candidate, c, realized) - eta;
                    let rhs = plan_gain(&state.plan, c, realized);
                    if lhs > rhs && candidate != state.plan {
                        state.plan = candidate;
                        state.log(tau, AuditAction::Reschedule, lhs, rhs);
                        return Ok(());
                    }
                }
            }
            state.execute_scheduled(tau, price)
        }
        Position::Open { step, price: p0 } => {
            if state.plan.exit < tau {
                return Err(Error::InconsistentState(format!(
                    "exit {} before step {tau}",
                    state.plan.exit
                )));
            }
            if step == tau {
                return Ok(());
            }
            let sign = state.plan.direction.map_or(1.0, Direction::sign);
            // value of exiting at step u on the curve closing the position
            let exit_curve = |c: &Curves| match state.plan.direction {
                Some(Direction::Short) => c.buy.clone(),
                _ => c.sell.clone(),
            };
            let Some(c) = future else {
                if tau == state.plan.exit {
                    state.close(tau, price);
                    state.log(tau, AuditAction::Exit, f64::NAN, f64::NAN);
                } else {
                    state.close(tau, price);
                    state.log(tau, AuditAction::ForcedLiquidation, f64::NAN, f64::NAN);
                }
                return Ok(());
            };
            let curve = exit_curve(c);
            if tau < state.plan.exit {
                let planned = curve[state.plan.exit - tau - 1];
                let lhs = sign * (price - p0) - eta;
                let rhs = sign * (planned - p0);
                if lhs > rhs {
                    state.plan.exit = tau;
                    state.close(tau, price);
                    state.log(tau, AuditAction::CloseEarly, lhs, rhs);
                }
                Ok(())
            } else {
                let signed: Vec<f64> = curve.iter().map(|v| sign * v).collect();
                let best = argmax(&signed, None).expect("nonempty future");
                let lhs = sign * (curve[best] - p0) - eta;
                let rhs = sign * (price - p0);
                if lhs > rhs {
                    state.plan.exit = tau + 1 + best;
                    state.log(tau, AuditAction::Postpone, lhs, rhs);
                } else {
                    state.close(tau, price);
                    state.log(tau, AuditAction::Exit, lhs, rhs);
                }
                Ok(())
            }
        }
    }
}

/// Everything about a strategy run except the threshold: initial plan,
/// initial median and the updated curves after every step.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub agent: Agent,
    pub rule: Rule,
    pub horizon: usize,
    pub initial_plan: TradePlan,
    pub initial_median: Vec<f64>,
    /// Entry tau-1 holds the curves after step tau; `None` for static runs.
    pub updates: Option<Vec<Option<Curves>>>,
}

fn curves_from(
    tails: &EnsembleTails,
    agent: Agent,
    rule: Rule,
    scp: Option<f64>,
    weights: &[f64],
    from: usize,
) -> Result<Curves> {
    match (rule, scp) {
        (Rule::Median, _) => Ok(Curves::median(from, tails.median(weights, from)?)),
        (_, Some(scp)) => {
            let upper = tails.band(weights, scp, BandSide::Upper, from)?;
            let lower = tails.band(weights, scp, BandSide::Lower, from)?;
            Ok(Curves::bands(agent, rule, from, upper.values, lower.values))
        }
        (_, None) => Err(Error::InvalidParameter("band strategy without scp".into())),
    }
}

impl PreparedRun {
    pub fn new(spec: &StrategySpec, ensemble: &ScenarioEnsemble, realized: &[f64]) -> Result<Self> {
        spec.validate()?;
        let tails = EnsembleTails::new(ensemble)?;
        let h = tails.horizon();
        if realized.len() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                found: realized.len(),
            });
        }
        let rule = spec.rule();
        let initial_median = tails.median(&ensemble.weights, 0)?;
        let initial = curves_from(&tails, spec.agent, rule, spec.scp, &ensemble.weights, 0)?;
        let initial_plan = plan_on_curves(spec.agent, rule, &initial).ok_or(
            Error::InvalidParameter("spread strategies need a horizon of two or more".into()),
        )?;
        let weights = match spec.dynamics {
            Dynamics::Static => None,
            Dynamics::DynamicKernel => {
                let params = spec.reweight.expect("validated");
                Some(kernel_weights_path(
                    realized,
                    ensemble,
                    &initial_median,
                    &params,
                )?)
            }
            Dynamics::DynamicMae => Some(inverse_mae_weights_path(realized, ensemble)?),
        };
        let updates = weights
            .map(|ws| {
                ws.iter()
                    .enumerate()
                    .map(|(k, w)| {
                        let tau = k + 1;
                        if tau >= h {
                            Ok(None)
                        } else {
                            curves_from(&tails, spec.agent, rule, spec.scp, &w.weights, tau)
                                .map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(Self {
            agent: spec.agent,
            rule,
            horizon: h,
            initial_plan,
            initial_median,
            updates,
        })
    }

    pub fn run(&self, realized: &[f64], threshold: ThresholdMethod) -> Result<TradeOutcome> {
        let mut state = StrategyState::new(self.agent, self.rule, self.horizon, self.initial_plan)?;
        let residuals: Vec<f64> = realized
            .iter()
            .zip(&self.initial_median)
            .map(|(p, m)| p - m)
            .collect();
        for tau in 1..=self.horizon {
            match &self.updates {
                None => state.execute_scheduled(tau, realized[tau - 1])?,
                Some(updates) => {
                    if state.position == Position::Closed {
                        break;
                    }
                    let eta = threshold_eta(&residuals[..tau], threshold)?;
                    dynamic_step(
                        &mut state,
                        tau,
                        &realized[..tau],
                        updates[tau - 1].as_ref(),
                        eta,
                    )?;
                }
            }
        }
        state.outcome()
    }
}

/// Plan on the initial forecast and trade along the realized path.
pub fn simulate_strategy(
    spec: &StrategySpec,
    ensemble: &ScenarioEnsemble,
    realized: &[f64],
) -> Result<TradeOutcome> {
    PreparedRun::new(spec, ensemble, realized)?.run(realized, spec.threshold_method)
}

fn run_plan(agent: Agent, plan: TradePlan, realized: &[f64]) -> Result<TradeOutcome> {
    let mut state = StrategyState::new(agent, Rule::Median, realized.len(), plan)?;
    for (k, &p) in realized.iter().enumerate() {
        state.execute_scheduled(k + 1, p)?;
    }
    state.outcome()
}

/// Hindsight-optimal trade on the realized path.
pub fn crystal_ball(agent: Agent, realized: &[f64]) -> Result<TradeOutcome> {
    run_plan(agent, plan_median(agent, realized)?, realized)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveVariant {
    First,
    Last,
}

/// Seller: sell at the first or last step. Spread: sell first and buy at the
/// end (`First`) or the reverse (`Last`).
pub fn naive_endpoints(
    agent: Agent,
    variant: NaiveVariant,
    realized: &[f64],
) -> Result<TradeOutcome> {
    let h = realized.len();
    if h == 0 {
        return Err(Error::Empty("realized path"));
    }
    let plan = match (agent, variant) {
        (Agent::Seller, NaiveVariant::First) => TradePlan {
            entry: None,
            exit: 1,
            direction: None,
        },
        (Agent::Seller, NaiveVariant::Last) => TradePlan {
            entry: None,
            exit: h,
            direction: None,
        },
        (Agent::SpreadTrader, v) => TradePlan {
            entry: Some(1),
            exit: h,
            direction: Some(if v == NaiveVariant::First {
                Direction::Short
            } else {
                Direction::Long
            }),
        },
    };
    run_plan(agent, plan, realized)
}

/// Rebuild the executions recorded in an audit log against the realized path.
pub fn replay(agent: Agent, audit: &[AuditEntry], realized: &[f64]) -> Result<TradeOutcome> {
    let mut trades = Vec::new();
    let mut entered = false;
    for e in audit.iter().filter(|e| e.action.executes()) {
        let price = *realized.get(e.tau.wrapping_sub(1)).ok_or_else(|| {
            Error::InconsistentState(format!("audit step {} outside path", e.tau))
        })?;
        let opening = e.action == AuditAction::Enter;
        if opening == entered && agent == Agent::SpreadTrader {
            return Err(Error::InconsistentState(
                "entry and exit out of order".into(),
            ));
        }
        entered = opening;
        let side = match (e.plan.direction, opening) {
            (Some(Direction::Long), true) | (Some(Direction::Short), false) => TradeSide::Buy,
            _ => TradeSide::Sell,
        };
        trades.push(Execution {
            step: e.tau,
            side,
            price,
        });
    }
    Ok(TradeOutcome {
        agent,
        profit: profit_of(&trades),
        trades,
        audit: audit.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;
    use crate::features::Origin;
    use crate::market_data::DeliveryId;
    use chrono::NaiveDate;

    fn ens(paths: Vec<Vec<f64>>) -> ScenarioEnsemble {
        let n = paths.len();
        ScenarioEnsemble::uniform(
            Origin {
                delivery: DeliveryId::new(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 1).unwrap(),
                index: 57,
            },
            EnsembleKind::Historical,
            paths,
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    fn band(values: Vec<f64>, side: BandSide) -> PredictionBand {
        PredictionBand {
            side,
            scp: 0.5,
            from_step: 0,
            values,
            retained: vec![],
            flagged: false,
        }
    }

    #[test]
    fn median_plans() {
        let p = plan_median(Agent::Seller, &[1.0, 5.0, 3.0]).unwrap();
        assert_eq!(p.exit, 2);
        let p = plan_median(Agent::SpreadTrader, &[5.0, 1.0, 9.0]).unwrap();
        assert_eq!(
            (p.entry, p.exit, p.direction),
            (Some(2), 3, Some(Direction::Long))
        );
        let p = plan_median(Agent::SpreadTrader, &[9.0, 1.0, 5.0]).unwrap();
        assert_eq!(
            (p.entry, p.exit, p.direction),
            (Some(1), 2, Some(Direction::Short))
        );
        let p = plan_median(Agent::SpreadTrader, &[4.0; 5]).unwrap();
        assert_eq!((p.entry, p.exit), (Some(1), 2));
        assert!(plan_median(Agent::SpreadTrader, &[1.0]).is_err());
    }

    #[test]
    fn band_plans() {
        let up = band(vec![2.0, 7.0, 4.0], BandSide::Upper);
        let lo = band(vec![1.0, 3.0, 2.0], BandSide::Lower);
        let p = plan_band(Agent::Seller, BandAttitude::RiskSeeking, &up, &lo).unwrap();
        assert_eq!(p.exit, 2);
        let p = plan_band(Agent::Seller, BandAttitude::RiskAverse, &up, &lo).unwrap();
        assert_eq!(p.exit, 2);
        let up = band(vec![5.0, 4.0, 9.0], BandSide::Upper);
        let lo = band(vec![1.0, 0.0, 2.0], BandSide::Lower);
        let p = plan_band(Agent::SpreadTrader, BandAttitude::RiskSeeking, &up, &lo).unwrap();
        assert_eq!(p.buy_sell(), Some((2, 3)));
        let p = plan_band(Agent::SpreadTrader, BandAttitude::RiskAverse, &up, &lo).unwrap();
        // buy at max of lower (step 3), sell at min of upper (step 2)
        assert_eq!(p.buy_sell(), Some((3, 2)));
    }

    #[test]
    fn eta_examples() {
        for m in [
            ThresholdMethod::ThreeSigma,
            ThresholdMethod::Iqr,
            ThresholdMethod::Ipr595,
            ThresholdMethod::Mae,
        ] {
            assert_eq!(threshold_eta(&[-3.0], m).unwrap(), 3.0);
        }
        assert_eq!(
            threshold_eta(&[1.0, -1.0], ThresholdMethod::Mae).unwrap(),
            1.0
        );
        assert_eq!(
            threshold_eta(&[1.0, -1.0], ThresholdMethod::ThreeSigma).unwrap(),
            3.0
        );
        assert_eq!(
            threshold_eta(&[1.0, -1.0], ThresholdMethod::Iqr).unwrap(),
            1.0
        );
        assert_eq!(
            threshold_eta(&[-3.0], ThresholdMethod::Constant(f64::INFINITY)).unwrap(),
            f64::INFINITY
        );
    }

    fn open_long(exit: usize, horizon: usize, entry_price: f64) -> StrategyState {
        let plan = TradePlan {
            entry: Some(1),
            exit,
            direction: Some(Direction::Long),
        };
        let mut s = StrategyState::new(Agent::SpreadTrader, Rule::Median, horizon, plan).unwrap();
        s.execute_scheduled(1, entry_price).unwrap();
        s
    }

    #[test]
    fn early_close_arithmetic() {
        let mut s = open_long(4, 5, 10.0);
        let curves = Curves::median(2, vec![0.0, 12.0, 0.0]);
        dynamic_step(&mut s, 2, &[10.0, 20.0], Some(&curves), 1.0).unwrap();
        assert_eq!(s.position, Position::Closed);
        let o = s.outcome().unwrap();
        assert_eq!(o.profit, 10.0);
        assert_eq!(o.audit.last().unwrap().action, AuditAction::CloseEarly);
    }

    #[test]
    fn postpone_arithmetic() {
        let mut s = open_long(2, 5, 8.0);
        let curves = Curves::median(2, vec![11.0, 15.0, 9.0]);
        dynamic_step(&mut s, 2, &[8.0, 10.0], Some(&curves), 2.0).unwrap();
        assert_eq!(s.plan.exit, 4);
        assert!(matches!(s.position, Position::Open { .. }));
        let mut s = open_long(2, 5, 8.0);
        dynamic_step(&mut s, 2, &[8.0, 10.0], Some(&curves), 6.0).unwrap();
        assert_eq!(s.position, Position::Closed);
    }

    #[test]
    fn no_action_when_forecast_unchanged() {
        let paths = vec![
            vec![1.0, 3.0, 2.0, 5.0],
            vec![2.0, 2.0, 3.0, 6.0],
            vec![0.0, 1.0, 1.0, 4.0],
        ];
        let e = ens(paths);
        let median = crate::ensembles::empirical_median_path(&e).unwrap();
        let mut spec = StrategySpec::median(Agent::SpreadTrader, Dynamics::DynamicMae);
        spec.threshold_method = ThresholdMethod::Constant(0.5);
        let dynamic = simulate_strategy(&spec, &e, &median).unwrap();
        spec.dynamics = Dynamics::Static;
        let fixed = simulate_strategy(&spec, &e, &median).unwrap();
        assert_eq!(dynamic.trades, fixed.trades);
    }

    #[test]
    fn benchmarks() {
        let path = [3.0, 1.0, 4.0];
        assert_eq!(crystal_ball(Agent::Seller, &path).unwrap().profit, 4.0);
        assert_eq!(
            crystal_ball(Agent::SpreadTrader, &path).unwrap().profit,
            3.0
        );
        let first = naive_endpoints(Agent::SpreadTrader, NaiveVariant::First, &path).unwrap();
        let last = naive_endpoints(Agent::SpreadTrader, NaiveVariant::Last, &path).unwrap();
        assert_eq!(first.profit, -last.profit);
        assert_eq!(
            naive_endpoints(Agent::Seller, NaiveVariant::Last, &path)
                .unwrap()
                .profit,
            4.0
        );
    }

    #[test]
    fn spec_validation() {
        let mut s = StrategySpec::median(Agent::Seller, Dynamics::Static);
        assert!(s.validate().is_ok());
        s.scp = Some(0.5);
        assert!(s.validate().is_err());
        let mut b = StrategySpec::band(
            Agent::Seller,
            BandAttitude::RiskAverse,
            0.5,
            Dynamics::Static,
        );
        assert!(b.validate().is_ok());
        b.reweight = Some(ReweightParams::default());
        assert!(b.validate().is_err());
        let k = StrategySpec::median(Agent::Seller, Dynamics::DynamicKernel);
        assert!(k.validate().is_ok());
        assert_eq!(k.label(), "seller_median_kernel");
    }
}
