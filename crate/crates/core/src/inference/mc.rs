//! Monte Carlo membership test for a single parameter value.

use std::time::{Duration, Instant};

use super::minmax::{cx_critical_stat, ncx_critical_stat, CxSettings, Termination};
use super::{column_choices, test_statistic, InferenceData, LatentSpace};
use crate::error::{Error, Result};
use crate::latent::LatentSample;
use crate::model::{StructuralModel, Theta};
use crate::rng::StreamSeeds;

/// Rank `ceil(S (1 - alpha))` of the order statistic used as critical value.
pub fn critical_rank(draws: usize, alpha: f64) -> usize {
    let raw = (draws as f64 * (1.0 - alpha) - 1e-9).ceil();
    (raw.max(1.0) as usize).min(draws)
}

/// Minimum number of draws with `T_n <= T^s` for acceptance.
///
/// `T_n` is at most the order statistic of rank `k = ceil(S (1 - alpha))`
/// exactly when at least `S - k + 1` simulated statistics are `>= T_n`.
pub fn required_exceedances(draws: usize, alpha: f64) -> usize {
    draws - critical_rank(draws, alpha) + 1
}

pub(crate) fn validate(draws: usize, alpha: f64) -> Result<()> {
    if draws == 0 {
        return Err(Error::InvalidParameter("number of Monte Carlo draws must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalMethod {
    /// Convexified statistic by cutting planes.
    Cx(CxSettings),
    /// Exhaustive maximum over admissible matrices, limited to `budget`
    /// selections per draw.
    Ncx { budget: u64 },
}

impl Default for CriticalMethod {
    fn default() -> Self {
        Self::Cx(CxSettings::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub draws: usize,
    pub alpha: f64,
    pub seeds: StreamSeeds,
    pub method: CriticalMethod,
    pub space: LatentSpace,
    /// Stop drawing once the decision can no longer change.
    pub stop_when_decided: bool,
    /// Wall-clock budget for one parameter value; undecided draws count as
    /// `tau_s = 0`.
    pub time_cap: Option<Duration>,
}

impl McSettings {
    pub fn new(draws: usize, alpha: f64, seeds: StreamSeeds) -> Self {
        Self {
            draws,
            alpha,
            seeds,
            method: CriticalMethod::default(),
            space: LatentSpace::Conditional,
            stop_when_decided: false,
            time_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestDecision {
    pub t_n: f64,
    /// `tau[s - 1] = 1{T_n <= T^s}`; draws never evaluated are false.
    pub tau: Vec<bool>,
    pub accept: bool,
    pub s_evaluated: usize,
    pub required: usize,
    /// Draws left undecided by the iteration limit or the time cap.
    pub undecided: usize,
    pub timed_out: bool,
}

impl TestDecision {
    pub fn exceedances(&self) -> usize {
        self.tau.iter().filter(|&&t| t).count()
    }

    pub fn tau_fraction(&self) -> f64 {
        self.exceedances() as f64 / self.tau.len() as f64
    }

    /// Decision at another level from the same draws; valid when every draw
    /// was evaluated.
    pub fn accept_at(&self, alpha: f64) -> bool {
        self.exceedances() >= required_exceedances(self.tau.len(), alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    pub tau: bool,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub undecided: bool,
}

/// Critical statistic of draw `s` compared with `t_n`.
pub fn critical_draw<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    rows: &LatentSample,
    theta: &Theta,
    seeds: &StreamSeeds,
    s: u64,
    space: LatentSpace,
    method: &CriticalMethod,
    t_n: f64,
) -> Result<DrawOutcome> {
    let prime = ctx.latent(seeds.latent(), s, theta, space)?;
    let choices = column_choices(ctx, &prime, rows, theta, space)?;
    match method {
        CriticalMethod::Ncx { budget } => {
            let value = ncx_critical_stat(&choices, *budget)?;
            Ok(DrawOutcome {
                tau: t_n <= value,
                lower: value,
                upper: value,
                iterations: 1,
                undecided: false,
            })
        }
        CriticalMethod::Cx(cx) => match cx_critical_stat(&choices, cx, Some(t_n)) {
            Ok(r) => Ok(DrawOutcome {
                tau: match r.termination {
                    Termination::AboveThreshold => true,
                    Termination::BelowThreshold => false,
                    Termination::Converged => t_n <= r.upper,
                },
                lower: r.lower,
                upper: r.upper,
                iterations: r.iterations,
                undecided: false,
            }),
            Err(Error::MaxIterations {
                lower,
                upper,
                iterations,
            }) => Ok(DrawOutcome {
                tau: false,
                lower,
                upper,
                iterations,
                undecided: true,
            }),
            Err(e) => Err(e),
        },
    }
}

/// Monte Carlo test of `theta`: accept iff `T_n(theta)` does not exceed the
/// order statistic of rank `ceil(S (1 - alpha))` among the simulated
/// critical statistics.
///
/// Stream 0 of `seeds.latent()` gives the latent sample of the statistic
/// (and the rows of every critical cost matrix); streams `1..=S` give the
/// independent samples that generate the admissible columns.
pub fn mc_membership_test<M: StructuralModel>(
    ctx: &InferenceData<'_, M>,
    theta: &Theta,
    settings: &McSettings,
) -> Result<TestDecision> {
    validate(settings.draws, settings.alpha)?;
    ctx.model.check_theta(theta)?;
    let started = Instant::now();
    let draws = settings.draws;
    let required = required_exceedances(draws, settings.alpha);
    let rows = ctx.latent(settings.seeds.latent(), 0, theta, settings.space)?;
    let t_n = test_statistic(ctx, &rows, theta, settings.space)?;

    let mut decision = TestDecision {
        t_n,
        tau: vec![false; draws],
        accept: false,
        s_evaluated: 0,
        required,
        undecided: 0,
        timed_out: false,
    };
    // Data that no latent value rationalizes cannot come from theta.
    if t_n.is_infinite() {
        return Ok(decision);
    }

    let mut hits = 0usize;
    for s in 1..=draws {
        if settings.stop_when_decided && (hits >= required || hits + (draws - s + 1) < required) {
            break;
        }
        if let Some(cap) = settings.time_cap {
            if started.elapsed() > cap {
                decision.timed_out = true;
                decision.undecided += draws - s + 1;
                break;
            }
        }
        let outcome = critical_draw(
            ctx,
            &rows,
            theta,
            &settings.seeds,
            s as u64,
            settings.space,
            &settings.method,
            t_n,
        )?;
        decision.s_evaluated = s;
        decision.tau[s - 1] = outcome.tau;
        if outcome.undecided {
            decision.undecided += 1;
        }
        hits += usize::from(outcome.tau);
    }
    decision.accept = hits >= required;
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_rank_matches_the_ceiling_rule() {
        assert_eq!(critical_rank(99, 0.10), 90);
        assert_eq!(critical_rank(99, 0.05), 95);
        assert_eq!(critical_rank(100, 0.05), 95);
        assert_eq!(critical_rank(19, 0.05), 19);
        assert_eq!(critical_rank(1, 0.5), 1);
        assert_eq!(critical_rank(10, 0.999), 1);
    }

    #[test]
    fn required_counts() {
        assert_eq!(required_exceedances(99, 0.10), 10);
        assert_eq!(required_exceedances(99, 0.05), 5);
        assert_eq!(required_exceedances(99, 0.01), 1);
        assert_eq!(required_exceedances(19, 0.05), 1);
    }

    #[test]
    fn settings_are_validated() {
        assert!(validate(0, 0.1).is_err());
        assert!(validate(10, 0.0).is_err());
        assert!(validate(10, 1.0).is_err());
        assert!(validate(10, 0.05).is_ok());
    }
}
