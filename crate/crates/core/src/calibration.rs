//! Fits (β, λ_d, λ_r) of the scalar SIRD model to a country's daily history.
//!
//! The loss is the sum over days of squared relative errors on active (the
//! infectious proxy), recovered and dead: `(model − data)² / (data + 1)²`.
//! Parameters are searched in log space with Nelder–Mead, which keeps them
//! positive. Birth and natural-death rates come from configuration.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epi_model::{
    integrate, CompartmentState, ModelError, ModelParams, ReinfectionSchedule, SirdSystem,
    TransmissionForm, DEFAULT_STEP,
};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::timeseries::DailySummary;

/// Minimum number of daily rows a fit needs.
pub const MIN_HISTORY_DAYS: usize = 14;
/// Loss returned when the model cannot be integrated at a candidate point.
pub const BLOWUP_PENALTY: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient history: {days} days, at least {MIN_HISTORY_DAYS} are required")]
    InsufficientHistory { days: usize },
    #[error("history contains no cases")]
    NoCases,
    #[error("history must be in strictly increasing date order")]
    UnorderedHistory,
    #[error("population {population} is smaller than the recorded cases {cases}")]
    InconsistentPopulation { population: f64, cases: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The three fitted rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedRates {
    pub beta: f64,
    pub lambda_r: f64,
    pub lambda_d: f64,
}

impl Default for FittedRates {
    fn default() -> Self {
        Self {
            beta: 0.3,
            lambda_r: 0.05,
            lambda_d: 0.01,
        }
    }
}

impl FittedRates {
    fn to_log(self) -> [f64; 3] {
        [self.beta.ln(), self.lambda_r.ln(), self.lambda_d.ln()]
    }

    fn from_log(x: &[f64]) -> Self {
        Self {
            beta: x[0].exp(),
            lambda_r: x[1].exp(),
            lambda_d: x[2].exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub initial_guess: FittedRates,
    pub max_iterations: usize,
    /// Simplex spread below which the search stops.
    pub tolerance: f64,
    /// Per-capita daily birth rate.
    pub mu: f64,
    /// Per-capita daily natural death rate.
    pub gamma: f64,
    pub step: f64,
    pub form: TransmissionForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            initial_guess: FittedRates::default(),
            max_iterations: 2000,
            tolerance: 1e-8,
            mu: 0.0,
            gamma: 0.0,
            step: DEFAULT_STEP,
            form: TransmissionForm::Normalized,
        }
    }
}

impl FitConfig {
    pub fn params(&self, rates: FittedRates) -> ModelParams {
        ModelParams {
            beta: rates.beta,
            lambda_r: rates.lambda_r,
            lambda_d: rates.lambda_d,
            mu: self.mu,
            gamma: self.gamma,
        }
    }
}

/// Model-minus-data per compartment, one entry per history day.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub dates: Vec<NaiveDate>,
    pub active: Vec<f64>,
    pub recovered: Vec<f64>,
    pub dead: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub country_code: String,
    pub params: ModelParams,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub population: f64,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub residuals: Residuals,
    /// Transmission form the rates were fitted under; projections reuse it.
    #[serde(default)]
    pub form: TransmissionForm,
    /// Best loss after each optimiser iteration.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

/// Day-0 compartments implied by a summary in a population of `population`.
pub fn initial_state(first: &DailySummary, population: f64) -> Result<CompartmentState, CalibrationError> {
    let (i, r, d) = (first.active().max(0.0), first.recovered, first.dead);
    let s = population - i - r - d;
    if s < 0.0 {
        return Err(CalibrationError::InconsistentPopulation {
            population,
            cases: i + r + d,
        });
    }
    Ok(CompartmentState::new(s, i, r, d))
}

fn check_history(history: &[DailySummary]) -> Result<(), CalibrationError> {
    if history.len() < MIN_HISTORY_DAYS {
        return Err(CalibrationError::InsufficientHistory {
            days: history.len(),
        });
    }
    if history.windows(2).any(|w| w[1].date <= w[0].date) {
        return Err(CalibrationError::UnorderedHistory);
    }
    if history.iter().all(|s| s.affected == 0.0) {
        return Err(CalibrationError::NoCases);
    }
    Ok(())
}

fn simulate(
    rates: FittedRates,
    history: &[DailySummary],
    initial: &CompartmentState,
    config: &FitConfig,
) -> Result<Residuals, ModelError> {
    let first = history[0].date;
    let horizon = (history[history.len() - 1].date - first).num_days() as u32;
    let system = SirdSystem::new(
        config.params(rates),
        ReinfectionSchedule::default(),
        initial.total(),
        config.form,
    )?;
    let tr = integrate(
        &system,
        &[initial.s, initial.i, initial.r, initial.d],
        first,
        horizon.max(1),
        config.step,
    )?;
    let mut res = Residuals::default();
    for row in history {
        let day = (row.date - first).num_days() as usize;
        let m = tr.totals(day);
        res.dates.push(row.date);
        res.active.push(m.i - row.active());
        res.recovered.push(m.r - row.recovered);
        res.dead.push(m.d - row.dead);
    }
    Ok(res)
}

fn loss_of(res: &Residuals, history: &[DailySummary]) -> f64 {
    let term = |resid: f64, data: f64| (resid / (data + 1.0)).powi(2);
    history
        .iter()
        .enumerate()
        .map(|(k, row)| {
            term(res.active[k], row.active().max(0.0))
                + term(res.recovered[k], row.recovered)
                + term(res.dead[k], row.dead)
        })
        .sum()
}

/// Loss of `rates` against `history`, integrating from `initial`.
pub fn objective(
    rates: FittedRates,
    history: &[DailySummary],
    initial: &CompartmentState,
    config: &FitConfig,
) -> Result<f64, CalibrationError> {
    check_history(history)?;
    Ok(match simulate(rates, history, initial, config) {
        Ok(res) => {
            let l = loss_of(&res, history);
            if l.is_finite() {
                l
            } else {
                BLOWUP_PENALTY
            }
        }
        Err(_) => BLOWUP_PENALTY,
    })
}

/// Fits the three rates. Non-convergence is reported through `converged`, not as an error.
pub fn fit(
    country_code: &str,
    history: &[DailySummary],
    population: f64,
    config: &FitConfig,
) -> Result<FitResult, CalibrationError> {
    check_history(history)?;
    let initial = initial_state(&history[0], population)?;
    // surfaces parameter/config errors before the search starts
    config.params(config.initial_guess).validate()?;
    objective(config.initial_guess, history, &initial, config)?;

    let opts = NelderMeadOptions {
        initial_step: 0.1,
        x_tol: config.tolerance,
        f_tol: config.tolerance,
        max_iterations: config.max_iterations,
        restarts: 3,
        // the loss is bounded below by zero, so a loss under tolerance is already optimal to within it
        f_target: config.tolerance,
    };
    let min = nelder_mead(
        |x| {
            objective(FittedRates::from_log(x), history, &initial, config)
                .unwrap_or(BLOWUP_PENALTY)
        },
        &config.initial_guess.to_log(),
        &opts,
    );
    let rates = FittedRates::from_log(&min.x);
    let residuals = simulate(rates, history, &initial, config)?;
    Ok(FitResult {
        country_code: country_code.to_string(),
        params: config.params(rates),
        loss: min.value,
        iterations: min.iterations,
        converged: min.converged,
        population,
        start_date: history[0].date,
        end_date: history[history.len() - 1].date,
        residuals,
        form: config.form,
        loss_trace: min.trace,
    })
}

/// Noise-free daily history generated by the scalar SIRD model.
///
/// Affected is I + R + D, so active equals the model's I exactly.
pub fn synthetic_history(
    country_code: &str,
    params: ModelParams,
    population: f64,
    initial_infected: f64,
    start: NaiveDate,
    days: u32,
    step: f64,
) -> Result<Vec<DailySummary>, ModelError> {
    let system = SirdSystem::new(
        params,
        ReinfectionSchedule::default(),
        population,
        TransmissionForm::Normalized,
    )?;
    let tr = integrate(
        &system,
        &[population - initial_infected, initial_infected, 0.0, 0.0],
        start,
        days.saturating_sub(1).max(1),
        step,
    )?;
    let rows: Vec<_> = (0..days as usize)
        .map(|d| {
            let c = tr.totals(d);
            (tr.date(d), c.i + c.r + c.d, c.d, c.r)
        })
        .collect();
    Ok(DailySummary::from_cumulative(country_code, &rows))
}
