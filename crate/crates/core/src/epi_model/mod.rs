//! Compartmental models: SIR, SIRD with vital dynamics and reinfection, and the
//! age-structured SIRD driven by location-split contact matrices.
//!
//! Transmission defaults to the normalised form β·(S/N)·I so that a fitted β
//! does not depend on population size. [`TransmissionForm::Literal`] selects
//! the unnormalised β·S·I form (and, for the age model, the variant that also
//! multiplies the force of infection by the class's own Iᵢ).

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod ode;

pub use ode::{rk4_step, ClampEvent, OdeSystem, Step};

/// Number of five-year age classes.
pub const AGE_CLASSES: usize = 16;
pub const AGE_BIN_WIDTH_YEARS: u32 = 5;
/// Integrator step in days.
pub const DEFAULT_STEP: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("total population must be positive, got {0}")]
    InvalidPopulation(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid age structure: {0}")]
    InvalidStructure(String),
    #[error("non-finite derivative at t = {t}")]
    NumericalBlowup { t: f64 },
    #[error("integration failed on day {day}: non-finite derivative at t = {t}")]
    BlowupOnDay { day: u32, t: f64 },
    #[error("step size {0} must be positive and divide one day evenly")]
    InvalidStep(f64),
    #[error("horizon must be at least one day")]
    InvalidHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionForm {
    #[default]
    Normalized,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub d: f64,
}

impl CompartmentState {
    pub fn new(s: f64, i: f64, r: f64, d: f64) -> Self {
        Self { s, i, r, d }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.r + self.d
    }

    fn to_array(self) -> [f64; 4] {
        [self.s, self.i, self.r, self.d]
    }
}

/// Time derivatives of one S/I/R/D quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub ds: f64,
    pub di: f64,
    pub dr: f64,
    pub dd: f64,
}

impl Rates {
    pub fn sum(&self) -> f64 {
        self.ds + self.di + self.dr + self.dd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    /// Transmission rate, per day.
    pub beta: f64,
    /// Recovery rate, per day.
    pub lambda_r: f64,
    /// Disease fatality rate, per day.
    pub lambda_d: f64,
    /// Per-capita daily birth rate.
    pub mu: f64,
    /// Per-capita daily natural death rate.
    pub gamma: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda_r", self.lambda_r),
            ("lambda_d", self.lambda_d),
            ("mu", self.mu),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidParams(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant reinfection rate ζ(t); `changes` are `(day, value)` breakpoints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReinfectionSchedule {
    pub initial: f64,
    #[serde(default)]
    pub changes: Vec<(f64, f64)>,
}

impl ReinfectionSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            changes: Vec::new(),
        }
    }

    pub fn piecewise(initial: f64, mut changes: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        changes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let s = Self { initial, changes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if std::iter::once(self.initial)
            .chain(self.changes.iter().map(|c| c.1))
            .any(|v| !v.is_finite() || v < 0.0)
        {
            return Err(ModelError::InvalidParams("reinfection rate must be >= 0".into()));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        self.changes
            .iter()
            .take_while(|(day, _)| *day <= t)
            .last()
            .map_or(self.initial, |c| c.1)
    }
}

/// Population per age class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeStructure {
    populations: Vec<f64>,
}

impl AgeStructure {
    /// Sixteen five-year classes.
    pub fn new(populations: Vec<f64>) -> Result<Self, ModelError> {
        if populations.len() != AGE_CLASSES {
            return Err(ModelError::InvalidStructure(format!(
                "expected {AGE_CLASSES} classes, got {}",
                populations.len()
            )));
        }
        if populations.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::InvalidStructure(
                "class populations must be finite and non-negative".into(),
            ));
        }
        Ok(Self { populations })
    }

    /// Splits `total` evenly across the sixteen classes.
    pub fn uniform(total: f64) -> Result<Self, ModelError> {
        Self::new(vec![total / AGE_CLASSES as f64; AGE_CLASSES])
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn classes(&self) -> usize {
        self.populations.len()
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    fn require_positive(&self) -> Result<(), ModelError> {
        match self.populations.iter().position(|p| *p <= 0.0) {
            Some(j) => Err(ModelError::InvalidStructure(format!(
                "class {j} has zero population"
            ))),
            None => Ok(()),
        }
    }
}

/// Square matrix of mean daily contacts, row class i with column class j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMatrix {
    size: usize,
    data: Vec<f64>,
}

impl ContactMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(ModelError::Shape(format!(
                "contact matrix must be square, got {size} rows of lengths {:?}",
                rows.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::Shape("contact entries must be >= 0".into()));
        }
        Ok(Self { size, data })
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::filled(size, 0.0);
        for i in 0..size {
            m.data[i * size + i] = 1.0;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMatrices {
    pub home: ContactMatrix,
    pub school: ContactMatrix,
    pub work: ContactMatrix,
    pub other: ContactMatrix,
}

impl ContactMatrices {
    pub fn new(
        home: ContactMatrix,
        school: ContactMatrix,
        work: ContactMatrix,
        other: ContactMatrix,
    ) -> Result<Self, ModelError> {
        let n = home.size();
        if [&school, &work, &other].iter().any(|m| m.size() != n) {
            return Err(ModelError::Shape(
                "home/school/work/other matrices differ in size".into(),
            ));
        }
        Ok(Self {
            home,
            school,
            work,
            other,
        })
    }

    pub fn size(&self) -> usize {
        self.home.size()
    }
}

/// Location multipliers (home, school, work, other), each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCoefficients {
    pub home: f64,
    pub school: f64,
    pub work: f64,
    pub other: f64,
}

impl MixingCoefficients {
    pub fn new(home: f64, school: f64, work: f64, other: f64) -> Result<Self, ModelError> {
        let m = Self {
            home,
            school,
            work,
            other,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.as_array().iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(ModelError::InvalidParams(format!(
                "mixing coefficients must lie in [0, 1], got {:?}",
                self.as_array()
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.home, self.school, self.work, self.other]
    }
}

/// Per-class compartments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeState {
    pub classes: Vec<CompartmentState>,
}

impl AgeState {
    pub fn totals(&self) -> CompartmentState {
        self.classes.iter().fold(CompartmentState::default(), |a, c| {
            CompartmentState::new(a.s + c.s, a.i + c.i, a.r + c.r, a.d + c.d)
        })
    }

    /// Flattened `[s0, i0, r0, d0, s1, ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.classes.iter().flat_map(|c| c.to_array()).collect()
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self {
            classes: values
                .chunks_exact(4)
                .map(|c| CompartmentState::new(c[0], c[1], c[2], c[3]))
                .collect(),
        }
    }
}

/// Basic SIR with a removal rate `k`.
pub fn sir_derivatives(
    state: &CompartmentState,
    beta: f64,
    k: f64,
    n: f64,
    form: TransmissionForm,
) -> Result<[f64; 3], ModelError> {
    if !(n > 0.0) {
        return Err(ModelError::InvalidPopulation(n));
    }
    let infection = transmission(beta, state.s, state.i, n, form);
    Ok([-infection, infection - k * state.i, k * state.i])
}

fn transmission(beta: f64, s: f64, i: f64, n: f64, form: TransmissionForm) -> f64 {
    match form {
        TransmissionForm::Normalized => beta * (s / n) * i,
        TransmissionForm::Literal => beta * s * i,
    }
}

/// Shared SIRD right-hand side given the per-susceptible infection flow.
fn sird_rates(c: [f64; 4], infection: f64, p: &ModelParams, zeta: f64, n: f64) -> Rates {
    let [s, i, r, d] = c;
    Rates {
        ds: -infection + p.mu * n - p.gamma * s + zeta * p.gamma * r,
        di: infection - (p.lambda_d + p.lambda_r) * i - p.gamma * i,
        dr: p.lambda_r * i - p.gamma * r,
        dd: p.lambda_d * i - p.gamma * d,
    }
}

/// SIRD with births μN, natural deaths Γ and reinfection inflow ζ(t)·Γ·R.
pub fn sird_derivatives(
    state: &CompartmentState,
    params: &ModelParams,
    zeta: f64,
    n: f64,
    form: TransmissionForm,
) -> Result<Rates, ModelError> {
    if !(n > 0.0) {
        return Err(ModelError::InvalidPopulation(n));
    }
    let infection = transmission(params.beta, state.s, state.i, n, form);
    Ok(sird_rates(state.to_array(), infection, params, zeta, n))
}

/// C = δ₁·Cᴴ + δ₂·Cˢ + δ₃·Cᵂ + δ₄·Cᴼ.
pub fn effective_contact_matrix(cm: &ContactMatrices, mix: &MixingCoefficients) -> ContactMatrix {
    let data = (0..cm.home.data.len())
        .map(|k| {
            mix.home * cm.home.data[k]
                + mix.school * cm.school.data[k]
                + mix.work * cm.work.data[k]
                + mix.other * cm.other.data[k]
        })
        .collect();
    ContactMatrix {
        size: cm.size(),
        data,
    }
}

/// λᵢ = β·Σⱼ Cᵢⱼ·Iⱼ/Nⱼ.
pub fn force_of_infection(
    c: &ContactMatrix,
    age: &AgeState,
    structure: &AgeStructure,
    beta: f64,
) -> Result<Vec<f64>, ModelError> {
    check_age_shapes(c, age.classes.len(), structure)?;
    structure.require_positive()?;
    let prevalence: Vec<f64> = age
        .classes
        .iter()
        .zip(structure.populations())
        .map(|(cl, n)| cl.i / n)
        .collect();
    Ok(foi_from_prevalence(c, &prevalence, beta))
}

fn foi_from_prevalence(c: &ContactMatrix, prevalence: &[f64], beta: f64) -> Vec<f64> {
    (0..c.size())
        .map(|i| beta * c.row(i).iter().zip(prevalence).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn check_age_shapes(
    c: &ContactMatrix,
    classes: usize,
    structure: &AgeStructure,
) -> Result<(), ModelError> {
    if c.size() != structure.classes() || classes != structure.classes() {
        return Err(ModelError::Shape(format!(
            "contact matrix {0}x{0}, state {classes} classes, structure {1} classes",
            c.size(),
            structure.classes()
        )));
    }
    Ok(())
}

/// Per-class SIRD derivatives with force of infection from the contact matrix.
pub fn age_sird_derivatives(
    age: &AgeState,
    params: &ModelParams,
    c: &ContactMatrix,
    zeta: f64,
    structure: &AgeStructure,
    form: TransmissionForm,
) -> Result<Vec<Rates>, ModelError> {
    let lambda = force_of_infection(c, age, structure, params.beta)?;
    Ok(age
        .classes
        .iter()
        .zip(structure.populations())
        .zip(lambda)
        .map(|((cl, &n_i), l)| {
            let infection = match form {
                TransmissionForm::Normalized => l * cl.s,
                TransmissionForm::Literal => l * cl.s * cl.i,
            };
            sird_rates(cl.to_array(), infection, params, zeta, n_i)
        })
        .collect())
}

/// An ODE system whose state is `classes` S/I/R/D quadruples followed by two
/// running tallies: cumulative infections and cumulative disease deaths.
pub trait EpiSystem: OdeSystem {
    fn classes(&self) -> usize;
}

/// Scalar SIRD.
#[derive(Debug, Clone)]
pub struct SirdSystem {
    pub params: ModelParams,
    pub zeta: ReinfectionSchedule,
    pub population: f64,
    pub form: TransmissionForm,
}

impl SirdSystem {
    pub fn new(
        params: ModelParams,
        zeta: ReinfectionSchedule,
        population: f64,
        form: TransmissionForm,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        zeta.validate()?;
        if !(population > 0.0) {
            return Err(ModelError::InvalidPopulation(population));
        }
        Ok(Self {
            params,
            zeta,
            population,
            form,
        })
    }
}

impl OdeSystem for SirdSystem {
    fn dimension(&self) -> usize {
        6
    }

    fn derivatives(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let infection = transmission(self.params.beta, y[0], y[1], self.population, self.form);
        let r = sird_rates(
            [y[0], y[1], y[2], y[3]],
            infection,
            &self.params,
            self.zeta.at(t),
            self.population,
        );
        dy[..4].copy_from_slice(&[r.ds, r.di, r.dr, r.dd]);
        dy[4] = infection;
        dy[5] = self.params.lambda_d * y[1];
    }
}

impl EpiSystem for SirdSystem {
    fn classes(&self) -> usize {
        1
    }
}

/// Age-structured SIRD under a fixed effective contact matrix.
#[derive(Debug, Clone)]
pub struct AgeSirdSystem {
    pub params: ModelParams,
    pub contacts: ContactMatrix,
    pub structure: AgeStructure,
    pub zeta: ReinfectionSchedule,
    pub form: TransmissionForm,
}

impl AgeSirdSystem {
    pub fn new(
        params: ModelParams,
        contacts: ContactMatrix,
        structure: AgeStructure,
        zeta: ReinfectionSchedule,
        form: TransmissionForm,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        zeta.validate()?;
        check_age_shapes(&contacts, structure.classes(), &structure)?;
        structure.require_positive()?;
        Ok(Self {
            params,
            contacts,
            structure,
            zeta,
            form,
        })
    }
}

impl OdeSystem for AgeSirdSystem {
    fn dimension(&self) -> usize {
        4 * self.structure.classes() + 2
    }

    fn derivatives(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let m = self.structure.classes();
        let pops = self.structure.populations();
        let prevalence: Vec<f64> = (0..m).map(|j| y[4 * j + 1] / pops[j]).collect();
        let lambda = foi_from_prevalence(&self.contacts, &prevalence, self.params.beta);
        let zeta = self.zeta.at(t);
        let (mut new_inf, mut new_dead) = (0.0, 0.0);
        for i in 0..m {
            let c = [y[4 * i], y[4 * i + 1], y[4 * i + 2], y[4 * i + 3]];
            let infection = match self.form {
                TransmissionForm::Normalized => lambda[i] * c[0],
                TransmissionForm::Literal => lambda[i] * c[0] * c[1],
            };
            let r = sird_rates(c, infection, &self.params, zeta, pops[i]);
            dy[4 * i..4 * i + 4].copy_from_slice(&[r.ds, r.di, r.dr, r.dd]);
            new_inf += infection;
            new_dead += self.params.lambda_d * c[1];
        }
        dy[4 * m] = new_inf;
        dy[4 * m + 1] = new_dead;
    }
}

impl EpiSystem for AgeSirdSystem {
    fn classes(&self) -> usize {
        self.structure.classes()
    }
}

/// Daily samples of an integrated model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: NaiveDate,
    pub h: f64,
    pub classes: usize,
    /// Full state (compartments then tallies) at days 0..=horizon.
    pub samples: Vec<Vec<f64>>,
    pub clamp_events: Vec<ClampEvent>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.t0 + Days::new(day as u64)
    }

    pub fn age_state(&self, day: usize) -> AgeState {
        AgeState::from_slice(&self.samples[day][..4 * self.classes])
    }

    /// Compartments summed over classes.
    pub fn totals(&self, day: usize) -> CompartmentState {
        self.age_state(day).totals()
    }

    pub fn cumulative_infections(&self, day: usize) -> f64 {
        self.samples[day][4 * self.classes]
    }

    pub fn cumulative_deaths(&self, day: usize) -> f64 {
        self.samples[day][4 * self.classes + 1]
    }

    fn differenced(&self, f: impl Fn(&Self, usize) -> f64) -> Vec<f64> {
        (1..self.samples.len())
            .map(|d| f(self, d) - f(self, d - 1))
            .collect()
    }

    /// New infections per day for days 1..=horizon.
    pub fn daily_new_infections(&self) -> Vec<f64> {
        self.differenced(Self::cumulative_infections)
    }

    /// New disease deaths per day for days 1..=horizon.
    pub fn daily_new_deaths(&self) -> Vec<f64> {
        self.differenced(Self::cumulative_deaths)
    }
}

/// Integrates `system` from `initial` compartments (4 per class) for `horizon_days`,
/// sampling once per day.
pub fn integrate<S: EpiSystem + ?Sized>(
    system: &S,
    initial: &[f64],
    t0: NaiveDate,
    horizon_days: u32,
    h: f64,
) -> Result<Trajectory, ModelError> {
    if horizon_days < 1 {
        return Err(ModelError::InvalidHorizon);
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(ModelError::InvalidStep(h));
    }
    let steps_per_day = (1.0 / h).round() as usize;
    if (steps_per_day as f64 * h - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidStep(h));
    }
    let classes = system.classes();
    if initial.len() != 4 * classes {
        return Err(ModelError::Shape(format!(
            "initial state has {} values, expected {}",
            initial.len(),
            4 * classes
        )));
    }
    let mut y: Vec<f64> = initial.iter().copied().chain([0.0, 0.0]).collect();
    let mut samples = Vec::with_capacity(horizon_days as usize + 1);
    let mut clamp_events = Vec::new();
    samples.push(y.clone());
    for day in 0..horizon_days {
        for k in 0..steps_per_day {
            let t = day as f64 + k as f64 * h;
            let step = rk4_step(system, &y, t, h).map_err(|e| match e {
                ModelError::NumericalBlowup { t } => ModelError::BlowupOnDay { day: day + 1, t },
                other => other,
            })?;
            y = step.state;
            clamp_events.extend(step.clamps);
        }
        samples.push(y.clone());
    }
    Ok(Trajectory {
        t0,
        h,
        classes,
        samples,
        clamp_events,
    })
}
