//! A single simulated project: sampled curves, state, and the random
//! streams for transition noise and forecasts.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::env::{init_state, step_detailed, Action, DayDetail, State, StepStatus};
use crate::error::{Error, Result};
use crate::exogenous::{curve_len, sample_year, AnnualCurves, BaselineParams};
use crate::observe::{observe, Forecasts, Observation};
use crate::reward::RewardBreakdown;
use crate::scenario::ModelParams;

const CURVE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const FORECAST_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

pub struct Simulation {
    pub params: Arc<ModelParams>,
    pub baseline: Arc<BaselineParams>,
    pub curves: AnnualCurves,
    pub state: State,
    pub status: StepStatus,
    noise_rng: ChaCha8Rng,
    forecast_rng: ChaCha8Rng,
}

/// Result of one simulated day.
pub struct Transition {
    pub prev: State,
    pub action: Action,
    pub status: StepStatus,
    pub detail: DayDetail,
}

impl Simulation {
    /// New project whose weather, prices, transition noise and forecast
    /// noise all derive from `seed` on independent streams.
    pub fn new(params: Arc<ModelParams>, baseline: Arc<BaselineParams>, seed: u64) -> Result<Self> {
        let curves = sample_year(
            &baseline,
            params.start_day,
            curve_len(&params),
            &mut stream(seed, CURVE_STREAM),
        );
        Self::with_curves(params, baseline, curves, seed)
    }

    pub fn with_curves(
        params: Arc<ModelParams>,
        baseline: Arc<BaselineParams>,
        curves: AnnualCurves,
        seed: u64,
    ) -> Result<Self> {
        let state = init_state(&params, &curves)?;
        Ok(Self {
            params,
            baseline,
            curves,
            state,
            status: StepStatus::Running,
            noise_rng: stream(seed, NOISE_STREAM),
            forecast_rng: stream(seed, FORECAST_STREAM),
        })
    }

    pub fn is_done(&self) -> bool {
        self.status.is_terminal()
    }

    /// Observation of the current day, drawing fresh forecast noise.
    pub fn observe(&mut self) -> Result<Observation> {
        let f = Forecasts::sample(
            &self.state,
            &self.curves,
            &self.baseline,
            &self.params,
            &mut self.forecast_rng,
        )?;
        Ok(observe(&self.state, &f))
    }

    /// Simulates today with `action` (clamped to bounds).
    pub fn step(&mut self, action: &Action) -> Result<Transition> {
        if self.is_done() {
            return Err(Error::Usage("episode already finished".into()));
        }
        let action = action.clamped(&self.params);
        let (next, status, detail) = step_detailed(
            &self.state,
            &action,
            &self.curves,
            &self.params,
            &mut self.noise_rng,
        )?;
        let prev = std::mem::replace(&mut self.state, next);
        self.status = status;
        Ok(Transition {
            prev,
            action,
            status,
            detail,
        })
    }

    /// Days worked so far.
    pub fn duration(&self) -> usize {
        self.state.t - 1
    }
}

/// One row of the daily log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayLog {
    pub t: usize,
    pub wh_rb: f64,
    pub wh_fw: f64,
    pub wh_cc: f64,
    pub b_rb: f64,
    pub b_fw: f64,
    pub b_cc: f64,
    pub rb_a: f64,
    pub fw_a: f64,
    pub cc_a: f64,
    pub s_rb: f64,
    pub s_fw: f64,
    pub s_cc: f64,
    pub fw_u: f64,
    pub ca: f64,
    pub ica: f64,
    pub oca: f64,
    pub pr_rb: f64,
    pub pr_fw: f64,
    pub pr_cc: f64,
    pub tp: f64,
    pub rf: f64,
    pub ws: f64,
    pub fai_rb: f64,
    pub fai_fw: f64,
    pub fai_cc: f64,
    pub ene: f64,
    pub reward: f64,
    pub status: &'static str,
    pub r_progress: f64,
    pub r_deadline_dense: f64,
    pub r_labor_dense: f64,
    pub r_material_dense: f64,
    pub r_failure: f64,
    pub r_deadline_sparse: f64,
    pub r_labor_sparse: f64,
    pub r_material_sparse: f64,
}

impl DayLog {
    /// Row for the day described by `tr`, with post-day stocks, areas and
    /// cash, and the day's own prices and weather.
    pub fn new(tr: &Transition, state: &State, reward: &RewardBreakdown) -> Self {
        let (w, b) = (tr.action.work_hours, tr.action.orders);
        Self {
            t: tr.prev.t,
            wh_rb: w[0],
            wh_fw: w[1],
            wh_cc: w[2],
            b_rb: b[0],
            b_fw: b[1],
            b_cc: b[2],
            rb_a: state.area[0],
            fw_a: state.area[1],
            cc_a: state.area[2],
            s_rb: state.stock[0],
            s_fw: state.stock[1],
            s_cc: state.stock[2],
            fw_u: state.formwork_in_use,
            ca: state.cash,
            ica: state.inflow,
            oca: state.outflow,
            pr_rb: tr.prev.price[0],
            pr_fw: tr.prev.price[1],
            pr_cc: tr.prev.price[2],
            tp: tr.prev.weather.temperature,
            rf: tr.prev.weather.rainfall,
            ws: tr.prev.weather.wind,
            fai_rb: state.fatigue[0],
            fai_fw: state.fatigue[1],
            fai_cc: state.fatigue[2],
            ene: tr.detail.labor.weather_factor,
            reward: reward.total,
            status: tr.status.as_str(),
            r_progress: reward.progress,
            r_deadline_dense: reward.deadline_dense,
            r_labor_dense: reward.labor_dense,
            r_material_dense: reward.material_dense,
            r_failure: reward.failure,
            r_deadline_sparse: reward.deadline_sparse,
            r_labor_sparse: reward.labor_sparse,
            r_material_sparse: reward.material_sparse,
        }
    }
}

pub fn write_day_log<W: Write>(rows: &[DayLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
