//! Observation assembly, running normalization statistics and the mapping
//! between normalized network actions and engineering units.
//!
//! Observation layout (59 slots):
//!
//! | slots  | content                                   |
//! |--------|-------------------------------------------|
//! | 0      | day t                                     |
//! | 1-3    | RbA, FwA, CcA                             |
//! | 4      | holding cash                              |
//! | 5      | previous day's inflow                     |
//! | 6      | wages accrued since last payday           |
//! | 7-9    | stocks                                    |
//! | 10     | formwork in use                           |
//! | 11-13  | prices                                    |
//! | 14-16  | today's Tp, Rf, Ws                        |
//! | 17-22  | Tp, Rf, Ws of days t-2 and t-1            |
//! | 23-31  | work hours of days t-3, t-2, t-1          |
//! | 32-34  | inflow forecast t+1..t+3                  |
//! | 35-43  | Tp, Rf, Ws forecast t+1..t+3              |
//! | 44-58  | price forecast t+1..t+5 (3 per day)       |
//!
//! Slots 0-16 feed the network directly; 17-58 go through the indirect
//! branch first.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, State};
use crate::error::{Error, Result};
use crate::exogenous::{
    forecast_cash_inflow, forecast_price, forecast_weather, AnnualCurves, BaselineParams, CashView,
    Weather, CASH_HORIZON, PRICE_HORIZON, WEATHER_HORIZON,
};
use crate::scenario::ModelParams;

pub const OBS_DIM: usize = 59;
pub const DIRECT_DIM: usize = 17;
pub const INDIRECT_DIM: usize = OBS_DIM - DIRECT_DIM;
pub const ACTION_DIM: usize = Action::DIM;

const STD_FLOOR: f64 = 1e-8;
/// Normalized observations are clipped to this magnitude.
pub const OBS_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; OBS_DIM] = v.try_into().map_err(|_| Error::Dimension {
            expected: OBS_DIM,
            got: v.len(),
        })?;
        Ok(Self(arr))
    }
}

/// Forecast inputs of one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecasts {
    pub cash: [f64; CASH_HORIZON],
    pub weather: [Weather; WEATHER_HORIZON],
    pub price: [[f64; 3]; PRICE_HORIZON],
}

impl Forecasts {
    pub fn sample<R: Rng + ?Sized>(
        state: &State,
        curves: &AnnualCurves,
        baseline: &BaselineParams,
        params: &ModelParams,
        rng: &mut R,
    ) -> Result<Self> {
        let pending: Vec<usize> = state.pay_queue.iter().map(|p| p.applied).collect();
        Ok(Self {
            cash: forecast_cash_inflow(
                CashView {
                    t: state.t,
                    cash: state.cash,
                    pending_applications: &pending,
                },
                params,
            ),
            weather: forecast_weather(curves, baseline, state.t, rng)?,
            price: forecast_price(curves, baseline, state.t, rng)?,
        })
    }
}

fn push_weather(out: &mut Vec<f64>, w: &Weather) {
    out.extend_from_slice(&[w.temperature, w.rainfall, w.wind]);
}

/// Builds the observation of the state at the start of its day.
pub fn observe(state: &State, forecasts: &Forecasts) -> Observation {
    let mut v = Vec::with_capacity(OBS_DIM);
    v.push(state.t as f64);
    v.extend_from_slice(&state.area);
    v.push(state.cash);
    v.push(state.inflow);
    v.push(state.wage_accrued);
    v.extend_from_slice(&state.stock);
    v.push(state.formwork_in_use);
    v.extend_from_slice(&state.price);
    push_weather(&mut v, &state.weather);
    for w in &state.weather_history {
        push_weather(&mut v, w);
    }
    for wh in &state.wh_history {
        v.extend_from_slice(wh);
    }
    v.extend_from_slice(&forecasts.cash);
    for w in &forecasts.weather {
        push_weather(&mut v, w);
    }
    for p in &forecasts.price {
        v.extend_from_slice(p);
    }
    debug_assert_eq!(v.len(), OBS_DIM);
    Observation::from_slice(&v).expect("layout has 59 slots")
}

/// Streaming per-dimension mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl NormStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Population standard deviation, floored. Unit before any update.
    pub fn std(&self, i: usize) -> f64 {
        if self.count < 1.0 {
            1.0
        } else {
            (self.m2[i] / self.count).sqrt().max(STD_FLOOR)
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| ((v - self.mean[i]) / self.std(i)).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }
}

/// Affine map between normalized actions in roughly [-1, 1] and the
/// bounded engineering action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionScaling {
    pub low: [f64; ACTION_DIM],
    pub high: [f64; ACTION_DIM],
}

impl ActionScaling {
    pub fn from_params(p: &ModelParams) -> Self {
        Self {
            low: p.action_low(),
            high: p.action_high(),
        }
    }

    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.low[i] + self.high[i])
    }

    pub fn half_range(&self, i: usize) -> f64 {
        0.5 * (self.high[i] - self.low[i])
    }

    /// Quantization step of dimension `i`: half an hour for work hours, one
    /// unit for orders.
    pub fn step(i: usize) -> f64 {
        if i < 3 {
            0.5
        } else {
            1.0
        }
    }

    pub fn denormalize_dim(&self, i: usize, a: f64) -> f64 {
        let a = if a.is_nan() { 0.0 } else { a };
        let raw = (self.mid(i) + a * self.half_range(i)).clamp(self.low[i], self.high[i]);
        let q = Self::step(i);
        ((raw / q).round() * q).clamp(self.low[i], self.high[i])
    }

    pub fn denormalize(&self, a: &[f64; ACTION_DIM]) -> Action {
        Action::from_array(std::array::from_fn(|i| self.denormalize_dim(i, a[i])))
    }

    pub fn normalize_dim(&self, i: usize, x: f64) -> f64 {
        let h = self.half_range(i);
        if h > 0.0 {
            (x - self.mid(i)) / h
        } else {
            0.0
        }
    }

    pub fn normalize(&self, action: &Action) -> [f64; ACTION_DIM] {
        let x = action.to_array();
        std::array::from_fn(|i| self.normalize_dim(i, x[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::init_state;
    use crate::exogenous::sample_year;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ModelParams, BaselineParams, AnnualCurves) {
        let p = ModelParams::default();
        let b = BaselineParams::default();
        let c = sample_year(
            &b,
            p.start_day,
            crate::exogenous::curve_len(&p),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        (p, b, c)
    }

    #[test]
    fn day_one_observation_layout() {
        let (p, b, c) = setup();
        let mut s = init_state(&p, &c).unwrap();
        s.inflow = 123.0;
        let f = Forecasts::sample(&s, &c, &b, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let o = observe(&s, &f);
        assert_eq!(o.0.len(), OBS_DIM);
        assert_eq!(o.0[0], 1.0);
        assert_eq!(o.0[5], 123.0);
        assert!(o.0[23..32].iter().all(|&v| v == 8.0));
        assert_eq!(o.0[14..17], o.0[17..20]);
        assert_eq!(o.0[32..35], f.cash);
    }

    #[test]
    fn centering_and_floor() {
        let mut st = NormStats::new(3);
        for _ in 0..5 {
            st.update(&[1.0, 2.0, 3.0]);
        }
        assert_eq!(st.normalize(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn action_scaling_examples() {
        let s = ActionScaling::from_params(&ModelParams::default());
        let mid = s.denormalize(&[0.0; 6]);
        assert_eq!(mid.work_hours, [8.0; 3]);
        assert_eq!(mid.orders, [250.0, 1000.0, 150.0]);
        let low = s.denormalize(&[-5.0; 6]);
        assert_eq!(low.work_hours, [4.0; 3]);
        assert_eq!(low.orders, [0.0; 3]);
        let high = s.denormalize(&[1.0; 6]);
        assert_eq!(high.work_hours, [12.0; 3]);
        assert_eq!(high.orders, [500.0, 2000.0, 300.0]);
    }
}
