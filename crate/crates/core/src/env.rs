//! Simulator state and the one-day transition.
//!
//! A day is processed in a fixed order: labor (fatigue, weather
//! productivity, attendance), work (achievable area per trade, limited by
//! labor, material and precedence), material (consumption, recycling,
//! deliveries), cash (interest, milestone payments, wages, orders), then the
//! clock advances and the next day's weather and prices are read.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exogenous::{AnnualCurves, Weather};
use crate::scenario::{ModelParams, CONCRETE, FORMWORK, REBAR};

/// Tolerance used when counting completed zones, so accumulated rounding in
/// areas does not drop a finished zone.
const ZONE_EPS: f64 = 1e-9;

/// One day's decision: work hours per trade and order quantities per
/// material (rebar in 0.1 t, formwork in m², concrete in m³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub work_hours: [f64; 3],
    pub orders: [f64; 3],
}

impl Action {
    pub const DIM: usize = 6;

    pub fn new(work_hours: [f64; 3], orders: [f64; 3]) -> Self {
        Self { work_hours, orders }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (w, b) = (self.work_hours, self.orders);
        [w[0], w[1], w[2], b[0], b[1], b[2]]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            work_hours: [a[0], a[1], a[2]],
            orders: [a[3], a[4], a[5]],
        }
    }

    pub fn within_bounds(&self, p: &ModelParams) -> bool {
        let (lo, hi) = (p.action_low(), p.action_high());
        self.to_array()
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(v, (l, h))| v.is_finite() && v >= l && v <= h)
    }

    pub fn clamped(&self, p: &ModelParams) -> Self {
        let (lo, hi) = (p.action_low(), p.action_high());
        let mut a = self.to_array();
        for i in 0..6 {
            a[i] = if a[i].is_nan() {
                lo[i]
            } else {
                a[i].clamp(lo[i], hi[i])
            };
        }
        Self::from_array(a)
    }
}

/// A milestone payment waiting to be received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingPayment {
    pub applied: usize,
    pub lands: usize,
    pub amount: f64,
}

/// Running material totals, kept for mass-balance checks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MaterialLedger {
    pub ordered: [f64; 3],
    pub consumed: [f64; 3],
    pub wasted: [f64; 3],
    /// formwork taken off completed zones
    pub removed: f64,
    /// removed formwork returned to stock
    pub recycled: f64,
}

/// Full simulator state at the start of day `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: usize,
    /// cumulative completed area per trade (m²)
    pub area: [f64; 3],
    pub cash: f64,
    /// holding cash at the start of the previous day
    pub prev_cash: f64,
    /// inflow and outflow of the previous day
    pub inflow: f64,
    pub outflow: f64,
    /// wages earned since the last payday
    pub wage_accrued: f64,
    /// weather productivity factor of the previous day
    pub weather_factor: f64,
    pub fatigue: [f64; 3],
    pub stock: [f64; 3],
    pub formwork_in_use: f64,
    pub price: [f64; 3],
    pub weather: Weather,
    pub pay_queue: Vec<PendingPayment>,
    pub labor_cost: f64,
    pub material_cost: f64,
    pub total_inflow: f64,
    pub total_outflow: f64,
    /// work hours of days t-3, t-2, t-1
    pub wh_history: [[f64; 3]; 3],
    /// weather of days t-2, t-1
    pub weather_history: [Weather; 2],
    pub materials: MaterialLedger,
}

impl State {
    pub fn completed_floors(&self, p: &ModelParams) -> u32 {
        (self.area[CONCRETE] / p.floor_area() + ZONE_EPS).floor() as u32
    }

    /// Fraction of the concrete area poured.
    pub fn progress(&self, p: &ModelParams) -> f64 {
        self.area[CONCRETE] / p.total_area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepStatus {
    Running,
    Completed,
    FailedCost,
    FailedTime,
}

impl StepStatus {
    pub fn is_terminal(self) -> bool {
        self != StepStatus::Running
    }

    pub fn is_failure(self) -> bool {
        matches!(self, StepStatus::FailedCost | StepStatus::FailedTime)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Running => "running",
            StepStatus::Completed => "completed",
            StepStatus::FailedCost => "failed_cost",
            StepStatus::FailedTime => "failed_time",
        }
    }
}

/// Day-1 state.
pub fn init_state(params: &ModelParams, curves: &AnnualCurves) -> Result<State> {
    if curves.start_day != params.start_day {
        return Err(Error::Config(format!(
            "curves start on day {} but the project starts on day {}",
            curves.start_day, params.start_day
        )));
    }
    let weather = curves.weather(1)?;
    Ok(State {
        t: 1,
        area: [0.0; 3],
        cash: params.init_cash,
        prev_cash: params.init_cash,
        inflow: 0.0,
        outflow: 0.0,
        wage_accrued: 0.0,
        weather_factor: 1.0,
        fatigue: [0.0; 3],
        stock: [0.0; 3],
        formwork_in_use: 0.0,
        price: curves.price(1)?,
        weather,
        pay_queue: Vec::new(),
        labor_cost: 0.0,
        material_cost: 0.0,
        total_inflow: 0.0,
        total_outflow: 0.0,
        wh_history: [[8.0; 3]; 3],
        weather_history: [weather; 2],
        materials: MaterialLedger::default(),
    })
}

/// Price multiplier for an order of `qty` units.
pub fn discount_ratio(qty: f64, full_discount_qty: f64, min_ratio: f64) -> f64 {
    if qty <= full_discount_qty {
        1.0 - qty / full_discount_qty * (1.0 - min_ratio)
    } else {
        min_ratio
    }
}

/// Daily pay of one trade; hours above 8 earn the overtime surcharge.
pub fn daily_wage(attendance: f64, hourly: f64, overtime_ratio: f64, hours: f64) -> f64 {
    if hours <= 8.0 {
        attendance * hourly * hours
    } else {
        attendance * hourly * (hours + overtime_ratio * (hours - 8.0))
    }
}

/// Sum of per-hour effectiveness over `hours` (fractional hours count
/// pro rata at the next hour's rate).
pub fn effective_hours(hours: f64, per_hour: &[f64; 12]) -> f64 {
    let hours = hours.clamp(0.0, 12.0);
    let whole = hours.floor() as usize;
    let mut sum: f64 = per_hour[..whole].iter().sum();
    if whole < 12 {
        sum += (hours - whole as f64) * per_hour[whole];
    }
    sum
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    half_width * (2.0 * rng.random::<f64>() - 1.0)
}

fn zones(area: f64, zone_area: f64) -> f64 {
    (area / zone_area + ZONE_EPS).floor()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaborOutcome {
    /// fatigue index carried into tomorrow
    pub fatigue_next: [f64; 3],
    /// today's weather productivity factor
    pub weather_factor: f64,
    /// today's fatigue productivity factor per trade
    pub fatigue_factor: [f64; 3],
    /// expected attending workers per trade
    pub attendance: [f64; 3],
}

/// Fatigue, weather productivity and attendance for today. Today's
/// productivity reflects fatigue accumulated up to yesterday; today's hours
/// feed tomorrow's fatigue index.
pub fn labor_update(state: &State, action: &Action, params: &ModelParams) -> LaborOutcome {
    let w = state.weather;
    let weather_factor = 1.0_f64
        .min(state.weather_factor + 0.3)
        .min(params.temperature_curve.eval(w.temperature))
        .min(params.rainfall_curve.eval(w.rainfall))
        .min(params.wind_curve.eval(w.wind));
    let mut out = LaborOutcome {
        fatigue_next: [0.0; 3],
        weather_factor,
        fatigue_factor: [0.0; 3],
        attendance: [0.0; 3],
    };
    for k in 0..3 {
        let fi = state.fatigue[k];
        out.fatigue_next[k] = (0.5 * fi + action.work_hours[k] - 8.0).max(0.0);
        out.fatigue_factor[k] = params.fatigue_curve.eval(fi);
        let absence = (params.normal_absence_ratio * (1.0 + params.absence_slope * fi)).min(1.0);
        out.attendance[k] = params.workers[k] * (1.0 - absence);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkOutcome {
    pub delta: [f64; 3],
    pub max_labor: [f64; 3],
    pub max_material: [f64; 3],
    pub max_precedence: [f64; 3],
}

/// Area completed today per trade: the tightest of the labor, material and
/// precedence limits and the remaining area.
pub fn work_update<R: Rng + ?Sized>(
    state: &State,
    action: &Action,
    labor: &LaborOutcome,
    params: &ModelParams,
    rng: &mut R,
) -> WorkOutcome {
    let za = params.zone_area;
    let total = params.total_area();
    let [rb, fw, cc] = state.area;
    let max_precedence = [
        (zones(cc, za) + params.zones_per_floor as f64) * za - rb,
        zones(rb, za) * za - fw,
        zones(fw, za) * za - cc,
    ];
    let mut out = WorkOutcome {
        delta: [0.0; 3],
        max_labor: [0.0; 3],
        max_material: [0.0; 3],
        max_precedence,
    };
    for k in 0..3 {
        let ewh = effective_hours(action.work_hours[k], &params.hour_effectiveness);
        out.max_labor[k] = (1.0 + uniform(rng, params.noise.productivity))
            * labor.fatigue_factor[k]
            * labor.weather_factor
            * params.area_per_worker_hour[k]
            * labor.attendance[k]
            * ewh;
        out.max_material[k] = (1.0 + uniform(rng, params.noise.stock_area))
            * params.area_per_unit[k]
            * state.stock[k];
        let remaining = total - state.area[k];
        out.delta[k] = out.max_labor[k]
            .min(out.max_material[k])
            .min(out.max_precedence[k])
            .min(remaining)
            .max(0.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialOutcome {
    pub stock_next: [f64; 3],
    pub formwork_in_use_next: f64,
    pub consumed: [f64; 3],
    pub wasted: [f64; 3],
    pub removed: f64,
    pub recycled: f64,
}

/// Consumption, formwork removal and recycling, and tomorrow's stock.
/// `area_next` is the area after today's work.
pub fn material_update<R: Rng + ?Sized>(
    state: &State,
    work: &WorkOutcome,
    area_next: &[f64; 3],
    action: &Action,
    params: &ModelParams,
    rng: &mut R,
) -> MaterialOutcome {
    let mut consumed = [0.0; 3];
    for k in 0..3 {
        let d = uniform(rng, params.noise.consumption);
        if work.max_material[k] > 0.0 {
            consumed[k] = ((1.0 + d) * work.delta[k] / work.max_material[k] * state.stock[k])
                .clamp(0.0, state.stock[k]);
        }
    }

    // formwork comes off zones whose concrete was completed today
    let za = params.zone_area;
    let cc_zones_before = zones(state.area[CONCRETE], za);
    let finished = (zones(area_next[CONCRETE], za) - cc_zones_before) * za;
    let open = state.area[FORMWORK] - cc_zones_before * za;
    let removed = if finished > 0.0 && open > 0.0 {
        (finished / open).min(1.0) * state.formwork_in_use
    } else {
        0.0
    };
    let d = uniform(rng, params.noise.recycle_loss);
    let recycled = ((1.0 - (1.0 + d) * params.formwork_loss_ratio) * removed).clamp(0.0, removed);

    let mut stock_next = [0.0; 3];
    let mut wasted = [0.0; 3];
    let b = action.orders;
    let raw_rb = state.stock[REBAR] - consumed[REBAR] + b[REBAR];
    stock_next[REBAR] = raw_rb.min(params.max_stock[0]);
    wasted[REBAR] = raw_rb - stock_next[REBAR];
    let raw_fw = state.stock[FORMWORK] - consumed[FORMWORK] + recycled + b[FORMWORK];
    stock_next[FORMWORK] = raw_fw.min(params.max_stock[1]);
    wasted[FORMWORK] = raw_fw - stock_next[FORMWORK];
    // unused concrete is discarded; tomorrow's stock is today's order
    stock_next[CONCRETE] = b[CONCRETE];
    wasted[CONCRETE] = state.stock[CONCRETE] - consumed[CONCRETE];

    MaterialOutcome {
        stock_next,
        formwork_in_use_next: (state.formwork_in_use + consumed[FORMWORK] - removed).max(0.0),
        consumed,
        wasted,
        removed,
        recycled,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CashOutcome {
    pub inflow: f64,
    pub outflow: f64,
    pub cash_next: f64,
    pub wages_earned: f64,
    pub wages_paid: f64,
    pub wage_accrued_next: f64,
    pub order_payment: f64,
    pub pay_queue_next: Vec<PendingPayment>,
}

/// Today's inflow and outflow. Wages are paid weekly on days with
/// `t % 7 == 1`, and settled in full on the day the project completes.
pub fn cash_update<R: Rng + ?Sized>(
    state: &State,
    action: &Action,
    labor: &LaborOutcome,
    area_next: &[f64; 3],
    params: &ModelParams,
    rng: &mut R,
) -> CashOutcome {
    let t = state.t;
    let mut inflow = params.interest_rate * state.prev_cash;
    let mut queue = Vec::with_capacity(state.pay_queue.len() + 1);
    for p in &state.pay_queue {
        if p.lands <= t {
            inflow += p.amount;
        } else {
            queue.push(*p);
        }
    }

    let floor_area = params.floor_area();
    let floors_before = (state.area[CONCRETE] / floor_area + ZONE_EPS).floor() as u32;
    let floors_after = (area_next[CONCRETE] / floor_area + ZONE_EPS).floor() as u32;
    let [lead_lo, lead_hi] = params.payment_lead_days;
    for _ in floors_before..floors_after {
        let lead = rng.random_range(lead_lo..=lead_hi) as usize;
        queue.push(PendingPayment {
            applied: t,
            lands: t + lead,
            amount: params.floor_payment,
        });
    }

    let order_payment: f64 = (0..3)
        .map(|k| {
            let dc = discount_ratio(
                action.orders[k],
                params.discount_qty[k],
                params.min_discount_ratio,
            );
            dc * state.price[k] * params.price_units_per_order_unit[k] * action.orders[k]
        })
        .sum();

    let wages_earned: f64 = (0..3)
        .map(|k| {
            daily_wage(
                labor.attendance[k],
                params.hourly_wage[k],
                params.overtime_ratio,
                action.work_hours[k],
            )
        })
        .sum();

    let completed = area_next[CONCRETE] >= params.total_area();
    let (wages_paid, wage_accrued_next) = if completed {
        (state.wage_accrued + wages_earned, 0.0)
    } else if t % 7 == 1 {
        (state.wage_accrued, wages_earned)
    } else {
        (0.0, state.wage_accrued + wages_earned)
    };

    let outflow = params.inventory_fee + order_payment + wages_paid;
    CashOutcome {
        inflow,
        outflow,
        cash_next: state.cash + inflow - outflow,
        wages_earned,
        wages_paid,
        wage_accrued_next,
        order_payment,
        pay_queue_next: queue,
    }
}

/// Episode status of a post-step state.
pub fn status(state: &State, params: &ModelParams) -> StepStatus {
    if state.area[CONCRETE] >= params.total_area() {
        StepStatus::Completed
    } else if state.t >= params.max_days as usize {
        StepStatus::FailedTime
    } else if state.prev_cash < state.outflow {
        StepStatus::FailedCost
    } else {
        StepStatus::Running
    }
}

/// Everything computed while processing one day, for logging and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DayDetail {
    pub labor: LaborOutcome,
    pub work: WorkOutcome,
    pub material: MaterialOutcome,
    pub cash: CashOutcome,
}

/// Advances the project by one day.
pub fn step<R: Rng + ?Sized>(
    state: &State,
    action: &Action,
    curves: &AnnualCurves,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(State, StepStatus)> {
    step_detailed(state, action, curves, params, rng).map(|(s, st, _)| (s, st))
}

pub fn step_detailed<R: Rng + ?Sized>(
    state: &State,
    action: &Action,
    curves: &AnnualCurves,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(State, StepStatus, DayDetail)> {
    if !action.within_bounds(params) {
        return Err(Error::Usage(format!(
            "action out of bounds on day {}: {:?}",
            state.t, action
        )));
    }
    let labor = labor_update(state, action, params);
    let work = work_update(state, action, &labor, params, rng);

    let total = params.total_area();
    let mut area_next = state.area;
    for k in 0..3 {
        let remaining = total - state.area[k];
        area_next[k] = if work.delta[k] >= remaining {
            total
        } else {
            state.area[k] + work.delta[k]
        };
    }

    let material = material_update(state, &work, &area_next, action, params, rng);
    let cash = cash_update(state, action, &labor, &area_next, params, rng);

    let t_next = state.t + 1;
    let mut m = state.materials;
    for k in 0..3 {
        m.ordered[k] += action.orders[k];
        m.consumed[k] += material.consumed[k];
        m.wasted[k] += material.wasted[k];
    }
    m.removed += material.removed;
    m.recycled += material.recycled;

    let next = State {
        t: t_next,
        area: area_next,
        cash: cash.cash_next,
        prev_cash: state.cash,
        inflow: cash.inflow,
        outflow: cash.outflow,
        wage_accrued: cash.wage_accrued_next,
        weather_factor: labor.weather_factor,
        fatigue: labor.fatigue_next,
        stock: material.stock_next,
        formwork_in_use: material.formwork_in_use_next,
        price: curves.price(t_next)?,
        weather: curves.weather(t_next)?,
        pay_queue: cash.pay_queue_next.clone(),
        labor_cost: state.labor_cost + cash.wages_paid,
        material_cost: state.material_cost + params.inventory_fee + cash.order_payment,
        total_inflow: state.total_inflow + cash.inflow,
        total_outflow: state.total_outflow + cash.outflow,
        wh_history: [state.wh_history[1], state.wh_history[2], action.work_hours],
        weather_history: [state.weather_history[1], state.weather],
        materials: m,
    };
    let st = status(&next, params);
    Ok((
        next,
        st,
        DayDetail {
            labor,
            work,
            material,
            cash,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogenous::{sample_year, BaselineParams};
    use crate::scenario::NoiseLevels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> (ModelParams, AnnualCurves) {
        let p = ModelParams {
            noise: NoiseLevels::zero(),
            ..ModelParams::default()
        };
        let c = sample_year(
            &BaselineParams::noiseless(),
            p.start_day,
            crate::exogenous::curve_len(&p),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        (p, c)
    }

    #[test]
    fn discount_examples() {
        assert_eq!(discount_ratio(0.0, 400.0, 0.9), 1.0);
        assert!((discount_ratio(400.0, 400.0, 0.9) - 0.9).abs() < 1e-15);
        assert!((discount_ratio(200.0, 400.0, 0.9) - 0.95).abs() < 1e-15);
        assert_eq!(discount_ratio(401.0, 400.0, 0.9), 0.9);
    }

    #[test]
    fn wage_examples() {
        assert!((daily_wage(10.0, 27.5, 2.0, 8.0) - 2200.0).abs() < 1e-9);
        assert!((daily_wage(10.0, 27.5, 2.0, 10.0) - 3850.0).abs() < 1e-9);
        assert_eq!(daily_wage(0.0, 27.5, 2.0, 12.0), 0.0);
    }

    #[test]
    fn effective_hours_with_default_tail() {
        let p = ModelParams::default();
        assert!((effective_hours(10.0, &p.hour_effectiveness) - 9.7).abs() < 1e-12);
        assert_eq!(effective_hours(8.0, &p.hour_effectiveness), 8.0);
        assert!((effective_hours(12.0, &p.hour_effectiveness) - 11.0).abs() < 1e-12);
        assert!((effective_hours(8.5, &p.hour_effectiveness) - 8.45).abs() < 1e-12);
    }

    #[test]
    fn init_state_matches_table() {
        let (p, c) = quiet();
        let s = init_state(&p, &c).unwrap();
        assert_eq!(s.cash, 1_000_000.0);
        assert_eq!(s.area, [0.0; 3]);
        assert_eq!(s.stock, [0.0; 3]);
        assert_eq!(s.weather_factor, 1.0);
        assert_eq!(s.price, c.price(1).unwrap());

        let p1 = crate::scenario::builtin(1).unwrap();
        let c1 = sample_year(
            &BaselineParams::default(),
            p1.start_day,
            10,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(init_state(&p1, &c1).unwrap().cash, 900_000.0);
    }

    #[test]
    fn init_state_rejects_mismatched_curves() {
        let (p, _) = quiet();
        let c = sample_year(
            &BaselineParams::default(),
            40,
            10,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(init_state(&p, &c).is_err());
    }

    #[test]
    fn first_day_without_stock_makes_no_progress() {
        let (p, c) = quiet();
        let s = init_state(&p, &c).unwrap();
        let a = Action::new([8.0; 3], [0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s2, st, d) = step_detailed(&s, &a, &c, &p, &mut rng).unwrap();
        assert_eq!(st, StepStatus::Running);
        assert_eq!(s2.area, [0.0; 3]);
        assert_eq!(s2.t, 2);
        assert_eq!(d.work.max_precedence[REBAR], 600.0);
        assert_eq!(d.work.max_precedence[FORMWORK], 0.0);
    }

    #[test]
    fn full_stock_rebar_step_is_min_of_limits() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.stock = [500.0, 2000.0, 300.0];
        let a = Action::new([8.0; 3], [0.0; 3]);
        let (s2, _, d) = step_detailed(&s, &a, &c, &p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        // hand evaluation: 12 workers at 5% absence, 8 h, 2.5 m²/h
        let labor = 2.5 * 12.0 * 0.95 * 8.0 * d.labor.weather_factor;
        assert!((d.work.max_labor[REBAR] - labor).abs() < 1e-9);
        let material = 1.54 * 500.0;
        let expected = labor.min(material).min(600.0);
        assert!((s2.area[REBAR] - expected).abs() < 1e-9);
        assert_eq!(s2.area[FORMWORK], 0.0);
    }

    #[test]
    fn weekly_payday_outflow() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.t = 8;
        s.wage_accrued = 10_000.0;
        let a = Action::new([8.0; 3], [0.0; 3]);
        let labor = labor_update(&s, &a, &p);
        let out = cash_update(
            &s,
            &a,
            &labor,
            &s.area,
            &p,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!((out.outflow - 11_000.0).abs() < 1e-9);
        assert!((out.inflow - 100.0).abs() < 1e-9);
    }

    #[test]
    fn milestone_lands_on_its_day() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.t = 12;
        s.pay_queue.push(PendingPayment {
            applied: 9,
            lands: 12,
            amount: 400_000.0,
        });
        let a = Action::new([8.0; 3], [0.0; 3]);
        let labor = labor_update(&s, &a, &p);
        let out = cash_update(
            &s,
            &a,
            &labor,
            &s.area,
            &p,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!((out.inflow - 400_100.0).abs() < 1e-6);
        assert!(out.pay_queue_next.is_empty());
    }

    #[test]
    fn fatigue_update_and_factor() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.fatigue = [2.0, 0.0, 0.0];
        let a = Action::new([12.0, 8.0, 8.0], [0.0; 3]);
        let l = labor_update(&s, &a, &p);
        assert_eq!(l.fatigue_next, [5.0, 0.0, 0.0]);
        assert!((p.fatigue_curve.eval(5.0) - 0.775).abs() < 1e-12);
        assert!((l.fatigue_factor[0] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn good_weather_keeps_full_productivity() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.weather = Weather {
            temperature: 20.0,
            rainfall: 0.0,
            wind: 0.0,
        };
        let l = labor_update(&s, &Action::new([8.0; 3], [0.0; 3]), &p);
        assert_eq!(l.weather_factor, 1.0);
    }

    #[test]
    fn concrete_stock_is_yesterdays_order() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.stock[CONCRETE] = 50.0;
        let work = WorkOutcome {
            delta: [0.0, 0.0, 90.0],
            max_labor: [0.0; 3],
            max_material: [0.0, 0.0, 150.0],
            max_precedence: [0.0; 3],
        };
        let a = Action::new([8.0; 3], [0.0, 0.0, 100.0]);
        let area = [0.0, 0.0, 90.0];
        let m = material_update(&s, &work, &area, &a, &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert!((m.consumed[CONCRETE] - 30.0).abs() < 1e-12);
        assert_eq!(m.stock_next[CONCRETE], 100.0);
        assert!((m.wasted[CONCRETE] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn formwork_removal_and_recycling() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        // two zones formed, none poured; pour both today
        s.area = [100.0, 100.0, 0.0];
        s.formwork_in_use = 100.0;
        let work = WorkOutcome {
            delta: [0.0; 3],
            max_labor: [0.0; 3],
            max_material: [0.0; 3],
            max_precedence: [0.0; 3],
        };
        let area = [100.0, 100.0, 100.0];
        let a = Action::new([8.0; 3], [0.0; 3]);
        let m = material_update(&s, &work, &area, &a, &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert!((m.removed - 100.0).abs() < 1e-12);
        assert!((m.recycled - 95.0).abs() < 1e-12);
        assert!((m.formwork_in_use_next).abs() < 1e-12);

        // nothing open: no removal
        s.area = [100.0, 0.0, 0.0];
        let m = material_update(
            &s,
            &work,
            &s.area.clone(),
            &a,
            &p,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(m.removed, 0.0);
    }

    #[test]
    fn status_rules() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        assert_eq!(status(&s, &p), StepStatus::Running);
        s.t = 150;
        assert_eq!(status(&s, &p), StepStatus::FailedTime);
        s.area[CONCRETE] = p.total_area();
        assert_eq!(status(&s, &p), StepStatus::Completed);
        s.area[CONCRETE] = 0.0;
        s.t = 20;
        s.prev_cash = 5_000.0;
        s.outflow = 6_000.0;
        assert_eq!(status(&s, &p), StepStatus::FailedCost);
    }

    #[test]
    fn out_of_bounds_action_is_rejected() {
        let (p, c) = quiet();
        let s = init_state(&p, &c).unwrap();
        let a = Action::new([13.0, 8.0, 8.0], [0.0; 3]);
        assert!(step(&s, &a, &c, &p, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(a.clamped(&p).within_bounds(&p));
    }

    #[test]
    fn rested_crew_fatigue_decays_geometrically() {
        let (p, c) = quiet();
        let mut s = init_state(&p, &c).unwrap();
        s.fatigue = [8.0, 4.0, 2.0];
        let a = Action::new([8.0; 3], [0.0; 3]);
        for _ in 0..40 {
            let l = labor_update(&s, &a, &p);
            for k in 0..3 {
                assert!((l.fatigue_next[k] - 0.5 * s.fatigue[k]).abs() < 1e-15);
            }
            s.fatigue = l.fatigue_next;
        }
        assert!(s.fatigue.iter().all(|&f| f < 1e-10));
    }
}
