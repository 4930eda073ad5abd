//! Project and environment parameters, the seven built-in benchmark
//! scenarios, and the flat `key = value` config format.
//!
//! Config grammar (a TOML subset):
//!
//! ```text
//! # comment
//! scenario = 0            # optional: built-in id 0-6 or a custom name
//! init_cash = 900000      # any ModelParams field, overriding the base
//! workers = [12, 20, 8]   # arrays are bracketed, comma separated
//!
//! [exogenous]             # optional: BaselineParams overrides
//! price_amplitude = [0.05, 0.05, 0.0]
//! ```
//!
//! With a built-in id the listed keys override that scenario; with a custom
//! name the keys must form a complete parameter set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exogenous::BaselineParams;
use crate::piecewise::PiecewiseLinear;

pub const REBAR: usize = 0;
pub const FORMWORK: usize = 1;
pub const CONCRETE: usize = 2;
pub const TRADES: [&str; 3] = ["rebar", "formwork", "concrete"];

/// Relative half-widths of the uniform `(1 + δ)` factors used by the
/// transition. Setting all of them to zero makes a step deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    /// Labor productivity factor on the daily achievable area.
    pub productivity: f64,
    /// Material-to-area ratio on the achievable area from stock.
    pub stock_area: f64,
    /// Material consumption per completed area.
    pub consumption: f64,
    /// Formwork recycling loss ratio.
    pub recycle_loss: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self {
            productivity: 0.05,
            stock_area: 0.05,
            consumption: 0.05,
            recycle_loss: 0.1,
        }
    }
}

impl NoiseLevels {
    pub fn zero() -> Self {
        Self {
            productivity: 0.0,
            stock_area: 0.0,
            consumption: 0.0,
            recycle_loss: 0.0,
        }
    }
}

/// Every constant the simulator needs. Per-trade and per-material arrays are
/// ordered rebar, formwork, concrete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub floors: u32,
    pub zones_per_floor: u32,
    /// m²
    pub zone_area: f64,
    /// days
    pub max_days: u32,
    /// calendar day of year, 1-365
    pub start_day: u32,
    pub init_cash: f64,
    /// milestone payment per completed floor
    pub floor_payment: f64,
    /// daily interest rate on held cash
    pub interest_rate: f64,
    /// normal hourly wage per trade
    pub hourly_wage: [f64; 3],
    /// overtime surcharge ratio (2.0 = 200%)
    pub overtime_ratio: f64,
    pub inventory_fee: f64,
    /// order quantity that earns the full discount, in order units
    pub discount_qty: [f64; 3],
    pub min_discount_ratio: f64,
    pub workers: [f64; 3],
    pub normal_absence_ratio: f64,
    /// storage capacities for rebar and formwork (concrete is not stored)
    pub max_stock: [f64; 2],
    pub formwork_loss_ratio: f64,
    /// m² completed per worker-hour
    pub area_per_worker_hour: [f64; 3],
    /// m² completed per unit of material
    pub area_per_unit: [f64; 3],
    /// price units per order unit (rebar is priced per ton, ordered per 0.1 t)
    pub price_units_per_order_unit: [f64; 3],
    /// productivity factor as a function of the fatigue index
    pub fatigue_curve: PiecewiseLinear,
    /// productivity factor as a function of temperature (°C)
    pub temperature_curve: PiecewiseLinear,
    /// productivity factor as a function of rainfall (mm)
    pub rainfall_curve: PiecewiseLinear,
    /// productivity factor as a function of wind speed (m/s)
    pub wind_curve: PiecewiseLinear,
    /// effectiveness of the i-th work hour of a day, hours 1..=12
    pub hour_effectiveness: [f64; 12],
    /// slope of absence ratio against the fatigue index
    pub absence_slope: f64,
    pub wage_ratio: f64,
    pub material_ratio: f64,
    pub min_work_hours: f64,
    pub max_work_hours: f64,
    pub max_order: [f64; 3],
    /// milestone payment lead time bounds in days (inclusive)
    pub payment_lead_days: [u32; 2],
    pub noise: NoiseLevels,
}

impl ModelParams {
    /// Total construction area.
    pub fn total_area(&self) -> f64 {
        self.floors as f64 * self.floor_area()
    }

    pub fn floor_area(&self) -> f64 {
        self.zones_per_floor as f64 * self.zone_area
    }

    /// Sum of all milestone payments.
    pub fn total_milestone_pay(&self) -> f64 {
        self.floors as f64 * self.floor_payment
    }

    pub fn action_low(&self) -> [f64; 6] {
        let w = self.min_work_hours;
        [w, w, w, 0.0, 0.0, 0.0]
    }

    pub fn action_high(&self) -> [f64; 6] {
        let w = self.max_work_hours;
        let b = self.max_order;
        [w, w, w, b[0], b[1], b[2]]
    }
}

impl Default for ModelParams {
    /// Scenario #0.
    fn default() -> Self {
        Self {
            floors: 25,
            zones_per_floor: 12,
            zone_area: 50.0,
            max_days: 150,
            start_day: 151,
            init_cash: 1_000_000.0,
            floor_payment: 400_000.0,
            interest_rate: 0.0001,
            hourly_wage: [27.5, 27.5, 22.5],
            overtime_ratio: 2.0,
            inventory_fee: 1_000.0,
            discount_qty: [400.0, 800.0, 150.0],
            min_discount_ratio: 0.9,
            workers: [12.0, 20.0, 8.0],
            normal_absence_ratio: 0.05,
            max_stock: [500.0, 2_000.0],
            formwork_loss_ratio: 0.05,
            area_per_worker_hour: [2.5, 1.51, 3.84],
            area_per_unit: [1.54, 0.25, 3.0],
            price_units_per_order_unit: [0.1, 1.0, 1.0],
            fatigue_curve: PiecewiseLinear::new(
                vec![0.0, 2.0, 4.0, 6.0, 8.0],
                vec![1.0, 0.95, 0.85, 0.7, 0.4],
            ),
            temperature_curve: PiecewiseLinear::new(
                vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
                vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0],
            ),
            rainfall_curve: PiecewiseLinear::new(
                vec![2.0, 10.0, 20.0, 50.0],
                vec![1.0, 0.8, 0.5, 0.0],
            ),
            wind_curve: PiecewiseLinear::new(vec![5.0, 10.0, 20.0], vec![1.0, 0.7, 0.0]),
            hour_effectiveness: [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.9, 0.8, 0.7, 0.6],
            absence_slope: 0.25,
            wage_ratio: 0.1,
            material_ratio: 0.9,
            min_work_hours: 4.0,
            max_work_hours: 12.0,
            max_order: [500.0, 2_000.0, 300.0],
            payment_lead_days: [2, 4],
            noise: NoiseLevels::default(),
        }
    }
}

/// One failed invariant, reported against the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.to_string(),
                message: message.into(),
            });
        }
    }

    fn nonneg(&mut self, field: &str, values: &[f64]) {
        let ok = values.iter().all(|v| v.is_finite() && *v >= 0.0);
        self.check(ok, field, "must be finite and >= 0");
    }
}

/// Checks every parameter invariant; an empty report means the set is valid.
pub fn validate(p: &ModelParams) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    c.check(p.floors >= 1, "floors", "must be >= 1");
    c.check(p.zones_per_floor >= 1, "zones_per_floor", "must be >= 1");
    c.check(
        p.zone_area.is_finite() && p.zone_area > 0.0,
        "zone_area",
        "must be > 0",
    );
    c.check(p.max_days >= 1, "max_days", "must be >= 1");
    c.check(
        (1..=365).contains(&p.start_day),
        "start_day",
        "must be in 1..=365",
    );
    c.nonneg("init_cash", &[p.init_cash]);
    c.nonneg("floor_payment", &[p.floor_payment]);
    c.nonneg("interest_rate", &[p.interest_rate]);
    c.nonneg("hourly_wage", &p.hourly_wage);
    c.nonneg("overtime_ratio", &[p.overtime_ratio]);
    c.nonneg("inventory_fee", &[p.inventory_fee]);
    c.check(
        p.discount_qty.iter().all(|v| v.is_finite() && *v > 0.0),
        "discount_qty",
        "must be > 0",
    );
    c.check(
        p.min_discount_ratio > 0.0 && p.min_discount_ratio <= 1.0,
        "min_discount_ratio",
        "must be in (0, 1]",
    );
    c.nonneg("workers", &p.workers);
    c.check(
        (0.0..1.0).contains(&p.normal_absence_ratio),
        "normal_absence_ratio",
        "must be in [0, 1)",
    );
    c.nonneg("max_stock", &p.max_stock);
    c.check(
        (0.0..1.0).contains(&p.formwork_loss_ratio),
        "formwork_loss_ratio",
        "must be in [0, 1)",
    );
    c.nonneg("area_per_worker_hour", &p.area_per_worker_hour);
    c.check(
        p.area_per_unit.iter().all(|v| v.is_finite() && *v > 0.0),
        "area_per_unit",
        "must be > 0",
    );
    c.check(
        p.price_units_per_order_unit
            .iter()
            .all(|v| v.is_finite() && *v > 0.0),
        "price_units_per_order_unit",
        "must be > 0",
    );
    for (name, curve, decreasing) in [
        ("fatigue_curve", &p.fatigue_curve, true),
        ("temperature_curve", &p.temperature_curve, false),
        ("rainfall_curve", &p.rainfall_curve, true),
        ("wind_curve", &p.wind_curve, true),
    ] {
        c.check(
            curve.is_well_formed(),
            name,
            "breakpoints must be non-empty, equal length and strictly increasing in x",
        );
        if decreasing {
            c.check(
                curve.non_increasing_y(),
                name,
                "values must be non-increasing",
            );
        }
    }
    let he = &p.hour_effectiveness;
    c.check(
        he[..8].iter().all(|&v| v == 1.0),
        "hour_effectiveness",
        "hours 1-8 must be 1",
    );
    c.check(
        he[7..].windows(2).all(|w| w[0] >= w[1]) && he.iter().all(|&v| v >= 0.0),
        "hour_effectiveness",
        "must be non-negative and non-increasing from hour 8",
    );
    c.nonneg("absence_slope", &[p.absence_slope]);
    c.nonneg("wage_ratio", &[p.wage_ratio]);
    c.nonneg("material_ratio", &[p.material_ratio]);
    c.check(
        p.wage_ratio + p.material_ratio <= 1.0 + 1e-12,
        "wage_ratio",
        "wage_ratio + material_ratio must be <= 1",
    );
    c.check(
        p.min_work_hours >= 0.0 && p.min_work_hours <= p.max_work_hours && p.max_work_hours <= 12.0,
        "max_work_hours",
        "need 0 <= min_work_hours <= max_work_hours <= 12",
    );
    c.nonneg("max_order", &p.max_order);
    c.check(
        p.payment_lead_days[0] >= 1 && p.payment_lead_days[0] <= p.payment_lead_days[1],
        "payment_lead_days",
        "need 1 <= min <= max",
    );
    let n = &p.noise;
    c.check(
        [n.productivity, n.stock_area, n.consumption, n.recycle_loss]
            .iter()
            .all(|v| (0.0..1.0).contains(v)),
        "noise",
        "noise half-widths must be in [0, 1)",
    );
    c.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioId {
    Builtin(u8),
    Custom(String),
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Builtin(n) => write!(f, "{n}"),
            ScenarioId::Custom(s) => f.write_str(s),
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().trim_start_matches('#').parse::<u8>() {
            Ok(n) => ScenarioId::Builtin(n),
            Err(_) => ScenarioId::Custom(s.to_string()),
        })
    }
}

/// A scenario id plus sparse field overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub overrides: toml::Table,
}

impl ScenarioSpec {
    pub fn builtin(id: u8) -> Self {
        Self {
            id: ScenarioId::Builtin(id),
            overrides: toml::Table::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.overrides.insert(key.to_string(), value.into());
        self
    }
}

pub const BUILTIN_NAMES: [&str; 7] = ["CC/RPB", "HBC", "HWC", "HMC", "INF", "IAF", "CNWDP"];

/// Parameters of a built-in scenario before overrides.
pub fn builtin(id: u8) -> Result<ModelParams> {
    let mut p = ModelParams::default();
    match id {
        0 => {}
        1 => p.init_cash = 900_000.0,
        2 => {
            p.start_day = 32;
            // 65% more workers, rounded to whole workers
            p.workers = [20.0, 33.0, 13.0];
        }
        3 => p.min_discount_ratio = 1.0,
        4 => {
            p.floors = 30;
            p.max_days = 180;
        }
        5 => {
            p.zones_per_floor = 15;
            p.floor_payment = 500_000.0;
            p.workers = [15.0, 25.0, 10.0];
        }
        6 => p.workers = [16.0, 16.0, 9.0],
        _ => return Err(Error::UnknownScenario(id.to_string())),
    }
    Ok(p)
}

/// Expands a scenario spec into a validated parameter set.
pub fn load_scenario(spec: &ScenarioSpec) -> Result<ModelParams> {
    let params = match &spec.id {
        ScenarioId::Builtin(id) => {
            let base = builtin(*id)?;
            if spec.overrides.is_empty() {
                base
            } else {
                let mut table =
                    toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
                merge(&mut table, &spec.overrides);
                table
                    .try_into::<ModelParams>()
                    .map_err(|e| Error::Config(e.to_string()))?
            }
        }
        ScenarioId::Custom(name) => spec
            .overrides
            .clone()
            .try_into::<ModelParams>()
            .map_err(|e| Error::Config(format!("custom scenario `{name}`: {e}")))?,
    };
    let report = validate(&params);
    if report.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(report))
    }
}

fn merge(base: &mut toml::Table, overrides: &toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), coerce(base.get(k), v));
            }
        }
    }
}

// Integers written where the base field holds a float (e.g. `init_cash = 900000`).
fn coerce(base: Option<&toml::Value>, v: &toml::Value) -> toml::Value {
    match (base, v) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        (Some(toml::Value::Array(b)), toml::Value::Array(a)) => {
            let proto = b.first();
            toml::Value::Array(a.iter().map(|x| coerce(proto, x)).collect())
        }
        _ => v.clone(),
    }
}

/// A parsed config file.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub spec: ScenarioSpec,
    pub exogenous: BaselineParams,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    config_from_table(parse_table(text)?)
}

pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

/// Splits a parsed document into the scenario choice, its overrides and
/// the `[exogenous]` table.
pub fn config_from_table(mut table: toml::Table) -> Result<ConfigFile> {
    let id = match table.remove("scenario") {
        None => ScenarioId::Builtin(0),
        Some(toml::Value::Integer(n)) => {
            ScenarioId::Builtin(u8::try_from(n).map_err(|_| Error::UnknownScenario(n.to_string()))?)
        }
        Some(toml::Value::String(s)) => s.parse().unwrap(),
        Some(other) => return Err(Error::Config(format!("bad scenario value {other}"))),
    };
    let exogenous = match table.remove("exogenous") {
        None => BaselineParams::default(),
        Some(toml::Value::Table(o)) => {
            let mut base = toml::Table::try_from(BaselineParams::default())
                .map_err(|e| Error::Config(e.to_string()))?;
            merge(&mut base, &o);
            base.try_into()
                .map_err(|e| Error::Config(format!("[exogenous]: {e}")))?
        }
        Some(_) => return Err(Error::Config("`exogenous` must be a table".into())),
    };
    Ok(ConfigFile {
        spec: ScenarioSpec {
            id,
            overrides: table,
        },
        exogenous,
    })
}

pub fn load_config_file(path: &std::path::Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Renders a complete parameter set in config-file form.
pub fn to_config_string(params: &ModelParams) -> String {
    toml::to_string(params).expect("ModelParams serializes")
}

/// One summary line per built-in scenario.
pub fn list_builtins() -> Vec<String> {
    (0..7u8)
        .map(|id| {
            let p = builtin(id).expect("built-in");
            format!(
                "#{id} {:<7} SDate={:<3} InitCa={:<8} MinDcR={:<4} TF={} pFZ={} pZA={} MaxT={} pFCa={} W=({},{},{})",
                BUILTIN_NAMES[id as usize],
                p.start_day,
                p.init_cash,
                p.min_discount_ratio,
                p.floors,
                p.zones_per_floor,
                p.zone_area,
                p.max_days,
                p.floor_payment,
                p.workers[0],
                p.workers[1],
                p.workers[2],
            )
        })
        .collect()
}
