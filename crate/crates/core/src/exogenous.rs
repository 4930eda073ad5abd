//! Weather and material-price processes, and the noisy forecasts the agent
//! observes.
//!
//! Annual curves are sampled once per simulated project. Weather follows
//! smooth seasonal baselines; rainy dates are Bernoulli draws from a monthly
//! precipitation probability and rain amounts are exponential with a mean
//! chosen so each month's expected total equals its baseline. Temperature
//! rises and wind drops the day before rain, and the reverse happens on the
//! rainy day, both in proportion to the rainfall. Prices are a linear
//! inflation trend times a yearly cosine, with multiplicative white noise.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ModelParams;

/// Forecast horizons.
pub const WEATHER_HORIZON: usize = 3;
pub const PRICE_HORIZON: usize = 5;
pub const CASH_HORIZON: usize = 3;

const MONTH_DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Baselines and noise scales for the exogenous processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// CNY per ton, per m², per m³
    pub base_price: [f64; 3],
    /// calendar day of the seasonal price peak
    pub price_peak_day: [f64; 3],
    /// relative price growth per 365 days
    pub inflation: [f64; 3],
    pub price_amplitude: [f64; 3],
    /// relative std of daily price white noise
    pub price_noise: f64,

    pub temp_mean: f64,
    pub temp_amplitude: f64,
    pub temp_peak_day: f64,
    /// probability that a day of the given month is rainy
    pub rain_probability: [f64; 12],
    /// expected monthly rainfall total (mm)
    pub monthly_rain: [f64; 12],
    pub wind_mean: f64,
    pub wind_amplitude: f64,
    pub wind_peak_day: f64,

    /// °C of temperature shift per mm of rain, and its cap
    pub rain_temp_coef: f64,
    pub rain_temp_cap: f64,
    /// m/s of wind shift per mm of rain, and its cap
    pub rain_wind_coef: f64,
    pub rain_wind_cap: f64,

    /// relative rainfall forecast error std for horizons 1..=3
    pub rain_forecast_noise: [f64; WEATHER_HORIZON],
    /// temperature forecast error std per mm of rainfall forecast error
    pub temp_forecast_coef: f64,
    /// wind forecast error std per mm of rainfall forecast error
    pub wind_forecast_coef: f64,
    /// relative price forecast error std for horizons 1..=5
    pub price_forecast_noise: [f64; PRICE_HORIZON],
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            base_price: [3000.0, 20.0, 480.0],
            price_peak_day: [258.0, 105.0, 0.0],
            inflation: [0.30, 0.05, 0.10],
            price_amplitude: [0.25, 0.05, 0.0],
            price_noise: 0.005,
            temp_mean: 12.0,
            temp_amplitude: 15.0,
            temp_peak_day: 205.0,
            rain_probability: [
                0.05, 0.05, 0.1, 0.15, 0.2, 0.35, 0.45, 0.4, 0.25, 0.15, 0.08, 0.05,
            ],
            monthly_rain: [
                3.0, 5.0, 9.0, 22.0, 35.0, 78.0, 185.0, 160.0, 48.0, 22.0, 9.0, 3.0,
            ],
            wind_mean: 3.0,
            wind_amplitude: 1.5,
            wind_peak_day: 100.0,
            rain_temp_coef: 0.2,
            rain_temp_cap: 5.0,
            rain_wind_coef: 0.1,
            rain_wind_cap: 3.0,
            rain_forecast_noise: [0.2, 0.35, 0.5],
            temp_forecast_coef: 0.2,
            wind_forecast_coef: 0.1,
            price_forecast_noise: [0.005, 0.01, 0.015, 0.02, 0.025],
        }
    }
}

impl BaselineParams {
    /// Everything noise-free: no rain, no price noise, no forecast error.
    pub fn noiseless() -> Self {
        Self {
            price_noise: 0.0,
            rain_probability: [0.0; 12],
            rain_forecast_noise: [0.0; WEATHER_HORIZON],
            price_forecast_noise: [0.0; PRICE_HORIZON],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.base_price.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            bad.push("base_price");
        }
        if self
            .rain_probability
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            bad.push("rain_probability");
        }
        if self
            .monthly_rain
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            bad.push("monthly_rain");
        }
        if self.price_amplitude.iter().any(|a| !(0.0..1.0).contains(a)) {
            bad.push("price_amplitude");
        }
        let scales = [
            self.price_noise,
            self.rain_temp_coef,
            self.rain_temp_cap,
            self.rain_wind_coef,
            self.rain_wind_cap,
            self.temp_forecast_coef,
            self.wind_forecast_coef,
        ];
        if scales
            .iter()
            .chain(&self.rain_forecast_noise)
            .chain(&self.price_forecast_noise)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            bad.push("noise scales");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid exogenous parameters: {}",
                bad.join(", ")
            )))
        }
    }

    /// Noise-free price of material `m` on absolute calendar day `day`
    /// (day 366 is 1 January of the following year).
    ///
    /// `price_peak_day` is where the trend-times-season product peaks, so the
    /// cosine itself is centred slightly earlier to offset the rising trend.
    pub fn price_baseline(&self, m: usize, day: f64) -> f64 {
        self.price_with_centre(m, day, self.cosine_centre(m))
    }

    fn price_with_centre(&self, m: usize, day: f64, centre: f64) -> f64 {
        let trend = 1.0 + self.inflation[m] * day / 365.0;
        let season = 1.0 + self.price_amplitude[m] * (2.0 * PI * (day - centre) / 365.0).cos();
        self.base_price[m] * trend * season
    }

    /// Day of the cosine maximum that puts the product's stationary point on
    /// `price_peak_day`. Solved by bisection on the lag in [0, 91] days.
    fn cosine_centre(&self, m: usize) -> f64 {
        let (a, amp, peak) = (
            self.inflation[m] / 365.0,
            self.price_amplitude[m],
            self.price_peak_day[m],
        );
        if a == 0.0 || amp == 0.0 {
            return peak;
        }
        let w = 2.0 * PI / 365.0;
        // slope of the product at the peak as a function of the lag x
        let slope =
            |x: f64| a * (1.0 + amp * (w * x).cos()) - (1.0 + a * peak) * amp * w * (w * x).sin();
        let (mut lo, mut hi) = (0.0, 91.0);
        if slope(hi) > 0.0 {
            return peak - hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        peak - 0.5 * (lo + hi)
    }

    pub fn temperature_baseline(&self, day: f64) -> f64 {
        self.temp_mean + self.temp_amplitude * (2.0 * PI * (day - self.temp_peak_day) / 365.0).cos()
    }

    pub fn wind_baseline(&self, day: f64) -> f64 {
        (self.wind_mean
            + self.wind_amplitude * (2.0 * PI * (day - self.wind_peak_day) / 365.0).cos())
        .max(0.0)
    }
}

/// Month index 0..12 of an absolute calendar day (wrapping every 365 days).
pub fn month_of(day: u32) -> usize {
    let mut doy = (day.max(1) - 1) % 365;
    for (m, len) in MONTH_DAYS.iter().enumerate() {
        if doy < *len {
            return m;
        }
        doy -= len;
    }
    11
}

/// Weather of one day.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Weather {
    /// °C
    pub temperature: f64,
    /// mm
    pub rainfall: f64,
    /// m/s
    pub wind: f64,
}

/// Sampled weather and price curves for one project, indexed by project day
/// `t >= 1` (calendar day `start_day + t - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualCurves {
    pub start_day: u32,
    pub temperature: Vec<f64>,
    pub rainfall: Vec<f64>,
    pub wind: Vec<f64>,
    /// prices per material, CNY per price unit
    pub prices: [Vec<f64>; 3],
}

impl AnnualCurves {
    /// Number of project days covered.
    pub fn len(&self) -> usize {
        self.temperature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperature.is_empty()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.len() {
            Err(Error::DayOutOfRange {
                day: t,
                len: self.len(),
            })
        } else {
            Ok(t - 1)
        }
    }

    pub fn weather(&self, t: usize) -> Result<Weather> {
        let i = self.index(t)?;
        Ok(Weather {
            temperature: self.temperature[i],
            rainfall: self.rainfall[i],
            wind: self.wind[i],
        })
    }

    pub fn price(&self, t: usize) -> Result<[f64; 3]> {
        let i = self.index(t)?;
        Ok([self.prices[0][i], self.prices[1][i], self.prices[2][i]])
    }

    pub fn calendar_day(&self, t: usize) -> u32 {
        self.start_day + t as u32 - 1
    }

    /// Writes `day,Tp,Rf,Ws,RbPr,FwPr,CcPr`, one row per project day.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "Tp", "Rf", "Ws", "RbPr", "FwPr", "CcPr"])?;
        for i in 0..self.len() {
            w.write_record([
                self.calendar_day(i + 1).to_string(),
                self.temperature[i].to_string(),
                self.rainfall[i].to_string(),
                self.wind[i].to_string(),
                self.prices[0][i].to_string(),
                self.prices[1][i].to_string(),
                self.prices[2][i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

/// Days of curve needed for a project: the full duration plus the longest
/// forecast horizon.
pub fn curve_len(params: &ModelParams) -> usize {
    params.max_days as usize + PRICE_HORIZON + 1
}

/// Samples one project's weather and price curves.
pub fn sample_year<R: Rng + ?Sized>(
    baseline: &BaselineParams,
    start_day: u32,
    len: usize,
    rng: &mut R,
) -> AnnualCurves {
    // one extra day so the last day's "rain tomorrow" adjustment is defined
    let n = len + 1;
    let days: Vec<u32> = (0..n as u32).map(|i| start_day + i).collect();

    let mut rainfall = Vec::with_capacity(n);
    for &d in &days {
        let m = month_of(d);
        let p = baseline.rain_probability[m];
        let rainy = rng.random::<f64>() < p;
        let amount: f64 = Exp1.sample(rng);
        if rainy && p > 0.0 {
            let mean = baseline.monthly_rain[m] / (p * MONTH_DAYS[m] as f64);
            rainfall.push(mean * amount);
        } else {
            rainfall.push(0.0);
        }
    }

    let mut temperature: Vec<f64> = days
        .iter()
        .map(|&d| baseline.temperature_baseline(d as f64))
        .collect();
    let mut wind: Vec<f64> = days
        .iter()
        .map(|&d| baseline.wind_baseline(d as f64))
        .collect();
    for i in 0..n {
        let rf = rainfall[i];
        if rf > 0.0 {
            let dt = (baseline.rain_temp_coef * rf).min(baseline.rain_temp_cap);
            let dw = (baseline.rain_wind_coef * rf).min(baseline.rain_wind_cap);
            temperature[i] -= dt;
            wind[i] += dw;
            if i > 0 {
                temperature[i - 1] += dt;
                wind[i - 1] -= dw;
            }
        }
    }
    for w in &mut wind {
        *w = w.max(0.0);
    }

    let prices = std::array::from_fn(|m| {
        let centre = baseline.cosine_centre(m);
        days.iter()
            .take(len)
            .map(|&d| {
                let z: f64 = StandardNormal.sample(rng);
                let base = baseline.price_with_centre(m, d as f64, centre);
                (base * (1.0 + baseline.price_noise * z)).max(0.5 * base)
            })
            .collect::<Vec<_>>()
    });

    rainfall.truncate(len);
    temperature.truncate(len);
    wind.truncate(len);
    AnnualCurves {
        start_day,
        temperature,
        rainfall,
        wind,
        prices,
    }
}

/// Three-day weather forecast for days `t+1..=t+3`.
///
/// Rainfall gets a relative error that grows with the horizon; temperature
/// and wind get additive errors whose std is proportional to that day's
/// absolute rainfall error.
pub fn forecast_weather<R: Rng + ?Sized>(
    curves: &AnnualCurves,
    baseline: &BaselineParams,
    t: usize,
    rng: &mut R,
) -> Result<[Weather; WEATHER_HORIZON]> {
    curves.weather(t + WEATHER_HORIZON)?;
    let mut out = [Weather::default(); WEATHER_HORIZON];
    for (h, slot) in out.iter_mut().enumerate() {
        let truth = curves.weather(t + h + 1)?;
        let e_rain: f64 = StandardNormal.sample(rng);
        let e_temp: f64 = StandardNormal.sample(rng);
        let e_wind: f64 = StandardNormal.sample(rng);
        let rain = (truth.rainfall * (1.0 + baseline.rain_forecast_noise[h] * e_rain)).max(0.0);
        let err = (rain - truth.rainfall).abs();
        *slot = Weather {
            temperature: truth.temperature + baseline.temp_forecast_coef * err * e_temp,
            rainfall: rain,
            wind: (truth.wind + baseline.wind_forecast_coef * err * e_wind).max(0.0),
        };
    }
    Ok(out)
}

/// Five-day price forecast for days `t+1..=t+5`, floored at half the truth.
pub fn forecast_price<R: Rng + ?Sized>(
    curves: &AnnualCurves,
    baseline: &BaselineParams,
    t: usize,
    rng: &mut R,
) -> Result<[[f64; 3]; PRICE_HORIZON]> {
    curves.price(t + PRICE_HORIZON)?;
    let mut out = [[0.0; 3]; PRICE_HORIZON];
    for (h, slot) in out.iter_mut().enumerate() {
        let truth = curves.price(t + h + 1)?;
        for m in 0..3 {
            let z: f64 = StandardNormal.sample(rng);
            slot[m] = (truth[m] * (1.0 + baseline.price_forecast_noise[h] * z)).max(0.5 * truth[m]);
        }
    }
    Ok(out)
}

/// What the cash-inflow forecast needs to know about the project.
#[derive(Debug, Clone, Copy)]
pub struct CashView<'a> {
    pub t: usize,
    pub cash: f64,
    /// application days of milestone payments not yet received
    pub pending_applications: &'a [usize],
}

/// Three-day inflow forecast: daily interest on current cash plus a milestone
/// payment on the day each pending payment is expected (application day + 3;
/// overdue payments are expected tomorrow).
pub fn forecast_cash_inflow(view: CashView<'_>, params: &ModelParams) -> [f64; CASH_HORIZON] {
    let interest = params.interest_rate * view.cash;
    let mut out = [interest; CASH_HORIZON];
    for &applied in view.pending_applications {
        let expected = (applied + 3).max(view.t + 1);
        if expected <= view.t + CASH_HORIZON {
            out[expected - view.t - 1] += params.floor_payment;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn flat_concrete_price_is_pure_inflation() {
        let b = BaselineParams::noiseless();
        let c = sample_year(&b, 151, 160, &mut rng(1));
        for t in 1..=c.len() {
            let d = c.calendar_day(t) as f64;
            let expected = 480.0 * (1.0 + 0.10 * d / 365.0);
            assert!((c.price(t).unwrap()[2] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn no_rain_leaves_smooth_temperature() {
        let b = BaselineParams::noiseless();
        let c = sample_year(&b, 1, 365, &mut rng(2));
        assert!(c.rainfall.iter().all(|&r| r == 0.0));
        for t in 1..=c.len() {
            let d = c.calendar_day(t) as f64;
            assert_eq!(c.temperature[t - 1], b.temperature_baseline(d));
        }
    }

    #[test]
    fn rebar_peaks_mid_september() {
        let b = BaselineParams::noiseless();
        let c = sample_year(&b, 1, 365, &mut rng(3));
        let (argmax, _) = c.prices[0]
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
            );
        let peak_day = c.calendar_day(argmax + 1) as i64;
        // 15 September
        assert!((peak_day - 258).abs() <= 10, "peak on day {peak_day}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = BaselineParams::default();
        let a = sample_year(&b, 151, 160, &mut rng(9));
        let c = sample_year(&b, 151, 160, &mut rng(9));
        assert_eq!(a, c);
    }

    #[test]
    fn rain_days_shift_temperature_and_wind() {
        let b = BaselineParams {
            rain_probability: [1.0; 12],
            ..BaselineParams::noiseless()
        };
        let c = sample_year(&b, 180, 30, &mut rng(4));
        assert!(c.rainfall.iter().all(|&r| r > 0.0));
        assert!(c.wind.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn zero_noise_forecasts_are_exact() {
        let b = BaselineParams {
            rain_forecast_noise: [0.0; 3],
            price_forecast_noise: [0.0; 5],
            ..BaselineParams::default()
        };
        let c = sample_year(&b, 151, 40, &mut rng(5));
        let w = forecast_weather(&c, &b, 10, &mut rng(6)).unwrap();
        for h in 0..3 {
            assert_eq!(w[h], c.weather(11 + h).unwrap());
        }
        let p = forecast_price(&c, &b, 10, &mut rng(6)).unwrap();
        for h in 0..5 {
            assert_eq!(p[h], c.price(11 + h).unwrap());
        }
    }

    #[test]
    fn dry_days_have_exact_temperature_forecast() {
        let b = BaselineParams {
            rain_probability: [0.0; 12],
            ..BaselineParams::default()
        };
        let c = sample_year(&b, 151, 40, &mut rng(7));
        let mut r = rng(8);
        for t in 1..30 {
            let w = forecast_weather(&c, &b, t, &mut r).unwrap();
            for h in 0..3 {
                let truth = c.weather(t + h + 1).unwrap();
                assert_eq!(w[h].temperature, truth.temperature);
                assert_eq!(w[h].wind, truth.wind);
            }
        }
    }

    #[test]
    fn forecast_past_curve_end_is_an_error() {
        let b = BaselineParams::default();
        let c = sample_year(&b, 151, 10, &mut rng(1));
        assert!(forecast_weather(&c, &b, 8, &mut rng(2)).is_err());
        assert!(forecast_price(&c, &b, 6, &mut rng(2)).is_err());
        assert!(forecast_price(&c, &b, 5, &mut rng(2)).is_ok());
    }

    #[test]
    fn cash_forecast_cases() {
        let p = ModelParams::default();
        let idle = forecast_cash_inflow(
            CashView {
                t: 5,
                cash: 1e6,
                pending_applications: &[],
            },
            &p,
        );
        for v in idle {
            assert!((v - 100.0).abs() < 1e-9);
        }
        let pending = forecast_cash_inflow(
            CashView {
                t: 5,
                cash: 1e6,
                pending_applications: &[4],
            },
            &p,
        );
        assert!((pending[1] - 400_100.0).abs() < 1e-6);
        assert!((pending[0] - 100.0).abs() < 1e-9);
        let broke = forecast_cash_inflow(
            CashView {
                t: 5,
                cash: 0.0,
                pending_applications: &[],
            },
            &p,
        );
        assert_eq!(broke, [0.0; 3]);
    }

    #[test]
    fn months() {
        assert_eq!(month_of(1), 0);
        assert_eq!(month_of(31), 0);
        assert_eq!(month_of(32), 1);
        assert_eq!(month_of(151), 4);
        assert_eq!(month_of(365), 11);
        assert_eq!(month_of(366), 0);
    }
}
