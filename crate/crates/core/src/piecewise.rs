use serde::{Deserialize, Serialize};

/// Piecewise-linear function given by breakpoints, held constant outside the
/// first and last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseLinear {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.x.len();
        if n == 0 {
            return 1.0;
        }
        if v <= self.x[0] {
            return self.y[0];
        }
        if v >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // first breakpoint strictly greater than v
        let hi = self.x.partition_point(|&b| b <= v);
        let lo = hi - 1;
        let (x0, x1) = (self.x[lo], self.x[hi]);
        let (y0, y1) = (self.y[lo], self.y[hi]);
        y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    }

    pub fn strictly_increasing_x(&self) -> bool {
        self.x.windows(2).all(|w| w[0] < w[1])
    }

    pub fn non_increasing_y(&self) -> bool {
        self.y.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn is_well_formed(&self) -> bool {
        !self.x.is_empty()
            && self.x.len() == self.y.len()
            && self.x.iter().chain(&self.y).all(|v| v.is_finite())
            && self.strictly_increasing_x()
    }
}
