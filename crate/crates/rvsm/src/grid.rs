//! Axis-aligned query grids written as `xmin:xmax:step,ymin:ymax:step,zmin:zmax:step`.

use std::str::FromStr;

use rvsm_core::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    /// Number of samples `min + i·step ≤ max`; zero when `max < min`.
    pub fn len(&self) -> usize {
        if self.max < self.min {
            return 0;
        }
        // Tolerance keeps endpoints like 0:1:0.1 inclusive despite rounding.
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub axes: [Axis; 3],
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points with x varying slowest and z fastest.
    pub fn points(&self) -> Vec<Point3> {
        let [ax, ay, az] = self.axes;
        let mut out = Vec::with_capacity(self.len());
        for i in 0..ax.len() {
            for j in 0..ay.len() {
                for k in 0..az.len() {
                    out.push([ax.value(i), ay.value(j), az.value(k)]);
                }
            }
        }
        out
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("grid needs three axes min:max:step separated by commas, got {s:?}"));
        }
        let mut axes = [Axis { min: 0.0, max: 0.0, step: 1.0 }; 3];
        for (axis, part) in axes.iter_mut().zip(parts) {
            let nums: Vec<f64> = part
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?} in grid axis {part:?}")))
                .collect::<Result<_, _>>()?;
            let [min, max, step] = nums[..] else {
                return Err(format!("grid axis {part:?} is not min:max:step"));
            };
            if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0) {
                return Err(format!("grid axis {part:?} needs finite bounds and a positive step"));
            }
            *axis = Axis { min, max, step };
        }
        let g = GridSpec { axes };
        if g.axes.iter().map(|a| a.len() as f64).product::<f64>() > 1e9 {
            return Err("grid has more than 10^9 points".to_string());
        }
        Ok(g)
    }
}
