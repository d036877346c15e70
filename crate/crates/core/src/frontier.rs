//! Efficient frontier points and CSV rendering.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    /// Expected terminal wealth.
    pub d: f64,
    pub variance: f64,
}

impl FrontierPoint {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
    /// `exact`, `projected_drift` or `compat_printed`.
    pub mode: &'static str,
}

impl FrontierCurve {
    /// CSV with header `d,variance,std_dev,mode`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,variance,std_dev,mode\n");
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.d, p.variance, p.std_dev(), self.mode).unwrap();
        }
        out
    }
}

/// `count` evenly spaced targets on `[lo, hi]`, `lo` included exactly.
pub fn target_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == 0 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
