//! Planar curves sampled on a time grid.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Piecewise-linear curve through `points[i]` at `times[i]`. Times start at
/// zero and strictly increase; the curve is constant after its duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCurve {
    times: Vec<f64>,
    points: Vec<Complex64>,
}

impl ParamCurve {
    pub fn new(times: Vec<f64>, points: Vec<Complex64>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return Err(Error::InvalidPath("time grid and positions differ in length".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath("time grid must be strictly increasing".into()));
        }
        Ok(ParamCurve { times, points })
    }

    /// Curve that sits at `z` for time `duration`.
    pub fn constant(z: Complex64, duration: f64) -> Self {
        if duration > 0.0 {
            ParamCurve { times: vec![0.0, duration], points: vec![z, z] }
        } else {
            ParamCurve { times: vec![0.0], points: vec![z] }
        }
    }

    /// Curve through `points` at unit speed in the sample index, scaled so the
    /// total duration is `duration`.
    pub fn uniform(points: Vec<Complex64>, duration: f64) -> Result<Self> {
        let n = points.len();
        if n == 1 {
            return Ok(ParamCurve { times: vec![0.0], points });
        }
        let times = (0..n).map(|i| duration * i as f64 / (n - 1) as f64).collect();
        Self::new(times, points)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn start(&self) -> Complex64 {
        self.points[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.points.last().unwrap()
    }

    /// Position at time `t`, clamped to the ends.
    pub fn eval(&self, t: f64) -> Complex64 {
        if t <= 0.0 {
            return self.points[0];
        }
        if t >= self.duration() {
            return self.end();
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let u = (t - t0) / (t1 - t0);
        self.points[j - 1] + (self.points[j] - self.points[j - 1]) * u
    }

    pub fn map_points<F: Fn(Complex64) -> Complex64>(&self, f: F) -> ParamCurve {
        ParamCurve {
            times: self.times.clone(),
            points: self.points.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Same positions with times multiplied by `factor > 0`.
    pub fn time_scaled(&self, factor: f64) -> ParamCurve {
        ParamCurve {
            times: self.times.iter().map(|t| t * factor).collect(),
            points: self.points.clone(),
        }
    }

    /// Prefix of the curve up to time `t` (ending exactly at `eval(t)`).
    pub fn truncated(&self, t: f64) -> ParamCurve {
        if t >= self.duration() {
            return self.clone();
        }
        if t <= 0.0 {
            return ParamCurve { times: vec![0.0], points: vec![self.points[0]] };
        }
        let j = self.times.partition_point(|&s| s < t);
        let mut times = self.times[..j].to_vec();
        let mut points = self.points[..j].to_vec();
        times.push(t);
        points.push(self.eval(t));
        ParamCurve { times, points }
    }

    /// Inserts `k - 1` equally spaced samples inside every segment.
    pub fn refined(&self, k: usize) -> ParamCurve {
        let k = k.max(1);
        let mut times = Vec::with_capacity((self.len() - 1) * k + 1);
        let mut points = Vec::with_capacity(times.capacity());
        times.push(self.times[0]);
        points.push(self.points[0]);
        for w in 1..self.len() {
            let (t0, t1) = (self.times[w - 1], self.times[w]);
            let (p0, p1) = (self.points[w - 1], self.points[w]);
            for j in 1..=k {
                let u = j as f64 / k as f64;
                times.push(if j == k { t1 } else { t0 + (t1 - t0) * u });
                points.push(if j == k { p1 } else { p0 + (p1 - p0) * u });
            }
        }
        ParamCurve { times, points }
    }

    /// `t,x,y` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, p) in self.times.iter().zip(&self.points) {
            writeln!(w, "{t},{},{}", p.re, p.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn eval_clamps_and_interpolates() {
        let c = ParamCurve::new(vec![0.0, 1.0, 3.0], vec![z(0.0, 0.0), z(1.0, 0.0), z(1.0, 2.0)]).unwrap();
        assert_eq!(c.duration(), 3.0);
        assert_eq!(c.eval(-1.0), z(0.0, 0.0));
        assert_eq!(c.eval(0.5), z(0.5, 0.0));
        assert_eq!(c.eval(2.0), z(1.0, 1.0));
        assert_eq!(c.eval(10.0), z(1.0, 2.0));
        let t = c.truncated(2.0);
        assert_eq!(t.duration(), 2.0);
        assert_eq!(t.end(), z(1.0, 1.0));
        let r = c.refined(4);
        assert_eq!(r.len(), 9);
        assert_eq!(r.eval(2.5), c.eval(2.5));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ParamCurve::new(vec![0.0, 0.0], vec![z(0.0, 0.0); 2]).is_err());
        assert!(ParamCurve::new(vec![0.1], vec![z(0.0, 0.0)]).is_err());
        assert!(ParamCurve::new(vec![], vec![]).is_err());
    }
}
