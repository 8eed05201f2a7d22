//! MSI cut-off sweeps and the fits used to locate the breaking point.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Restrict the task to classes with cMSI at or below the cut-off.
    IncludeClasses,
    /// Keep every class; add virtual data only for classes at or below the cut-off.
    #[default]
    IncludeVirtualOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub msi_cutoff: f64,
    pub delta_f1: f64,
    pub included_classes: Vec<u32>,
}

/// One evaluation request handed to the sweep callback.
#[derive(Debug, Clone, Copy)]
pub struct SweepStep<'a> {
    pub index: usize,
    pub mode: SweepMode,
    pub cutoff: f64,
    /// Classes with cMSI <= cutoff, ascending.
    pub included: &'a [u32],
}

/// Evaluates `evaluate` at every distinct cMSI value. Steps run in parallel
/// and come back in ascending cut-off order.
pub fn cutoff_sweep<F>(class_cmsi: &BTreeMap<u32, f64>, mode: SweepMode, evaluate: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(&SweepStep) -> Result<f64> + Sync,
{
    if class_cmsi.is_empty() {
        return Err(Error::EmptyClassSet);
    }
    if let Some(v) = class_cmsi.values().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("cMSI {v}")));
    }
    let mut grid: Vec<f64> = class_cmsi.values().copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let included: Vec<Vec<u32>> = grid
        .iter()
        .map(|&c| class_cmsi.iter().filter(|(_, &v)| v <= c).map(|(&k, _)| k).collect())
        .collect();
    let results = par::map_range(grid.len(), |i| {
        evaluate(&SweepStep {
            index: i,
            mode,
            cutoff: grid[i],
            included: &included[i],
        })
    });
    grid.into_iter()
        .zip(included)
        .zip(results)
        .map(|((msi_cutoff, included_classes), delta)| {
            Ok(SweepPoint {
                msi_cutoff,
                delta_f1: delta?,
                included_classes,
            })
        })
        .collect()
}

fn check_points(points: &[(f64, f64)], needed: usize) -> Result<()> {
    if points.len() < needed {
        return Err(Error::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFiniteValue("fit input".into()));
    }
    Ok(())
}

/// Least-squares cubic B-spline with clamped ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline {
    /// Full knot vector, end knots repeated four times.
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// First x where the curve crosses zero from above, if any.
    pub zero_crossing: Option<f64>,
}

const DEGREE: usize = 3;
const CROSSING_GRID: usize = 10_000;

impl Spline {
    pub fn x_range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn span(&self, x: f64) -> usize {
        let last = self.coefficients.len() - 1;
        // knots[DEGREE..=last+1] bound the polynomial pieces
        let mut k = DEGREE;
        while k < last && x >= self.knots[k + 1] {
            k += 1;
        }
        k
    }

    /// The four non-zero basis values at `x` for knot span `k`.
    fn basis(knots: &[f64], k: usize, x: f64) -> [f64; DEGREE + 1] {
        let mut n = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - knots[k + 1 - j];
            right[j] = knots[k + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        n
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.span(x);
        let n = Self::basis(&self.knots, k, x);
        (0..=DEGREE).map(|i| n[i] * self.coefficients[k - DEGREE + i]).sum()
    }

    /// Evenly spaced samples over the fitted range.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.x_range();
        (0..n)
            .map(|i| {
                let x = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                (x, self.eval(x))
            })
            .collect()
    }
}

/// First downward zero crossing of `f` on `[a, b]`, by dense scan and bisection.
pub fn first_down_crossing(f: impl Fn(f64) -> f64, a: f64, b: f64, grid: usize) -> Option<f64> {
    let at = |i: usize| a + (b - a) * i as f64 / grid as f64;
    let mut prev = f(a);
    for i in 1..=grid {
        let x = at(i);
        let y = f(x);
        if prev > 0.0 && y <= 0.0 {
            if y == 0.0 {
                return Some(x);
            }
            let (mut lo, mut hi) = (at(i - 1), x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = y;
    }
    None
}

/// Fits a cubic B-spline with `n_knots` uniform interior knots over the x
/// range. With fewer distinct points than basis functions the minimum-norm
/// least-squares solution is used.
pub fn fit_spline(points: &[(f64, f64)], n_knots: usize) -> Result<Spline> {
    check_points(points, n_knots + 2)?;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateX);
    }
    let (a, b) = (xs[0], xs[xs.len() - 1]);
    let mut knots = vec![a; DEGREE + 1];
    knots.extend((1..=n_knots).map(|j| a + (b - a) * j as f64 / (n_knots + 1) as f64));
    knots.extend([b; DEGREE + 1]);
    let n_basis = n_knots + DEGREE + 1;
    let mut spline = Spline {
        knots,
        coefficients: vec![0.0; n_basis],
        zero_crossing: None,
    };

    let mut design = DMatrix::zeros(points.len(), n_basis);
    for (row, &(x, _)) in points.iter().enumerate() {
        let k = spline.span(x);
        let n = Spline::basis(&spline.knots, k, x);
        for i in 0..=DEGREE {
            design[(row, k - DEGREE + i)] = n[i];
        }
    }
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    let coef = svd.solve(&rhs, tol).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    spline.coefficients = coef.iter().copied().collect();
    spline.zero_crossing = first_down_crossing(|x| spline.eval(x), a, b, CROSSING_GRID);
    Ok(spline)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `-intercept / slope`; absent for a flat line.
    pub zero_crossing: Option<f64>,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares line.
pub fn fit_line_zero_crossing(points: &[(f64, f64)]) -> Result<LineFit> {
    check_points(points, 2)?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateX);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(LineFit {
        slope,
        intercept,
        zero_crossing: (slope != 0.0).then(|| -intercept / slope),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided p-value from Student's t with n - 2 degrees of freedom.
    pub p: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t2 = r * r * df / (1.0 - r * r);
        regularized_incomplete_beta(df / (df + t2), 0.5 * df, 0.5)
    };
    Ok(Pearson { r, p, n })
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via Lentz's continued fraction, tolerance 1e-12.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const TOL: f64 = 1e-12;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < TOL {
            break;
        }
    }
    h
}

/// Which points feed the spline: one per cut-off, or one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineInput {
    #[default]
    PerCutoff,
    PerClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: SweepMode,
    pub points: Vec<SweepPoint>,
    pub spline_input: SplineInput,
    pub spline: Option<Spline>,
    /// Why the spline could not be fitted, when it is absent.
    pub spline_error: Option<String>,
    pub line: LineFit,
    pub pearson: Pearson,
    /// Zero crossing of the line fit.
    pub zero_crossing: Option<f64>,
}

impl SweepReport {
    /// Fits the line and correlation to the sweep points and the spline to
    /// `spline_points` (the sweep points themselves when `None`).
    pub fn build(
        mode: SweepMode,
        points: Vec<SweepPoint>,
        spline_input: SplineInput,
        spline_points: Option<&[(f64, f64)]>,
        n_knots: usize,
    ) -> Result<SweepReport> {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.msi_cutoff, p.delta_f1)).collect();
        let line = fit_line_zero_crossing(&xy)?;
        let (x, y): (Vec<f64>, Vec<f64>) = xy.iter().copied().unzip();
        let pearson = pearson(&x, &y)?;
        let (spline, spline_error) = match fit_spline(spline_points.unwrap_or(&xy), n_knots) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(SweepReport {
            mode,
            points,
            spline_input,
            spline,
            spline_error,
            zero_crossing: line.zero_crossing,
            line,
            pearson,
        })
    }

    /// Writes `points.csv` (cutoff,delta_f1), `spline.csv` (x,y_spline) and
    /// `line.csv` (slope,intercept,zero_crossing) into `dir`.
    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut points = String::from("cutoff,delta_f1\n");
        for p in &self.points {
            let _ = writeln!(points, "{},{}", p.msi_cutoff, p.delta_f1);
        }
        let mut spline = String::from("x,y_spline\n");
        if let Some(s) = &self.spline {
            for (x, y) in s.sample(201) {
                let _ = writeln!(spline, "{x},{y}");
            }
        }
        let zc = self.line.zero_crossing.map(|z| z.to_string()).unwrap_or_default();
        let line = format!("slope,intercept,zero_crossing\n{},{},{zc}\n", self.line.slope, self.line.intercept);
        for (name, text) in [("points.csv", points), ("spline.csv", spline), ("line.csv", line)] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
