//! Post-processing: radial error bars, asymptote fits, moment-matrix
//! positivity, the FRG flow and the `ABAB` skew-symmetry check.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::search::{CriticalCurve, SeparationKind};
use crate::stats::Estimate;
use crate::word::{dihedral_vanishes, Word};

/// Radius estimate on one ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialEstimate {
    pub phi: f64,
    pub mean: f64,
    /// `[m(m−1)]^{−1/2} [Σ(r_a − r̄)²]^{1/2}`; 0 when `m = 1`.
    pub sigma: f64,
    pub discretisation: f64,
    pub m: usize,
}

impl RadialEstimate {
    pub fn single_sample(&self) -> bool {
        self.m == 1
    }

    pub fn total_error(&self) -> f64 {
        self.sigma + self.discretisation
    }

    pub fn point(&self) -> (f64, f64) {
        (self.mean * self.phi.cos(), self.mean * self.phi.sin())
    }
}

pub fn radial_error(
    phi: f64,
    samples: &[f64],
    discretisation: f64,
) -> Result<RadialEstimate, AnalysisError> {
    let m = samples.len();
    if m == 0 {
        return Err(AnalysisError::NoSamples);
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let sigma = if m > 1 {
        let ss: f64 = samples.iter().map(|r| (r - mean).powi(2)).sum();
        (ss / (m * (m - 1)) as f64).sqrt()
    } else {
        0.0
    };
    Ok(RadialEstimate {
        phi,
        mean,
        sigma,
        discretisation,
        m,
    })
}

/// One estimate per ray of the curve.
pub fn curve_estimates(curve: &CriticalCurve) -> Vec<RadialEstimate> {
    curve
        .rays
        .iter()
        .map(|ray| {
            radial_error(ray.phi, &ray.radii, ray.discretisation).expect("rays are never empty")
        })
        .collect()
}

/// Tab-separated critical-curve table.
pub fn write_curve_table<W: Write>(estimates: &[RadialEstimate], mut w: W) -> std::io::Result<()> {
    writeln!(w, "phi\tr_mean\tsigma_r\tdelta_disc\tm")?;
    for e in estimates {
        writeln!(
            w,
            "{:.10}\t{:.10}\t{:.10}\t{:.10}\t{}",
            e.phi, e.mean, e.sigma, e.discretisation, e.m
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `h → +∞`
    Plus,
    /// `h → −∞`
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub direction: Direction,
    pub lambda: f64,
    pub lambda_stderr: f64,
    /// `λ ± 3σ_λ`.
    pub lambda_interval: (f64, f64),
    /// `arctan λ` in degrees.
    pub theta_deg: f64,
    pub g0: f64,
    pub h_cut: f64,
    pub points: usize,
    /// RMS of `g − (λh + g0)` over the fitted points.
    pub residual: f64,
}

/// A curve point with its error, as fed to [`fit_line`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub g: f64,
    pub h: f64,
    pub sigma: f64,
}

/// Points of the curve: one per ray, with the radial total error.
pub fn curve_points(curve: &CriticalCurve) -> Vec<CurvePoint> {
    let mut out: Vec<CurvePoint> = curve_estimates(curve)
        .iter()
        .map(|e| {
            let (g, h) = e.point();
            CurvePoint {
                g,
                h,
                sigma: e.total_error(),
            }
        })
        .collect();
    // Angular dipoles carry their arc as the error.
    for (p, ray) in out.iter_mut().zip(&curve.rays) {
        if ray
            .dipoles
            .iter()
            .all(|&i| curve.dipoles[i].kind == SeparationKind::Angular)
        {
            p.sigma = p.sigma.max(ray.discretisation);
        }
    }
    out
}

/// Weighted least squares `g = λh + g0` (weights `1/σ²`; unweighted when
/// every `σ` is zero). The covariance is inflated by `χ²/dof` when that
/// exceeds one.
pub fn fit_line(points: &[CurvePoint]) -> Result<(f64, f64, f64, f64), AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::InsufficientPoints {
            needed: 3,
            found: points.len(),
        });
    }
    let weighted = points.iter().all(|p| p.sigma > 0.0);
    let w = |p: &CurvePoint| {
        if weighted {
            1.0 / (p.sigma * p.sigma)
        } else {
            1.0
        }
    };
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let wi = w(p);
        s += wi;
        sx += wi * p.h;
        sy += wi * p.g;
        sxx += wi * p.h * p.h;
        sxy += wi * p.h * p.g;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return Err(AnalysisError::InsufficientPoints {
            needed: 3,
            found: points.len(),
        });
    }
    let lambda = (s * sxy - sx * sy) / det;
    let g0 = (sxx * sy - sx * sxy) / det;
    let dof = (points.len() - 2) as f64;
    let mut chi2 = 0.0;
    let mut ss = 0.0;
    for p in points {
        let r = p.g - (lambda * p.h + g0);
        chi2 += w(p) * r * r;
        ss += r * r;
    }
    let scale = if weighted {
        (chi2 / dof).max(1.0)
    } else {
        chi2 / dof
    };
    let var_lambda = s / det * scale;
    let rms = (ss / points.len() as f64).sqrt();
    Ok((lambda, var_lambda.sqrt(), g0, rms))
}

/// Straight-line asymptote of the curve for `h → ±∞`. `h_cut` defaults to
/// the median `|h|` of the points in that direction (the outer half).
pub fn fit_asymptote(
    curve: &CriticalCurve,
    direction: Direction,
    h_cut: Option<f64>,
) -> Result<AsymptoteFit, AnalysisError> {
    fit_asymptote_points(&curve_points(curve), direction, h_cut)
}

pub fn fit_asymptote_points(
    points: &[CurvePoint],
    direction: Direction,
    h_cut: Option<f64>,
) -> Result<AsymptoteFit, AnalysisError> {
    let side = |p: &&CurvePoint| match direction {
        Direction::Plus => p.h > 0.0,
        Direction::Minus => p.h < 0.0,
    };
    let mut mags: Vec<f64> = points.iter().filter(side).map(|p| p.h.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let h_cut = match h_cut {
        Some(c) => c,
        None if mags.is_empty() => 0.0,
        // Strictly below the median so the median point itself is kept.
        None => {
            let med = mags[mags.len() / 2];
            med - 1e-12 * (1.0 + med)
        }
    };
    let selected: Vec<CurvePoint> = points
        .iter()
        .filter(side)
        .filter(|p| p.h.abs() > h_cut)
        .copied()
        .collect();
    let (lambda, se, g0, residual) = fit_line(&selected)?;
    Ok(AsymptoteFit {
        direction,
        lambda,
        lambda_stderr: se,
        lambda_interval: (lambda - 3.0 * se, lambda + 3.0 * se),
        theta_deg: lambda.atan().to_degrees(),
        g0,
        h_cut,
        points: selected.len(),
        residual,
    })
}

/// Moment estimates by canonical (cyclic) word.
pub trait Moments {
    fn moment(&self, w: &Word) -> Option<Estimate>;
}

impl Moments for HashMap<Word, Estimate> {
    fn moment(&self, w: &Word) -> Option<Estimate> {
        self.get(&w.canonical())
            .or_else(|| self.get(&w.reversed().canonical()))
            .copied()
    }
}

fn exact(v: f64) -> Estimate {
    Estimate {
        mean: v,
        stderr: 0.0,
        tau_int: 0.5,
        samples: 0,
    }
}

/// `E tr w`, with the identity and dihedrally vanishing words filled in.
fn lookup(m: &impl Moments, w: &Word) -> Result<Estimate, AnalysisError> {
    if w.is_identity() {
        return Ok(exact(1.0));
    }
    if dihedral_vanishes(w) {
        return Ok(exact(0.0));
    }
    m.moment(w)
        .ok_or_else(|| AnalysisError::MissingMoment(w.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// `rhs − lhs`; the inequality holds when this is ≥ `−slack`.
    pub margin: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub basis: Vec<String>,
    /// Row-major `𝕄_ij = E tr(W_i W_j*)`, symmetrised.
    pub matrix: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    /// `(i, j, 𝕄_ii 𝕄_jj − 𝕄_ij²)`.
    pub minors: Vec<(usize, usize, f64)>,
    pub negative_minors: Vec<(usize, usize)>,
    pub inequalities: Vec<InequalityCheck>,
}

impl PositivityReport {
    pub fn all_hold(&self) -> bool {
        self.negative_minors.is_empty() && self.inequalities.iter().all(|c| c.holds)
    }
}

/// All words of degree at most `d`.
pub fn words_up_to(d: usize) -> Vec<Word> {
    use crate::word::Letter;
    let mut out = vec![Word::identity()];
    let mut layer = vec![Word::identity()];
    for _ in 0..d {
        layer = layer
            .iter()
            .flat_map(|w| [Letter::A, Letter::B].map(|l| w.concat(&Word::letter(l))))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Moment matrix on `basis`, its spectrum and 2×2 minors, plus the traced
/// inequalities `−t22 ≤ t1111 ≤ t22 ≤ t4` with 3σ slack.
pub fn positivity_report(
    m: &impl Moments,
    basis: &[Word],
) -> Result<PositivityReport, AnalysisError> {
    let k = basis.len();
    let mut mat = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let w = basis[i].concat(&basis[j].reversed());
            mat[(i, j)] = lookup(m, &w)?.mean;
        }
    }
    let mat = (&mat + mat.transpose()) * 0.5;
    let min_eigenvalue = if k > 0 {
        SymmetricEigen::new(mat.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let mut minors = Vec::new();
    let mut negative_minors = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let det = mat[(i, i)] * mat[(j, j)] - mat[(i, j)] * mat[(i, j)];
            // Entries exactly zero by symmetry give trivially nonnegative minors.
            let tol = 1e-12 * (1.0 + mat[(i, i)].abs() * mat[(j, j)].abs());
            if det < -tol {
                negative_minors.push((i, j));
            }
            minors.push((i, j, det));
        }
    }

    let t22 = lookup(m, &Word::from("AABB"))?;
    let t1111 = lookup(m, &Word::from("ABAB"))?;
    let a4 = lookup(m, &Word::from("AAAA"))?;
    let b4 = lookup(m, &Word::from("BBBB"))?;
    let t4 = Estimate {
        mean: 0.5 * (a4.mean + b4.mean),
        stderr: 0.5 * a4.stderr.hypot(b4.stderr),
        ..a4
    };
    let check = |name: &str, lo: &Estimate, hi: &Estimate| {
        let margin = hi.mean - lo.mean;
        let slack = 3.0 * lo.stderr.hypot(hi.stderr);
        InequalityCheck {
            name: name.to_string(),
            margin,
            slack,
            holds: margin >= -slack - 1e-12,
        }
    };
    let neg_t22 = Estimate {
        mean: -t22.mean,
        ..t22
    };
    let inequalities = vec![
        check("-t22 <= t1111", &neg_t22, &t1111),
        check("t1111 <= t22", &t1111, &t22),
        check("t22 <= t4", &t22, &t4),
    ];
    Ok(PositivityReport {
        basis: basis.iter().map(Word::to_string).collect(),
        matrix: (0..k)
            .map(|i| (0..k).map(|j| mat[(i, j)]).collect())
            .collect(),
        min_eigenvalue,
        minors,
        negative_minors,
        inequalities,
    })
}

/// Planar one-matrix moments `(tr A², tr A⁴)` for `V = ½x² − (g/4)x⁴`,
/// valid for `g < 1/12`. At `h = 0` both matrices follow this law.
pub fn planar_quartic_moments(g: f64) -> Option<(f64, f64)> {
    if g >= 1.0 / 12.0 {
        return None;
    }
    // Support [−2a, 2a] with 3g a⁴ − a² + 1 = 0 on the branch a(0) = 1.
    let a2 = if g.abs() < 1e-12 {
        1.0
    } else {
        (1.0 - (1.0 - 12.0 * g).sqrt()) / (6.0 * g)
    };
    let m2 = a2 * (4.0 - a2) / 3.0;
    let m4 = a2 * a2 * (3.0 - a2);
    Some((m2, m4))
}

/// `η(g) = 8g/(2g − 3)`.
pub fn frg_eta(g: f64) -> f64 {
    8.0 * g / (2.0 * g - 3.0)
}

/// `F(g) = 4 − (4/5)η(g)`.
pub fn frg_f(g: f64) -> f64 {
    4.0 - 0.8 * frg_eta(g)
}

fn check_pole(g: f64) -> Result<(), AnalysisError> {
    if (2.0 * g - 3.0).abs() < 1e-6 {
        return Err(AnalysisError::PoleProximity(g));
    }
    Ok(())
}

/// `(β_h, β_g)` at `(h, g)`.
pub fn frg_beta(h: f64, g: f64) -> Result<(f64, f64), AnalysisError> {
    check_pole(g)?;
    let lin = 1.0 + 2.0 * frg_eta(g);
    let f = frg_f(g);
    Ok((lin * h - f * h * h, lin * g - f * g * g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowSense {
    /// `d(h, g)/dt = β`.
    Uv,
    /// `d(h, g)/dt = −β`.
    Ir,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub t: f64,
    pub h: f64,
    pub g: f64,
}

/// RK4 integration of the flow. Stops early (without error) once a
/// coupling leaves `|·| ≤ escape`.
pub fn frg_flow(
    h0: f64,
    g0: f64,
    step: f64,
    t_max: f64,
    sense: FlowSense,
    escape: f64,
) -> Result<Vec<FlowPoint>, AnalysisError> {
    let s = match sense {
        FlowSense::Uv => 1.0,
        FlowSense::Ir => -1.0,
    };
    let rhs = |h: f64, g: f64| -> Result<(f64, f64), AnalysisError> {
        let (bh, bg) = frg_beta(h, g)?;
        Ok((s * bh, s * bg))
    };
    let mut out = vec![FlowPoint {
        t: 0.0,
        h: h0,
        g: g0,
    }];
    let steps = (t_max / step).round() as usize;
    let (mut h, mut g) = (h0, g0);
    for i in 1..=steps {
        let k1 = rhs(h, g)?;
        let k2 = rhs(h + 0.5 * step * k1.0, g + 0.5 * step * k1.1)?;
        let k3 = rhs(h + 0.5 * step * k2.0, g + 0.5 * step * k2.1)?;
        let k4 = rhs(h + step * k3.0, g + step * k3.1)?;
        h += step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        g += step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push(FlowPoint {
            t: i as f64 * step,
            h,
            g,
        });
        if !(h.abs() <= escape && g.abs() <= escape) {
            break;
        }
    }
    Ok(out)
}

pub fn write_flow<W: Write>(flow: &[FlowPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t\th\tg")?;
    for p in flow {
        writeln!(w, "{:.10}\t{:.12}\t{:.12}", p.t, p.h, p.g)?;
    }
    Ok(())
}

/// Bisection root of `f` on `[lo, hi]` to absolute tolerance `tol`.
pub fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, AnalysisError> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(AnalysisError::NoBracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nontrivial coupling fixed point: root of `g F(g) = 1 + 2η(g)` in `(0, 1)`.
pub fn frg_nontrivial_g() -> Result<f64, AnalysisError> {
    bisect(
        |g| g * frg_f(g) - (1.0 + 2.0 * frg_eta(g)),
        1e-9,
        1.0,
        1e-14,
    )
}

/// Fixed points `(h*, g*)` with `g*` in `[0, 1)`: `g* ∈ {0, g_nt}` and for
/// each `h* ∈ {0, (1 + 2η(g*))/F(g*)}`.
pub fn frg_fixed_points() -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut out = Vec::new();
    for g in [0.0, frg_nontrivial_g()?] {
        out.push((0.0, g));
        out.push(((1.0 + 2.0 * frg_eta(g)) / frg_f(g), g));
    }
    Ok(out)
}

/// `t1111` at one coupling point, for the skew-symmetry check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbabSample {
    pub g: f64,
    pub h: f64,
    pub t1111: Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub g: f64,
    pub h: f64,
    /// `t1111(g, h) + t1111(g, −h)`.
    pub sum: f64,
    /// Combined 3σ.
    pub tolerance: f64,
    pub symmetric: bool,
    /// `sign t1111 = sign h` at both points (vacuous at `h = 0`).
    pub sign_matches: bool,
}

impl SkewReport {
    pub fn passed(&self) -> bool {
        self.symmetric && self.sign_matches
    }
}

pub fn skew_symmetry_check(
    plus: &AbabSample,
    minus: &AbabSample,
) -> Result<SkewReport, AnalysisError> {
    let tol = 1e-9 * (1.0 + plus.h.abs());
    if (plus.g - minus.g).abs() > tol || (plus.h + minus.h).abs() > tol {
        return Err(AnalysisError::Unpaired(format!(
            "({}, {}) vs ({}, {})",
            plus.g, plus.h, minus.g, minus.h
        )));
    }
    let sum = plus.t1111.mean + minus.t1111.mean;
    let tolerance = 3.0 * plus.t1111.stderr.hypot(minus.t1111.stderr);
    let sign_ok = |s: &AbabSample| s.h == 0.0 || s.t1111.mean.signum() == s.h.signum();
    Ok(SkewReport {
        g: plus.g,
        h: plus.h,
        sum,
        tolerance,
        symmetric: sum.abs() <= tolerance,
        sign_matches: sign_ok(plus) && sign_ok(minus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, stderr: f64) -> Estimate {
        Estimate {
            mean,
            stderr,
            tau_int: 0.5,
            samples: 100,
        }
    }

    #[test]
    fn radial_error_examples() {
        let e = radial_error(0.3, &[1.0, 1.0, 1.0], 0.0015).unwrap();
        assert_eq!((e.mean, e.sigma, e.m), (1.0, 0.0, 3));
        let e = radial_error(0.3, &[0.9, 1.1], 0.0).unwrap();
        assert!((e.sigma - 0.1).abs() < 1e-12);
        let e = radial_error(0.3, &[0.7], 0.0015).unwrap();
        assert!(e.single_sample() && e.sigma == 0.0);
        assert!((e.total_error() - 0.0015).abs() < 1e-15);
        assert_eq!(radial_error(0.0, &[], 0.0), Err(AnalysisError::NoSamples));
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<CurvePoint> = (1..=6)
            .map(|i| {
                let h = i as f64;
                CurvePoint {
                    g: -h + 0.3,
                    h,
                    sigma: 0.01,
                }
            })
            .collect();
        let fit = fit_asymptote_points(&pts, Direction::Plus, None).unwrap();
        assert!((fit.lambda + 1.0).abs() < 1e-12);
        assert!((fit.g0 - 0.3).abs() < 1e-12);
        assert!((fit.theta_deg + 45.0).abs() < 1e-9);
        assert_eq!(fit.points, 3);
        assert!(fit_asymptote_points(&pts, Direction::Minus, None).is_err());
    }

    #[test]
    fn free_point_moment_matrix() {
        // Planar Wick values at g = h = 0.
        let m: HashMap<Word, Estimate> = [
            ("AA", 1.0),
            ("BB", 1.0),
            ("AAAA", 2.0),
            ("BBBB", 2.0),
            ("AABB", 1.0),
            ("ABAB", 0.0),
        ]
        .iter()
        .map(|(w, v)| (Word::from(w).canonical(), est(*v, 0.0)))
        .collect();
        let r = positivity_report(&m, &[Word::from("AB"), Word::from("BA")]).unwrap();
        assert_eq!(r.matrix, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(r.all_hold());
        let basis: Vec<Word> = ["1", "A", "B", "AB", "BA", "AA", "BB"]
            .map(Word::from)
            .to_vec();
        let r = positivity_report(&m, &basis).unwrap();
        assert!(r.min_eigenvalue >= -1e-12, "{}", r.min_eigenvalue);
        assert!(r.all_hold());
    }

    #[test]
    fn violation_is_flagged() {
        let m: HashMap<Word, Estimate> =
            [("AAAA", 2.0), ("BBBB", 2.0), ("AABB", 1.0), ("ABAB", 2.0)]
                .iter()
                .map(|(w, v)| (Word::from(w).canonical(), est(*v, 0.01)))
                .collect();
        let r = positivity_report(&m, &[Word::from("AB"), Word::from("BA")]).unwrap();
        assert_eq!(r.negative_minors, vec![(0, 1)]);
        assert!(!r.inequalities[1].holds);
        assert!(!r.all_hold());
    }

    #[test]
    fn missing_moment_is_an_error() {
        let m: HashMap<Word, Estimate> = HashMap::new();
        assert!(matches!(
            positivity_report(&m, &[Word::from("AB")]),
            Err(AnalysisError::MissingMoment(_))
        ));
    }

    #[test]
    fn basis_enumeration() {
        assert_eq!(words_up_to(2).len(), 7);
        assert_eq!(words_up_to(3).len(), 15);
    }

    #[test]
    fn planar_moments_satisfy_the_first_loop_equation() {
        // E tr(A V'(A)) = 1: m2 − g m4 = 1.
        for g in [-0.3, -0.05, 0.0, 0.03, 0.08] {
            let (m2, m4) = planar_quartic_moments(g).unwrap();
            assert!((m2 - g * m4 - 1.0).abs() < 1e-12, "g = {g}");
        }
        assert_eq!(planar_quartic_moments(0.0), Some((1.0, 2.0)));
        assert!(planar_quartic_moments(0.09).is_none());
    }

    #[test]
    fn frg_fixed_points_vanish_beta() {
        let fps = frg_fixed_points().unwrap();
        assert_eq!(fps.len(), 4);
        for (h, g) in &fps {
            let (bh, bg) = frg_beta(*h, *g).unwrap();
            assert!(bh.abs() < 1e-12 && bg.abs() < 1e-12, "({h}, {g})");
        }
        let g = frg_nontrivial_g().unwrap();
        // 8g² − 150g + 15 = 0, smaller root.
        let exact = (150.0 - (150.0f64 * 150.0 - 480.0).sqrt()) / 16.0;
        assert!((g - exact).abs() < 1e-12);
        assert!((fps[3].0 - g).abs() < 1e-12, "diagonal fixed point");
        assert!((fps[1].0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pole_is_rejected() {
        assert!(matches!(
            frg_beta(0.0, 1.5),
            Err(AnalysisError::PoleProximity(_))
        ));
        assert!(frg_flow(0.0, 1.5 - 1e-8, 0.01, 1.0, FlowSense::Uv, 1e3).is_err());
    }

    #[test]
    fn bisect_needs_a_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9),
            Err(AnalysisError::NoBracket { .. })
        ));
        assert!((bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn skew_examples() {
        let p = AbabSample {
            g: 0.05,
            h: 0.1,
            t1111: est(0.02, 0.002),
        };
        let m = AbabSample {
            g: 0.05,
            h: -0.1,
            t1111: est(-0.021, 0.002),
        };
        let r = skew_symmetry_check(&p, &m).unwrap();
        assert!(r.passed());
        let bad = AbabSample {
            g: 0.05,
            h: -0.1,
            t1111: est(0.02, 0.002),
        };
        assert!(!skew_symmetry_check(&p, &bad).unwrap().passed());
        let far = AbabSample { g: 0.06, ..m };
        assert!(matches!(
            skew_symmetry_check(&p, &far),
            Err(AnalysisError::Unpaired(_))
        ));
        let zero = AbabSample {
            g: 0.0,
            h: 0.0,
            t1111: est(0.001, 0.002),
        };
        assert!(skew_symmetry_check(&zero, &zero).unwrap().passed());
    }
}
