//! Critical-curve cartography. Every search takes the truth function as an
//! [`Evaluator`], so analytic dummy regions and the real `MC(g, h)` plug in
//! the same way.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::marker::PhantomData;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::SearchError;
use crate::hmc::{mc_run, ChainConfig, RunOutcome};
use crate::model::ModelParams;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    True,
    False,
    Untested,
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub g: f64,
    pub h: f64,
    pub verdict: Verdict,
    /// Fraction 𝔞 of planned iterations left uncomputed (0 for True).
    pub abort_fraction: f64,
}

impl CouplingPoint {
    pub fn untested(g: f64, h: f64) -> Self {
        Self {
            g,
            h,
            verdict: Verdict::Untested,
            abort_fraction: 0.0,
        }
    }

    pub fn radius(&self) -> f64 {
        self.g.hypot(self.h)
    }

    /// Angle from the `g`-axis.
    pub fn angle(&self) -> f64 {
        self.h.atan2(self.g)
    }

    pub fn distance(&self, other: &CouplingPoint) -> f64 {
        (self.g - other.g).hypot(self.h - other.h)
    }
}

/// `Rot_θ(g, h) = (g cos θ − h sin θ, g sin θ + h cos θ)`.
pub fn rotate(g: f64, h: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (g * c - h * s, g * s + h * c)
}

/// What an evaluator reports about one coupling point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub converged: bool,
    pub abort_fraction: f64,
}

impl Evaluation {
    pub fn converged() -> Self {
        Self {
            converged: true,
            abort_fraction: 0.0,
        }
    }

    pub fn diverged(abort_fraction: f64) -> Self {
        Self {
            converged: false,
            abort_fraction,
        }
    }
}

/// The truth function `MC(g, h)` or a stand-in for it.
pub trait Evaluator: Sync {
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, SearchError>;
}

impl<F> Evaluator for F
where
    F: Fn(f64, f64) -> Evaluation + Sync,
{
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, SearchError> {
        Ok(self(g, h))
    }
}

pub fn evaluate_point<E: Evaluator + ?Sized>(
    e: &E,
    g: f64,
    h: f64,
) -> Result<CouplingPoint, SearchError> {
    let r = e.evaluate(g, h)?;
    Ok(CouplingPoint {
        g,
        h,
        verdict: r.converged.into(),
        abort_fraction: if r.converged { 0.0 } else { r.abort_fraction },
    })
}

fn ensure_tested<E: Evaluator + ?Sized>(
    e: &E,
    p: CouplingPoint,
) -> Result<(CouplingPoint, usize), SearchError> {
    match p.verdict {
        Verdict::Untested => Ok((evaluate_point(e, p.g, p.h)?, 1)),
        _ => Ok((p, 0)),
    }
}

/// Characteristic functions of simple regions, for testing the searches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dummy {
    /// True strictly inside the origin-centred disk.
    Disk { radius: f64 },
    /// True inside `(g/a)² + (h/b)² < 1`.
    Ellipse { a: f64, b: f64 },
    /// True for `h < h_max`.
    HalfPlane { h_max: f64 },
}

impl Dummy {
    pub fn contains(&self, g: f64, h: f64) -> bool {
        match *self {
            Dummy::Disk { radius } => g.hypot(h) < radius,
            Dummy::Ellipse { a, b } => (g / a).powi(2) + (h / b).powi(2) < 1.0,
            Dummy::HalfPlane { h_max } => h < h_max,
        }
    }
}

impl Evaluator for Dummy {
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, SearchError> {
        Ok(if self.contains(g, h) {
            Evaluation::converged()
        } else {
            Evaluation::diverged(1.0)
        })
    }
}

/// `disk:R`, `ellipse:A,B` or `halfplane:H`.
impl FromStr for Dummy {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SearchError::InvalidDummy(s.to_string());
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let positive = nums.iter().all(|v| *v > 0.0 && v.is_finite());
        match (kind.trim(), nums.as_slice()) {
            ("disk", &[radius]) if positive => Ok(Dummy::Disk { radius }),
            ("ellipse", &[a, b]) if positive => Ok(Dummy::Ellipse { a, b }),
            ("halfplane", &[h_max]) if h_max.is_finite() => Ok(Dummy::HalfPlane { h_max }),
            _ => Err(bad()),
        }
    }
}

/// Counts evaluations of the wrapped evaluator.
#[derive(Debug, Default)]
pub struct Counting<E> {
    pub inner: E,
    calls: AtomicUsize,
}

impl<E> Counting<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<E: Evaluator> Evaluator for Counting<E> {
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, SearchError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(g, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationKind {
    Spatial,
    Angular,
}

/// A convergent and a divergent point a short distance (or angle) apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub green: CouplingPoint,
    pub red: CouplingPoint,
    pub midpoint: (f64, f64),
    pub kind: SeparationKind,
    /// Distance for spatial dipoles, angle in radians for angular ones.
    pub separation: f64,
    /// Largest angular step used to find an angular dipole.
    pub max_alpha: Option<f64>,
    /// Evaluator calls made by the search that produced this dipole.
    pub evaluations: usize,
}

impl Dipole {
    fn new(
        green: CouplingPoint,
        red: CouplingPoint,
        kind: SeparationKind,
        separation: f64,
    ) -> Self {
        Self {
            midpoint: (0.5 * (green.g + red.g), 0.5 * (green.h + red.h)),
            green,
            red,
            kind,
            separation,
            max_alpha: None,
            evaluations: 0,
        }
    }

    pub fn midpoint_radius(&self) -> f64 {
        self.midpoint.0.hypot(self.midpoint.1)
    }

    pub fn midpoint_angle(&self) -> f64 {
        self.midpoint.1.atan2(self.midpoint.0)
    }

    /// Separation as a length: the arc `r·α` for angular dipoles.
    pub fn length_scale(&self) -> f64 {
        match self.kind {
            SeparationKind::Spatial => self.separation,
            SeparationKind::Angular => self.green.radius() * self.separation,
        }
    }

    /// Verdict pattern, midpoint and separation bound.
    pub fn is_consistent(&self) -> bool {
        let tol = 1e-12 * (1.0 + self.green.radius() + self.red.radius());
        let mid_ok = (self.midpoint.0 - 0.5 * (self.green.g + self.red.g)).abs() <= tol
            && (self.midpoint.1 - 0.5 * (self.green.h + self.red.h)).abs() <= tol;
        let sep_ok = match self.kind {
            SeparationKind::Spatial => self.green.distance(&self.red) <= self.separation + tol,
            SeparationKind::Angular => (self.green.radius() - self.red.radius()).abs() <= tol,
        };
        self.green.verdict == Verdict::True
            && self.red.verdict == Verdict::False
            && mid_ok
            && sep_ok
    }
}

/// Bisection between a True and a False point until they are within
/// `delta`. Uses at most `⌈log₂(dist/δ)⌉` evaluations.
pub fn midpoint_search<E: Evaluator + ?Sized>(
    green: CouplingPoint,
    red: CouplingPoint,
    delta: f64,
    e: &E,
) -> Result<Dipole, SearchError> {
    if !(delta > 0.0) {
        return Err(SearchError::NonPositiveStep(delta));
    }
    if green.verdict != Verdict::True || red.verdict != Verdict::False {
        return Err(SearchError::EndpointVerdicts {
            green: format!("{:?}", green.verdict),
            red: format!("{:?}", red.verdict),
        });
    }
    let (mut p, mut q) = (green, red);
    let mut calls = 0;
    while p.distance(&q) > delta {
        let mid = evaluate_point(e, 0.5 * (p.g + q.g), 0.5 * (p.h + q.h))?;
        calls += 1;
        if mid.verdict == Verdict::True {
            p = mid;
        } else {
            q = mid;
        }
    }
    let mut d = Dipole::new(p, q, SeparationKind::Spatial, delta);
    d.evaluations = calls;
    Ok(d)
}

/// `δ(𝔞, φ) = base · (0.25 + 0.75𝔞) · (0.5 + 0.5|sin φ|)`: shorter steps
/// when the last run nearly finished, and near the `g`-axis where the
/// models react more strongly to the coupling.
pub fn adaptive_step(base: f64, abort_fraction: f64, phi: f64) -> f64 {
    let a = abort_fraction.clamp(0.0, 1.0);
    base * (0.25 + 0.75 * a) * (0.5 + 0.5 * phi.sin().abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepPolicy {
    Uniform { delta: f64 },
    Adaptive { base: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Uniform { delta: 0.0015 }
    }
}

impl StepPolicy {
    pub fn step(&self, abort_fraction: f64, phi: f64) -> f64 {
        match *self {
            StepPolicy::Uniform { delta } => delta,
            StepPolicy::Adaptive { base } => adaptive_step(base, abort_fraction, phi),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            StepPolicy::Uniform { delta } => delta,
            StepPolicy::Adaptive { base } => base,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadialOptions {
    pub policy: StepPolicy,
    pub max_steps: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            policy: StepPolicy::default(),
            max_steps: 1000,
        }
    }
}

/// March from a False `start` toward the origin along its ray until a True
/// point appears. The first step uses `𝔞 = ½`; later ones the abort
/// fraction of the previous point.
pub fn radial_search<E: Evaluator + ?Sized>(
    start: CouplingPoint,
    opts: &RadialOptions,
    e: &E,
) -> Result<Dipole, SearchError> {
    if !(opts.policy.scale() > 0.0) {
        return Err(SearchError::NonPositiveStep(opts.policy.scale()));
    }
    let r0 = start.radius();
    if r0 == 0.0 {
        return Err(SearchError::StartAtOrigin);
    }
    let (start, mut calls) = ensure_tested(e, start)?;
    if start.verdict == Verdict::True {
        return Err(SearchError::StartVerdict(true));
    }
    let phi = start.angle();
    let unit = (start.g / r0, start.h / r0);
    let mut red = start;
    let mut r = r0;
    let mut a = 0.5;
    for _ in 0..opts.max_steps {
        r = (r - opts.policy.step(a, phi)).max(0.0);
        let next = evaluate_point(e, r * unit.0, r * unit.1)?;
        calls += 1;
        if next.verdict == Verdict::True {
            let sep = next.distance(&red);
            let mut d = Dipole::new(next, red, SeparationKind::Spatial, sep);
            d.evaluations = calls;
            return Ok(d);
        }
        if r == 0.0 {
            return Err(SearchError::OriginNotConvergent);
        }
        a = next.abort_fraction;
        red = next;
    }
    Err(SearchError::BudgetExhausted(opts.max_steps))
}

/// Arc scan step `α` and the bracket width refined down to by halving
/// once the verdict changes. Angles in radians; `clockwise` flips the sense.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngularSchedule {
    pub alpha: f64,
    pub refine_to: f64,
    pub clockwise: bool,
}

impl Default for AngularSchedule {
    fn default() -> Self {
        Self {
            alpha: 2f64.to_radians(),
            refine_to: 0.5f64.to_radians(),
            clockwise: false,
        }
    }
}

/// Test `Q_k = Rot_{kα}(start)`, `k = 1, 2, …` while the verdict stays that
/// of `start`, then halve the bracketing arc down to `refine_to`.
/// Standard form: `start` is False and the scan hunts a True point.
/// Negated: `start` is True and the scan hunts a divergent point, which is
/// cheap to detect because divergent runs abort early.
pub fn angular_search<E: Evaluator + ?Sized>(
    start: CouplingPoint,
    schedule: &AngularSchedule,
    negated: bool,
    e: &E,
) -> Result<Dipole, SearchError> {
    if !(schedule.alpha > 0.0) {
        return Err(SearchError::NonPositiveStep(schedule.alpha));
    }
    if start.radius() == 0.0 {
        return Err(SearchError::StartAtOrigin);
    }
    let (start, mut calls) = ensure_tested(e, start)?;
    let keep = if negated {
        Verdict::True
    } else {
        Verdict::False
    };
    if start.verdict != keep {
        return Err(SearchError::StartVerdict(start.verdict == Verdict::True));
    }
    let sign = if schedule.clockwise { -1.0 } else { 1.0 };
    let at = |theta: f64| -> Result<CouplingPoint, SearchError> {
        let (g, h) = rotate(start.g, start.h, sign * theta);
        evaluate_point(e, g, h)
    };

    let max_k = (TAU / schedule.alpha).ceil() as usize;
    let mut lo = (0.0, start);
    let mut hi = None;
    for k in 1..=max_k {
        let theta = k as f64 * schedule.alpha;
        if theta >= TAU {
            break;
        }
        let q = at(theta)?;
        calls += 1;
        if q.verdict == keep {
            lo = (theta, q);
        } else {
            hi = Some((theta, q));
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Err(SearchError::FullCircle(calls));
    };
    let floor = schedule.refine_to.max(1e-12);
    while hi.0 - lo.0 > floor * (1.0 + 1e-12) {
        let mid = 0.5 * (lo.0 + hi.0);
        let q = at(mid)?;
        calls += 1;
        if q.verdict == keep {
            lo = (mid, q);
        } else {
            hi = (mid, q);
        }
    }
    let (green, red) = if negated { (lo.1, hi.1) } else { (hi.1, lo.1) };
    let mut d = Dipole::new(green, red, SeparationKind::Angular, hi.0 - lo.0);
    d.max_alpha = Some(schedule.alpha);
    d.evaluations = calls;
    Ok(d)
}

/// Radius samples on one ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayGroup {
    /// Ray angle in radians, from the `g`-axis.
    pub phi: f64,
    pub radii: Vec<f64>,
    /// Indices into [`CriticalCurve::dipoles`].
    pub dipoles: Vec<usize>,
    /// Largest dipole length scale in the group.
    pub discretisation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub dipoles: Vec<Dipole>,
    pub rays: Vec<RayGroup>,
    /// Largest spatial separation among the dipoles (0 if none).
    pub delta: f64,
}

/// Group dipole midpoints by ray angle (to 1e-9 rad).
pub fn assemble_curve(dipoles: Vec<Dipole>) -> CriticalCurve {
    let mut groups: BTreeMap<i64, RayGroup> = BTreeMap::new();
    for (i, d) in dipoles.iter().enumerate() {
        let phi = d.midpoint_angle();
        // −π and π are the same ray.
        let key = ((phi.rem_euclid(TAU) * 1e9).round() as i64) % (TAU * 1e9).round() as i64;
        let g = groups.entry(key).or_insert_with(|| RayGroup {
            phi,
            radii: Vec::new(),
            dipoles: Vec::new(),
            discretisation: 0.0,
        });
        g.radii.push(d.midpoint_radius());
        g.dipoles.push(i);
        g.discretisation = g.discretisation.max(d.length_scale());
    }
    let delta = dipoles
        .iter()
        .filter(|d| d.kind == SeparationKind::Spatial)
        .map(|d| d.separation)
        .fold(0.0, f64::max);
    CriticalCurve {
        dipoles,
        rays: groups.into_values().collect(),
        delta,
    }
}

/// Cache key: couplings quantised to 1e-6, plus `N`, `n` and the seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub q: i64,
    pub g: i64,
    pub h: i64,
    pub size: usize,
    pub n: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(q: f64, g: f64, h: f64, size: usize, n: usize, seed: u64) -> Self {
        let k = |x: f64| (x * 1e6).round() as i64;
        Self {
            q: k(q),
            g: k(g),
            h: k(h),
            size,
            n,
            seed,
        }
    }
}

/// Shared verdict store; safe for concurrent insert-or-get.
#[derive(Debug, Default)]
pub struct VerdictCache {
    map: Mutex<HashMap<CacheKey, Evaluation>>,
}

impl VerdictCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &CacheKey) -> Option<Evaluation> {
        self.map.lock().expect("cache lock").get(key).copied()
    }

    /// Insert unless present; returns the stored value either way.
    pub fn insert(&self, key: CacheKey, value: Evaluation) -> Evaluation {
        *self
            .map
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(value)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type Observer = Arc<dyn Fn(&RunOutcome, Duration) + Send + Sync>;

/// `MC(g, h)` at fixed `q`, `N` and chain configuration.
pub struct McEvaluator<T: Real = f64> {
    pub q: f64,
    pub size: usize,
    pub config: ChainConfig,
    cache: Option<Arc<VerdictCache>>,
    observer: Option<Observer>,
    _scalar: PhantomData<T>,
}

impl<T: Real> McEvaluator<T> {
    pub fn new(q: f64, size: usize, config: ChainConfig) -> Self {
        Self {
            q,
            size,
            config,
            cache: None,
            observer: None,
            _scalar: PhantomData,
        }
    }

    pub fn with_cache(mut self, cache: Arc<VerdictCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Called with every freshly computed outcome and its wall time (not on
    /// cache hits).
    pub fn with_observer(
        mut self,
        f: impl Fn(&RunOutcome, Duration) + Send + Sync + 'static,
    ) -> Self {
        self.observer = Some(Arc::new(f));
        self
    }

    pub fn key(&self, g: f64, h: f64) -> CacheKey {
        CacheKey::new(self.q, g, h, self.size, self.config.n, self.config.seed)
    }

    pub fn run(&self, g: f64, h: f64) -> Result<RunOutcome, SearchError> {
        let err = |e: &dyn std::fmt::Display| SearchError::Evaluation(e.to_string());
        let params =
            ModelParams::new(T::of(self.q), T::of(g), T::of(h), self.size).map_err(|e| err(&e))?;
        mc_run(&params, &self.config).map_err(|e| err(&e))
    }
}

impl<T: Real> Evaluator for McEvaluator<T> {
    fn evaluate(&self, g: f64, h: f64) -> Result<Evaluation, SearchError> {
        let key = self.key(g, h);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let started = Instant::now();
        let out = self.run(g, h)?;
        if let Some(f) = &self.observer {
            f(&out, started.elapsed());
        }
        let v = Evaluation {
            converged: out.converged,
            abort_fraction: out.abort_fraction,
        };
        Ok(match &self.cache {
            Some(c) => c.insert(key, v),
            None => v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tested(e: &impl Evaluator, g: f64, h: f64) -> CouplingPoint {
        evaluate_point(e, g, h).unwrap()
    }

    #[test]
    fn midpoint_on_disk() {
        let disk = Counting::new(Dummy::Disk { radius: 0.5 });
        let d = midpoint_search(
            tested(&disk, 0.0, 0.0),
            tested(&disk, 1.0, 0.0),
            0.01,
            &disk,
        )
        .unwrap();
        assert!((d.midpoint.0 - 0.5).abs() <= 0.005);
        assert!(d.is_consistent());
        assert_eq!(disk.count(), 2 + d.evaluations);
        assert!(d.evaluations <= (1.0f64 / 0.01).log2().ceil() as usize + 1);
    }

    #[test]
    fn midpoint_with_close_endpoints_makes_no_calls() {
        let disk = Counting::new(Dummy::Disk { radius: 0.5 });
        let (p, q) = (tested(&disk, 0.499, 0.0), tested(&disk, 0.505, 0.0));
        let before = disk.count();
        let d = midpoint_search(p, q, 0.01, &disk).unwrap();
        assert_eq!(disk.count(), before);
        assert_eq!((d.green, d.red), (p, q));
    }

    #[test]
    fn midpoint_rejects_wrong_verdicts() {
        let disk = Dummy::Disk { radius: 0.5 };
        let p = tested(&disk, 0.0, 0.0);
        assert!(matches!(
            midpoint_search(p, p, 0.01, &disk),
            Err(SearchError::EndpointVerdicts { .. })
        ));
        assert!(midpoint_search(p, CouplingPoint::untested(1.0, 0.0), 0.01, &disk).is_err());
    }

    #[test]
    fn radial_on_disk() {
        let disk = Dummy::Disk { radius: 0.5 };
        let d = radial_search(
            CouplingPoint::untested(0.8, 0.6),
            &RadialOptions::default(),
            &disk,
        )
        .unwrap();
        assert!((d.midpoint_radius() - 0.5).abs() <= 0.002);
        assert!(d.is_consistent());
    }

    #[test]
    fn radial_from_true_start_fails_without_steps() {
        let disk = Counting::new(Dummy::Disk { radius: 0.5 });
        let r = radial_search(
            CouplingPoint::untested(0.1, 0.1),
            &RadialOptions::default(),
            &disk,
        );
        assert_eq!(r, Err(SearchError::StartVerdict(true)));
        assert_eq!(disk.count(), 1);
    }

    #[test]
    fn radial_budget() {
        let disk = Dummy::Disk { radius: 0.5 };
        let opts = RadialOptions {
            max_steps: 3,
            ..RadialOptions::default()
        };
        let r = radial_search(CouplingPoint::untested(3.0, 0.0), &opts, &disk);
        assert_eq!(r, Err(SearchError::BudgetExhausted(3)));
    }

    #[test]
    fn adaptive_step_examples() {
        let b = 0.01;
        assert_eq!(adaptive_step(b, 1.0, PI / 2.0), b);
        assert!((adaptive_step(b, 0.0, PI / 2.0) - 0.25 * b).abs() < 1e-15);
        assert!((adaptive_step(b, 1.0, 0.0) - 0.5 * b).abs() < 1e-15);
        for i in 0..=20 {
            let phi = i as f64 * PI / 20.0;
            for j in 0..20 {
                let (a1, a2) = (j as f64 / 20.0, (j + 1) as f64 / 20.0);
                assert!(adaptive_step(b, a1, phi) <= adaptive_step(b, a2, phi));
            }
        }
    }

    #[test]
    fn rotation_identity() {
        let (g, h) = rotate(1.0, 0.0, PI / 2.0);
        assert!(g.abs() < 1e-16 && (h - 1.0).abs() < 1e-16);
    }

    #[test]
    fn angular_on_half_plane() {
        let region = Dummy::HalfPlane { h_max: 0.3 };
        let sched = AngularSchedule {
            alpha: 5f64.to_radians(),
            refine_to: 5f64.to_radians(),
            clockwise: false,
        };
        let d = angular_search(CouplingPoint::untested(0.0, 0.5), &sched, false, &region).unwrap();
        // Boundary h = 0.3 on the radius-0.5 circle, counter-clockwise from
        // the top: angle asin(0.6) past π/2.
        let crossing = PI - (0.6f64).asin();
        let (lo, hi) = (d.red.angle(), d.green.angle());
        assert!(
            lo < crossing && crossing <= hi + 1e-12,
            "{lo} {crossing} {hi}"
        );
        assert!((hi - lo - 5f64.to_radians()).abs() < 1e-12);
        assert!(d.is_consistent());
        assert_eq!(d.max_alpha, Some(5f64.to_radians()));
    }

    #[test]
    fn negated_angular_in_ellipse() {
        let region = Dummy::Ellipse { a: 0.6, b: 0.3 };
        let d = angular_search(
            CouplingPoint::untested(0.4, 0.0),
            &AngularSchedule::default(),
            true,
            &region,
        )
        .unwrap();
        assert!(region.contains(d.green.g, d.green.h));
        assert!(!region.contains(d.red.g, d.red.h));
        assert!(d.separation <= 0.5f64.to_radians() + 1e-12);
        assert!(d.is_consistent());
    }

    #[test]
    fn angular_full_circle() {
        let disk = Dummy::Disk { radius: 0.5 };
        let r = angular_search(
            CouplingPoint::untested(1.0, 0.0),
            &AngularSchedule::default(),
            false,
            &disk,
        );
        assert!(matches!(r, Err(SearchError::FullCircle(_))));
    }

    #[test]
    fn dummy_parsing() {
        assert_eq!(
            "disk:0.5".parse::<Dummy>().unwrap(),
            Dummy::Disk { radius: 0.5 }
        );
        assert_eq!(
            "ellipse:0.3, 0.2".parse::<Dummy>().unwrap(),
            Dummy::Ellipse { a: 0.3, b: 0.2 }
        );
        assert_eq!(
            "halfplane:-1".parse::<Dummy>().unwrap(),
            Dummy::HalfPlane { h_max: -1.0 }
        );
        for bad in ["disk", "disk:-1", "circle:1", "ellipse:1", "disk:x"] {
            assert!(bad.parse::<Dummy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn curve_assembly() {
        assert_eq!(assemble_curve(Vec::new()).rays.len(), 0);
        let disk = Dummy::Disk { radius: 0.5 };
        let opts = RadialOptions::default();
        let ray: Vec<Dipole> = [1.0, 0.9, 0.7]
            .iter()
            .map(|r| {
                radial_search(CouplingPoint::untested(0.6 * r, 0.8 * r), &opts, &disk).unwrap()
            })
            .collect();
        let mut all = ray.clone();
        all.push(
            angular_search(
                CouplingPoint::untested(1.0, 0.0),
                &AngularSchedule::default(),
                true,
                &Dummy::HalfPlane { h_max: 0.2 },
            )
            .unwrap(),
        );
        let curve = assemble_curve(all);
        assert_eq!(curve.rays.len(), 2);
        let main = curve.rays.iter().find(|g| g.radii.len() == 3).unwrap();
        assert!((main.phi - (0.8f64).atan2(0.6)).abs() < 1e-9);
        assert!(curve
            .dipoles
            .iter()
            .any(|d| d.kind == SeparationKind::Angular));
        assert!(curve.delta > 0.0 && curve.delta <= 0.0015 + 1e-12);
    }

    #[test]
    fn cache_quantises_and_keeps_first() {
        let a = CacheKey::new(1.0, 0.1, 0.2, 16, 100, 0);
        let b = CacheKey::new(1.0, 0.1 + 1e-8, 0.2, 16, 100, 0);
        assert_eq!(a, b);
        assert_ne!(a, CacheKey::new(1.0, 0.1, 0.2, 16, 100, 1));
        let c = VerdictCache::new();
        c.insert(a, Evaluation::converged());
        assert_eq!(
            c.insert(b, Evaluation::diverged(0.3)),
            Evaluation::converged()
        );
        assert_eq!(c.len(), 1);
    }
}
