//! Hamiltonian Markov chain: leapfrog proposals, R₁/R₂ acceptance, abort
//! detection and SDE-based thermalisation. [`mc_run`] realises the verdict
//! `MC(g, h)`.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rand_distr::OpenClosed01;
use serde::{Deserialize, Serialize};

use crate::error::{ChainError, ModelError};
use crate::matrix::{ComplexMatrix, MatrixPair};
use crate::model::{force_into, ForceWorkspace, ModelParams, TraceInvariants};
use crate::rng::{stream, Role};
use crate::scalar::Real;
use crate::sde::{build_sde, monitor_fields, Correlators, SdeRecord, TABLE_FIELDS};
use crate::stats::{estimate, Estimate, PrefixSums};
use crate::word::{Word, WordEvaluator};

/// Which energy difference the Metropolis step tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptanceRule {
    /// `Δ = NΔS + ΔK` with full-step momenta: exact detailed balance for
    /// `e^{−NS}`.
    #[default]
    Hamiltonian,
    /// `Δ = NΔS` with the fresh half-step momentum, taken at face value.
    /// Combined with leapfrog proposals this targets `e^{−2NS}`
    /// for short trajectories.
    DeltaSOnly,
}

/// SDE records monitored for thermalisation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeSet {
    /// A, A³, B²A, BAB varying `A`, and the mirrors varying `B`.
    #[default]
    Monitor,
    /// All eleven table rows (varying `A`).
    Table,
}

impl SdeSet {
    pub fn fields(self) -> Vec<(Option<Word>, Option<Word>)> {
        match self {
            SdeSet::Monitor => monitor_fields(),
            SdeSet::Table => TABLE_FIELDS
                .iter()
                .map(|s| (Some(Word::from(s)), None))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub epsilon: f64,
    pub steps_per_trajectory: usize,
    pub n: usize,
    pub seed: u64,
    pub divergence_bound: f64,
    pub max_hermitize_attempts: usize,
    /// Consecutive rejections treated as a divergence (0 disables). A chain
    /// past the critical curve whose proposals all run away, and are all
    /// rejected for their integration error, would otherwise sit frozen.
    pub stall_limit: usize,
    pub sde_epsilon: f64,
    pub observable_stride: usize,
    pub acceptance: AcceptanceRule,
    pub sde_set: SdeSet,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            steps_per_trajectory: 40,
            n: 20_000,
            seed: 0,
            divergence_bound: 1e6,
            max_hermitize_attempts: 5,
            stall_limit: 100,
            sde_epsilon: 1e-2,
            observable_stride: 1,
            acceptance: AcceptanceRule::Hamiltonian,
            sde_set: SdeSet::Monitor,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |m: &str| Err(ChainError::InvalidConfig(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.n < 2 {
            return bad("n must exceed 1");
        }
        if self.steps_per_trajectory == 0 {
            return bad("steps_per_trajectory must be at least 1");
        }
        if self.observable_stride == 0 {
            return bad("observable_stride must be at least 1");
        }
        if self.max_hermitize_attempts == 0 {
            return bad("max_hermitize_attempts must be at least 1");
        }
        if !(self.divergence_bound > 0.0) {
            return bad("divergence_bound must be positive");
        }
        Ok(())
    }
}

/// `true` if `delta < 0` (R₁), else a uniform `p ∈ (0, 1]` is drawn and
/// the move is accepted iff `delta < ln(1/p)` (R₂). `delta` is the energy
/// difference already multiplied by `N`.
pub fn accept<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> bool {
    if delta < 0.0 {
        return true;
    }
    let p: f64 = rng.sample(OpenClosed01);
    delta < (1.0 / p).ln()
}

/// R₁/R₂ in the action form: accept iff `ΔS < 0` or `ΔS < (1/N) ln(1/p)`.
pub fn accept_delta_s<R: Rng + ?Sized>(delta_s: f64, n: usize, rng: &mut R) -> bool {
    accept(n as f64 * delta_s, rng)
}

/// In-place leapfrog in half-step form: `steps` times `P += εf(X)`,
/// `X += εP`. On entry `f` holds `f(X)`; on exit `f(X̃)`.
fn leapfrog_in_place<T: Real>(
    params: &ModelParams<T>,
    x: &mut MatrixPair<T>,
    p: &mut MatrixPair<T>,
    f: &mut MatrixPair<T>,
    epsilon: T,
    steps: usize,
    ws: &mut ForceWorkspace<T>,
) -> Result<(), ModelError> {
    for _ in 0..steps {
        p.axpy(epsilon, f);
        x.axpy(epsilon, p);
        force_into(params, x, ws, f)?;
    }
    Ok(())
}

/// Leapfrog from `(X, P_{1/2})`: returns `(X̃, P̃)` with `P̃` the last
/// half-step momentum. A zero `p_half` gives `X̃ = X + ε²f(X)` after one step.
pub fn leapfrog_from<T: Real>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
    p_half: &MatrixPair<T>,
    epsilon: T,
    steps: usize,
) -> Result<(MatrixPair<T>, MatrixPair<T>), ModelError> {
    let mut ws = ForceWorkspace::new(x.dim());
    let mut f = MatrixPair::zeros(x.dim());
    force_into(params, x, &mut ws, &mut f)?;
    let (mut x, mut p) = (x.clone(), p_half.clone());
    leapfrog_in_place(params, &mut x, &mut p, &mut f, epsilon, steps, &mut ws)?;
    Ok((x, p))
}

/// Standard leapfrog on full-step momenta, `(X, P) ↦ (X̃, P̃)`. The drift
/// and kick sequence is the half-step loop above, entered with
/// `P − (ε/2)f(X)` (the first kick completes the half step) and closed
/// with `P̃ = P_last + (ε/2)f(X̃)`.
/// Negating `P̃` and integrating again returns to `(X, −P)`.
pub fn hamiltonian_trajectory<T: Real>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
    p: &MatrixPair<T>,
    epsilon: T,
    steps: usize,
) -> Result<(MatrixPair<T>, MatrixPair<T>), ModelError> {
    let mut ws = ForceWorkspace::new(x.dim());
    let mut f = MatrixPair::zeros(x.dim());
    force_into(params, x, &mut ws, &mut f)?;
    let half = epsilon * T::of(0.5);
    let (mut x, mut p) = (x.clone(), p.clone());
    p.axpy(-half, &f);
    leapfrog_in_place(params, &mut x, &mut p, &mut f, epsilon, steps, &mut ws)?;
    p.axpy(half, &f);
    Ok((x, p))
}

/// `H = Tr P²/2 + N·S(X)`.
pub fn hamiltonian<T: Real>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
    p: &MatrixPair<T>,
) -> Result<T, ModelError> {
    Ok(p.kinetic_energy() + params.n_real() * crate::model::action(params, x)?)
}

/// One proposal from `X` with a fresh momentum: `P_{1/2}` is drawn per the
/// configured rule and the re-hermitized `X̃` is returned.
pub fn leapfrog_trajectory<T: Real, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    x: &MatrixPair<T>,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<MatrixPair<T>, ChainError> {
    let p = MatrixPair::sample_momentum(x.dim(), rng);
    let eps = T::of(config.epsilon);
    let (mut xt, _) = match config.acceptance {
        AcceptanceRule::Hamiltonian => {
            hamiltonian_trajectory(params, x, &p, eps, config.steps_per_trajectory)?
        }
        AcceptanceRule::DeltaSOnly => {
            leapfrog_from(params, x, &p, eps, config.steps_per_trajectory)?
        }
    };
    if xt.hermiticity_deviation() > xt.hermiticity_tolerance() {
        return Err(ChainError::HermiticityLost { attempts: 1 });
    }
    xt.hermitize_in_place();
    Ok(xt)
}

/// Instantaneous normalised traces of one chain state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub action: f64,
    pub t2: f64,
    pub t4: f64,
    pub t22: f64,
    pub t1111: f64,
    pub a6: f64,
    pub b6: f64,
    /// Whether the hierarchy `−t22 ≤ t1111 ≤ t22 ≤ t4` held on this state.
    pub hierarchy_ok: bool,
    /// `Re tr w` for the chain's monitored word list.
    pub words: Vec<f64>,
}

impl Sample {
    /// The first observable beyond `bound` or non-finite.
    fn divergent(&self, bound: f64) -> Option<(&'static str, f64)> {
        [
            ("t2", self.t2),
            ("t4", self.t4),
            ("t22", self.t22),
            ("t1111", self.t1111.abs()),
            ("trA6", self.a6),
            ("trB6", self.b6),
            ("action", self.action),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite() || (*v).abs() > bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AbortReason {
    Divergence { observable: String, value: f64 },
    HermiticityLost { attempts: usize },
}

/// Result of a single chain iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Moved { accepted: bool },
    Aborted(AbortReason),
}

struct Products<T> {
    a2: ComplexMatrix<T>,
    b2: ComplexMatrix<T>,
    ab: ComplexMatrix<T>,
    a3: ComplexMatrix<T>,
}

impl<T: Real> Products<T> {
    fn new(n: usize) -> Self {
        let z = || ComplexMatrix::zeros(n);
        Self {
            a2: z(),
            b2: z(),
            ab: z(),
            a3: z(),
        }
    }

    fn invariants(&mut self, x: &MatrixPair<T>) -> TraceInvariants<T> {
        x.a.mul_hermitian_into(&x.a, &mut self.a2);
        x.b.mul_hermitian_into(&x.b, &mut self.b2);
        x.a.mul_into(&x.b, &mut self.ab);
        TraceInvariants {
            a2: x.a.trace_sq(),
            b2: x.b.trace_sq(),
            a4: self.a2.frobenius_sq(),
            b4: self.b2.frobenius_sq(),
            abab: self.ab.trace_product(&self.ab).re,
            abba: self.ab.frobenius_sq(),
        }
    }

    /// `Tr A⁶ = ‖A³‖²`, `Tr B⁶`; uses the squares from [`Self::invariants`].
    fn sixth(&mut self, x: &MatrixPair<T>) -> (T, T) {
        x.a.mul_hermitian_into(&self.a2, &mut self.a3);
        let a6 = self.a3.frobenius_sq();
        x.b.mul_hermitian_into(&self.b2, &mut self.a3);
        (a6, self.a3.frobenius_sq())
    }
}

/// Words and word pairs whose per-sample values feed the SDE residuals.
#[derive(Clone, Debug)]
struct Monitor {
    records: Vec<SdeRecord<f64>>,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
    pairs: Vec<(usize, usize)>,
    pair_index: HashMap<(Word, Word), usize>,
}

impl Monitor {
    fn new<T: Real>(params: &ModelParams<T>, set: SdeSet) -> Self {
        let p64 = ModelParams::new(
            params.q.as_f64(),
            params.g.as_f64(),
            params.h.as_f64(),
            params.size,
        )
        .expect("validated parameters stay valid in f64");
        let records: Vec<SdeRecord<f64>> = set
            .fields()
            .iter()
            .map(|(x, y)| build_sde(x.as_ref(), y.as_ref(), &p64))
            .collect();
        let mut words: Vec<Word> = ["AA", "BB", "AAAA", "BBBB", "AABB", "ABAB"]
            .map(Word::from)
            .to_vec();
        for r in &records {
            words.extend(r.words());
        }
        let mut seen = std::collections::HashSet::new();
        words.retain(|w| seen.insert(w.canonical()));
        let words: Vec<Word> = words.iter().map(Word::canonical).collect();
        let index: HashMap<Word, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let mut pairs = Vec::new();
        let mut pair_index = HashMap::new();
        for r in &records {
            for t in &r.lhs {
                if t.left.is_identity() || t.right.is_identity() {
                    continue;
                }
                let key = ordered(t.left.canonical(), t.right.canonical());
                if !pair_index.contains_key(&key) {
                    pair_index.insert(key.clone(), pairs.len());
                    pairs.push((index[&key.0], index[&key.1]));
                }
            }
        }
        Self {
            records,
            words,
            index,
            pairs,
            pair_index,
        }
    }
}

fn ordered(a: Word, b: Word) -> (Word, Word) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A single Markov chain. Randomness for iteration `i` comes from
/// dedicated streams keyed by `(seed, i)`, so a chain resumed from a
/// checkpoint continues exactly as the original would have.
pub struct Chain<T: Real> {
    params: ModelParams<T>,
    config: ChainConfig,
    x: MatrixPair<T>,
    f: MatrixPair<T>,
    action: T,
    trial_x: MatrixPair<T>,
    trial_p: MatrixPair<T>,
    trial_f: MatrixPair<T>,
    ws: ForceWorkspace<T>,
    products: Products<T>,
    evaluator: WordEvaluator<T>,
    monitor: Monitor,
    sample: Sample,
    completed: usize,
    hermiticity_failures: usize,
    rejections: usize,
}

impl<T: Real> Chain<T> {
    /// Chain started at `X₁ = 0`.
    pub fn new(params: ModelParams<T>, config: ChainConfig) -> Result<Self, ChainError> {
        Self::resume(params, config, MatrixPair::zeros(params.size), 0)
    }

    /// Chain continuing from state `x` after `completed` iterations.
    pub fn resume(
        params: ModelParams<T>,
        config: ChainConfig,
        x: MatrixPair<T>,
        completed: usize,
    ) -> Result<Self, ChainError> {
        config.validate()?;
        let n = params.size;
        if x.dim() != n {
            return Err(ModelError::StateDimension {
                expected: n,
                state: x.dim(),
            }
            .into());
        }
        let mut ws = ForceWorkspace::new(n);
        let mut f = MatrixPair::zeros(n);
        force_into(&params, &x, &mut ws, &mut f)?;
        let monitor = Monitor::new(&params, config.sde_set);
        let mut chain = Self {
            params,
            config,
            trial_x: x.clone(),
            trial_p: MatrixPair::zeros(n),
            trial_f: f.clone(),
            x,
            f,
            action: T::zero(),
            ws,
            products: Products::new(n),
            evaluator: WordEvaluator::new(n),
            monitor,
            sample: Sample::default(),
            completed,
            hermiticity_failures: 0,
            rejections: 0,
        };
        let inv = chain.products.invariants(&chain.x);
        chain.action = inv.action(&chain.params);
        chain.sample = chain.measure(inv);
        Ok(chain)
    }

    pub fn state(&self) -> &MatrixPair<T> {
        &self.x
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn monitored_words(&self) -> &[Word] {
        &self.monitor.words
    }

    fn measure(&mut self, inv: TraceInvariants<T>) -> Sample {
        let x = &self.x;
        let inv_n = 1.0 / self.params.size as f64;
        let (a6, b6) = self.products.sixth(x);
        let t22 = inv.abba.as_f64() * inv_n;
        let t1111 = inv.abab.as_f64() * inv_n;
        let t4 = 0.5 * (inv.a4 + inv.b4).as_f64() * inv_n;
        let slack = 1e-9 * (1.0 + t4.abs());
        let words = self
            .monitor
            .words
            .iter()
            .map(|w| self.evaluator.trace(w, x).re.as_f64())
            .collect();
        Sample {
            action: inv.action(&self.params).as_f64(),
            t2: 0.5 * (inv.a2 + inv.b2).as_f64() * inv_n,
            t4,
            t22,
            t1111,
            a6: a6.as_f64() * inv_n,
            b6: b6.as_f64() * inv_n,
            hierarchy_ok: -t22 <= t1111 + slack && t1111 <= t22 + slack && t22 <= t4 + slack,
            words,
        }
    }

    fn reject(&mut self) -> Step {
        self.rejections += 1;
        if self.config.stall_limit > 0 && self.rejections >= self.config.stall_limit {
            return Step::Aborted(AbortReason::Divergence {
                observable: "stalled".to_string(),
                value: self.rejections as f64,
            });
        }
        Step::Moved { accepted: false }
    }

    /// Propose, test and (maybe) move. Iteration numbers start at 1.
    pub fn step(&mut self) -> Step {
        let iteration = (self.completed + 1) as u64;
        self.completed += 1;
        let seed = self.config.seed;
        let n_real = self.params.n_real();
        let eps = T::of(self.config.epsilon);
        let half = eps * T::of(0.5);

        let mut momentum_rng = stream(seed, iteration, Role::Momentum);
        self.trial_p = MatrixPair::sample_momentum(self.params.size, &mut momentum_rng);
        let kinetic_start = self.trial_p.kinetic_energy();
        self.trial_x.copy_from(&self.x);
        self.trial_f.copy_from(&self.f);
        if self.config.acceptance == AcceptanceRule::Hamiltonian {
            self.trial_p.axpy(-half, &self.f);
        }
        let integrated = leapfrog_in_place(
            &self.params,
            &mut self.trial_x,
            &mut self.trial_p,
            &mut self.trial_f,
            eps,
            self.config.steps_per_trajectory,
            &mut self.ws,
        );

        if !self.trial_x.is_finite() {
            return Step::Aborted(AbortReason::Divergence {
                observable: "proposal".to_string(),
                value: f64::INFINITY,
            });
        }
        let hermitian = integrated.is_ok()
            && self.trial_x.hermiticity_deviation() <= self.trial_x.hermiticity_tolerance();
        if hermitian {
            self.hermiticity_failures = 0;
        } else {
            self.hermiticity_failures += 1;
            if self.hermiticity_failures >= self.config.max_hermitize_attempts {
                return Step::Aborted(AbortReason::HermiticityLost {
                    attempts: self.hermiticity_failures,
                });
            }
        }
        self.trial_x.hermitize_in_place();
        if integrated.is_err() {
            // The force failed its own hermiticity check; nothing to test.
            return self.reject();
        }

        let inv = self.products.invariants(&self.trial_x);
        let trial_action = inv.action(&self.params);
        let delta = match self.config.acceptance {
            AcceptanceRule::Hamiltonian => {
                self.trial_p.axpy(half, &self.trial_f);
                n_real * (trial_action - self.action) + self.trial_p.kinetic_energy()
                    - kinetic_start
            }
            AcceptanceRule::DeltaSOnly => n_real * (trial_action - self.action),
        };
        let delta = delta.as_f64();
        let delta = if delta.is_nan() { f64::INFINITY } else { delta };
        let mut accept_rng = stream(seed, iteration, Role::Accept);
        if !accept(delta, &mut accept_rng) {
            return self.reject();
        }
        self.rejections = 0;
        std::mem::swap(&mut self.x, &mut self.trial_x);
        std::mem::swap(&mut self.f, &mut self.trial_f);
        self.action = trial_action;
        self.sample = self.measure(inv);
        if let Some((name, value)) = self.sample.divergent(self.config.divergence_bound) {
            return Step::Aborted(AbortReason::Divergence {
                observable: name.to_string(),
                value,
            });
        }
        Step::Moved { accepted: true }
    }
}

/// Per recorded iteration observables and SDE residuals (running means
/// over the trailing half of the chain up to that iteration).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub iteration: Vec<usize>,
    pub action: Vec<f64>,
    pub t2: Vec<f64>,
    pub t4: Vec<f64>,
    pub t22: Vec<f64>,
    pub t1111: Vec<f64>,
    pub accepted: Vec<bool>,
    pub residual_labels: Vec<String>,
    /// `residuals[r][k]`: record `r` at recorded index `k`.
    pub residuals: Vec<Vec<f64>>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iteration.is_empty()
    }

    /// Σ_r residual_r² at each recorded index.
    pub fn residual_sq_sum(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.residuals.iter().map(|r| r[k] * r[k]).sum())
            .collect()
    }

    /// Tab-separated trace: iteration, action, t2, t4, t22, t1111, one
    /// column per residual, accepted flag.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "iteration\taction\tt2\tt4\tt22\tt1111")?;
        for l in &self.residual_labels {
            write!(w, "\tres[{l}]")?;
        }
        writeln!(w, "\taccepted")?;
        for k in 0..self.len() {
            write!(
                w,
                "{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}",
                self.iteration[k],
                self.action[k],
                self.t2[k],
                self.t4[k],
                self.t22[k],
                self.t1111[k]
            )?;
            for r in &self.residuals {
                write!(w, "\t{:.6e}", r[k])?;
            }
            writeln!(w, "\t{}", u8::from(self.accepted[k]))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub t2: Estimate,
    pub t4: Estimate,
    pub t22: Estimate,
    pub t1111: Estimate,
}

/// Outcome of [`thermalisation_index`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thermalisation {
    /// 1-based index.
    pub tau: usize,
    /// True when the SDE criterion was never met and `τ = n/2` was used.
    pub fallback: bool,
}

/// First 1-based index at which `Σ_r residuals[r][k]²` drops below
/// `sde_epsilon`; `len/2` (flagged) if it never does.
pub fn thermalisation_index(residuals: &[Vec<f64>], sde_epsilon: f64) -> Thermalisation {
    let len = residuals.first().map_or(0, Vec::len);
    for k in 0..len {
        let s: f64 = residuals.iter().map(|r| r[k] * r[k]).sum();
        if s < sde_epsilon {
            return Thermalisation {
                tau: k + 1,
                fallback: false,
            };
        }
    }
    Thermalisation {
        tau: (len / 2).max(1),
        fallback: true,
    }
}

/// Correlator estimates from window means of recorded samples.
struct WindowMeans<'a> {
    monitor: &'a Monitor,
    singles: &'a [PrefixSums],
    pairs: &'a [PrefixSums],
    lo: usize,
    hi: usize,
}

impl Correlators for WindowMeans<'_> {
    fn single(&self, w: &Word) -> Option<f64> {
        let i = *self.monitor.index.get(w)?;
        Some(self.singles[i].mean(self.lo, self.hi))
    }

    fn pair(&self, l: &Word, r: &Word) -> Option<f64> {
        let i = *self
            .monitor
            .pair_index
            .get(&ordered(l.clone(), r.clone()))?;
        Some(self.pairs[i].mean(self.lo, self.hi))
    }
}

/// `LHS − RHS` of `record` evaluated on correlator estimates.
pub fn sde_residual(
    record: &SdeRecord<f64>,
    estimates: &impl Correlators,
) -> Result<f64, ChainError> {
    record.residual(estimates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub converged: bool,
    pub abort_iteration: Option<usize>,
    pub abort_reason: Option<AbortReason>,
    /// Fraction of planned iterations left uncomputed.
    pub abort_fraction: f64,
    pub tau: Option<Thermalisation>,
    pub moments: Option<Moments>,
    /// `(label, residual)` on post-τ means.
    pub sde_post_tau: Vec<(String, f64)>,
    pub acceptance_rate: f64,
    /// Recorded samples that broke `−t22 ≤ t1111 ≤ t22 ≤ t4`.
    pub hierarchy_violations: usize,
    pub params: ModelParams<f64>,
    pub config: ChainConfig,
    #[serde(skip)]
    pub series: ObservableSeries,
    /// Words whose traces were recorded, and their post-τ estimates.
    pub word_means: Vec<(String, Estimate)>,
}

impl RunOutcome {
    pub fn is_hermiticity_loss(&self) -> bool {
        matches!(self.abort_reason, Some(AbortReason::HermiticityLost { .. }))
    }

    /// Post-τ estimates keyed by canonical word.
    pub fn word_estimates(&self) -> HashMap<Word, Estimate> {
        self.word_means
            .iter()
            .filter_map(|(w, e)| Some((w.parse::<Word>().ok()?.canonical(), *e)))
            .collect()
    }
}

/// Run the chain for `config.n` iterations from `X₁ = 0` and decide
/// `MC(g, h)`. Aborts are reported in the outcome, not as errors.
pub fn mc_run<T: Real>(
    params: &ModelParams<T>,
    config: &ChainConfig,
) -> Result<RunOutcome, ChainError> {
    let chain = Chain::new(*params, config.clone())?;
    run_chain(chain, config.n)
}

/// Drive `chain` until iteration `n`, then post-process.
pub fn run_chain<T: Real>(mut chain: Chain<T>, n: usize) -> Result<RunOutcome, ChainError> {
    let config = chain.config.clone();
    let stride = config.observable_stride;
    let nwords = chain.monitor.words.len();
    let mut series = ObservableSeries::default();
    let mut word_samples: Vec<Vec<f64>> = vec![Vec::new(); nwords];
    let mut pair_samples: Vec<Vec<f64>> = vec![Vec::new(); chain.monitor.pairs.len()];
    let mut accepted_count = 0usize;
    let mut violations = 0usize;
    let mut abort = None;
    let start = chain.completed;

    while chain.completed < n {
        let step = chain.step();
        let i = chain.completed;
        let accepted = match step {
            Step::Moved { accepted } => accepted,
            Step::Aborted(reason) => {
                abort = Some((i, reason));
                break;
            }
        };
        accepted_count += usize::from(accepted);
        if !i.is_multiple_of(stride) {
            continue;
        }
        let s = chain.sample();
        series.iteration.push(i);
        series.action.push(s.action);
        series.t2.push(s.t2);
        series.t4.push(s.t4);
        series.t22.push(s.t22);
        series.t1111.push(s.t1111);
        series.accepted.push(accepted);
        violations += usize::from(!s.hierarchy_ok);
        for (col, v) in word_samples.iter_mut().zip(&s.words) {
            col.push(*v);
        }
        for (col, &(a, b)) in pair_samples.iter_mut().zip(&chain.monitor.pairs) {
            col.push(s.words[a] * s.words[b]);
        }
    }

    let params = ModelParams::new(
        chain.params.q.as_f64(),
        chain.params.g.as_f64(),
        chain.params.h.as_f64(),
        chain.params.size,
    )?;
    let monitor = &chain.monitor;
    series.residual_labels = monitor.records.iter().map(SdeRecord::label).collect();
    let singles: Vec<PrefixSums> = word_samples.iter().map(|c| PrefixSums::new(c)).collect();
    let pairs: Vec<PrefixSums> = pair_samples.iter().map(|c| PrefixSums::new(c)).collect();
    let len = series.len();
    series.residuals = monitor
        .records
        .iter()
        .map(|r| {
            (0..len)
                .map(|k| {
                    let view = WindowMeans {
                        monitor,
                        singles: &singles,
                        pairs: &pairs,
                        lo: k / 2,
                        hi: k + 1,
                    };
                    r.residual(&view).expect("monitor covers every record word")
                })
                .collect()
        })
        .collect();

    let planned = n - start;
    let done = chain.completed - start;
    let acceptance_rate = if done > 0 {
        accepted_count as f64 / done as f64
    } else {
        0.0
    };
    if let Some((i, reason)) = abort {
        return Ok(RunOutcome {
            converged: false,
            abort_iteration: Some(i),
            abort_reason: Some(reason),
            abort_fraction: (n - i + 1) as f64 / planned.max(1) as f64,
            tau: None,
            moments: None,
            sde_post_tau: Vec::new(),
            acceptance_rate,
            hierarchy_violations: violations,
            params,
            config,
            series,
            word_means: Vec::new(),
        });
    }

    let th = thermalisation_index(&series.residuals, config.sde_epsilon);
    // Recorded index k ↔ iteration series.iteration[k]; report τ in iterations.
    let k0 = th.tau.min(len);
    let tau = Thermalisation {
        tau: series
            .iteration
            .get(k0.saturating_sub(1))
            .copied()
            .unwrap_or(1),
        fallback: th.fallback,
    };
    let post = |v: &Vec<f64>| estimate(&v[k0..]);
    let moments = (k0 < len).then(|| Moments {
        t2: post(&series.t2),
        t4: post(&series.t4),
        t22: post(&series.t22),
        t1111: post(&series.t1111),
    });
    let view = WindowMeans {
        monitor,
        singles: &singles,
        pairs: &pairs,
        lo: k0.min(len.saturating_sub(1)),
        hi: len,
    };
    let sde_post_tau = if len > 0 {
        monitor
            .records
            .iter()
            .map(|r| {
                (
                    r.label(),
                    r.residual(&view).expect("monitor covers every record word"),
                )
            })
            .collect()
    } else {
        Vec::new()
    };
    let word_means = if len > 0 {
        monitor
            .words
            .iter()
            .zip(&word_samples)
            .map(|(w, s)| (w.to_string(), estimate(&s[view.lo..view.hi])))
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        converged: true,
        abort_iteration: None,
        abort_reason: None,
        abort_fraction: 0.0,
        tau: Some(tau),
        moments,
        sde_post_tau,
        acceptance_rate,
        hierarchy_violations: violations,
        params,
        config,
        series,
        word_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::HermitianMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(q: f64, g: f64, h: f64, n: usize) -> ModelParams<f64> {
        ModelParams::new(q, g, h, n).unwrap()
    }

    #[test]
    fn single_step_with_zero_momentum() {
        let eps = 1e-4;
        let p = params(1.0, 0.0, 0.0, 2);
        let x = MatrixPair::new(HermitianMatrix::identity(2), HermitianMatrix::zeros(2)).unwrap();
        let (xt, _) = leapfrog_from(&p, &x, &MatrixPair::zeros(2), eps, 1).unwrap();
        let expected = 1.0 - eps * eps * 2.0;
        for i in 0..2 {
            assert!((xt.a.get(i, i).re - expected).abs() < 1e-15);
        }
        assert_eq!(xt.b, HermitianMatrix::zeros(2));
    }

    #[test]
    fn accept_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(accept_delta_s(-1.0, 32, &mut rng));
        // With p = 0.9 the threshold (1/32) ln(1/0.9) ≈ 0.00329 < 0.01.
        let threshold = (1.0f64 / 0.9).ln() / 32.0;
        assert!((threshold - 0.00329).abs() < 1e-5);
        assert!(!(0.01 < threshold));
    }

    #[test]
    fn thermalisation_examples() {
        let zeros = vec![vec![0.0; 10]; 3];
        assert_eq!(
            thermalisation_index(&zeros, 1e-2),
            Thermalisation {
                tau: 1,
                fallback: false
            }
        );
        // r_i² = 1.37/(i + ½) drops below 1e-2 first at i = 137.
        let shifted: Vec<f64> = (1..=400)
            .map(|i| (0.01 * 137.0 / (i as f64 + 0.5)).sqrt())
            .collect();
        assert_eq!(thermalisation_index(&[shifted], 1e-2).tau, 137);
        let never = vec![vec![1.0; 10]];
        assert_eq!(
            thermalisation_index(&never, 1e-2),
            Thermalisation {
                tau: 5,
                fallback: true
            }
        );
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        let bad = ChainConfig {
            n: 1,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChainConfig {
            epsilon: 0.0,
            ..ChainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
