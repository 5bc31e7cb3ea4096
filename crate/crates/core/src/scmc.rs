//! Adaptive sequentially constrained Monte Carlo.
//!
//! A box-uniform particle cloud is pushed into the constrained region by
//! annealing the probit-relaxed indicator `Π_k Φ(-τ C_k(x))` from `τ = 0`
//! to `τ_T`. Each step picks the next `τ` so the effective sample size of the
//! incremental weights stays at `ess_fraction · N`, then reweights,
//! resamples (systematic) and moves every particle with a one-coordinate-at-a-
//! time Metropolis-Hastings sweep whose proposal scales adapt to the
//! acceptance rate of the previous step.
//!
//! Randomness is drawn from ChaCha substreams keyed by `(seed, step, purpose)`
//! with the particle index as the stream id, so the particle loops can run on
//! the rayon pool and still reproduce the sequential result bit for bit.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{soft_indicator_log, Region, DEFAULT_EQ_TOL};

/// Proposal scales are kept within `[SD_FLOOR · width, width]`.
const SD_FLOOR: f64 = 1e-6;
const INITIAL_SD_FRACTION: f64 = 0.25;
const TAU_REL_TOL: f64 = 1e-3;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScmcConfig {
    pub n_particles: usize,
    pub tau_target: f64,
    pub ess_fraction: f64,
    pub mh_sweeps_per_step: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    /// Equality tolerance used only for the feasible-fraction diagnostic.
    pub eq_tol: f64,
    /// Resample only when the reweighted ESS falls below the target.
    pub conditional_resampling: bool,
    pub max_steps: usize,
}

impl Default for ScmcConfig {
    fn default() -> Self {
        ScmcConfig {
            n_particles: 10_000,
            tau_target: 1e6,
            ess_fraction: 0.5,
            mh_sweeps_per_step: 1,
            seed: 0,
            target_acceptance: 0.3,
            eq_tol: DEFAULT_EQ_TOL,
            conditional_resampling: false,
            max_steps: 200,
        }
    }
}

impl ScmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_particles < 2 {
            return bad(format!(
                "n_particles must be >= 2, got {}",
                self.n_particles
            ));
        }
        if !(self.tau_target > 0.0 && self.tau_target.is_finite()) {
            return bad(format!(
                "tau_target must be positive, got {}",
                self.tau_target
            ));
        }
        if !(self.ess_fraction > 0.0 && self.ess_fraction <= 1.0) {
            return bad(format!(
                "ess_fraction must be in (0, 1], got {}",
                self.ess_fraction
            ));
        }
        if self.target_ess() < 2.0 {
            return bad(format!(
                "ess_fraction * n_particles must be >= 2, got {}",
                self.target_ess()
            ));
        }
        if self.mh_sweeps_per_step == 0 {
            return bad("mh_sweeps_per_step must be >= 1".into());
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!(
                "target_acceptance must be in (0, 1), got {}",
                self.target_acceptance
            ));
        }
        if self.eq_tol.is_nan() || self.eq_tol < 0.0 {
            return bad(format!("eq_tol must be >= 0, got {}", self.eq_tol));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        Ok(())
    }

    pub fn target_ess(&self) -> f64 {
        self.ess_fraction * self.n_particles as f64
    }
}

/// `N` weighted points in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    points: Array2<f64>,
    log_weights: Vec<f64>,
    pub t: usize,
}

impl ParticleCloud {
    pub fn new(points: Array2<f64>, log_weights: Vec<f64>, t: usize) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: points.nrows(),
            });
        }
        if log_weights.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                got: log_weights.len(),
            });
        }
        let points = points.as_standard_layout().into_owned();
        Ok(ParticleCloud {
            points,
            log_weights,
            t,
        })
    }

    /// Equal weights `1/N`.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, vec![-(n as f64).ln(); n], 0)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Normalised linear weights.
    pub fn weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|l| (l - lse).exp()).collect()
    }

    fn flat(&self) -> &[f64] {
        self.points.as_slice().expect("standard layout")
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Effective sample size `(Σw)² / Σw²` of log-weights.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    let m = log_weights
        .iter()
        .copied()
        .filter(|l| !l.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::TotalConstraintViolation);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in log_weights {
        let w = (l - m).exp();
        s1 += w;
        s2 += w * w;
    }
    Ok(s1 * s1 / s2)
}

fn ess_or_zero(log_weights: &[f64]) -> f64 {
    ess(log_weights).unwrap_or(0.0)
}

/// One step of the realised constraint schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub tau: f64,
    /// ESS of the reweighted cloud, before resampling.
    pub ess: f64,
    /// Per-dimension MH acceptance rate at this step.
    pub acceptance: Vec<f64>,
    /// Proposal standard deviations used by this step's MH sweep.
    pub proposal_sds: Vec<f64>,
    /// Largest positive deviation over all particles and constraints after the move.
    pub max_deviation: f64,
    pub feasible_fraction: f64,
    /// `tau` was the cap (target) rather than a bisection root.
    pub capped: bool,
    /// The solver could not meet the ESS floor and took a minimal increment.
    pub flagged: bool,
    /// ESS was observed to increase with tau inside the bracket.
    pub non_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmcSchedule {
    pub n_particles: usize,
    pub target_ess: f64,
    /// `τ_0 = 0, τ_1, …, τ_T`.
    pub taus: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl ScmcSchedule {
    pub fn ess_trace(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.ess).collect()
    }

    pub fn acceptance_trace(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.acceptance.clone()).collect()
    }

    pub fn proposal_sds(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.proposal_sds.clone()).collect()
    }

    /// Number of annealing steps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_tau(&self) -> f64 {
        *self.taus.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Init = 1,
    Resample = 2,
    Move = 3,
}

fn substream(seed: u64, step: usize, purpose: Purpose, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(step as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index as u64);
    rng
}

/// `N` i.i.d. box-uniform points with weights `1/N`.
pub fn init_cloud(region: &Region, config: &ScmcConfig) -> Result<ParticleCloud> {
    config.validate()?;
    let d = region.dim();
    let bbox = region.bbox();
    let mut flat = vec![0.0; config.n_particles * d];
    flat.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
        let mut rng = substream(config.seed, 0, Purpose::Init, i);
        bbox.sample(&mut rng, x);
    });
    let points = Array2::from_shape_vec((config.n_particles, d), flat).expect("shape");
    ParticleCloud::uniform(points)
}

fn all_deviations(region: &Region, flat: &[f64]) -> Result<Vec<f64>> {
    let (d, k) = (region.dim(), region.n_constraints());
    let mut devs = vec![0.0; flat.len() / d * k];
    if k == 0 {
        return Ok(devs);
    }
    devs.par_chunks_mut(k)
        .zip(flat.par_chunks(d))
        .try_for_each(|(out, x)| region.deviation_into(x, out))?;
    Ok(devs)
}

/// Outcome of the adaptive `τ` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauStep {
    pub tau: f64,
    /// ESS of the reweighted cloud at `tau`.
    pub ess: f64,
    pub capped: bool,
    pub flagged: bool,
    pub non_monotone: bool,
}

/// Incremental log-weights `Σ_k ln Φ(-τ C_k) - ln Φ(-τ_prev C_k)` added to
/// the current log-weights.
fn reweighted(log_weights: &[f64], devs: &[f64], k: usize, tau_prev: f64, tau: f64) -> Vec<f64> {
    if k == 0 {
        return log_weights.to_vec();
    }
    log_weights
        .par_iter()
        .zip(devs.par_chunks(k))
        .map(|(lw, c)| lw + soft_indicator_log(c, tau) - soft_indicator_log(c, tau_prev))
        .collect()
}

fn solve_tau(
    log_weights: &[f64],
    devs: &[f64],
    k: usize,
    tau_prev: f64,
    target_ess: f64,
    tau_cap: f64,
) -> TauStep {
    let ess_at = |tau: f64| ess_or_zero(&reweighted(log_weights, devs, k, tau_prev, tau));

    let ess_cap = ess_at(tau_cap);
    if ess_cap >= target_ess {
        return TauStep {
            tau: tau_cap,
            ess: ess_cap,
            capped: true,
            flagged: false,
            non_monotone: false,
        };
    }

    let mut lo = tau_prev;
    let mut ess_lo = ess_at(lo);
    let mut hi = tau_cap;
    if ess_lo < target_ess {
        let tau = (tau_prev * (1.0 + TAU_REL_TOL))
            .max(tau_prev + f64::EPSILON)
            .min(tau_cap);
        return TauStep {
            tau,
            ess: ess_at(tau),
            capped: tau == tau_cap,
            flagged: true,
            non_monotone: false,
        };
    }

    let mut non_monotone = false;
    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        let width_ok = hi - lo <= TAU_REL_TOL * hi;
        if width_ok && lo > tau_prev && ess_lo <= target_ess + 1.0 {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = ess_at(mid);
        if e > ess_lo {
            non_monotone = true;
        }
        if e >= target_ess {
            lo = mid;
            ess_lo = e;
        } else {
            hi = mid;
        }
    }
    if lo == tau_prev {
        // ESS drops below the floor for every representable step.
        lo = hi;
        ess_lo = ess_at(hi);
    }
    TauStep {
        tau: lo,
        ess: ess_lo,
        capped: false,
        flagged: !converged,
        non_monotone,
    }
}

/// Largest `τ ∈ (tau_prev, tau_cap]` whose reweighted ESS stays at or above
/// `target_ess`, by bisection; returns `tau_cap` directly when it already
/// satisfies the floor.
pub fn solve_next_tau(
    cloud: &ParticleCloud,
    region: &Region,
    tau_prev: f64,
    target_ess: f64,
    tau_cap: f64,
) -> Result<TauStep> {
    if !(tau_prev >= 0.0 && tau_cap > tau_prev) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= tau_prev < tau_cap, got {tau_prev} and {tau_cap}"
        )));
    }
    if !(target_ess >= 1.0 && target_ess <= cloud.len() as f64) {
        return Err(Error::InvalidParameter(format!(
            "target ESS {target_ess} outside [1, {}]",
            cloud.len()
        )));
    }
    let devs = all_deviations(region, cloud.flat())?;
    Ok(solve_tau(
        cloud.log_weights(),
        &devs,
        region.n_constraints(),
        tau_prev,
        target_ess,
        tau_cap,
    ))
}

/// Ancestor indices by systematic resampling with offset `u ∈ [0, 1)`.
pub fn systematic_indices(log_weights: &[f64], u: f64) -> Result<Vec<usize>> {
    let n = log_weights.len();
    let lse = log_sum_exp(log_weights);
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return Err(Error::TotalConstraintViolation);
    }
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let pos = (i as f64 + u) / n as f64;
        while j < n - 1 && {
            let next = cum + (log_weights[j] - lse).exp();
            next <= pos
        } {
            cum += (log_weights[j] - lse).exp();
            j += 1;
        }
        out.push(j);
    }
    Ok(out)
}

fn gather(rows: &[f64], width: usize, idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * width);
    for &i in idx {
        out.extend_from_slice(&rows[i * width..(i + 1) * width]);
    }
    out
}

/// Reweights by the probit ratio from `tau_prev` to `tau_next`, then resamples
/// `N` particles systematically and resets the weights to `1/N`.
pub fn reweight_resample(
    cloud: &ParticleCloud,
    region: &Region,
    tau_prev: f64,
    tau_next: f64,
    seed: u64,
) -> Result<ParticleCloud> {
    if tau_next.is_nan() || tau_next <= tau_prev {
        return Err(Error::InvalidParameter(format!(
            "tau_next ({tau_next}) must exceed tau_prev ({tau_prev})"
        )));
    }
    let k = region.n_constraints();
    let devs = all_deviations(region, cloud.flat())?;
    let lw = reweighted(cloud.log_weights(), &devs, k, tau_prev, tau_next);
    ess(&lw)?;
    let u: f64 = substream(seed, cloud.t + 1, Purpose::Resample, 0).random();
    let idx = systematic_indices(&lw, u)?;
    let flat = gather(cloud.flat(), cloud.dim(), &idx);
    let points = Array2::from_shape_vec((cloud.len(), cloud.dim()), flat).expect("shape");
    let mut out = ParticleCloud::uniform(points)?;
    out.t = cloud.t + 1;
    Ok(out)
}

/// Per-particle state threaded through an MH sweep.
struct MoveOutcome {
    accepted: Vec<u32>,
}

#[allow(clippy::too_many_arguments)]
fn move_particle(
    region: &Region,
    tau: f64,
    sds: &[f64],
    sweeps: usize,
    x: &mut [f64],
    dev: &mut [f64],
    rng: &mut ChaCha8Rng,
    scratch_x: &mut [f64],
    scratch_dev: &mut [f64],
) -> Result<MoveOutcome> {
    let bbox = region.bbox();
    let mut accepted = vec![0u32; x.len()];
    let mut log_target = soft_indicator_log(dev, tau);
    for _ in 0..sweeps {
        for d in 0..x.len() {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let proposal = x[d] + sds[d] * z;
            if proposal < bbox.lower()[d] || proposal > bbox.upper()[d] {
                continue;
            }
            scratch_x.copy_from_slice(x);
            scratch_x[d] = proposal;
            region.deviation_into(scratch_x, scratch_dev)?;
            let lt = soft_indicator_log(scratch_dev, tau);
            if u.ln() < lt - log_target {
                x[d] = proposal;
                dev.copy_from_slice(scratch_dev);
                log_target = lt;
                accepted[d] += 1;
            }
        }
    }
    Ok(MoveOutcome { accepted })
}

#[allow(clippy::too_many_arguments)]
fn mh_in_place(
    region: &Region,
    tau: f64,
    sds: &[f64],
    sweeps: usize,
    flat: &mut [f64],
    devs: &mut [f64],
    seed: u64,
    step: usize,
) -> Result<Vec<f64>> {
    let (d, k) = (region.dim(), region.n_constraints());
    let n = flat.len() / d;
    // Constraint-free regions still need a chunk per particle.
    let k_chunk = k.max(1);
    let mut dev_buf;
    let devs: &mut [f64] = if k == 0 {
        dev_buf = vec![0.0; n];
        &mut dev_buf
    } else {
        devs
    };
    let outcomes: Vec<MoveOutcome> = flat
        .par_chunks_mut(d)
        .zip(devs.par_chunks_mut(k_chunk))
        .enumerate()
        .map(|(i, (x, dev))| {
            let dev = &mut dev[..k];
            let mut rng = substream(seed, step, Purpose::Move, i);
            let mut sx = vec![0.0; d];
            let mut sdv = vec![0.0; k];
            move_particle(
                region, tau, sds, sweeps, x, dev, &mut rng, &mut sx, &mut sdv,
            )
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; d];
    for o in &outcomes {
        for (c, a) in counts.iter_mut().zip(&o.accepted) {
            *c += u64::from(*a);
        }
    }
    let trials = (n * sweeps) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / trials).collect())
}

/// One or more Gibbs-type MH sweeps targeting
/// `π_τ(x) ∝ 1_box(x) Π_k Φ(-τ C_k(x))`. Returns the moved cloud and the
/// per-dimension acceptance rates.
#[allow(clippy::too_many_arguments)]
pub fn mh_move(
    cloud: &ParticleCloud,
    region: &Region,
    tau: f64,
    sds: &[f64],
    sweeps: usize,
    seed: u64,
) -> Result<(ParticleCloud, Vec<f64>)> {
    if sds.len() != region.dim() || cloud.dim() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: sds.len(),
        });
    }
    if sds.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::InvalidParameter("proposal sds must be > 0".into()));
    }
    let mut flat = cloud.flat().to_vec();
    let mut devs = all_deviations(region, &flat)?;
    let acc = mh_in_place(
        region, tau, sds, sweeps, &mut flat, &mut devs, seed, cloud.t,
    )?;
    let points = Array2::from_shape_vec((cloud.len(), cloud.dim()), flat).expect("shape");
    let moved = ParticleCloud::new(points, cloud.log_weights.clone(), cloud.t)?;
    Ok((moved, acc))
}

/// Multiplies a scale by 1.5 when acceptance runs more than 0.15 above
/// `target`, by 0.5 when more than 0.15 below, and clamps to
/// `[1e-6 · width, width]`.
pub fn adapt_proposals(sds: &[f64], acceptance: &[f64], target: f64, widths: &[f64]) -> Vec<f64> {
    sds.iter()
        .zip(acceptance)
        .zip(widths)
        .map(|((&sd, &acc), &w)| {
            let scaled = if acc > target + 0.15 {
                sd * 1.5
            } else if acc < target - 0.15 {
                sd * 0.5
            } else {
                sd
            };
            scaled.clamp(SD_FLOOR * w, w)
        })
        .collect()
}

fn diagnostics(region: &Region, devs: &[f64], eq_tol: f64, n: usize) -> (f64, f64) {
    let k = region.n_constraints();
    if k == 0 {
        return (0.0, 1.0);
    }
    let mut max_dev: f64 = 0.0;
    let mut feasible = 0usize;
    for c in devs.chunks(k) {
        for &v in c {
            max_dev = max_dev.max(v);
        }
        if region.deviation_is_feasible(c, eq_tol) {
            feasible += 1;
        }
    }
    (max_dev, feasible as f64 / n as f64)
}

/// Runs the full annealing loop from a box-uniform cloud to `tau_target`.
pub fn run_scmc(region: &Region, config: &ScmcConfig) -> Result<(ParticleCloud, ScmcSchedule)> {
    config.validate()?;
    let n = config.n_particles;
    let (d, k) = (region.dim(), region.n_constraints());
    let widths = region.bbox().widths();
    let target_ess = config.target_ess();

    let cloud = init_cloud(region, config)?;
    let mut flat = cloud.into_points().into_raw_vec_and_offset().0;
    let mut devs = all_deviations(region, &flat)?;
    let mut log_w = vec![-(n as f64).ln(); n];
    let mut sds: Vec<f64> = widths.iter().map(|w| INITIAL_SD_FRACTION * w).collect();

    let mut schedule = ScmcSchedule {
        n_particles: n,
        target_ess,
        taus: vec![0.0],
        steps: Vec::new(),
    };
    let mut tau = 0.0;
    let mut t = 0;
    while tau < config.tau_target {
        t += 1;
        if t > config.max_steps {
            return Err(Error::ScheduleExhausted {
                steps: config.max_steps,
                last_tau: tau,
            });
        }
        let step = solve_tau(&log_w, &devs, k, tau, target_ess, config.tau_target);
        log_w = reweighted(&log_w, &devs, k, tau, step.tau);
        let ess_now = ess(&log_w)?;

        if !config.conditional_resampling || ess_now < target_ess {
            let u: f64 = substream(config.seed, t, Purpose::Resample, 0).random();
            let idx = systematic_indices(&log_w, u)?;
            flat = gather(&flat, d, &idx);
            if k > 0 {
                devs = gather(&devs, k, &idx);
            }
            log_w = vec![-(n as f64).ln(); n];
        }

        let acceptance = mh_in_place(
            region,
            step.tau,
            &sds,
            config.mh_sweeps_per_step,
            &mut flat,
            &mut devs,
            config.seed,
            t,
        )?;
        let (max_deviation, feasible_fraction) = diagnostics(region, &devs, config.eq_tol, n);
        log::debug!(
            "step {t}: tau = {:.6e}, ess = {:.1}, acceptance = {:?}",
            step.tau,
            ess_now,
            acceptance
        );
        schedule.steps.push(StepRecord {
            t,
            tau: step.tau,
            ess: ess_now,
            acceptance: acceptance.clone(),
            proposal_sds: sds.clone(),
            max_deviation,
            feasible_fraction,
            capped: step.capped,
            flagged: step.flagged,
            non_monotone: step.non_monotone,
        });
        schedule.taus.push(step.tau);
        sds = adapt_proposals(&sds, &acceptance, config.target_acceptance, &widths);
        tau = step.tau;
    }

    let points = Array2::from_shape_vec((n, d), flat).expect("shape");
    let cloud = ParticleCloud::new(points, log_w, t)?;
    Ok((cloud, schedule))
}
