//! C interface to `ris-idbp`.
//!
//! Every entry point returns a [`RisStatus`]; on failure the message can be read
//! back with [`ris_last_error`]. Handles are opaque and must be released with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_idbp::baselines::{exhaustive_search, tmh, DEFAULT_ES_CAP};
use ris_idbp::channel::{synthesize_channel, ChannelRealization};
use ris_idbp::idbp::{idbp_search, SearchConfig, TransitionPolicy};
use ris_idbp::metrics::{evaluate_link, GainModel, LeafObjective};
use ris_idbp::priors::{estimate_prior, sample_candidate_pool, ConditionalPrior, EPSILON_FLOOR};
use ris_idbp::transceiver::{finalize_digital, DesignOptions, FsChoice, TransceiverSet};
use ris_idbp::{Error, PowerModel, SystemConfig};

/// Status codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RankDeficient = 3,
    Singular = 4,
    AlphabetViolation = 5,
    SpaceTooLarge = 6,
    BufferTooSmall = 7,
    Numerical = 8,
    Parse = 9,
    Panic = 10,
}

/// System parameters.
pub struct RisConfig {
    inner: SystemConfig,
}

/// One channel draw with designed transceivers.
pub struct RisProblem {
    cfg: SystemConfig,
    channel: ChannelRealization,
    set: TransceiverSet,
    leaf: LeafObjective,
}

/// A first-order Markov prior over phase indices.
pub struct RisPrior {
    inner: ConditionalPrior,
}

/// Link metrics for a phase sequence.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RisMetrics {
    pub mse: f64,
    pub rate_bits: f64,
    pub energy_eff: f64,
    pub objective: f64,
}

/// Search outcome written by the optimizers.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RisSearchResult {
    pub objective: f64,
    pub leaf_evals: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RisStatus {
    match e {
        Error::InvalidConfig(_) | Error::InvalidBits(_) | Error::ZeroPower | Error::EmptyPool => {
            RisStatus::InvalidArgument
        }
        Error::DimensionMismatch(_) => RisStatus::InvalidArgument,
        Error::RankDeficient { .. } => RisStatus::RankDeficient,
        Error::Singular => RisStatus::Singular,
        Error::AlphabetViolation { .. } => RisStatus::AlphabetViolation,
        Error::SpaceTooLarge { .. } | Error::BudgetExceeded { .. } => RisStatus::SpaceTooLarge,
        Error::EigFailure => RisStatus::Numerical,
        Error::Io(_) | Error::Parse(_) => RisStatus::Parse,
    }
}

fn guard(body: impl FnOnce() -> Result<(), RisStatus>) -> RisStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RisStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside ris-idbp".into());
            RisStatus::Panic
        }
    }
}

fn fail(e: Error) -> RisStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> RisStatus {
    set_error(format!("{what} is null"));
    RisStatus::NullPointer
}

unsafe fn phases_from(phases: *const u32, len: usize, problem: &RisProblem) -> Result<Vec<usize>, RisStatus> {
    if phases.is_null() {
        return Err(null("phases"));
    }
    if len != problem.cfg.n_ris {
        return Err(fail(Error::DimensionMismatch(format!(
            "{len} phases for {} elements",
            problem.cfg.n_ris
        ))));
    }
    let s = std::slice::from_raw_parts(phases, len);
    let out: Vec<usize> = s.iter().map(|&p| p as usize).collect();
    if let Some(&bad) = out.iter().find(|&&p| p >= problem.cfg.k()) {
        return Err(fail(Error::AlphabetViolation {
            index: bad,
            k: problem.cfg.k(),
        }));
    }
    Ok(out)
}

unsafe fn write_phases(out: *mut u32, len: usize, seq: &[usize]) -> Result<(), RisStatus> {
    if out.is_null() {
        return Err(null("out_phases"));
    }
    if len < seq.len() {
        set_error(format!("buffer holds {len} of {} phases", seq.len()));
        return Err(RisStatus::BufferTooSmall);
    }
    let dst = std::slice::from_raw_parts_mut(out, seq.len());
    for (d, &s) in dst.iter_mut().zip(seq) {
        *d = s as u32;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ris_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message of this thread into `buf`, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ris_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Reference configuration for an RIS with `n_ris` elements.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with [`ris_config_free`].
#[no_mangle]
pub unsafe extern "C" fn ris_config_reference(n_ris: usize, out: *mut *mut RisConfig) -> RisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SystemConfig::reference(12).with_ris(n_ris);
        cfg.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(RisConfig { inner: cfg }));
        Ok(())
    })
}

/// Set SNR in dB, ADC bits and seed on a configuration.
///
/// # Safety
/// `cfg` must come from [`ris_config_reference`].
#[no_mangle]
pub unsafe extern "C" fn ris_config_set(cfg: *mut RisConfig, snr_db: f64, adc_bits: u32, seed: u64) -> RisStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let next = c.inner.clone().with_snr(snr_db).with_bits(adc_bits).with_seed(seed);
        next.validate().map_err(fail)?;
        c.inner = next;
        Ok(())
    })
}

/// Parse a configuration from a NUL-terminated TOML string.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ris_config_parse(text: *const c_char, out: *mut *mut RisConfig) -> RisStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| fail(Error::Parse(e.to_string())))?;
        let spec = ris_idbp::harness::ConfigFile::parse(s)
            .and_then(|f| f.into_spec())
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(RisConfig { inner: spec.base }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ris_config_free(cfg: *mut RisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draw a channel from `seed` and design the transceivers for it.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ris_problem_new(cfg: *const RisConfig, seed: u64, out: *mut *mut RisProblem) -> RisStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = c.inner.clone().with_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channel = synthesize_channel(&cfg, &mut rng).map_err(fail)?;
        let zero = vec![0; cfg.n_ris];
        let (set, _) = TransceiverSet::design(&channel, &cfg, DesignOptions::default(), FsChoice::Identity, &zero)
            .map_err(fail)?;
        let leaf = LeafObjective::new(&channel, &set, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(RisProblem {
            cfg,
            channel,
            set,
            leaf,
        }));
        Ok(())
    })
}

/// Number of RIS elements of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ris_problem_elements(problem: *const RisProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.cfg.n_ris)
}

/// Alphabet size of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ris_problem_alphabet(problem: *const RisProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.cfg.k())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ris_problem_free(problem: *mut RisProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Objective value of a phase sequence.
///
/// # Safety
/// `phases` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ris_objective(
    problem: *const RisProblem,
    phases: *const u32,
    len: usize,
    out: *mut f64,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let seq = phases_from(phases, len, p)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = p.leaf.value(&seq);
        Ok(())
    })
}

/// MSE, rate, energy efficiency and objective of a phase sequence.
///
/// # Safety
/// `phases` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ris_metrics(
    problem: *const RisProblem,
    phases: *const u32,
    len: usize,
    out: *mut RisMetrics,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let seq = phases_from(phases, len, p)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (f_s, w_s) = finalize_digital(&p.set.f_s, &seq, &p.cfg.phase_alphabet).map_err(fail)?;
        let set = TransceiverSet {
            f_s,
            w_s,
            ..p.set.clone()
        };
        let rep = evaluate_link(&p.channel, &set, &p.cfg, &seq, &PowerModel::default(), GainModel::Ideal)
            .map_err(fail)?;
        *out = RisMetrics {
            mse: rep.mse,
            rate_bits: rep.rate_bits,
            energy_eff: rep.energy_eff,
            objective: rep.objective,
        };
        Ok(())
    })
}

/// Exhaustive search over all sequences.
///
/// # Safety
/// `out_phases` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ris_exhaustive(
    problem: *const RisProblem,
    out_phases: *mut u32,
    len: usize,
    out: *mut RisSearchResult,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = exhaustive_search(&p.leaf, p.cfg.k(), p.cfg.n_ris, DEFAULT_ES_CAP).map_err(fail)?;
        write_phases(out_phases, len, &r.sequence.phases)?;
        *out = RisSearchResult {
            objective: r.objective,
            leaf_evals: r.evaluations,
        };
        Ok(())
    })
}

/// Trace-maximization heuristic.
///
/// # Safety
/// `out_phases` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ris_tmh(
    problem: *const RisProblem,
    out_phases: *mut u32,
    len: usize,
    out: *mut RisSearchResult,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = tmh(&p.channel, &p.set, &p.cfg).map_err(fail)?;
        write_phases(out_phases, len, &r.sequence.phases)?;
        *out = RisSearchResult {
            objective: p.leaf.value(&r.sequence.phases),
            leaf_evals: 0,
        };
        Ok(())
    })
}

/// Estimate a prior from the `pool_size` best of `budget` candidates.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ris_prior_from_pool(
    problem: *const RisProblem,
    budget: usize,
    pool_size: usize,
    seed: u64,
    out: *mut *mut RisPrior,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = sample_candidate_pool(&p.leaf, p.cfg.k(), p.cfg.n_ris, budget, pool_size, &mut rng);
        let prior = estimate_prior(&pool, p.cfg.k(), p.cfg.n_ris, EPSILON_FLOOR).map_err(fail)?;
        *out = Box::into_raw(Box::new(RisPrior { inner: prior }));
        Ok(())
    })
}

/// Parse a prior from its plain-text matrix form.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ris_prior_parse(text: *const c_char, out: *mut *mut RisPrior) -> RisStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| fail(Error::Parse(e.to_string())))?;
        let prior = ConditionalPrior::from_text(s).map_err(fail)?;
        *out = Box::into_raw(Box::new(RisPrior { inner: prior }));
        Ok(())
    })
}

/// Write the prior as text into `buf`. Returns the length needed excluding the
/// NUL, or 0 for a null handle.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ris_prior_text(prior: *const RisPrior, buf: *mut c_char, len: usize) -> usize {
    let Some(p) = prior.as_ref() else {
        return 0;
    };
    let text = p.inner.to_text();
    if !buf.is_null() && len > 0 {
        let n = text.len().min(len - 1);
        ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, n);
        *buf.add(n) = 0;
    }
    text.len()
}

/// # Safety
/// `prior` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ris_prior_free(prior: *mut RisPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Prior-guided tree search keeping `k_best` children per branching node.
///
/// # Safety
/// Handles must be live, `out_phases` must hold `len` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ris_idbp(
    problem: *const RisProblem,
    prior: *const RisPrior,
    k_best: usize,
    out_phases: *mut u32,
    len: usize,
    out: *mut RisSearchResult,
) -> RisStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let q = prior.as_ref().ok_or_else(|| null("prior"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if q.inner.k() != p.cfg.k() {
            return Err(fail(Error::DimensionMismatch(format!(
                "prior over {} states for alphabet of {}",
                q.inner.k(),
                p.cfg.k()
            ))));
        }
        let scfg = SearchConfig {
            k_best,
            ..SearchConfig::default()
        };
        let t = idbp_search(p.cfg.n_ris, &scfg, &q.inner, TransitionPolicy::Prior, &p.leaf).map_err(fail)?;
        write_phases(out_phases, len, &t.best_sequence.phases)?;
        *out = RisSearchResult {
            objective: t.best_objective,
            leaf_evals: t.leaf_evaluations as u64,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last() -> String {
        LAST_ERROR.with(|e| e.borrow().clone())
    }

    #[test]
    fn status_values_are_stable() {
        assert_eq!(RisStatus::Ok as i32, 0);
        assert_eq!(RisStatus::Parse as i32, 9);
        assert_eq!(RisStatus::Panic as i32, 10);
    }

    #[test]
    fn errors_map_to_codes_and_messages() {
        assert_eq!(fail(Error::Singular), RisStatus::Singular);
        assert_eq!(fail(Error::BudgetExceeded { cap: 3 }), RisStatus::SpaceTooLarge);
        assert_eq!(fail(Error::InvalidBits(0)), RisStatus::InvalidArgument);
        assert!(!last().is_empty());
        assert_eq!(null("cfg"), RisStatus::NullPointer);
        assert!(last().contains("cfg"));
    }

    #[test]
    fn guard_catches_panics() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let s = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(s, RisStatus::Panic);
        assert_eq!(guard(|| Ok(())), RisStatus::Ok);
        assert_eq!(guard(|| Err(RisStatus::Numerical)), RisStatus::Numerical);
    }

    #[test]
    fn phase_buffers() {
        let mut buf = [9u32; 4];
        unsafe {
            assert_eq!(write_phases(buf.as_mut_ptr(), 4, &[2, 1, 0]), Ok(()));
            assert_eq!(write_phases(buf.as_mut_ptr(), 2, &[2, 1, 0]), Err(RisStatus::BufferTooSmall));
            assert_eq!(write_phases(std::ptr::null_mut(), 4, &[0]), Err(RisStatus::NullPointer));
        }
        assert_eq!(buf, [2, 1, 0, 9]);
    }
}
