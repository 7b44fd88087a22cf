//! C ABI over the mask refinement pipeline: opaque problem handles,
//! status codes, and a flat config struct. The generated header lives in
//! include/remask.h.
//!
//! Thread model matches the core library: a problem handle is immutable
//! after creation and may be shared across threads; mask buffers belong
//! to the caller for the duration of a call.

#![allow(non_camel_case_types)]

use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use remask::prune::{prune_to_nm, prune_to_ratio, Granularity, PruneMethod, PruneSpec, PruneTarget};
use remask::refine::{refine_layer, GrowCriterion, PruneCriterion, RefineConfig, TerminationMetric};
use remask::synth::{generate_synthetic, SyntheticSpec};
use remask::types::{
    compute_channel_stats, ActivationMatrix, ChannelStats, MaskPattern, SparsityMask, WeightMatrix,
};
use remask::Error;

/// Result of every fallible call. Non-zero values describe the failure
/// class; remask_last_error_message() carries the detail text.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_status {
    REMASK_OK = 0,
    /// Null pointer, bad flag value, or an invalid configuration.
    REMASK_INVALID_ARGUMENT = 1,
    /// Buffer length or matrix shape disagreement.
    REMASK_DIMENSION_MISMATCH = 2,
    /// Non-finite numeric input.
    REMASK_NONFINITE = 3,
    /// Mask bytes outside {0,1} or a block-pattern violation.
    REMASK_BAD_MASK = 4,
    /// Request exceeds a supported size limit.
    REMASK_UNSUPPORTED = 5,
    /// Internal invariant failure (a bug in this library).
    REMASK_INTERNAL = 6,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_method {
    REMASK_METHOD_MAGNITUDE = 0,
    REMASK_METHOD_WANDA = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_granularity {
    REMASK_GRANULARITY_PER_ROW = 0,
    REMASK_GRANULARITY_PER_LAYER = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_metric {
    REMASK_METRIC_ABS_MEAN = 0,
    REMASK_METRIC_L2 = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_grow_criterion {
    REMASK_GROW_DSNOT = 0,
    REMASK_GROW_WANDA_LIKE = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum remask_prune_criterion {
    REMASK_PRUNE_DSNOT = 0,
    REMASK_PRUNE_WANDA_UNSIGNED = 1,
    REMASK_PRUNE_EXPECTED_CHANGE = 2,
}

/// Refinement parameters. pattern_n/pattern_m of 0/0 mean an
/// unstructured mask; otherwise swaps stay within aligned m-blocks and
/// the incoming mask must already satisfy the pattern.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct remask_refine_config {
    pub max_cycles: u32,
    pub threshold: f64,
    pub metric: remask_metric,
    pub grow: remask_grow_criterion,
    pub prune: remask_prune_criterion,
    pub variance_floor: f64,
    pub pattern_n: u32,
    pub pattern_m: u32,
}

/// One weight matrix with its calibration activations and cached channel
/// statistics. Create, use, destroy.
pub struct remask_problem {
    weights: WeightMatrix,
    activations: ActivationMatrix,
    stats: ChannelStats,
}

thread_local! {
    static LAST_ERROR: std::cell::RefCell<CString> =
        std::cell::RefCell::new(CString::new("").expect("empty message"));
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("sanitized message");
    });
}

fn status_of(err: &Error) -> remask_status {
    match err {
        Error::InvalidSpec { .. } | Error::SwapContract { .. } => {
            remask_status::REMASK_INVALID_ARGUMENT
        }
        Error::Dimension { .. } | Error::SizeMismatch { .. } => {
            remask_status::REMASK_DIMENSION_MISMATCH
        }
        Error::NonFinite { .. } => remask_status::REMASK_NONFINITE,
        Error::MaskDomain { .. }
        | Error::PatternViolation { .. }
        | Error::BlockMismatch { .. }
        | Error::MissingMask { .. } => remask_status::REMASK_BAD_MASK,
        Error::SizeLimit { .. } => remask_status::REMASK_UNSUPPORTED,
        Error::Io { .. } | Error::Format { .. } | Error::FormatVersion { .. } => {
            remask_status::REMASK_INVALID_ARGUMENT
        }
    }
}

fn fail(err: &Error) -> remask_status {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(msg: &str) -> remask_status {
    set_error(msg);
    remask_status::REMASK_INVALID_ARGUMENT
}

fn dimension(msg: &str) -> remask_status {
    set_error(msg);
    remask_status::REMASK_DIMENSION_MISMATCH
}

fn guarded(body: impl FnOnce() -> remask_status) -> remask_status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            remask_status::REMASK_INTERNAL
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn remask_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a problem from row-major weights (c_out x c_in) and channel-major
/// activations (c_in x tokens). Buffers are copied.
///
/// # Safety
/// weights must point to c_out*c_in floats and activations to
/// c_in*tokens floats; out must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_create(
    weights: *const f32,
    c_out: usize,
    c_in: usize,
    activations: *const f32,
    tokens: usize,
    out: *mut *mut remask_problem,
) -> remask_status {
    guarded(|| {
        if out.is_null() {
            return invalid("out handle pointer is null");
        }
        if weights.is_null() || activations.is_null() {
            return invalid("weights/activations pointer is null");
        }
        let Some(w_len) = c_out.checked_mul(c_in) else {
            return invalid("c_out * c_in overflows");
        };
        let Some(a_len) = c_in.checked_mul(tokens) else {
            return invalid("c_in * tokens overflows");
        };
        let w_vals = std::slice::from_raw_parts(weights, w_len).to_vec();
        let a_vals = std::slice::from_raw_parts(activations, a_len).to_vec();
        let weights = match WeightMatrix::new(c_out, c_in, w_vals) {
            Ok(w) => w,
            Err(e) => return fail(&e),
        };
        let activations = match ActivationMatrix::new(c_in, tokens, a_vals) {
            Ok(a) => a,
            Err(e) => return fail(&e),
        };
        let stats = compute_channel_stats(&activations);
        *out = Box::into_raw(Box::new(remask_problem { weights, activations, stats }));
        remask_status::REMASK_OK
    })
}

/// Builds a problem from the deterministic synthetic generator.
///
/// # Safety
/// out must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_generate(
    c_out: usize,
    c_in: usize,
    tokens: usize,
    outlier_fraction: f64,
    outlier_scale: f64,
    seed: u64,
    out: *mut *mut remask_problem,
) -> remask_status {
    guarded(|| {
        if out.is_null() {
            return invalid("out handle pointer is null");
        }
        let spec = SyntheticSpec {
            c_out,
            c_in,
            tokens,
            outlier_fraction,
            outlier_scale,
            seed,
        };
        match generate_synthetic(&spec) {
            Ok((weights, activations)) => {
                let stats = compute_channel_stats(&activations);
                *out = Box::into_raw(Box::new(remask_problem { weights, activations, stats }));
                remask_status::REMASK_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a problem handle. Null is a no-op.
///
/// # Safety
/// problem must be a handle from a create/generate call, not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_destroy(problem: *mut remask_problem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// problem must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_rows(problem: *const remask_problem) -> usize {
    problem.as_ref().map_or(0, |p| p.weights.rows())
}

/// # Safety
/// problem must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_cols(problem: *const remask_problem) -> usize {
    problem.as_ref().map_or(0, |p| p.weights.cols())
}

/// # Safety
/// problem must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_tokens(problem: *const remask_problem) -> usize {
    problem.as_ref().map_or(0, |p| p.activations.tokens())
}

/// Copies the per-channel calibration statistics into caller arrays of
/// length len (= column count). Any destination may be null to skip it.
///
/// # Safety
/// Non-null destinations must hold len floats.
#[no_mangle]
pub unsafe extern "C" fn remask_problem_channel_stats(
    problem: *const remask_problem,
    mean: *mut f32,
    variance: *mut f32,
    l2norm: *mut f32,
    len: usize,
) -> remask_status {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return invalid("problem handle is null");
        };
        if len != p.weights.cols() {
            return dimension("stats buffer length does not match column count");
        }
        if !mean.is_null() {
            std::slice::from_raw_parts_mut(mean, len).copy_from_slice(&p.stats.mean);
        }
        if !variance.is_null() {
            std::slice::from_raw_parts_mut(variance, len).copy_from_slice(&p.stats.variance);
        }
        if !l2norm.is_null() {
            std::slice::from_raw_parts_mut(l2norm, len).copy_from_slice(&p.stats.l2norm);
        }
        remask_status::REMASK_OK
    })
}

fn method_of(method: remask_method) -> PruneMethod {
    match method {
        remask_method::REMASK_METHOD_MAGNITUDE => PruneMethod::Magnitude,
        remask_method::REMASK_METHOD_WANDA => PruneMethod::Wanda,
    }
}

/// One-shot pruning at the given ratio; writes 0/1 bytes row-major into
/// mask_out (length rows*cols).
///
/// # Safety
/// mask_out must hold mask_len bytes; problem must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn remask_prune_ratio(
    problem: *const remask_problem,
    ratio: f64,
    method: remask_method,
    granularity: remask_granularity,
    mask_out: *mut u8,
    mask_len: usize,
) -> remask_status {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return invalid("problem handle is null");
        };
        if mask_out.is_null() {
            return invalid("mask_out is null");
        }
        if mask_len != p.weights.rows() * p.weights.cols() {
            return dimension("mask buffer length does not match rows*cols");
        }
        let spec = PruneSpec {
            method: method_of(method),
            target: PruneTarget::Ratio(ratio),
            granularity: match granularity {
                remask_granularity::REMASK_GRANULARITY_PER_ROW => Granularity::PerRow,
                remask_granularity::REMASK_GRANULARITY_PER_LAYER => Granularity::PerLayer,
            },
        };
        match prune_to_ratio(&p.weights, &p.stats, &spec) {
            Ok(mask) => {
                std::slice::from_raw_parts_mut(mask_out, mask_len).copy_from_slice(mask.bits());
                remask_status::REMASK_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// One-shot pruning keeping exactly n weights per aligned block of m
/// columns; writes 0/1 bytes row-major into mask_out.
///
/// # Safety
/// mask_out must hold mask_len bytes; problem must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn remask_prune_nm(
    problem: *const remask_problem,
    n: u32,
    m: u32,
    method: remask_method,
    mask_out: *mut u8,
    mask_len: usize,
) -> remask_status {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return invalid("problem handle is null");
        };
        if mask_out.is_null() {
            return invalid("mask_out is null");
        }
        if mask_len != p.weights.rows() * p.weights.cols() {
            return dimension("mask buffer length does not match rows*cols");
        }
        let spec = PruneSpec {
            method: method_of(method),
            target: PruneTarget::NOfM { n, m },
            granularity: Granularity::PerRow,
        };
        match prune_to_nm(&p.weights, &p.stats, &spec) {
            Ok(mask) => {
                std::slice::from_raw_parts_mut(mask_out, mask_len).copy_from_slice(mask.bits());
                remask_status::REMASK_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fills out with the default refinement parameters (50 cycles,
/// threshold 0.1, abs-mean metric, signed criteria, unstructured).
///
/// # Safety
/// out must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn remask_refine_config_default(out: *mut remask_refine_config) {
    if out.is_null() {
        return;
    }
    *out = remask_refine_config {
        max_cycles: 50,
        threshold: 0.1,
        metric: remask_metric::REMASK_METRIC_ABS_MEAN,
        grow: remask_grow_criterion::REMASK_GROW_DSNOT,
        prune: remask_prune_criterion::REMASK_PRUNE_DSNOT,
        variance_floor: 1e-8,
        pattern_n: 0,
        pattern_m: 0,
    };
}

fn config_of(c: &remask_refine_config) -> Result<RefineConfig, Error> {
    let pattern_constraint = match (c.pattern_n, c.pattern_m) {
        (0, 0) => MaskPattern::Unstructured,
        (n, m) => MaskPattern::NOfM { n, m },
    };
    let config = RefineConfig {
        max_cycles: c.max_cycles,
        threshold: c.threshold,
        termination_metric: match c.metric {
            remask_metric::REMASK_METRIC_ABS_MEAN => TerminationMetric::AbsMean,
            remask_metric::REMASK_METRIC_L2 => TerminationMetric::L2,
        },
        grow_criterion: match c.grow {
            remask_grow_criterion::REMASK_GROW_DSNOT => GrowCriterion::Dsnot,
            remask_grow_criterion::REMASK_GROW_WANDA_LIKE => GrowCriterion::WandaLike,
        },
        prune_criterion: match c.prune {
            remask_prune_criterion::REMASK_PRUNE_DSNOT => PruneCriterion::Dsnot,
            remask_prune_criterion::REMASK_PRUNE_WANDA_UNSIGNED => PruneCriterion::WandaUnsigned,
            remask_prune_criterion::REMASK_PRUNE_EXPECTED_CHANGE => PruneCriterion::ExpectedChange,
        },
        variance_floor: c.variance_floor,
        pattern_constraint,
    };
    config.validate()?;
    Ok(config)
}

/// Refines the caller's mask in place. mask holds rows*cols bytes in
/// {0,1} and must satisfy the configured pattern on entry. On success the
/// optional outputs receive the total swap count and the layer l2 error
/// as maintained incrementally by the refinement loop.
///
/// # Safety
/// mask must hold mask_len writable bytes; problem must be a live handle;
/// non-null out pointers must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn remask_refine(
    problem: *const remask_problem,
    config: *const remask_refine_config,
    mask: *mut u8,
    mask_len: usize,
    total_swaps_out: *mut u64,
    final_error_l2_out: *mut f64,
) -> remask_status {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return invalid("problem handle is null");
        };
        let Some(cfg) = config.as_ref() else {
            return invalid("config pointer is null");
        };
        if mask.is_null() {
            return invalid("mask is null");
        }
        let (rows, cols) = (p.weights.rows(), p.weights.cols());
        if mask_len != rows * cols {
            return dimension("mask buffer length does not match rows*cols");
        }
        let config = match config_of(cfg) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        let bits = std::slice::from_raw_parts(mask, mask_len).to_vec();
        let mut sparsity_mask = match SparsityMask::new(rows, cols, bits, config.pattern_constraint)
        {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        match refine_layer(&p.weights, &mut sparsity_mask, &p.activations, &config) {
            Ok(outcome) => {
                std::slice::from_raw_parts_mut(mask, mask_len).copy_from_slice(sparsity_mask.bits());
                if !total_swaps_out.is_null() {
                    *total_swaps_out = outcome.total_swaps();
                }
                if !final_error_l2_out.is_null() {
                    let sq: f64 = outcome.states.iter().map(|s| s.delta_l2 * s.delta_l2).sum();
                    *final_error_l2_out = sq.sqrt();
                }
                remask_status::REMASK_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Recomputes the layer l2 reconstruction error under the given mask from
/// scratch (the independent verification path).
///
/// # Safety
/// mask must hold mask_len bytes; problem must be a live handle; out must
/// be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn remask_layer_error(
    problem: *const remask_problem,
    mask: *const u8,
    mask_len: usize,
    out: *mut f64,
) -> remask_status {
    guarded(|| {
        let Some(p) = problem.as_ref() else {
            return invalid("problem handle is null");
        };
        if mask.is_null() || out.is_null() {
            return invalid("mask/out pointer is null");
        }
        let (rows, cols) = (p.weights.rows(), p.weights.cols());
        if mask_len != rows * cols {
            return dimension("mask buffer length does not match rows*cols");
        }
        let bits = std::slice::from_raw_parts(mask, mask_len).to_vec();
        let sparsity_mask = match SparsityMask::new(rows, cols, bits, MaskPattern::Unstructured) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        match remask::oracle::oracle_layer_error(&p.weights, &sparsity_mask, &p.activations) {
            Ok(err) => {
                *out = err;
                remask_status::REMASK_OK
            }
            Err(e) => fail(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    fn generate(seed: u64) -> *mut remask_problem {
        let mut handle: *mut remask_problem = ptr::null_mut();
        let status = unsafe { remask_problem_generate(8, 16, 24, 0.25, 5.0, seed, &mut handle) };
        assert_eq!(status, remask_status::REMASK_OK);
        assert!(!handle.is_null());
        handle
    }

    fn last_message() -> String {
        unsafe { CStr::from_ptr(remask_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn generate_matches_core_library() {
        let p = generate(42);
        unsafe {
            assert_eq!(remask_problem_rows(p), 8);
            assert_eq!(remask_problem_cols(p), 16);
            assert_eq!(remask_problem_tokens(p), 24);
            let (w, a) = generate_synthetic(&SyntheticSpec {
                c_out: 8,
                c_in: 16,
                tokens: 24,
                outlier_fraction: 0.25,
                outlier_scale: 5.0,
                seed: 42,
            })
            .unwrap();
            assert_eq!((*p).weights.values(), w.values());
            assert_eq!((*p).activations.values(), a.values());
            let mut mean = vec![0.0f32; 16];
            let mut var = vec![0.0f32; 16];
            let mut l2 = vec![0.0f32; 16];
            let st = remask_problem_channel_stats(p, mean.as_mut_ptr(), var.as_mut_ptr(), l2.as_mut_ptr(), 16);
            assert_eq!(st, remask_status::REMASK_OK);
            let want = compute_channel_stats(&a);
            assert_eq!(mean, want.mean);
            assert_eq!(var, want.variance);
            assert_eq!(l2, want.l2norm);
            remask_problem_destroy(p);
        }
    }

    #[test]
    fn create_copies_and_validates() {
        let w = vec![1.0f32, 2.0, 3.0, f32::NAN];
        let a = vec![0.5f32; 4];
        let mut handle: *mut remask_problem = ptr::null_mut();
        let st = unsafe { remask_problem_create(w.as_ptr(), 2, 2, a.as_ptr(), 2, &mut handle) };
        assert_eq!(st, remask_status::REMASK_NONFINITE);
        assert!(last_message().contains("non-finite"));

        let w = vec![1.0f32, 2.0, 3.0, 4.0];
        let st = unsafe { remask_problem_create(w.as_ptr(), 2, 2, a.as_ptr(), 2, &mut handle) };
        assert_eq!(st, remask_status::REMASK_OK);
        unsafe {
            assert_eq!((*handle).weights.values(), &w[..]);
            remask_problem_destroy(handle);
        }

        let st = unsafe {
            remask_problem_create(ptr::null(), 2, 2, a.as_ptr(), 2, &mut handle)
        };
        assert_eq!(st, remask_status::REMASK_INVALID_ARGUMENT);
    }

    #[test]
    fn prune_and_refine_match_core_pipeline() {
        let p = generate(7);
        let len = 8 * 16;
        let mut mask = vec![9u8; len];
        unsafe {
            let st = remask_prune_ratio(
                p,
                0.5,
                remask_method::REMASK_METHOD_WANDA,
                remask_granularity::REMASK_GRANULARITY_PER_ROW,
                mask.as_mut_ptr(),
                len,
            );
            assert_eq!(st, remask_status::REMASK_OK);
            let want = prune_to_ratio(
                &(*p).weights,
                &(*p).stats,
                &PruneSpec {
                    method: PruneMethod::Wanda,
                    target: PruneTarget::Ratio(0.5),
                    granularity: Granularity::PerRow,
                },
            )
            .unwrap();
            assert_eq!(&mask[..], want.bits());

            let mut config = std::mem::MaybeUninit::<remask_refine_config>::uninit();
            remask_refine_config_default(config.as_mut_ptr());
            let config = config.assume_init();
            assert_eq!(config.max_cycles, 50);
            assert_eq!(config.threshold, 0.1);

            let mut swaps = 0u64;
            let mut err = 0.0f64;
            let st = remask_refine(p, &config, mask.as_mut_ptr(), len, &mut swaps, &mut err);
            assert_eq!(st, remask_status::REMASK_OK);

            let mut core_mask = want.clone();
            let outcome = refine_layer(
                &(*p).weights,
                &mut core_mask,
                &(*p).activations,
                &RefineConfig::default(),
            )
            .unwrap();
            assert_eq!(&mask[..], core_mask.bits());
            assert_eq!(swaps, outcome.total_swaps());
            let want_err: f64 = outcome.states.iter().map(|s| s.delta_l2 * s.delta_l2).sum::<f64>().sqrt();
            assert_eq!(err, want_err);

            let mut recomputed = 0.0f64;
            let st = remask_layer_error(p, mask.as_ptr(), len, &mut recomputed);
            assert_eq!(st, remask_status::REMASK_OK);
            assert!((recomputed - err).abs() <= 1e-5 * err.max(1.0));
            remask_problem_destroy(p);
        }
    }

    #[test]
    fn nm_pruning_and_pattern_refine() {
        let p = generate(9);
        let len = 8 * 16;
        let mut mask = vec![0u8; len];
        unsafe {
            let st = remask_prune_nm(
                p,
                2,
                4,
                remask_method::REMASK_METHOD_WANDA,
                mask.as_mut_ptr(),
                len,
            );
            assert_eq!(st, remask_status::REMASK_OK);
            for row in mask.chunks(16) {
                for block in row.chunks(4) {
                    assert_eq!(block.iter().filter(|&&b| b == 1).count(), 2);
                }
            }
            let mut config = std::mem::MaybeUninit::<remask_refine_config>::uninit();
            remask_refine_config_default(config.as_mut_ptr());
            let mut config = config.assume_init();
            config.pattern_n = 2;
            config.pattern_m = 4;
            let st = remask_refine(p, &config, mask.as_mut_ptr(), len, ptr::null_mut(), ptr::null_mut());
            assert_eq!(st, remask_status::REMASK_OK);
            for row in mask.chunks(16) {
                for block in row.chunks(4) {
                    assert_eq!(block.iter().filter(|&&b| b == 1).count(), 2);
                }
            }
            remask_problem_destroy(p);
        }
    }

    #[test]
    fn error_paths_set_status_and_message() {
        let p = generate(11);
        let len = 8 * 16;
        let mut mask = vec![0u8; len];
        unsafe {
            let st = remask_prune_ratio(
                p,
                1.5,
                remask_method::REMASK_METHOD_WANDA,
                remask_granularity::REMASK_GRANULARITY_PER_ROW,
                mask.as_mut_ptr(),
                len,
            );
            assert_eq!(st, remask_status::REMASK_INVALID_ARGUMENT);
            assert!(!last_message().is_empty());

            let st = remask_prune_ratio(
                p,
                0.5,
                remask_method::REMASK_METHOD_WANDA,
                remask_granularity::REMASK_GRANULARITY_PER_ROW,
                mask.as_mut_ptr(),
                len - 1,
            );
            assert_eq!(st, remask_status::REMASK_DIMENSION_MISMATCH);

            mask.fill(2);
            let mut config = std::mem::MaybeUninit::<remask_refine_config>::uninit();
            remask_refine_config_default(config.as_mut_ptr());
            let config = config.assume_init();
            let st = remask_refine(p, &config, mask.as_mut_ptr(), len, ptr::null_mut(), ptr::null_mut());
            assert_eq!(st, remask_status::REMASK_BAD_MASK);
            assert!(last_message().contains("expected 0 or 1"));

            let st = remask_prune_nm(
                p,
                2,
                5,
                remask_method::REMASK_METHOD_WANDA,
                mask.as_mut_ptr(),
                len,
            );
            assert_eq!(st, remask_status::REMASK_BAD_MASK);

            let st = remask_problem_channel_stats(
                ptr::null(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                16,
            );
            assert_eq!(st, remask_status::REMASK_INVALID_ARGUMENT);
            remask_problem_destroy(p);
        }
    }

    #[test]
    fn header_exports_surface() {
        let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/remask.h"))
            .expect("generated header");
        for symbol in [
            "remask_problem_create",
            "remask_problem_generate",
            "remask_problem_destroy",
            "remask_problem_channel_stats",
            "remask_prune_ratio",
            "remask_prune_nm",
            "remask_refine_config_default",
            "remask_refine",
            "remask_layer_error",
            "remask_last_error_message",
            "REMASK_OK",
            "remask_refine_config",
        ] {
            assert!(header.contains(symbol), "header missing {symbol}");
        }
        assert!(header.contains("REMASK_H"));
    }
}
