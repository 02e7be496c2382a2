//! C interface. Handles are opaque pointers owned by the caller and released
//! with the matching `*_free`. Every fallible call returns an [`SgStatus`];
//! on failure [`sg_last_error`] describes what went wrong on this thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stance_gcn::cli::{cmd_synth, cmd_train, fold_dir};
use stance_gcn::config::RunConfig;
use stance_gcn::eval::{classify_stance, top_k, AnnotationIndex, StanceAnnotation, StanceClass};
use stance_gcn::model::{load_checkpoint, read_index, FinalEmbeddings};
use stance_gcn::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    Io = 4,
    Parse = 5,
    Config = 6,
    Bounds = 7,
    Numerics = 8,
    Empty = 9,
    Shape = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStance {
    Neg = 0,
    Neutral = 1,
    Pos = 2,
}

impl From<StanceClass> for SgStance {
    fn from(c: StanceClass) -> Self {
        match c {
            StanceClass::Neg => SgStance::Neg,
            StanceClass::Neutral => SgStance::Neutral,
            StanceClass::Pos => SgStance::Pos,
        }
    }
}

/// Trained final embeddings of one fold plus the row names.
pub struct SgModel {
    users: Vec<String>,
    hashtags: Vec<String>,
    emb: FinalEmbeddings,
}

/// Annotation classes resolved against a model's hashtags.
pub struct SgAnnotations {
    index: AnnotationIndex,
    n_hashtags: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    NotFound(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::Io { .. } => SgStatus::Io,
        Error::Parse { .. } | Error::Record { .. } | Error::DegenerateHashtag(_) => SgStatus::Parse,
        Error::Config(_) => SgStatus::Config,
        Error::Bounds(_) | Error::Index { .. } => SgStatus::Bounds,
        Error::Numerics(_) => SgStatus::Numerics,
        Error::EmptyCorpus | Error::EmptyChannel | Error::EmptyEligibleSet | Error::EmptyEvaluation => SgStatus::Empty,
        Error::Shape(_) => SgStatus::Shape,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(fail)) => {
            let (status, msg) = match fail {
                Fail::Null(arg) => (SgStatus::NullArgument, format!("{arg} is null")),
                Fail::Utf8(arg) => (SgStatus::InvalidUtf8, format!("{arg} is not valid UTF-8")),
                Fail::NotFound(msg) => (SgStatus::NotFound, msg),
                Fail::Core(e) => (status_of(&e), e.to_string()),
            };
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(name))
}

unsafe fn path(p: *const c_char, name: &'static str) -> Result<PathBuf, Fail> {
    text(p, name).map(PathBuf::from)
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn config(p: *const c_char) -> Result<RunConfig, Fail> {
    let mut cfg = RunConfig::default();
    if !p.is_null() {
        cfg.apply_text(text(p, "config")?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

unsafe fn model<'a>(m: *const SgModel) -> Result<&'a SgModel, Fail> {
    m.as_ref().ok_or(Fail::Null("model"))
}

fn check_user(m: &SgModel, user: usize) -> Result<(), Fail> {
    if user >= m.users.len() {
        return Err(Error::Bounds(format!("user {user} out of range (0..{})", m.users.len())).into());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Writes a synthetic dataset to `out_dir`. `config_text` holds `key = value`
/// lines and may be NULL.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_synth(out_dir: *const c_char, config_text: *const c_char) -> SgStatus {
    guard(|| {
        let out = path(out_dir, "out_dir")?;
        let cfg = config(config_text)?;
        cmd_synth(&out, &cfg)?;
        Ok(())
    })
}

/// Splits, trains every fold and writes the run directory.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_train(
    counts_dir: *const c_char,
    annotations: *const c_char,
    out_dir: *const c_char,
    config_text: *const c_char,
) -> SgStatus {
    guard(|| {
        let counts = path(counts_dir, "counts_dir")?;
        let ann = path(annotations, "annotations")?;
        let out = path(out_dir, "out_dir")?;
        let cfg = config(config_text)?;
        cmd_train(&counts, &ann, &out, &cfg)?;
        Ok(())
    })
}

/// Loads the final embeddings of `fold` from a run directory.
///
/// # Safety
/// `run_dir` must be NUL-terminated; `out_model` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sg_model_load(run_dir: *const c_char, fold: usize, out_model: *mut *mut SgModel) -> SgStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let dir = fold_dir(&path(run_dir, "run_dir")?, fold);
        let index_path = dir.join("index.tsv");
        let file = File::open(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let (users, hashtags) = read_index(BufReader::new(file))?;
        let state = load_checkpoint(&dir.join("final.bin"))?;
        if state.n_users() != users.len() || state.n_hashtags() != hashtags.len() {
            return Err(Error::Shape(format!("{} does not match its index", dir.display())).into());
        }
        let emb = FinalEmbeddings {
            users: state.users,
            hashtags: state.hashtags,
        };
        *slot = Box::into_raw(Box::new(SgModel { users, hashtags, emb }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`sg_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sg_model_free(model: *mut SgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_model_n_users(model: *const SgModel) -> usize {
    model.as_ref().map_or(0, |m| m.users.len())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_model_n_hashtags(model: *const SgModel) -> usize {
    model.as_ref().map_or(0, |m| m.hashtags.len())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_model_dim(model: *const SgModel) -> usize {
    model.as_ref().map_or(0, |m| m.emb.users.ncols())
}

/// Row of the named user.
///
/// # Safety
/// `model` must be a live handle, `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_model_user_index(model: *const SgModel, name: *const c_char, out_index: *mut usize) -> SgStatus {
    guard(|| {
        let m = self::model(model)?;
        let name = text(name, "name")?;
        let slot = out(out_index, "out_index")?;
        *slot = m
            .users
            .iter()
            .position(|u| u == name)
            .ok_or_else(|| Fail::NotFound(format!("unknown user {name:?}")))?;
        Ok(())
    })
}

/// Column of the named hashtag (normalized form, no `#`).
///
/// # Safety
/// `model` must be a live handle, `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_model_hashtag_index(
    model: *const SgModel,
    name: *const c_char,
    out_index: *mut usize,
) -> SgStatus {
    guard(|| {
        let m = self::model(model)?;
        let name = text(name, "name")?;
        let slot = out(out_index, "out_index")?;
        *slot = m
            .hashtags
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Fail::NotFound(format!("unknown hashtag {name:?}")))?;
        Ok(())
    })
}

/// Affinity of `user` for `hashtag`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_model_score(model: *const SgModel, user: usize, hashtag: usize, out_score: *mut f64) -> SgStatus {
    guard(|| {
        let m = self::model(model)?;
        let slot = out(out_score, "out_score")?;
        check_user(m, user)?;
        if hashtag >= m.hashtags.len() {
            return Err(Error::Bounds(format!("hashtag {hashtag} out of range (0..{})", m.hashtags.len())).into());
        }
        *slot = m.emb.score(user, hashtag);
        Ok(())
    })
}

/// Up to `k` hashtag columns by descending affinity, ties to the lower
/// index. `out_indices` must hold `k` entries; `out_len` receives the count.
///
/// # Safety
/// `model` must be a live handle and `out_indices` valid for `k` writes.
#[no_mangle]
pub unsafe extern "C" fn sg_model_top_k(
    model: *const SgModel,
    user: usize,
    k: usize,
    out_indices: *mut usize,
    out_len: *mut usize,
) -> SgStatus {
    guard(|| {
        let m = self::model(model)?;
        let len = out(out_len, "out_len")?;
        check_user(m, user)?;
        if k > 0 && out_indices.is_null() {
            return Err(Fail::Null("out_indices"));
        }
        let ranked = top_k(&m.emb.score_all(user)?, k, &[]);
        if !ranked.is_empty() {
            std::slice::from_raw_parts_mut(out_indices, ranked.len()).copy_from_slice(&ranked);
        }
        *len = ranked.len();
        Ok(())
    })
}

/// Reads a `class<TAB>hashtag` file and resolves it against the model's
/// hashtags. Annotated hashtags the model has never seen are dropped.
///
/// # Safety
/// `model` must be a live handle, `file` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_annotations_load(
    model: *const SgModel,
    file: *const c_char,
    out_annotations: *mut *mut SgAnnotations,
) -> SgStatus {
    guard(|| {
        let slot = out(out_annotations, "out_annotations")?;
        *slot = ptr::null_mut();
        let m = self::model(model)?;
        let p = path(file, "file")?;
        let f = File::open(&p).map_err(|e| Error::io(&p, e))?;
        let ann = StanceAnnotation::read(BufReader::new(f))?;
        let index = ann.resolve(&m.hashtags);
        if index.is_empty() {
            return Err(Error::Config("no annotated hashtag is known to the model".into()).into());
        }
        *slot = Box::into_raw(Box::new(SgAnnotations {
            index,
            n_hashtags: m.hashtags.len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `annotations` must come from [`sg_annotations_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sg_annotations_free(annotations: *mut SgAnnotations) {
    if !annotations.is_null() {
        drop(Box::from_raw(annotations));
    }
}

/// Stance of `user`: the class whose annotated hashtags have the highest
/// mean affinity.
///
/// # Safety
/// Both handles must be live and `annotations` loaded for this model.
#[no_mangle]
pub unsafe extern "C" fn sg_classify(
    model: *const SgModel,
    annotations: *const SgAnnotations,
    user: usize,
    out_stance: *mut SgStance,
) -> SgStatus {
    guard(|| {
        let m = self::model(model)?;
        let a = annotations.as_ref().ok_or(Fail::Null("annotations"))?;
        let slot = out(out_stance, "out_stance")?;
        if a.n_hashtags != m.hashtags.len() {
            return Err(Error::Shape("annotations were loaded for a different model".into()).into());
        }
        check_user(m, user)?;
        let class = classify_stance(&m.emb.score_all(user)?, &a.index).ok_or(Error::EmptyEvaluation)?;
        *slot = class.into();
        Ok(())
    })
}
