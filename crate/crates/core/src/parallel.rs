use rayon::ThreadPoolBuilder;

/// Runs `f` on a dedicated pool of `jobs` workers (`0` means one per core).
///
/// Callers only use order-preserving rayon adaptors inside `f`, so results do
/// not depend on the worker count.
pub(crate) fn install<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    let pool = ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}
