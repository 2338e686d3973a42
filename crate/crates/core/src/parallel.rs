use rayon::prelude::*;

/// Maps `items` in parallel and folds the results strictly in input order.
///
/// Items are processed in chunks of the current pool's thread count, so at
/// most one chunk of mapped results is alive at a time. The fold order, and
/// therefore any floating-point result, is independent of the pool size.
pub(crate) fn ordered_fold<T, R, A, E>(
    items: &[T],
    init: A,
    map: impl Fn(usize, &T) -> Result<R, E> + Sync,
    mut fold: impl FnMut(A, R) -> A,
) -> Result<A, E>
where
    T: Sync,
    R: Send,
    E: Send,
{
    let chunk = rayon::current_num_threads().max(1);
    let mut acc = init;
    for (c, group) in items.chunks(chunk).enumerate() {
        let mapped: Vec<Result<R, E>> = group
            .par_iter()
            .enumerate()
            .map(|(i, item)| map(c * chunk + i, item))
            .collect();
        for r in mapped {
            acc = fold(acc, r?);
        }
    }
    Ok(acc)
}
