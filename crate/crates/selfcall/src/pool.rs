use anyhow::Result;
use rayon::prelude::*;

/// Bounded worker pool whose map keeps input order, so output bytes do not
/// depend on the worker count.
pub struct Pool {
    inner: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        let inner = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("selfcall-worker-{i}"))
            .build()?;
        Ok(Pool { inner })
    }

    pub fn workers(&self) -> usize {
        self.inner.current_num_threads()
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.inner.install(|| items.par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept_for_any_worker_count() {
        let items: Vec<u64> = (0..500).collect();
        let slow = |&x: &u64| {
            if x % 7 == 0 {
                std::thread::sleep(std::time::Duration::from_micros(200));
            }
            x * x
        };
        let one = Pool::new(1).unwrap().map(&items, slow);
        let many = Pool::new(8).unwrap().map(&items, slow);
        assert_eq!(one, many);
        assert_eq!(one[499], 499 * 499);
        assert_eq!(Pool::new(0).unwrap().workers(), 1);
    }
}
