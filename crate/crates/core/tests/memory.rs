//! Peak heap use of the implicit thresholded covariance at p = 2000.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use newton_infer::highdim::{prox_svrg_point_estimate, CovStorage, HighDimConfig, SoftThresholdCov};
use newton_infer::model::generate_sparse_highdim;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
            LARGEST.fetch_max(layout.size(), Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

fn reset() -> usize {
    let live = LIVE.load(Ordering::SeqCst);
    PEAK.store(live, Ordering::SeqCst);
    LARGEST.store(0, Ordering::SeqCst);
    live
}

#[test]
fn implicit_storage_never_forms_a_square_matrix() {
    let p = 2000;
    let (data, _) = generate_sparse_highdim(100, p, 5, 0.5, 0.7, 1).unwrap();
    let square = p * p * std::mem::size_of::<f64>();

    let base = reset();
    let cov = SoftThresholdCov::new(&data, 0.3, CovStorage::Implicit).unwrap();
    let v: Vec<f64> = (0..p).map(|j| (j % 7) as f64 - 3.0).collect();
    let mut out = vec![0.0; p];
    cov.matvec_into(&v, &mut out);
    let col = cov.column(17);
    assert!((col[17] - cov.diagonal_entry(17)).abs() < 1e-12);
    let cfg = HighDimConfig {
        point_epochs: 2,
        ..Default::default()
    };
    let theta = prox_svrg_point_estimate(&data, &cov, 0.2, &cfg, &vec![0.0; p]).unwrap();
    assert_eq!(theta.len(), p);

    let peak = PEAK.load(Ordering::SeqCst) - base;
    let largest = LARGEST.load(Ordering::SeqCst);
    // a handful of length-p work vectors, nothing quadratic in p
    assert!(largest <= 64 * p, "largest allocation {largest} bytes");
    assert!(peak < square / 100, "peak {peak} bytes vs {square} for p×p");
}

#[test]
fn dense_storage_is_refused_above_the_limit() {
    let (data, _) = generate_sparse_highdim(50, 300, 3, 0.5, 0.7, 2).unwrap();
    let cov = SoftThresholdCov::auto(&data, 0.3, 64).unwrap();
    assert_eq!(cov.storage(), CovStorage::Sparse);
    assert!(cov.to_dense(64).is_err());
}
