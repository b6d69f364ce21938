//! Size limits for tabulated objects. Exceeding a cap is an error, never a truncation.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

static TABLE_CAP: AtomicUsize = AtomicUsize::new(5_000_000);
static LEVEL_CAP: AtomicUsize = AtomicUsize::new(200_000);

/// Maximum number of entries in any joint table.
pub fn table_cap() -> usize {
    TABLE_CAP.load(Ordering::Relaxed)
}

pub fn set_table_cap(n: usize) {
    TABLE_CAP.store(n, Ordering::Relaxed);
}

/// Maximum number of subspaces enumerated in one Grassmann level.
pub fn level_cap() -> usize {
    LEVEL_CAP.load(Ordering::Relaxed)
}

pub fn set_level_cap(n: usize) {
    LEVEL_CAP.store(n, Ordering::Relaxed);
}

pub(crate) fn check(what: &str, need: f64, cap: usize) -> Result<()> {
    if need > cap as f64 {
        return Err(Error::SizeCap { what: what.to_string(), need: need.min(usize::MAX as f64) as usize, cap });
    }
    Ok(())
}
