//! Per-thread call counters for the once-per-run assembly routines.
//!
//! Counters are thread local so that concurrently running tests do not
//! observe each other's assemblies.

use std::cell::Cell;

thread_local! {
    static SYSTEM_ASSEMBLIES: Cell<usize> = const { Cell::new(0) };
    static POSTPROCESSING_BUILDS: Cell<usize> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssemblyCounts {
    pub system: usize,
    pub postprocessing: usize,
}

pub fn counts() -> AssemblyCounts {
    AssemblyCounts { system: SYSTEM_ASSEMBLIES.get(), postprocessing: POSTPROCESSING_BUILDS.get() }
}

pub fn reset() {
    SYSTEM_ASSEMBLIES.set(0);
    POSTPROCESSING_BUILDS.set(0);
}

pub(crate) fn record_system_assembly() {
    SYSTEM_ASSEMBLIES.set(SYSTEM_ASSEMBLIES.get() + 1);
}

pub(crate) fn record_postprocessing_build() {
    POSTPROCESSING_BUILDS.set(POSTPROCESSING_BUILDS.get() + 1);
}
