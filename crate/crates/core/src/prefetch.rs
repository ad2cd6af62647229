//! Software prefetch hints. They never change results, only timing.

#[cfg(all(feature = "prefetch", target_arch = "x86_64"))]
#[inline(always)]
pub fn hint<T>(ptr: &T) {
    use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
    // SAFETY: prefetch never faults and has no architectural effect
    unsafe { _mm_prefetch(ptr as *const T as *const i8, _MM_HINT_T0) }
}

#[cfg(not(all(feature = "prefetch", target_arch = "x86_64")))]
#[inline(always)]
pub fn hint<T>(_ptr: &T) {}
