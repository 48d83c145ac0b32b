#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace odeid {

/// Keep glibc from returning large training buffers to the kernel after every
/// epoch; the repeated mmap/munmap otherwise dominates full-batch training.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

}  // namespace odeid
