#pragma once

#include <malloc.h>

namespace emix {

/// Keeps large Eigen temporaries on the heap instead of fresh mmap/munmap
/// pairs per allocation; training spends most of its system time there
/// otherwise. Call once at program start.
inline void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
}

}  // namespace emix
