#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace vlc {

// Keeps large tensor buffers on the heap instead of fresh mmap regions, which
// otherwise page-fault on every training step. Call once from main().
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace vlc
