#pragma once

namespace mtf {

// Raises the glibc mmap and trim thresholds so per-step matrix temporaries
// are recycled from the heap. No-op on other C libraries. Call once from main.
void tune_allocator();

}  // namespace mtf
