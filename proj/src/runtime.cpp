#include "lformer/common.hpp"

#include <mutex>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace lformer {

void tune_allocator() {
#ifdef __GLIBC__
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    });
#endif
}

}  // namespace lformer
