#include "ltpfleo/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace ltp {

int worker_threads() {
    static const int cap = [] {
        const char* env = std::getenv("LTP_FLEO_THREADS");
        if (env == nullptr) return omp_get_max_threads();
        try {
            const int value = std::stoi(env);
            return value >= 1 ? value : omp_get_max_threads();
        } catch (...) {
            return omp_get_max_threads();
        }
    }();
    return cap;
}

void configure_threads_from_env() { omp_set_num_threads(worker_threads()); }

}  // namespace ltp
