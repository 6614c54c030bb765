#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace ltp {

// Every data-parallel kernel takes an execution policy. The serial path is the
// reference implementation; both paths must produce bit-identical results, which
// the tests check. Kernels write each result into its own slot and merge in index
// order, so thread count never changes the output.
enum class Exec { serial, parallel };

// Worker cap from LTP_FLEO_THREADS (unset or invalid means the OpenMP default).
int worker_threads();

// Applies LTP_FLEO_THREADS to the OpenMP runtime. Idempotent.
void configure_threads_from_env();

template <typename Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Exceptions cannot cross the OpenMP region; the lowest failing index is rethrown.
    std::vector<std::exception_ptr> errors(n);
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_threads())
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace ltp
