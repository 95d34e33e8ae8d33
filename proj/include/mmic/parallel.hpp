#pragma once

#include <cstddef>

namespace mmic {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` splits the independent loop over OpenMP threads. Every
/// kernel writes results by index and reduces in index order, so both paths
/// produce bitwise-identical output.
enum class Exec { serial, parallel };

/// Run f(i) for i in [0, n). Iterations must be independent.
template <class F>
void for_each_index(Exec exec, std::size_t n, F&& f) {
    if (exec == Exec::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
}

/// Number of OpenMP threads the parallel path will use (1 without OpenMP).
int parallel_threads();
void set_parallel_threads(int n);

} // namespace mmic
