#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a single-threaded
// twin with identical results; the tests hold them to each other and the
// benchmark times them against each other.

#include "seeker/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace seeker::kernels {

/// Exact ell-nearest-neighbor search under Euclidean distance.
/// `neighbors` holds, per point, itself followed by its ell - 1 nearest
/// other points; `radius` is the distance to the farthest of those.
/// Ties are broken by index.
struct NeighborTable {
    std::size_t ell = 0;
    std::vector<std::uint32_t> neighbors;  // n * ell, row-major
    std::vector<double> radius;
    bool degenerate = false;  // a zero radius was replaced
};

NeighborTable knn_serial(std::span<const Vec6> points, std::size_t ell);
NeighborTable knn_parallel(std::span<const Vec6> points, std::size_t ell);

/// Evaluates f(i) for i in [0, n) and returns the values in index order.
std::vector<double> map_indices_serial(std::size_t n, const std::function<double(std::size_t)>& f);
std::vector<double> map_indices_parallel(std::size_t n, const std::function<double(std::size_t)>& f);

/// First index of the maximum; 0 for an empty input.
std::size_t argmax_first(std::span<const double> values);

/// Number of OpenMP threads in use (honours SEEKER_THREADS).
int thread_count();
/// Applies SEEKER_THREADS, if set, to the OpenMP runtime.
void apply_thread_override();

}  // namespace seeker::kernels
