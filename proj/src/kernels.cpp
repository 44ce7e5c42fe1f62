#include "seeker/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>

namespace seeker::kernels {

namespace {

using Candidate = std::pair<double, std::uint32_t>;  // (squared distance, index)

// Keeps the `ell` - 1 lexicographically smallest (distance, index) candidates.
void knn_row(std::span<const Vec6> points, std::size_t i, std::size_t ell, std::vector<Candidate>& heap,
             std::uint32_t* row, double& radius) {
    heap.clear();
    const Vec6& xi = points[i];
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (j == i) continue;
        const Candidate c{(points[j] - xi).squaredNorm(), static_cast<std::uint32_t>(j)};
        if (heap.size() + 1 < ell) {
            heap.push_back(c);
            std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = c;
            std::push_heap(heap.begin(), heap.end());
        }
    }
    std::sort_heap(heap.begin(), heap.end());
    row[0] = static_cast<std::uint32_t>(i);
    for (std::size_t k = 0; k + 1 < ell; ++k) row[k + 1] = heap[k].second;
    radius = std::sqrt(heap[ell - 2].first);
}

void check(std::span<const Vec6> points, std::size_t ell) {
    if (ell < 2) throw InvalidInput("knn: ell must be at least 2");
    if (points.size() < ell) throw InvalidInput("knn: need at least ell points");
}

void repair_radii(NeighborTable& t) {
    double smallest = std::numeric_limits<double>::infinity();
    for (double r : t.radius)
        if (r > 0.0) smallest = std::min(smallest, r);
    if (!std::isfinite(smallest)) smallest = 1.0;
    for (double& r : t.radius) {
        if (r <= 0.0) {
            r = smallest;
            t.degenerate = true;
        }
    }
}

}  // namespace

NeighborTable knn_serial(std::span<const Vec6> points, std::size_t ell) {
    check(points, ell);
    NeighborTable t{ell, std::vector<std::uint32_t>(points.size() * ell), std::vector<double>(points.size()), false};
    std::vector<Candidate> heap;
    heap.reserve(ell + 1);
    for (std::size_t i = 0; i < points.size(); ++i) knn_row(points, i, ell, heap, &t.neighbors[i * ell], t.radius[i]);
    repair_radii(t);
    return t;
}

NeighborTable knn_parallel(std::span<const Vec6> points, std::size_t ell) {
    check(points, ell);
    NeighborTable t{ell, std::vector<std::uint32_t>(points.size() * ell), std::vector<double>(points.size()), false};
    const auto n = static_cast<long>(points.size());
#pragma omp parallel
    {
        std::vector<Candidate> heap;
        heap.reserve(ell + 1);
#pragma omp for schedule(static)
        for (long i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            knn_row(points, ui, ell, heap, &t.neighbors[ui * ell], t.radius[ui]);
        }
    }
    repair_radii(t);
    return t;
}

std::vector<double> map_indices_serial(std::size_t n, const std::function<double(std::size_t)>& f) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
}

std::vector<double> map_indices_parallel(std::size_t n, const std::function<double(std::size_t)>& f) {
    std::vector<double> out(n);
    std::exception_ptr failure;
    const auto ln = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < ln; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(seeker_map_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::size_t argmax_first(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

void apply_thread_override() {
    if (const char* env = std::getenv("SEEKER_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
}

int thread_count() {
    apply_thread_override();
    return omp_get_max_threads();
}

}  // namespace seeker::kernels
