#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace seeker {

using Rng = std::mt19937_64;

/// Independent stream keyed by a master seed and any number of indices
/// (trial, scan, action, ...). Same key, same stream, regardless of the
/// thread that asks for it.
inline Rng make_rng(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * key.size());
    for (auto k : key) {
        words.push_back(static_cast<std::uint32_t>(k & 0xffffffffULL));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

// Stream tags so that different consumers of one (seed, trial, scan) key never collide.
enum class Stream : std::uint64_t {
    truth = 1,
    measurements = 2,
    particles = 3,
    reward = 4,
    attributable = 5,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace seeker
