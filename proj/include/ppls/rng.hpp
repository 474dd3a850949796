#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "ppls/common.hpp"

namespace ppls {

// Counter-based random stream (SplitMix64 core). Streams are cheap value
// types; fork(key) derives an independent substream, so per-trial and
// per-start streams never share state. Satisfies UniformRandomBitGenerator,
// so std:: distributions work on top of it.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) : state_(mix(seed + kSeedTag)) {}

    // Independent substream for (this stream, key).
    RngStream fork(std::uint64_t key) const {
        RngStream child(0);
        child.state_ = mix(mix(state_ + kForkTag) + kGamma * (key + 1));
        return child;
    }

    result_type operator()() {
        state_ += kGamma;
        return mix(state_);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    static constexpr std::uint64_t kSeedTag = 0x8e2f'9d13'5c6b'7a41ULL;
    static constexpr std::uint64_t kForkTag = 0x3c79'ac49'2f8e'1b55ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

inline double draw_normal(RngStream& rng) {
    std::normal_distribution<double> dist;
    return dist(rng);
}

inline double draw_uniform(RngStream& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline Matrix normal_matrix(int rows, int cols, RngStream& rng) {
    std::normal_distribution<double> dist;
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

}  // namespace ppls
