#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tsmx {

/// PCG-XSH-RR with 64-bit state. Pinned generator: every seeded stream in
/// the library goes through this type so runs are reproducible bit for bit.
class Pcg32 {
 public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next();
        state_ += seed;
        next();
    }

    std::uint32_t next() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    /// Uniform in [0, 1).
    double uniform() {
        return next() * (1.0 / 4294967296.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, bound).
    std::uint32_t bounded(std::uint32_t bound) {
        std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            std::uint32_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal via Box-Muller (one value per call, cached pair).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

 private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Fisher-Yates shuffle driven by a Pcg32 stream.
template <typename T>
void shuffle(std::vector<T>& v, Pcg32& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng.bounded(static_cast<std::uint32_t>(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace tsmx
