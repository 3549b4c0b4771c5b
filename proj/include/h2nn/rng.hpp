// Deterministic random streams. We map raw mt19937_64 output to doubles
// ourselves instead of going through std::uniform_real_distribution, whose
// output is implementation-defined; this keeps generated data byte-identical
// across standard libraries.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace h2nn {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1): top 53 bits of the raw draw
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

// Fisher-Yates; spelled out so the permutation stream is pinned down,
// std::shuffle leaves the draw pattern to the implementation.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace h2nn
