#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace ddiff {

// Deterministic generator with explicit, platform-independent draw logic.
// std::discrete_distribution and friends are implementation-defined, which
// would break the bit-identical-across-machines contract, so all sampling
// goes through the methods below. Categorical draws use double-precision
// cumulative sums.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // Independent child stream, stable under the parent's draw history.
    static Rng child(uint64_t seed, uint64_t stream) {
        Rng r(mix(seed ^ 0xa0761d6478bd642full, stream + 1));
        r.next_u64();
        return r;
    }

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    int uniform_int(int m) {  // uniform in [0, m)
        return static_cast<int>(uniform() * static_cast<double>(m)) % m;
    }

    // Categorical draw over unnormalized nonnegative weights.
    int categorical(std::span<const double> w) {
        double total = 0.0;
        for (double v : w) total += v;
        double u = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

  private:
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ull * b;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

struct MeanAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    int64_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    void merge(const MeanAccumulator & o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double stderr_of_mean() const {
        if (count < 2) return 0.0;
        const double m = mean();
        double var = (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
        if (var < 0) var = 0;
        return std::sqrt(var / static_cast<double>(count));
    }
};

}  // namespace ddiff
