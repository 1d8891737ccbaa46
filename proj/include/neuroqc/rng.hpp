#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace neuroqc {

// Mix a base seed with a stream index (splitmix64 finalizer). Used to give
// every neuron / fold / trial its own RNG stream so results do not depend on
// scheduling order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// Seeded generator with platform-stable draws.
//
// std::mt19937_64 output is fixed by the standard but the std distributions
// are not, so bounded integers, uniforms and normals are derived here from the
// raw 64-bit stream.
class rng {
public:
    explicit rng(std::uint64_t seed): engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo)*uniform(); }

    // Uniform integer on [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i-1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

} // namespace neuroqc
