#include <cmath>
#include <limits>
#include <numbers>

#include <neuroqc/rng.hpp>

namespace neuroqc {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull*(stream + 1);
    z = (z ^ (z >> 30))*0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27))*0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double rng::uniform() {
    return static_cast<double>(engine_() >> 11)*0x1.0p-53;
}

std::uint64_t rng::below(std::uint64_t n) {
    // Rejection sampling on the top of the range to remove modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max()%n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x%n;
}

double rng::normal(double mean, double stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + stddev*spare_normal_;
    }
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0*std::log(u1));
    const double theta = 2.0*std::numbers::pi*u2;
    spare_normal_ = r*std::sin(theta);
    has_spare_ = true;
    return mean + stddev*r*std::cos(theta);
}

} // namespace neuroqc
