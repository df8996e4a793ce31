#pragma once

#include <cmath>
#include <cstdint>

namespace curvkit {

/// Counter-based RNG: every draw is a pure function of (seed, stream,
/// counter), so estimators are reproducible regardless of evaluation order.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
        std::uint64_t x = seed_;
        x = splitmix(x ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        x = splitmix(x ^ (0xbf58476d1ce4e5b9ULL * (counter + 1)));
        return splitmix(x);
    }

    // uniform in (0, 1)
    double uniform(std::uint64_t stream, std::uint64_t counter) const {
        return (static_cast<double>(bits(stream, counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller
    double normal(std::uint64_t stream, std::uint64_t counter) const {
        double u1 = uniform(stream, 2 * counter);
        double u2 = uniform(stream, 2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
};

}  // namespace curvkit
