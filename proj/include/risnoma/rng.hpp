#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace risnoma {

// All randomness flows through this wrapper so that results are reproducible
// bit for bit from a seed. mt19937_64 is fully specified by the standard, and
// the variate transforms below are written out explicitly because the
// std::*_distribution algorithms are implementation defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Independent stream for worker `stream` under one master seed.
    // SplitMix64 mixing keeps distinct (master, stream) pairs uncorrelated.
    static Rng derive(std::uint64_t master, std::uint64_t stream) {
        std::uint64_t x = splitmix(master);
        x ^= splitmix(stream + 0x9E3779B97F4A7C15ull);
        return Rng(splitmix(x));
    }

    // Uniform in [0, 1), 53 random bits.
    double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; second variate of each pair is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log1p(-u01()));
        const double t = 6.283185307179586476925286766559 * u01();
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // CN(0,1): unit total variance, so each component is N(0, 1/2).
    std::complex<double> cgaussian() {
        const double s = 0.70710678118654752440084436210485;
        const double re = gaussian();
        return {s * re, s * gaussian()};
    }

    // Exponential, mean 1.
    double exponential() { return -std::log1p(-u01()); }

    // Uniform integer in [0, n). Bias is below 2^-53 for the n used here.
    std::uint32_t below(std::uint32_t n) {
        const auto v = static_cast<std::uint32_t>(u01() * static_cast<double>(n));
        return v < n ? v : n - 1;
    }

  private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
    double spare_{0.0};
    bool have_spare_{false};
};

}  // namespace risnoma
