#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace risnoma {

// One uplink system: K users share the channel through a reflecting surface
// whose L_i-element partition i is phase-adjusted for user i. Powers are in
// dB relative to a unit per-dimension noise variance.
struct SystemConfig {
    int K{0};
    std::vector<int> L;
    std::vector<int> bits;
    std::vector<double> d_user_ris;
    double d_ris_bs{0.0};
    double psi{0.0};
    double sigma_n2{1.0};
    std::vector<double> P_dB;
};

inline void validate(const SystemConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };
    if (cfg.K < 1) fail("K must be >= 1");
    const auto k = static_cast<std::size_t>(cfg.K);
    if (cfg.L.size() != k) fail("L must have K entries");
    if (cfg.bits.size() != k) fail("bits must have K entries");
    if (cfg.d_user_ris.size() != k) fail("d_user_ris must have K entries");
    if (cfg.P_dB.size() != k) fail("P_dB must have K entries");
    for (int i = 0; i < cfg.K; ++i) {
        if (cfg.L[static_cast<std::size_t>(i)] < 1)
            fail("L[" + std::to_string(i) + "] must be >= 1");
        const int b = cfg.bits[static_cast<std::size_t>(i)];
        if (b < 2 || b % 2 != 0)
            fail("bits[" + std::to_string(i) + "] must be an even integer >= 2 (square QAM)");
        if (!(cfg.d_user_ris[static_cast<std::size_t>(i)] > 0.0))
            fail("d_user_ris[" + std::to_string(i) + "] must be > 0");
    }
    if (!(cfg.d_ris_bs > 0.0)) fail("d_ris_bs must be > 0");
    if (!(cfg.sigma_n2 > 0.0)) fail("sigma_n2 must be > 0");
}

[[nodiscard]] inline int total_reflectors(const SystemConfig& cfg) {
    int sum = 0;
    for (int l : cfg.L) sum += l;
    return sum;
}

[[nodiscard]] inline std::int64_t modulation_order(int bits) { return std::int64_t{1} << bits; }

}  // namespace risnoma
