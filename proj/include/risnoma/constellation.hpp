#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "risnoma/channel_model.hpp"

namespace risnoma {

struct DegenerateConstellationError : std::runtime_error {
    explicit DegenerateConstellationError(const std::string& msg) : std::runtime_error(msg) {}
};

[[nodiscard]] inline std::uint32_t gray_encode(std::uint32_t v) { return v ^ (v >> 1); }

// One point of the per-dimension superimposed PAM constellation.
//   value = sum_i s_i * w_i, s_i odd amplitudes, w_i per-user weights
//   sub_i = Gray label of user i's level index, MSB first
struct SuperLevel {
    double value;
    std::vector<int> s;
    std::vector<std::uint32_t> sub;
};

struct ConstellationSpec {
    std::vector<int> bits;  // per-user bits per symbol; per-dimension labels use bits/2
    std::vector<SuperLevel> levels;  // ascending by value
    std::vector<double> thresholds;  // midpoints between adjacent levels
    std::vector<std::vector<int>> threshold_s;  // integer midpoint rows
};

inline void check_bits(const std::vector<int>& bits) {
    if (bits.empty()) throw std::invalid_argument("bits must be non-empty");
    for (int b : bits)
        if (b < 2 || b % 2 != 0)
            throw InvalidModulationError(b >= 0 && b < 62 ? (std::int64_t{1} << b) : -1);
}

// Per-dimension amplitudes sqrt(rho_i) of the reference superposition
// rho_i = 2^(sum of later users' bits). These tile the combined constellation
// into a uniform grid, which fixes the level ordering the closed forms assume.
[[nodiscard]] inline std::vector<double> canonical_weights(const std::vector<int>& bits) {
    check_bits(bits);
    std::vector<double> w(bits.size());
    int shift = 0;
    for (std::size_t i = bits.size(); i-- > 0;) {
        w[i] = std::ldexp(1.0, shift / 2);  // exponent is even: all b_j are even
        shift += bits[i];
    }
    return w;
}

[[nodiscard]] inline std::vector<double> canonical_rho(const std::vector<int>& bits) {
    auto w = canonical_weights(bits);
    for (auto& v : w) v *= v;
    return w;
}

[[nodiscard]] inline ConstellationSpec build_superimposed(const std::vector<int>& bits,
                                                          const std::vector<double>& weights) {
    check_bits(bits);
    if (weights.size() != bits.size())
        throw std::invalid_argument("weights must match user count");
    const auto K = bits.size();
    std::vector<int> m(K);
    std::size_t n = 1;
    for (std::size_t i = 0; i < K; ++i) {
        m[i] = 1 << (bits[i] / 2);
        n *= static_cast<std::size_t>(m[i]);
    }
    ConstellationSpec spec;
    spec.bits = bits;
    spec.levels.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        SuperLevel lv;
        lv.s.resize(K);
        lv.sub.resize(K);
        lv.value = 0.0;
        std::size_t rem = p;
        for (std::size_t i = K; i-- > 0;) {
            const auto mi = static_cast<std::uint32_t>(m[i]);
            const std::uint32_t li = static_cast<std::uint32_t>(rem) % mi;
            rem /= mi;
            lv.s[i] = 2 * static_cast<int>(li) - (m[i] - 1);
            lv.sub[i] = gray_encode(li);
            lv.value += lv.s[i] * weights[i];
        }
        spec.levels.push_back(std::move(lv));
    }
    std::sort(spec.levels.begin(), spec.levels.end(),
              [](const SuperLevel& a, const SuperLevel& b) { return a.value < b.value; });
    for (std::size_t p = 0; p + 1 < n; ++p) {
        if (spec.levels[p].value == spec.levels[p + 1].value)
            throw DegenerateConstellationError("superimposed levels coincide at value " +
                                               std::to_string(spec.levels[p].value));
        spec.thresholds.push_back(0.5 * (spec.levels[p].value + spec.levels[p + 1].value));
        std::vector<int> row(K);
        for (std::size_t i = 0; i < K; ++i)
            row[i] = (spec.levels[p].s[i] + spec.levels[p + 1].s[i]) / 2;  // odd + odd
        spec.threshold_s.push_back(std::move(row));
    }
    return spec;
}

// Index of the decision cell containing x. A value exactly on a threshold
// belongs to the lower cell.
[[nodiscard]] inline int detect_level(const ConstellationSpec& spec, double x) {
    const auto it = std::lower_bound(spec.thresholds.begin(), spec.thresholds.end(), x);
    return static_cast<int>(it - spec.thresholds.begin());
}

}  // namespace risnoma
