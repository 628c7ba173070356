#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "risnoma/constellation.hpp"
#include "risnoma/rational.hpp"

namespace risnoma {

[[nodiscard]] inline double qfunc(double x) {
    return 0.5 * std::erfc(x * 0.70710678118654752440084436210485);
}

struct OrderingChangedError : std::runtime_error {
    explicit OrderingChangedError(const std::string& msg) : std::runtime_error(msg) {}
};

struct QTerm {
    Rational c;
    std::vector<int> a;
};

// Conditional error probability of one bit given the transmitted column,
// kept unmerged: entries are +-Q((a . h)/sigma) with coefficient +-1.
struct ColumnEntry {
    int sign;
    std::vector<int> a;
};

struct ColumnTerms {
    int level_index;
    std::vector<ColumnEntry> entries;
};

struct BitExpression {
    int user;
    int bit;  // 0 = most significant per-dimension Gray bit
    std::vector<ColumnTerms> columns;
    std::vector<QTerm> merged;  // averaged over columns
};

struct UserBerExpression {
    int user;
    std::vector<int> bits;
    std::vector<BitExpression> bit_parts;
    std::vector<QTerm> terms;  // bit-averaged, merged by row
};

namespace detail {

// Walks the runs of decision cells whose (user, bit) label differs from the
// label of level v_idx, left to right. Each run contributes one or two
// Q-terms; the emitted form is already normalized so that the Q argument is
// positive at the weights the spec was built with:
//   run left of v:  +Q(v - th_hi), -Q(v - th_lo)
//   run right of v: +Q(th_lo - v), -Q(th_hi - v)
// with the - term dropped when the run touches the end of the axis. The
// constant offsets from rewriting Q of a negative argument cancel run by run.
template <class Emit>
void enumerate_bit_terms(const ConstellationSpec& spec, std::size_t user, int bit, int v_idx,
                         Emit&& emit) {
    const int n = static_cast<int>(spec.levels.size());
    const int r = spec.bits[user] / 2;
    auto bit_of = [&](int lvl) {
        return (spec.levels[static_cast<std::size_t>(lvl)].sub[user] >> (r - 1 - bit)) & 1u;
    };
    const auto want = bit_of(v_idx);
    int c = 0;
    while (c < n) {
        if (bit_of(c) == want) {
            ++c;
            continue;
        }
        const int c0 = c;
        while (c + 1 < n && bit_of(c + 1) != want) ++c;
        const int c1 = c;
        if (c1 < v_idx) {
            emit(+1, c1, true);
            if (c0 > 0) emit(-1, c0 - 1, true);
        } else {
            emit(+1, c0 - 1, false);
            if (c1 < n - 1) emit(-1, c1, false);
        }
        ++c;
    }
}

inline std::vector<int> term_row(const ConstellationSpec& spec, int v_idx, int th_idx, bool left) {
    const auto K = spec.levels.front().s.size();
    std::vector<int> row(K);
    const auto& sv = spec.levels[static_cast<std::size_t>(v_idx)].s;
    const auto& st = spec.threshold_s[static_cast<std::size_t>(th_idx)];
    for (std::size_t i = 0; i < K; ++i) row[i] = left ? sv[i] - st[i] : st[i] - sv[i];
    return row;
}

inline double term_distance(const ConstellationSpec& spec, int v_idx, int th_idx, bool left) {
    const double v = spec.levels[static_cast<std::size_t>(v_idx)].value;
    const double t = spec.thresholds[static_cast<std::size_t>(th_idx)];
    return left ? v - t : t - v;
}

inline std::vector<QTerm> sorted_terms(std::map<std::vector<int>, Rational>& acc) {
    std::vector<QTerm> out;
    for (auto& [row, c] : acc)
        if (!c.is_zero()) out.push_back({c, row});
    return out;
}

}  // namespace detail

// Exact per-user average BER expressions for the reference superposition.
// Works on the canonical weights, where the level ordering is the one the
// closed forms assume; rows are integer combinations of the per-user
// effective channels.
[[nodiscard]] inline std::vector<UserBerExpression> extract_ber_terms(
    const std::vector<int>& bits) {
    const ConstellationSpec spec = build_superimposed(bits, canonical_weights(bits));
    const int n = static_cast<int>(spec.levels.size());
    std::vector<UserBerExpression> out;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        UserBerExpression ue;
        ue.user = static_cast<int>(k);
        ue.bits = bits;
        std::map<std::vector<int>, Rational> user_acc;
        const int r = bits[k] / 2;
        for (int t = 0; t < r; ++t) {
            BitExpression be;
            be.user = static_cast<int>(k);
            be.bit = t;
            std::map<std::vector<int>, Rational> bit_acc;
            for (int v = 0; v < n; ++v) {
                ColumnTerms col;
                col.level_index = v;
                detail::enumerate_bit_terms(spec, k, t, v, [&](int sign, int th, bool left) {
                    auto row = detail::term_row(spec, v, th, left);
                    col.entries.push_back({sign, row});
                    bit_acc[row] = bit_acc[row] + Rational(sign, n);
                    // Both dimensions carry the same bit statistics, so the
                    // user average weights each of the b/2 per-dimension bits
                    // by 2/b.
                    user_acc[row] = user_acc[row] + Rational(2 * sign, bits[k] * n);
                });
                be.columns.push_back(std::move(col));
            }
            be.merged = detail::sorted_terms(bit_acc);
            ue.bit_parts.push_back(std::move(be));
        }
        ue.terms = detail::sorted_terms(user_acc);
        out.push_back(std::move(ue));
    }
    return out;
}

// BER of one user for fixed effective channels h (one value per user).
[[nodiscard]] inline double conditional_ber(const UserBerExpression& expr,
                                            const std::vector<double>& h, double sigma_n) {
    if (h.size() != expr.bits.size())
        throw std::invalid_argument("conditional_ber: h must have one entry per user");
    if (!(sigma_n > 0.0)) throw std::domain_error("conditional_ber: sigma_n must be positive");
    double sum = 0.0;
    for (const auto& term : expr.terms) {
        double arg = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) arg += term.a[i] * h[i];
        sum += term.c.value() * qfunc(arg / sigma_n);
    }
    return sum;
}

// Unmerged rows in enumeration order, for pairing with finite differences.
[[nodiscard]] inline std::vector<std::vector<int>> flattened_rows(const UserBerExpression& expr) {
    std::vector<std::vector<int>> rows;
    for (const auto& bp : expr.bit_parts)
        for (const auto& col : bp.columns)
            for (const auto& e : col.entries) rows.push_back(e.a);
    return rows;
}

namespace detail {

struct DistanceList {
    std::vector<double> delta;
    std::vector<int> sign;
};

inline std::vector<DistanceList> term_distances(const std::vector<int>& bits,
                                                const std::vector<double>& weights) {
    const ConstellationSpec spec = build_superimposed(bits, weights);
    const int n = static_cast<int>(spec.levels.size());
    std::vector<DistanceList> out(bits.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const int r = bits[k] / 2;
        for (int t = 0; t < r; ++t)
            for (int v = 0; v < n; ++v)
                enumerate_bit_terms(spec, k, t, v, [&](int sign, int th, bool left) {
                    out[k].delta.push_back(term_distance(spec, v, th, left));
                    out[k].sign.push_back(sign);
                });
    }
    return out;
}

}  // namespace detail

// Error-distance sensitivities by finite differences on the amplitudes
// sqrt(rho_i). Distances are linear in the amplitudes, so the quotients are
// exact up to rounding and reproduce the integer rows of extract_ber_terms
// as long as the perturbation does not reorder the constellation.
[[nodiscard]] inline std::vector<std::vector<std::vector<double>>> algorithm1_coefficients(
    const std::vector<int>& bits, const std::vector<double>& rho, double eps = 0.1) {
    if (rho.size() != bits.size())
        throw std::invalid_argument("algorithm1_coefficients: rho must match user count");
    if (!(eps > 0.0)) throw std::domain_error("algorithm1_coefficients: eps must be positive");
    std::vector<double> w(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (!(rho[i] > 0.0))
            throw std::domain_error("algorithm1_coefficients: rho must be positive");
        w[i] = std::sqrt(rho[i]);
    }
    const auto base = detail::term_distances(bits, w);
    const auto K = bits.size();
    std::vector<std::vector<std::vector<double>>> A(K);
    for (std::size_t k = 0; k < K; ++k)
        A[k].assign(base[k].delta.size(), std::vector<double>(K, 0.0));
    for (std::size_t i = 0; i < K; ++i) {
        auto w2 = w;
        w2[i] += eps;
        const auto pert = detail::term_distances(bits, w2);
        for (std::size_t k = 0; k < K; ++k) {
            if (pert[k].delta.size() != base[k].delta.size() || pert[k].sign != base[k].sign)
                throw OrderingChangedError(
                    "perturbation reordered the constellation; retry with smaller eps");
            for (std::size_t q = 0; q < base[k].delta.size(); ++q)
                A[k][q][i] = (pert[k].delta[q] - base[k].delta[q]) / eps;
        }
    }
    return A;
}

// JSON rendering of the merged expressions; users are 1-based externally.
[[nodiscard]] inline std::string export_expressions_json(
    const std::vector<UserBerExpression>& exprs) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& ue : exprs) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : ue.terms)
            terms.push_back({{"c", t.c.str()}, {"a", t.a}});
        root.push_back({{"user", ue.user + 1}, {"terms", std::move(terms)}});
    }
    return root.dump(2) + "\n";
}

}  // namespace risnoma
