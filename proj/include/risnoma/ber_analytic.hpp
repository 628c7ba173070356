#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "risnoma/ber_expression.hpp"
#include "risnoma/channel_model.hpp"
#include "risnoma/quadrature.hpp"

namespace risnoma {

// Characteristic function of a decision-distance variable X = sum_i a_i h_i
// under the aligned-channel model. Each user's own coherently combined link
// enters as a moment-matched Gamma factor; the residual links through the
// other partitions enter exactly, one symmetric factor per partition. The
// factors are treated as independent.
struct TermCF {
    // (theta, N): factor (1 - j*theta*z)^-N.
    std::vector<std::pair<double, double>> gamma_factors;
    // (kappa, L): factor (1 + kappa*z^2/4)^-L.
    std::vector<std::pair<double, double>> erlang_factors;
};

[[nodiscard]] inline TermCF assemble_cf(const std::vector<int>& a, const ChannelStats& st,
                                        const std::vector<int>& L) {
    const std::size_t K = st.scale.size();
    if (a.size() != K || L.size() != K)
        throw std::invalid_argument("assemble_cf: row length does not match user count");
    TermCF cf;
    for (std::size_t i = 0; i < K; ++i) {
        if (a[i] == 0) continue;
        cf.gamma_factors.emplace_back(a[i] * st.gamma[i].zeta, st.gamma[i].shape);
    }
    for (std::size_t j = 0; j < K; ++j) {
        double kappa = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            if (i == j) continue;
            const double t = a[i] * st.scale[i];
            kappa += t * t;
        }
        if (kappa > 0.0)
            cf.erlang_factors.emplace_back(kappa, static_cast<double>(L[j]));
    }
    return cf;
}

// Log-magnitude plus phase keeps the product stable for large shapes.
[[nodiscard]] inline std::complex<double> eval_cf(const TermCF& cf, double z) {
    double logmag = 0.0;
    double phase = 0.0;
    for (const auto& [theta, n] : cf.gamma_factors) {
        const double t = theta * z;
        logmag -= 0.5 * n * std::log1p(t * t);
        phase += n * std::atan(t);
    }
    for (const auto& [kappa, l] : cf.erlang_factors)
        logmag -= l * std::log1p(0.25 * kappa * z * z);
    return std::polar(std::exp(logmag), phase);
}

[[nodiscard]] inline double cf_mean(const TermCF& cf) {
    double mean = 0.0;
    for (const auto& [theta, n] : cf.gamma_factors) mean += theta * n;
    return mean;
}

inline constexpr double kExpectedQZMax = 8.6;  // exp(-z^2/2) < 1e-16 past here

// E[Q(X / sigma)] for X with characteristic function phi and the given mean.
// Folding the Gaussian into the inversion integral gives
//   E[Q] = 1/2 - (1/pi) int_0^inf exp(-z^2/2) Im phi(z/sigma) / z dz,
// a smooth integrand whose z -> 0 limit is mean(X)/sigma and whose tail is
// killed by the Gaussian damp, so a fixed truncation point suffices.
// phase_marks: interior z breakpoints seeding the adaptive quadrature; for a
// strongly oscillating phi these must be dense enough that no seed interval
// swallows a full oscillation, or the error estimate can alias to zero.
template <typename Phi>
[[nodiscard]] double expected_q_from_cf(Phi&& phi, double mean, double sigma,
                                        const std::vector<double>& phase_marks = {}) {
    if (!(sigma > 0.0)) throw std::domain_error("expected_q: sigma must be positive");
    const auto integrand = [&](double z) {
        if (z <= 0.0) return -mean / sigma;
        const double damp = std::exp(-0.5 * z * z);
        if (damp == 0.0) return 0.0;
        return -damp * phi(z / sigma).imag() / z;
    };
    std::vector<double> breaks;
    breaks.reserve(phase_marks.size() + 2);
    breaks.push_back(0.0);
    for (double m : phase_marks)
        if (m > 0.0 && m < kExpectedQZMax) breaks.push_back(m);
    breaks.push_back(kExpectedQZMax);
    const int budget = 4096 + 2 * static_cast<int>(breaks.size());
    const QuadResult r = integrate_gk15_segmented(integrand, breaks, 1e-12, budget);
    const double q = 0.5 + r.value / kPi;
    if (!(q > -1e-9 && q < 1.0 + 1e-9))
        throw IntegrationError("expected_q: result escaped [0, 1]", std::abs(q - 0.5) - 0.5);
    return std::min(1.0, std::max(0.0, q));
}

// z positions (in the damped variable) where the accumulated phase bound of
// the Gamma factors crosses quarter-turn multiples. Seeding the quadrature
// here keeps every interval below a quarter oscillation.
[[nodiscard]] inline std::vector<double> phase_quarter_marks(const TermCF& cf, double sigma) {
    const auto psi = [&](double z) {
        double s = 0.0;
        for (const auto& [theta, n] : cf.gamma_factors)
            s += n * std::atan(std::abs(theta) * z / sigma);
        return s;
    };
    const double half_pi = 0.5 * kPi;
    const double total = psi(kExpectedQZMax);
    const int n_marks = static_cast<int>(total / half_pi);
    std::vector<double> marks;
    marks.reserve(static_cast<std::size_t>(n_marks));
    double lo_prev = 0.0;
    for (int m = 1; m <= n_marks; ++m) {
        double lo = lo_prev;
        double hi = kExpectedQZMax;
        const double target = m * half_pi;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (psi(mid) < target ? lo : hi) = mid;
        }
        marks.push_back(hi);
        lo_prev = hi;
    }
    return marks;
}

[[nodiscard]] inline double expected_q(const TermCF& cf, double sigma) {
    // No Gamma factor means the law is symmetric, so the integral vanishes.
    if (cf.gamma_factors.empty()) {
        if (!(sigma > 0.0)) throw std::domain_error("expected_q: sigma must be positive");
        return 0.5;
    }
    return expected_q_from_cf([&](double z) { return eval_cf(cf, z); }, cf_mean(cf), sigma,
                              phase_quarter_marks(cf, sigma));
}

// Average BER of one user: the conditional expression with every Q term
// replaced by its expectation over the fading model.
[[nodiscard]] inline double analytic_user_ber(const UserBerExpression& expr,
                                              const ChannelStats& st, const std::vector<int>& L,
                                              double sigma_n) {
    double ber = 0.0;
    for (const auto& t : expr.terms)
        ber += t.c.value() * expected_q(assemble_cf(t.a, st, L), sigma_n);
    return ber;
}

[[nodiscard]] inline std::vector<double> analytic_ber(const SystemConfig& cfg) {
    const ChannelStats st = channel_stats(cfg);
    const auto exprs = extract_ber_terms(cfg.bits);
    const double sigma_n = std::sqrt(cfg.sigma_n2);
    std::vector<double> out;
    out.reserve(exprs.size());
    for (const auto& e : exprs) out.push_back(analytic_user_ber(e, st, cfg.L, sigma_n));
    return out;
}

}  // namespace risnoma
