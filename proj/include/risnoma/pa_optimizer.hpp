#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "risnoma/ber_analytic.hpp"
#include "risnoma/system_config.hpp"

namespace risnoma {

// Objective for the power search: total average BER across users, in dB.
[[nodiscard]] inline double sum_ber_cost_dB(SystemConfig cfg,
                                            const std::vector<UserBerExpression>& exprs,
                                            const std::vector<double>& p_dB) {
    cfg.P_dB = p_dB;
    const ChannelStats st = channel_stats(cfg);
    const double sigma_n = std::sqrt(cfg.sigma_n2);
    double s = 0.0;
    for (const auto& e : exprs) s += analytic_user_ber(e, st, cfg.L, sigma_n);
    return 10.0 * std::log10(std::max(s, 1e-300));
}

[[nodiscard]] inline double power_cost_dB(const SystemConfig& cfg,
                                          const std::vector<double>& p_dB) {
    return sum_ber_cost_dB(cfg, extract_ber_terms(cfg.bits), p_dB);
}

struct PaOptions {
    double p_max_dB{40.0};
    double fd_step_dB{0.05};
    double grad_tol{1e-4};
    int max_inner{200};
    int max_outer{60};
    double outer_rate{0.5};
    double violation_tol_dB{1e-3};
    double cost_tol_dB{1e-4};
    double p_floor_dB{-50.0};
    // Empty means the default staggered start p_k = P_max - 10 (k-1)/K.
    std::vector<double> p0_dB{};
    double xi0{1.0};
};

struct PaTracePoint {
    int outer{0};
    int inner_iters{0};
    std::vector<double> p_dB;
    double cost_dB{0.0};
    double violation_dB{0.0};
};

struct PaResult {
    std::vector<double> p_dB;  // best feasible allocation found
    double cost_dB{0.0};
    std::vector<double> ber;
    int outer_iters{0};
    bool converged{false};
    std::vector<PaTracePoint> trace;
};

// Thrown when every trial step of an iteration evaluates non-finite; carries
// the completed outer rounds for postmortem.
struct PaDivergedError : std::runtime_error {
    std::vector<PaTracePoint> trace;
    PaDivergedError(const std::string& what, std::vector<PaTracePoint> t)
        : std::runtime_error(what), trace(std::move(t)) {}
};

namespace detail {

// Cholesky solve of (H + mu I) s = -g for tiny K; returns false when the
// shifted matrix is still not positive definite.
inline bool chol_solve(std::vector<double> H, std::vector<double> g, int K, double mu,
                       std::vector<double>& step) {
    for (int i = 0; i < K; ++i) H[static_cast<std::size_t>(i * K + i)] += mu;
    std::vector<double> Lf(static_cast<std::size_t>(K * K), 0.0);
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = H[static_cast<std::size_t>(i * K + j)];
            for (int k = 0; k < j; ++k)
                s -= Lf[static_cast<std::size_t>(i * K + k)] *
                     Lf[static_cast<std::size_t>(j * K + k)];
            if (i == j) {
                if (s <= 0.0) return false;
                Lf[static_cast<std::size_t>(i * K + j)] = std::sqrt(s);
            } else {
                Lf[static_cast<std::size_t>(i * K + j)] =
                    s / Lf[static_cast<std::size_t>(j * K + j)];
            }
        }
    }
    step.assign(static_cast<std::size_t>(K), 0.0);
    for (int i = 0; i < K; ++i) {
        double s = -g[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k)
            s -= Lf[static_cast<std::size_t>(i * K + k)] * step[static_cast<std::size_t>(k)];
        step[static_cast<std::size_t>(i)] = s / Lf[static_cast<std::size_t>(i * K + i)];
    }
    for (int i = K - 1; i >= 0; --i) {
        double s = step[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < K; ++k)
            s -= Lf[static_cast<std::size_t>(k * K + i)] * step[static_cast<std::size_t>(k)];
        step[static_cast<std::size_t>(i)] = s / Lf[static_cast<std::size_t>(i * K + i)];
    }
    return true;
}

}  // namespace detail

// Finds per-user transmit powers minimizing the summed average BER under a
// per-user cap. Inner loop: damped Newton with finite-difference derivatives
// on the penalized objective, projected onto the feasible box so every
// iterate respects the cap; outer loop: multiplicative multiplier update
// whose tilt decays for coordinates that settle in the interior. Each outer
// round restarts the inner solver from the best feasible point found so far:
// an early, still-large tilt can drag the iterate onto the flat high-BER
// plateau where every derivative vanishes, and the restart keeps the search
// anchored while the multipliers decay toward complementary slackness. The
// returned point is the best candidate seen anywhere, so the result never
// loses to its own starting points.
[[nodiscard]] inline PaResult optimize_power(const SystemConfig& base, const PaOptions& opt) {
    validate(base);
    const int K = base.K;
    if (!opt.p0_dB.empty() && static_cast<int>(opt.p0_dB.size()) != K)
        throw std::invalid_argument("pa: p0 size must match user count");
    if (opt.xi0 < 0.0) throw std::invalid_argument("pa: multipliers must be nonnegative");
    const auto exprs = extract_ber_terms(base.bits);
    const auto cost = [&](const std::vector<double>& p) {
        return sum_ber_cost_dB(base, exprs, p);
    };
    const double pmax = opt.p_max_dB;
    const double lo = opt.p_floor_dB;
    // The cap is enforced by projection rather than by the multipliers: a
    // penalized iterate that escapes above the cap cannot be returned anyway,
    // and letting one range there invites a runaway dual update.
    const double hi = pmax;
    const auto clip = [&](std::vector<double>& p) {
        for (double& v : p) v = std::min(hi, std::max(lo, v));
    };

    PaResult res;
    res.cost_dB = 1e300;
    const auto offer = [&](const std::vector<double>& p, double c) {
        for (double v : p)
            if (v > pmax + 1e-12) return;
        if (c < res.cost_dB) {
            res.cost_dB = c;
            res.p_dB = p;
        }
    };
    const auto offer_projected = [&](std::vector<double> p) {
        clip(p);
        offer(p, cost(p));
    };

    // Seed candidates: everyone at the cap, then the staggered (or supplied)
    // start.
    offer_projected(std::vector<double>(static_cast<std::size_t>(K), pmax));
    std::vector<double> p(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        p[static_cast<std::size_t>(k)] = pmax - 10.0 * static_cast<double>(k) / K;
    if (!opt.p0_dB.empty()) p = opt.p0_dB;
    offer_projected(p);

    std::vector<double> xi(static_cast<std::size_t>(K), opt.xi0);
    const double h = opt.fd_step_dB;
    double prev_best_cost = 1e300;

    for (int outer = 0; outer < opt.max_outer; ++outer) {
        p = res.p_dB;
        const auto lagr = [&](const std::vector<double>& q) {
            double v = cost(q);
            for (int k = 0; k < K; ++k)
                v += xi[static_cast<std::size_t>(k)] *
                     (q[static_cast<std::size_t>(k)] - pmax);
            return v;
        };
        int inner_done = 0;
        for (int inner = 0; inner < opt.max_inner; ++inner) {
            inner_done = inner + 1;
            const double f0 = cost(p);
            std::vector<double> grad(static_cast<std::size_t>(K));
            std::vector<double> diag(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k) {
                auto q = p;
                q[static_cast<std::size_t>(k)] += h;
                const double fp = cost(q);
                q[static_cast<std::size_t>(k)] -= 2.0 * h;
                const double fm = cost(q);
                grad[static_cast<std::size_t>(k)] =
                    (fp - fm) / (2.0 * h) + xi[static_cast<std::size_t>(k)];
                diag[static_cast<std::size_t>(k)] = (fp - 2.0 * f0 + fm) / (h * h);
            }
            // A coordinate whose gradient presses into the box wall cannot
            // move; the Newton system is reduced to the free coordinates.
            std::vector<int> free_idx;
            double gmax = 0.0;
            for (int k = 0; k < K; ++k) {
                const double g = grad[static_cast<std::size_t>(k)];
                const double v = p[static_cast<std::size_t>(k)];
                if ((v >= hi - 1e-9 && g < 0.0) || (v <= lo + 1e-9 && g > 0.0))
                    continue;
                free_idx.push_back(k);
                gmax = std::max(gmax, std::fabs(g));
            }
            if (gmax < opt.grad_tol) break;

            const int nf = static_cast<int>(free_idx.size());
            std::vector<double> hess(static_cast<std::size_t>(nf * nf), 0.0);
            std::vector<double> gf(static_cast<std::size_t>(nf));
            for (int a = 0; a < nf; ++a) {
                const int k = free_idx[static_cast<std::size_t>(a)];
                gf[static_cast<std::size_t>(a)] = grad[static_cast<std::size_t>(k)];
                hess[static_cast<std::size_t>(a * nf + a)] =
                    diag[static_cast<std::size_t>(k)];
            }
            for (int a = 0; a < nf; ++a)
                for (int b = a + 1; b < nf; ++b) {
                    const int i = free_idx[static_cast<std::size_t>(a)];
                    const int j = free_idx[static_cast<std::size_t>(b)];
                    auto q = p;
                    q[static_cast<std::size_t>(i)] += h;
                    q[static_cast<std::size_t>(j)] += h;
                    const double fpp = cost(q);
                    q[static_cast<std::size_t>(j)] -= 2.0 * h;
                    const double fpm = cost(q);
                    q[static_cast<std::size_t>(i)] -= 2.0 * h;
                    const double fmm_ = cost(q);
                    q[static_cast<std::size_t>(j)] += 2.0 * h;
                    const double fmp = cost(q);
                    const double hij = (fpp - fpm - fmp + fmm_) / (4.0 * h * h);
                    hess[static_cast<std::size_t>(a * nf + b)] = hij;
                    hess[static_cast<std::size_t>(b * nf + a)] = hij;
                }

            double diag_max = 1e-12;
            for (int a = 0; a < nf; ++a)
                diag_max =
                    std::max(diag_max, std::fabs(hess[static_cast<std::size_t>(a * nf + a)]));
            double l0 = f0;
            for (int k = 0; k < K; ++k)
                l0 += xi[static_cast<std::size_t>(k)] *
                      (p[static_cast<std::size_t>(k)] - pmax);
            double mu = 0.0;
            bool moved = false;
            bool stalled = false;
            bool tried = false;
            bool any_finite = false;
            // The dB-domain objective is not convex everywhere, so a raw
            // Newton direction can point uphill or overshoot; escalate the
            // Levenberg shift until a damped step actually descends.
            for (int attempt = 0; attempt < 4 && !moved; ++attempt) {
                std::vector<double> step_f;
                bool solved = detail::chol_solve(hess, gf, nf, mu, step_f);
                while (!solved && mu < diag_max * 1e9) {
                    mu = mu == 0.0 ? diag_max * 1e-8 : mu * 10.0;
                    solved = detail::chol_solve(hess, gf, nf, mu, step_f);
                }
                if (!solved) break;
                std::vector<double> step(static_cast<std::size_t>(K), 0.0);
                for (int a = 0; a < nf; ++a)
                    step[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(a)])] =
                        step_f[static_cast<std::size_t>(a)];
                double smax = 0.0;
                for (double s : step) smax = std::max(smax, std::fabs(s));
                if (smax > 8.0)
                    for (double& s : step) s *= 8.0 / smax;

                double t = 1.0;
                for (int halve = 0; halve <= 8; ++halve) {
                    auto q = p;
                    for (int k = 0; k < K; ++k)
                        q[static_cast<std::size_t>(k)] +=
                            t * step[static_cast<std::size_t>(k)];
                    clip(q);
                    const double lq = lagr(q);
                    tried = true;
                    if (std::isfinite(lq)) any_finite = true;
                    if (std::isfinite(lq) && lq < l0) {
                        p = q;
                        // The penalized value already contains the true cost,
                        // so tracking the iterate costs nothing extra.
                        double fq = lq;
                        for (int k = 0; k < K; ++k)
                            fq -= xi[static_cast<std::size_t>(k)] *
                                  (q[static_cast<std::size_t>(k)] - pmax);
                        offer(q, fq);
                        moved = true;
                        stalled = l0 - lq < 1e-6;
                        break;
                    }
                    t *= 0.5;
                }
                if (!moved) mu = std::max(mu, diag_max * 1e-4) * 100.0;
            }
            if (!moved && tried && !any_finite)
                throw PaDivergedError("pa: optimizer diverged, cost non-finite at outer " +
                                          std::to_string(outer),
                                      res.trace);
            if (!moved || stalled) break;
        }

        double violation = 0.0;
        for (int k = 0; k < K; ++k)
            violation = std::max(violation, p[static_cast<std::size_t>(k)] - pmax);
        const double outer_cost = cost(p);
        offer(p, outer_cost);
        res.trace.push_back({outer, inner_done, p, outer_cost, violation});
        res.outer_iters = outer + 1;
        if (violation < opt.violation_tol_dB &&
            std::fabs(res.cost_dB - prev_best_cost) < opt.cost_tol_dB) {
            res.converged = true;
            break;
        }
        prev_best_cost = res.cost_dB;
        // Clamping the exponent keeps a deep interior excursion from zeroing
        // a multiplier permanently (the update is multiplicative).
        for (int k = 0; k < K; ++k) {
            const double v = std::min(
                4.0, std::max(-4.0, p[static_cast<std::size_t>(k)] - pmax));
            xi[static_cast<std::size_t>(k)] *= std::exp(opt.outer_rate * v);
        }
    }

    SystemConfig best = base;
    best.P_dB = res.p_dB;
    res.ber = analytic_ber(best);
    return res;
}

// One row per outer round: iteration, powers, cost, worst cap violation.
inline void write_pa_trace_csv(const PaResult& res, std::ostream& os) {
    os << "iteration";
    for (std::size_t k = 0; k < res.p_dB.size(); ++k) os << ",p" << (k + 1) << "_dB";
    os << ",cost_dB,max_violation_dB\n";
    char buf[32];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        os << buf;
    };
    for (const auto& t : res.trace) {
        os << t.outer;
        for (const double v : t.p_dB) {
            os << ',';
            num(v);
        }
        os << ',';
        num(t.cost_dB);
        os << ',';
        num(t.violation_dB);
        os << '\n';
    }
}

}  // namespace risnoma
