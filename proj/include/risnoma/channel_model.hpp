#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "risnoma/rng.hpp"
#include "risnoma/system_config.hpp"

namespace risnoma {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct InvalidModulationError : std::invalid_argument {
    explicit InvalidModulationError(std::int64_t m)
        : std::invalid_argument("not a square QAM order: " + std::to_string(m)) {}
};

// QAM normalization beta = (2/3)(M - 1); requires M = 2^b with b even.
[[nodiscard]] inline double qam_scale(std::int64_t M) {
    if (M < 4 || (M & (M - 1)) != 0) throw InvalidModulationError(M);
    int b = 0;
    for (std::int64_t v = M; v > 1; v >>= 1) ++b;
    if (b % 2 != 0) throw InvalidModulationError(M);
    return (2.0 / 3.0) * static_cast<double>(M - 1);
}

// Cascaded user-surface-base path gain (d_u * d_b)^(-psi).
[[nodiscard]] inline double pathloss(double d_user_ris, double d_ris_bs, double psi) {
    if (!(d_user_ris > 0.0) || !(d_ris_bs > 0.0))
        throw std::domain_error("pathloss: distances must be positive");
    return std::exp(-psi * (std::log(d_user_ris) + std::log(d_ris_bs)));
}

// Moment-matched Gamma model of the phase-aligned cascaded channel
// gamma_ii = scale * sum_l |h_l||g_l| over the user's own partition:
//   mean = scale * (pi/4) * L, variance = scale^2 * (16 - pi^2)/16 * L.
struct GammaParams {
    double scale{0.0};  // sqrt(P * eta / beta)
    double zeta{0.0};
    double shape{0.0};  // N, not necessarily integer
    double mean{0.0};
    double variance{0.0};
};

[[nodiscard]] inline GammaParams gamma_params(int L, double P_linear, double eta, double beta) {
    if (L < 1) throw std::domain_error("gamma_params: L must be >= 1");
    if (!(P_linear > 0.0) || !(eta > 0.0) || !(beta > 0.0))
        throw std::domain_error("gamma_params: P, eta, beta must be positive");
    GammaParams p;
    p.scale = std::sqrt(P_linear * eta / beta);
    p.zeta = p.scale * (16.0 - kPi * kPi) / (4.0 * kPi);
    p.shape = static_cast<double>(L) * kPi * kPi / (16.0 - kPi * kPi);
    p.mean = p.scale * (kPi / 4.0) * static_cast<double>(L);
    p.variance = p.scale * p.scale * ((16.0 - kPi * kPi) / 16.0) * static_cast<double>(L);
    return p;
}

// CF of the Gamma model, principal branch. For real z the base 1 - j*zeta*z
// stays in the right half plane, so std::pow is single valued here.
[[nodiscard]] inline std::complex<double> cf_optimized(double z, const GammaParams& p) {
    return std::pow(std::complex<double>(1.0, -p.zeta * z), -p.shape);
}

// CF of the real part of an unaligned cross channel, scaled by the observing
// user's amplitude factor: (1 + scale^2 z^2 / 4)^(-L). Exact, not a CLT fit:
// the real part is a difference of two iid Erlang(L, 1/2) variables.
[[nodiscard]] inline double cf_cross_real(double z, int L, double scale) {
    const double t = scale * z;
    return std::exp(-static_cast<double>(L) * std::log1p(0.25 * t * t));
}

struct ChannelStats {
    std::vector<double> P_linear;
    std::vector<double> eta;
    std::vector<double> beta;
    std::vector<double> scale;
    std::vector<GammaParams> gamma;
};

[[nodiscard]] inline ChannelStats channel_stats(const SystemConfig& cfg) {
    validate(cfg);
    ChannelStats st;
    st.P_linear.reserve(cfg.L.size());
    for (int i = 0; i < cfg.K; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double P = std::pow(10.0, cfg.P_dB[u] / 10.0);
        const double eta = pathloss(cfg.d_user_ris[u], cfg.d_ris_bs, cfg.psi);
        const double beta = qam_scale(modulation_order(cfg.bits[u]));
        st.P_linear.push_back(P);
        st.eta.push_back(eta);
        st.beta.push_back(beta);
        st.gamma.push_back(gamma_params(cfg.L[u], P, eta, beta));
        st.scale.push_back(st.gamma.back().scale);
    }
    return st;
}

struct AlignmentError : std::runtime_error {
    double residual;
    explicit AlignmentError(double r)
        : std::runtime_error("channel alignment did not converge (residual " +
                             std::to_string(r) + ")"),
          residual(r) {}
};

namespace detail {

// Solve A x = b in place by Gaussian elimination with partial pivoting.
// K is tiny (user count), so no fancy factorization is warranted.
inline bool solve_dense(std::vector<double>& A, std::vector<double>& b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::fabs(A[static_cast<std::size_t>(col * n + col)]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::fabs(A[static_cast<std::size_t>(r * n + col)]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (!(best > 1e-300)) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(A[static_cast<std::size_t>(col * n + c)],
                          A[static_cast<std::size_t>(piv * n + c)]);
            std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
        }
        const double d = A[static_cast<std::size_t>(col * n + col)];
        for (int r = col + 1; r < n; ++r) {
            const double m = A[static_cast<std::size_t>(r * n + col)] / d;
            if (m == 0.0) continue;
            for (int c = col; c < n; ++c)
                A[static_cast<std::size_t>(r * n + c)] -= m * A[static_cast<std::size_t>(col * n + c)];
            b[static_cast<std::size_t>(r)] -= m * b[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double v = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c)
            v -= A[static_cast<std::size_t>(r * n + c)] * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(r)] = v / A[static_cast<std::size_t>(r * n + r)];
    }
    return true;
}

}  // namespace detail

using GammaMatrix = std::vector<std::vector<std::complex<double>>>;

// Residual rule used both for convergence and for the error payload:
// worst imaginary part relative to the worst real part of the rotated sums.
inline double alignment_residual(const GammaMatrix& gamma, const std::vector<double>& alpha) {
    const auto K = gamma.size();
    double worst_im = 0.0;
    double worst_re = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        std::complex<double> sum{0.0, 0.0};
        for (std::size_t j = 0; j < K; ++j)
            sum += gamma[i][j] * std::polar(1.0, alpha[j]);
        worst_im = std::max(worst_im, std::fabs(sum.imag()));
        worst_re = std::max(worst_re, std::fabs(sum.real()));
    }
    return worst_im / std::max(worst_re, 1e-300);
}

// Per-partition rotations alpha solving Im(sum_j gamma_ij e^{j alpha_j}) = 0
// for every user i. Damped Newton from alpha = 0; the Jacobian entry is
// Re(gamma_ij e^{j alpha_j}).
inline std::vector<double> align_channels(const GammaMatrix& gamma, double tol = 1e-10,
                                          int max_iter = 100) {
    const int K = static_cast<int>(gamma.size());
    std::vector<double> alpha(static_cast<std::size_t>(K), 0.0);
    std::vector<double> F(static_cast<std::size_t>(K));
    std::vector<double> J(static_cast<std::size_t>(K * K));
    auto eval = [&](const std::vector<double>& a, std::vector<double>& f) {
        double worst = 0.0;
        for (int i = 0; i < K; ++i) {
            std::complex<double> sum{0.0, 0.0};
            for (int j = 0; j < K; ++j)
                sum += gamma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                       std::polar(1.0, a[static_cast<std::size_t>(j)]);
            f[static_cast<std::size_t>(i)] = sum.imag();
            worst = std::max(worst, std::fabs(sum.imag()));
        }
        return worst;
    };
    double fnorm = eval(alpha, F);
    for (int iter = 0; iter < max_iter; ++iter) {
        if (alignment_residual(gamma, alpha) <= tol) return alpha;
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
                J[static_cast<std::size_t>(i * K + j)] =
                    (gamma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                     std::polar(1.0, alpha[static_cast<std::size_t>(j)]))
                        .real();
        std::vector<double> step = F;
        for (auto& v : step) v = -v;
        std::vector<double> Jcopy = J;
        if (!detail::solve_dense(Jcopy, step, K))
            throw AlignmentError(alignment_residual(gamma, alpha));
        double t = 1.0;
        bool accepted = false;
        std::vector<double> trial(static_cast<std::size_t>(K));
        std::vector<double> Ftrial(static_cast<std::size_t>(K));
        for (int halve = 0; halve <= 8; ++halve) {
            for (int j = 0; j < K; ++j)
                trial[static_cast<std::size_t>(j)] =
                    alpha[static_cast<std::size_t>(j)] + t * step[static_cast<std::size_t>(j)];
            const double ftrial = eval(trial, Ftrial);
            if (ftrial < fnorm || ftrial == 0.0) {
                alpha = trial;
                F = Ftrial;
                fnorm = ftrial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) throw AlignmentError(alignment_residual(gamma, alpha));
    }
    if (alignment_residual(gamma, alpha) <= tol) return alpha;
    throw AlignmentError(alignment_residual(gamma, alpha));
}

using AmpMatrix = std::vector<std::vector<double>>;

// Draws one realization of the K x K cascaded channel matrix. Buffers are
// reused across calls; one instance per worker thread.
//
// Draw order is part of the reproducibility contract: for each partition j,
// first the L_j surface-to-base coefficients g, then for each user i = 0..K-1
// the L_j user-to-surface coefficients h_ij.
class ChannelSampler {
  public:
    ChannelSampler(std::vector<int> L, std::vector<double> scale)
        : L_(std::move(L)), scale_(std::move(scale)) {
        int lmax = 0;
        for (int l : L_) lmax = std::max(lmax, l);
        g_.resize(static_cast<std::size_t>(lmax));
        h_.resize(L_.size(), std::vector<std::complex<double>>(static_cast<std::size_t>(lmax)));
    }

    // amp, when given, receives the unscaled phase-matched amplitude sums
    // amp[i][j] = sum_l |h_ij,l| |g_j,l|: the gain user i would get if
    // partition j were steered for them. Costs no extra random draws.
    void sample(Rng& rng, GammaMatrix& out, AmpMatrix* amp = nullptr) const {
        const auto K = L_.size();
        out.assign(K, std::vector<std::complex<double>>(K, {0.0, 0.0}));
        if (amp) amp->assign(K, std::vector<double>(K, 0.0));
        for (std::size_t j = 0; j < K; ++j) {
            const auto Lj = static_cast<std::size_t>(L_[j]);
            for (std::size_t l = 0; l < Lj; ++l) g_[l] = rng.cgaussian();
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t l = 0; l < Lj; ++l) h_[i][l] = rng.cgaussian();
            double diag = 0.0;
            for (std::size_t l = 0; l < Lj; ++l) {
                const double gm = std::abs(g_[l]);
                const double hm = std::abs(h_[j][l]);
                diag += gm * hm;
                // Phase of partition j is set against its own user's channel,
                // so what other users see is g magnitude times the conjugate
                // unit phase of h_jj.
                const std::complex<double> u =
                    hm > 0.0 ? std::complex<double>(gm * h_[j][l].real() / hm,
                                                    -gm * h_[j][l].imag() / hm)
                             : std::complex<double>(gm, 0.0);
                for (std::size_t i = 0; i < K; ++i) {
                    if (i == j) continue;
                    out[i][j] += h_[i][l] * u;
                    if (amp) (*amp)[i][j] += std::abs(h_[i][l]) * gm;
                }
            }
            out[j][j] = {diag, 0.0};
            if (amp) (*amp)[j][j] = diag;
            for (std::size_t i = 0; i < K; ++i)
                out[i][j] *= scale_[i];
        }
    }

  private:
    std::vector<int> L_;
    std::vector<double> scale_;
    mutable std::vector<std::complex<double>> g_;
    mutable std::vector<std::vector<std::complex<double>>> h_;
};

struct ChannelRealization {
    GammaMatrix gamma;
    std::vector<double> alpha;
    std::vector<double> h_eff;
    double residual{0.0};
};

// h_i approximated with unit rotations, used by the closed-form model.
[[nodiscard]] inline std::vector<double> approx_h_eff(const GammaMatrix& gamma) {
    const auto K = gamma.size();
    std::vector<double> h(K, 0.0);
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) h[i] += gamma[i][j].real();
    return h;
}

[[nodiscard]] inline std::vector<double> exact_h_eff(const GammaMatrix& gamma,
                                                     const std::vector<double>& alpha) {
    const auto K = gamma.size();
    std::vector<double> h(K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        std::complex<double> sum{0.0, 0.0};
        for (std::size_t j = 0; j < K; ++j)
            sum += gamma[i][j] * std::polar(1.0, alpha[j]);
        h[i] = sum.real();
    }
    return h;
}

[[nodiscard]] inline ChannelRealization sample_realization(const SystemConfig& cfg, Rng& rng) {
    const ChannelStats st = channel_stats(cfg);
    ChannelSampler sampler(cfg.L, st.scale);
    ChannelRealization r;
    sampler.sample(rng, r.gamma);
    r.alpha = align_channels(r.gamma);
    r.h_eff = exact_h_eff(r.gamma, r.alpha);
    r.residual = alignment_residual(r.gamma, r.alpha);
    return r;
}

}  // namespace risnoma
