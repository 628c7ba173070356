#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace risnoma {

struct IntegrationError : std::runtime_error {
    double achieved;
    IntegrationError(const std::string& msg, double err)
        : std::runtime_error(msg + " (achieved abs error " + std::to_string(err) + ")"),
          achieved(err) {}
};

struct QuadResult {
    double value{0.0};
    double abs_error{0.0};
    int evaluations{0};
};

namespace detail {

// 15-point Kronrod nodes/weights with embedded 7-point Gauss rule on [-1, 1].
inline constexpr std::array<double, 8> kGkNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodW = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussW = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<double, double> gk15(F& f, double a, double b) {
    const double h = 0.5 * (b - a);
    const double c = 0.5 * (a + b);
    const double fc = f(c);
    double kronrod = kKronrodW[7] * fc;
    double gauss = kGaussW[3] * fc;
    for (std::size_t i = 0; i < 7; ++i) {
        const double x = h * kGkNodes[i];
        const double v = f(c - x) + f(c + x);
        kronrod += kKronrodW[i] * v;
        if (i % 2 == 1) gauss += kGaussW[i / 2] * v;
    }
    kronrod *= h;
    gauss *= h;
    return {kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration to an absolute tolerance over
// a pre-partitioned range. Splits the worst interval first; deterministic for
// a given integrand. The seed partition matters for oscillatory integrands:
// an interval holding many whole oscillations can alias to a tiny error
// estimate and never get refined, so callers with known phase content must
// pass breakpoints dense enough that no seed interval hides a full period.
template <class F>
QuadResult integrate_gk15_segmented(F&& f, const std::vector<double>& breaks, double abs_tol,
                                    int max_intervals = 4096) {
    if (breaks.size() < 2) throw std::invalid_argument("integrate: need at least one interval");
    struct Piece {
        double err, a, b, value;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    QuadResult res;
    std::priority_queue<Piece> heap;
    double total_val = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        auto [v, e] = detail::gk15(f, breaks[i], breaks[i + 1]);
        res.evaluations += 15;
        heap.push({e, breaks[i], breaks[i + 1], v});
        total_val += v;
        total_err += e;
    }
    int pieces = static_cast<int>(breaks.size()) - 1;
    while (total_err > abs_tol && pieces < max_intervals) {
        const Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto [vl, el] = detail::gk15(f, worst.a, mid);
        auto [vr, er] = detail::gk15(f, mid, worst.b);
        res.evaluations += 30;
        total_val += vl + vr - worst.value;
        total_err += el + er - worst.err;
        heap.push({el, worst.a, mid, vl});
        heap.push({er, mid, worst.b, vr});
        ++pieces;
        // Floating cancellation can leave a stale error sum; rebuild it when
        // it goes non-finite or negative.
        if (!std::isfinite(total_err) || total_err < 0.0) {
            total_err = 0.0;
            total_val = 0.0;
            std::priority_queue<Piece> copy = heap;
            while (!copy.empty()) {
                total_err += copy.top().err;
                total_val += copy.top().value;
                copy.pop();
            }
        }
    }
    res.value = total_val;
    res.abs_error = total_err;
    if (total_err > abs_tol * 4.0) {
        throw IntegrationError("adaptive Gauss-Kronrod did not reach tolerance", total_err);
    }
    return res;
}

template <class F>
QuadResult integrate_gk15(F&& f, double a, double b, double abs_tol, int max_intervals = 4096) {
    return integrate_gk15_segmented(std::forward<F>(f), std::vector<double>{a, b}, abs_tol,
                                    max_intervals);
}

}  // namespace risnoma
