#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "oracle_helpers.hpp"
#include "risnoma/ber_analytic.hpp"
#include "risnoma/rng.hpp"

using namespace risnoma;

namespace {

// Alternate inversion route: cumulative probability of X - sigma*G at zero,
// evaluated with a tangent substitution and composite Simpson on a uniform
// grid. The characteristic function is evaluated through complex pow, not
// the log-magnitude route used by the library.
double gil_pelaez_oracle(const TermCF& cf, double sigma) {
    const auto phi = [&](double t) {
        std::complex<double> p(1.0, 0.0);
        for (const auto& [theta, n] : cf.gamma_factors)
            p *= std::pow(std::complex<double>(1.0, -theta * t), -n);
        for (const auto& [kappa, l] : cf.erlang_factors)
            p *= std::pow(std::complex<double>(1.0 + 0.25 * kappa * t * t, 0.0), -l);
        return p;
    };
    const double mean = cf_mean(cf);
    const auto g = [&](double u) {
        const double t = std::tan(u);
        const double jac = 1.0 + t * t;
        if (t <= 0.0) return mean;
        const double damp = std::exp(-0.5 * sigma * sigma * t * t);
        if (damp == 0.0 || !std::isfinite(jac)) return 0.0;
        return damp * phi(t).imag() / t * jac;
    };
    const int n = 1 << 18;
    const double h = (kPi / 2) / n;
    double acc = g(0.0) + g(kPi / 2);
    for (int i = 1; i < n; ++i) acc += g(i * h) * (i % 2 ? 4.0 : 2.0);
    const double integral = acc * h / 3.0;
    return 0.5 - integral / kPi;
}

TermCF random_cf(Rng& rng) {
    TermCF cf;
    const int ng = 1 + static_cast<int>(rng.below(3));
    double spread = 0.0;
    for (int i = 0; i < ng; ++i) {
        const double mag = 0.2 + 0.8 * rng.u01();
        const double n = 30.0 + 120.0 * rng.u01();
        const double theta = rng.u01() < 0.3 ? -mag : mag;
        cf.gamma_factors.emplace_back(theta, n);
        spread += mag * n;
    }
    const int ne = static_cast<int>(rng.below(3));
    const double sigma_guess = 0.2 * spread;
    for (int i = 0; i < ne; ++i) {
        const double l = 30.0 + 40.0 * rng.u01();
        const double kappa = rng.u01() * 2.0 * sigma_guess * sigma_guess / l;
        cf.erlang_factors.emplace_back(kappa, l);
    }
    return cf;
}

SystemConfig desk_config(double p_dB) {
    SystemConfig cfg;
    cfg.K = 2;
    cfg.L = {70, 70};
    cfg.bits = {4, 2};
    cfg.d_user_ris = {20.0, 70.0};
    cfg.d_ris_bs = 30.0;
    cfg.psi = 2.2;
    cfg.P_dB = {p_dB, p_dB};
    return cfg;
}

}  // namespace

TEST_CASE("point mass characteristic function recovers the Q function") {
    const auto pm = [](double mu) {
        return [mu](double z) { return std::exp(std::complex<double>(0.0, mu * z)); };
    };
    CHECK(std::abs(expected_q_from_cf(pm(30.0), 30.0, 20.0) - 0.066807201268858066) < 1e-12);
    CHECK(std::abs(expected_q_from_cf(pm(15.0), 15.0, 20.0) - 0.2266273523768682) < 1e-12);
    CHECK(std::abs(expected_q_from_cf(pm(-15.0), -15.0, 20.0) - (1.0 - 0.2266273523768682)) <
          1e-12);
    CHECK(expected_q_from_cf(pm(0.0), 0.0, 5.0) == 0.5);
}

TEST_CASE("symmetric laws give exactly one half") {
    TermCF cf;
    cf.erlang_factors = {{0.3, 40.0}, {1.1, 55.0}};
    CHECK(expected_q(cf, 2.0) == 0.5);
    CHECK(expected_q(TermCF{}, 1.0) == 0.5);
    CHECK_THROWS_AS(expected_q(cf, 0.0), std::domain_error);
}

TEST_CASE("frozen gamma fading reference value") {
    TermCF cf;
    cf.gamma_factors = {{0.488, 161.0}};
    CHECK(std::abs(expected_q(cf, 20.0) - 8.4563941740377185e-5) < 1e-11);
}

TEST_CASE("frozen two-user desk-scale term value") {
    const double s1 = 0.027799284910877263;
    const double s2 = 0.015669090104613529;
    const double zu = 0.48784138133771438;
    const double n70 = 112.69620319429658;
    TermCF cf;
    cf.gamma_factors = {{s1 * zu, n70}, {-s2 * zu, n70}};
    cf.erlang_factors = {{s2 * s2, 70.0}, {s1 * s1, 70.0}};
    CHECK(std::abs(expected_q(cf, 1.0) - 0.25887891660971144) < 1e-10);
}

TEST_CASE("term CF assembly routes factors by row support") {
    const auto cfg = desk_config(40.0);
    const auto st = channel_stats(cfg);
    CHECK(std::abs(st.scale[0] - 0.027799284910877263) < 1e-15);
    CHECK(std::abs(st.scale[1] - 0.015669090104613529) < 1e-15);

    const auto both = assemble_cf({1, -1}, st, cfg.L);
    REQUIRE(both.gamma_factors.size() == 2);
    REQUIRE(both.erlang_factors.size() == 2);
    CHECK(both.gamma_factors[0].first > 0.0);
    CHECK(both.gamma_factors[1].first < 0.0);
    CHECK(std::abs(both.gamma_factors[0].second - 112.69620319429658) < 1e-10);
    CHECK(std::abs(both.erlang_factors[0].first - st.scale[1] * st.scale[1]) < 1e-20);
    CHECK(std::abs(both.erlang_factors[1].first - st.scale[0] * st.scale[0]) < 1e-20);

    // A row touching only user 1 leaves just the foreign-partition residual.
    const auto solo = assemble_cf({3, 0}, st, cfg.L);
    REQUIRE(solo.gamma_factors.size() == 1);
    CHECK(std::abs(solo.gamma_factors[0].first - 3.0 * st.gamma[0].zeta) < 1e-18);
    REQUIRE(solo.erlang_factors.size() == 1);
    CHECK(std::abs(solo.erlang_factors[0].first - 9.0 * st.scale[0] * st.scale[0]) < 1e-20);

    CHECK_THROWS_AS(assemble_cf({1}, st, cfg.L), std::invalid_argument);
}

TEST_CASE("characteristic function obeys the basic envelope") {
    auto rng = Rng::derive(20240611, 11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto cf = random_cf(rng);
        CHECK(eval_cf(cf, 0.0) == std::complex<double>(1.0, 0.0));
        for (double z : {0.01, 0.3, 1.7, 12.0, 400.0}) {
            CHECK(std::abs(eval_cf(cf, z)) <= 1.0 + 1e-14);
            const auto plus = eval_cf(cf, z);
            const auto minus = eval_cf(cf, -z);
            CHECK(std::abs(plus - std::conj(minus)) < 1e-14 * (1.0 + std::abs(plus)));
        }
    }
}

TEST_CASE("inversion agrees with the tangent-substitution route") {
    auto rng = Rng::derive(20240611, 13);
    for (int rep = 0; rep < 10; ++rep) {
        auto cf = random_cf(rng);
        double spread = 0.0;
        for (const auto& [theta, n] : cf.gamma_factors) spread += std::abs(theta) * n;
        const double sigma = (0.2 + 0.8 * rng.u01()) * spread;
        CAPTURE(rep, sigma);
        const double lib = expected_q(cf, sigma);
        const double ref = gil_pelaez_oracle(cf, sigma);
        CHECK(std::abs(lib - ref) < 1e-10);
    }
}

TEST_CASE("gamma moment match tracks sampled reflector sums") {
    // True law: sum of 40 amplitude products. The analytic value uses the
    // matched Gamma, so agreement is approximate; the band covers the
    // sampling error plus the small residual shape mismatch.
    const auto p = gamma_params(40, 1.0, 1.0, 1.0);
    TermCF cf;
    cf.gamma_factors = {{p.zeta, p.shape}};
    const double sigma = 12.0;
    const double analytic = expected_q(cf, sigma);

    auto rng = Rng::derive(20240611, 17);
    oracle::MomentAccumulator acc;
    for (int i = 0; i < 200000; ++i) acc.add(oracle::qref(oracle::product_sum(40, rng) / sigma));
    const double band = 4.0 * acc.mean_stderr() + 0.02 * analytic;
    CAPTURE(analytic, acc.mean(), acc.mean_stderr());
    CHECK(std::abs(analytic - acc.mean()) < band);
}

TEST_CASE("desk-scale average BER falls with power and hits an error floor") {
    std::vector<std::vector<double>> ber;
    for (double p : {20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0})
        ber.push_back(analytic_ber(desk_config(p)));
    for (const auto& row : ber) {
        REQUIRE(row.size() == 2);
        for (double b : row) {
            CHECK(b > 0.0);
            CHECK(b < 0.5);
        }
    }
    for (std::size_t i = 0; i + 1 < ber.size(); ++i) {
        CHECK(ber[i + 1][0] <= ber[i][0] * (1.0 + 1e-9));
        CHECK(ber[i + 1][1] <= ber[i][1] * (1.0 + 1e-9));
    }
    // Interference-limited: past 70 dB extra power barely moves the BER and
    // the floors sit in the low 1e-3 range, the weak user's twice as high.
    CHECK(ber.back()[0] > 0.9 * ber[5][0]);
    CHECK(ber.back()[1] > 0.9 * ber[5][1]);
    CHECK(ber.back()[0] > 1e-3);
    CHECK(ber.back()[0] < 2e-3);
    CHECK(ber.back()[1] > 2e-3);
    CHECK(ber.back()[1] < 4e-3);
    CHECK(std::abs(ber.back()[1] / ber.back()[0] - 2.0) < 0.1);
}
