#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "risnoma/pa_optimizer.hpp"

using namespace risnoma;

namespace {

SystemConfig two_user_cfg() {
    SystemConfig c;
    c.K = 2;
    c.L = {70, 70};
    c.bits = {4, 2};
    c.d_user_ris = {20.0, 70.0};
    c.d_ris_bs = 30.0;
    c.psi = 2.2;
    c.sigma_n2 = 1.0;
    c.P_dB = {60.0, 60.0};
    return c;
}

SystemConfig three_user_cfg() {
    SystemConfig c;
    c.K = 3;
    c.L = {16, 16, 16};
    c.bits = {2, 2, 2};
    c.d_user_ris = {10.0, 20.0, 30.0};
    c.d_ris_bs = 30.0;
    c.psi = 2.2;
    c.sigma_n2 = 1.0;
    c.P_dB = {70.0, 70.0, 70.0};
    return c;
}

}  // namespace

TEST_CASE("power cost: limits, routes, order sensitivity", "[pa]") {
    const SystemConfig c = two_user_cfg();
    const auto exprs = extract_ber_terms(c.bits);
    const auto f = [&](double a, double b) { return sum_ber_cost_dB(c, exprs, {a, b}); };

    SECTION("noise-dominated limit is half a bit error per user") {
        // sum of K per-user BERs of 1/2 is K/2; in dB that is 10 log10(K/2).
        CHECK(std::fabs(f(-50.0, -50.0) - 10.0 * std::log10(c.K / 2.0)) < 5e-3);
    }

    SECTION("cost agrees with the per-user BER evaluator") {
        SystemConfig at = c;
        at.P_dB = {57.0, 52.0};
        const auto ber = analytic_ber(at);
        const double direct = 10.0 * std::log10(ber[0] + ber[1]);
        CHECK(f(57.0, 52.0) == Catch::Approx(direct).epsilon(1e-12));
        CHECK(power_cost_dB(c, {57.0, 52.0}) == Catch::Approx(direct).epsilon(1e-12));
    }

    SECTION("landscape is not monotone in a single power") {
        // Raising the second power past the balance point trades the second
        // user's own-signal gain against the first user's interference and
        // loses; that trade is what the optimizer exists to settle.
        CHECK(f(60.0, 55.5) < f(60.0, 56.0));
        CHECK(f(40.5, 50.0) < f(41.0, 50.0));
    }

    SECTION("decode order makes the cost positional") {
        // Identical users, swapped powers: the first position is detected
        // first under the other's interference, so the swap is a different
        // receiver strategy, not a relabeling.
        SystemConfig s = c;
        s.bits = {2, 2};
        s.L = {40, 40};
        s.d_user_ris = {30.0, 30.0};
        const auto se = extract_ber_terms(s.bits);
        const double ab = sum_ber_cost_dB(s, se, {35.0, 32.0});
        const double ba = sum_ber_cost_dB(s, se, {32.0, 35.0});
        CHECK(std::fabs(ab - ba) > 1e-3);
    }
}

TEST_CASE("single user pins to the cap", "[pa]") {
    SystemConfig c;
    c.K = 1;
    c.L = {64};
    c.bits = {4};
    c.d_user_ris = {20.0};
    c.d_ris_bs = 30.0;
    c.psi = 2.2;
    c.sigma_n2 = 1.0;
    c.P_dB = {40.0};

    PaOptions o;
    o.p_max_dB = 40.0;
    const PaResult r = optimize_power(c, o);
    REQUIRE(r.p_dB.size() == 1);
    CHECK(r.p_dB[0] == 40.0);
    CHECK(r.converged);
    CHECK(r.ber.size() == 1);
    CHECK(r.cost_dB == Catch::Approx(10.0 * std::log10(r.ber[0])).epsilon(1e-12));

    std::ostringstream os;
    write_pa_trace_csv(r, os);
    const std::string csv = os.str();
    CHECK(csv.rfind("iteration,p1_dB,cost_dB,max_violation_dB\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(r.trace.size()) + 1);
}

TEST_CASE("two users: optimum beats seeds and the local grid", "[pa]") {
    const SystemConfig c = two_user_cfg();
    const auto exprs = extract_ber_terms(c.bits);
    const auto f = [&](double a, double b) { return sum_ber_cost_dB(c, exprs, {a, b}); };

    PaOptions o;
    o.p_max_dB = 60.0;
    const PaResult r = optimize_power(c, o);

    REQUIRE(r.p_dB.size() == 2);
    for (const double v : r.p_dB) {
        CHECK(v <= o.p_max_dB + 1e-9);
        CHECK(v >= o.p_floor_dB - 1e-9);
    }
    CHECK(r.converged);
    CHECK(r.outer_iters == static_cast<int>(r.trace.size()));
    for (std::size_t i = 0; i < r.trace.size(); ++i)
        CHECK(r.trace[i].outer == static_cast<int>(i));

    // Never worse than its own starting points.
    CHECK(r.cost_dB <= f(60.0, 60.0) + 1e-12);
    CHECK(r.cost_dB <= f(60.0, 55.0) + 1e-12);
    // The equal-power allocation sits on the interference floor; the optimum
    // is far below it.
    CHECK(r.cost_dB < f(60.0, 60.0) - 10.0);

    // 0.5 dB mesh over the basin that holds the optimum.
    double grid_best = 1e300;
    for (double p1 = 59.0; p1 <= 60.01; p1 += 0.5)
        for (double p2 = 54.0; p2 <= 57.01; p2 += 0.5)
            grid_best = std::min(grid_best, f(p1, p2));
    CHECK(r.cost_dB <= grid_best + 0.05);

    // Regression pins for the known optimum of this configuration.
    CHECK(r.p_dB[0] == Catch::Approx(60.0).margin(1e-9));
    CHECK(r.p_dB[1] == Catch::Approx(55.40).margin(0.15));
    CHECK(r.cost_dB == Catch::Approx(-44.1023).margin(0.02));
    REQUIRE(r.ber.size() == 2);
    CHECK(r.ber[0] == Catch::Approx(6.881e-6).epsilon(0.02));
    CHECK(r.ber[1] == Catch::Approx(3.200e-5).epsilon(0.02));

    SystemConfig at = c;
    at.P_dB = r.p_dB;
    const auto direct = analytic_ber(at);
    CHECK(r.ber[0] == Catch::Approx(direct[0]).epsilon(1e-12));
    CHECK(r.ber[1] == Catch::Approx(direct[1]).epsilon(1e-12));

    SECTION("deterministic under repetition") {
        const PaResult r2 = optimize_power(c, o);
        REQUIRE(r2.p_dB.size() == r.p_dB.size());
        CHECK(r2.p_dB[0] == r.p_dB[0]);
        CHECK(r2.p_dB[1] == r.p_dB[1]);
        CHECK(r2.cost_dB == r.cost_dB);
        CHECK(r2.outer_iters == r.outer_iters);
    }

    SECTION("custom start converges into the same basin") {
        PaOptions o2 = o;
        o2.p0_dB = {58.0, 54.0};
        const PaResult rs = optimize_power(c, o2);
        CHECK(rs.cost_dB == Catch::Approx(r.cost_dB).margin(0.02));
    }

    SECTION("zero initial multipliers degenerate to projected Newton") {
        PaOptions o2 = o;
        o2.xi0 = 0.0;
        const PaResult rz = optimize_power(c, o2);
        CHECK(rz.cost_dB <= -44.05);
        for (const double v : rz.p_dB) CHECK(v <= o.p_max_dB + 1e-9);
    }

    SECTION("option validation") {
        PaOptions bad = o;
        bad.p0_dB = {60.0};
        CHECK_THROWS_AS(optimize_power(c, bad), std::invalid_argument);
        PaOptions neg = o;
        neg.xi0 = -1.0;
        CHECK_THROWS_AS(optimize_power(c, neg), std::invalid_argument);
    }
}

TEST_CASE("three users: optimum matches grid search", "[pa]") {
    const SystemConfig c = three_user_cfg();
    const auto exprs = extract_ber_terms(c.bits);
    const auto f = [&](const std::vector<double>& p) { return sum_ber_cost_dB(c, exprs, p); };

    PaOptions o;
    o.p_max_dB = 70.0;
    const PaResult r = optimize_power(c, o);
    REQUIRE(r.p_dB.size() == 3);
    CHECK(r.converged);
    for (const double v : r.p_dB) CHECK(v <= o.p_max_dB + 1e-9);

    // Coarse sweep of the whole box.
    double coarse_best = 1e300;
    std::vector<double> coarse_p(3);
    for (double a = 50.0; a <= 70.01; a += 2.0)
        for (double b = 50.0; b <= 70.01; b += 2.0)
            for (double g = 50.0; g <= 70.01; g += 2.0) {
                const double v = f({a, b, g});
                if (v < coarse_best) {
                    coarse_best = v;
                    coarse_p = {a, b, g};
                }
            }
    CHECK(r.cost_dB <= coarse_best + 0.05);

    // 0.5 dB mesh around the returned point: the optimizer should sit within
    // half a mesh cell of the local grid minimum.
    double fine_best = 1e300;
    std::vector<double> fine_p(3);
    for (double a = -1.5; a <= 1.51; a += 0.5)
        for (double b = -1.5; b <= 1.51; b += 0.5)
            for (double g = -1.5; g <= 1.51; g += 0.5) {
                std::vector<double> q = {r.p_dB[0] + a, r.p_dB[1] + b, r.p_dB[2] + g};
                for (double& x : q) x = std::min(x, o.p_max_dB);
                const double v = f(q);
                if (v < fine_best) {
                    fine_best = v;
                    fine_p = q;
                }
            }
    CHECK(r.cost_dB <= fine_best + 0.05);
    for (int k = 0; k < 3; ++k)
        CHECK(std::fabs(r.p_dB[static_cast<std::size_t>(k)] -
                        fine_p[static_cast<std::size_t>(k)]) <= 0.5 + 1e-9);

    // Regression pins for this instance.
    CHECK(r.p_dB[0] == Catch::Approx(70.0).margin(1e-9));
    CHECK(r.p_dB[1] == Catch::Approx(64.37).margin(0.25));
    CHECK(r.p_dB[2] == Catch::Approx(55.89).margin(0.25));
    CHECK(r.cost_dB == Catch::Approx(-11.7944).margin(0.02));
}
