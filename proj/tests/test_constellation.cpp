#include <catch2/catch_amalgamated.hpp>

#include "risnoma/constellation.hpp"

using namespace risnoma;

TEST_CASE("canonical weights tile the combined constellation") {
    CHECK(canonical_weights({4, 2}) == std::vector<double>{2, 1});
    CHECK(canonical_weights({4, 4}) == std::vector<double>{4, 1});
    CHECK(canonical_weights({2, 2, 2}) == std::vector<double>{4, 2, 1});
    CHECK(canonical_weights({6, 4}) == std::vector<double>{4, 1});
    CHECK(canonical_rho({4, 2}) == std::vector<double>{4, 1});
    for (const auto& bits :
         std::vector<std::vector<int>>{{2, 2}, {4, 2}, {4, 4}, {2, 2, 2}, {4, 2, 2}, {6, 2}}) {
        const auto spec = build_superimposed(bits, canonical_weights(bits));
        const int n = static_cast<int>(spec.levels.size());
        for (int i = 0; i < n; ++i)
            CHECK(spec.levels[static_cast<std::size_t>(i)].value ==
                  static_cast<double>(2 * i - (n - 1)));
    }
}

TEST_CASE("two-user 16/4 superposition at reference weights") {
    const auto spec = build_superimposed({4, 2}, {2.0, 1.0});
    REQUIRE(spec.levels.size() == 8);
    const std::vector<double> want = {-7, -5, -3, -1, 1, 3, 5, 7};
    for (std::size_t i = 0; i < 8; ++i) CHECK(spec.levels[i].value == want[i]);
    const std::vector<double> th = {-6, -4, -2, 0, 2, 4, 6};
    REQUIRE(spec.thresholds.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(spec.thresholds[i] == th[i]);
    // Threshold rows reduce to multiples of the stronger user's channel.
    const std::vector<std::vector<int>> rows = {{-3, 0}, {-2, 0}, {-1, 0}, {0, 0},
                                                {1, 0},  {2, 0},  {3, 0}};
    CHECK(spec.threshold_s == rows);
    // The weaker user's label alternates column by column.
    for (std::size_t i = 0; i + 1 < 8; ++i)
        CHECK(spec.levels[i].sub[1] != spec.levels[i + 1].sub[1]);
}

TEST_CASE("gray labels differ in one bit between adjacent levels") {
    for (int bits : {2, 4, 6, 8, 10}) {
        const auto spec = build_superimposed({bits}, {1.0});
        for (std::size_t i = 0; i + 1 < spec.levels.size(); ++i) {
            const auto x = spec.levels[i].sub[0] ^ spec.levels[i + 1].sub[0];
            CHECK((x & (x - 1)) == 0);
            CHECK(x != 0);
        }
    }
}

TEST_CASE("coinciding levels are rejected") {
    CHECK_THROWS_AS(build_superimposed({2, 2}, {1.0, 1.0}), DegenerateConstellationError);
    CHECK_THROWS_AS(build_superimposed({4, 2}, {1.0, 0.0}), DegenerateConstellationError);
}

TEST_CASE("bad bit widths are rejected") {
    CHECK_THROWS_AS(build_superimposed({3, 2}, {2.0, 1.0}), InvalidModulationError);
    CHECK_THROWS_AS(build_superimposed({0}, {1.0}), InvalidModulationError);
    CHECK_THROWS_AS(canonical_weights({4, 5}), InvalidModulationError);
}

TEST_CASE("detection quantizes to the nearest level, ties to the lower cell") {
    const auto spec = build_superimposed({4, 2}, {2.0, 1.0});
    CHECK(detect_level(spec, -100.0) == 0);
    CHECK(detect_level(spec, 100.0) == 7);
    CHECK(detect_level(spec, 0.9) == 4);
    CHECK(detect_level(spec, 1.9) == 4);
    CHECK(detect_level(spec, 2.1) == 5);
    // Exactly on a threshold: lower cell wins.
    CHECK(detect_level(spec, 0.0) == 3);
    CHECK(detect_level(spec, 2.0) == 4);
    CHECK(detect_level(spec, -6.0) == 0);
    // Noiseless round trip for every level.
    for (std::size_t i = 0; i < spec.levels.size(); ++i)
        CHECK(detect_level(spec, spec.levels[i].value) == static_cast<int>(i));
}
