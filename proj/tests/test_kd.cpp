#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "spikeforest/kd.hpp"
#include "spikeforest/rng.hpp"
#include "test_helpers.hpp"

using namespace spikeforest;
using spikeforest::testing::make_1d;

TEST_CASE("full refinement of eight equally spaced points") {
    std::vector<double> xs(8);
    for (int i = 0; i < 8; ++i) xs[i] = (i + 0.5) / 8.0;
    auto data = make_1d(xs);
    auto kd = build_kd_tree(data, std::vector<int>{0}, 3);
    auto stats = cell_measures(kd, data);
    REQUIRE(stats.counts.size() == 8);
    for (int c : stats.counts) CHECK(c == 1);
    CHECK(kd.is_full_symmetric());
    CHECK(is_valid(kd, data, 1));
}

TEST_CASE("lower and upper median counts when n is not a power of two") {
    Rng rng(15);
    for (int n : {5, 9, 11, 23}) {
        std::vector<double> xs(n);
        for (auto& v : xs) v = rng.uniform();
        auto data = make_1d(xs);
        auto kd = build_kd_tree(data, std::vector<int>{0}, 1);
        auto stats = cell_measures(kd, data);
        REQUIRE(stats.counts.size() == 2);
        CHECK(stats.counts[0] == n / 2);
        CHECK(stats.counts[1] == (n + 1) / 2);
    }
}

TEST_CASE("leaf counts stay within the balanced bounds") {
    Rng rng(33);
    for (int n : {37, 100, 250}) {
        std::vector<double> xs(2 * n);
        for (auto& v : xs) v = rng.uniform();
        Dataset data(std::move(xs), std::vector<double>(n, 0.0), n, 2);
        for (int s = 1; s <= 3; ++s) {
            const int K = 1 << (2 * s);
            if (n < K) break;
            auto kd = build_kd_tree(data, std::vector<int>{0, 1}, s);
            auto stats = cell_measures(kd, data);
            REQUIRE(static_cast<int>(stats.counts.size()) == K);
            for (int c : stats.counts) {
                CHECK(c >= n / K);
                CHECK(c <= (n + K - 1) / K);
            }
            CHECK(is_valid(kd, data, 1));
        }
    }
}

TEST_CASE("sixteen grid points in two dimensions split into four quadrants") {
    std::vector<double> flat;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            flat.push_back((a + 0.5) / 4.0);
            flat.push_back((b + 0.5) / 4.0);
        }
    Dataset data(std::move(flat), std::vector<double>(16, 0.0), 16, 2);
    auto kd = build_kd_tree(data, std::vector<int>{0, 1}, 1);
    auto stats = cell_measures(kd, data);
    REQUIRE(stats.counts.size() == 4);
    for (int c : stats.counts) CHECK(c == 4);
}

TEST_CASE("insufficient points are rejected") {
    auto data = make_1d({0.1, 0.5, 0.9});
    CHECK_THROWS_AS(build_kd_tree(data, std::vector<int>{0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(build_kd_tree(data, std::vector<int>{}, 1), std::invalid_argument);
}

TEST_CASE("regularity of benign and adversarial designs") {
    SUBCASE("uniform grid is regular for modest M") {
        std::vector<double> xs(64);
        for (int i = 0; i < 64; ++i) xs[i] = (i + 0.5) / 64.0;
        auto data = make_1d(xs);
        CHECK(regularity_check(data, std::vector<int>{0}, 2.5, 5));
    }

    SUBCASE("an isolated cluster breaks regularity for small M") {
        // half the points crammed into a tiny interval, half spread out
        std::vector<double> xs;
        for (int i = 0; i < 32; ++i) xs.push_back(1e-6 * (i + 1));
        for (int i = 0; i < 32; ++i) xs.push_back(0.5 + 0.5 * (i + 0.5) / 32.0);
        auto data = make_1d(xs);
        CHECK_FALSE(regularity_check(data, std::vector<int>{0}, 1.2, 3));
    }

    SUBCASE("identical points are vacuously regular") {
        std::vector<double> flat;
        for (int i = 0; i < 8; ++i) {
            flat.push_back(0.5);                 // constant active coordinate
            flat.push_back((i + 0.5) / 8.0);     // varying inactive coordinate
        }
        Dataset data(std::move(flat), std::vector<double>(8, 0.0), 8, 2);
        CHECK(regularity_check(data, std::vector<int>{0}, 0.5, 3));
    }
}
