#include <doctest.h>

#include <stdexcept>

#include "spikeforest/combinatorics.hpp"
#include "spikeforest/rng.hpp"
#include "test_helpers.hpp"

using namespace spikeforest;
using spikeforest::testing::make_1d;
using spikeforest::testing::make_2d;

TEST_CASE("partitioning number closed form") {
    CHECK(partitioning_number(5, 3, 1) == 1);
    CHECK(partitioning_number(3, 1, 2) == 3);   // 1 * 3!/2!
    CHECK(partitioning_number(3, 2, 2) == 6);   // 2 * 3
    CHECK(partitioning_number(10, 2, 5) == BigInt(16) * (10 * 9 * 8 * 7));
    CHECK_THROWS_AS(partitioning_number(3, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS(partitioning_number(3, 1, 0), std::invalid_argument);
}

TEST_CASE("recursion Delta(K) = Delta(K-1) * (n-K+2) * q for all small arguments") {
    for (int n = 1; n <= 12; ++n)
        for (int q = 1; q <= 4; ++q)
            for (int K = 2; K <= n; ++K)
                CHECK(partitioning_number(n, q, K) ==
                      partitioning_number(n, q, K - 1) * (n - K + 2) * q);
}

TEST_CASE("log partitioning number matches the exact value") {
    for (int n : {3, 6, 10})
        for (int q : {1, 2})
            for (int K = 1; K <= n; ++K) {
                const double exact =
                    static_cast<double>(partitioning_number(n, q, K).convert_to<double>());
                CHECK(log_partitioning_number(n, q, K) ==
                      doctest::Approx(std::log(exact)).epsilon(1e-10));
            }
}

TEST_CASE("enumeration of three collinear points") {
    auto data = make_1d({0.2, 0.5, 0.8});
    std::vector<int> subset = {0};
    auto parts = enumerate_valid_trees(data, subset, 2, 1);
    REQUIRE(parts.size() == 2);  // {0} | {1,2} and {0,1} | {2}
    CHECK(parts[0].object_count == 1);
    CHECK(parts[1].object_count == 1);

    // K = 1 with an empty subset: exactly the trivial partition
    auto trivial = enumerate_valid_trees(data, std::vector<int>{}, 1, 1);
    REQUIRE(trivial.size() == 1);
    CHECK(trivial[0].signature == std::vector<std::vector<int>>{{0, 1, 2}});

    // three singleton cells arise from two distinct tree objects
    auto fine = enumerate_valid_trees(data, subset, 3, 1);
    REQUIRE(fine.size() == 1);
    CHECK(fine[0].object_count == 2);
    CHECK(std::exp(fine[0].log_sequence_multiplicity) == doctest::Approx(2.0));
}

TEST_CASE("distinct partition counts never exceed the partitioning number") {
    Rng rng(19);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(3));  // 4..6
        const int p = 1 + static_cast<int>(rng.uniform_int(2));
        std::vector<double> flat(static_cast<std::size_t>(n) * p);
        for (auto& v : flat) v = rng.uniform();
        Dataset data(std::move(flat), std::vector<double>(n, 0.0), n, p);
        for (int q = 1; q <= p; ++q) {
            std::vector<int> subset;
            for (int j = 0; j < q; ++j) subset.push_back(j);
            for (int K = 1; K <= std::min(n, 4); ++K) {
                const auto parts = enumerate_valid_trees(data, subset, K, 1);
                CHECK(BigInt(static_cast<long long>(parts.size())) <=
                      partitioning_number(n, q, K));
            }
        }
    }
}

TEST_CASE("enumeration requires every axis in the subset") {
    // y-coordinates identical: no valid split on axis 1 exists
    auto data = make_2d({{0.1, 0.5}, {0.4, 0.5}, {0.8, 0.5}});
    auto parts = enumerate_valid_trees(data, std::vector<int>{0, 1}, 3, 1);
    CHECK(parts.empty());
    auto only_x = enumerate_valid_trees(data, std::vector<int>{0}, 2, 1);
    CHECK(only_x.size() == 2);
}

TEST_CASE("sequence cap guard") {
    Rng rng(4);
    std::vector<double> xs(40);
    for (auto& v : xs) v = rng.uniform();
    auto data = make_1d(xs);
    CHECK_THROWS_AS(enumerate_valid_trees(data, std::vector<int>{0}, 12, 1, 1000),
                    std::invalid_argument);
}
