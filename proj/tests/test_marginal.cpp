#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "spikeforest/marginal.hpp"
#include "spikeforest/rng.hpp"
#include "test_helpers.hpp"

using namespace spikeforest;
using spikeforest::testing::make_1d;

TEST_CASE("single point, zero residual, unit variance") {
    // closed form: -log(2 pi)/2 - log(2)/2
    const double got = cell_log_marginal(1, 0.0, 0.0, 1.0);
    CHECK(got == doctest::Approx(-0.5 * std::log(2.0 * M_PI) - 0.5 * std::log(2.0))
                     .epsilon(1e-14));
    // quadrature agrees
    std::vector<double> r = {0.0};
    CHECK(cell_log_marginal_quadrature(r, 1.0) == doctest::Approx(got).epsilon(1e-10));
}

TEST_CASE("zero residuals maximize the quadratic term") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const int nk = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<double> r(nk);
        for (auto& v : r) v = rng.normal();
        double s = 0.0, q = 0.0;
        for (double v : r) {
            s += v;
            q += v * v;
        }
        CHECK(cell_log_marginal(nk, 0.0, 0.0, 1.0) >= cell_log_marginal(nk, s, q, 1.0));
    }
}

TEST_CASE("closed form matches per-cell quadrature on random cells") {
    Rng rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        const int nk = 1 + static_cast<int>(rng.uniform_int(8));
        const double v = 0.2 + 2.0 * rng.uniform();
        std::vector<double> r(nk);
        double s = 0.0, q = 0.0;
        for (auto& x : r) {
            x = 2.0 * rng.normal();
            s += x;
            q += x * x;
        }
        const double closed = cell_log_marginal(nk, s, q, v);
        const double quad = cell_log_marginal_quadrature(r, v);
        CHECK(std::abs(closed - quad) < 1e-8);
    }
}

TEST_CASE("tree marginal sums independent cells") {
    auto data = make_1d({0.1, 0.3, 0.6, 0.9}, {1.0, -0.5, 0.25, 2.0});
    TreePartition t;
    t.grow(0, SplitRule{0, 0.3});
    const double whole = log_marginal_likelihood_tree(t, data, data.y(), 1.0);
    const double left = cell_log_marginal(2, 0.5, 1.25, 1.0);
    const double right = cell_log_marginal(2, 2.25, 0.0625 + 4.0, 1.0);
    CHECK(whole == doctest::Approx(left + right).epsilon(1e-12));

    TreePartition empty_leaf;
    empty_leaf.grow(0, SplitRule{0, 0.9});
    CHECK_THROWS_AS(log_marginal_likelihood_tree(empty_leaf, data, data.y(), 1.0),
                    std::invalid_argument);
}

TEST_CASE("an uninformative split never beats the complexity economics") {
    // splitting a cell of identical residuals changes the marginal only
    // through the shrinkage determinant, which favors the coarser cell
    std::vector<double> r8(8, 0.7);
    double s8 = 8 * 0.7, q8 = 8 * 0.49;
    const double whole = cell_log_marginal(8, s8, q8, 1.0);
    const double split = 2.0 * cell_log_marginal(4, 4 * 0.7, 4 * 0.49, 1.0);
    CHECK(whole >= split - 1e-2);
    // with zero residuals the preference is strict
    const double whole0 = cell_log_marginal(8, 0.0, 0.0, 1.0);
    const double split0 = 2.0 * cell_log_marginal(4, 0.0, 0.0, 1.0);
    CHECK(whole0 > split0);
}
