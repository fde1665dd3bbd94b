#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spikeforest/dataset.hpp"
#include "spikeforest/rng.hpp"
#include "spikeforest/test_function.hpp"
#include "test_helpers.hpp"

using namespace spikeforest;

TEST_CASE("empirical norm basic values") {
    std::vector<double> f = {1.0, 2.0, 3.0};
    std::vector<double> g = {0.0, 0.0, 0.0};
    CHECK(empirical_norm(f, f) == 0.0);
    CHECK(empirical_norm(f, g) == doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-14));
    std::vector<double> h = {2.5, 3.5, 4.5};  // constant offset 1.5
    CHECK(empirical_norm(h, f) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK_THROWS_AS(empirical_norm(f, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("empirical norm is a norm on random vectors") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(20));
        std::vector<double> a(n), b(n), zero(n, 0.0);
        for (int i = 0; i < n; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        // triangle inequality: ||a+b|| <= ||a|| + ||b||
        std::vector<double> sum(n);
        for (int i = 0; i < n; ++i) sum[i] = a[i] + b[i];
        CHECK(empirical_norm(sum, zero) <=
              empirical_norm(a, zero) + empirical_norm(b, zero) + 1e-12);
        // absolute homogeneity
        const double c = rng.normal();
        std::vector<double> scaled(n);
        for (int i = 0; i < n; ++i) scaled[i] = c * a[i];
        CHECK(empirical_norm(scaled, zero) ==
              doctest::Approx(std::abs(c) * empirical_norm(a, zero)).epsilon(1e-12));
    }
}

TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(Dataset({-0.1, 0.5}, {0.0, 0.0}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(Dataset({0.1, 0.5}, {0.0}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(Dataset({}, {}, 0, 1), std::invalid_argument);
}

TEST_CASE("column rescaling maps onto the unit interval") {
    std::vector<double> x = {-2.0, 5.0, 0.0, 5.0, 2.0, 5.0};  // 3 rows, col2 constant
    auto report = rescale_columns(x, 3, 2);
    CHECK(report[0].applied);
    CHECK(report[0].min == -2.0);
    CHECK(report[0].max == 2.0);
    CHECK(x[0] == 0.0);
    CHECK(x[2] == 0.5);
    CHECK(x[4] == 1.0);
    CHECK(report[1].constant);
    CHECK(x[1] == 0.5);
    CHECK(x[3] == 0.5);
}

TEST_CASE("csv round trip with rescale report") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "spikeforest_csv_test.csv";
    {
        std::ofstream out(path);
        out << "x1,x2,y\n";
        out << "0.25,-1.0,2.5\n";
        out << "0.5,3.0,1.0\n";
        out << "0.75,1.0,0.0\n";
    }
    auto loaded = load_csv(path.string());
    CHECK(loaded.data.n() == 3);
    CHECK(loaded.data.p() == 2);
    CHECK_FALSE(loaded.rescaling[0].applied);
    CHECK(loaded.rescaling[1].applied);
    CHECK(loaded.data.x(0, 1) == 0.0);
    CHECK(loaded.data.x(1, 1) == 1.0);

    const auto out_path = fs::temp_directory_path() / "spikeforest_csv_out.csv";
    save_csv(loaded.data, out_path.string());
    auto reloaded = load_csv(out_path.string());
    for (int i = 0; i < 3; ++i) {
        CHECK(reloaded.data.y()[i] == loaded.data.y()[i]);
        for (int j = 0; j < 2; ++j) CHECK(reloaded.data.x(i, j) == loaded.data.x(i, j));
    }
    fs::remove(path);
    fs::remove(out_path);
}

TEST_CASE("regime 1 generator") {
    auto gen = generate_regime1(100, 10, 2, 1.0, 42);
    CHECK(gen.data.n() == 100);
    CHECK(gen.data.p() == 10);
    CHECK(gen.truth.active_union() == std::vector<int>{0, 1});

    // symmetry center: the truth vanishes at x_j = 1/2 on active coordinates
    std::vector<double> center(10, 0.5);
    CHECK(gen.truth.eval(center) == doctest::Approx(0.0));

    // determinism
    auto gen2 = generate_regime1(100, 10, 2, 1.0, 42);
    CHECK(gen.data.x_flat() == gen2.data.x_flat());
    CHECK(gen.data.y() == gen2.data.y());
    auto gen3 = generate_regime1(100, 10, 2, 1.0, 43);
    CHECK(gen.data.y() != gen3.data.y());

    CHECK_THROWS_AS(generate_regime1(10, 3, 4, 1.0, 1), std::invalid_argument);
}

TEST_CASE("measured Holder ratio stays below the declared norm") {
    for (double alpha : {0.5, 1.0}) {
        auto gen = generate_regime1(100, 10, 2, alpha, 11, DesignKind::IidUniform, 2.0);
        const double declared = gen.truth.holder_norm();
        const auto active = gen.truth.active_union();
        const double measured =
            measured_holder_ratio(gen.data, gen.f0_values, active, alpha);
        CHECK(measured <= declared + 1e-9);
        CHECK(measured > 0.25 * declared);  // the bound is not vacuous
    }
}

TEST_CASE("regime 1 truth is constant in inactive directions") {
    auto gen = generate_regime1(50, 6, 2, 0.7, 3);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(6), x2(6);
        for (int j = 0; j < 6; ++j) x[j] = rng.uniform();
        x2 = x;
        for (int j = 2; j < 6; ++j) x2[j] = rng.uniform();  // perturb inactive only
        CHECK(gen.truth.eval(x) == doctest::Approx(gen.truth.eval(x2)).epsilon(1e-14));
    }
}

TEST_CASE("regime 2 additivity") {
    std::vector<Regime2Component> comps = {{1, 1.0, 1.0}, {1, 0.5, 2.0}, {2, 1.0, 0.5}};
    auto gen = generate_regime2(60, 8, comps, 9);
    CHECK(gen.truth.components().size() == 3);
    // disjoint consecutive blocks
    CHECK(gen.truth.components()[0].active == std::vector<int>{0});
    CHECK(gen.truth.components()[1].active == std::vector<int>{1});
    CHECK(gen.truth.components()[2].active == std::vector<int>{2, 3});

    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(8);
        for (auto& v : x) v = rng.uniform();
        double sum = 0.0;
        for (const auto& c : gen.truth.components()) sum += c.eval(x);
        CHECK(gen.truth.eval(x) == doctest::Approx(sum).epsilon(1e-14));
    }

    // single component degenerates to regime 1
    std::vector<Regime2Component> single = {{2, 1.0, 1.5}};
    auto r2 = generate_regime2(40, 5, single, 77);
    auto r1 = generate_regime1(40, 5, 2, 1.0, 77, DesignKind::IidUniform, 1.5);
    CHECK(r2.f0_values == r1.f0_values);
    CHECK(r2.data.y() == r1.data.y());

    // capacity violation
    std::vector<Regime2Component> wide = {{3, 1.0, 1.0}, {3, 1.0, 1.0}};
    CHECK_THROWS_AS(generate_regime2(10, 5, wide, 1), std::invalid_argument);
}

TEST_CASE("uniform grid design") {
    auto gen = generate_regime1(16, 2, 2, 1.0, 4, DesignKind::UniformGrid);
    // 4 x 4 midpoint lattice
    CHECK(gen.data.x(0, 0) == doctest::Approx(0.125));
    CHECK(gen.data.x(0, 1) == doctest::Approx(0.125));
    CHECK(gen.data.x(15, 0) == doctest::Approx(0.875));
    CHECK_THROWS_AS(generate_regime1(15, 2, 1, 1.0, 4, DesignKind::UniformGrid),
                    std::invalid_argument);
}
