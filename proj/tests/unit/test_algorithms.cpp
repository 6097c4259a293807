#include <doctest.h>

#include <cmath>
#include <vector>

#include "hemfl/algorithms.hpp"
#include "hemfl/errors.hpp"
#include "support/test_support.hpp"

using namespace hemfl;

namespace {

ModelSpec linear_spec() { return ModelSpec{ModelKind::linear, 3, 3, 0, 1, 0.1}; }

LocalObjective zero_gradient(std::size_t P) {
    return [P](std::span<const double>, std::span<const std::size_t> rows) {
        return ObjectiveEval{0.0, std::vector<double>(P, 0.0), static_cast<double>(rows.size())};
    };
}

double distance(const Vec& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("fedavg aggregation") {
    const std::vector<WeightedParams> two{{{0.0}, 1.0}, {{4.0}, 3.0}};
    CHECK(fedavg_aggregate(two) == Vec{3.0});
    const std::vector<WeightedParams> same{{{1.5, -2.0}, 2.0}, {{1.5, -2.0}, 7.0}};
    CHECK(fedavg_aggregate(same) == Vec{1.5, -2.0});
    const std::vector<WeightedParams> one{{{0.25, 9.0}, 5.0}};
    CHECK(fedavg_aggregate(one) == Vec{0.25, 9.0});
    const std::vector<WeightedParams> mismatched{{{1.0}, 1.0}, {{1.0, 2.0}, 1.0}};
    CHECK_THROWS_AS(fedavg_aggregate(mismatched), ArgumentError);
    CHECK_THROWS_AS(fedavg_aggregate(std::vector<WeightedParams>{}), ArgumentError);
}

TEST_CASE("scaffold client update") {
    const ModelSpec spec = linear_spec();
    const std::size_t P = parameter_count(spec);
    const Dataset ds = testing::random_dataset(6, 3, 3, 21);
    const auto x = testing::random_vector(P, 0.3, 4);
    const Vec zero(P, 0.0);

    SUBCASE("one local step: c_i+ equals the gradient at x") {
        const SgdConfig cfg{0.2, 8, 1, 0.0};
        const auto r = scaffold_client_update(x, zero, zero, ds.size(), cfg, 3, data_objective(spec, ds, 0.0));
        REQUIRE(r.steps == 1);
        std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
        const auto g = loss_and_grad(x, spec, ds, rows).grad;
        for (std::size_t i = 0; i < P; ++i) {
            CHECK(r.new_c_i[i] == doctest::Approx(g[i]).epsilon(1e-9));
            CHECK(r.delta_y[i] == doctest::Approx(-0.2 * g[i]).epsilon(1e-12));
            CHECK(r.delta_c[i] == doctest::Approx(r.new_c_i[i]).epsilon(1e-15));
        }
    }
    SUBCASE("zero corrections reproduce plain local sgd exactly") {
        const SgdConfig cfg{0.1, 2, 2, 0.0};
        const auto obj = data_objective(spec, ds, 0.0);
        const auto r = scaffold_client_update(x, zero, zero, ds.size(), cfg, 8, obj);
        const auto plain = run_local_sgd(x, ds.size(), cfg, 8, obj);
        CHECK(r.y == plain.params);
        CHECK(r.steps == plain.steps);
        CHECK(r.cost_units == plain.cost_units);
    }
    SUBCASE("stationary point is a fixed point") {
        const auto r = scaffold_client_update(x, zero, zero, 6, SgdConfig{0.3, 2, 1, 0.0}, 1, zero_gradient(P));
        CHECK(r.delta_y == zero);
        CHECK(r.delta_c == zero);
    }
    SUBCASE("displacement formula after several steps") {
        const SgdConfig cfg{0.05, 2, 1, 0.0};
        const auto c_i = testing::random_vector(P, 0.2, 11);
        const auto c = testing::random_vector(P, 0.2, 12);
        const auto r = scaffold_client_update(x, c_i, c, ds.size(), cfg, 2, data_objective(spec, ds, 0.0));
        REQUIRE(r.steps == 3);
        for (std::size_t i = 0; i < P; ++i) {
            const double expected = c_i[i] - c[i] - r.delta_y[i] / (3 * 0.05);
            CHECK(r.new_c_i[i] == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("scaffold server update") {
    const Vec x{1.0, 2.0}, c{0.5, -0.5};
    SUBCASE("zero deltas are a fixed point") {
        const std::vector<ScaffoldDelta> d{{x, {0.0, 0.0}}, {x, {0.0, 0.0}}};
        const auto r = scaffold_server_update(x, c, d, 4, 1.0);
        CHECK(r.x == x);
        CHECK(r.c == c);
    }
    SUBCASE("formula instance") {
        // delta_y = (1, -1) and (3, 1)
        const std::vector<ScaffoldDelta> d{{{2.0, 1.0}, {2.0, 0.0}}, {{4.0, 3.0}, {0.0, 4.0}}};
        const auto full = scaffold_server_update(x, c, d, 2, 1.0);
        CHECK(full.x == Vec{3.0, 2.0});
        CHECK(full.c == Vec{1.5, 1.5});
        const auto partial = scaffold_server_update(x, c, d, 4, 0.5);
        CHECK(partial.x == Vec{2.0, 2.0});
        CHECK(partial.c == Vec{1.0, 0.5});
    }
    SUBCASE("after a synchronized round c equals the client mean of c_i") {
        const ModelSpec spec = linear_spec();
        const std::size_t P = parameter_count(spec);
        const auto x0 = testing::random_vector(P, 0.3, 5);
        const Vec zero(P, 0.0);
        std::vector<ScaffoldDelta> deltas;
        Vec mean_ci(P, 0.0);
        for (std::uint32_t k = 0; k < 3; ++k) {
            const Dataset ds = testing::random_dataset(5 + k, 3, 3, 40 + k);
            const auto r =
                scaffold_client_update(x0, zero, zero, ds.size(), SgdConfig{0.1, 2, 1, 0.0}, k, data_objective(spec, ds, 0.0));
            deltas.push_back({r.y, r.delta_c});
            for (std::size_t i = 0; i < P; ++i) mean_ci[i] += r.new_c_i[i] / 3.0;
        }
        const auto s = scaffold_server_update(x0, zero, deltas, 3, 1.0);
        for (std::size_t i = 0; i < P; ++i) CHECK(s.c[i] == doctest::Approx(mean_ci[i]).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        const std::vector<ScaffoldDelta> d{{{1.0}, {1.0, 2.0}}};
        const std::vector<ScaffoldDelta> d2{{{1.0, 2.0}, {1.0}}};
        CHECK_THROWS_AS(scaffold_server_update(x, c, d2, 1, 1.0), ArgumentError);
        CHECK_THROWS_AS(scaffold_server_update(x, c, d, 1, 1.0), ArgumentError);
    }
}

TEST_CASE("feddyn client update") {
    const ModelSpec spec = linear_spec();
    const std::size_t P = parameter_count(spec);
    const Dataset ds = testing::random_dataset(8, 3, 3, 31);
    const auto w = testing::random_vector(P, 0.3, 6);
    const Vec zero(P, 0.0);

    SUBCASE("stationary start is a fixed point") {
        const auto r = feddyn_client_update(w, zero, 8, 0.1, SgdConfig{0.1, 4, 2, 0.0}, 1, zero_gradient(P));
        CHECK(r.theta == Vec(w.begin(), w.end()));
        CHECK(r.new_g_i == zero);
    }
    SUBCASE("state update formula") {
        const auto g = testing::random_vector(P, 0.1, 7);
        const auto r = feddyn_client_update(w, g, ds.size(), 0.4, SgdConfig{0.1, 4, 1, 0.0}, 2, data_objective(spec, ds, 0.0));
        for (std::size_t i = 0; i < P; ++i) CHECK(r.new_g_i[i] == doctest::Approx(g[i] - 0.4 * (r.theta[i] - w[i])));
    }
    SUBCASE("a large alpha pins theta to w") {
        const SgdConfig cfg{1e-7, 4, 2, 0.0};
        const auto obj = data_objective(spec, ds, 0.0);
        const auto loose = feddyn_client_update(w, zero, ds.size(), 0.1, SgdConfig{0.1, 4, 2, 0.0}, 3, obj);
        // Keep lr * alpha < 1 so the proximal pull stays stable.
        const auto tight = feddyn_client_update(w, zero, ds.size(), 1e6, cfg, 3, obj);
        CHECK(distance(tight.theta, w) < distance(loose.theta, w));
        CHECK(distance(tight.theta, w) < 1e-6);
    }
}

TEST_CASE("feddyn server update") {
    const Vec w{1.0, -1.0, 0.5};
    const Vec zero(3, 0.0);
    SUBCASE("fixed point") {
        const std::vector<Vec> thetas{w, w, w};
        const auto r = feddyn_server_update(zero, thetas, w, 0.1, 3);
        CHECK(r.w == w);
        CHECK(r.h == zero);
    }
    SUBCASE("full participation gives twice the mean minus w") {
        const std::vector<Vec> thetas{{2.0, 0.0, 1.0}, {0.0, 1.0, 3.0}};
        const auto r = feddyn_server_update(zero, thetas, w, 0.1, 2);
        const Vec expected{2.0 * 1.0 - 1.0, 2.0 * 0.5 + 1.0, 2.0 * 2.0 - 0.5};
        for (std::size_t i = 0; i < 3; ++i) CHECK(r.w[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        const auto doubled = feddyn_server_update(zero, thetas, w, 0.2, 2);
        for (std::size_t i = 0; i < 3; ++i) CHECK(doubled.w[i] == doctest::Approx(r.w[i]).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        const std::vector<Vec> thetas{{1.0, 2.0}};
        CHECK_THROWS_AS(feddyn_server_update(zero, thetas, w, 0.1, 1), ArgumentError);
    }
}

TEST_CASE("strategy config") {
    CHECK(strategy_kind_from_string("scaffold") == StrategyKind::scaffold);
    CHECK(to_string(StrategyKind::feddyn) == "feddyn");
    CHECK_THROWS(strategy_kind_from_string("fedprox"));
    CHECK_THROWS_AS((StrategyConfig{StrategyKind::feddyn, 0.0, 1.0}.validate()), ArgumentError);
    CHECK_THROWS_AS((StrategyConfig{StrategyKind::scaffold, 0.1, -1.0}.validate()), ArgumentError);
}
