#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hemfl/errors.hpp"
#include "hemfl/personalization.hpp"
#include "support/test_support.hpp"

using namespace hemfl;

namespace {

ModelSpec linear_spec(int d, int C) { return ModelSpec{ModelKind::linear, d, C, 0, 1, 0.1}; }

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

Dataset points(const std::vector<std::vector<double>>& xs, const std::vector<int>& labels, int classes) {
    Dataset ds(xs.front().size(), classes);
    for (std::size_t i = 0; i < xs.size(); ++i) ds.push_back(xs[i], labels[i]);
    return ds;
}

}  // namespace

TEST_CASE("support/query split") {
    const Dataset train = testing::random_dataset(30, 3, 5, 3);  // 6 rows per class
    const std::vector<int> classes{1, 2, 3};
    Dataset mine(3, 5);
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train.label(i) >= 1 && train.label(i) <= 3) mine.push_back(train.row(i), train.label(i));

    const auto split = split_support_query(mine, classes, 0.5, 9);
    CHECK(split.support.size() == 9);
    CHECK(split.query.size() == 9);
    for (int c : classes) {
        const auto s = split.support.labels();
        CHECK(std::count(s.begin(), s.end(), c) == 3);
    }
    const auto again = split_support_query(mine, classes, 0.5, 9);
    CHECK(std::equal(split.support.features().begin(), split.support.features().end(),
                     again.support.features().begin(), again.support.features().end()));

    SUBCASE("tiny fractions still give one support row per class") {
        const auto small = split_support_query(mine, classes, 0.01, 1);
        CHECK(small.support.size() == 3);
    }
    SUBCASE("missing class is a precondition error") {
        const std::vector<int> with_missing{1, 4};
        Dataset only1(3, 5);
        only1.push_back(mine.row(0), mine.label(0));
        CHECK_THROWS_AS(split_support_query(only1, with_missing, 0.5, 1), PreconditionError);
    }
}

TEST_CASE("maml adaptation") {
    const ModelSpec spec = linear_spec(3, 3);
    const Dataset support = testing::random_dataset(9, 3, 3, 12);
    const auto w = testing::random_vector(parameter_count(spec), 0.4, 2);

    CHECK(maml_adapt(w, spec, support, 0.1, 0) == w);

    const auto one = maml_adapt(w, spec, support, 0.1, 1);
    const auto g = loss_and_grad(w, spec, support, all_rows(support)).grad;
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(one[i] == doctest::Approx(w[i] - 0.1 * g[i]).epsilon(1e-12));

    const double before = loss(w, spec, support, all_rows(support));
    const auto many = maml_adapt(w, spec, support, 0.01, 10);
    CHECK(loss(many, spec, support, all_rows(support)) <= before + 1e-12);
}

TEST_CASE("maml client update") {
    const ModelSpec spec = linear_spec(2, 2);
    const Dataset train = points({{1.0, 0.5}, {-0.5, 2.0}}, {0, 1}, 2);
    const auto w = testing::random_vector(parameter_count(spec), 0.3, 8);

    SUBCASE("one outer step on a two-sample fixture") {
        const Dataset support = train.subset(std::vector<std::size_t>{0});
        const SgdConfig cfg{0.2, 2, 1, 0.0};
        const auto r = maml_client_update(w, spec, train, support, cfg, 0.3, 4);
        REQUIRE(r.steps == 1);
        const auto gs = loss_and_grad(w, spec, support, std::vector<std::size_t>{0}).grad;
        std::vector<double> inner(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) inner[i] = w[i] - 0.3 * gs[i];
        const auto gq = loss_and_grad(inner, spec, train, std::vector<std::size_t>{0, 1}).grad;
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(r.params[i] == doctest::Approx(w[i] - 0.2 * gq[i]).epsilon(1e-12));
        CHECK(r.cost_units == doctest::Approx(3.0));
    }
    SUBCASE("zero inner rate equals plain local sgd") {
        const Dataset big = testing::random_dataset(11, 2, 2, 5);
        const Dataset support = big.subset(std::vector<std::size_t>{0, 1, 2});
        const SgdConfig cfg{0.1, 3, 2, 0.0};
        const auto meta = maml_client_update(w, spec, big, support, cfg, 0.0, 6);
        const auto plain = run_local_sgd(w, big.size(), cfg, 6, data_objective(spec, big, 0.0));
        CHECK(meta.params == plain.params);
        CHECK(meta.cost_units == plain.cost_units);
    }
    SUBCASE("deterministic for a seed") {
        const Dataset support = train.subset(std::vector<std::size_t>{1});
        const SgdConfig cfg{0.1, 1, 3, 0.0};
        CHECK(maml_client_update(w, spec, train, support, cfg, 0.1, 3).params ==
              maml_client_update(w, spec, train, support, cfg, 0.1, 3).params);
    }
}

TEST_CASE("prototype head") {
    const ModelSpec spec = linear_spec(2, 4);
    const std::vector<double> params(parameter_count(spec), 0.0);

    SUBCASE("support points classify as themselves") {
        const Dataset support = points({{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}}, {1, 2, 3}, 4);
        const std::vector<int> classes{1, 2, 3};
        const auto head = proto_adapt(params, spec, support, classes);
        for (std::size_t i = 0; i < support.size(); ++i) CHECK(head.predict(support.row(i)) == support.label(i));
        CHECK(head.accuracy(support) == 1.0);
    }
    SUBCASE("midpoint geometry and ties") {
        const Dataset support = points({{0.0, 0.0}, {4.0, 0.0}}, {0, 1}, 4);
        const std::vector<int> classes{0, 1};
        const auto head = proto_adapt(params, spec, support, classes);
        CHECK(head.predict(std::vector<double>{2.0 + 1e-9, 0.0}) == 1);
        CHECK(head.predict(std::vector<double>{2.0 - 1e-9, 0.0}) == 0);
        CHECK(head.predict(std::vector<double>{2.0, 0.0}) == 0);
    }
    SUBCASE("prototypes are per-class feature means for the linear model") {
        const Dataset support = testing::random_dataset(12, 2, 4, 17);
        const std::vector<int> classes{0, 1, 2, 3};
        const auto head = proto_adapt(params, spec, support, classes);
        for (int c = 0; c < 4; ++c) {
            double mx = 0.0, my = 0.0;
            int n = 0;
            for (std::size_t i = 0; i < support.size(); ++i)
                if (support.label(i) == c) mx += support.row(i)[0], my += support.row(i)[1], ++n;
            CHECK(head.prototype(c)[0] == doctest::Approx(mx / n).epsilon(1e-14));
            CHECK(head.prototype(c)[1] == doctest::Approx(my / n).epsilon(1e-14));
        }
    }
    SUBCASE("predictions stay inside the class list") {
        const Dataset support = points({{0.0, 0.0}, {1.0, 1.0}}, {2, 3}, 4);
        const std::vector<int> classes{3, 2};
        const auto head = proto_adapt(params, spec, support, classes);
        const Dataset probe = testing::random_dataset(50, 2, 4, 1);
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const int p = head.predict(probe.row(i));
            CHECK((p == 2 || p == 3));
        }
    }
    SUBCASE("missing support class") {
        const Dataset support = points({{0.0, 0.0}}, {0}, 4);
        const std::vector<int> classes{0, 1};
        CHECK_THROWS_AS(proto_adapt(params, spec, support, classes), PreconditionError);
    }
}

TEST_CASE("personalized accuracy with no adaptation equals plain evaluation") {
    const ModelSpec spec = linear_spec(3, 3);
    const Dataset train = testing::random_dataset(12, 3, 3, 2);
    const Dataset test = testing::random_dataset(20, 3, 3, 3);
    const std::vector<int> classes{0, 1, 2};
    const auto split = split_support_query(train, classes, 0.5, 1);
    const auto w = testing::random_vector(parameter_count(spec), 0.5, 4);
    const double plain = evaluate(w, spec, test);
    PersonalizerConfig none;
    CHECK(personalized_accuracy(none, w, spec, split, classes, test) == plain);
    PersonalizerConfig maml0;
    maml0.kind = PersonalizerKind::maml;
    maml0.inner_steps = 0;
    CHECK(personalized_accuracy(maml0, w, spec, split, classes, test) == plain);
}

TEST_CASE("median percentage improvement") {
    const std::vector<double> base{0.5, 0.5, 0.5};
    CHECK(compute_mpi(base, base) == 0.0);
    CHECK(compute_mpi(std::vector<double>{0.55, 0.60, 0.50}, base) == doctest::Approx(10.0).epsilon(1e-12));

    SUBCASE("six-client fixture with median 10.46") {
        const std::vector<double> b{0.80, 0.75, 0.70, 0.82, 0.60, 0.90};
        const std::vector<double> pct{-3.0, 4.0, 10.0, 10.92, 25.0, 12.0};
        std::vector<double> p(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) p[i] = b[i] * (1.0 + pct[i] / 100.0);
        CHECK(compute_mpi(p, b) == doctest::Approx(10.46).epsilon(1e-9));
    }
    SUBCASE("clients with near-zero base accuracy are skipped") {
        CHECK(compute_mpi(std::vector<double>{0.9, 0.6}, std::vector<double>{0.005, 0.5}) ==
              doctest::Approx(20.0).epsilon(1e-12));
        CHECK_THROWS_AS(compute_mpi(std::vector<double>{0.9}, std::vector<double>{0.0}), UndefinedMpiError);
        CHECK_THROWS_AS(compute_mpi(std::vector<double>{0.9}, std::vector<double>{0.5, 0.5}), ArgumentError);
    }
    SUBCASE("permutation invariance") {
        std::mt19937 gen(5);
        std::uniform_real_distribution<double> u(0.2, 1.0);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> a(7), b(7);
            for (auto& v : a) v = u(gen);
            for (auto& v : b) v = u(gen);
            std::vector<std::size_t> perm(7);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), gen);
            std::vector<double> pa(7), pb(7);
            for (std::size_t i = 0; i < 7; ++i) pa[i] = a[perm[i]], pb[i] = b[perm[i]];
            CHECK(compute_mpi(pa, pb) == compute_mpi(a, b));
        }
    }
}
