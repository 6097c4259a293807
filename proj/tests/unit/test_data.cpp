#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "hemfl/data.hpp"
#include "hemfl/errors.hpp"
#include "support/test_support.hpp"

using namespace hemfl;

namespace {

// Reference softmax regression written independently of the model module.
double reference_softmax_train_accuracy(const Dataset& ds, int iters, double lr) {
    const std::size_t d = ds.n_features();
    const int C = ds.num_classes();
    std::vector<std::vector<double>> W(C, std::vector<double>(d + 1, 0.0));
    for (int it = 0; it < iters; ++it) {
        std::vector<std::vector<double>> G(C, std::vector<double>(d + 1, 0.0));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto x = ds.row(i);
            std::vector<double> z(C);
            for (int c = 0; c < C; ++c) {
                z[c] = W[c][d];
                for (std::size_t j = 0; j < d; ++j) z[c] += W[c][j] * x[j];
            }
            const double zmax = *std::max_element(z.begin(), z.end());
            double s = 0.0;
            for (auto& v : z) s += (v = std::exp(v - zmax));
            for (int c = 0; c < C; ++c) {
                const double g = z[c] / s - (ds.label(i) == c ? 1.0 : 0.0);
                for (std::size_t j = 0; j < d; ++j) G[c][j] += g * x[j];
                G[c][d] += g;
            }
        }
        for (int c = 0; c < C; ++c)
            for (std::size_t j = 0; j <= d; ++j) W[c][j] -= lr * G[c][j] / static_cast<double>(ds.size());
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.row(i);
        int best = 0;
        double best_z = -1e300;
        for (int c = 0; c < C; ++c) {
            double z = W[c][d];
            for (std::size_t j = 0; j < d; ++j) z += W[c][j] * x[j];
            if (z > best_z) best_z = z, best = c;
        }
        correct += best == ds.label(i);
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::multiset<std::vector<double>> row_multiset(const Dataset& ds) {
    std::multiset<std::vector<double>> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto r = ds.row(i);
        std::vector<double> v(r.begin(), r.end());
        v.push_back(ds.label(i));
        out.insert(std::move(v));
    }
    return out;
}

TrainTestData small_split(int C, int train_m, int test_m, std::uint64_t seed) {
    return split_per_class(generate_synthetic(C, 4, train_m + test_m, 3.0, seed), train_m);
}

}  // namespace

TEST_CASE("dataset enforces its invariants") {
    CHECK_THROWS_AS(Dataset({1.0, 2.0, 3.0}, {0}, 2, 2), ArgumentError);
    CHECK_THROWS_AS(Dataset({1.0, 2.0}, {2}, 2, 2), ArgumentError);
    Dataset ds(2, 3);
    ds.push_back(std::vector<double>{1.0, 2.0}, 1);
    CHECK(ds.size() == 1);
    CHECK_THROWS(ds.push_back(std::vector<double>{1.0}, 0));
    CHECK_THROWS(ds.push_back(std::vector<double>{1.0, 2.0}, 3));
}

TEST_CASE("synthetic generation") {
    SUBCASE("tiny case is deterministic") {
        const Dataset a = generate_synthetic(2, 2, 1, 10.0, 7);
        const Dataset b = generate_synthetic(2, 2, 1, 10.0, 7);
        REQUIRE(a.size() == 2);
        CHECK(std::set<int>(a.labels().begin(), a.labels().end()) == std::set<int>{0, 1});
        CHECK(std::equal(a.features().begin(), a.features().end(), b.features().begin(), b.features().end()));
        CHECK(std::equal(a.labels().begin(), a.labels().end(), b.labels().begin(), b.labels().end()));
    }
    SUBCASE("separable blobs are learnable by a reference softmax regression") {
        const Dataset ds = generate_synthetic(10, 16, 50, 4.0, 1);
        CHECK(ds.size() == 500);
        CHECK(ds.n_features() == 16);
        CHECK(reference_softmax_train_accuracy(ds, 300, 0.5) > 0.9);
    }
    SUBCASE("invalid counts") {
        CHECK_THROWS_AS(generate_synthetic(3, 2, 0, 1.0, 1), ArgumentError);
        CHECK_THROWS_AS(generate_synthetic(0, 2, 5, 1.0, 1), ArgumentError);
        CHECK_THROWS_AS(generate_synthetic(3, 0, 5, 1.0, 1), ArgumentError);
    }
    SUBCASE("different seeds give different samples") {
        CHECK_FALSE(generate_synthetic(3, 4, 5, 2.0, 1).features()[0] ==
                    generate_synthetic(3, 4, 5, 2.0, 2).features()[0]);
    }
}

TEST_CASE("split_per_class keeps the first rows of each class for training") {
    const Dataset all = generate_synthetic(3, 2, 5, 2.0, 3);
    const TrainTestData tt = split_per_class(all, 2);
    CHECK(tt.train.size() == 6);
    CHECK(tt.test.size() == 9);
    const auto by_class = all.rows_by_class();
    CHECK(tt.train.row(0)[0] == all.row(by_class[0][0])[0]);
    CHECK(row_multiset(tt.train).size() + row_multiset(tt.test).size() == all.size());
}

TEST_CASE("cifar-10 binary parsing") {
    SUBCASE("zero record") {
        const std::vector<std::uint8_t> bytes(kCifarRecordBytes, 0);
        const Dataset ds = parse_cifar10_binary(bytes);
        REQUIRE(ds.size() == 1);
        CHECK(ds.label(0) == 0);
        CHECK(std::all_of(ds.features().begin(), ds.features().end(), [](double v) { return v == 0.0; }));
    }
    SUBCASE("two saturated records") {
        const std::vector<std::vector<std::uint8_t>> px(2, std::vector<std::uint8_t>(kCifarPixels, 255));
        const Dataset ds = parse_cifar10_binary(testing::cifar_bytes({3, 7}, px));
        REQUIRE(ds.size() == 2);
        CHECK(ds.label(0) == 3);
        CHECK(ds.label(1) == 7);
        CHECK(ds.n_features() == kCifarPixels);
        CHECK(std::all_of(ds.features().begin(), ds.features().end(), [](double v) { return v == 1.0; }));
    }
    SUBCASE("round trip through an independent writer") {
        const std::vector<int> labels{9, 0, 4};
        const std::vector<std::vector<std::uint8_t>> px{testing::pixel_pattern(1), testing::pixel_pattern(2),
                                                        testing::pixel_pattern(3)};
        const auto bytes = testing::cifar_bytes(labels, px);
        const Dataset ds = parse_cifar10_binary(bytes);
        std::vector<std::vector<std::uint8_t>> back(ds.size());
        std::vector<int> back_labels;
        for (std::size_t r = 0; r < ds.size(); ++r) {
            back_labels.push_back(ds.label(r));
            for (double v : ds.row(r)) back[r].push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
        }
        CHECK(testing::cifar_bytes(back_labels, back) == bytes);
    }
    SUBCASE("malformed input") {
        CHECK_THROWS_AS(parse_cifar10_binary(std::vector<std::uint8_t>(3000, 0)), FormatError);
        CHECK_THROWS_AS(parse_cifar10_binary(std::vector<std::uint8_t>(kCifarRecordBytes + 1, 0)), FormatError);
        CHECK_THROWS_AS(parse_cifar10_binary(std::vector<std::uint8_t>{}), FormatError);
        std::vector<std::uint8_t> bad(kCifarRecordBytes, 0);
        bad[0] = 10;
        CHECK_THROWS_AS(parse_cifar10_binary(bad), FormatError);
    }
    SUBCASE("file loading concatenates batches") {
        const auto dir = testing::scratch_dir("cifar");
        const std::vector<std::vector<std::uint8_t>> px{testing::pixel_pattern(5)};
        for (const char* name : {"a.bin", "b.bin"}) {
            const auto bytes = testing::cifar_bytes({name[0] == 'a' ? 1 : 2}, px);
            std::ofstream(dir / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                              static_cast<std::streamsize>(bytes.size()));
        }
        const std::vector<std::filesystem::path> paths{dir / "a.bin", dir / "b.bin"};
        const Dataset ds = load_cifar10_files(paths);
        REQUIRE(ds.size() == 2);
        CHECK(ds.label(0) == 1);
        CHECK(ds.label(1) == 2);
        const std::vector<std::filesystem::path> missing{dir / "nope.bin"};
        CHECK_THROWS(load_cifar10_files(missing));
    }
}

TEST_CASE("cyclic class lists") {
    CHECK(client_class_list(0, 10, 5) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(client_class_list(7, 10, 5) == std::vector<int>{7, 8, 9, 0, 1});
    for (int i = 0; i < 23; ++i) CHECK(client_class_list(i, 10, 1) == std::vector<int>{i % 10});
    CHECK_THROWS_AS(client_class_list(0, 10, 11), ArgumentError);
}

TEST_CASE("partition") {
    const TrainTestData data = small_split(10, 30, 12, 11);
    const PartitionSpec spec{20, 5, 99};
    const auto shards = partition(data, spec);
    REQUIRE(shards.size() == 20);

    SUBCASE("shards respect their class lists") {
        for (const auto& s : shards) {
            CHECK(s.class_list == client_class_list(s.client_id, 10, 5));
            for (int l : s.train.labels()) CHECK(s.holds_class(l));
            for (int l : s.test.labels()) CHECK(s.holds_class(l));
        }
    }
    SUBCASE("union of shards equals the input as multisets") {
        std::multiset<std::vector<double>> train, test;
        for (const auto& s : shards) {
            train.merge(row_multiset(s.train));
            test.merge(row_multiset(s.test));
        }
        CHECK(train == row_multiset(data.train));
        CHECK(test == row_multiset(data.test));
    }
    SUBCASE("holder counts follow the class-list formula") {
        for (int c = 0; c < 10; ++c) {
            int expected = 0;
            for (int i = 0; i < 20; ++i) {
                const auto cl = client_class_list(i, 10, 5);
                expected += std::find(cl.begin(), cl.end(), c) != cl.end();
            }
            int holders = 0;
            for (const auto& s : shards) {
                const auto labels = s.train.labels();
                holders += std::find(labels.begin(), labels.end(), c) != labels.end();
            }
            CHECK(holders == expected);
        }
    }
    SUBCASE("dealing is even") {
        // Each class has 30 train rows and 10 holders.
        for (const auto& s : shards) CHECK(s.train.size() == 5 * 3);
    }
    SUBCASE("deterministic for a fixed seed") {
        const auto again = partition(data, spec);
        for (std::size_t i = 0; i < shards.size(); ++i) {
            CHECK(std::equal(shards[i].train.features().begin(), shards[i].train.features().end(),
                             again[i].train.features().begin(), again[i].train.features().end()));
            CHECK(std::equal(shards[i].test.labels().begin(), shards[i].test.labels().end(),
                             again[i].test.labels().begin(), again[i].test.labels().end()));
        }
    }
    SUBCASE("seed changes the dealing") {
        const auto other = partition(data, PartitionSpec{20, 5, 100});
        bool differs = false;
        for (std::size_t i = 0; i < shards.size(); ++i)
            differs |= !std::equal(shards[i].train.features().begin(), shards[i].train.features().end(),
                                   other[i].train.features().begin(), other[i].train.features().end());
        CHECK(differs);
    }
    SUBCASE("k larger than C is rejected") {
        CHECK_THROWS_AS(partition(data, PartitionSpec{20, 11, 1}), ArgumentError);
    }
}
