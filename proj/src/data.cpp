#include "hemfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "hemfl/errors.hpp"
#include "hemfl/rng.hpp"

namespace hemfl {

Dataset::Dataset(std::size_t n_features, int num_classes) : n_features_(n_features), num_classes_(num_classes) {
    if (n_features == 0) throw ArgumentError("dataset needs at least one feature");
    if (num_classes <= 0) throw ArgumentError("dataset needs at least one class");
}

Dataset::Dataset(std::vector<double> features, std::vector<int> labels, std::size_t n_features, int num_classes)
    : Dataset(n_features, num_classes) {
    if (features.size() != labels.size() * n_features)
        throw ArgumentError("feature matrix size does not match labels * n_features");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw ArgumentError("label out of range: " + std::to_string(y));
    features_ = std::move(features);
    labels_ = std::move(labels);
}

void Dataset::push_back(std::span<const double> x, int label) {
    if (x.size() != n_features_) throw ArgumentError("row width does not match n_features");
    if (label < 0 || label >= num_classes_) throw ArgumentError("label out of range: " + std::to_string(label));
    features_.insert(features_.end(), x.begin(), x.end());
    labels_.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out(n_features_, num_classes_);
    out.features_.reserve(rows.size() * n_features_);
    out.labels_.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= size()) throw ArgumentError("row index out of range");
        auto x = row(r);
        out.features_.insert(out.features_.end(), x.begin(), x.end());
        out.labels_.push_back(labels_[r]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> Dataset::rows_by_class() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < labels_.size(); ++i) out[static_cast<std::size_t>(labels_[i])].push_back(i);
    return out;
}

bool ClientShard::holds_class(int c) const {
    return std::find(class_list.begin(), class_list.end(), c) != class_list.end();
}

Dataset generate_synthetic(int num_classes, int n_features, int samples_per_class, double class_separation,
                           std::uint64_t seed) {
    if (num_classes <= 0 || n_features <= 0 || samples_per_class <= 0)
        throw ArgumentError("generate_synthetic: counts must be positive");
    if (!(class_separation > 0.0)) throw ArgumentError("generate_synthetic: class_separation must be positive");

    const auto d = static_cast<std::size_t>(n_features);
    Rng mean_rng(derive_seed(seed, 0x6d65616e));  // "mean"
    std::vector<double> means(static_cast<std::size_t>(num_classes) * d);
    for (int c = 0; c < num_classes; ++c) {
        auto mu = std::span<double>(means).subspan(static_cast<std::size_t>(c) * d, d);
        double norm = 0.0;
        while (norm < 1e-12) {
            norm = 0.0;
            for (double& v : mu) {
                v = mean_rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        }
        for (double& v : mu) v *= class_separation / norm;
    }

    Dataset out(d, num_classes);
    Rng sample_rng(derive_seed(seed, 0x73616d70));  // "samp"
    std::vector<double> x(d);
    for (int c = 0; c < num_classes; ++c) {
        const double* mu = means.data() + static_cast<std::size_t>(c) * d;
        for (int m = 0; m < samples_per_class; ++m) {
            for (std::size_t j = 0; j < d; ++j) x[j] = mu[j] + sample_rng.normal();
            out.push_back(x, c);
        }
    }
    return out;
}

TrainTestData split_per_class(const Dataset& data, int train_per_class) {
    if (train_per_class < 0) throw ArgumentError("split_per_class: negative train count");
    std::vector<std::size_t> train_rows, test_rows;
    for (const auto& rows : data.rows_by_class()) {
        const auto cut = std::min(rows.size(), static_cast<std::size_t>(train_per_class));
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
        test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {data.subset(train_rows), data.subset(test_rows)};
}

Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw FormatError("CIFAR-10 input is empty");
    if (bytes.size() % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 input length " + std::to_string(bytes.size()) + " is not a multiple of 3073");
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    std::vector<double> features(n * kCifarPixels);
    std::vector<int> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
        if (rec[0] >= kCifarClasses)
            throw FormatError("CIFAR-10 record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
        labels[r] = rec[0];
        double* out = features.data() + r * kCifarPixels;
        for (std::size_t p = 0; p < kCifarPixels; ++p) out[p] = rec[1 + p] / 255.0;
    }
    return Dataset(std::move(features), std::move(labels), kCifarPixels, kCifarClasses);
}

Dataset load_cifar10_files(std::span<const std::filesystem::path> paths) {
    if (paths.empty()) throw ArgumentError("no CIFAR-10 files given");
    Dataset all(kCifarPixels, kCifarClasses);
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open CIFAR-10 file " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const Dataset part = parse_cifar10_binary(bytes);
        for (std::size_t i = 0; i < part.size(); ++i) all.push_back(part.row(i), part.label(i));
    }
    return all;
}

std::vector<int> client_class_list(int client_id, int num_classes, int classes_per_client) {
    if (client_id < 0) throw ArgumentError("client id must be non-negative");
    if (num_classes <= 0 || classes_per_client <= 0) throw ArgumentError("class counts must be positive");
    if (classes_per_client > num_classes)
        throw ArgumentError("classes_per_client (" + std::to_string(classes_per_client) + ") exceeds num_classes (" +
                            std::to_string(num_classes) + ")");
    std::vector<int> out(static_cast<std::size_t>(classes_per_client));
    for (int n = 0; n < classes_per_client; ++n) out[static_cast<std::size_t>(n)] = (client_id + n) % num_classes;
    return out;
}

namespace {

// Deals each class's rows round-robin over its holders; returns per-client row lists.
std::vector<std::vector<std::size_t>> deal(const Dataset& data, const std::vector<std::vector<int>>& holders,
                                           std::size_t num_clients, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> assigned(num_clients);
    auto by_class = data.rows_by_class();
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& owners = holders[c];
        if (owners.empty()) continue;
        auto& rows = by_class[c];
        Rng rng(derive_seed(seed, c));
        rng.shuffle(rows);
        for (std::size_t j = 0; j < rows.size(); ++j)
            assigned[static_cast<std::size_t>(owners[j % owners.size()])].push_back(rows[j]);
    }
    for (auto& rows : assigned) std::sort(rows.begin(), rows.end());
    return assigned;
}

}  // namespace

std::vector<ClientShard> partition(const TrainTestData& data, const PartitionSpec& spec) {
    const int C = data.train.num_classes();
    if (spec.num_clients < 1) throw ArgumentError("partition: num_clients must be at least 1");
    if (spec.classes_per_client < 1) throw ArgumentError("partition: classes_per_client must be at least 1");
    if (spec.classes_per_client > C)
        throw ArgumentError("partition: classes_per_client exceeds the dataset's class count");
    if (data.test.num_classes() != C || data.test.n_features() != data.train.n_features())
        throw ArgumentError("partition: train and test datasets disagree on shape");

    const auto n_clients = static_cast<std::size_t>(spec.num_clients);
    std::vector<ClientShard> shards(n_clients);
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(C));
    for (int i = 0; i < spec.num_clients; ++i) {
        auto& shard = shards[static_cast<std::size_t>(i)];
        shard.client_id = i;
        shard.class_list = client_class_list(i, C, spec.classes_per_client);
        for (int c : shard.class_list) holders[static_cast<std::size_t>(c)].push_back(i);
    }

    const auto train_rows = deal(data.train, holders, n_clients, derive_seed(spec.seed, 0x747261696e));  // "train"
    const auto test_rows = deal(data.test, holders, n_clients, derive_seed(spec.seed, 0x74657374));      // "test"
    for (std::size_t i = 0; i < n_clients; ++i) {
        shards[i].train = data.train.subset(train_rows[i]);
        shards[i].test = data.test.subset(test_rows[i]);
    }
    return shards;
}

}  // namespace hemfl
