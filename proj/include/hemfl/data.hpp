#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hemfl {

/// Dense feature matrix (row-major) with integer class labels.
///
/// Invariants: every label < num_classes, features.size() == labels.size() * n_features.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t n_features, int num_classes);
    Dataset(std::vector<double> features, std::vector<int> labels, std::size_t n_features, int num_classes);

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::size_t n_features() const { return n_features_; }
    int num_classes() const { return num_classes_; }

    std::span<const double> row(std::size_t i) const {
        return {features_.data() + i * n_features_, n_features_};
    }
    int label(std::size_t i) const { return labels_[i]; }
    std::span<const int> labels() const { return labels_; }
    std::span<const double> features() const { return features_; }

    void push_back(std::span<const double> x, int label);
    /// Copies the given rows, in order, into a new dataset.
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Row indices grouped by class; entry c lists the rows of class c in ascending order.
    std::vector<std::vector<std::size_t>> rows_by_class() const;

private:
    std::vector<double> features_;
    std::vector<int> labels_;
    std::size_t n_features_ = 0;
    int num_classes_ = 0;
};

struct TrainTestData {
    Dataset train;
    Dataset test;
};

struct ClientShard {
    int client_id = 0;
    std::vector<int> class_list;  // in (i + n) mod C order, n = 0..k-1
    Dataset train;
    Dataset test;

    bool holds_class(int c) const;
};

struct PartitionSpec {
    int num_clients = 100;
    int classes_per_client = 5;
    std::uint64_t seed = 0;
};

/// Gaussian blobs: one mean per class, unit covariance.
///
/// Class means are random unit directions scaled by class_separation, so
/// neighbouring blobs sit roughly class_separation * sqrt(2) apart.
Dataset generate_synthetic(int num_classes, int n_features, int samples_per_class, double class_separation,
                           std::uint64_t seed);

/// Splits each class's rows: the first train_per_class (in row order) go to train, the rest to test.
TrainTestData split_per_class(const Dataset& data, int train_per_class);

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarPixels = 3072;
inline constexpr int kCifarClasses = 10;

/// Decodes CIFAR-10 binary records (1 label byte + 3072 channel-major pixel bytes), scaling pixels by 1/255.
Dataset parse_cifar10_binary(std::span<const std::uint8_t> bytes);
/// Reads and concatenates one or more CIFAR-10 batch files.
Dataset load_cifar10_files(std::span<const std::filesystem::path> paths);

/// Classes assigned to a client by the cyclic rule {(i + n) mod C : n = 0..k-1}.
std::vector<int> client_class_list(int client_id, int num_classes, int classes_per_client);

/// Class-cyclic non-IID partition.
///
/// Each class's samples are shuffled with a seeded stream and dealt
/// round-robin over the clients (ascending id) whose class list contains it.
/// Train and test are dealt with the same rule and independent streams.
/// Samples of a class no client holds are left unassigned.
std::vector<ClientShard> partition(const TrainTestData& data, const PartitionSpec& spec);

}  // namespace hemfl
