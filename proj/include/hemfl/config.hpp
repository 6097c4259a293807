#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemfl/algorithms.hpp"
#include "hemfl/data.hpp"
#include "hemfl/fedsim.hpp"
#include "hemfl/hem.hpp"
#include "hemfl/metrics.hpp"
#include "hemfl/model.hpp"
#include "hemfl/personalization.hpp"

namespace hemfl {

enum class DataSource { synthetic, cifar10 };

struct DatasetConfig {
    DataSource source = DataSource::synthetic;
    // synthetic
    int num_classes = 10;
    int n_features = 16;
    int train_per_class = 100;
    int test_per_class = 100;
    double class_separation = 4.0;
    std::uint64_t seed = 1;
    // cifar10
    std::vector<std::filesystem::path> train_files;
    std::vector<std::filesystem::path> test_files;
};

struct TrainingConfig {
    SgdConfig sgd;
    int rounds = 100;
    double participation = 1.0;
    int eval_every = 1;
    std::optional<double> early_stop_accuracy;
    double aggregation_cost = 1.0;
};

struct AlgorithmConfig {
    std::string name;
    StrategyConfig strategy;
    PersonalizerConfig personalizer;
    /// Non-personalized algorithm MPI is measured against (PFL entries only).
    std::string base;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    PartitionSpec partition;
    ModelSpec model;  // n_features / num_classes follow the dataset
    TrainingConfig training;
    std::vector<AlgorithmConfig> algorithms;
    MetricConfig metrics;
    ImportanceVector importance;
    std::vector<std::uint64_t> seeds{1};
    std::filesystem::path output_dir = "hemfl_out";
    unsigned threads = 0;

    const AlgorithmConfig& algorithm(const std::string& name) const;
    /// Canonical form with all defaults filled in; excludes output_dir and threads.
    nlohmann::json canonical_json() const;
    /// 16 hex digits of FNV-1a over canonical_json().dump().
    std::string fingerprint() const;
};

/// Parses and validates a config document. Unknown keys, wrong types, and
/// missing referenced files throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Simulator settings for one (algorithm, seed) run.
FedSimConfig make_fedsim_config(const ExperimentConfig& cfg, const AlgorithmConfig& algo, std::uint64_t run_seed);
/// Partition spec for one run seed.
PartitionSpec run_partition_spec(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Train/test data described by the dataset section.
TrainTestData build_dataset(const DatasetConfig& cfg);

}  // namespace hemfl
