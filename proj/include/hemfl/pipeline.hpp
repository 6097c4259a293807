#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "hemfl/config.hpp"
#include "hemfl/fedsim.hpp"
#include "hemfl/report.hpp"

namespace hemfl {

struct SuiteOptions {
    /// Directory for report.json, logs/ and rounds/; empty skips all file output.
    std::filesystem::path output_dir;
    std::ostream* progress = nullptr;
};

struct SuiteResult {
    Report report;
    std::vector<ExperimentLog> logs;  // algorithm-major, seed-minor
};

/// Runs every (algorithm, seed) pair, derives indices over the whole set and scores them.
SuiteResult run_suite(const ExperimentConfig& cfg, const SuiteOptions& options = {});

/// Shards for one run seed.
std::vector<ClientShard> build_shards(const ExperimentConfig& cfg, const TrainTestData& data, std::uint64_t run_seed);

/// One line per client: id, class list, train and test sample counts; then totals.
void print_partition_table(std::ostream& out, const ExperimentConfig& cfg);

/// Human-readable ranking table for a scored report.
void print_ranking(std::ostream& out, const Report& report);

}  // namespace hemfl
