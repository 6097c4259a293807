#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemfl/algorithms.hpp"
#include "hemfl/hem.hpp"
#include "hemfl/metrics.hpp"
#include "hemfl/personalization.hpp"

namespace hemfl {

inline constexpr int kReportSchemaVersion = 1;

/// Raw measurements of one (algorithm, seed) run.
struct SeedRun {
    std::uint64_t seed = 0;
    bool completed = true;
    std::string error;
    Trajectory trajectory;
    std::vector<double> final_client_accuracies;
    double wall_clock_seconds = 0.0;
};

/// Per-seed derived values and their seed means.
struct Measurements {
    std::vector<int> rounds_to_target;
    std::vector<double> accuracy_index;
    std::vector<double> convergence_index;
    std::vector<double> tta;
    std::vector<double> entropy;
    std::vector<double> mpi;  // PFL only
    double mean_accuracy_index = 0.0;
    double mean_convergence_index = 0.0;
    double mean_tta = 0.0;
    double mean_entropy = 0.0;
    std::optional<double> mean_mpi;
};

struct AlgorithmEntry {
    std::string name;
    StrategyConfig strategy;
    PersonalizerConfig personalizer;
    std::string base;
    std::vector<SeedRun> runs;  // empty for externally supplied indices

    std::optional<Measurements> measurements;
    std::optional<ComponentIndices> components;
    std::optional<double> hem_score;
    std::optional<Band> band;
    std::string note;

    bool completed() const;
    bool is_personalized() const { return personalizer.kind != PersonalizerKind::none; }
};

struct Report {
    int schema_version = kReportSchemaVersion;
    std::string fingerprint;
    MetricConfig metrics;
    ImportanceVector importance;
    std::vector<AlgorithmEntry> algorithms;
    std::vector<std::string> ranking;

    const AlgorithmEntry* find(const std::string& name) const;
};

/// Recomputes measurements and component indices of every entry from its raw runs.
/// Comparative indices use only completed entries; diverged entries keep no components.
void derive_components(Report& report);

/// Composes HEM scores, bands and the ranking from stored component indices.
void score(Report& report, const ImportanceVector& importance);

nlohmann::json to_json(const Report& report);
/// Throws FormatError for malformed documents or a schema_version mismatch.
Report report_from_json(const nlohmann::json& doc);
Report read_report(const std::filesystem::path& path);
/// Writes via a temporary file in the same directory and renames it into place.
void write_report_atomic(const Report& report, const std::filesystem::path& path);

/// Re-derives every index, score and the ranking from raw measurements and lists each mismatch.
std::vector<std::string> verify_report(const nlohmann::json& doc);

}  // namespace hemfl
