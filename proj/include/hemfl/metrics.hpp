#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hemfl/fedsim.hpp"

namespace hemfl {

enum class TtaClock { cost_units, wall_clock };
/// raw: -sum a ln a over the accuracy list. normalized: entropy of a_i / sum a_j.
enum class EntropyMode { raw, normalized };

std::string to_string(TtaClock clock);
TtaClock tta_clock_from_string(const std::string& name);
std::string to_string(EntropyMode mode);
EntropyMode entropy_mode_from_string(const std::string& name);

struct MetricConfig {
    double target_accuracy = 0.8;
    int round_budget = 1000;
    int accuracy_window = 10;
    TtaClock tta_clock = TtaClock::cost_units;
    EntropyMode entropy = EntropyMode::raw;

    void validate() const;
};

struct ComponentIndices {
    double accuracy = 0.0;
    double convergence = 0.0;
    double comp_efficiency = 0.0;
    double fairness = 0.0;
    std::optional<double> personalization;
};

/// Evaluated rounds of a log with cumulative clocks; everything the per-log metrics read.
struct Trajectory {
    std::vector<int> rounds;
    std::vector<double> mean_accuracy;
    std::vector<double> cumulative_cost;
    std::vector<double> cumulative_wall_clock;
};

Trajectory trajectory_of(const ExperimentLog& log);

/// Mean of the per-round mean client accuracy over the last W evaluated rounds.
double accuracy_index(const Trajectory& t, const MetricConfig& cfg);
/// First evaluated round whose mean accuracy reaches the target, or round_budget when none does.
int rounds_to_target(const Trajectory& t, const MetricConfig& cfg);
/// 1 - r* / round_budget.
double convergence_index(const Trajectory& t, const MetricConfig& cfg);
/// Cumulative clock at r*; when the target is never met, the clock at the last round within the budget.
double tta(const Trajectory& t, const MetricConfig& cfg);

inline double accuracy_index(const ExperimentLog& log, const MetricConfig& cfg) {
    return accuracy_index(trajectory_of(log), cfg);
}
inline double convergence_index(const ExperimentLog& log, const MetricConfig& cfg) {
    return convergence_index(trajectory_of(log), cfg);
}
inline double tta(const ExperimentLog& log, const MetricConfig& cfg) { return tta(trajectory_of(log), cfg); }

/// H(L) = -sum a_i ln a_i with 0 ln 0 = 0.
double fairness_entropy(std::span<const double> accuracies);
/// Shannon entropy of a_i / sum a_j (sensitivity variant).
double normalized_fairness_entropy(std::span<const double> accuracies);
double fairness_entropy(std::span<const double> accuracies, EntropyMode mode);

using ScoreMap = std::map<std::string, double>;

/// (TTA_max - TTA_a) / (TTA_max - TTA_min); 0.5 for every entry when all are equal.
ScoreMap comp_efficiency_indices(const ScoreMap& ttas);
/// (H_max - H_a) / (H_max - H_min); 0.5 for every entry when all are equal.
ScoreMap fairness_indices(const ScoreMap& entropies);
/// (MPI_a - MPI_min) / (MPI_max - MPI_min); 0.5 for every entry when all are equal.
ScoreMap personalization_indices(const ScoreMap& mpis);

}  // namespace hemfl
