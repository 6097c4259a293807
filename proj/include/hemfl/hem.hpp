#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hemfl/metrics.hpp"

namespace hemfl {

/// Canonical importance levels.
namespace level {
inline constexpr double low = 1.0;
inline constexpr double moderate = 2.0;
inline constexpr double high = 3.0;
}  // namespace level

/// Parses "Low"/"Moderate"/"High" (any case) or a non-negative number.
double parse_importance_level(std::string_view text);

struct ImportanceVector {
    std::string use_case = "custom";
    double accuracy = 0.0;
    double convergence = 0.0;
    double comp_efficiency = 0.0;
    double fairness = 0.0;
    double personalization = level::moderate;  // applies only when a personalization index exists

    void validate() const;
};

enum class UseCase { iot, smartphone, institution };

std::string to_string(UseCase uc);
UseCase use_case_from_string(const std::string& name);

/// Preset levels for (accuracy, convergence, comp_efficiency, fairness):
///   iot         High, Low, High, High
///   smartphone  Moderate, High, High, Moderate
///   institution High, Low, Low, High
ImportanceVector preset(UseCase uc, double personalization = level::moderate);

/// Parses "accuracy=3,convergence=Low,..." on top of `base`; unknown keys throw ArgumentError.
ImportanceVector parse_importance_overrides(std::string_view spec, ImportanceVector base);

/// Weighted mean sum(index_i * level_i) / sum(level_i) over the applicable components.
double compose_hem(const ComponentIndices& indices, const ImportanceVector& importance);

enum class Band { excellent, good, acceptable, low };

std::string to_string(Band b);
Band band_from_string(const std::string& name);

/// Excellent (0.8, 1]; Good [0.7, 0.8]; Acceptable [0.5, 0.7); Low [0, 0.5).
Band band(double hem);

/// Descending by score, ties in lexicographic name order.
std::vector<std::string> rank(const ScoreMap& scores);

}  // namespace hemfl
