#include "hemfl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hemfl/errors.hpp"

namespace hemfl {

std::string to_string(TtaClock clock) { return clock == TtaClock::cost_units ? "cost_units" : "wall_clock"; }

TtaClock tta_clock_from_string(const std::string& name) {
    if (name == "cost_units") return TtaClock::cost_units;
    if (name == "wall_clock") return TtaClock::wall_clock;
    throw ArgumentError("unknown tta clock '" + name + "'");
}

std::string to_string(EntropyMode mode) { return mode == EntropyMode::raw ? "raw" : "normalized"; }

EntropyMode entropy_mode_from_string(const std::string& name) {
    if (name == "raw") return EntropyMode::raw;
    if (name == "normalized") return EntropyMode::normalized;
    throw ArgumentError("unknown entropy mode '" + name + "'");
}

void MetricConfig::validate() const {
    if (!(target_accuracy > 0.0 && target_accuracy < 1.0)) throw ArgumentError("target_accuracy must lie in (0, 1)");
    if (round_budget < 1) throw ArgumentError("round_budget must be >= 1");
    if (accuracy_window < 1) throw ArgumentError("accuracy_window must be >= 1");
}

Trajectory trajectory_of(const ExperimentLog& log) {
    Trajectory t;
    double cost = 0.0, wall = 0.0;
    for (const auto& r : log.records) {
        cost += r.cost_units;
        wall += r.wall_clock_seconds;
        if (!r.evaluated) continue;
        t.rounds.push_back(r.round);
        t.mean_accuracy.push_back(r.mean_client_accuracy);
        t.cumulative_cost.push_back(cost);
        t.cumulative_wall_clock.push_back(wall);
    }
    return t;
}

namespace {

void require_nonempty(const Trajectory& t, const char* what) {
    if (t.rounds.empty()) throw ArgumentError(std::string(what) + ": log has no evaluated rounds");
}

// Index of the first evaluated round within budget reaching the target, or nullopt.
std::optional<std::size_t> first_crossing(const Trajectory& t, const MetricConfig& cfg) {
    for (std::size_t i = 0; i < t.rounds.size(); ++i) {
        if (t.rounds[i] > cfg.round_budget) break;
        if (t.mean_accuracy[i] >= cfg.target_accuracy) return i;
    }
    return std::nullopt;
}

ScoreMap min_max(const ScoreMap& values, bool higher_is_better, const char* what) {
    if (values.empty()) throw ArgumentError(std::string(what) + ": empty algorithm set");
    double lo = values.begin()->second, hi = lo;
    for (const auto& [name, v] : values) {
        if (!std::isfinite(v)) throw ArgumentError(std::string(what) + ": non-finite value for " + name);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ScoreMap out;
    for (const auto& [name, v] : values) {
        if (hi == lo)
            out[name] = 0.5;
        else
            out[name] = higher_is_better ? (v - lo) / (hi - lo) : (hi - v) / (hi - lo);
    }
    return out;
}

}  // namespace

double accuracy_index(const Trajectory& t, const MetricConfig& cfg) {
    require_nonempty(t, "accuracy_index");
    const std::size_t w = std::min(t.mean_accuracy.size(), static_cast<std::size_t>(cfg.accuracy_window));
    double sum = 0.0;
    for (std::size_t i = t.mean_accuracy.size() - w; i < t.mean_accuracy.size(); ++i) sum += t.mean_accuracy[i];
    return sum / static_cast<double>(w);
}

int rounds_to_target(const Trajectory& t, const MetricConfig& cfg) {
    require_nonempty(t, "rounds_to_target");
    const auto hit = first_crossing(t, cfg);
    return hit ? t.rounds[*hit] : cfg.round_budget;
}

double convergence_index(const Trajectory& t, const MetricConfig& cfg) {
    return 1.0 - static_cast<double>(rounds_to_target(t, cfg)) / static_cast<double>(cfg.round_budget);
}

double tta(const Trajectory& t, const MetricConfig& cfg) {
    require_nonempty(t, "tta");
    const auto& clock = cfg.tta_clock == TtaClock::cost_units ? t.cumulative_cost : t.cumulative_wall_clock;
    if (const auto hit = first_crossing(t, cfg)) return clock[*hit];
    std::size_t cap = 0;
    for (std::size_t i = 0; i < t.rounds.size() && t.rounds[i] <= cfg.round_budget; ++i) cap = i;
    return clock[cap];
}

double fairness_entropy(std::span<const double> accuracies) {
    double h = 0.0;
    for (double a : accuracies) {
        if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("fairness_entropy: accuracy outside [0, 1]");
        if (a > 0.0) h -= a * std::log(a);
    }
    return h;
}

double normalized_fairness_entropy(std::span<const double> accuracies) {
    double total = 0.0;
    for (double a : accuracies) {
        if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("fairness_entropy: accuracy outside [0, 1]");
        total += a;
    }
    if (total == 0.0) return 0.0;
    double h = 0.0;
    for (double a : accuracies) {
        const double p = a / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

double fairness_entropy(std::span<const double> accuracies, EntropyMode mode) {
    return mode == EntropyMode::raw ? fairness_entropy(accuracies) : normalized_fairness_entropy(accuracies);
}

ScoreMap comp_efficiency_indices(const ScoreMap& ttas) { return min_max(ttas, false, "comp_efficiency_indices"); }

ScoreMap fairness_indices(const ScoreMap& entropies) { return min_max(entropies, false, "fairness_indices"); }

ScoreMap personalization_indices(const ScoreMap& mpis) { return min_max(mpis, true, "personalization_indices"); }

}  // namespace hemfl
