#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hemfl/model.hpp"

namespace hemfl {

enum class StrategyKind { fedavg, feddyn, scaffold };

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::fedavg;
    double feddyn_alpha = 0.1;  // feddyn only
    double server_lr = 1.0;     // scaffold only

    void validate() const;
};

using Vec = std::vector<double>;

struct WeightedParams {
    Vec params;
    double num_samples = 0.0;
};

/// Sample-count-weighted average, summed in the given (client id) order.
Vec fedavg_aggregate(std::span<const WeightedParams> updates);

struct ScaffoldClientResult {
    Vec y;  // local model after K steps
    Vec delta_y;
    Vec delta_c;
    Vec new_c_i;
    int steps = 0;
    double cost_units = 0.0;
};

/// SCAFFOLD local update with the displacement-based control variate.
///
/// Every step descends g(y) - c_i + c. After K steps:
///   c_i+ = c_i - c + (x - y) / (K * lr),  delta_y = y - x,  delta_c = c_i+ - c_i.
/// delta_c is computed as (x - y) / (K * lr) - c and c_i+ as c_i + delta_c.
ScaffoldClientResult scaffold_client_update(std::span<const double> x, std::span<const double> c_i,
                                            std::span<const double> c, std::size_t n, const SgdConfig& cfg,
                                            std::uint64_t seed, const LocalObjective& objective);

struct ScaffoldServerResult {
    Vec x;
    Vec c;
};

/// A participant's contribution: its local model y (delta_y = y - x) and delta_c.
struct ScaffoldDelta {
    Vec y;
    Vec delta_c;
};

/// x+ = x + (server_lr / |S|) * sum delta_y;  c+ = c + (1 / N_total) * sum delta_c.
/// Evaluated as (1 - server_lr) * x + server_lr * mean(y).
ScaffoldServerResult scaffold_server_update(std::span<const double> x, std::span<const double> c,
                                            std::span<const ScaffoldDelta> deltas, int total_clients,
                                            double server_lr);

/// f(theta) - <g_i, theta> + alpha/2 * ||theta - w||^2 wrapped around a data objective.
LocalObjective feddyn_objective(LocalObjective base, std::span<const double> w, std::span<const double> g_i,
                                double alpha);

struct FedDynClientResult {
    Vec theta;
    Vec new_g_i;  // g_i - alpha * (theta - w)
    int steps = 0;
    double cost_units = 0.0;
};

FedDynClientResult feddyn_client_update(std::span<const double> w, std::span<const double> g_i, std::size_t n,
                                        double alpha, const SgdConfig& cfg, std::uint64_t seed,
                                        const LocalObjective& objective);

struct FedDynServerResult {
    Vec w;
    Vec h;
};

/// h+ = h - alpha/N_total * sum(theta_i - w_prev);  w+ = mean(theta_i) - h+/alpha.
FedDynServerResult feddyn_server_update(std::span<const double> h, std::span<const Vec> thetas,
                                        std::span<const double> w_prev, double alpha, int total_clients);

}  // namespace hemfl
