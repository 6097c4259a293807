#include "hemfl/algorithms.hpp"

#include <cmath>

#include "hemfl/errors.hpp"

namespace hemfl {

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::fedavg: return "fedavg";
        case StrategyKind::feddyn: return "feddyn";
        case StrategyKind::scaffold: return "scaffold";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& name) {
    if (name == "fedavg") return StrategyKind::fedavg;
    if (name == "feddyn") return StrategyKind::feddyn;
    if (name == "scaffold") return StrategyKind::scaffold;
    throw ArgumentError("unknown strategy kind '" + name + "'");
}

void StrategyConfig::validate() const {
    if (kind == StrategyKind::feddyn && !(feddyn_alpha > 0.0 && std::isfinite(feddyn_alpha)))
        throw ArgumentError("feddyn_alpha must be positive");
    if (kind == StrategyKind::scaffold && !(server_lr > 0.0 && std::isfinite(server_lr)))
        throw ArgumentError("server_lr must be positive");
}

namespace {

void require_length(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) throw ArgumentError(std::string(what) + ": parameter length mismatch");
}

}  // namespace

Vec fedavg_aggregate(std::span<const WeightedParams> updates) {
    if (updates.empty()) throw ArgumentError("fedavg_aggregate: no updates");
    const std::size_t P = updates.front().params.size();
    double total = 0.0;
    for (const auto& u : updates) {
        require_length(u.params, P, "fedavg_aggregate");
        if (!(u.num_samples >= 1.0)) throw ArgumentError("fedavg_aggregate: sample count must be >= 1");
        total += u.num_samples;
    }
    Vec out(P, 0.0);
    for (const auto& u : updates) {
        const double weight = u.num_samples / total;
        for (std::size_t k = 0; k < P; ++k) out[k] += weight * u.params[k];
    }
    return out;
}

ScaffoldClientResult scaffold_client_update(std::span<const double> x, std::span<const double> c_i,
                                            std::span<const double> c, std::size_t n, const SgdConfig& cfg,
                                            std::uint64_t seed, const LocalObjective& objective) {
    const std::size_t P = x.size();
    require_length(c_i, P, "scaffold_client_update");
    require_length(c, P, "scaffold_client_update");
    if (!(cfg.learning_rate > 0.0)) throw ArgumentError("scaffold: learning_rate must be positive");

    Vec correction(P);
    for (std::size_t k = 0; k < P; ++k) correction[k] = c[k] - c_i[k];
    auto corrected = [&](std::span<const double> theta, std::span<const std::size_t> rows) {
        ObjectiveEval eval = objective(theta, rows);
        for (std::size_t k = 0; k < P; ++k) eval.grad[k] += correction[k];
        return eval;
    };
    LocalRun run = run_local_sgd(x, n, cfg, seed, corrected);

    ScaffoldClientResult out;
    out.steps = run.steps;
    out.cost_units = run.cost_units;
    out.delta_y.resize(P);
    out.new_c_i.resize(P);
    out.delta_c.resize(P);
    // delta_c first, then c_i+ = c_i + delta_c: when c_i == c the client and server
    // variates receive the same increment and stay bitwise equal.
    const double scale = 1.0 / (static_cast<double>(run.steps) * cfg.learning_rate);
    for (std::size_t k = 0; k < P; ++k) {
        out.delta_y[k] = run.params[k] - x[k];
        out.delta_c[k] = (x[k] - run.params[k]) * scale - c[k];
        out.new_c_i[k] = c_i[k] + out.delta_c[k];
    }
    out.y = std::move(run.params);
    return out;
}

ScaffoldServerResult scaffold_server_update(std::span<const double> x, std::span<const double> c,
                                            std::span<const ScaffoldDelta> deltas, int total_clients,
                                            double server_lr) {
    if (deltas.empty()) throw ArgumentError("scaffold_server_update: no participants");
    if (total_clients < static_cast<int>(deltas.size()))
        throw ArgumentError("scaffold_server_update: more participants than clients");
    const std::size_t P = x.size();
    require_length(c, P, "scaffold_server_update");
    Vec sum_y(P, 0.0), sum_c(P, 0.0);
    for (const auto& d : deltas) {
        require_length(d.y, P, "scaffold_server_update");
        require_length(d.delta_c, P, "scaffold_server_update");
        for (std::size_t k = 0; k < P; ++k) {
            sum_y[k] += d.y[k];
            sum_c[k] += d.delta_c[k];
        }
    }
    ScaffoldServerResult out{Vec(P), Vec(P)};
    // x + server_lr * mean(y - x), written so server_lr = 1 yields mean(y) without cancellation.
    const double inv_s = 1.0 / static_cast<double>(deltas.size());
    const double inv_n = 1.0 / static_cast<double>(total_clients);
    for (std::size_t k = 0; k < P; ++k) {
        out.x[k] = (1.0 - server_lr) * x[k] + server_lr * (inv_s * sum_y[k]);
        out.c[k] = c[k] + inv_n * sum_c[k];
    }
    return out;
}

LocalObjective feddyn_objective(LocalObjective base, std::span<const double> w, std::span<const double> g_i,
                                double alpha) {
    require_length(g_i, w.size(), "feddyn_objective");
    return [base = std::move(base), w = Vec(w.begin(), w.end()), g = Vec(g_i.begin(), g_i.end()), alpha](
               std::span<const double> theta, std::span<const std::size_t> rows) {
        ObjectiveEval eval = base(theta, rows);
        double linear = 0.0, prox = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double diff = theta[k] - w[k];
            linear += g[k] * theta[k];
            prox += diff * diff;
            eval.grad[k] += alpha * diff - g[k];
        }
        eval.loss += 0.5 * alpha * prox - linear;
        return eval;
    };
}

FedDynClientResult feddyn_client_update(std::span<const double> w, std::span<const double> g_i, std::size_t n,
                                        double alpha, const SgdConfig& cfg, std::uint64_t seed,
                                        const LocalObjective& objective) {
    if (!(alpha > 0.0)) throw ArgumentError("feddyn: alpha must be positive");
    LocalRun run = run_local_sgd(w, n, cfg, seed, feddyn_objective(objective, w, g_i, alpha));
    FedDynClientResult out;
    out.steps = run.steps;
    out.cost_units = run.cost_units;
    out.new_g_i.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) out.new_g_i[k] = g_i[k] - alpha * (run.params[k] - w[k]);
    out.theta = std::move(run.params);
    return out;
}

FedDynServerResult feddyn_server_update(std::span<const double> h, std::span<const Vec> thetas,
                                        std::span<const double> w_prev, double alpha, int total_clients) {
    if (thetas.empty()) throw ArgumentError("feddyn_server_update: no participants");
    if (!(alpha > 0.0)) throw ArgumentError("feddyn_server_update: alpha must be positive");
    if (total_clients < static_cast<int>(thetas.size()))
        throw ArgumentError("feddyn_server_update: more participants than clients");
    const std::size_t P = w_prev.size();
    require_length(h, P, "feddyn_server_update");
    Vec sum_theta(P, 0.0), sum_drift(P, 0.0);
    for (const auto& theta : thetas) {
        require_length(theta, P, "feddyn_server_update");
        for (std::size_t k = 0; k < P; ++k) {
            sum_theta[k] += theta[k];
            sum_drift[k] += theta[k] - w_prev[k];
        }
    }
    FedDynServerResult out{Vec(P), Vec(P)};
    const double inv_s = 1.0 / static_cast<double>(thetas.size());
    const double inv_n = 1.0 / static_cast<double>(total_clients);
    for (std::size_t k = 0; k < P; ++k) {
        out.h[k] = h[k] - alpha * inv_n * sum_drift[k];
        out.w[k] = sum_theta[k] * inv_s - out.h[k] / alpha;
    }
    return out;
}

}  // namespace hemfl
