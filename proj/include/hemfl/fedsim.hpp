#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemfl/algorithms.hpp"
#include "hemfl/data.hpp"
#include "hemfl/model.hpp"
#include "hemfl/personalization.hpp"

namespace hemfl {

struct FedSimConfig {
    std::string algorithm_name = "fedavg";
    std::string fingerprint;
    ModelSpec model;
    SgdConfig sgd;
    StrategyConfig strategy;
    PersonalizerConfig personalizer;
    int rounds = 100;
    double participation = 1.0;
    int eval_every = 1;  // the final round is always evaluated
    std::optional<double> early_stop_accuracy;
    /// Cost units charged once per round for the server step.
    double aggregation_cost = 1.0;
    unsigned threads = 1;  // 0 = hardware concurrency
    std::uint64_t seed = 0;

    void validate() const;
};

struct ServerState {
    int round = 0;
    ModelParams global;
    Vec c;  // scaffold control variate
    Vec h;  // feddyn server state
};

struct ClientState {
    int client_id = 0;
    const ClientShard* shard = nullptr;
    SupportQuerySplit split;  // empty unless a personalizer is configured
    Vec c_i;                  // scaffold
    Vec g_i;                  // feddyn
};

struct RoundRecord {
    int round = 0;
    bool evaluated = false;
    std::vector<double> client_accuracies;  // by client id; empty when not evaluated
    double mean_client_accuracy = 0.0;
    double wall_clock_seconds = 0.0;
    double cost_units = 0.0;
    int participants = 0;
};

struct ExperimentLog {
    std::string algorithm_name;
    std::string fingerprint;
    std::vector<RoundRecord> records;
    bool completed = false;
    std::string error;
    ModelParams final_params;
};

/// Seed used by a client's local update in a given round.
std::uint64_t client_round_seed(std::uint64_t seed, int round, int client_id);

/// Builds per-client state (support/query splits, zeroed control variates).
std::vector<ClientState> make_client_states(std::span<const ClientShard> shards, const FedSimConfig& cfg);

/// Accuracy of the model each client deploys this round, ordered by client id.
std::vector<double> client_eval_pass(const ServerState& server, std::span<const ClientState> clients,
                                     const ModelSpec& spec, const PersonalizerConfig* personalizer,
                                     double weight_decay = 0.0, unsigned threads = 1);

/// Synchronous rounds of broadcast -> local update -> aggregate -> evaluate.
///
/// A numeric divergence ends the run with completed = false and the error text.
ExperimentLog run_experiment(const FedSimConfig& cfg, std::span<const ClientShard> shards);

nlohmann::json to_json(const ExperimentLog& log);
/// One row per (evaluated round, client): round,client_id,accuracy,cost_units,wall_clock.
void write_round_csv(std::ostream& out, const ExperimentLog& log);

}  // namespace hemfl
