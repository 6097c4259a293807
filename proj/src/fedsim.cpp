#include "hemfl/fedsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "hemfl/errors.hpp"
#include "hemfl/parallel.hpp"
#include "hemfl/rng.hpp"

namespace hemfl {

void FedSimConfig::validate() const {
    model.validate();
    sgd.validate();
    strategy.validate();
    personalizer.validate();
    if (rounds < 0) throw ArgumentError("rounds must be >= 0");
    if (!(participation > 0.0 && participation <= 1.0)) throw ArgumentError("participation must lie in (0, 1]");
    if (eval_every < 1) throw ArgumentError("eval_every must be >= 1");
    if (early_stop_accuracy && !(*early_stop_accuracy > 0.0 && *early_stop_accuracy <= 1.0))
        throw ArgumentError("early_stop_accuracy must lie in (0, 1]");
    if (!(aggregation_cost >= 0.0)) throw ArgumentError("aggregation_cost must be >= 0");
    if (strategy.kind == StrategyKind::scaffold && !(sgd.learning_rate > 0.0))
        throw ArgumentError("scaffold requires a positive learning rate");
}

std::uint64_t client_round_seed(std::uint64_t seed, int round, int client_id) {
    return derive_seed(seed, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client_id));
}

std::vector<ClientState> make_client_states(std::span<const ClientShard> shards, const FedSimConfig& cfg) {
    const std::size_t P = parameter_count(cfg.model);
    std::vector<ClientState> clients;
    clients.reserve(shards.size());
    for (const auto& shard : shards) {
        if (shard.train.empty())
            throw ArgumentError("client " + std::to_string(shard.client_id) + " has an empty training shard");
        if (shard.test.empty())
            throw ArgumentError("client " + std::to_string(shard.client_id) + " has an empty test shard");
        ClientState c;
        c.client_id = shard.client_id;
        c.shard = &shard;
        if (cfg.personalizer.kind != PersonalizerKind::none)
            c.split = split_support_query(shard.train, shard.class_list, cfg.personalizer.support_fraction,
                                          derive_seed(cfg.seed, 0x73706c6974, static_cast<std::uint64_t>(shard.client_id)));
        if (cfg.strategy.kind == StrategyKind::scaffold) c.c_i.assign(P, 0.0);
        if (cfg.strategy.kind == StrategyKind::feddyn) c.g_i.assign(P, 0.0);
        clients.push_back(std::move(c));
    }
    return clients;
}

std::vector<double> client_eval_pass(const ServerState& server, std::span<const ClientState> clients,
                                     const ModelSpec& spec, const PersonalizerConfig* personalizer,
                                     double weight_decay, unsigned threads) {
    if (clients.empty()) throw ArgumentError("client_eval_pass: no clients");
    std::vector<double> acc(clients.size());
    parallel_for(clients.size(), threads, [&](std::size_t i) {
        const ClientState& c = clients[i];
        if (personalizer == nullptr || personalizer->kind == PersonalizerKind::none)
            acc[i] = evaluate(server.global, spec, c.shard->test);
        else
            acc[i] = personalized_accuracy(*personalizer, server.global.values, spec, c.split, c.shard->class_list,
                                           c.shard->test, weight_decay);
    });
    return acc;
}

namespace {

std::vector<std::size_t> select_participants(const FedSimConfig& cfg, std::size_t num_clients, int round) {
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    if (cfg.participation >= 1.0) return ids;
    const auto m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(cfg.participation * static_cast<double>(num_clients))), 1, num_clients);
    Rng rng(derive_seed(cfg.seed, 0x73656c656374, static_cast<std::uint64_t>(round)));  // "select"
    rng.shuffle(ids);
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
    return ids;
}

struct ClientOutcome {
    Vec params;        // fedavg: local model; feddyn: theta_i
    Vec new_state;     // scaffold c_i+ or feddyn g_i+
    ScaffoldDelta delta;
    double cost_units = 0.0;
};

LocalObjective client_objective(const FedSimConfig& cfg, const ClientState& client) {
    const Dataset& train = client.shard->train;
    if (cfg.personalizer.trains_with_meta_gradient())
        return maml_objective(cfg.model, train, client.split.support, cfg.personalizer.inner_lr, cfg.sgd.weight_decay);
    return data_objective(cfg.model, train, cfg.sgd.weight_decay);
}

ClientOutcome client_update(const FedSimConfig& cfg, const ServerState& server, const ClientState& client) {
    const std::size_t n = client.shard->train.size();
    const std::uint64_t seed = client_round_seed(cfg.seed, server.round + 1, client.client_id);
    const LocalObjective objective = client_objective(cfg, client);
    const auto& x = server.global.values;
    ClientOutcome out;
    switch (cfg.strategy.kind) {
        case StrategyKind::fedavg: {
            LocalRun run = run_local_sgd(x, n, cfg.sgd, seed, objective);
            out.params = std::move(run.params);
            out.cost_units = run.cost_units;
            break;
        }
        case StrategyKind::scaffold: {
            auto r = scaffold_client_update(x, client.c_i, server.c, n, cfg.sgd, seed, objective);
            out.delta = {std::move(r.y), std::move(r.delta_c)};
            out.new_state = std::move(r.new_c_i);
            out.cost_units = r.cost_units;
            break;
        }
        case StrategyKind::feddyn: {
            auto r = feddyn_client_update(x, client.g_i, n, cfg.strategy.feddyn_alpha, cfg.sgd, seed, objective);
            out.params = std::move(r.theta);
            out.new_state = std::move(r.new_g_i);
            out.cost_units = r.cost_units;
            break;
        }
    }
    return out;
}

// Server step; reduces outcomes in ascending client id order.
void server_update(const FedSimConfig& cfg, ServerState& server, std::vector<ClientState>& clients,
                   std::span<const std::size_t> participants, std::vector<ClientOutcome>& outcomes) {
    const int total = static_cast<int>(clients.size());
    switch (cfg.strategy.kind) {
        case StrategyKind::fedavg: {
            std::vector<WeightedParams> updates;
            updates.reserve(participants.size());
            for (std::size_t k = 0; k < participants.size(); ++k)
                updates.push_back({std::move(outcomes[k].params),
                                   static_cast<double>(clients[participants[k]].shard->train.size())});
            server.global.values = fedavg_aggregate(updates);
            break;
        }
        case StrategyKind::scaffold: {
            std::vector<ScaffoldDelta> deltas;
            deltas.reserve(participants.size());
            for (std::size_t k = 0; k < participants.size(); ++k) {
                deltas.push_back(std::move(outcomes[k].delta));
                clients[participants[k]].c_i = std::move(outcomes[k].new_state);
            }
            auto next = scaffold_server_update(server.global.values, server.c, deltas, total, cfg.strategy.server_lr);
            server.global.values = std::move(next.x);
            server.c = std::move(next.c);
            break;
        }
        case StrategyKind::feddyn: {
            std::vector<Vec> thetas;
            thetas.reserve(participants.size());
            for (std::size_t k = 0; k < participants.size(); ++k) {
                thetas.push_back(std::move(outcomes[k].params));
                clients[participants[k]].g_i = std::move(outcomes[k].new_state);
            }
            auto next = feddyn_server_update(server.h, thetas, server.global.values, cfg.strategy.feddyn_alpha, total);
            server.global.values = std::move(next.w);
            server.h = std::move(next.h);
            break;
        }
    }
    if (!server.global.all_finite()) throw NumericError("global model diverged (non-finite parameters)");
}

}  // namespace

ExperimentLog run_experiment(const FedSimConfig& cfg, std::span<const ClientShard> shards) {
    cfg.validate();
    if (shards.empty()) throw ArgumentError("run_experiment: no clients");
    ExperimentLog log;
    log.algorithm_name = cfg.algorithm_name;
    log.fingerprint = cfg.fingerprint;

    std::vector<ClientState> clients = make_client_states(shards, cfg);
    ServerState server;
    server.global = init_params(cfg.model);
    const std::size_t P = server.global.size();
    if (cfg.strategy.kind == StrategyKind::scaffold) server.c.assign(P, 0.0);
    if (cfg.strategy.kind == StrategyKind::feddyn) server.h.assign(P, 0.0);
    const PersonalizerConfig* personalizer =
        cfg.personalizer.kind == PersonalizerKind::none ? nullptr : &cfg.personalizer;

    using clock = std::chrono::steady_clock;
    try {
        for (int r = 1; r <= cfg.rounds; ++r) {
            const auto start = clock::now();
            const auto participants = select_participants(cfg, clients.size(), r);
            std::vector<ClientOutcome> outcomes(participants.size());
            parallel_for(participants.size(), cfg.threads, [&](std::size_t k) {
                outcomes[k] = client_update(cfg, server, clients[participants[k]]);
            });

            RoundRecord rec;
            rec.round = r;
            rec.participants = static_cast<int>(participants.size());
            rec.cost_units = cfg.aggregation_cost;
            for (const auto& o : outcomes) rec.cost_units += o.cost_units;

            server_update(cfg, server, clients, participants, outcomes);
            server.round = r;

            rec.evaluated = (r % cfg.eval_every == 0) || r == cfg.rounds;
            if (rec.evaluated) {
                rec.client_accuracies =
                    client_eval_pass(server, clients, cfg.model, personalizer, cfg.sgd.weight_decay, cfg.threads);
                rec.mean_client_accuracy =
                    std::accumulate(rec.client_accuracies.begin(), rec.client_accuracies.end(), 0.0) /
                    static_cast<double>(rec.client_accuracies.size());
            }
            rec.wall_clock_seconds = std::chrono::duration<double>(clock::now() - start).count();
            log.records.push_back(std::move(rec));

            const auto& last = log.records.back();
            if (cfg.early_stop_accuracy && last.evaluated && last.mean_client_accuracy >= *cfg.early_stop_accuracy)
                break;
        }
        log.completed = true;
    } catch (const NumericError& e) {
        log.completed = false;
        log.error = e.what();
    }
    log.final_params = std::move(server.global);
    return log;
}

nlohmann::json to_json(const ExperimentLog& log) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : log.records) {
        records.push_back({{"round", r.round},
                           {"evaluated", r.evaluated},
                           {"client_accuracies", r.client_accuracies},
                           {"mean_client_accuracy", r.mean_client_accuracy},
                           {"cost_units", r.cost_units},
                           {"participants", r.participants},
                           {"wall_clock_seconds", r.wall_clock_seconds}});
    }
    return {{"algorithm", log.algorithm_name},
            {"config_fingerprint", log.fingerprint},
            {"completed", log.completed},
            {"error", log.error},
            {"records", std::move(records)}};
}

void write_round_csv(std::ostream& out, const ExperimentLog& log) {
    out << "round,client_id,accuracy,cost_units,wall_clock\n";
    out.precision(17);
    for (const auto& r : log.records) {
        if (!r.evaluated) continue;
        for (std::size_t i = 0; i < r.client_accuracies.size(); ++i)
            out << r.round << ',' << i << ',' << r.client_accuracies[i] << ',' << r.cost_units << ','
                << r.wall_clock_seconds << '\n';
    }
}

}  // namespace hemfl
