#include <doctest.h>

#include <numeric>
#include <sstream>
#include <vector>

#include "hemfl/errors.hpp"
#include "hemfl/fedsim.hpp"
#include "support/test_support.hpp"

using namespace hemfl;

namespace {

FedSimConfig base_config(StrategyKind kind, int rounds) {
    FedSimConfig cfg;
    cfg.model = ModelSpec{ModelKind::linear, 4, 4, 0, 3, 0.05};
    cfg.sgd = SgdConfig{0.1, 8, 1, 0.0};
    cfg.strategy.kind = kind;
    cfg.rounds = rounds;
    cfg.seed = 42;
    return cfg;
}

std::vector<ClientShard> shards_for(int clients, std::uint64_t seed) {
    const TrainTestData data = split_per_class(generate_synthetic(4, 4, 40, 2.5, seed), 24);
    return partition(data, PartitionSpec{clients, 2, seed});
}

ClientShard copy_shard(const ClientShard& s, int id) {
    ClientShard out = s;
    out.client_id = id;
    return out;
}

}  // namespace

TEST_CASE("zero rounds produce an empty completed log") {
    const auto shards = shards_for(4, 1);
    const auto log = run_experiment(base_config(StrategyKind::fedavg, 0), shards);
    CHECK(log.completed);
    CHECK(log.records.empty());
    CHECK(log.final_params.values == init_params(base_config(StrategyKind::fedavg, 0).model).values);
}

TEST_CASE("one-client fedavg equals centralized sgd") {
    const auto shards = shards_for(1, 2);
    FedSimConfig cfg = base_config(StrategyKind::fedavg, 1);
    cfg.sgd.local_epochs = 3;
    const auto log = run_experiment(cfg, shards);
    const auto central = sgd_train(init_params(cfg.model), cfg.model, shards[0].train, cfg.sgd,
                                   client_round_seed(cfg.seed, 1, 0));
    CHECK(log.final_params.values == central.params.values);
    CHECK(log.records[0].cost_units == central.cost_units + cfg.aggregation_cost);
}

TEST_CASE("scaffold on identical clients follows the fedavg trajectory") {
    const auto base = shards_for(1, 3);
    const std::vector<ClientShard> twins{copy_shard(base[0], 0), copy_shard(base[0], 1)};
    // A full batch makes both clients' local runs identical regardless of their shuffle seeds.
    FedSimConfig avg = base_config(StrategyKind::fedavg, 10);
    avg.sgd.batch_size = static_cast<int>(base[0].train.size());
    avg.sgd.local_epochs = 3;
    FedSimConfig scaf = avg;
    scaf.strategy.kind = StrategyKind::scaffold;
    const auto a = run_experiment(avg, twins);
    const auto s = run_experiment(scaf, twins);
    REQUIRE(a.records.size() == 10);
    CHECK(s.final_params.values == a.final_params.values);
    for (std::size_t r = 0; r < 10; ++r) CHECK(s.records[r].client_accuracies == a.records[r].client_accuracies);
}

TEST_CASE("log structure") {
    const auto shards = shards_for(6, 4);
    FedSimConfig cfg = base_config(StrategyKind::feddyn, 7);
    cfg.eval_every = 3;
    const auto log = run_experiment(cfg, shards);
    REQUIRE(log.records.size() == 7);
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const auto& r = log.records[i];
        CHECK(r.round == static_cast<int>(i) + 1);
        CHECK(r.participants == 6);
        CHECK(r.evaluated == (r.round % 3 == 0 || r.round == 7));
        if (r.evaluated) {
            REQUIRE(r.client_accuracies.size() == 6);
            const double mean = std::accumulate(r.client_accuracies.begin(), r.client_accuracies.end(), 0.0) / 6.0;
            CHECK(r.mean_client_accuracy == doctest::Approx(mean).epsilon(1e-15));
        } else {
            CHECK(r.client_accuracies.empty());
        }
        double expected_cost = cfg.aggregation_cost;
        for (const auto& s : shards) expected_cost += static_cast<double>(s.train.size());
        CHECK(r.cost_units == expected_cost);
    }
    std::ostringstream csv;
    write_round_csv(csv, log);
    const std::string text = csv.str();
    CHECK(text.rfind("round,client_id,accuracy,cost_units,wall_clock\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 6);
    const auto j = to_json(log);
    CHECK(j["records"].size() == 7);
    CHECK(j["completed"] == true);
}

TEST_CASE("determinism and thread independence") {
    const auto shards = shards_for(5, 5);
    for (StrategyKind kind : {StrategyKind::fedavg, StrategyKind::scaffold, StrategyKind::feddyn}) {
        FedSimConfig cfg = base_config(kind, 4);
        cfg.participation = 0.6;
        cfg.personalizer.kind = PersonalizerKind::maml;
        const auto one = run_experiment(cfg, shards);
        cfg.threads = 4;
        const auto many = run_experiment(cfg, shards);
        CHECK(one.final_params.values == many.final_params.values);
        for (std::size_t r = 0; r < one.records.size(); ++r) {
            CHECK(one.records[r].client_accuracies == many.records[r].client_accuracies);
            CHECK(one.records[r].participants == 3);
        }
    }
}

TEST_CASE("evaluation-time personalizers leave training untouched") {
    const auto shards = shards_for(4, 6);
    const FedSimConfig plain = base_config(StrategyKind::fedavg, 3);
    FedSimConfig proto = plain;
    proto.personalizer.kind = PersonalizerKind::proto;
    FedSimConfig maml_eval = plain;
    maml_eval.personalizer.kind = PersonalizerKind::maml;
    maml_eval.personalizer.mode = MamlMode::eval;
    FedSimConfig maml_idle = maml_eval;
    maml_idle.personalizer.inner_steps = 0;

    const auto a = run_experiment(plain, shards);
    const auto p = run_experiment(proto, shards);
    const auto m = run_experiment(maml_eval, shards);
    const auto idle = run_experiment(maml_idle, shards);
    CHECK(p.final_params.values == a.final_params.values);
    CHECK(m.final_params.values == a.final_params.values);
    for (std::size_t r = 0; r < a.records.size(); ++r) {
        CHECK(idle.records[r].client_accuracies == a.records[r].client_accuracies);
        CHECK(p.records[r].cost_units == a.records[r].cost_units);
    }
}

TEST_CASE("early stop and divergence") {
    const auto shards = shards_for(4, 7);
    FedSimConfig cfg = base_config(StrategyKind::fedavg, 50);
    cfg.early_stop_accuracy = 0.05;
    const auto stopped = run_experiment(cfg, shards);
    CHECK(stopped.completed);
    CHECK(stopped.records.size() == 1);

    FedSimConfig wild = base_config(StrategyKind::fedavg, 5);
    wild.sgd.learning_rate = 1e308;
    wild.model.init_scale = 1.0;
    const auto diverged = run_experiment(wild, shards);
    CHECK_FALSE(diverged.completed);
    CHECK_FALSE(diverged.error.empty());
}

TEST_CASE("invalid simulator settings") {
    const auto shards = shards_for(2, 8);
    FedSimConfig cfg = base_config(StrategyKind::fedavg, 2);
    cfg.participation = 0.0;
    CHECK_THROWS_AS(run_experiment(cfg, shards), ArgumentError);
    cfg = base_config(StrategyKind::scaffold, 2);
    cfg.sgd.learning_rate = 0.0;
    CHECK_THROWS_AS(run_experiment(cfg, shards), ArgumentError);
    std::vector<ClientShard> empty_client{copy_shard(shards[0], 0)};
    empty_client[0].test = Dataset(4, 4);
    CHECK_THROWS_AS(run_experiment(base_config(StrategyKind::fedavg, 1), empty_client), ArgumentError);
}
