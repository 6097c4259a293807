#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hemfl/data.hpp"

namespace hemfl {

enum class ModelKind { linear, mlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    int n_features = 0;
    int num_classes = 0;
    int hidden_units = 0;  // mlp only
    std::uint64_t init_seed = 0;
    double init_scale = 0.01;

    void validate() const;
};

struct LayerShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 1;  // 1 for bias vectors
    bool is_bias = false;

    std::size_t size() const { return rows * cols; }
};

/// Flat parameter vector plus its layer layout.
struct ModelParams {
    std::vector<double> values;
    std::vector<LayerShape> shape;

    std::size_t size() const { return values.size(); }
    bool all_finite() const;
};

/// Layer layout for a spec: linear = W[C x d], b[C]; mlp = W1[H x d], b1[H], W2[C x H], b2[C].
std::vector<LayerShape> layer_shapes(const ModelSpec& spec);
std::size_t parameter_count(const ModelSpec& spec);

/// Weights ~ U(-init_scale, init_scale) from init_seed; biases zero.
ModelParams init_params(const ModelSpec& spec);

struct SgdConfig {
    double learning_rate = 0.05;
    int batch_size = 32;
    int local_epochs = 1;
    double weight_decay = 0.0;

    void validate() const;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean softmax cross-entropy over the selected rows (+ weight_decay/2 * ||W||^2 over weight matrices).
LossGrad loss_and_grad(std::span<const double> params, const ModelSpec& spec, const Dataset& data,
                       std::span<const std::size_t> rows, double weight_decay = 0.0);
LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Dataset& batch,
                       double weight_decay = 0.0);
/// Loss only, same definition as loss_and_grad.
double loss(std::span<const double> params, const ModelSpec& spec, const Dataset& data,
            std::span<const std::size_t> rows, double weight_decay = 0.0);

/// Argmax class for one row; ties go to the lowest class id.
int predict(std::span<const double> params, const ModelSpec& spec, std::span<const double> x);
/// Penultimate representation: raw features (linear) or hidden ReLU activations (mlp).
std::vector<double> embed(std::span<const double> params, const ModelSpec& spec, std::span<const double> x);
std::size_t embedding_dim(const ModelSpec& spec);

/// Fraction of argmax-correct predictions.
double evaluate(std::span<const double> params, const ModelSpec& spec, const Dataset& test);
inline double evaluate(const ModelParams& params, const ModelSpec& spec, const Dataset& test) {
    return evaluate(params.values, spec, test);
}

/// Objective value and gradient at theta over a batch of row indices.
struct ObjectiveEval {
    double loss = 0.0;
    std::vector<double> grad;
    double cost_units = 0.0;  // per-example gradient evaluations spent
};

using LocalObjective = std::function<ObjectiveEval(std::span<const double> theta, std::span<const std::size_t> rows)>;

/// Plain data objective: loss_and_grad on `data`, costing one unit per row.
LocalObjective data_objective(const ModelSpec& spec, const Dataset& data, double weight_decay);

struct LocalRun {
    std::vector<double> params;
    double cost_units = 0.0;
    int steps = 0;
};

/// Number of mini-batch steps sgd takes: E * ceil(n / batch_size).
int local_step_count(std::size_t n, const SgdConfig& cfg);

/// E epochs of seeded-shuffled mini-batch SGD over rows [0, n) with an arbitrary objective.
/// Throws NumericError when the loss or parameters become non-finite.
LocalRun run_local_sgd(std::span<const double> start, std::size_t n, const SgdConfig& cfg, std::uint64_t seed,
                       const LocalObjective& objective);

struct SgdResult {
    ModelParams params;
    double cost_units = 0.0;
};

SgdResult sgd_train(const ModelParams& params, const ModelSpec& spec, const Dataset& train, const SgdConfig& cfg,
                    std::uint64_t seed);

}  // namespace hemfl
