#include "hemfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemfl/errors.hpp"
#include "hemfl/rng.hpp"

namespace hemfl {

std::string to_string(ModelKind kind) { return kind == ModelKind::linear ? "linear" : "mlp"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "linear") return ModelKind::linear;
    if (name == "mlp") return ModelKind::mlp;
    throw ArgumentError("unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
    if (n_features <= 0) throw ArgumentError("model: n_features must be positive");
    if (num_classes <= 0) throw ArgumentError("model: num_classes must be positive");
    if (kind == ModelKind::mlp && hidden_units <= 0) throw ArgumentError("model: mlp requires hidden_units > 0");
    if (kind == ModelKind::linear && hidden_units != 0)
        throw ArgumentError("model: hidden_units is only valid for mlp");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ArgumentError("model: init_scale must be >= 0");
}

void SgdConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ArgumentError("sgd: learning_rate must be finite and non-negative");
    if (batch_size < 1) throw ArgumentError("sgd: batch_size must be >= 1");
    if (local_epochs < 1) throw ArgumentError("sgd: local_epochs must be >= 1");
    if (!(weight_decay >= 0.0)) throw ArgumentError("sgd: weight_decay must be >= 0");
}

bool ModelParams::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
    spec.validate();
    const auto d = static_cast<std::size_t>(spec.n_features);
    const auto C = static_cast<std::size_t>(spec.num_classes);
    if (spec.kind == ModelKind::linear) return {{"W", C, d, false}, {"b", C, 1, true}};
    const auto H = static_cast<std::size_t>(spec.hidden_units);
    return {{"W1", H, d, false}, {"b1", H, 1, true}, {"W2", C, H, false}, {"b2", C, 1, true}};
}

std::size_t parameter_count(const ModelSpec& spec) {
    std::size_t n = 0;
    for (const auto& layer : layer_shapes(spec)) n += layer.size();
    return n;
}

ModelParams init_params(const ModelSpec& spec) {
    ModelParams p;
    p.shape = layer_shapes(spec);
    Rng rng(spec.init_seed);
    for (const auto& layer : p.shape) {
        for (std::size_t i = 0; i < layer.size(); ++i)
            p.values.push_back(layer.is_bias ? 0.0 : rng.uniform(-spec.init_scale, spec.init_scale));
    }
    return p;
}

namespace {

void check_shapes(std::span<const double> params, const ModelSpec& spec, const Dataset& data) {
    if (params.size() != parameter_count(spec))
        throw ArgumentError("parameter vector length does not match the model spec");
    if (data.n_features() != static_cast<std::size_t>(spec.n_features) || data.num_classes() != spec.num_classes)
        throw ArgumentError("dataset shape does not match the model spec");
}

void check_finite(std::span<const double> params) {
    for (double v : params)
        if (!std::isfinite(v)) throw NumericError("non-finite model parameter");
}

// z = W x + b for a rows x cols weight block followed by its bias.
void affine(const double* W, const double* b, std::size_t rows, std::size_t cols, std::span<const double> x,
            double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        double acc = b[r];
        for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
        out[r] = acc;
    }
}

// Replaces logits by softmax probabilities; returns log-sum-exp.
double softmax_inplace(std::span<double> z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return zmax + std::log(sum);
}

struct Layout {
    std::size_t d, C, H;
    // offsets into the flat vector
    std::size_t W1, b1, W2, b2;
};

Layout layout_of(const ModelSpec& spec) {
    Layout l{};
    l.d = static_cast<std::size_t>(spec.n_features);
    l.C = static_cast<std::size_t>(spec.num_classes);
    l.H = static_cast<std::size_t>(spec.hidden_units);
    if (spec.kind == ModelKind::linear) {
        l.W2 = 0;
        l.b2 = l.C * l.d;
    } else {
        l.W1 = 0;
        l.b1 = l.H * l.d;
        l.W2 = l.b1 + l.H;
        l.b2 = l.W2 + l.C * l.H;
    }
    return l;
}

double weight_penalty(std::span<const double> params, const ModelSpec& spec, std::vector<double>* grad,
                      double weight_decay) {
    if (weight_decay == 0.0) return 0.0;
    double sq = 0.0;
    std::size_t off = 0;
    for (const auto& layer : layer_shapes(spec)) {
        if (!layer.is_bias) {
            for (std::size_t i = off; i < off + layer.size(); ++i) {
                sq += params[i] * params[i];
                if (grad) (*grad)[i] += weight_decay * params[i];
            }
        }
        off += layer.size();
    }
    return 0.5 * weight_decay * sq;
}

// Shared forward/backward; grad may be null for loss-only evaluation.
double forward_backward(std::span<const double> params, const ModelSpec& spec, const Dataset& data,
                        std::span<const std::size_t> rows, double weight_decay, std::vector<double>* grad) {
    if (rows.empty()) throw ArgumentError("loss_and_grad: empty batch");
    check_shapes(params, spec, data);
    check_finite(params);
    const Layout L = layout_of(spec);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    const double* P = params.data();

    std::vector<double> hidden_pre(L.H), hidden(L.H), probs(L.C), grad_hidden(L.H);
    double total = 0.0;
    for (std::size_t r : rows) {
        const auto x = data.row(r);
        const auto y = static_cast<std::size_t>(data.label(r));
        std::span<const double> features = x;
        if (spec.kind == ModelKind::mlp) {
            affine(P + L.W1, P + L.b1, L.H, L.d, x, hidden_pre.data());
            for (std::size_t h = 0; h < L.H; ++h) hidden[h] = hidden_pre[h] > 0.0 ? hidden_pre[h] : 0.0;
            features = hidden;
        }
        const std::size_t in = features.size();
        affine(P + L.W2, P + L.b2, L.C, in, features, probs.data());
        const double logit_y = probs[y];
        total += softmax_inplace(probs) - logit_y;
        if (!grad) continue;

        double* G = grad->data();
        probs[y] -= 1.0;  // dL/dz
        for (std::size_t c = 0; c < L.C; ++c) {
            const double gz = probs[c] * inv_n;
            double* gw = G + L.W2 + c * in;
            for (std::size_t j = 0; j < in; ++j) gw[j] += gz * features[j];
            G[L.b2 + c] += gz;
        }
        if (spec.kind == ModelKind::mlp) {
            std::fill(grad_hidden.begin(), grad_hidden.end(), 0.0);
            for (std::size_t c = 0; c < L.C; ++c) {
                const double* w = P + L.W2 + c * L.H;
                for (std::size_t h = 0; h < L.H; ++h) grad_hidden[h] += w[h] * probs[c];
            }
            for (std::size_t h = 0; h < L.H; ++h) {
                if (hidden_pre[h] <= 0.0) continue;
                const double ga = grad_hidden[h] * inv_n;
                double* gw = G + L.W1 + h * L.d;
                for (std::size_t j = 0; j < L.d; ++j) gw[j] += ga * x[j];
                G[L.b1 + h] += ga;
            }
        }
    }
    return total * inv_n + weight_penalty(params, spec, grad, weight_decay);
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

}  // namespace

LossGrad loss_and_grad(std::span<const double> params, const ModelSpec& spec, const Dataset& data,
                       std::span<const std::size_t> rows, double weight_decay) {
    LossGrad out;
    out.grad.assign(params.size(), 0.0);
    out.loss = forward_backward(params, spec, data, rows, weight_decay, &out.grad);
    if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
    return out;
}

LossGrad loss_and_grad(const ModelParams& params, const ModelSpec& spec, const Dataset& batch, double weight_decay) {
    const auto rows = all_rows(batch.size());
    return loss_and_grad(params.values, spec, batch, rows, weight_decay);
}

double loss(std::span<const double> params, const ModelSpec& spec, const Dataset& data,
            std::span<const std::size_t> rows, double weight_decay) {
    return forward_backward(params, spec, data, rows, weight_decay, nullptr);
}

std::size_t embedding_dim(const ModelSpec& spec) {
    return spec.kind == ModelKind::linear ? static_cast<std::size_t>(spec.n_features)
                                          : static_cast<std::size_t>(spec.hidden_units);
}

std::vector<double> embed(std::span<const double> params, const ModelSpec& spec, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(spec.n_features)) throw ArgumentError("embed: feature width mismatch");
    if (spec.kind == ModelKind::linear) return {x.begin(), x.end()};
    const Layout L = layout_of(spec);
    std::vector<double> h(L.H);
    affine(params.data() + L.W1, params.data() + L.b1, L.H, L.d, x, h.data());
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    return h;
}

int predict(std::span<const double> params, const ModelSpec& spec, std::span<const double> x) {
    const Layout L = layout_of(spec);
    const auto features = embed(params, spec, x);
    std::vector<double> z(L.C);
    affine(params.data() + L.W2, params.data() + L.b2, L.C, features.size(), features, z.data());
    // max_element returns the first maximum, i.e. the lowest class id on ties
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double evaluate(std::span<const double> params, const ModelSpec& spec, const Dataset& test) {
    if (test.empty()) throw ArgumentError("evaluate: empty test set");
    check_shapes(params, spec, test);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (predict(params, spec, test.row(i)) == test.label(i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

LocalObjective data_objective(const ModelSpec& spec, const Dataset& data, double weight_decay) {
    return [&spec, &data, weight_decay](std::span<const double> theta, std::span<const std::size_t> rows) {
        auto lg = loss_and_grad(theta, spec, data, rows, weight_decay);
        return ObjectiveEval{lg.loss, std::move(lg.grad), static_cast<double>(rows.size())};
    };
}

int local_step_count(std::size_t n, const SgdConfig& cfg) {
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    return cfg.local_epochs * static_cast<int>((n + b - 1) / b);
}

LocalRun run_local_sgd(std::span<const double> start, std::size_t n, const SgdConfig& cfg, std::uint64_t seed,
                       const LocalObjective& objective) {
    cfg.validate();
    if (n == 0) throw ArgumentError("sgd: empty training shard");
    LocalRun run;
    run.params.assign(start.begin(), start.end());
    std::vector<std::size_t> order = all_rows(n);
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> batch;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < n; lo += b) {
            const std::size_t hi = std::min(n, lo + b);
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
            // canonical summation order inside a batch
            std::sort(batch.begin(), batch.end());
            const ObjectiveEval eval = objective(run.params, batch);
            if (!std::isfinite(eval.loss)) throw NumericError("local training diverged (non-finite loss)");
            for (std::size_t k = 0; k < run.params.size(); ++k) run.params[k] -= cfg.learning_rate * eval.grad[k];
            run.cost_units += eval.cost_units;
            ++run.steps;
        }
    }
    check_finite(run.params);
    return run;
}

SgdResult sgd_train(const ModelParams& params, const ModelSpec& spec, const Dataset& train, const SgdConfig& cfg,
                    std::uint64_t seed) {
    check_shapes(params.values, spec, train);
    auto run = run_local_sgd(params.values, train.size(), cfg, seed, data_objective(spec, train, cfg.weight_decay));
    return {ModelParams{std::move(run.params), params.shape}, run.cost_units};
}

}  // namespace hemfl
