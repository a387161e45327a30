#include "intrafair/nn.hpp"

#include "intrafair/errors.hpp"
#include "intrafair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace intrafair {

std::string_view to_string(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::linear: return "linear";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (auto k : {LayerKind::linear, LayerKind::relu, LayerKind::dropout, LayerKind::batchnorm, LayerKind::sigmoid})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// MlpModel

std::vector<std::size_t> MlpModel::hidden_linear_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].spec.kind == LayerKind::linear) out.push_back(i);
    if (!out.empty()) out.pop_back();  // output layer
    return out;
}

bool MlpModel::is_pruned(UnitRef u) const {
    if (u.layer < 0 || static_cast<std::size_t>(u.layer) >= pruned.size() || u.unit < 0 ||
        static_cast<std::size_t>(u.unit) >= pruned[u.layer].size())
        throw PreconditionError("unit (" + std::to_string(u.layer) + "," + std::to_string(u.unit) + ") out of range");
    return pruned[u.layer][u.unit] != 0;
}

void MlpModel::prune(UnitRef u) {
    (void)is_pruned(u);
    pruned[u.layer][u.unit] = 1;
}

std::size_t MlpModel::num_pruned() const noexcept {
    std::size_t n = 0;
    for (const auto& m : pruned) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
    return n;
}

std::size_t MlpModel::num_hidden_units() const noexcept {
    std::size_t n = 0;
    for (const auto& m : pruned) n += m.size();
    return n;
}

std::vector<UnitRef> MlpModel::active_units() const {
    std::vector<UnitRef> out;
    for (std::size_t l = 0; l < pruned.size(); ++l)
        for (std::size_t j = 0; j < pruned[l].size(); ++j)
            if (!pruned[l][j]) out.push_back({static_cast<int>(l), static_cast<int>(j)});
    return out;
}

std::size_t MlpModel::num_parameters() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.spec.kind == LayerKind::linear) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        if (l.spec.kind == LayerKind::batchnorm) n += static_cast<std::size_t>(l.scale.size() + l.shift.size());
    }
    return n;
}

void MlpModel::validate() const {
    if (input_width <= 0) throw PreconditionError("model input width must be positive");
    if (layers.size() < 2) throw PreconditionError("model needs at least a linear layer and a sigmoid");
    if (layers.back().spec.kind != LayerKind::sigmoid)
        throw PreconditionError("final layer of a classifier must be sigmoid");
    const auto& head = layers[layers.size() - 2];
    if (head.spec.kind != LayerKind::linear || head.spec.width != 1)
        throw PreconditionError("sigmoid must follow a width-1 linear layer");
    int width = input_width;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const auto where = " (layer " + std::to_string(i) + ")";
        switch (l.spec.kind) {
            case LayerKind::linear:
                if (l.spec.width <= 0) throw PreconditionError("linear width must be positive" + where);
                if (l.weight.rows() != l.spec.width || l.weight.cols() != width || l.bias.size() != l.spec.width)
                    throw PreconditionError("linear parameter shape mismatch" + where);
                if (!l.weight.allFinite() || !l.bias.allFinite())
                    throw PreconditionError("non-finite linear parameters" + where);
                width = l.spec.width;
                break;
            case LayerKind::batchnorm:
                if (l.spec.width != width) throw PreconditionError("batchnorm width mismatch" + where);
                if (l.scale.size() != width || l.shift.size() != width || l.running_mean.size() != width ||
                    l.running_var.size() != width)
                    throw PreconditionError("batchnorm parameter shape mismatch" + where);
                if ((l.running_var.array() < 0.0).any()) throw PreconditionError("negative running variance" + where);
                if (!l.scale.allFinite() || !l.shift.allFinite() || !l.running_mean.allFinite() ||
                    !l.running_var.allFinite())
                    throw PreconditionError("non-finite batchnorm parameters" + where);
                break;
            case LayerKind::dropout:
                if (!(l.spec.dropout_p >= 0.0 && l.spec.dropout_p < 1.0))
                    throw PreconditionError("dropout probability must be in [0,1)" + where);
                break;
            case LayerKind::sigmoid:
                if (i + 1 != layers.size()) throw PreconditionError("sigmoid is only allowed as the final layer");
                break;
            case LayerKind::relu: break;
        }
    }
    const auto hidden = hidden_linear_layers();
    if (pruned.size() != hidden.size()) throw PreconditionError("prune mask layer count mismatch");
    for (std::size_t h = 0; h < hidden.size(); ++h)
        if (pruned[h].size() != static_cast<std::size_t>(layers[hidden[h]].spec.width))
            throw PreconditionError("prune mask width mismatch in hidden layer " + std::to_string(h));
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw PreconditionError("threshold must lie in [0,1]");
}

MlpModel make_mlp(int input_width, std::span<const LayerSpec> specs, std::uint64_t seed) {
    MlpModel model;
    model.input_width = input_width;
    Rng rng(seed);
    int width = input_width;
    for (const auto& spec : specs) {
        Layer layer;
        layer.spec = spec;
        if (spec.kind == LayerKind::linear) {
            if (spec.width <= 0 || width <= 0) throw PreconditionError("linear widths must be positive");
            const double bound = 1.0 / std::sqrt(static_cast<double>(width));
            std::uniform_real_distribution<double> u(-bound, bound);
            layer.weight.resize(spec.width, width);
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = u(rng);
            layer.bias.resize(spec.width);
            for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = u(rng);
            width = spec.width;
        } else if (spec.kind == LayerKind::batchnorm) {
            layer.spec.width = width;
            layer.scale = Vector::Ones(width);
            layer.shift = Vector::Zero(width);
            layer.running_mean = Vector::Zero(width);
            layer.running_var = Vector::Ones(width);
        }
        model.layers.push_back(std::move(layer));
    }
    for (auto idx : model.hidden_linear_layers())
        model.pruned.emplace_back(static_cast<std::size_t>(model.layers[idx].spec.width), std::uint8_t{0});
    model.validate();
    return model;
}

std::vector<LayerSpec> fc_architecture(int hidden_layers, int width, double dropout_p) {
    std::vector<LayerSpec> specs;
    for (int i = 0; i < hidden_layers; ++i) {
        specs.push_back(LayerSpec::linear(width));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::dropout(dropout_p));
        specs.push_back(LayerSpec::batchnorm(width));
    }
    specs.push_back(LayerSpec::linear(1));
    specs.push_back(LayerSpec::sigmoid());
    return specs;
}

// ---------------------------------------------------------------------------
// Forward / backward engine

namespace {

struct Tape {
    std::vector<Matrix> input;  // input seen by each layer (masked, for linear)
    std::vector<Matrix> aux;    // dropout: scaled keep mask; batchnorm: normalised input
    std::vector<Vector> inv_std;
    Vector logits;
};

struct BatchStats {
    Vector mean;
    Vector var_unbiased;
};

/// For each layer, the prune mask applied to its input (non-null only for
/// linear layers fed by a hidden linear layer).
std::vector<const std::vector<std::uint8_t>*> input_masks(const MlpModel& model) {
    std::vector<const std::vector<std::uint8_t>*> out(model.layers.size(), nullptr);
    const auto hidden = model.hidden_linear_layers();
    std::size_t h = 0;
    const std::vector<std::uint8_t>* current = nullptr;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].spec.kind != LayerKind::linear) continue;
        out[i] = current;
        current = (h < hidden.size() && hidden[h] == i) ? &model.pruned[h++] : nullptr;
    }
    return out;
}

bool any_pruned(const std::vector<std::uint8_t>& mask) {
    return std::any_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
}

void apply_mask(Matrix& m, const std::vector<std::uint8_t>& mask) {
    for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) m.col(static_cast<Eigen::Index>(j)).setZero();
}

bool has_dropout(const MlpModel& model) {
    return std::any_of(model.layers.begin(), model.layers.end(), [](const Layer& l) {
        return l.spec.kind == LayerKind::dropout && l.spec.dropout_p > 0.0;
    });
}

Vector forward_pass(const MlpModel& model, const Matrix& x, Mode mode, Rng* rng, Tape* tape,
                    std::vector<BatchStats>* stats) {
    if (x.cols() != model.input_width)
        throw PreconditionError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(model.input_width));
    if (x.rows() == 0) throw PreconditionError("empty input batch");
    if (!x.allFinite()) throw PreconditionError("non-finite input features");
    if (mode == Mode::train && rng == nullptr && has_dropout(model))
        throw PreconditionError("train-mode forward with dropout requires an rng");

    const auto masks = input_masks(model);
    const auto n = x.rows();
    const double dn = static_cast<double>(n);
    if (tape) {
        tape->input.assign(model.layers.size(), Matrix());
        tape->aux.assign(model.layers.size(), Matrix());
        tape->inv_std.assign(model.layers.size(), Vector());
    }
    if (stats) stats->assign(model.layers.size(), BatchStats{});

    Matrix cur = x;
    Vector logits;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        switch (layer.spec.kind) {
            case LayerKind::linear: {
                if (masks[i] && any_pruned(*masks[i])) apply_mask(cur, *masks[i]);
                Matrix z = cur * layer.weight.transpose();
                z.rowwise() += layer.bias.transpose();
                if (tape) tape->input[i] = std::move(cur);
                cur = std::move(z);
                break;
            }
            case LayerKind::relu:
                if (tape) tape->input[i] = cur;
                cur = cur.cwiseMax(0.0);
                break;
            case LayerKind::dropout: {
                const double p = layer.spec.dropout_p;
                if (mode != Mode::train || p <= 0.0) break;
                std::bernoulli_distribution keep(1.0 - p);
                Matrix mask(cur.rows(), cur.cols());
                const double scale = 1.0 / (1.0 - p);
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(*rng) ? scale : 0.0;
                cur = cur.cwiseProduct(mask);
                if (tape) tape->aux[i] = std::move(mask);
                break;
            }
            case LayerKind::batchnorm: {
                Vector mean, inv_std;
                if (mode == Mode::train) {
                    mean = cur.colwise().mean().transpose();
                    Matrix centered = cur.rowwise() - mean.transpose();
                    Vector var = centered.colwise().squaredNorm().transpose() / dn;
                    inv_std = (var.array() + kBatchNormEpsilon).rsqrt().matrix();
                    if (stats) {
                        (*stats)[i].mean = mean;
                        (*stats)[i].var_unbiased = n > 1 ? Vector(var * (dn / (dn - 1.0))) : var;
                    }
                    cur = std::move(centered);
                } else {
                    mean = layer.running_mean;
                    inv_std = (layer.running_var.array() + kBatchNormEpsilon).rsqrt().matrix();
                    cur.rowwise() -= mean.transpose();
                }
                cur = cur * inv_std.asDiagonal();
                if (tape) {
                    tape->aux[i] = cur;
                    tape->inv_std[i] = inv_std;
                }
                cur = cur * layer.scale.asDiagonal();
                cur.rowwise() += layer.shift.transpose();
                break;
            }
            case LayerKind::sigmoid:
                logits = cur.col(0);
                break;
        }
    }
    if (!logits.allFinite()) throw DivergenceError("forward pass produced non-finite logits");
    if (tape) tape->logits = logits;
    return logits;
}

Vector sigmoid(const Vector& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

/// Backpropagates d loss / d logit through the stack recorded in `tape`.
void backward_pass(const MlpModel& model, const Tape& tape, const Vector& dlogit, Mode mode, GradReport& out) {
    const auto masks = input_masks(model);
    const auto hidden = model.hidden_linear_layers();
    out.param_grads.assign(model.layers.size(), LayerGrad{});
    out.preact_grads.assign(hidden.size(), Vector());
    const double dn = static_cast<double>(dlogit.size());

    Matrix g = dlogit;  // N x 1
    // Skip the trailing sigmoid: dlogit already accounts for it.
    for (std::size_t idx = model.layers.size() - 1; idx-- > 0;) {
        const auto& layer = model.layers[idx];
        auto& lg = out.param_grads[idx];
        switch (layer.spec.kind) {
            case LayerKind::linear: {
                const auto h = std::find(hidden.begin(), hidden.end(), idx);
                if (h != hidden.end())
                    out.preact_grads[static_cast<std::size_t>(h - hidden.begin())] = g.colwise().mean().transpose();
                lg.weight = g.transpose() * tape.input[idx];
                lg.bias = g.colwise().sum().transpose();
                if (idx == 0) break;
                Matrix gin = g * layer.weight;
                if (masks[idx] && any_pruned(*masks[idx])) apply_mask(gin, *masks[idx]);
                g = std::move(gin);
                break;
            }
            case LayerKind::relu:
                g = (tape.input[idx].array() > 0.0).select(g, 0.0);
                break;
            case LayerKind::dropout:
                if (mode == Mode::train && layer.spec.dropout_p > 0.0) g = g.cwiseProduct(tape.aux[idx]);
                break;
            case LayerKind::batchnorm: {
                const Matrix& xhat = tape.aux[idx];
                lg.scale = g.cwiseProduct(xhat).colwise().sum().transpose();
                lg.shift = g.colwise().sum().transpose();
                const Vector& inv_std = tape.inv_std[idx];
                if (mode == Mode::eval) {
                    g = g * (layer.scale.cwiseProduct(inv_std)).asDiagonal();
                } else {
                    Matrix dxhat = g * layer.scale.asDiagonal();
                    const RowVector sum_d = dxhat.colwise().sum();
                    const RowVector sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                    Matrix gin = dn * dxhat;
                    gin.rowwise() -= sum_d;
                    gin -= xhat * sum_dx.asDiagonal();
                    g = gin * (inv_std / dn).asDiagonal();
                }
                break;
            }
            case LayerKind::sigmoid: break;
        }
    }
}

/// Stable mean BCE from logits plus its logit gradient.
double bce_from_logits(const Vector& logits, std::span<const int> y, Vector* dlogit) {
    const auto n = logits.size();
    double loss = 0.0;
    if (dlogit) dlogit->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = logits[i];
        const double yi = y[static_cast<std::size_t>(i)];
        loss += std::max(z, 0.0) - z * yi + std::log1p(std::exp(-std::abs(z)));
        if (dlogit) (*dlogit)[i] = (1.0 / (1.0 + std::exp(-z)) - yi) / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

BiasMeasure measure_of(LossKind k) {
    if (k == LossKind::proxy_spd) return BiasMeasure::spd;
    if (k == LossKind::proxy_eod) return BiasMeasure::eod;
    throw PreconditionError("loss is not a bias proxy");
}

void check_batch(const MlpModel& model, const Dataset& batch) {
    if (batch.empty()) throw PreconditionError("empty batch");
    if (static_cast<int>(batch.num_features()) != model.input_width)
        throw PreconditionError("batch feature count does not match model input width");
    if (batch.labels.size() != static_cast<std::size_t>(batch.features.rows()) ||
        batch.protected_attr.size() != batch.labels.size())
        throw PreconditionError("batch row counts disagree");
}

}  // namespace

Vector forward_logits(const MlpModel& model, const Matrix& x, Mode mode, Rng* rng) {
    return forward_pass(model, x, mode, rng, nullptr, nullptr);
}

Vector forward(const MlpModel& model, const Matrix& x, Mode mode, Rng* rng) {
    return sigmoid(forward_logits(model, x, mode, rng));
}

GradReport grad_params(const MlpModel& model, LossKind loss, const Dataset& batch, Mode mode, Rng* rng) {
    check_batch(model, batch);
    Vector weights;
    if (loss != LossKind::bce) weights = proxy_weights(measure_of(loss), batch.labels, batch.protected_attr);

    Tape tape;
    forward_pass(model, batch.features, mode, rng, &tape, nullptr);
    GradReport report;
    Vector dlogit;
    if (loss == LossKind::bce) {
        report.loss = bce_from_logits(tape.logits, batch.labels, &dlogit);
    } else {
        const Vector s = sigmoid(tape.logits);
        report.loss = weights.dot(s);
        dlogit = weights.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
    }
    if (!std::isfinite(report.loss)) throw DivergenceError("non-finite loss");
    backward_pass(model, tape, dlogit, mode, report);
    return report;
}

GradReport grad_preactivations(const MlpModel& model, LossKind proxy, const Dataset& data) {
    if (proxy == LossKind::bce) throw PreconditionError("grad_preactivations needs a bias proxy loss");
    return grad_params(model, proxy, data, Mode::eval, nullptr);
}

double bce_loss(const MlpModel& model, const Dataset& data) {
    check_batch(model, data);
    return bce_from_logits(forward_logits(model, data.features), data.labels, nullptr);
}

// ---------------------------------------------------------------------------
// Optimisers

void AdamOptimizer::step(MlpModel& model, const GradReport& grads, double direction) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for_each_parameter(model, grads, [&](std::size_t slot, double* p, const double* g, Eigen::Index n) {
        if (slot >= m_.size()) {
            m_.resize(slot + 1);
            v_.resize(slot + 1);
        }
        if (m_[slot].size() != n) {
            m_[slot] = Vector::Zero(n);
            v_[slot] = Vector::Zero(n);
        }
        auto& m = m_[slot];
        auto& v = v_[slot];
        for (Eigen::Index k = 0; k < n; ++k) {
            const double gk = direction * g[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
            v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
            p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
        }
    });
}

void sgd_step(MlpModel& model, const GradReport& grads, double learning_rate, double direction) {
    const double step = direction * learning_rate;
    for_each_parameter(model, grads, [&](std::size_t, double* p, const double* g, Eigen::Index n) {
        for (Eigen::Index k = 0; k < n; ++k) p[k] -= step * g[k];
    });
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (max_epochs < 1) throw PreconditionError("max_epochs must be >= 1");
    if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
    if (early_stop_patience < 1) throw PreconditionError("early_stop_patience must be >= 1");
    if (lr_plateau_patience < 1) throw PreconditionError("lr_plateau_patience must be >= 1");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) throw PreconditionError("lr_decay_factor must be in (0,1)");
}

MlpModel train(const MlpModel& init, const Dataset& train_data, const Dataset& valid_data, const TrainConfig& cfg,
               TrainHistory* history) {
    cfg.validate();
    init.validate();
    check_batch(init, train_data);
    check_batch(init, valid_data);

    MlpModel model = init;
    MlpModel best = init;
    double best_loss = bce_loss(model, valid_data);
    int best_epoch = -1;
    int since_best = 0;
    int plateau = 0;
    double plateau_best = best_loss;

    Rng rng(cfg.seed);
    AdamOptimizer adam(cfg.learning_rate);
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    Matrix xb;
    std::vector<int> yb;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            const auto m = static_cast<Eigen::Index>(stop - start);
            xb.resize(m, train_data.features.cols());
            yb.resize(static_cast<std::size_t>(m));
            for (Eigen::Index k = 0; k < m; ++k) {
                const auto r = order[start + static_cast<std::size_t>(k)];
                xb.row(k) = train_data.features.row(static_cast<Eigen::Index>(r));
                yb[static_cast<std::size_t>(k)] = train_data.labels[r];
            }
            Tape tape;
            std::vector<BatchStats> stats;
            forward_pass(model, xb, Mode::train, &rng, &tape, &stats);
            Vector dlogit;
            GradReport grads;
            grads.loss = bce_from_logits(tape.logits, yb, &dlogit);
            if (!std::isfinite(grads.loss))
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
            backward_pass(model, tape, dlogit, Mode::train, grads);
            adam.step(model, grads);
            for (std::size_t i = 0; i < model.layers.size(); ++i) {
                auto& l = model.layers[i];
                if (l.spec.kind != LayerKind::batchnorm) continue;
                l.running_mean = (1.0 - kBatchNormMomentum) * l.running_mean + kBatchNormMomentum * stats[i].mean;
                l.running_var = (1.0 - kBatchNormMomentum) * l.running_var + kBatchNormMomentum * stats[i].var_unbiased;
            }
            epoch_loss += grads.loss * static_cast<double>(m);
        }
        epoch_loss /= static_cast<double>(order.size());
        const double vloss = bce_loss(model, valid_data);
        if (!std::isfinite(vloss))
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite validation loss");
        if (history) {
            history->train_loss.push_back(epoch_loss);
            history->valid_loss.push_back(vloss);
            history->learning_rate.push_back(adam.learning_rate());
        }
        if (vloss < best_loss) {
            best_loss = vloss;
            best = model;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
        if (vloss < plateau_best) {
            plateau_best = vloss;
            plateau = 0;
        } else if (++plateau >= cfg.lr_plateau_patience) {
            adam.set_learning_rate(adam.learning_rate() * cfg.lr_decay_factor);
            plateau = 0;
        }
    }
    if (history) history->best_epoch = best_epoch;
    return best;
}

// ---------------------------------------------------------------------------

double select_threshold(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw PreconditionError("select_threshold: length mismatch");
    if (scores.empty()) throw PreconditionError("select_threshold: empty input");
    long pos = 0;
    for (int y : labels) pos += y;
    const long neg = static_cast<long>(labels.size()) - pos;
    if (pos == 0 || neg == 0) throw DegenerateGroupError("select_threshold: degenerate labels (single class)");

    // Positive-class counts of scores >= t for each grid t, via sorted sweep.
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double best_t = 0.0;
    double best_ba = -1.0;
    // Walk thresholds from high to low so the sweep pointer only advances; keep
    // the smallest t among ties by accepting equal BA.
    std::size_t k = 0;
    long tp = 0, fp = 0;
    for (int g = 100; g >= 0; --g) {
        const double t = static_cast<double>(g) / 100.0;
        while (k < idx.size() && scores[idx[k]] >= t) {
            if (labels[idx[k]]) ++tp;
            else ++fp;
            ++k;
        }
        const double ba = 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) +
                                 static_cast<double>(neg - fp) / static_cast<double>(neg));
        if (ba >= best_ba) {
            best_ba = ba;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace intrafair
