#pragma once

#include "intrafair/dataset.hpp"
#include "intrafair/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace intrafair {

enum class LayerKind { linear, relu, dropout, batchnorm, sigmoid };

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
    LayerKind kind = LayerKind::linear;
    int width = 0;           // linear / batchnorm
    double dropout_p = 0.0;  // dropout

    static LayerSpec linear(int width) { return {LayerKind::linear, width, 0.0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0.0}; }
    static LayerSpec dropout(double p) { return {LayerKind::dropout, 0, p}; }
    static LayerSpec batchnorm(int width) { return {LayerKind::batchnorm, width, 0.0}; }
    static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0.0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEpsilon = 1e-5;

/// One layer with its parameters. Only the members relevant to `spec.kind`
/// are populated.
struct Layer {
    LayerSpec spec;
    Matrix weight;  // linear: out x in
    Vector bias;    // linear
    Vector scale;   // batchnorm gamma
    Vector shift;   // batchnorm beta
    Vector running_mean;
    Vector running_var;
};

/// Address of a hidden unit: `layer` counts hidden linear layers from 0 (the
/// output linear layer is not prunable), `unit` is the index inside it.
struct UnitRef {
    int layer = 0;
    int unit = 0;
    friend bool operator==(const UnitRef&, const UnitRef&) = default;
    friend auto operator<=>(const UnitRef&, const UnitRef&) = default;
};

/// Feedforward binary classifier: a linear/relu/dropout/batchnorm stack ending
/// in a width-1 linear layer followed by a sigmoid.
///
/// Each hidden linear layer owns a prune mask. A pruned unit's activation is
/// zeroed where it enters the next linear layer, which is the same as zeroing
/// that unit's outgoing weights (column `unit` of the next weight matrix).
struct MlpModel {
    int input_width = 0;
    std::vector<Layer> layers;
    std::vector<std::vector<std::uint8_t>> pruned;  // per hidden linear layer; 1 = pruned
    double threshold = 0.5;

    /// Indices into `layers` of hidden linear layers, in order.
    std::vector<std::size_t> hidden_linear_layers() const;
    std::size_t num_hidden_layers() const noexcept { return pruned.size(); }

    bool is_pruned(UnitRef u) const;
    void prune(UnitRef u);
    std::size_t num_pruned() const noexcept;
    std::size_t num_hidden_units() const noexcept;
    std::vector<UnitRef> active_units() const;

    std::size_t num_parameters() const noexcept;

    /// Structural checks: layer menu, widths, final sigmoid, finite values,
    /// mask shapes, threshold range.
    void validate() const;
};

/// Builds a model with freshly initialised parameters (weights and biases
/// uniform in +-1/sqrt(fan_in); batchnorm scale 1, shift 0, running stats 0/1).
MlpModel make_mlp(int input_width, std::span<const LayerSpec> layers, std::uint64_t seed);

/// Stack of `hidden_layers` blocks [linear(width), relu, dropout(p), batchnorm(width)]
/// followed by linear(1) and sigmoid. The defaults give the 11x32 tabular
/// classifier used throughout the experiments.
std::vector<LayerSpec> fc_architecture(int hidden_layers = 11, int width = 32, double dropout_p = 0.05);

enum class Mode { train, eval };

/// Scores in [0,1], one per row. Eval mode disables dropout and uses the
/// batchnorm running statistics; train mode needs `rng` when the model has
/// dropout and does NOT update running statistics.
Vector forward(const MlpModel& model, const Matrix& x, Mode mode = Mode::eval, Rng* rng = nullptr);

/// Forward pass returning pre-sigmoid logits.
Vector forward_logits(const MlpModel& model, const Matrix& x, Mode mode = Mode::eval, Rng* rng = nullptr);

enum class LossKind { bce, proxy_spd, proxy_eod };

struct LayerGrad {
    Matrix weight;
    Vector bias;
    Vector scale;
    Vector shift;
};

struct GradReport {
    double loss = 0.0;
    std::vector<LayerGrad> param_grads;  // mirrors MlpModel::layers
    std::vector<Vector> preact_grads;    // per hidden linear layer, batch mean of d loss / d z
};

/// Exact gradient of the chosen scalar loss over `batch`. Proxy losses are
/// usually differentiated in eval mode (frozen batchnorm statistics).
GradReport grad_params(const MlpModel& model, LossKind loss, const Dataset& batch, Mode mode = Mode::eval,
                       Rng* rng = nullptr);

/// Eval-mode gradient of a bias proxy; `preact_grads[l][j]` is the batch mean of
/// d proxy / d z^l_j(x_i). Pruned units report exactly 0.
GradReport grad_preactivations(const MlpModel& model, LossKind proxy, const Dataset& data);

/// Mean binary cross-entropy in eval mode.
double bce_loss(const MlpModel& model, const Dataset& data);

struct TrainConfig {
    int max_epochs = 1000;
    int batch_size = 64;
    double learning_rate = 1e-3;
    int early_stop_patience = 50;
    int lr_plateau_patience = 10;
    double lr_decay_factor = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> valid_loss;
    std::vector<double> learning_rate;
    int best_epoch = -1;
};

/// Adam on mini-batch BCE with a plateau LR schedule and early stopping on
/// validation BCE. Returns the snapshot with the lowest validation loss.
MlpModel train(const MlpModel& init, const Dataset& train_data, const Dataset& valid_data, const TrainConfig& cfg,
               TrainHistory* history = nullptr);

/// Visits every trainable parameter block with its gradient. `slot` numbers
/// the blocks consecutively so optimiser state can be kept alongside.
template <class F>
void for_each_parameter(MlpModel& model, const GradReport& grads, F&& fn) {
    std::size_t slot = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        auto& layer = model.layers[i];
        const auto& g = grads.param_grads[i];
        if (layer.spec.kind == LayerKind::linear) {
            fn(slot++, layer.weight.data(), g.weight.data(), layer.weight.size());
            fn(slot++, layer.bias.data(), g.bias.data(), layer.bias.size());
        } else if (layer.spec.kind == LayerKind::batchnorm) {
            fn(slot++, layer.scale.data(), g.scale.data(), layer.scale.size());
            fn(slot++, layer.shift.data(), g.shift.data(), layer.shift.size());
        }
    }
}

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
public:
    explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}
    void step(MlpModel& model, const GradReport& grads, double direction = 1.0);
    void set_learning_rate(double lr) noexcept { lr_ = lr; }
    double learning_rate() const noexcept { return lr_; }

private:
    double lr_;
    long t_ = 0;
    std::vector<Vector> m_, v_;
};

/// Plain gradient step: theta <- theta - direction * lr * grad.
void sgd_step(MlpModel& model, const GradReport& grads, double learning_rate, double direction = 1.0);

/// Grid {0.00, 0.01, ..., 1.00}; returns the point maximising balanced
/// accuracy of 1{score >= t}, smallest t on ties.
double select_threshold(std::span<const double> scores, std::span<const int> labels);

}  // namespace intrafair
