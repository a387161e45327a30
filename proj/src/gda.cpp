#include "intrafair/gda.hpp"

#include "intrafair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace intrafair {

std::string_view to_string(GdaOptimizer opt) noexcept { return opt == GdaOptimizer::sgd ? "sgd" : "adam"; }

GdaOptimizer parse_gda_optimizer(std::string_view name) {
    if (name == "sgd") return GdaOptimizer::sgd;
    if (name == "adam") return GdaOptimizer::adam;
    throw ConfigError("unknown GD/A optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void GdaConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw PreconditionError("GD/A learning rate must be finite and >= 0");
    if (epochs < 1) throw PreconditionError("GD/A epochs must be >= 1");
    if (batch_size < 1) throw PreconditionError("GD/A batch size must be >= 1");
    if (evals_per_epoch < 1) throw PreconditionError("evals_per_epoch must be >= 1");
    if (!(perf_floor > 0.0)) throw PreconditionError("performance floor must be > 0");
}

DebiasOutcome run_gda(const MlpModel& model, const Dataset& valid_data, const GdaConfig& cfg) {
    cfg.validate();
    model.validate();
    const Vector scores0 = forward(model, valid_data.features);
    const auto original = evaluate_at(as_span(scores0), valid_data, cfg.bias_spec, model.threshold);
    const LossKind loss = cfg.bias_spec.measure == BiasMeasure::spd ? LossKind::proxy_spd : LossKind::proxy_eod;

    DebiasOutcome out;
    out.initial_bias = original.bias;
    out.initial_balanced_accuracy = original.balanced_accuracy;
    const double direction = bias_sign(original.bias);

    // Online version of select_min_bias so only the best snapshot is kept.
    std::optional<int> best;
    double best_abs = 0.0;
    if (cfg.include_original_candidate && original.balanced_accuracy >= cfg.perf_floor) {
        best = -1;
        best_abs = std::abs(original.bias);
    }
    MlpModel best_model = model;

    MlpModel current = model;
    AdamOptimizer adam(cfg.learning_rate);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(valid_data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto m = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t num_batches = (order.size() + m - 1) / m;
    long skipped = 0;
    // Evaluation k of an epoch happens once this many batches have been processed.
    const auto eval_after = [&](int k) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(k + 1) * num_batches /
                                            static_cast<std::size_t>(cfg.evals_per_epoch));
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t used = 0;
        int eval_index = 0;
        for (std::size_t b = 0; b < num_batches; ++b) {
            const std::size_t start = b * m;
            const std::size_t stop = std::min(order.size(), start + m);
            const Dataset batch = valid_data.subset(std::span(order).subspan(start, stop - start));
            if (!cfg.bias_spec.well_defined(batch.labels, batch.protected_attr)) {
                ++skipped;
            } else {
                ++used;
                const auto grads = grad_params(current, loss, batch, Mode::eval);
                if (cfg.optimizer == GdaOptimizer::sgd) sgd_step(current, grads, cfg.learning_rate, direction);
                else adam.step(current, grads, direction);
            }
            while (eval_index < cfg.evals_per_epoch && eval_after(eval_index) <= b + 1) {
                const Vector scores = forward(current, valid_data.features);
                const auto ev = evaluate_reselect(as_span(scores), valid_data, cfg.bias_spec);
                TrajectoryPoint p;
                p.step = epoch;
                p.eval_index = eval_index;
                p.bias = ev.bias;
                p.balanced_accuracy = ev.balanced_accuracy;
                p.threshold = ev.threshold;
                p.skipped_batches = skipped;
                if (p.balanced_accuracy >= cfg.perf_floor && (!best || std::abs(p.bias) < best_abs)) {
                    best = static_cast<int>(out.trajectory.size());
                    best_abs = std::abs(p.bias);
                    best_model = current;
                    best_model.threshold = ev.threshold;
                }
                out.trajectory.push_back(p);
                ++eval_index;
            }
        }
        if (used == 0)
            throw DegenerateGroupError("GD/A epoch " + std::to_string(epoch) +
                                       ": every mini-batch lacked a required protected group");
    }

    out.feasible = best.has_value();
    out.chosen_index = best.value_or(-1);
    out.model = out.chosen_index >= 0 ? std::move(best_model) : model;
    return out;
}

}  // namespace intrafair
