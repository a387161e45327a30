#include "intrafair/prune.hpp"

#include "intrafair/errors.hpp"

#include <algorithm>
#include <cmath>

namespace intrafair {

void PruneConfig::validate() const {
    if (steps < 1) throw PreconditionError("pruning steps B must be >= 1");
    if (mode == PruneMode::topk && units_per_step < 1) throw PreconditionError("units per step k must be >= 1");
    if (!(perf_floor > 0.0)) throw PreconditionError("performance floor must be > 0");
}

namespace {

LossKind proxy_loss(BiasSpec spec) {
    return spec.measure == BiasMeasure::spd ? LossKind::proxy_spd : LossKind::proxy_eod;
}

bool in_scope(const std::vector<int>& scope, int layer) {
    return scope.empty() || std::find(scope.begin(), scope.end(), layer) != scope.end();
}

}  // namespace

std::vector<UnitInfluence> influence(const MlpModel& model, BiasSpec spec, const Dataset& data,
                                     const std::vector<int>& layers_in_scope) {
    for (int l : layers_in_scope)
        if (l < 0 || static_cast<std::size_t>(l) >= model.num_hidden_layers())
            throw PreconditionError("layer " + std::to_string(l) + " is not a hidden layer");
    const auto report = grad_preactivations(model, proxy_loss(spec), data);
    std::vector<UnitInfluence> out;
    for (const auto& u : model.active_units())
        if (in_scope(layers_in_scope, u.layer)) out.push_back({u, report.preact_grads[u.layer][u.unit]});
    return out;
}

std::vector<UnitRef> prune_step(MlpModel& model, const std::vector<UnitInfluence>& influences,
                                double initial_bias_sign, const PruneConfig& cfg) {
    std::vector<UnitInfluence> pool;
    for (const auto& inf : influences)
        if (in_scope(cfg.layers_in_scope, inf.unit.layer) && !model.is_pruned(inf.unit)) pool.push_back(inf);
    if (pool.empty()) throw PreconditionError("network exhausted: no active units left to prune");
    const double sign = bias_sign(initial_bias_sign);
    std::sort(pool.begin(), pool.end(), [](const UnitInfluence& a, const UnitInfluence& b) { return a.unit < b.unit; });

    std::vector<UnitRef> chosen;
    if (cfg.mode == PruneMode::topk) {
        std::stable_sort(pool.begin(), pool.end(), [&](const UnitInfluence& a, const UnitInfluence& b) {
            return sign * a.value > sign * b.value;
        });
        const auto k = std::min(pool.size(), static_cast<std::size_t>(cfg.units_per_step));
        for (std::size_t i = 0; i < k; ++i) chosen.push_back(pool[i].unit);
    } else {
        std::vector<double> signed_values;
        for (const auto& p : pool) signed_values.push_back(sign * p.value);
        std::sort(signed_values.begin(), signed_values.end());
        const double q = 1.0 - 1.0 / static_cast<double>(cfg.steps);
        const auto n = signed_values.size();
        // Nearest rank: smallest value with at least q*n values <= it.
        auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
        rank = std::clamp<std::size_t>(rank, 1, n);
        const double tau = signed_values[rank - 1];
        for (const auto& p : pool)
            if (sign * p.value > tau) chosen.push_back(p.unit);
    }
    std::sort(chosen.begin(), chosen.end());
    for (const auto& u : chosen) model.prune(u);
    return chosen;
}

DebiasOutcome run_pruning(const MlpModel& model, const Dataset& valid_data, const PruneConfig& cfg) {
    cfg.validate();
    model.validate();
    const Vector scores0 = forward(model, valid_data.features);
    const auto original = evaluate_at(as_span(scores0), valid_data, cfg.bias_spec, model.threshold);

    DebiasOutcome out;
    out.initial_bias = original.bias;
    out.initial_balanced_accuracy = original.balanced_accuracy;
    const double sign = bias_sign(original.bias);

    MlpModel current = model;
    auto influences = influence(current, cfg.bias_spec, valid_data, cfg.layers_in_scope);
    for (int b = 0; b < cfg.steps; ++b) {
        if (influences.empty()) break;  // exhausted
        TrajectoryPoint point;
        point.step = b;
        point.pruned_units = prune_step(current, influences, sign, cfg);
        const Vector scores = forward(current, valid_data.features);
        const auto ev = evaluate_reselect(as_span(scores), valid_data, cfg.bias_spec);
        point.bias = ev.bias;
        point.balanced_accuracy = ev.balanced_accuracy;
        point.threshold = ev.threshold;
        out.trajectory.push_back(std::move(point));
        if (b + 1 < cfg.steps) influences = influence(current, cfg.bias_spec, valid_data, cfg.layers_in_scope);
    }

    const auto chosen = select_min_bias(out.trajectory, cfg.perf_floor,
                                        cfg.include_original_candidate ? std::optional(original) : std::nullopt);
    out.feasible = chosen.has_value();
    out.chosen_index = chosen.value_or(-1);
    out.model = replay_pruning(model, out, out.chosen_index);
    return out;
}

MlpModel replay_pruning(const MlpModel& original, const DebiasOutcome& outcome, int index) {
    if (index < -1 || index >= static_cast<int>(outcome.trajectory.size()))
        throw PreconditionError("trajectory index out of range");
    MlpModel m = original;
    for (int i = 0; i <= index; ++i)
        for (const auto& u : outcome.trajectory[static_cast<std::size_t>(i)].pruned_units) m.prune(u);
    if (index >= 0) m.threshold = outcome.trajectory[static_cast<std::size_t>(index)].threshold;
    return m;
}

}  // namespace intrafair
