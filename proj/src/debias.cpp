#include "intrafair/debias.hpp"

#include <cmath>

namespace intrafair {

Evaluation evaluate_at(std::span<const double> scores, const Dataset& data, BiasSpec spec, double threshold) {
    const auto yhat = hard_predictions(scores, threshold);
    return {spec.bias(yhat, data.labels, data.protected_attr), balanced_accuracy(yhat, data.labels), threshold};
}

Evaluation evaluate_reselect(std::span<const double> scores, const Dataset& data, BiasSpec spec) {
    return evaluate_at(scores, data, spec, select_threshold(scores, data.labels));
}

std::optional<int> select_min_bias(const std::vector<TrajectoryPoint>& trajectory, double perf_floor,
                                   std::optional<Evaluation> original) {
    std::optional<int> best;
    double best_abs = 0.0;
    if (original && original->balanced_accuracy >= perf_floor) {
        best = -1;
        best_abs = std::abs(original->bias);
    }
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const auto& p = trajectory[i];
        if (p.balanced_accuracy < perf_floor) continue;
        const double a = std::abs(p.bias);
        if (!best || a < best_abs) {
            best = static_cast<int>(i);
            best_abs = a;
        }
    }
    return best;
}

nlohmann::json prune_record(const TrajectoryPoint& p) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& u : p.pruned_units) units.push_back({u.layer, u.unit});
    return {{"step", p.step},
            {"bias", p.bias},
            {"balanced_accuracy", p.balanced_accuracy},
            {"threshold", p.threshold},
            {"pruned_units", std::move(units)}};
}

nlohmann::json gda_record(const TrajectoryPoint& p) {
    return {{"epoch", p.step},
            {"eval_index", p.eval_index},
            {"bias", p.bias},
            {"balanced_accuracy", p.balanced_accuracy},
            {"threshold", p.threshold},
            {"skipped_batches", p.skipped_batches}};
}

}  // namespace intrafair
