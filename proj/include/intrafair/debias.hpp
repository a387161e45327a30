#pragma once

#include "intrafair/metrics.hpp"
#include "intrafair/nn.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace intrafair {

/// One evaluation of a candidate model on the validation data.
struct TrajectoryPoint {
    int step = 0;        // pruning step, or epoch for GD/A
    int eval_index = 0;  // GD/A evaluation within the epoch
    double bias = 0.0;
    double balanced_accuracy = 0.0;
    double threshold = 0.5;
    std::vector<UnitRef> pruned_units;  // pruning only: units removed at this step
    long skipped_batches = 0;           // GD/A only: cumulative
};

struct DebiasOutcome {
    MlpModel model;
    std::vector<TrajectoryPoint> trajectory;
    int chosen_index = -1;  // into trajectory, -1 = original model
    bool feasible = false;
    double initial_bias = 0.0;
    double initial_balanced_accuracy = 0.0;
};

/// sgn with sgn(0) = +1.
inline double bias_sign(double bias) noexcept { return bias < 0.0 ? -1.0 : 1.0; }

/// Bias and balanced accuracy of `scores` at `threshold`.
struct Evaluation {
    double bias = 0.0;
    double balanced_accuracy = 0.0;
    double threshold = 0.5;
};

Evaluation evaluate_at(std::span<const double> scores, const Dataset& data, BiasSpec spec, double threshold);
/// Re-selects the threshold on `data` first.
Evaluation evaluate_reselect(std::span<const double> scores, const Dataset& data, BiasSpec spec);

/// argmin |bias| among points with BA >= perf_floor, first index on ties. The
/// original model (index -1) competes when `original` is given; it wins ties.
/// Returns nullopt when nothing meets the floor.
std::optional<int> select_min_bias(const std::vector<TrajectoryPoint>& trajectory, double perf_floor,
                                   std::optional<Evaluation> original);

/// One JSON object per trajectory point, pruning layout.
nlohmann::json prune_record(const TrajectoryPoint& p);
/// One JSON object per trajectory point, GD/A layout.
nlohmann::json gda_record(const TrajectoryPoint& p);

}  // namespace intrafair
