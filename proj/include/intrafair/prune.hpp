#pragma once

#include "intrafair/debias.hpp"

#include <vector>

namespace intrafair {

enum class PruneMode { quantile, topk };

struct PruneConfig {
    int steps = 352;  // B
    PruneMode mode = PruneMode::topk;
    int units_per_step = 1;  // k, topk mode
    double perf_floor = 0.55;
    BiasSpec bias_spec{};
    std::vector<int> layers_in_scope;  // hidden layer indices; empty = all
    bool include_original_candidate = true;

    void validate() const;
};

struct UnitInfluence {
    UnitRef unit;
    double value = 0.0;
};

/// Batch-mean proxy gradient w.r.t. each active in-scope unit's pre-activation.
/// Pruned units are left out.
std::vector<UnitInfluence> influence(const MlpModel& model, BiasSpec spec, const Dataset& data,
                                     const std::vector<int>& layers_in_scope = {});

/// Prunes, in place, the units selected from `influences` (signed by
/// `initial_bias_sign`) and returns them in (layer, unit) order.
/// Quantile mode prunes every unit whose signed influence exceeds the
/// nearest-rank (1 - 1/B) quantile; topk mode prunes the k largest, ties by
/// (layer, unit). Throws PreconditionError("network exhausted") when no
/// candidate is active.
std::vector<UnitRef> prune_step(MlpModel& model, const std::vector<UnitInfluence>& influences,
                                double initial_bias_sign, const PruneConfig& cfg);

/// Greedy influence-directed pruning on validation data with per-step
/// threshold re-selection; returns the feasible minimum-|bias| snapshot.
DebiasOutcome run_pruning(const MlpModel& model, const Dataset& valid_data, const PruneConfig& cfg);

/// Rebuilds the model recorded at trajectory step `index` by replaying the
/// pruned-unit lists onto `original` (index -1 gives `original` itself).
MlpModel replay_pruning(const MlpModel& original, const DebiasOutcome& outcome, int index);

}  // namespace intrafair
