#pragma once

#include "intrafair/debias.hpp"

#include <cstdint>
#include <string_view>

namespace intrafair {

enum class GdaOptimizer { sgd, adam };

std::string_view to_string(GdaOptimizer opt) noexcept;
GdaOptimizer parse_gda_optimizer(std::string_view name);

struct GdaConfig {
    double learning_rate = 1e-5;  // eta
    int epochs = 100;             // E
    int batch_size = 256;         // M
    int evals_per_epoch = 3;
    double perf_floor = 0.60;
    BiasSpec bias_spec{};
    std::uint64_t seed = 0;
    bool include_original_candidate = true;
    GdaOptimizer optimizer = GdaOptimizer::adam;

    void validate() const;
};

/// Bias gradient descent/ascent: fine-tunes on the validation set by stepping
/// against sgn(mu0) * grad(proxy) over shuffled mini-batches, evaluates
/// (threshold, bias, BA) `evals_per_epoch` times per epoch, and returns the
/// feasible minimum-|bias| snapshot. Batches missing a required group are
/// skipped and counted; an epoch where every batch is skipped is an error.
/// `η = 0` is accepted and leaves the parameters untouched.
DebiasOutcome run_gda(const MlpModel& model, const Dataset& valid_data, const GdaConfig& cfg);

}  // namespace intrafair
