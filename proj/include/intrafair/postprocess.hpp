#pragma once

#include "intrafair/debias.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>

namespace intrafair {

// ---------------------------------------------------------------------------
// Reject-option classification

enum class RocFlipMode { both_groups, unprivileged_only };

struct RocRule {
    double threshold = 0.5;
    double band_lower = 0.5;  // scores strictly inside (band_lower, band_upper) are reassigned
    double band_upper = 0.5;
    int privileged_group = 1;
    RocFlipMode flip_mode = RocFlipMode::both_groups;

    void validate() const;
};

struct RocFitOptions {
    double max_half_width = 0.25;
    double grid_step = 0.01;
    double bias_bound = 0.05;  // epsilon
    double margin = 0.01;
    RocFlipMode flip_mode = RocFlipMode::both_groups;
};

/// Searches symmetric bands around `threshold`. Inside the band the
/// unprivileged group is labelled positive and (in both-groups mode) the
/// privileged group negative. Picks the band with the best balanced accuracy
/// among those with |bias| <= bias_bound + margin, else the smallest |bias|.
/// The privileged group is the one the un-adjusted predictions favour.
RocRule roc_fit(std::span<const double> scores, std::span<const int> y, std::span<const int> a, double threshold,
                BiasSpec spec, const RocFitOptions& options = {});

BinaryVector roc_apply(std::span<const double> scores, std::span<const int> a, const RocRule& rule);

// ---------------------------------------------------------------------------
// Equalised-odds label mixing

struct GroupRates {
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Per group g: a positive prediction stays positive with p_keep_pos[g]; a
/// negative prediction becomes positive with p_flip_neg[g].
struct EqOddsRule {
    std::array<double, 2> p_keep_pos{1.0, 1.0};
    std::array<double, 2> p_flip_neg{0.0, 0.0};

    GroupRates mixed(int group, GroupRates raw) const noexcept;
    void validate() const;
};

/// Empirical TPR/FPR of `yhat` within protected group `group`. Throws when
/// the group lacks positives or negatives.
GroupRates group_rates(std::span<const int> yhat, std::span<const int> y, std::span<const int> a, int group);

/// Maximises the mixed balanced accuracy subject to equal mixed TPR and FPR
/// across groups by enumerating the vertices of the 4-variable feasible
/// polytope. Returns the identity rule when the input already has equal rates.
EqOddsRule eqodds_fit(std::span<const int> yhat, std::span<const int> y, std::span<const int> a);

BinaryVector eqodds_apply(std::span<const int> yhat, std::span<const int> a, const EqOddsRule& rule, Rng& rng);

// ---------------------------------------------------------------------------
// Random multiplicative perturbation

struct RandomPerturbConfig {
    int trials = 101;
    double noise_sd = 0.1;  // multiplicative noise ~ Normal(1, noise_sd^2)
    double bias_bound = 0.05;
    double margin = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Perturbs every trainable parameter `trials` times, re-selects the
/// threshold per copy, and keeps the copy with the best balanced accuracy
/// among those with |bias| <= bias_bound + margin (fallback: smallest |bias|).
/// The unperturbed model is not a candidate.
DebiasOutcome random_perturb(const MlpModel& model, const Dataset& valid_data, const RandomPerturbConfig& cfg,
                             BiasSpec spec);

nlohmann::json to_json(const RocRule& rule);
nlohmann::json to_json(const EqOddsRule& rule);
RocRule roc_rule_from_json(const nlohmann::json& j);
EqOddsRule eqodds_rule_from_json(const nlohmann::json& j);

}  // namespace intrafair
