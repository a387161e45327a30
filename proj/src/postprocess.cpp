#include "intrafair/postprocess.hpp"

#include "intrafair/errors.hpp"

#include <algorithm>
#include <cmath>

namespace intrafair {

// ---------------------------------------------------------------------------
// ROC

void RocRule::validate() const {
    if (!(0.0 <= band_lower && band_lower <= threshold && threshold <= band_upper && band_upper <= 1.0))
        throw PreconditionError("ROC rule needs 0 <= band_lower <= threshold <= band_upper <= 1");
    if (privileged_group != 0 && privileged_group != 1) throw PreconditionError("privileged group must be 0 or 1");
}

BinaryVector roc_apply(std::span<const double> scores, std::span<const int> a, const RocRule& rule) {
    rule.validate();
    if (scores.size() != a.size()) throw PreconditionError("roc_apply: length mismatch");
    BinaryVector out = hard_predictions(scores, rule.threshold);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(scores[i] > rule.band_lower && scores[i] < rule.band_upper)) continue;
        if (a[i] != rule.privileged_group) out[i] = 1;
        else if (rule.flip_mode == RocFlipMode::both_groups) out[i] = 0;
    }
    return out;
}

RocRule roc_fit(std::span<const double> scores, std::span<const int> y, std::span<const int> a, double threshold,
                BiasSpec spec, const RocFitOptions& options) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw PreconditionError("roc_fit: threshold must lie in [0,1]");
    if (!(options.grid_step > 0.0) || options.max_half_width < 0.0)
        throw PreconditionError("roc_fit: invalid band grid");
    const double mu0 = spec.bias(hard_predictions(scores, threshold), y, a);

    RocRule base;
    base.threshold = threshold;
    base.privileged_group = mu0 >= 0.0 ? 0 : 1;
    base.flip_mode = options.flip_mode;

    const int steps = static_cast<int>(std::floor(options.max_half_width / options.grid_step + 1e-9));
    const double bound = options.bias_bound + options.margin;
    RocRule best_feasible, best_any;
    double best_ba = -1.0, best_abs = 0.0;
    bool have_feasible = false, have_any = false;
    for (int k = 0; k <= steps; ++k) {
        const double w = static_cast<double>(k) * options.grid_step;
        RocRule rule = base;
        rule.band_lower = std::max(0.0, threshold - w);
        rule.band_upper = std::min(1.0, threshold + w);
        const auto yhat = roc_apply(scores, a, rule);
        const double bias = spec.bias(yhat, y, a);
        const double ba = balanced_accuracy(yhat, y);
        if (std::abs(bias) <= bound && ba > best_ba) {
            best_ba = ba;
            best_feasible = rule;
            have_feasible = true;
        }
        if (!have_any || std::abs(bias) < best_abs) {
            best_abs = std::abs(bias);
            best_any = rule;
            have_any = true;
        }
    }
    return have_feasible ? best_feasible : best_any;
}

// ---------------------------------------------------------------------------
// Equalised odds

GroupRates EqOddsRule::mixed(int group, GroupRates raw) const noexcept {
    const auto g = static_cast<std::size_t>(group);
    return {p_keep_pos[g] * raw.tpr + p_flip_neg[g] * (1.0 - raw.tpr),
            p_keep_pos[g] * raw.fpr + p_flip_neg[g] * (1.0 - raw.fpr)};
}

void EqOddsRule::validate() const {
    for (double p : {p_keep_pos[0], p_keep_pos[1], p_flip_neg[0], p_flip_neg[1]})
        if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("equalised-odds probabilities must lie in [0,1]");
}

GroupRates group_rates(std::span<const int> yhat, std::span<const int> y, std::span<const int> a, int group) {
    if (yhat.size() != y.size() || y.size() != a.size()) throw PreconditionError("group_rates: length mismatch");
    long pos = 0, neg = 0, tp = 0, fp = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (a[i] != group) continue;
        if (y[i]) {
            ++pos;
            tp += yhat[i];
        } else {
            ++neg;
            fp += yhat[i];
        }
    }
    if (pos == 0 || neg == 0)
        throw DegenerateGroupError("equalised odds: group a=" + std::to_string(group) +
                                   " needs both positive and negative labels");
    return {static_cast<double>(tp) / static_cast<double>(pos), static_cast<double>(fp) / static_cast<double>(neg)};
}

EqOddsRule eqodds_fit(std::span<const int> yhat, std::span<const int> y, std::span<const int> a) {
    const GroupRates r0 = group_rates(yhat, y, a, 0);
    const GroupRates r1 = group_rates(yhat, y, a, 1);
    constexpr double kTol = 1e-12;
    if (std::abs(r0.tpr - r1.tpr) <= kTol && std::abs(r0.fpr - r1.fpr) <= kTol) return EqOddsRule{};

    // x = (keep0, flip0, keep1, flip1); rows 0-1 equalities, rows 2-9 bounds.
    Eigen::Matrix<double, 10, 4> rows = Eigen::Matrix<double, 10, 4>::Zero();
    Eigen::Matrix<double, 10, 1> rhs = Eigen::Matrix<double, 10, 1>::Zero();
    rows.row(0) << r0.tpr, 1.0 - r0.tpr, -r1.tpr, -(1.0 - r1.tpr);
    rows.row(1) << r0.fpr, 1.0 - r0.fpr, -r1.fpr, -(1.0 - r1.fpr);
    for (int v = 0; v < 4; ++v) {
        rows(2 + 2 * v, v) = 1.0;  // x_v = 0
        rows(3 + 2 * v, v) = 1.0;  // x_v = 1
        rhs(3 + 2 * v) = 1.0;
    }
    const auto objective = [&](const Eigen::Vector4d& x) { return (r0.tpr - r0.fpr) * (x[0] - x[1]); };
    const auto feasible = [&](const Eigen::Vector4d& x) {
        constexpr double tol = 1e-9;
        if (std::abs(rows.row(0).dot(x)) > tol || std::abs(rows.row(1).dot(x)) > tol) return false;
        return (x.array() >= -tol).all() && (x.array() <= 1.0 + tol).all();
    };

    bool found = false;
    Eigen::Vector4d best;
    double best_obj = 0.0;
    int pick[4];
    for (pick[0] = 0; pick[0] < 10; ++pick[0])
        for (pick[1] = pick[0] + 1; pick[1] < 10; ++pick[1])
            for (pick[2] = pick[1] + 1; pick[2] < 10; ++pick[2])
                for (pick[3] = pick[2] + 1; pick[3] < 10; ++pick[3]) {
                    Eigen::Matrix4d sys;
                    Eigen::Vector4d b;
                    for (int k = 0; k < 4; ++k) {
                        sys.row(k) = rows.row(pick[k]);
                        b[k] = rhs[pick[k]];
                    }
                    Eigen::FullPivLU<Eigen::Matrix4d> lu(sys);
                    if (lu.rank() < 4) continue;
                    Eigen::Vector4d x = lu.solve(b);
                    if (!feasible(x)) continue;
                    x = x.cwiseMax(0.0).cwiseMin(1.0);
                    const double obj = objective(x);
                    if (!found || obj > best_obj + 1e-12) {
                        found = true;
                        best = x;
                        best_obj = obj;
                    }
                }
    // The all-equal diagonal points are always feasible, so a vertex exists.
    if (!found) throw Error("equalised odds: no feasible vertex found");
    EqOddsRule rule;
    rule.p_keep_pos = {best[0], best[2]};
    rule.p_flip_neg = {best[1], best[3]};
    return rule;
}

BinaryVector eqodds_apply(std::span<const int> yhat, std::span<const int> a, const EqOddsRule& rule, Rng& rng) {
    rule.validate();
    if (yhat.size() != a.size()) throw PreconditionError("eqodds_apply: length mismatch");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BinaryVector out(yhat.size());
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        const auto g = static_cast<std::size_t>(a[i]);
        const double p = yhat[i] ? rule.p_keep_pos[g] : rule.p_flip_neg[g];
        out[i] = u(rng) < p ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random perturbation

void RandomPerturbConfig::validate() const {
    if (trials < 1) throw PreconditionError("random perturbation needs trials >= 1");
    if (!(noise_sd >= 0.0)) throw PreconditionError("noise_sd must be >= 0");
}

DebiasOutcome random_perturb(const MlpModel& model, const Dataset& valid_data, const RandomPerturbConfig& cfg,
                             BiasSpec spec) {
    cfg.validate();
    model.validate();
    const Vector scores0 = forward(model, valid_data.features);
    const auto original = evaluate_at(as_span(scores0), valid_data, spec, model.threshold);

    DebiasOutcome out;
    out.initial_bias = original.bias;
    out.initial_balanced_accuracy = original.balanced_accuracy;

    Rng rng(cfg.seed);
    std::normal_distribution<double> standard;
    const double bound = cfg.bias_bound + cfg.margin;
    int best_feasible = -1, best_any = -1;
    MlpModel feasible_model, any_model;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        MlpModel copy = model;
        const auto perturb = [&](auto& block) {
            for (Eigen::Index k = 0; k < block.size(); ++k) block.data()[k] *= 1.0 + cfg.noise_sd * standard(rng);
        };
        for (auto& layer : copy.layers) {
            if (layer.spec.kind == LayerKind::linear) {
                perturb(layer.weight);
                perturb(layer.bias);
            } else if (layer.spec.kind == LayerKind::batchnorm) {
                perturb(layer.scale);
                perturb(layer.shift);
            }
        }
        const Vector scores = forward(copy, valid_data.features);
        const auto ev = evaluate_reselect(as_span(scores), valid_data, spec);
        copy.threshold = ev.threshold;
        TrajectoryPoint p;
        p.step = trial;
        p.bias = ev.bias;
        p.balanced_accuracy = ev.balanced_accuracy;
        p.threshold = ev.threshold;
        out.trajectory.push_back(p);
        const auto& tr = out.trajectory;
        if (std::abs(ev.bias) <= bound &&
            (best_feasible < 0 || ev.balanced_accuracy > tr[static_cast<std::size_t>(best_feasible)].balanced_accuracy)) {
            best_feasible = trial;
            feasible_model = copy;
        }
        if (best_any < 0 || std::abs(ev.bias) < std::abs(tr[static_cast<std::size_t>(best_any)].bias)) {
            best_any = trial;
            any_model = std::move(copy);
        }
    }
    out.feasible = best_feasible >= 0;
    out.chosen_index = out.feasible ? best_feasible : best_any;
    out.model = out.feasible ? std::move(feasible_model) : std::move(any_model);
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const RocRule& rule) {
    return {{"kind", "roc"},
            {"threshold", rule.threshold},
            {"band_lower", rule.band_lower},
            {"band_upper", rule.band_upper},
            {"privileged_group", rule.privileged_group},
            {"flip_mode", rule.flip_mode == RocFlipMode::both_groups ? "both_groups" : "unprivileged_only"}};
}

nlohmann::json to_json(const EqOddsRule& rule) {
    return {{"kind", "eqodds"},
            {"p_keep_pos", {rule.p_keep_pos[0], rule.p_keep_pos[1]}},
            {"p_flip_neg", {rule.p_flip_neg[0], rule.p_flip_neg[1]}}};
}

RocRule roc_rule_from_json(const nlohmann::json& j) {
    try {
        RocRule r;
        r.threshold = j.at("threshold").get<double>();
        r.band_lower = j.at("band_lower").get<double>();
        r.band_upper = j.at("band_upper").get<double>();
        r.privileged_group = j.at("privileged_group").get<int>();
        r.flip_mode = j.value("flip_mode", std::string("both_groups")) == "unprivileged_only"
                          ? RocFlipMode::unprivileged_only
                          : RocFlipMode::both_groups;
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ROC rule: ") + e.what());
    }
}

EqOddsRule eqodds_rule_from_json(const nlohmann::json& j) {
    try {
        EqOddsRule r;
        const auto keep = j.at("p_keep_pos").get<std::vector<double>>();
        const auto flip = j.at("p_flip_neg").get<std::vector<double>>();
        if (keep.size() != 2 || flip.size() != 2) throw ParseError("equalised-odds rule needs two groups");
        r.p_keep_pos = {keep[0], keep[1]};
        r.p_flip_neg = {flip[0], flip[1]};
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("equalised-odds rule: ") + e.what());
    }
}

}  // namespace intrafair
