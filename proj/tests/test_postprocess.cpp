#include "doctest.h"
#include "test_support.hpp"

#include "intrafair/errors.hpp"
#include "intrafair/postprocess.hpp"

#include <array>

using namespace intrafair;
using namespace testsupport;

namespace {

struct Pt {
    double f, t;  // (FPR, TPR)
};

/// Achievable mixed (FPR, TPR) region of a group: image of the unit square
/// (p_keep_pos, p_flip_neg), a parallelogram in ROC space.
std::array<Pt, 4> region(GroupRates r) { return {{{0, 0}, {r.fpr, r.tpr}, {1, 1}, {1 - r.fpr, 1 - r.tpr}}}; }

double cross(Pt o, Pt a, Pt b) { return (a.f - o.f) * (b.t - o.t) - (a.t - o.t) * (b.f - o.f); }

bool inside(const std::array<Pt, 4>& poly, Pt p) {
    int pos = 0, neg = 0;
    for (int i = 0; i < 4; ++i) {
        const double c = cross(poly[i], poly[(i + 1) % 4], p);
        if (c > 1e-12) ++pos;
        if (c < -1e-12) ++neg;
    }
    return pos == 0 || neg == 0;
}

/// Best TPR - FPR over the intersection of both groups' regions: the optimum
/// sits at a corner of one region inside the other or at an edge crossing.
double geometric_optimum(GroupRates r0, GroupRates r1) {
    const auto p = region(r0), q = region(r1);
    double best = -2.0;
    auto consider = [&](Pt x) {
        if (inside(p, x) && inside(q, x)) best = std::max(best, x.t - x.f);
    };
    for (auto x : p) consider(x);
    for (auto x : q) consider(x);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Pt a = p[i], b = p[(i + 1) % 4], c = q[j], d = q[(j + 1) % 4];
            const double den = (b.f - a.f) * (d.t - c.t) - (b.t - a.t) * (d.f - c.f);
            if (std::abs(den) < 1e-15) continue;
            const double s = ((c.f - a.f) * (d.t - c.t) - (c.t - a.t) * (d.f - c.f)) / den;
            const double u = ((c.f - a.f) * (b.t - a.t) - (c.t - a.t) * (b.f - a.f)) / den;
            if (s < -1e-12 || s > 1 + 1e-12 || u < -1e-12 || u > 1 + 1e-12) continue;
            consider({a.f + s * (b.f - a.f), a.t + s * (b.t - a.t)});
        }
    return best;
}

/// Grid over one group's mixing probabilities (step 0.01); the other group's
/// probabilities then follow from the two equality constraints.
double grid_optimum(GroupRates r0, GroupRates r1) {
    double best = -2.0;
    for (int swap = 0; swap < 2; ++swap) {
        GroupRates a = swap ? r1 : r0, b = swap ? r0 : r1;
        const double det = b.tpr * (1 - b.fpr) - b.fpr * (1 - b.tpr);
        if (std::abs(det) < 1e-12) continue;
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100; ++j) {
                const double k = i / 100.0, f = j / 100.0;
                const double t = k * a.tpr + f * (1 - a.tpr), fp = k * a.fpr + f * (1 - a.fpr);
                const double kb = (t * (1 - b.fpr) - fp * (1 - b.tpr)) / det;
                const double fb = (b.tpr * fp - b.fpr * t) / det;
                if (kb < -1e-12 || kb > 1 + 1e-12 || fb < -1e-12 || fb > 1 + 1e-12) continue;
                best = std::max(best, t - fp);
            }
    }
    return best;
}

/// Builds labelled predictions with prescribed confusion counts per group.
void append_group(int group, int tp, int fn, int fp, int tn, std::vector<int>& yhat, std::vector<int>& y,
                  std::vector<int>& a) {
    auto add = [&](int n, int pred, int label) {
        for (int i = 0; i < n; ++i) {
            yhat.push_back(pred);
            y.push_back(label);
            a.push_back(group);
        }
    };
    add(tp, 1, 1);
    add(fn, 0, 1);
    add(fp, 1, 0);
    add(tn, 0, 0);
}

}  // namespace

TEST_CASE("ROC with an empty band is the identity") {
    std::vector<double> s{0.1, 0.45, 0.5, 0.55, 0.9, 0.3};
    std::vector<int> a{0, 1, 0, 1, 0, 1};
    RocRule r;
    r.threshold = r.band_lower = r.band_upper = 0.5;
    CHECK(roc_apply(s, a, r) == hard_predictions(s, 0.5));
}

TEST_CASE("ROC flips the whole band") {
    std::vector<double> s{0.3, 0.4, 0.6, 0.7, 0.35, 0.65};
    std::vector<int> a{0, 0, 0, 0, 1, 1};
    RocRule r;
    r.threshold = 0.5;
    r.band_lower = 0.2;
    r.band_upper = 0.8;
    r.privileged_group = 1;
    auto yhat = roc_apply(s, a, r);
    for (int i = 0; i < 4; ++i) CHECK(yhat[i] == 1);
    CHECK(yhat[4] == 0);
    CHECK(yhat[5] == 0);
    r.flip_mode = RocFlipMode::unprivileged_only;
    yhat = roc_apply(s, a, r);
    CHECK(yhat[5] == 1);
}

TEST_CASE("ROC fit matches an exhaustive band search") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> s;
        std::vector<int> y, a;
        for (int i = 0; i < 400; ++i) {
            const int g = i % 2, lab = u(rng) < 0.5;
            a.push_back(g);
            y.push_back(lab);
            // group 1 gets a score boost: biased scores
            s.push_back(std::clamp(0.35 * lab + 0.25 * g + 0.4 * u(rng), 0.0, 1.0));
        }
        const double t = 0.5;
        for (auto measure : {BiasMeasure::spd, BiasMeasure::eod}) {
            BiasSpec spec{measure};
            RocRule got = roc_fit(s, y, a, t, spec);
            const double mu0 = spec.bias(hard_predictions(s, t), y, a);
            const int priv = mu0 >= 0 ? 0 : 1;
            CHECK(got.privileged_group == priv);
            double best_ba = -1, best_w = -1, min_abs = 9, min_w = -1;
            for (int k = 0; k <= 25; ++k) {
                const double w = k * 0.01;
                std::vector<int> yh(s.size());
                for (std::size_t i = 0; i < s.size(); ++i) {
                    yh[i] = s[i] >= t;
                    if (s[i] > t - w && s[i] < t + w) yh[i] = a[i] != priv;
                }
                const double b = spec.bias(yh, y, a), ba = balanced_accuracy(yh, y);
                if (std::abs(b) <= 0.06 && ba > best_ba) best_ba = ba, best_w = w;
                if (std::abs(b) < min_abs) min_abs = std::abs(b), min_w = w;
            }
            const double want = best_w >= 0 ? best_w : min_w;
            CHECK(got.band_upper - t == doctest::Approx(want));
        }
    }
}

TEST_CASE("equalised odds identity and degenerate inputs") {
    std::vector<int> yhat, y, a;
    append_group(0, 6, 4, 2, 8, yhat, y, a);
    append_group(1, 3, 2, 1, 4, yhat, y, a);  // same TPR 0.6 and FPR 0.2
    EqOddsRule r = eqodds_fit(yhat, y, a);
    CHECK(r.p_keep_pos == std::array<double, 2>{1.0, 1.0});
    CHECK(r.p_flip_neg == std::array<double, 2>{0.0, 0.0});
    Rng rng(1);
    CHECK(eqodds_apply(yhat, a, r, rng) == yhat);

    EqOddsRule inv;
    inv.p_keep_pos = {0.0, 0.0};
    inv.p_flip_neg = {1.0, 1.0};
    auto flipped = eqodds_apply(yhat, a, inv, rng);
    for (std::size_t i = 0; i < yhat.size(); ++i) CHECK(flipped[i] == 1 - yhat[i]);

    std::vector<int> bad_y(yhat.size(), 1);
    CHECK_THROWS_AS(eqodds_fit(yhat, bad_y, a), DegenerateGroupError);
}

TEST_CASE("equalised odds when one group is a coin flip") {
    std::vector<int> yhat, y, a;
    append_group(0, 8, 2, 1, 9, yhat, y, a);
    append_group(1, 5, 5, 5, 5, yhat, y, a);  // TPR = FPR = 0.5
    EqOddsRule r = eqodds_fit(yhat, y, a);
    GroupRates m0 = r.mixed(0, group_rates(yhat, y, a, 0)), m1 = r.mixed(1, group_rates(yhat, y, a, 1));
    CHECK(std::abs(m0.tpr - m1.tpr) <= 1e-9);
    CHECK(std::abs(m0.fpr - m1.fpr) <= 1e-9);
    CHECK(0.5 * (m0.tpr + 1 - m0.fpr) == doctest::Approx(0.5));
}

TEST_CASE("equalised odds vertex solution against geometric and grid oracles") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> cnt(1, 40);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> yhat, y, a;
        append_group(0, cnt(rng), cnt(rng), cnt(rng), cnt(rng), yhat, y, a);
        append_group(1, cnt(rng), cnt(rng), cnt(rng), cnt(rng), yhat, y, a);
        GroupRates r0 = group_rates(yhat, y, a, 0), r1 = group_rates(yhat, y, a, 1);
        EqOddsRule rule = eqodds_fit(yhat, y, a);
        CHECK_NOTHROW(rule.validate());
        GroupRates m0 = rule.mixed(0, r0), m1 = rule.mixed(1, r1);
        CHECK(std::abs(m0.tpr - m1.tpr) <= 1e-9);
        CHECK(std::abs(m0.fpr - m1.fpr) <= 1e-9);
        const double got = m0.tpr - m0.fpr;
        CHECK(got == doctest::Approx(geometric_optimum(r0, r1)).epsilon(1e-9));
        CHECK(got >= grid_optimum(r0, r1) - 1e-9);
    }
}

TEST_CASE("equalised odds Monte Carlo rates approach the analytic mix") {
    std::vector<int> yhat, y, a;
    append_group(0, 30, 10, 5, 15, yhat, y, a);
    append_group(1, 10, 10, 12, 8, yhat, y, a);
    EqOddsRule rule = eqodds_fit(yhat, y, a);
    std::vector<int> big_hat, big_y, big_a;
    for (int rep = 0; rep < 1000; ++rep) {
        big_hat.insert(big_hat.end(), yhat.begin(), yhat.end());
        big_y.insert(big_y.end(), y.begin(), y.end());
        big_a.insert(big_a.end(), a.begin(), a.end());
    }
    Rng rng(3);
    auto mixed = eqodds_apply(big_hat, big_a, rule, rng);
    for (int g = 0; g < 2; ++g) {
        GroupRates want = rule.mixed(g, group_rates(yhat, y, a, g));
        GroupRates got = group_rates(mixed, big_y, big_a, g);
        CHECK(std::abs(got.tpr - want.tpr) <= 0.01);
        CHECK(std::abs(got.fpr - want.fpr) <= 0.01);
    }
}

TEST_CASE("random perturbation") {
    std::vector<LayerSpec> arch{LayerSpec::linear(6), LayerSpec::relu(), LayerSpec::batchnorm(6),
                                LayerSpec::linear(1), LayerSpec::sigmoid()};
    MlpModel m = random_model(3, arch, 4);
    Dataset d = random_dataset(200, 3, 5);
    Vector s = forward(m, d.features);
    m.threshold = select_threshold(as_span(s), d.labels);
    RandomPerturbConfig cfg;
    cfg.trials = 5;

    SUBCASE("zero noise returns the original") {
        cfg.noise_sd = 0.0;
        DebiasOutcome out = random_perturb(m, d, cfg, BiasSpec{});
        for (std::size_t i = 0; i < m.layers.size(); ++i) {
            CHECK(out.model.layers[i].weight == m.layers[i].weight);
            CHECK(out.model.layers[i].scale == m.layers[i].scale);
        }
        CHECK(out.model.threshold == m.threshold);
    }
    SUBCASE("single trial is returned") {
        cfg.trials = 1;
        cfg.bias_bound = -1.0;  // nothing qualifies
        DebiasOutcome out = random_perturb(m, d, cfg, BiasSpec{});
        CHECK(out.chosen_index == 0);
        CHECK(out.model.layers[0].weight != m.layers[0].weight);
    }
    SUBCASE("seeded reruns agree") {
        cfg.seed = 8;
        DebiasOutcome a = random_perturb(m, d, cfg, BiasSpec{}), b = random_perturb(m, d, cfg, BiasSpec{});
        CHECK(a.chosen_index == b.chosen_index);
        CHECK(a.model.layers[0].weight == b.model.layers[0].weight);
    }
    SUBCASE("negative noise is rejected") {
        cfg.noise_sd = -0.1;
        CHECK_THROWS_AS(random_perturb(m, d, cfg, BiasSpec{}), PreconditionError);
    }
}

TEST_CASE("rule serialisation round trip") {
    RocRule r;
    r.threshold = 0.4;
    r.band_lower = 0.3;
    r.band_upper = 0.5;
    r.privileged_group = 0;
    RocRule back = roc_rule_from_json(to_json(r));
    CHECK(back.band_lower == r.band_lower);
    CHECK(back.privileged_group == 0);
    EqOddsRule e;
    e.p_keep_pos = {0.25, 1.0};
    e.p_flip_neg = {0.0, 0.5};
    EqOddsRule eb = eqodds_rule_from_json(to_json(e));
    CHECK(eb.p_keep_pos == e.p_keep_pos);
    CHECK(eb.p_flip_neg == e.p_flip_neg);
    CHECK_THROWS_AS(eqodds_rule_from_json(nlohmann::json{{"p_keep_pos", {2.0, 0.0}}, {"p_flip_neg", {0.0, 0.0}}}),
                    PreconditionError);
}
