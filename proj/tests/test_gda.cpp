#include "doctest.h"
#include "test_support.hpp"

#include "intrafair/errors.hpp"
#include "intrafair/gda.hpp"

using namespace intrafair;
using namespace testsupport;

namespace {

std::vector<LayerSpec> small_bn() {
    return {LayerSpec::linear(6), LayerSpec::relu(), LayerSpec::batchnorm(6), LayerSpec::linear(1),
            LayerSpec::sigmoid()};
}

bool same_params(const MlpModel& a, const MlpModel& b) {
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto &x = a.layers[i], &y = b.layers[i];
        if (x.weight != y.weight || x.bias != y.bias || x.scale != y.scale || x.shift != y.shift) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("zero learning rate leaves the model untouched") {
    MlpModel m = random_model(3, small_bn(), 2);
    Dataset d = random_dataset(120, 3, 3);
    GdaConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.perf_floor = 0.01;
    for (auto opt : {GdaOptimizer::sgd, GdaOptimizer::adam}) {
        cfg.optimizer = opt;
        DebiasOutcome out = run_gda(m, d, cfg);
        CHECK(same_params(out.model, m));
        CHECK(out.chosen_index == -1);
        CHECK(out.trajectory.size() == 6);
    }
}

TEST_CASE("one-parameter logistic model moves against the proxy gradient") {
    std::vector<LayerSpec> arch{LayerSpec::linear(1), LayerSpec::sigmoid()};
    MlpModel m = make_mlp(1, arch, 0);
    m.layers[0].weight(0, 0) = 0.8;
    m.layers[0].bias[0] = 0.0;
    Dataset d;
    d.features.resize(4, 1);
    d.features << 1.5, 0.5, -0.5, -1.0;
    d.labels = {1, 0, 1, 0};
    d.protected_attr = {0, 0, 1, 1};
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    // d proxy / d w = mean_{a=0} s' x - mean_{a=1} s' x
    double dw = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double x = d.features(i, 0), s = sig(0.8 * x);
        dw += (d.protected_attr[i] == 0 ? 0.5 : -0.5) * s * (1 - s) * x;
    }
    GradReport g = grad_params(m, LossKind::proxy_spd, d);
    CHECK(g.param_grads[0].weight(0, 0) == doctest::Approx(dw).epsilon(1e-12));
    CHECK(g.loss > 0.0);  // group a=0 scores higher

    MlpModel next = m;
    sgd_step(next, g, 1e-3, bias_sign(g.loss));
    CHECK(next.layers[0].weight(0, 0) == doctest::Approx(0.8 - 1e-3 * dw).epsilon(1e-14));
    CHECK(grad_params(next, LossKind::proxy_spd, d).loss < g.loss);
}

TEST_CASE("a tiny step never increases the signed proxy") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        MlpModel m = random_model(4, small_bn(), seed);
        Dataset d = balanced_dataset(24, 4, seed + 50);
        for (LossKind k : {LossKind::proxy_spd, LossKind::proxy_eod}) {
            GradReport g = grad_params(m, k, d);
            const double sign = bias_sign(g.loss);
            MlpModel next = m;
            sgd_step(next, g, 1e-7, sign);
            CHECK(sign * grad_params(next, k, d).loss <= sign * g.loss + 1e-9);
        }
    }
}

TEST_CASE("seeded runs repeat exactly") {
    MlpModel m = random_model(3, small_bn(), 5);
    Dataset d = random_dataset(150, 3, 6);
    GdaConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 3;
    cfg.batch_size = 40;
    cfg.perf_floor = 0.01;
    cfg.seed = 9;
    DebiasOutcome a = run_gda(m, d, cfg), b = run_gda(m, d, cfg);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        CHECK(a.trajectory[i].bias == b.trajectory[i].bias);
        CHECK(a.trajectory[i].balanced_accuracy == b.trajectory[i].balanced_accuracy);
    }
    CHECK(same_params(a.model, b.model));
    if (a.feasible && a.chosen_index >= 0)
        for (const auto& p : a.trajectory)
            if (p.balanced_accuracy >= cfg.perf_floor) CHECK(std::abs(a.trajectory[a.chosen_index].bias) <= std::abs(p.bias));
}

TEST_CASE("evaluations per epoch with few batches") {
    MlpModel m = random_model(3, small_bn(), 5);
    Dataset d = random_dataset(100, 3, 6);
    GdaConfig cfg;
    cfg.batch_size = 256;  // a single batch per epoch
    cfg.epochs = 2;
    cfg.perf_floor = 0.01;
    DebiasOutcome out = run_gda(m, d, cfg);
    REQUIRE(out.trajectory.size() == 6);
    CHECK(out.trajectory[5].step == 1);
    CHECK(out.trajectory[5].eval_index == 2);
}

TEST_CASE("degenerate mini-batches") {
    MlpModel m = random_model(3, small_bn(), 1);
    Dataset d = random_dataset(90, 3, 2);
    GdaConfig cfg;
    cfg.epochs = 1;
    cfg.perf_floor = 0.01;
    SUBCASE("single-row batches never hold both groups") {
        cfg.batch_size = 1;
        CHECK_THROWS_AS(run_gda(m, d, cfg), DegenerateGroupError);
    }
    SUBCASE("some batches are skipped and counted") {
        for (int i = 0; i < 90; ++i) d.protected_attr[i] = i < 3 ? 1 : 0;
        cfg.batch_size = 5;
        cfg.evals_per_epoch = 1;
        DebiasOutcome out = run_gda(m, d, cfg);
        REQUIRE(out.trajectory.size() == 1);
        CHECK(out.trajectory[0].skipped_batches >= 15);
    }
    SUBCASE("EOD target without positives") {
        for (auto& y : d.labels) y = 0;
        cfg.bias_spec = BiasSpec{BiasMeasure::eod};
        CHECK_THROWS_AS(run_gda(m, d, cfg), DegenerateGroupError);
    }
}

TEST_CASE("GD/A config validation and records") {
    GdaConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), PreconditionError);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), PreconditionError);
    c = {};
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(c.validate(), PreconditionError);
    CHECK(parse_gda_optimizer("adam") == GdaOptimizer::adam);
    CHECK_THROWS(parse_gda_optimizer("rmsprop"));
    TrajectoryPoint p;
    p.step = 4;
    p.eval_index = 1;
    p.skipped_batches = 2;
    auto j = gda_record(p);
    CHECK(j["epoch"] == 4);
    CHECK(j["eval_index"] == 1);
    CHECK(j["skipped_batches"] == 2);
}
