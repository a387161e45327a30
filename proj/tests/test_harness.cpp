#include "doctest.h"

#include "intrafair/errors.hpp"
#include "intrafair/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace intrafair;
using nlohmann::json;

namespace {

json small_config() {
    return json::parse(R"({
        "data": {"source": "loh", "n": 600, "alpha": 1.0},
        "architecture": {"hidden_layers": 2, "width": 8, "dropout": 0.0},
        "train": {"max_epochs": 15, "early_stop_patience": 5},
        "methods": [
            {"kind": "standard"},
            {"kind": "prune", "steps": 4, "perf_floor": 0.01},
            {"kind": "gda", "epochs": 2, "batch_size": 64, "perf_floor": 0.01, "learning_rate": 1e-3},
            {"kind": "roc", "grid_step": 0.05},
            {"kind": "eqodds"},
            {"kind": "random", "trials": 3}
        ],
        "num_seeds": 2,
        "write_checkpoints": false
    })");
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing and overrides") {
    json doc = small_config();
    apply_override(doc, "data.alpha=2.5");
    apply_override(doc, "bias=\"eod\"");
    apply_override(doc, "num_seeds=3");
    ExperimentConfig cfg = config_from_json(doc);
    CHECK(cfg.data.kind == DataSourceKind::loh);
    CHECK(cfg.data.loh.alpha == 2.5);
    CHECK(cfg.bias_spec.measure == BiasMeasure::eod);
    CHECK(cfg.num_seeds == 3);
    CHECK(cfg.methods.size() == 6);
    CHECK(cfg.methods[1].prune.steps == 4);
    CHECK(cfg.architecture.size() == fc_architecture(2, 8, 0.0).size());

    ExperimentConfig again = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));

    CHECK(config_from_json(json::object()).methods.size() == 1);
}

TEST_CASE("config errors") {
    json doc = small_config();
    doc["mystery"] = 1;
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
    doc = small_config();
    doc["methods"][0]["kind"] = "magic";
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
    doc = small_config();
    doc["num_seeds"] = 0;
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
    doc = small_config();
    doc["methods"].push_back({{"kind", "standard"}});
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
    doc = small_config();
    doc["data"]["n"] = "many";
    CHECK_THROWS_AS(config_from_json(doc), ConfigError);
}

TEST_CASE("aggregate matches a direct recomputation") {
    std::vector<SeedRecord> seeds;
    const double bias[] = {-0.31, -0.02, 0.17, 0.05, -0.4};
    const double ba[] = {0.61, 0.7, 0.66, 0.64, 0.69};
    for (int i = 0; i < 5; ++i) seeds.push_back({"m", i, bias[i], ba[i], 0.5, true, false, ""});
    seeds.push_back({"m", 5, NAN, NAN, NAN, false, true, "boom"});
    ResultRow r = aggregate("m", seeds);
    double mb = 0, ma = 0;
    for (int i = 0; i < 5; ++i) mb += bias[i] / 5, ma += ba[i] / 5;
    double vb = 0, va = 0;
    for (int i = 0; i < 5; ++i) vb += (bias[i] - mb) * (bias[i] - mb) / 4, va += (ba[i] - ma) * (ba[i] - ma) / 4;
    CHECK(std::abs(r.bias_mean - mb) <= 1e-12);
    CHECK(std::abs(r.ba_mean - ma) <= 1e-12);
    CHECK(std::abs(r.bias_sd - std::sqrt(vb)) <= 1e-12);
    CHECK(std::abs(r.ba_sd - std::sqrt(va)) <= 1e-12);
    CHECK(r.failures == 1);
    CHECK(r.error.empty());

    ResultRow one = aggregate("m", {seeds[0]});
    CHECK(one.bias_sd == 0.0);
    ResultRow none = aggregate("m", {seeds[5]});
    CHECK_FALSE(none.error.empty());
}

TEST_CASE("mean and sd formatting") {
    CHECK(format_mean_sd(0.004999, 0.004999) == "0.00±0.00");
    CHECK(format_mean_sd(-0.001, 0.0) == "0.00±0.00");
    CHECK(format_mean_sd(-0.35, 0.04) == "-0.35±0.04");
    CHECK(format_mean_sd(0.6666, 0.0123, 3) == "0.667±0.012");
}

TEST_CASE("sweep and result file errors") {
    ExperimentConfig cfg = config_from_json(small_config());
    CHECK_THROWS_AS(sweep(cfg, SweepParameter::alpha, {}), ConfigError);
    CHECK_THROWS_AS(sweep(cfg, SweepParameter::theta, {1.0}), ConfigError);
    CHECK_THROWS_AS(parse_sweep_parameter("gamma"), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "intrafair_bad_results.csv";
    std::ofstream(path) << "method,seed,bias,ba,threshold,feasible\nstandard,0,abc,0.6,0.5,1\n";
    CHECK_THROWS_AS(read_results({path}), ParseError);
    std::ofstream(path) << "wrong,header\n";
    CHECK_THROWS_AS(read_results({path}), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("small experiment is deterministic and seed-addressable") {
    const auto root = std::filesystem::temp_directory_path() / "intrafair_harness_test";
    std::filesystem::remove_all(root);

    json doc = small_config();
    doc["output_dir"] = (root / "a").string();
    std::vector<ResultRow> rows = run_experiment(config_from_json(doc));
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
        CHECK(r.failures == 0);
        CHECK(r.seeds.size() == 2);
        CHECK(r.ba_mean > 0.5);
    }
    CHECK(rows[0].method == "standard");
    doc["output_dir"] = (root / "b").string();
    run_experiment(config_from_json(doc));
    CHECK(slurp(root / "a" / "results.csv") == slurp(root / "b" / "results.csv"));
    CHECK(std::filesystem::exists(root / "a" / "results_summary.csv"));
    CHECK(std::filesystem::exists(root / "a" / "trajectories" / "prune_seed0.jsonl"));

    std::vector<ResultRow> reread = read_results({root / "a" / "results.csv"});
    REQUIRE(reread.size() == rows.size());
    for (const auto& r : rows) {
        auto it = std::find_if(reread.begin(), reread.end(), [&](const ResultRow& x) { return x.method == r.method; });
        REQUIRE(it != reread.end());
        CHECK(std::abs(it->bias_mean - r.bias_mean) <= 1e-9);
        CHECK(std::abs(it->ba_sd - r.ba_sd) <= 1e-9);
    }

    // re-running seed 1 alone reproduces seed 1 of the two-seed run
    json single = small_config();
    single["num_seeds"] = 1;
    single["first_seed_index"] = 1;
    std::vector<ResultRow> alone = run_experiment(config_from_json(single));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(alone[i].seeds.size() == 1);
        CHECK(alone[i].seeds[0].seed_index == 1);
        CHECK(alone[i].seeds[0].bias == rows[i].seeds[1].bias);
        CHECK(alone[i].seeds[0].balanced_accuracy == rows[i].seeds[1].balanced_accuracy);
    }
    std::filesystem::remove_all(root);
}
