#include "doctest.h"
#include "test_support.hpp"

#include "intrafair/checkpoint.hpp"
#include "intrafair/errors.hpp"

#include <filesystem>
#include <fstream>

using namespace intrafair;
using namespace testsupport;

TEST_CASE("checkpoint round trip preserves predictions and masks") {
    std::vector<LayerSpec> arch = fc_architecture(3, 6, 0.1);
    MlpModel m = random_model(4, arch, 9);
    m.threshold = 0.37;
    m.pruned[1][2] = true;
    m.pruned[2][0] = true;
    Dataset d = random_dataset(25, 4, 1);

    const auto dir = std::filesystem::temp_directory_path() / "intrafair_ckpt_test";
    std::filesystem::create_directories(dir);
    save_model(m, dir / "m.json");
    MlpModel back = load_model(dir / "m.json");

    CHECK(back.threshold == m.threshold);
    CHECK(back.pruned == m.pruned);
    CHECK(back.num_parameters() == m.num_parameters());
    const Vector a = forward(m, d.features), b = forward(back, d.features);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint rejects malformed documents") {
    MlpModel m = make_mlp(3, fc_architecture(1, 4, 0.0), 0);
    nlohmann::json doc = model_to_json(m);
    CHECK(doc["format_version"] == kCheckpointFormatVersion);

    auto bad_version = doc;
    bad_version["format_version"] = 99;
    CHECK_THROWS_AS(model_from_json(bad_version), ParseError);

    auto missing = doc;
    missing.erase("layers");
    CHECK_THROWS_AS(model_from_json(missing), ParseError);

    CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), ParseError);

    const auto path = std::filesystem::temp_directory_path() / "intrafair_ckpt_garbage.json";
    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(load_model(path), ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_model("/nonexistent/ckpt.json"), Error);
}
