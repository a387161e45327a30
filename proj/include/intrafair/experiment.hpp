#pragma once

#include "intrafair/data_io.hpp"
#include "intrafair/gda.hpp"
#include "intrafair/postprocess.hpp"
#include "intrafair/prune.hpp"
#include "intrafair/synth.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace intrafair {

enum class DataSourceKind { csv, loh, zafar };

struct DataSource {
    DataSourceKind kind = DataSourceKind::loh;
    std::filesystem::path csv_path;
    CsvSchema schema;
    LohConfig loh;
    ZafarConfig zafar;
};

enum class MethodKind { standard, prune, gda, roc, eqodds, random };

std::string_view to_string(MethodKind kind) noexcept;
MethodKind parse_method_kind(std::string_view name);

struct MethodSpec {
    MethodKind kind = MethodKind::standard;
    std::string label;              // defaults to the kind name
    std::optional<BiasSpec> bias;  // overrides the experiment-wide measure
    PruneConfig prune;
    GdaConfig gda;
    RocFitOptions roc;
    RandomPerturbConfig random;

    std::string name() const { return label.empty() ? std::string(to_string(kind)) : label; }
};

struct ExperimentConfig {
    DataSource data;
    SplitSpec split;  // its seed is replaced per replicate
    std::vector<LayerSpec> architecture = fc_architecture();
    TrainConfig train;
    std::vector<MethodSpec> methods;
    BiasSpec bias_spec;
    int num_seeds = 10;  // config_from_json defaults csv sources to 20
    int first_seed_index = 0;
    std::uint64_t master_seed = 0;
    std::filesystem::path output_dir;  // empty: nothing written
    bool write_checkpoints = true;

    void validate() const;
};

/// Parses the JSON config document; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Applies "dotted.path=value"; the value is parsed as JSON when possible,
/// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Replicate seed for index `k` (see derive_seed).
std::uint64_t replicate_seed(const ExperimentConfig& cfg, int seed_index);

/// Everything the methods share for one replicate: the split, the trained
/// model with its validation-selected threshold.
struct PreparedSeed {
    int seed_index = 0;
    std::uint64_t seed = 0;
    DataSplit split;
    MlpModel model;
};

PreparedSeed prepare_seed(const ExperimentConfig& cfg, int seed_index);
/// Seed handed to fit_method for the method at `method_index` in the config.
std::uint64_t method_seed(const PreparedSeed& prep, std::size_t method_index);

/// A fitted method: the (possibly debiased) model plus, for post-processing,
/// the rule applied on top of its predictions.
struct FittedMethod {
    MethodSpec spec;
    MlpModel model;
    std::optional<RocRule> roc;
    std::optional<EqOddsRule> eqodds;
    std::optional<DebiasOutcome> outcome;
    std::uint64_t apply_seed = 0;
};

/// Fits `method` using only the model and the validation split.
FittedMethod fit_method(const MlpModel& model, const Dataset& valid, const MethodSpec& method, BiasSpec spec,
                        std::uint64_t seed);

struct TestEvaluation {
    double bias = 0.0;
    double balanced_accuracy = 0.0;
    double threshold = 0.5;
};

TestEvaluation evaluate_on_test(const FittedMethod& fitted, const Dataset& test, BiasSpec spec);

struct SeedRecord {
    std::string method;
    int seed_index = 0;
    double bias = 0.0;
    double balanced_accuracy = 0.0;
    double threshold = 0.5;
    bool feasible = true;
    bool failed = false;
    std::string error;
};

struct ResultRow {
    std::string method;
    double bias_mean = 0.0, bias_sd = 0.0;
    double ba_mean = 0.0, ba_sd = 0.0;
    std::vector<SeedRecord> seeds;
    int failures = 0;
    std::string error;  // set when every seed failed
};

/// Mean and sample standard deviation over successful seeds.
ResultRow aggregate(const std::string& method, std::vector<SeedRecord> seeds);

/// Full pipeline over all replicates; writes results.csv,
/// results_summary.csv, trajectories and checkpoints when output_dir is set.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

enum class SweepParameter { alpha, theta };
SweepParameter parse_sweep_parameter(std::string_view name);

struct SweepCell {
    double value = 0.0;
    std::vector<ResultRow> rows;
};

std::vector<SweepCell> sweep(const ExperimentConfig& cfg, SweepParameter parameter, const std::vector<double>& values);

/// "mean±sd" at `decimals` places (round-half-even on the binary value).
std::string format_mean_sd(double mean, double sd, int decimals = 2);

/// Method x {bias, BA} table.
std::string format_table(const std::vector<ResultRow>& rows, int decimals = 2);
/// One line per swept value: BA columns per method, then bias columns.
std::string format_sweep_table(const std::vector<SweepCell>& cells, const std::string& parameter, int decimals = 2);

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
void write_summary_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
/// Reads per-seed records from results.csv files and re-aggregates them.
std::vector<ResultRow> read_results(const std::vector<std::filesystem::path>& files);

}  // namespace intrafair
