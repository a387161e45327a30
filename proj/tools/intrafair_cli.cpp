// intrafair: train, debias and evaluate small classifiers; run seeded
// experiments over synthetic or CSV data.

#include "intrafair/checkpoint.hpp"
#include "intrafair/errors.hpp"
#include "intrafair/experiment.hpp"
#include "intrafair/rng.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>

using namespace intrafair;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
    return doc;
}

void add_schema_options(CLI::App* cmd, CsvSchema& schema) {
    cmd->add_option("--label-column", schema.label_column, "Label column")->capture_default_str();
    cmd->add_option("--positive-label", schema.positive_label, "Label value counted as positive")
        ->capture_default_str();
    cmd->add_option("--protected-column", schema.protected_column, "Protected attribute column")
        ->capture_default_str();
    cmd->add_option("--privileged-value", schema.privileged_value, "Protected value coded as 1")
        ->capture_default_str();
    cmd->add_option("--drop", schema.drop_columns, "Columns to ignore");
    cmd->add_flag("--keep-protected-feature", schema.keep_protected_feature,
                  "Also feed the protected column to the model");
}

void add_bias_option(CLI::App* cmd, std::string& bias) {
    cmd->add_option("--bias", bias, "Bias measure")->check(CLI::IsMember({"spd", "eod"}))->capture_default_str();
}

void print_eval(const Evaluation& e) {
    std::cout << json{{"bias", e.bias}, {"balanced_accuracy", e.balanced_accuracy}, {"threshold", e.threshold}}.dump()
              << '\n';
}

void write_trajectory(const DebiasOutcome& out, bool pruning, const std::string& path) {
    if (path.empty()) return;
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    for (const auto& p : out.trajectory) f << (pruning ? prune_record(p) : gda_record(p)).dump() << '\n';
}

int exit_code(const std::vector<ResultRow>& rows) {
    for (const auto& r : rows)
        if (r.failures > 0) return 2;
    return 0;
}

json config_document(const std::string& path, const std::vector<std::string>& overrides, const std::string& out_dir) {
    json doc = path.empty() ? json::object() : read_json_file(path);
    for (const auto& o : overrides) apply_override(doc, o);
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    return doc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intra-processing debiasing of feedforward classifiers"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset as CSV");
    synth->require_subcommand(1);
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    std::size_t synth_n = 10000;
    std::optional<bool> protected_feature;
    LohConfig loh;
    ZafarConfig zafar;
    auto* synth_loh = synth->add_subcommand("loh", "Logit generator with tunable label/attribute interaction");
    synth_loh->add_option("--alpha", loh.alpha, "Interaction strength")->capture_default_str();
    auto* synth_zafar = synth->add_subcommand("zafar", "Rotated Gaussian generator with a random embedding");
    synth_zafar->add_option("--theta", zafar.theta, "Rotation angle")->capture_default_str();
    synth_zafar->add_option("--embed-hidden", zafar.embed_hidden)->capture_default_str();
    synth_zafar->add_option("--embed-out", zafar.embed_out)->capture_default_str();
    for (auto* c : {synth_loh, synth_zafar}) {
        c->add_option("--n", synth_n, "Rows")->capture_default_str();
        c->add_option("--seed", synth_seed, "Seed")->capture_default_str();
        c->add_option("-o,--out", synth_out, "Output CSV")->required();
        c->add_flag("--protected-feature,!--no-protected-feature", protected_feature,
                    "Append the attribute as a feature (default: on for loh, off for zafar)");
    }

    // train ------------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Train a classifier and pick its threshold on validation data");
    std::string train_csv, valid_csv, model_out, train_config;
    CsvSchema schema;
    std::uint64_t train_seed = 0;
    int hidden = 11, width = 32;
    double dropout = 0.05;
    TrainConfig tc;
    train_cmd->add_option("--train", train_csv, "Training CSV")->required();
    train_cmd->add_option("--valid", valid_csv, "Validation CSV")->required();
    train_cmd->add_option("-o,--out", model_out, "Model checkpoint (JSON)")->required();
    train_cmd->add_option("--hidden-layers", hidden)->capture_default_str();
    train_cmd->add_option("--width", width)->capture_default_str();
    train_cmd->add_option("--dropout", dropout)->capture_default_str();
    train_cmd->add_option("--epochs", tc.max_epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", tc.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", tc.learning_rate)->capture_default_str();
    train_cmd->add_option("--patience", tc.early_stop_patience)->capture_default_str();
    train_cmd->add_option("--seed", train_seed)->capture_default_str();
    add_schema_options(train_cmd, schema);

    // debias -----------------------------------------------------------------
    auto* debias = app.add_subcommand("debias", "Debias a trained model using validation data");
    debias->require_subcommand(1);
    std::string d_model, d_valid, d_out, d_traj, d_bias = "spd";
    PruneConfig pc;
    std::string prune_mode = "topk";
    GdaConfig gc;
    std::string gda_opt = "adam";
    RocFitOptions ro;
    RandomPerturbConfig rc;
    std::uint64_t d_seed = 0;
    auto* d_prune = debias->add_subcommand("prune", "Influence-directed unit pruning");
    d_prune->add_option("--steps", pc.steps)->capture_default_str();
    d_prune->add_option("--mode", prune_mode)->check(CLI::IsMember({"topk", "quantile"}))->capture_default_str();
    d_prune->add_option("-k,--units-per-step", pc.units_per_step)->capture_default_str();
    d_prune->add_option("--floor", pc.perf_floor, "Balanced-accuracy floor")->capture_default_str();
    d_prune->add_option("--layers", pc.layers_in_scope, "Hidden layers in scope (default all)");
    auto* d_gda = debias->add_subcommand("gda", "Bias gradient descent/ascent");
    d_gda->add_option("--lr", gc.learning_rate)->capture_default_str();
    d_gda->add_option("--epochs", gc.epochs)->capture_default_str();
    d_gda->add_option("--batch-size", gc.batch_size)->capture_default_str();
    d_gda->add_option("--evals-per-epoch", gc.evals_per_epoch)->capture_default_str();
    d_gda->add_option("--floor", gc.perf_floor, "Balanced-accuracy floor")->capture_default_str();
    d_gda->add_option("--optimizer", gda_opt)->check(CLI::IsMember({"sgd", "adam"}))->capture_default_str();
    auto* d_roc = debias->add_subcommand("roc", "Reject-option classification band");
    d_roc->add_option("--max-half-width", ro.max_half_width)->capture_default_str();
    d_roc->add_option("--bound", ro.bias_bound)->capture_default_str();
    auto* d_eqodds = debias->add_subcommand("eqodds", "Equalised-odds label mixing");
    auto* d_random = debias->add_subcommand("random", "Random multiplicative weight perturbation");
    d_random->add_option("--trials", rc.trials)->capture_default_str();
    d_random->add_option("--noise-sd", rc.noise_sd)->capture_default_str();
    d_random->add_option("--bound", rc.bias_bound)->capture_default_str();
    for (auto* c : {d_prune, d_gda, d_roc, d_eqodds, d_random}) {
        c->add_option("--model", d_model, "Trained model checkpoint")->required();
        c->add_option("--valid", d_valid, "Validation CSV")->required();
        c->add_option("-o,--out", d_out, "Debiased model, or rule JSON for roc/eqodds")->required();
        add_bias_option(c, d_bias);
        add_schema_options(c, schema);
    }
    for (auto* c : {d_prune, d_gda, d_random}) c->add_option("--trajectory", d_traj, "Trajectory JSON-lines output");
    for (auto* c : {d_gda, d_random}) c->add_option("--seed", d_seed)->capture_default_str();

    // eval -------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Bias and balanced accuracy of a model on a CSV");
    std::string e_model, e_data, e_rule, e_bias = "spd";
    std::uint64_t e_seed = 0;
    eval_cmd->add_option("--model", e_model)->required();
    eval_cmd->add_option("--data", e_data)->required();
    eval_cmd->add_option("--rule", e_rule, "Post-processing rule from 'debias roc|eqodds'");
    eval_cmd->add_option("--seed", e_seed, "Seed for randomised rules")->capture_default_str();
    add_bias_option(eval_cmd, e_bias);
    add_schema_options(eval_cmd, schema);

    // experiment / sweep / report ------------------------------------------
    std::string x_config, x_out;
    std::vector<std::string> x_set;
    auto* exp_cmd = app.add_subcommand("experiment", "Seeded train/debias/evaluate runs");
    auto* sweep_cmd = app.add_subcommand("sweep", "Repeat an experiment over generator settings");
    for (auto* c : {exp_cmd, sweep_cmd}) {
        c->add_option("-c,--config", x_config, "JSON config");
        c->add_option("--set", x_set, "Override a config key: dotted.path=value");
        c->add_option("-o,--output-dir", x_out, "Output directory");
    }
    std::string sw_param;
    std::vector<double> sw_values;
    sweep_cmd->add_option("--param", sw_param)->check(CLI::IsMember({"alpha", "theta"}))->required();
    sweep_cmd->add_option("--values", sw_values)->delimiter(',')->required();

    auto* report_cmd = app.add_subcommand("report", "Tabulate results.csv files");
    std::vector<std::string> r_files;
    std::string r_csv;
    int r_decimals = 2;
    report_cmd->add_option("files", r_files, "results.csv files")->required();
    report_cmd->add_option("--csv", r_csv, "Write the summary CSV here");
    report_cmd->add_option("--decimals", r_decimals)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            Dataset d;
            if (synth_loh->parsed()) {
                loh.n = synth_n;
                loh.seed = synth_seed;
                loh.protected_as_feature = protected_feature.value_or(loh.protected_as_feature);
                d = gen_loh(loh);
            } else {
                zafar.n = synth_n;
                zafar.seed = synth_seed;
                zafar.protected_as_feature = protected_feature.value_or(zafar.protected_as_feature);
                d = gen_zafar(zafar);
            }
            write_csv(d, synth_out);
            return 0;
        }
        if (train_cmd->parsed()) {
            Dataset tr = load_csv(train_csv, schema);
            Dataset va = load_csv(valid_csv, schema);
            tc.seed = train_seed;
            MlpModel init = make_mlp(static_cast<int>(tr.num_features()), fc_architecture(hidden, width, dropout),
                                     derive_seed(train_seed, 0));
            TrainHistory hist;
            MlpModel m = train(init, tr, va, tc, &hist);
            Vector s = forward(m, va.features, Mode::eval);
            m.threshold = select_threshold(as_span(s), va.labels);
            save_model(m, model_out);
            std::cerr << "epochs " << hist.train_loss.size() << ", threshold " << m.threshold << '\n';
            return 0;
        }
        if (debias->parsed()) {
            MlpModel m = load_model(d_model);
            Dataset va = load_csv(d_valid, schema);
            BiasSpec spec{parse_bias_measure(d_bias)};
            if (d_prune->parsed()) {
                pc.mode = prune_mode == "topk" ? PruneMode::topk : PruneMode::quantile;
                pc.bias_spec = spec;
                DebiasOutcome out = run_pruning(m, va, pc);
                write_trajectory(out, true, d_traj);
                save_model(out.model, d_out);
                std::cout << json{{"feasible", out.feasible}, {"chosen_index", out.chosen_index}}.dump() << '\n';
            } else if (d_gda->parsed()) {
                gc.optimizer = parse_gda_optimizer(gda_opt);
                gc.bias_spec = spec;
                gc.seed = d_seed;
                DebiasOutcome out = run_gda(m, va, gc);
                write_trajectory(out, false, d_traj);
                save_model(out.model, d_out);
                std::cout << json{{"feasible", out.feasible}, {"chosen_index", out.chosen_index}}.dump() << '\n';
            } else if (d_random->parsed()) {
                rc.seed = d_seed;
                DebiasOutcome out = random_perturb(m, va, rc, spec);
                write_trajectory(out, false, d_traj);
                save_model(out.model, d_out);
                std::cout << json{{"feasible", out.feasible}, {"chosen_index", out.chosen_index}}.dump() << '\n';
            } else {
                Vector s = forward(m, va.features, Mode::eval);
                json rule;
                if (d_roc->parsed())
                    rule = to_json(roc_fit(as_span(s), va.labels, va.protected_attr, m.threshold, spec, ro));
                else
                    rule = to_json(eqodds_fit(hard_predictions(as_span(s), m.threshold), va.labels, va.protected_attr));
                std::ofstream(d_out) << rule.dump(2) << '\n';
            }
            return 0;
        }
        if (eval_cmd->parsed()) {
            FittedMethod f;
            f.model = load_model(e_model);
            f.apply_seed = e_seed;
            if (!e_rule.empty()) {
                json rule = read_json_file(e_rule);
                std::string kind = rule.value("kind", "");
                if (kind == "roc") f.roc = roc_rule_from_json(rule);
                else if (kind == "eqodds") f.eqodds = eqodds_rule_from_json(rule);
                else throw ConfigError(e_rule + ": unknown rule kind");
            }
            Dataset d = load_csv(e_data, schema);
            TestEvaluation e = evaluate_on_test(f, d, BiasSpec{parse_bias_measure(e_bias)});
            print_eval({e.bias, e.balanced_accuracy, e.threshold});
            return 0;
        }
        if (exp_cmd->parsed() || sweep_cmd->parsed()) {
            ExperimentConfig cfg;
            try {
                cfg = config_from_json(config_document(x_config, x_set, x_out));
            } catch (const Error& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return 1;
            }
            if (exp_cmd->parsed()) {
                auto rows = run_experiment(cfg);
                std::cout << format_table(rows);
                return exit_code(rows);
            }
            SweepParameter p;
            std::vector<SweepCell> cells;
            try {
                p = parse_sweep_parameter(sw_param);
                cells = sweep(cfg, p, sw_values);
            } catch (const ConfigError& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return 1;
            }
            std::cout << format_sweep_table(cells, sw_param);
            int code = 0;
            for (const auto& c : cells) code = std::max(code, exit_code(c.rows));
            return code;
        }
        if (report_cmd->parsed()) {
            std::vector<std::filesystem::path> files(r_files.begin(), r_files.end());
            auto rows = read_results(files);
            std::cout << format_table(rows, r_decimals);
            if (!r_csv.empty()) write_summary_csv(rows, r_csv);
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
