#include "intrafair/experiment.hpp"

#include "intrafair/checkpoint.hpp"
#include "intrafair/errors.hpp"
#include "intrafair/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace intrafair {

using nlohmann::json;

std::string_view to_string(MethodKind kind) noexcept {
    switch (kind) {
        case MethodKind::standard: return "standard";
        case MethodKind::prune: return "prune";
        case MethodKind::gda: return "gda";
        case MethodKind::roc: return "roc";
        case MethodKind::eqodds: return "eqodds";
        case MethodKind::random: return "random";
    }
    return "?";
}

MethodKind parse_method_kind(std::string_view name) {
    for (auto k : {MethodKind::standard, MethodKind::prune, MethodKind::gda, MethodKind::roc, MethodKind::eqodds,
                   MethodKind::random})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    if (num_seeds < 1) throw ConfigError("num_seeds must be >= 1");
    if (first_seed_index < 0) throw ConfigError("first_seed_index must be >= 0");
    if (methods.empty()) throw ConfigError("at least one method is required");
    std::set<std::string> names;
    for (const auto& m : methods)
        if (!names.insert(m.name()).second) throw ConfigError("duplicate method name '" + m.name() + "'");
    if (data.kind == DataSourceKind::csv && data.csv_path.empty()) throw ConfigError("data.path is required for csv");
    try {
        split.validate();
        train.validate();
        if (data.kind == DataSourceKind::loh) data.loh.validate();
        if (data.kind == DataSourceKind::zafar) data.zafar.validate();
        if (data.kind == DataSourceKind::csv) data.schema.validate();
        for (const auto& m : methods) {
            if (m.kind == MethodKind::prune) m.prune.validate();
            if (m.kind == MethodKind::gda) m.gda.validate();
            if (m.kind == MethodKind::random) m.random.validate();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

/// Object reader that rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

BiasSpec parse_bias(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + ": expected \"spd\" or \"eod\"");
    try {
        return BiasSpec{parse_bias_measure(j.get<std::string>())};
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

void read_data(const json& j, DataSource& d) {
    Fields f(j, "data");
    std::string source = "loh";
    f.get("source", source);
    if (source == "loh") {
        d.kind = DataSourceKind::loh;
        f.get("n", d.loh.n);
        f.get("alpha", d.loh.alpha);
        f.get("protected_as_feature", d.loh.protected_as_feature);
        f.get("one_hot_category", d.loh.one_hot_category);
    } else if (source == "zafar") {
        d.kind = DataSourceKind::zafar;
        f.get("n", d.zafar.n);
        f.get("theta", d.zafar.theta);
        f.get("embed_hidden", d.zafar.embed_hidden);
        f.get("embed_out", d.zafar.embed_out);
        f.get("protected_as_feature", d.zafar.protected_as_feature);
    } else if (source == "csv") {
        d.kind = DataSourceKind::csv;
        std::string path;
        f.get("path", path);
        d.csv_path = path;
        f.get("label_column", d.schema.label_column);
        f.get("positive_label", d.schema.positive_label);
        f.get("protected_column", d.schema.protected_column);
        f.get("privileged_value", d.schema.privileged_value);
        f.get("drop_columns", d.schema.drop_columns);
        f.get("keep_protected_feature", d.schema.keep_protected_feature);
    } else {
        throw ConfigError("data.source: unknown source '" + source + "'");
    }
    f.finish();
}

std::vector<LayerSpec> read_architecture(const json& j) {
    Fields f(j, "architecture");
    if (const json* layers = f.child("layers")) {
        f.finish();
        if (!layers->is_array()) throw ConfigError("architecture.layers: expected an array");
        std::vector<LayerSpec> out;
        for (const auto& l : *layers) {
            Fields lf(l, "architecture.layers[]");
            std::string kind;
            int width = 0;
            double p = 0.0;
            lf.get("kind", kind);
            lf.get("width", width);
            lf.get("p", p);
            lf.finish();
            if (kind == "linear") out.push_back(LayerSpec::linear(width));
            else if (kind == "relu") out.push_back(LayerSpec::relu());
            else if (kind == "dropout") out.push_back(LayerSpec::dropout(p));
            else if (kind == "batchnorm") out.push_back(LayerSpec::batchnorm(width));
            else if (kind == "sigmoid") out.push_back(LayerSpec::sigmoid());
            else throw ConfigError("architecture.layers: unknown kind '" + kind + "'");
        }
        return out;
    }
    int hidden = 11, width = 32;
    double dropout = 0.05;
    f.get("hidden_layers", hidden);
    f.get("width", width);
    f.get("dropout", dropout);
    f.finish();
    try {
        return fc_architecture(hidden, width, dropout);
    } catch (const Error& e) {
        throw ConfigError(std::string("architecture: ") + e.what());
    }
}

MethodSpec read_method(const json& j) {
    Fields f(j, "methods[]");
    MethodSpec m;
    std::string kind;
    f.get("kind", kind);
    m.kind = parse_method_kind(kind);
    f.get("label", m.label);
    if (const json* b = f.child("bias")) m.bias = parse_bias(*b, "methods[].bias");
    switch (m.kind) {
        case MethodKind::standard:
        case MethodKind::eqodds: break;
        case MethodKind::prune: {
            std::string mode = m.prune.mode == PruneMode::topk ? "topk" : "quantile";
            f.get("steps", m.prune.steps);
            f.get("mode", mode);
            f.get("units_per_step", m.prune.units_per_step);
            f.get("perf_floor", m.prune.perf_floor);
            f.get("layers_in_scope", m.prune.layers_in_scope);
            f.get("include_original_candidate", m.prune.include_original_candidate);
            if (mode == "topk") m.prune.mode = PruneMode::topk;
            else if (mode == "quantile") m.prune.mode = PruneMode::quantile;
            else throw ConfigError("methods[].mode: expected topk or quantile");
            break;
        }
        case MethodKind::gda: {
            std::string opt(to_string(m.gda.optimizer));
            f.get("learning_rate", m.gda.learning_rate);
            f.get("epochs", m.gda.epochs);
            f.get("batch_size", m.gda.batch_size);
            f.get("evals_per_epoch", m.gda.evals_per_epoch);
            f.get("perf_floor", m.gda.perf_floor);
            f.get("include_original_candidate", m.gda.include_original_candidate);
            f.get("optimizer", opt);
            try {
                m.gda.optimizer = parse_gda_optimizer(opt);
            } catch (const Error& e) {
                throw ConfigError(std::string("methods[].optimizer: ") + e.what());
            }
            break;
        }
        case MethodKind::roc: {
            std::string flip = m.roc.flip_mode == RocFlipMode::both_groups ? "both_groups" : "unprivileged_only";
            f.get("max_half_width", m.roc.max_half_width);
            f.get("grid_step", m.roc.grid_step);
            f.get("bias_bound", m.roc.bias_bound);
            f.get("margin", m.roc.margin);
            f.get("flip_mode", flip);
            if (flip == "both_groups") m.roc.flip_mode = RocFlipMode::both_groups;
            else if (flip == "unprivileged_only") m.roc.flip_mode = RocFlipMode::unprivileged_only;
            else throw ConfigError("methods[].flip_mode: expected both_groups or unprivileged_only");
            break;
        }
        case MethodKind::random:
            f.get("trials", m.random.trials);
            f.get("noise_sd", m.random.noise_sd);
            f.get("bias_bound", m.random.bias_bound);
            f.get("margin", m.random.margin);
            break;
    }
    f.finish();
    return m;
}

json layer_to_json(const LayerSpec& l) {
    switch (l.kind) {
        case LayerKind::linear: return {{"kind", "linear"}, {"width", l.width}};
        case LayerKind::relu: return {{"kind", "relu"}};
        case LayerKind::dropout: return {{"kind", "dropout"}, {"p", l.dropout_p}};
        case LayerKind::batchnorm: return {{"kind", "batchnorm"}, {"width", l.width}};
        case LayerKind::sigmoid: return {{"kind", "sigmoid"}};
    }
    return {};
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig cfg;
    Fields f(doc, "config");
    if (const json* b = f.child("bias")) cfg.bias_spec = parse_bias(*b, "bias");
    if (const json* d = f.child("data")) read_data(*d, cfg.data);
    if (const json* s = f.child("split")) {
        Fields sf(*s, "split");
        sf.get("train", cfg.split.train);
        sf.get("valid", cfg.split.valid);
        sf.get("test", cfg.split.test);
        sf.get("stratify_by_label", cfg.split.stratify_by_label);
        sf.finish();
    }
    if (const json* a = f.child("architecture")) cfg.architecture = read_architecture(*a);
    if (const json* t = f.child("train")) {
        Fields tf(*t, "train");
        tf.get("max_epochs", cfg.train.max_epochs);
        tf.get("batch_size", cfg.train.batch_size);
        tf.get("learning_rate", cfg.train.learning_rate);
        tf.get("early_stop_patience", cfg.train.early_stop_patience);
        tf.get("lr_plateau_patience", cfg.train.lr_plateau_patience);
        tf.get("lr_decay_factor", cfg.train.lr_decay_factor);
        tf.finish();
    }
    if (const json* ms = f.child("methods")) {
        if (!ms->is_array()) throw ConfigError("methods: expected an array");
        for (const auto& m : *ms) cfg.methods.push_back(read_method(m));
    } else {
        cfg.methods.push_back(MethodSpec{});
    }
    if (cfg.data.kind == DataSourceKind::csv) cfg.num_seeds = 20;  // real data: 20 splits by default
    f.get("num_seeds", cfg.num_seeds);
    f.get("first_seed_index", cfg.first_seed_index);
    f.get("master_seed", cfg.master_seed);
    std::string out;
    f.get("output_dir", out);
    cfg.output_dir = out;
    f.get("write_checkpoints", cfg.write_checkpoints);
    f.finish();
    cfg.validate();
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json data;
    switch (cfg.data.kind) {
        case DataSourceKind::loh:
            data = {{"source", "loh"},
                    {"n", cfg.data.loh.n},
                    {"alpha", cfg.data.loh.alpha},
                    {"protected_as_feature", cfg.data.loh.protected_as_feature},
                    {"one_hot_category", cfg.data.loh.one_hot_category}};
            break;
        case DataSourceKind::zafar:
            data = {{"source", "zafar"},
                    {"n", cfg.data.zafar.n},
                    {"theta", cfg.data.zafar.theta},
                    {"embed_hidden", cfg.data.zafar.embed_hidden},
                    {"embed_out", cfg.data.zafar.embed_out},
                    {"protected_as_feature", cfg.data.zafar.protected_as_feature}};
            break;
        case DataSourceKind::csv:
            data = {{"source", "csv"},
                    {"path", cfg.data.csv_path.string()},
                    {"label_column", cfg.data.schema.label_column},
                    {"positive_label", cfg.data.schema.positive_label},
                    {"protected_column", cfg.data.schema.protected_column},
                    {"privileged_value", cfg.data.schema.privileged_value},
                    {"drop_columns", cfg.data.schema.drop_columns},
                    {"keep_protected_feature", cfg.data.schema.keep_protected_feature}};
            break;
    }
    json layers = json::array();
    for (const auto& l : cfg.architecture) layers.push_back(layer_to_json(l));
    json methods = json::array();
    for (const auto& m : cfg.methods) {
        json j = {{"kind", to_string(m.kind)}};
        if (!m.label.empty()) j["label"] = m.label;
        if (m.bias) j["bias"] = to_string(m.bias->measure);
        switch (m.kind) {
            case MethodKind::standard:
            case MethodKind::eqodds: break;
            case MethodKind::prune:
                j["steps"] = m.prune.steps;
                j["mode"] = m.prune.mode == PruneMode::topk ? "topk" : "quantile";
                j["units_per_step"] = m.prune.units_per_step;
                j["perf_floor"] = m.prune.perf_floor;
                j["layers_in_scope"] = m.prune.layers_in_scope;
                j["include_original_candidate"] = m.prune.include_original_candidate;
                break;
            case MethodKind::gda:
                j["learning_rate"] = m.gda.learning_rate;
                j["epochs"] = m.gda.epochs;
                j["batch_size"] = m.gda.batch_size;
                j["evals_per_epoch"] = m.gda.evals_per_epoch;
                j["perf_floor"] = m.gda.perf_floor;
                j["include_original_candidate"] = m.gda.include_original_candidate;
                j["optimizer"] = to_string(m.gda.optimizer);
                break;
            case MethodKind::roc:
                j["max_half_width"] = m.roc.max_half_width;
                j["grid_step"] = m.roc.grid_step;
                j["bias_bound"] = m.roc.bias_bound;
                j["margin"] = m.roc.margin;
                j["flip_mode"] = m.roc.flip_mode == RocFlipMode::both_groups ? "both_groups" : "unprivileged_only";
                break;
            case MethodKind::random:
                j["trials"] = m.random.trials;
                j["noise_sd"] = m.random.noise_sd;
                j["bias_bound"] = m.random.bias_bound;
                j["margin"] = m.random.margin;
                break;
        }
        methods.push_back(std::move(j));
    }
    return {{"bias", to_string(cfg.bias_spec.measure)},
            {"data", data},
            {"split",
             {{"train", cfg.split.train},
              {"valid", cfg.split.valid},
              {"test", cfg.split.test},
              {"stratify_by_label", cfg.split.stratify_by_label}}},
            {"architecture", {{"layers", layers}}},
            {"train",
             {{"max_epochs", cfg.train.max_epochs},
              {"batch_size", cfg.train.batch_size},
              {"learning_rate", cfg.train.learning_rate},
              {"early_stop_patience", cfg.train.early_stop_patience},
              {"lr_plateau_patience", cfg.train.lr_plateau_patience},
              {"lr_decay_factor", cfg.train.lr_decay_factor}}},
            {"methods", methods},
            {"num_seeds", cfg.num_seeds},
            {"first_seed_index", cfg.first_seed_index},
            {"master_seed", cfg.master_seed},
            {"output_dir", cfg.output_dir.string()},
            {"write_checkpoints", cfg.write_checkpoints}};
}

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
    std::string path = assignment.substr(0, eq);
    std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "': empty path component");
        bool numeric = std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; });
        json* next = nullptr;
        if (node->is_array()) {
            if (!numeric) throw ConfigError("override '" + assignment + "': '" + key + "' indexes an array");
            std::size_t idx = std::stoul(key);
            if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
            next = &(*node)[idx];
        } else {
            if (node->is_null()) *node = json::object();
            if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + key + "' is not an object");
            next = &(*node)[key];
        }
        if (dot == std::string::npos) {
            *next = value;
            return;
        }
        node = next;
        start = dot + 1;
    }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

// Independent streams within one replicate.
enum Stream : std::uint64_t { data_stream = 10, split_stream, init_stream, train_stream, method_stream };

}  // namespace

std::uint64_t replicate_seed(const ExperimentConfig& cfg, int seed_index) {
    return derive_seed(cfg.master_seed, static_cast<std::uint64_t>(seed_index));
}

std::uint64_t method_seed(const PreparedSeed& prep, std::size_t method_index) {
    return stream_seed(prep.seed, method_stream + method_index);
}

PreparedSeed prepare_seed(const ExperimentConfig& cfg, int seed_index) {
    PreparedSeed out;
    out.seed_index = seed_index;
    out.seed = replicate_seed(cfg, seed_index);

    Dataset all;
    switch (cfg.data.kind) {
        case DataSourceKind::loh: {
            LohConfig c = cfg.data.loh;
            c.seed = stream_seed(out.seed, data_stream);
            all = gen_loh(c);
            break;
        }
        case DataSourceKind::zafar: {
            ZafarConfig c = cfg.data.zafar;
            c.seed = stream_seed(out.seed, data_stream);
            all = gen_zafar(c);
            break;
        }
        case DataSourceKind::csv: all = load_csv(cfg.data.csv_path, cfg.data.schema); break;
    }

    SplitSpec ss = cfg.split;
    ss.seed = stream_seed(out.seed, split_stream);
    out.split = split(all, ss);
    Standardizer st = Standardizer::fit(out.split.train);
    st.apply(out.split.train);
    st.apply(out.split.valid);
    st.apply(out.split.test);

    MlpModel init = make_mlp(static_cast<int>(all.num_features()), cfg.architecture, stream_seed(out.seed, init_stream));
    TrainConfig tc = cfg.train;
    tc.seed = stream_seed(out.seed, train_stream);
    out.model = train(init, out.split.train, out.split.valid, tc);
    Vector s = forward(out.model, out.split.valid.features, Mode::eval);
    out.model.threshold = select_threshold(as_span(s), out.split.valid.labels);
    return out;
}

FittedMethod fit_method(const MlpModel& model, const Dataset& valid, const MethodSpec& method, BiasSpec spec,
                        std::uint64_t seed) {
    FittedMethod f;
    f.spec = method;
    f.model = model;
    f.apply_seed = stream_seed(seed, 1);
    switch (method.kind) {
        case MethodKind::standard: break;
        case MethodKind::prune: {
            PruneConfig pc = method.prune;
            pc.bias_spec = spec;
            f.outcome = run_pruning(model, valid, pc);
            f.model = f.outcome->model;
            break;
        }
        case MethodKind::gda: {
            GdaConfig gc = method.gda;
            gc.bias_spec = spec;
            gc.seed = stream_seed(seed, 0);
            f.outcome = run_gda(model, valid, gc);
            f.model = f.outcome->model;
            break;
        }
        case MethodKind::roc: {
            Vector s = forward(model, valid.features, Mode::eval);
            f.roc = roc_fit(as_span(s), valid.labels, valid.protected_attr, model.threshold, spec, method.roc);
            break;
        }
        case MethodKind::eqodds: {
            Vector s = forward(model, valid.features, Mode::eval);
            BinaryVector yhat = hard_predictions(as_span(s), model.threshold);
            f.eqodds = eqodds_fit(yhat, valid.labels, valid.protected_attr);
            break;
        }
        case MethodKind::random: {
            RandomPerturbConfig rc = method.random;
            rc.seed = stream_seed(seed, 0);
            f.outcome = random_perturb(model, valid, rc, spec);
            f.model = f.outcome->model;
            break;
        }
    }
    return f;
}

TestEvaluation evaluate_on_test(const FittedMethod& fitted, const Dataset& test, BiasSpec spec) {
    Vector s = forward(fitted.model, test.features, Mode::eval);
    BinaryVector yhat;
    if (fitted.roc) {
        yhat = roc_apply(as_span(s), test.protected_attr, *fitted.roc);
    } else {
        yhat = hard_predictions(as_span(s), fitted.model.threshold);
        if (fitted.eqodds) {
            Rng rng(fitted.apply_seed);
            yhat = eqodds_apply(yhat, test.protected_attr, *fitted.eqodds, rng);
        }
    }
    TestEvaluation e;
    e.bias = spec.bias(yhat, test.labels, test.protected_attr);
    e.balanced_accuracy = balanced_accuracy(yhat, test.labels);
    e.threshold = fitted.roc ? fitted.roc->threshold : fitted.model.threshold;
    return e;
}

ResultRow aggregate(const std::string& method, std::vector<SeedRecord> seeds) {
    std::sort(seeds.begin(), seeds.end(),
              [](const SeedRecord& x, const SeedRecord& y) { return x.seed_index < y.seed_index; });
    ResultRow row;
    row.method = method;
    std::vector<double> b, ba;
    for (const auto& r : seeds) {
        if (r.failed) {
            ++row.failures;
            continue;
        }
        b.push_back(r.bias);
        ba.push_back(r.balanced_accuracy);
    }
    auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    };
    if (b.empty()) {
        row.bias_mean = row.bias_sd = row.ba_mean = row.ba_sd = std::nan("");
        row.error = seeds.empty() ? "no seeds" : "all seeds failed: " + seeds.front().error;
    } else {
        mean_sd(b, row.bias_mean, row.bias_sd);
        mean_sd(ba, row.ba_mean, row.ba_sd);
    }
    row.seeds = std::move(seeds);
    return row;
}

namespace {

void write_trajectory(const DebiasOutcome& outcome, MethodKind kind, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& p : outcome.trajectory)
        out << (kind == MethodKind::prune ? prune_record(p) : gda_record(p)).dump() << '\n';
}

std::string seed_tag(const std::string& method, int seed_index) {
    return method + "_seed" + std::to_string(seed_index);
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool writing = !cfg.output_dir.empty();
    if (writing) {
        std::filesystem::create_directories(cfg.output_dir / "trajectories");
        if (cfg.write_checkpoints) std::filesystem::create_directories(cfg.output_dir / "checkpoints");
        std::ofstream(cfg.output_dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
    }

    std::map<std::string, std::vector<SeedRecord>> records;
    for (int i = 0; i < cfg.num_seeds; ++i) {
        const int k = cfg.first_seed_index + i;
        std::optional<PreparedSeed> prep;
        std::string prep_error;
        try {
            prep = prepare_seed(cfg, k);
            if (writing && cfg.write_checkpoints)
                save_model(prep->model, cfg.output_dir / "checkpoints" / (seed_tag("trained", k) + ".json"));
        } catch (const std::exception& e) {
            prep_error = e.what();
        }
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const MethodSpec& m = cfg.methods[mi];
            SeedRecord r;
            r.method = m.name();
            r.seed_index = k;
            if (!prep) {
                r.failed = true;
                r.error = prep_error;
                records[r.method].push_back(r);
                continue;
            }
            try {
                BiasSpec spec = m.bias.value_or(cfg.bias_spec);
                std::uint64_t ms = method_seed(*prep, mi);
                FittedMethod fitted = fit_method(prep->model, prep->split.valid, m, spec, ms);
                TestEvaluation e = evaluate_on_test(fitted, prep->split.test, spec);
                r.bias = e.bias;
                r.balanced_accuracy = e.balanced_accuracy;
                r.threshold = e.threshold;
                r.feasible = fitted.outcome ? fitted.outcome->feasible : true;
                if (writing) {
                    if (fitted.outcome)
                        write_trajectory(*fitted.outcome, m.kind,
                                         cfg.output_dir / "trajectories" / (seed_tag(r.method, k) + ".jsonl"));
                    if (cfg.write_checkpoints && m.kind != MethodKind::standard) {
                        auto base = cfg.output_dir / "checkpoints" / seed_tag(r.method, k);
                        if (fitted.roc)
                            std::ofstream(base.string() + "_rule.json") << to_json(*fitted.roc).dump(2) << '\n';
                        else if (fitted.eqodds)
                            std::ofstream(base.string() + "_rule.json") << to_json(*fitted.eqodds).dump(2) << '\n';
                        else
                            save_model(fitted.model, base.string() + ".json");
                    }
                }
            } catch (const std::exception& e) {
                r.failed = true;
                r.error = e.what();
            }
            records[r.method].push_back(r);
        }
    }

    std::vector<ResultRow> rows;
    for (const auto& m : cfg.methods) rows.push_back(aggregate(m.name(), records[m.name()]));
    if (writing) {
        write_results_csv(rows, cfg.output_dir / "results.csv");
        write_summary_csv(rows, cfg.output_dir / "results_summary.csv");
        std::ofstream t(cfg.output_dir / "results_table.txt");
        t << format_table(rows);
        std::ofstream errs(cfg.output_dir / "failures.log");
        for (const auto& row : rows)
            for (const auto& s : row.seeds)
                if (s.failed) errs << row.method << " seed " << s.seed_index << ": " << s.error << '\n';
    }
    return rows;
}

SweepParameter parse_sweep_parameter(std::string_view name) {
    if (name == "alpha") return SweepParameter::alpha;
    if (name == "theta") return SweepParameter::theta;
    throw ConfigError("sweep parameter must be alpha or theta");
}

std::vector<SweepCell> sweep(const ExperimentConfig& cfg, SweepParameter parameter, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    if (parameter == SweepParameter::alpha && cfg.data.kind != DataSourceKind::loh)
        throw ConfigError("alpha sweeps need the loh data source");
    if (parameter == SweepParameter::theta && cfg.data.kind != DataSourceKind::zafar)
        throw ConfigError("theta sweeps need the zafar data source");
    std::vector<SweepCell> cells;
    for (double v : values) {
        ExperimentConfig c = cfg;
        if (parameter == SweepParameter::alpha) c.data.loh.alpha = v;
        else c.data.zafar.theta = v;
        if (!cfg.output_dir.empty()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s=%g", parameter == SweepParameter::alpha ? "alpha" : "theta", v);
            c.output_dir = cfg.output_dir / buf;
        }
        cells.push_back({v, run_experiment(c)});
    }
    if (!cfg.output_dir.empty()) {
        std::ofstream t(cfg.output_dir / "sweep_table.txt");
        t << format_sweep_table(cells, parameter == SweepParameter::alpha ? "alpha" : "theta");
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

std::string fixed(double x, int decimals) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    std::string s = buf;
    // "-0.00" reads as a sign that is not there
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string g17(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string format_mean_sd(double mean, double sd, int decimals) {
    return fixed(mean, decimals) + "±" + fixed(sd, decimals);
}

std::string format_table(const std::vector<ResultRow>& rows, int decimals) {
    std::size_t w = 8;
    for (const auto& r : rows) w = std::max(w, r.method.size() + 2);
    std::ostringstream out;
    out << pad("method", w) << pad("bias", 14) << pad("BA", 14) << "failed\n";
    for (const auto& r : rows) {
        out << pad(r.method, w);
        if (!r.error.empty()) {
            out << "error: " << r.error << '\n';
            continue;
        }
        out << pad(format_mean_sd(r.bias_mean, r.bias_sd, decimals), 14)
            << pad(format_mean_sd(r.ba_mean, r.ba_sd, decimals), 14) << r.failures << '\n';
    }
    return out.str();
}

std::string format_sweep_table(const std::vector<SweepCell>& cells, const std::string& parameter, int decimals) {
    std::ostringstream out;
    if (cells.empty()) return {};
    std::vector<std::string> methods;
    for (const auto& r : cells.front().rows) methods.push_back(r.method);
    out << pad(parameter, 8);
    for (const auto& m : methods) out << pad(m + " BA", 14);
    for (const auto& m : methods) out << pad(m + " bias", 14);
    out << '\n';
    for (const auto& c : cells) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", c.value);
        out << pad(buf, 8);
        for (const auto& r : c.rows)
            out << pad(r.error.empty() ? format_mean_sd(r.ba_mean, r.ba_sd, decimals) : "error", 14);
        for (const auto& r : c.rows)
            out << pad(r.error.empty() ? format_mean_sd(r.bias_mean, r.bias_sd, decimals) : "error", 14);
        out << '\n';
    }
    return out.str();
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
    std::vector<SeedRecord> all;
    for (const auto& r : rows) all.insert(all.end(), r.seeds.begin(), r.seeds.end());
    std::sort(all.begin(), all.end(), [](const SeedRecord& x, const SeedRecord& y) {
        return std::tie(x.method, x.seed_index) < std::tie(y.method, y.seed_index);
    });
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "method,seed,bias,ba,threshold,feasible\n";
    for (const auto& s : all) {
        if (s.failed) {
            out << s.method << ',' << s.seed_index << ",nan,nan,nan,0\n";
            continue;
        }
        out << s.method << ',' << s.seed_index << ',' << g17(s.bias) << ',' << g17(s.balanced_accuracy) << ','
            << g17(s.threshold) << ',' << (s.feasible ? 1 : 0) << '\n';
    }
}

void write_summary_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "method,seeds,failures,bias_mean,bias_sd,ba_mean,ba_sd\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.seeds.size() << ',' << r.failures << ',' << g17(r.bias_mean) << ','
            << g17(r.bias_sd) << ',' << g17(r.ba_mean) << ',' << g17(r.ba_sd) << '\n';
}

std::vector<ResultRow> read_results(const std::vector<std::filesystem::path>& files) {
    if (files.empty()) throw ConfigError("no result files given");
    std::vector<std::string> order;
    std::map<std::string, std::vector<SeedRecord>> by_method;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw ParseError("cannot open " + file.string());
        std::string line;
        long lineno = 0;
        if (!std::getline(in, line) || line.rfind("method,seed,bias,ba,threshold,feasible", 0) != 0)
            throw ParseError(file.string() + ": missing results header", 1);
        ++lineno;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto cells = split_csv_record(line);
            if (cells.size() != 6) throw ParseError(file.string() + ": expected 6 columns", lineno);
            SeedRecord r;
            r.method = cells[0];
            try {
                std::size_t used = 0;
                r.seed_index = std::stoi(cells[1], &used);
                if (used != cells[1].size()) throw std::invalid_argument("seed");
                auto num = [](const std::string& c) {
                    std::size_t u = 0;
                    double v = std::stod(c, &u);
                    if (u != c.size()) throw std::invalid_argument(c);
                    return v;
                };
                r.bias = num(cells[2]);
                r.balanced_accuracy = num(cells[3]);
                r.threshold = num(cells[4]);
                if (cells[5] != "0" && cells[5] != "1") throw std::invalid_argument("feasible");
                r.feasible = cells[5] == "1";
            } catch (const std::exception&) {
                throw ParseError(file.string() + ": malformed record", lineno);
            }
            r.failed = std::isnan(r.bias) || std::isnan(r.balanced_accuracy);
            if (r.failed) r.error = "recorded failure";
            if (!by_method.count(r.method)) order.push_back(r.method);
            by_method[r.method].push_back(r);
        }
    }
    std::vector<ResultRow> rows;
    for (const auto& m : order) rows.push_back(aggregate(m, by_method[m]));
    return rows;
}

}  // namespace intrafair
