#include "intrafair/checkpoint.hpp"
#include "intrafair/errors.hpp"
#include "intrafair/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace intrafair;

namespace {

BiasSpec bias_of(const std::string& name) { return BiasSpec{parse_bias_measure(name)}; }

py::dict outcome_dict(const DebiasOutcome& out) {
    py::list traj;
    for (const auto& p : out.trajectory) {
        py::dict d;
        d["step"] = p.step;
        d["eval_index"] = p.eval_index;
        d["bias"] = p.bias;
        d["balanced_accuracy"] = p.balanced_accuracy;
        d["threshold"] = p.threshold;
        traj.append(d);
    }
    py::dict d;
    d["model"] = out.model;
    d["trajectory"] = traj;
    d["chosen_index"] = out.chosen_index;
    d["feasible"] = out.feasible;
    d["initial_bias"] = out.initial_bias;
    d["initial_balanced_accuracy"] = out.initial_balanced_accuracy;
    return d;
}

}  // namespace

PYBIND11_MODULE(_intrafair, m) {
    m.doc() = "Intra-processing debiasing of feedforward classifiers";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);  // base first: later translators take priority
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<DegenerateGroupError>(m, "DegenerateGroupError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](Matrix x, BinaryVector y, BinaryVector a) {
                 Dataset d{std::move(x), std::move(y), std::move(a), {}};
                 d.validate();
                 return d;
             }),
             py::arg("features"), py::arg("labels"), py::arg("protected"))
        .def_readwrite("features", &Dataset::features)
        .def_readwrite("labels", &Dataset::labels)
        .def_readwrite("protected", &Dataset::protected_attr)
        .def_readwrite("feature_names", &Dataset::feature_names)
        .def("__len__", &Dataset::size);

    // metrics
    m.def("spd", [](const BinaryVector& yhat, const BinaryVector& a) { return spd(yhat, a); });
    m.def("eod", [](const BinaryVector& yhat, const BinaryVector& y, const BinaryVector& a) {
        return eod(yhat, y, a);
    });
    m.def("balanced_accuracy",
          [](const BinaryVector& yhat, const BinaryVector& y) { return balanced_accuracy(yhat, y); });
    m.def("proxy", [](const std::vector<double>& s, const BinaryVector& y, const BinaryVector& a,
                      const std::string& bias) { return bias_of(bias).proxy(s, y, a); },
          py::arg("scores"), py::arg("labels"), py::arg("protected"), py::arg("bias") = "spd");
    m.def("lemma_residuals", [](const BinaryVector& a, const std::vector<double>& s, const BinaryVector& y) {
        return std::pair{verify_lemma1(a, s).residual, verify_lemma2(a, s, y).residual};
    });

    // data
    m.def("gen_loh", [](std::size_t n, double alpha, std::uint64_t seed) {
        return gen_loh(LohConfig{n, alpha, seed});
    }, py::arg("n") = 10000, py::arg("alpha") = 1.0, py::arg("seed") = 0);
    m.def("gen_zafar", [](std::size_t n, double theta, std::uint64_t seed) {
        ZafarConfig c;
        c.n = n;
        c.theta = theta;
        c.seed = seed;
        return gen_zafar(c);
    }, py::arg("n") = 10000, py::arg("theta") = 1.2, py::arg("seed") = 0);
    m.def("load_csv", [](const std::string& path, const std::string& label, const std::string& protected_col) {
        CsvSchema s;
        s.label_column = label;
        s.protected_column = protected_col;
        return load_csv(path, s);
    }, py::arg("path"), py::arg("label_column") = "label", py::arg("protected_column") = "protected");
    m.def("split", [](const Dataset& d, double train, double valid, double test, std::uint64_t seed) {
        DataSplit s = split(d, SplitSpec{train, valid, test, seed, false});
        Standardizer st = Standardizer::fit(s.train);
        st.apply(s.train);
        st.apply(s.valid);
        st.apply(s.test);
        return py::make_tuple(s.train, s.valid, s.test);
    }, py::arg("data"), py::arg("train") = 0.6, py::arg("valid") = 0.2, py::arg("test") = 0.2, py::arg("seed") = 0,
       "Seeded split, standardised with training statistics.");

    // model
    py::class_<MlpModel>(m, "MlpModel")
        .def_readwrite("threshold", &MlpModel::threshold)
        .def_readonly("input_width", &MlpModel::input_width)
        .def_property_readonly("num_parameters", &MlpModel::num_parameters)
        .def_property_readonly("num_pruned", &MlpModel::num_pruned)
        .def("to_json", [](const MlpModel& mdl) { return model_to_json(mdl).dump(); })
        .def_static("from_json", [](const std::string& s) { return model_from_json(nlohmann::json::parse(s)); });
    m.def("make_mlp", [](int input_width, int hidden_layers, int width, double dropout, std::uint64_t seed) {
        auto arch = fc_architecture(hidden_layers, width, dropout);
        return make_mlp(input_width, arch, seed);
    }, py::arg("input_width"), py::arg("hidden_layers") = 11, py::arg("width") = 32, py::arg("dropout") = 0.05,
       py::arg("seed") = 0);
    m.def("forward", [](const MlpModel& mdl, const Matrix& x) { return forward(mdl, x, Mode::eval); });
    m.def("train", [](const MlpModel& init, const Dataset& tr, const Dataset& va, int max_epochs, double lr,
                      std::uint64_t seed) {
        TrainConfig c;
        c.max_epochs = max_epochs;
        c.learning_rate = lr;
        c.seed = seed;
        MlpModel out = train(init, tr, va, c);
        Vector s = forward(out, va.features, Mode::eval);
        out.threshold = select_threshold(as_span(s), va.labels);
        return out;
    }, py::arg("model"), py::arg("train"), py::arg("valid"), py::arg("max_epochs") = 1000,
       py::arg("learning_rate") = 1e-3, py::arg("seed") = 0,
       "Trains with early stopping and selects the threshold on the validation data.");
    m.def("select_threshold", [](const std::vector<double>& s, const BinaryVector& y) { return select_threshold(s, y); });
    m.def("evaluate", [](const MlpModel& mdl, const Dataset& d, const std::string& bias) {
        Vector s = forward(mdl, d.features, Mode::eval);
        Evaluation e = evaluate_at(as_span(s), d, bias_of(bias), mdl.threshold);
        return py::make_tuple(e.bias, e.balanced_accuracy);
    }, py::arg("model"), py::arg("data"), py::arg("bias") = "spd", "(bias, balanced accuracy) at the model threshold");

    // debiasing
    m.def("prune", [](const MlpModel& mdl, const Dataset& va, const std::string& bias, int steps, int k,
                      double floor) {
        PruneConfig c;
        c.bias_spec = bias_of(bias);
        c.steps = steps;
        c.units_per_step = k;
        c.perf_floor = floor;
        return outcome_dict(run_pruning(mdl, va, c));
    }, py::arg("model"), py::arg("valid"), py::arg("bias") = "spd", py::arg("steps") = 352,
       py::arg("units_per_step") = 1, py::arg("perf_floor") = 0.55);
    m.def("gda", [](const MlpModel& mdl, const Dataset& va, const std::string& bias, double lr, int epochs,
                    double floor, const std::string& optimizer, std::uint64_t seed) {
        GdaConfig c;
        c.bias_spec = bias_of(bias);
        c.learning_rate = lr;
        c.epochs = epochs;
        c.perf_floor = floor;
        c.optimizer = parse_gda_optimizer(optimizer);
        c.seed = seed;
        return outcome_dict(run_gda(mdl, va, c));
    }, py::arg("model"), py::arg("valid"), py::arg("bias") = "spd", py::arg("learning_rate") = GdaConfig{}.learning_rate,
       py::arg("epochs") = 100, py::arg("perf_floor") = 0.60,
       py::arg("optimizer") = std::string(to_string(GdaConfig{}.optimizer)), py::arg("seed") = 0);
    m.def("random_perturb", [](const MlpModel& mdl, const Dataset& va, const std::string& bias, int trials,
                               double noise_sd, std::uint64_t seed) {
        RandomPerturbConfig c;
        c.trials = trials;
        c.noise_sd = noise_sd;
        c.seed = seed;
        return outcome_dict(random_perturb(mdl, va, c, bias_of(bias)));
    }, py::arg("model"), py::arg("valid"), py::arg("bias") = "spd", py::arg("trials") = 101,
       py::arg("noise_sd") = 0.1, py::arg("seed") = 0);
    m.def("eqodds_fit", [](const BinaryVector& yhat, const BinaryVector& y, const BinaryVector& a) {
        EqOddsRule r = eqodds_fit(yhat, y, a);
        return py::make_tuple(r.p_keep_pos, r.p_flip_neg);
    }, "Returns (p_keep_pos, p_flip_neg) per group.");

    // experiments
    m.def("run_experiment", [](const std::string& config_json) {
        ExperimentConfig cfg = config_from_json(nlohmann::json::parse(config_json));
        py::list rows;
        for (const auto& r : run_experiment(cfg)) {
            py::dict d;
            d["method"] = r.method;
            d["bias_mean"] = r.bias_mean;
            d["bias_sd"] = r.bias_sd;
            d["ba_mean"] = r.ba_mean;
            d["ba_sd"] = r.ba_sd;
            d["failures"] = r.failures;
            d["error"] = r.error;
            rows.append(d);
        }
        return rows;
    }, py::arg("config_json"));
    m.def("format_mean_sd", &format_mean_sd, py::arg("mean"), py::arg("sd"), py::arg("decimals") = 2);
}
