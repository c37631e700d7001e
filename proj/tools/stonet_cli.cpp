// Command-line front end: synth, train, extract, reduce, evaluate, benchmark.
// Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 I/O error.

#include "stonet/baselines.hpp"
#include "stonet/error.hpp"
#include "stonet/harness.hpp"
#include "stonet/heads.hpp"
#include "stonet/sdr.hpp"
#include "stonet/serialize.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace stonet;

namespace {

enum Exit { kOk = 0, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string method;
    std::optional<int> q;
    std::string format = "csv";
    // synth
    std::string kind = "m1";
    long n = 100;
    int p = 10;
    double noise_scale = 0.7071067811865476;
    // extract
    std::string model;
};

ExperimentConfig load_config(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = load_experiment_config(o.config);
    if (o.seed) cfg.train.seed = *o.seed;
    if (o.q) cfg.q = {*o.q};
    if (!o.method.empty()) cfg.reducers = {o.method};
    return cfg;
}

/// Full dataset from the config, standardized when requested.
Dataset prepared_dataset(const ExperimentConfig& cfg) {
    Dataset data = load_dataset(cfg.dataset);
    if (data.rows_rejected > 0) std::cerr << "rejected " << data.rows_rejected << " incomplete rows\n";
    if (cfg.standardize) {
        const Standardized s = standardize_columns(data.x);
        data.x = s.values;
        data.standardization = s.stats;
    }
    return data;
}

void print_matrix(const Matrix& m, const std::string& format) {
    if (format == "json")
        std::cout << matrix_to_json(m).dump() << "\n";
    else
        std::cout << matrix_csv(m, "Z");
}

void print_metrics(const std::vector<MetricRecord>& metrics, const std::string& format) {
    if (format == "json") {
        Json a = Json::array();
        for (const auto& m : metrics)
            a.push_back({{"method", m.method}, {"q", m.q}, {"seed", m.seed}, {"metric", m.metric},
                         {"value", m.value}, {"timestamp", m.timestamp}});
        std::cout << a.dump(2) << "\n";
    } else {
        std::cout << metrics_csv(metrics);
    }
}

Json stats_to_json(const StandardizationStats& s) {
    return Json{{"means", vector_to_json(s.means)}, {"std_devs", vector_to_json(s.std_devs)}};
}

int cmd_synth(const Options& o) {
    RngStream stream(o.seed.value_or(1), 0x5eed);
    Dataset data;
    if (o.kind == "m1")
        data = gen_m1(o.n, stream, o.noise_scale);
    else if (o.kind == "circle")
        data = gen_circle(o.n, o.p, stream);
    else
        throw ConfigError("unknown synthetic kind '" + o.kind + "'");
    const fs::path path = fs::path(o.out) / (o.kind + ".csv");
    write_csv(data, path);
    std::cout << path.string() << "\n";
    return kOk;
}

int cmd_train(const Options& o) {
    const ExperimentConfig cfg = load_config(o);
    const Dataset data = prepared_dataset(cfg);
    NetworkSpec spec = cfg.network;
    spec.widths[static_cast<std::size_t>(spec.hidden_layers())] = cfg.q.front();
    spec.validate();
    const fs::path out(o.out);
    try {
        const TrainResult r = train_stonet(spec, data, cfg.train);
        const SdrFeatures f = extract_features(r.sdr_latents, spec, cfg.train.seed);
        Json model = theta_to_json(spec, r.theta);
        if (data.standardization) model["standardization"] = stats_to_json(*data.standardization);
        write_file(out / "theta.json", model.dump() + "\n");
        write_file(out / "features.csv", matrix_csv(f.values, "Z"));
        write_file(out / "train_log.jsonl", report_jsonl(r.report));
        write_file(out / "train_summary.json", report_summary(r.report).dump(2) + "\n");
        for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
        if (o.format == "json") print_matrix(f.values, "json");
    } catch (const TrainingAborted& e) {
        write_file(out / "train_log.jsonl", report_jsonl(e.partial_report()));
        throw;
    }
    return kOk;
}

int cmd_extract(const Options& o) {
    if (o.model.empty()) throw ConfigError("--model is required");
    const ExperimentConfig cfg = load_config(o);
    const Json j = Json::parse(read_file(o.model), nullptr, false);
    if (j.is_discarded()) throw ConfigError(o.model + ": not valid JSON");
    const ThetaFile model = theta_from_json(j);
    Dataset data = load_dataset(cfg.dataset);
    if (j.contains("standardization")) {
        StandardizationStats stats{vector_from_json(j["standardization"]["means"]),
                                   vector_from_json(j["standardization"]["std_devs"])};
        data.x = stats.apply(data.x);
    }
    const Matrix z = project_features(model.spec, model.theta, data.x);
    write_file(fs::path(o.out) / "features.csv", matrix_csv(z, "Z"));
    print_matrix(z, o.format);
    return kOk;
}

int cmd_reduce(const Options& o) {
    const ExperimentConfig cfg = load_config(o);
    const Dataset data = prepared_dataset(cfg);
    const std::string method = o.method.empty() ? "pca" : o.method;
    const int q = cfg.q.front();
    LinearReducer r;
    if (method == "pca")
        r = pca_fit(data.x, q);
    else if (method == "sir")
        r = sir_fit(data.x, data.response_vector(), q, cfg.sir_slices,
                    data.task == Task::classification ? SliceMode::categorical : SliceMode::quantile);
    else
        throw ConfigError("reduce supports pca and sir, not '" + method + "'");
    const Matrix z = transform(r, data.x);
    const fs::path out(o.out);
    write_file(out / (method + "_reducer.json"), to_json(r).dump(2) + "\n");
    write_file(out / "features.csv", matrix_csv(z, "Z"));
    print_matrix(z, o.format);
    return kOk;
}

int report_failures(const ResultBundle& bundle) {
    int code = kOk;
    for (const auto& f : bundle.failures) {
        std::cerr << "failed: " << f.method << " q=" << f.q << " (" << f.kind << "): " << f.message << "\n";
        if (f.kind == "divergence") code = kDivergence;
    }
    return code;
}

int cmd_evaluate(const Options& o) {
    const ExperimentConfig cfg = load_config(o);
    const ResultBundle bundle = run_experiment(cfg);
    print_metrics(bundle.metrics, o.format);
    return report_failures(bundle);
}

int cmd_benchmark(const Options& o) {
    ExperimentConfig cfg = load_config(o);
    const fs::path out = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
    const ResultBundle bundle = run_experiment(cfg);
    const auto manifest = write_results(bundle, out);
    print_metrics(bundle.metrics, o.format);
    std::cerr << "wrote " << manifest.size() << " files to " << out.string() << "\n";
    return report_failures(bundle);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"StoNet sufficient dimension reduction"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)");
        sub->add_option("--seed", o.seed, "overrides the training seed");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--method", o.method, "stonet, pca or sir");
        sub->add_option("--q", o.q, "reduced dimension");
        sub->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    common(synth);
    synth->add_option("--kind", o.kind, "m1 or circle");
    synth->add_option("--n", o.n, "observations");
    synth->add_option("--p", o.p, "dimensions (circle)");
    synth->add_option("--noise-scale", o.noise_scale, "GN noise scale (m1)");
    auto* train = app.add_subcommand("train", "train a StoNet and write theta + SDR features");
    common(train);
    auto* extract = app.add_subcommand("extract", "features from a saved theta");
    common(extract);
    extract->add_option("--model", o.model, "theta.json written by train");
    auto* reduce = app.add_subcommand("reduce", "PCA or SIR reduction");
    common(reduce);
    auto* evaluate = app.add_subcommand("evaluate", "reduce, fit head and report test metrics");
    common(evaluate);
    auto* benchmark = app.add_subcommand("benchmark", "full grid from config, written as a result bundle");
    common(benchmark);
    benchmark->get_option("--out")->default_str("");

    CLI11_PARSE(app, argc, argv);
    if (benchmark->parsed() && benchmark->get_option("--out")->count() == 0) o.out.clear();

    try {
        if (synth->parsed()) return cmd_synth(o);
        if (train->parsed()) return cmd_train(o);
        if (extract->parsed()) return cmd_extract(o);
        if (reduce->parsed()) return cmd_reduce(o);
        if (evaluate->parsed()) return cmd_evaluate(o);
        if (benchmark->parsed()) return cmd_benchmark(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const Divergence& e) {
        std::cerr << "divergence at iteration " << e.iteration() << ", layer " << e.layer() << ": " << e.what() << "\n";
        return kDivergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
