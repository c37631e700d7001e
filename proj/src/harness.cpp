#include "stonet/harness.hpp"

#include "stonet/baselines.hpp"
#include "stonet/error.hpp"
#include "stonet/heads.hpp"
#include "stonet/sdr.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace stonet {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- Dataset

Dataset Dataset::subset(const std::vector<std::size_t>& rows, const std::string& tag) const {
    Dataset out = *this;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
        out.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    out.y = y.subset(rows);
    out.split = tag;
    return out;
}

Vector Dataset::response_vector() const {
    if (y.is_classification()) {
        Vector v(static_cast<Eigen::Index>(y.labels.size()));
        for (std::size_t i = 0; i < y.labels.size(); ++i) v[static_cast<Eigen::Index>(i)] = y.labels[i];
        return v;
    }
    return y.values.row(0).transpose();
}

TrainingData Dataset::training_data() const { return {x.transpose(), y}; }

// ---------------------------------------------------------------- CSV

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    std::string out(s.substr(b, e - b + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(trim(current));
    return fields;
}

bool is_missing(const std::string& s) {
    static const std::set<std::string> tokens{"", "NA", "na", "N/A", "NaN", "nan", "NAN", "null", "NULL", "?"};
    return tokens.contains(s);
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Dataset load_csv(const fs::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<std::string> header;
    std::string line;
    long line_no = 0;
    std::vector<std::pair<long, std::vector<std::string>>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (header.empty()) {
            if (schema.has_header) {
                header = std::move(fields);
                continue;
            }
            for (std::size_t c = 0; c < fields.size(); ++c) header.push_back("c" + std::to_string(c + 1));
        }
        if (fields.size() != header.size())
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        rows.emplace_back(line_no, std::move(fields));
    }
    if (header.empty()) throw IoError(path.string() + ": empty file");

    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ConfigError("column '" + name + "' not found in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };

    Dataset data;
    data.task = schema.label_column.empty() ? Task::regression : Task::classification;
    std::vector<std::size_t> response_idx;
    if (data.task == Task::classification) {
        response_idx.push_back(column(schema.label_column));
        if (!schema.response_columns.empty())
            throw ConfigError("a schema cannot name both a label column and response columns");
    } else if (schema.response_columns.empty()) {
        response_idx.push_back(header.size() - 1);
    } else {
        for (const auto& name : schema.response_columns) response_idx.push_back(column(name));
    }
    std::vector<std::size_t> feature_idx;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (std::find(response_idx.begin(), response_idx.end(), c) == response_idx.end()) feature_idx.push_back(c);
    if (feature_idx.empty()) throw ConfigError(path.string() + ": no feature columns");
    for (auto c : feature_idx) data.feature_names.push_back(header[c]);
    for (auto c : response_idx) data.response_names.push_back(header[c]);

    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> responses;
    std::vector<std::string> raw_labels;
    for (const auto& [no, fields] : rows) {
        bool missing = false;
        std::vector<double> f;
        for (auto c : feature_idx) {
            if (is_missing(fields[c])) {
                missing = true;
                break;
            }
            const auto v = parse_double(fields[c]);
            if (!v)
                throw IoError(path.string() + ":" + std::to_string(no) + ": non-numeric value '" + fields[c] +
                              "' in column '" + header[c] + "'");
            if (!std::isfinite(*v)) {
                missing = true;
                break;
            }
            f.push_back(*v);
        }
        std::vector<double> r;
        std::string label;
        if (!missing) {
            for (auto c : response_idx) {
                if (is_missing(fields[c])) {
                    missing = true;
                    break;
                }
                if (data.task == Task::classification) {
                    label = fields[c];
                    continue;
                }
                const auto v = parse_double(fields[c]);
                if (!v)
                    throw IoError(path.string() + ":" + std::to_string(no) + ": non-numeric response '" +
                                  fields[c] + "'");
                if (!std::isfinite(*v)) {
                    missing = true;
                    break;
                }
                r.push_back(*v);
            }
        }
        if (missing) {
            ++data.rows_rejected;
            continue;
        }
        features.push_back(std::move(f));
        responses.push_back(std::move(r));
        raw_labels.push_back(std::move(label));
    }
    if (features.empty()) throw IoError(path.string() + ": no complete rows");

    const auto n = static_cast<Eigen::Index>(features.size());
    data.x.resize(n, static_cast<Eigen::Index>(feature_idx.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) data.x(i, j) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    if (data.task == Task::regression) {
        Matrix values(static_cast<Eigen::Index>(response_idx.size()), n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < values.rows(); ++j)
                values(j, i) = responses[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        data.y = Targets::regression(std::move(values));
        return data;
    }

    std::vector<std::string> names(raw_labels.begin(), raw_labels.end());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    const bool numeric = std::all_of(names.begin(), names.end(), [](const std::string& s) { return parse_double(s).has_value(); });
    if (numeric)
        std::sort(names.begin(), names.end(),
                  [](const std::string& a, const std::string& b) { return *parse_double(a) < *parse_double(b); });
    std::map<std::string, int> code;
    for (std::size_t k = 0; k < names.size(); ++k) code[names[k]] = static_cast<int>(k);
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (const auto& l : raw_labels) labels.push_back(code.at(l));
    data.class_names = std::move(names);
    data.y = Targets::classification(std::move(labels));
    return data;
}

void write_csv(const Dataset& data, const fs::path& path) {
    std::string out;
    for (const auto& name : data.feature_names) out += name + ",";
    if (data.task == Task::classification) {
        out += data.response_names.empty() ? "label" : data.response_names.front();
    } else {
        for (std::size_t k = 0; k < data.response_names.size(); ++k)
            out += (k ? "," : "") + data.response_names[k];
    }
    out += '\n';
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) out += format_double(data.x(i, j)) + ",";
        if (data.task == Task::classification) {
            out += data.class_names.at(static_cast<std::size_t>(data.y.labels[static_cast<std::size_t>(i)]));
        } else {
            for (Eigen::Index j = 0; j < data.y.values.rows(); ++j)
                out += (j ? "," : "") + format_double(data.y.values(j, i));
        }
        out += '\n';
    }
    write_file(path, out);
}

// ---------------------------------------------------------------- generators

Vector m1_direction() {
    Vector b = Vector::Zero(20);
    b.head(6).setConstant(1.0 / std::sqrt(6.0));
    return b;
}

Dataset gen_m1(long n, RngStream& stream, double noise_scale) {
    if (n < 1) throw InvalidArgument("gen_m1: n must be positive");
    if (noise_scale < 0.0) throw InvalidArgument("gen_m1: noise scale must be non-negative");
    Dataset data;
    data.task = Task::regression;
    data.x = stream.normal_matrix(n, 20);
    const Vector index = data.x * m1_direction();
    Matrix y(1, n);
    for (long i = 0; i < n; ++i) {
        const double e = noise_scale > 0.0 ? sample_generalized_gaussian(stream, noise_scale, 0.5) : 0.0;
        y(0, i) = std::cos(index[i]) + e;
    }
    data.y = Targets::regression(std::move(y));
    for (int j = 1; j <= 20; ++j) data.feature_names.push_back("x" + std::to_string(j));
    data.response_names = {"y"};
    return data;
}

Dataset gen_circle(long n, int p, RngStream& stream) {
    if (n < 1) throw InvalidArgument("gen_circle: n must be positive");
    if (p < 2) throw InvalidArgument("gen_circle: need at least two dimensions");
    Dataset data;
    data.task = Task::classification;
    data.x = stream.normal_matrix(n, p);
    const double r2 = 2.0 * std::numbers::ln2;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] = data.x(i, 0) * data.x(i, 0) + data.x(i, 1) * data.x(i, 1) > r2 ? 1 : 0;
    data.y = Targets::classification(std::move(labels));
    for (int j = 1; j <= p; ++j) data.feature_names.push_back("x" + std::to_string(j));
    data.response_names = {"label"};
    data.class_names = {"inside", "outside"};
    return data;
}

// ---------------------------------------------------------------- split

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, RngStream& stream) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split: fraction must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> groups;
    if (data.task == Task::classification) {
        groups.resize(static_cast<std::size_t>(data.classes()));
        for (std::size_t i = 0; i < data.y.labels.size(); ++i)
            groups.at(static_cast<std::size_t>(data.y.labels[i])).push_back(i);
    } else {
        groups.emplace_back(static_cast<std::size_t>(data.size()));
        for (std::size_t i = 0; i < groups[0].size(); ++i) groups[0][i] = i;
    }
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& members = groups[g];
        const auto take = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(members.size())));
        if (take == 0 || take == members.size()) {
            const std::string what = data.task == Task::classification
                                         ? "class '" + data.class_names[g] + "' would be absent from one side"
                                         : "too few observations";
            throw DegenerateInput("split: " + what);
        }
        const auto perm = stream.permutation(members.size());
        for (std::size_t k = 0; k < members.size(); ++k)
            (k < take ? train_rows : test_rows).push_back(members[perm[k]]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {data.subset(train_rows, "train"), data.subset(test_rows, "test")};
}

// ---------------------------------------------------------------- config

Dataset load_dataset(const DataSource& source) {
    if (source.synthetic) {
        const auto& r = *source.synthetic;
        RngStream stream(r.seed, 0x5eed);
        if (r.kind == "m1") {
            if (r.p != 20) throw ConfigError("synthetic m1 data has p = 20");
            return gen_m1(r.n, stream, r.noise_scale);
        }
        if (r.kind == "circle") return gen_circle(r.n, r.p, stream);
        throw ConfigError("unknown synthetic dataset '" + r.kind + "'");
    }
    if (source.path.empty()) throw ConfigError("dataset needs a path or a synthetic recipe");
    return load_csv(source.path, source.schema);
}

namespace {

const std::set<std::string> kExperimentKeys{"dataset", "network", "train",   "reducers", "q",
                                            "head",    "sir_slices", "standardize", "split", "output_dir"};

}  // namespace

Json to_json(const ExperimentConfig& cfg) {
    Json dataset;
    if (cfg.dataset.synthetic) {
        const auto& r = *cfg.dataset.synthetic;
        dataset["synthetic"] = Json{{"kind", r.kind}, {"n", r.n}, {"p", r.p}, {"noise_scale", r.noise_scale}, {"seed", r.seed}};
    } else {
        dataset["path"] = cfg.dataset.path;
        dataset["response_columns"] = cfg.dataset.schema.response_columns;
        dataset["label_column"] = cfg.dataset.schema.label_column;
        dataset["has_header"] = cfg.dataset.schema.has_header;
    }
    return Json{{"dataset", dataset},
                {"network", to_json(cfg.network)},
                {"train", to_json(cfg.train)},
                {"reducers", cfg.reducers},
                {"q", cfg.q},
                {"head", cfg.head},
                {"sir_slices", cfg.sir_slices},
                {"standardize", cfg.standardize},
                {"split", {{"fraction", cfg.split.fraction}, {"seed", cfg.split.seed}}},
                {"output_dir", cfg.output_dir}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be an object");
    for (const auto& [key, value] : j.items())
        if (!kExperimentKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    try {
        ExperimentConfig cfg;
        const auto& d = j.at("dataset");
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            SyntheticRecipe r;
            r.kind = s.value("kind", r.kind);
            r.n = s.value("n", r.n);
            r.p = s.value("p", r.kind == "circle" ? 10 : 20);
            r.noise_scale = s.value("noise_scale", r.noise_scale);
            r.seed = s.value("seed", r.seed);
            cfg.dataset.synthetic = r;
        } else {
            cfg.dataset.path = d.at("path").get<std::string>();
            cfg.dataset.schema.response_columns = d.value("response_columns", std::vector<std::string>{});
            cfg.dataset.schema.label_column = d.value("label_column", std::string());
            cfg.dataset.schema.has_header = d.value("has_header", true);
        }
        cfg.network = network_spec_from_json(j.at("network"));
        if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
        cfg.reducers = j.value("reducers", cfg.reducers);
        cfg.q = j.value("q", cfg.q);
        cfg.head = j.value("head", cfg.head);
        cfg.sir_slices = j.value("sir_slices", cfg.sir_slices);
        cfg.standardize = j.value("standardize", cfg.standardize);
        if (j.contains("split")) {
            cfg.split.fraction = j.at("split").value("fraction", cfg.split.fraction);
            cfg.split.seed = j.at("split").value("seed", cfg.split.seed);
        }
        cfg.output_dir = j.value("output_dir", cfg.output_dir);

        for (const auto& r : cfg.reducers)
            if (r != "stonet" && r != "pca" && r != "sir") throw ConfigError("unknown reducer '" + r + "'");
        if (cfg.q.empty()) throw ConfigError("q grid is empty");
        for (int q : cfg.q)
            if (q < 1) throw ConfigError("q must be positive");
        if (cfg.head != "auto" && cfg.head != "linear" && cfg.head != "logistic")
            throw ConfigError("unknown head '" + cfg.head + "'");
        if (cfg.sir_slices < 2) throw ConfigError("sir_slices must be at least 2");
        if (!(cfg.split.fraction > 0.0 && cfg.split.fraction < 1.0))
            throw ConfigError("split fraction must lie in (0, 1)");
        cfg.train.validate(cfg.network);
        return cfg;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    const std::string text = read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return experiment_config_from_json(j);
}

// ---------------------------------------------------------------- experiment

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

HeadKind head_kind(const ExperimentConfig& cfg, Task task) {
    if (cfg.head == "linear") return HeadKind::linear;
    if (cfg.head == "logistic") return HeadKind::logistic;
    return task == Task::classification ? HeadKind::logistic : HeadKind::linear;
}

NetworkSpec spec_for_q(const ExperimentConfig& cfg, const Dataset& train, int q) {
    NetworkSpec spec = cfg.network;
    const int h = spec.hidden_layers();
    spec.widths[static_cast<std::size_t>(h)] = q;
    spec.task = train.task;
    if (spec.widths.front() != train.x.cols())
        throw ConfigError("network input width " + std::to_string(spec.widths.front()) + " does not match " +
                          std::to_string(train.x.cols()) + " features");
    const int out = train.task == Task::classification ? train.classes()
                                                       : static_cast<int>(train.y.values.rows());
    if (spec.widths.back() != out)
        throw ConfigError("network output width " + std::to_string(spec.widths.back()) + " does not match " +
                          std::to_string(out) + " response dimensions");
    spec.validate();
    return spec;
}

}  // namespace

CellResult run_cell(const ExperimentConfig& cfg, const std::string& method, int q, const Dataset& train,
                    const Dataset& test) {
    CellResult cell;
    cell.features.method = method;
    cell.features.q = q;
    if (method == "stonet") {
        const NetworkSpec spec = spec_for_q(cfg, train, q);
        TrainResult result = train_stonet(spec, train, cfg.train);
        cell.features.train = extract_features(result.sdr_latents, spec, cfg.train.seed).values;
        cell.features.test = project_features(spec, result.theta, test.x);
        cell.run = StoNetRun{q, spec, std::move(result.theta), std::move(result.report)};
    } else {
        if (q > train.x.cols()) throw InvalidArgument("q exceeds the number of features");
        const LinearReducer reducer =
            method == "pca" ? pca_fit(train.x, q)
                            : sir_fit(train.x, train.response_vector(), q, cfg.sir_slices,
                                      train.task == Task::classification ? SliceMode::categorical
                                                                         : SliceMode::quantile);
        cell.features.train = transform(reducer, train.x);
        cell.features.test = transform(reducer, test.x);
    }

    const HeadKind kind = head_kind(cfg, train.task);
    HeadModel head;
    if (kind == HeadKind::logistic) {
        if (train.task != Task::classification) throw ConfigError("logistic head needs a classification task");
        head = fit_logistic(cell.features.train, train.y.labels, train.classes());
    } else {
        if (train.task != Task::regression) throw ConfigError("linear head needs a regression task");
        head = fit_linear(cell.features.train, train.y.values.transpose());
    }
    const Metrics m = evaluate(head, cell.features.test, test.y);
    const std::string stamp = utc_timestamp();
    auto record = [&](const std::string& name, double value) {
        cell.metrics.push_back({method, q, cfg.train.seed, name, value, stamp});
    };
    if (m.misclassification_rate) record("misclassification_rate", *m.misclassification_rate);
    if (m.mse) record("mse", *m.mse);
    if (m.pearson_r) record("pearson_r", *m.pearson_r);
    return cell;
}

TrainResult train_stonet(const NetworkSpec& spec, const Dataset& train, const TrainConfig& cfg) {
    return stonet::train(spec, train.training_data(), cfg);
}

ResultBundle run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultBundle bundle;
    bundle.config = cfg;
    bundle.started_at = utc_timestamp();

    Dataset data = load_dataset(cfg.dataset);
    bundle.rows_rejected = data.rows_rejected;
    RngStream split_stream(cfg.split.seed, 0x5b17);
    auto [train, test] = split(data, cfg.split.fraction, split_stream);
    if (cfg.standardize) {
        const Standardized s = standardize_columns(train.x);
        train.x = s.values;
        test.x = s.stats.apply(test.x);
        train.standardization = s.stats;
        test.standardization = s.stats;
    }

    for (const auto& method : cfg.reducers) {
        for (int q : cfg.q) {
            try {
                CellResult cell = run_cell(cfg, method, q, train, test);
                bundle.metrics.insert(bundle.metrics.end(), cell.metrics.begin(), cell.metrics.end());
                bundle.features.push_back(std::move(cell.features));
                if (cell.run) bundle.runs.push_back(std::move(*cell.run));
            } catch (const TrainingAborted& e) {
                bundle.failures.push_back({method, q, "divergence", e.what()});
                bundle.runs.push_back({q, cfg.network, {}, e.partial_report()});
            } catch (const Divergence& e) {
                bundle.failures.push_back({method, q, "divergence", e.what()});
            } catch (const DegenerateInput& e) {
                bundle.failures.push_back({method, q, "degenerate", e.what()});
            } catch (const InvalidArgument& e) {
                bundle.failures.push_back({method, q, "invalid", e.what()});
            }
        }
    }
    bundle.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return bundle;
}

// ---------------------------------------------------------------- output

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << contents;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string metrics_csv(const std::vector<MetricRecord>& metrics) {
    std::string out = "method,q,seed,metric,value\n";
    for (const auto& m : metrics)
        out += m.method + "," + std::to_string(m.q) + "," + std::to_string(m.seed) + "," + m.metric + "," +
               format_double(m.value) + "\n";
    return out;
}

std::string matrix_csv(const Matrix& m, const std::string& column_prefix) {
    std::string out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + column_prefix + std::to_string(j + 1);
    out += '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + format_double(m(i, j));
        out += '\n';
    }
    return out;
}

std::vector<ManifestEntry> write_results(const ResultBundle& bundle, const fs::path& dir) {
    std::vector<ManifestEntry> manifest;
    auto emit = [&](const std::string& rel, const std::string& contents) {
        write_file(dir / rel, contents);
        manifest.push_back({rel, sha256_hex(contents), contents.size()});
    };

    emit("metrics.csv", metrics_csv(bundle.metrics));
    emit("config.json", to_json(bundle.config).dump(2) + "\n");

    Json results{{"started_at", bundle.started_at},
                 {"wall_clock_seconds", bundle.wall_clock_seconds},
                 {"rows_rejected", bundle.rows_rejected}};
    Json records = Json::array();
    for (const auto& m : bundle.metrics)
        records.push_back({{"method", m.method}, {"q", m.q}, {"seed", m.seed}, {"metric", m.metric},
                           {"value", m.value}, {"timestamp", m.timestamp}});
    results["metrics"] = std::move(records);
    Json failures = Json::array();
    for (const auto& f : bundle.failures)
        failures.push_back({{"method", f.method}, {"q", f.q}, {"kind", f.kind}, {"message", f.message}});
    results["failures"] = std::move(failures);
    emit("results.json", results.dump(2) + "\n");

    for (const auto& f : bundle.features) {
        const std::string stem = "features/" + f.method + "_q" + std::to_string(f.q);
        emit(stem + "_train.csv", matrix_csv(f.train, "Z"));
        emit(stem + "_test.csv", matrix_csv(f.test, "Z"));
    }
    for (const auto& run : bundle.runs) {
        const std::string stem = "stonet_q" + std::to_string(run.q);
        emit("logs/" + stem + ".jsonl", report_jsonl(run.report));
        emit("logs/" + stem + "_summary.json", report_summary(run.report).dump(2) + "\n");
        if (!run.theta.layers.empty()) emit("models/" + stem + "_theta.json", theta_to_json(run.spec, run.theta).dump() + "\n");
    }

    Json files = Json::array();
    for (const auto& e : manifest) files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    write_file(dir / "manifest.json", Json{{"files", files}}.dump(2) + "\n");
    return manifest;
}

}  // namespace stonet
