#include "stonet/serialize.hpp"

#include "stonet/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <sstream>

namespace stonet {

namespace {

void expect_format(const Json& j, const std::string& kind) {
    if (!j.is_object() || !j.contains("format") || j.at("format") != kind)
        throw ConfigError("expected a '" + kind + "' document");
    const int version = j.value("version", 0);
    if (version != kFormatVersion)
        throw ConfigError("unsupported " + kind + " version " + std::to_string(version));
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
    return guarded("matrix", [&] {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto& data = j.at("data");
        if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
            throw ConfigError("matrix: data length does not match rows*cols");
        Matrix m(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
        return m;
    });
}

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j) {
    return guarded("vector", [&] {
        const auto values = j.get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
    });
}

Json to_json(const NetworkSpec& spec) {
    return Json{{"widths", spec.widths},
                {"activation", to_string(spec.activation)},
                {"task", to_string(spec.task)},
                {"noise_vars", spec.noise_vars}};
}

NetworkSpec network_spec_from_json(const Json& j) {
    return guarded("network", [&] {
        NetworkSpec spec;
        spec.widths = j.at("widths").get<std::vector<int>>();
        spec.activation = parse_activation(j.value("activation", std::string("tanh")));
        spec.task = parse_task(j.value("task", std::string("regression")));
        spec.noise_vars = j.at("noise_vars").get<std::vector<double>>();
        spec.validate();
        return spec;
    });
}

Json theta_to_json(const NetworkSpec& spec, const Theta& theta) {
    theta.check_shapes(spec);
    Json layers = Json::array();
    for (const auto& l : theta.layers)
        layers.push_back(Json{{"weights", matrix_to_json(l.weights)}, {"bias", vector_to_json(l.bias)}});
    return Json{{"format", "stonet.theta"},
                {"version", kFormatVersion},
                {"network", to_json(spec)},
                {"layers", std::move(layers)}};
}

ThetaFile theta_from_json(const Json& j) {
    expect_format(j, "stonet.theta");
    return guarded("theta", [&] {
        ThetaFile f;
        f.spec = network_spec_from_json(j.at("network"));
        for (const auto& l : j.at("layers"))
            f.theta.layers.push_back({matrix_from_json(l.at("weights")), vector_from_json(l.at("bias"))});
        f.theta.check_shapes(f.spec);
        if (!f.theta.all_finite()) throw ConfigError("theta contains non-finite values");
        return f;
    });
}

Json to_json(const Schedule& s) {
    if (s.constant) return Json{{"constant", s.scale}, {"per_n", s.per_n}};
    return Json{{"scale", s.scale}, {"offset", s.offset}, {"alpha", s.alpha}, {"per_n", s.per_n}};
}

Schedule schedule_from_json(const Json& j) {
    return guarded("schedule", [&] {
        const bool per_n = j.value("per_n", false);
        Schedule s = j.contains("constant")
                         ? Schedule::fixed(j.at("constant").get<double>(), per_n)
                         : Schedule::decaying(j.at("scale").get<double>(), j.value("offset", 0.0),
                                              j.at("alpha").get<double>(), per_n);
        s.validate();
        return s;
    });
}

namespace {

Json schedules_to_json(const std::vector<Schedule>& v) {
    Json a = Json::array();
    for (const auto& s : v) a.push_back(to_json(s));
    return a;
}

std::vector<Schedule> schedules_from_json(const Json& j) {
    std::vector<Schedule> out;
    if (j.is_array()) {
        for (const auto& s : j) out.push_back(schedule_from_json(s));
    } else {
        out.push_back(schedule_from_json(j));
    }
    if (out.empty()) throw ConfigError("gamma schedule list is empty");
    return out;
}

}  // namespace

Json to_json(const TrainConfig& cfg) {
    return Json{{"t_hmc", cfg.t_hmc},
                {"eta", cfg.eta},
                {"beta", cfg.beta},
                {"eps_schedule", {{"theta", to_json(cfg.eps_theta)}, {"sdr", to_json(cfg.eps_sdr)}}},
                {"gamma_schedule",
                 {{"theta", schedules_to_json(cfg.gamma_theta)}, {"sdr", schedules_to_json(cfg.gamma_sdr)}}},
                {"batch_size", cfg.batch_size},
                {"theta_stage_epochs", cfg.theta_stage_epochs},
                {"sdr_stage_epochs", cfg.sdr_stage_epochs},
                {"sdr_average_sweeps", cfg.sdr_average_sweeps},
                {"loss_every_epochs", cfg.loss_every_epochs},
                {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults) {
    return guarded("train", [&] {
        TrainConfig cfg = defaults;
        cfg.t_hmc = j.value("t_hmc", cfg.t_hmc);
        cfg.eta = j.value("eta", cfg.eta);
        cfg.beta = j.value("beta", cfg.beta);
        if (j.contains("eps_schedule")) {
            const auto& e = j.at("eps_schedule");
            if (e.contains("theta")) cfg.eps_theta = schedule_from_json(e.at("theta"));
            if (e.contains("sdr")) cfg.eps_sdr = schedule_from_json(e.at("sdr"));
        }
        if (j.contains("gamma_schedule")) {
            const auto& g = j.at("gamma_schedule");
            if (g.contains("theta")) cfg.gamma_theta = schedules_from_json(g.at("theta"));
            if (g.contains("sdr")) cfg.gamma_sdr = schedules_from_json(g.at("sdr"));
        }
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.theta_stage_epochs = j.value("theta_stage_epochs", cfg.theta_stage_epochs);
        cfg.sdr_stage_epochs = j.value("sdr_stage_epochs", cfg.sdr_stage_epochs);
        cfg.sdr_average_sweeps = j.value("sdr_average_sweeps", cfg.sdr_average_sweeps);
        cfg.loss_every_epochs = j.value("loss_every_epochs", cfg.loss_every_epochs);
        cfg.seed = j.value("seed", cfg.seed);
        return cfg;
    });
}

Json to_json(const LinearReducer& r) {
    return Json{{"format", "stonet.reducer"},
                {"version", kFormatVersion},
                {"method", to_string(r.method)},
                {"projection", matrix_to_json(r.projection)},
                {"center", vector_to_json(r.center)},
                {"whitened", r.whitened},
                {"whitener", matrix_to_json(r.whitener)},
                {"eigenvalues", vector_to_json(r.eigenvalues)},
                {"ridge", r.ridge}};
}

LinearReducer reducer_from_json(const Json& j) {
    expect_format(j, "stonet.reducer");
    return guarded("reducer", [&] {
        LinearReducer r;
        r.method = parse_reducer_method(j.at("method").get<std::string>());
        r.projection = matrix_from_json(j.at("projection"));
        r.center = vector_from_json(j.at("center"));
        r.whitened = j.value("whitened", false);
        r.whitener = matrix_from_json(j.at("whitener"));
        r.eigenvalues = vector_from_json(j.at("eigenvalues"));
        r.ridge = j.value("ridge", 0.0);
        if (r.projection.rows() != r.center.size()) throw ConfigError("reducer: inconsistent shapes");
        return r;
    });
}

Json to_json(const HeadModel& h) {
    return Json{{"format", "stonet.head"},
                {"version", kFormatVersion},
                {"kind", to_string(h.kind)},
                {"weights", matrix_to_json(h.weights)},
                {"iterations", h.meta.iterations},
                {"objective", h.meta.objective},
                {"converged", h.meta.converged},
                {"ridge", h.meta.ridge}};
}

HeadModel head_from_json(const Json& j) {
    expect_format(j, "stonet.head");
    return guarded("head", [&] {
        HeadModel h;
        h.kind = parse_head_kind(j.at("kind").get<std::string>());
        h.weights = matrix_from_json(j.at("weights"));
        h.meta.iterations = j.value("iterations", 0);
        h.meta.objective = j.value("objective", 0.0);
        h.meta.converged = j.value("converged", true);
        h.meta.ridge = j.value("ridge", 0.0);
        return h;
    });
}

Json to_json(const IterationRecord& rec) {
    Json j{{"k", rec.iteration},
           {"stage", to_string(rec.stage)},
           {"stage_k", rec.stage_iteration},
           {"epoch", rec.epoch},
           {"eps", rec.eps},
           {"gamma", rec.gammas},
           {"update_norms", rec.update_norms}};
    j["loss"] = rec.loss ? Json(*rec.loss) : Json(nullptr);
    return j;
}

std::string report_jsonl(const TrainReport& report) {
    std::string out;
    for (const auto& rec : report.records) {
        out += to_json(rec).dump();
        out += '\n';
    }
    return out;
}

Json report_summary(const TrainReport& report) {
    Json j{{"iterations", report.records.size()},
           {"warnings", report.warnings},
           {"theta_stage_seconds", report.theta_stage_seconds},
           {"sdr_stage_seconds", report.sdr_stage_seconds}};
    Json last_loss = nullptr;
    for (auto it = report.records.rbegin(); it != report.records.rend(); ++it)
        if (it->loss) {
            last_loss = *it->loss;
            break;
        }
    j["final_loss"] = last_loss;
    return j;
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 computation failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string spec_fingerprint(const NetworkSpec& spec) { return sha256_hex(to_json(spec).dump()); }

}  // namespace stonet
