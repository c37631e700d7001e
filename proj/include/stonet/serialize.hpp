#pragma once

#include "stonet/baselines.hpp"
#include "stonet/heads.hpp"
#include "stonet/model.hpp"
#include "stonet/trainer.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace stonet {

using Json = nlohmann::ordered_json;

/// Every persisted model carries {"format": <kind>, "version": kFormatVersion}.
inline constexpr int kFormatVersion = 1;

/// {"rows": r, "cols": c, "data": [row-major values]}
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const Json& j);

struct ThetaFile {
    NetworkSpec spec;
    Theta theta;
};
Json theta_to_json(const NetworkSpec& spec, const Theta& theta);
ThetaFile theta_from_json(const Json& j);

Json to_json(const Schedule& s);
Schedule schedule_from_json(const Json& j);
Json to_json(const TrainConfig& cfg);
/// Missing keys keep the values of `defaults`.
TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults = {});

Json to_json(const LinearReducer& r);
LinearReducer reducer_from_json(const Json& j);

Json to_json(const HeadModel& h);
HeadModel head_from_json(const Json& j);

Json to_json(const IterationRecord& rec);
/// One JSON object per line, one line per iteration.
std::string report_jsonl(const TrainReport& report);
Json report_summary(const TrainReport& report);

std::string sha256_hex(std::string_view bytes);
/// Hash of the canonical JSON form of a network spec.
std::string spec_fingerprint(const NetworkSpec& spec);

}  // namespace stonet
