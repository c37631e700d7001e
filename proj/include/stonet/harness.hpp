#pragma once

#include "stonet/likelihood.hpp"
#include "stonet/model.hpp"
#include "stonet/numerics.hpp"
#include "stonet/serialize.hpp"
#include "stonet/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stonet {

struct Dataset {
    Matrix x;         // n x p
    Targets y;        // one column (or label) per observation
    Task task = Task::regression;
    std::vector<std::string> feature_names;
    std::vector<std::string> response_names;
    std::vector<std::string> class_names;  // class_names[label]
    std::string split = "full";            // "full", "train" or "test"
    std::size_t rows_rejected = 0;
    std::optional<StandardizationStats> standardization;

    Eigen::Index size() const { return x.rows(); }
    int classes() const { return static_cast<int>(class_names.size()); }
    Dataset subset(const std::vector<std::size_t>& rows, const std::string& tag) const;
    /// First response column, or the labels as reals; the SIR slicing variable.
    Vector response_vector() const;
    /// Observations in columns, as the trainer expects.
    TrainingData training_data() const;
};

struct CsvSchema {
    std::vector<std::string> response_columns;  // regression
    std::string label_column;                   // classification when non-empty
    bool has_header = true;
    bool operator==(const CsvSchema&) const = default;
};

/// Rows containing a missing or non-finite value (empty, NA, NaN, inf) are
/// dropped and counted. Without a header, columns are named c1..cK. With no
/// response or label column configured, the last column is the response.
/// Labels map to 0..C-1 in sorted order (numeric when every label parses as a
/// number).
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Single-index benchmark: x ~ N(0, I_20), y = cos(x^T b) + GN(0, noise_scale, 0.5),
/// b holding 1/sqrt(6) in its first six entries.
Dataset gen_m1(long n, RngStream& stream, double noise_scale = 0.7071067811865476);
Vector m1_direction();

/// Two classes split by the circle x1^2 + x2^2 = 2 ln 2 (equal mass under
/// N(0, I)); the remaining p - 2 coordinates are noise.
Dataset gen_circle(long n, int p, RngStream& stream);

/// Permutation split; classification splits each class separately.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, RngStream& stream);

struct SyntheticRecipe {
    std::string kind = "m1";  // "m1" or "circle"
    long n = 100;
    int p = 20;
    double noise_scale = 0.7071067811865476;
    std::uint64_t seed = 1;
    bool operator==(const SyntheticRecipe&) const = default;
};

struct DataSource {
    std::string path;
    CsvSchema schema;
    std::optional<SyntheticRecipe> synthetic;
    bool operator==(const DataSource&) const = default;
};

Dataset load_dataset(const DataSource& source);

struct SplitConfig {
    double fraction = 0.8;
    std::uint64_t seed = 7;
    bool operator==(const SplitConfig&) const = default;
};

struct ExperimentConfig {
    DataSource dataset;
    NetworkSpec network;  // widths[h] is replaced by each q for the StoNet
    TrainConfig train;
    std::vector<std::string> reducers{"stonet", "pca", "sir"};
    std::vector<int> q{1};
    std::string head = "auto";  // "auto", "linear" or "logistic"
    int sir_slices = 10;
    bool standardize = true;
    SplitConfig split;
    std::string output_dir = "results";
    bool operator==(const ExperimentConfig&) const = default;
};

Json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct MetricRecord {
    std::string method;
    int q = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
    std::string timestamp;  // UTC, ISO 8601
};

struct FeatureSet {
    std::string method;
    int q = 0;
    Matrix train;  // n_train x q
    Matrix test;   // n_test x q
};

struct StoNetRun {
    int q = 0;
    NetworkSpec spec;
    Theta theta;
    TrainReport report;
};

struct MethodFailure {
    std::string method;
    int q = 0;
    std::string kind;  // "divergence", "degenerate", "invalid"
    std::string message;
};

struct ResultBundle {
    ExperimentConfig config;
    std::vector<MetricRecord> metrics;
    std::vector<FeatureSet> features;
    std::vector<StoNetRun> runs;
    std::vector<MethodFailure> failures;
    std::size_t rows_rejected = 0;
    std::string started_at;
    double wall_clock_seconds = 0.0;
};

TrainResult train_stonet(const NetworkSpec& spec, const Dataset& train, const TrainConfig& cfg);

/// One (method, q) cell on already split and standardized data.
struct CellResult {
    FeatureSet features;
    std::vector<MetricRecord> metrics;
    std::optional<StoNetRun> run;
};
CellResult run_cell(const ExperimentConfig& cfg, const std::string& method, int q,
                    const Dataset& train, const Dataset& test);

/// reduce -> fit head -> evaluate for every configured method and q. A failing
/// cell is recorded in `failures` and the remaining cells still run.
ResultBundle run_experiment(const ExperimentConfig& cfg);

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Writes metrics.csv, results.json, config.json, features/, logs/, models/
/// and manifest.json; returns the manifest entries.
std::vector<ManifestEntry> write_results(const ResultBundle& bundle, const std::filesystem::path& dir);

/// "method,q,seed,metric,value" table; no timestamps so reruns are byte-identical.
std::string metrics_csv(const std::vector<MetricRecord>& metrics);
std::string matrix_csv(const Matrix& m, const std::string& column_prefix);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace stonet
