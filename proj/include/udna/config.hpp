#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "udna/engine.hpp"

namespace udna {

// Configuration mistake tied to one field; field uses dotted-path notation
// ("network.density"). what() embeds the field so callers can just print it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ProblemConfig {
  std::string kind = "synthetic-logistic";  // or synthetic-quadratic, libsvm
  std::string path;                         // libsvm dataset file
  std::string partition = "contiguous";     // or strided (libsvm)
  double lambda_hat = 1.0;
  std::uint64_t seed = 1;
  int p = 10;  // decision dimension (synthetic)
  int m = 50;  // samples per node (synthetic logistic)
  double feature_scale = 1.0;
  double flip_fraction = 0.1;
  double min_curvature = 0.5;
  double max_curvature = 2.0;
};

struct NetworkConfig {
  int n = 5;
  double density = 0.5;
  std::uint64_t seed = 2;
};

struct OutputConfig {
  std::string trace = "trace.csv";
  std::string summary = "summary.json";
  int record_every = 1;
};

struct RunConfig {
  ProblemConfig problem;
  NetworkConfig network;
  AlgoConfig algorithm;
  OutputConfig output;
};

// Strict parse: unknown keys anywhere are rejected, every complaint names
// the dotted field. The algorithm section takes either a preset name (plus
// optional power for the multi-round preset) or explicit polynomial
// coefficient arrays and a scheme name; scheme_params may override any
// subset of the direction-scheme knobs in both forms.
RunConfig parse_run_config(const nlohmann::json& j);

// Reads and parses a JSON file; file and syntax errors surface as
// ConfigError on the pseudo-field "<path>".
RunConfig load_run_config(const std::string& path);

// Canonical JSON echo of a parsed config: defaults materialized, scheme
// parameters spelled out in full, alpha rendered as "auto" or a number.
// parse_run_config(canonical_config(c)) reproduces c exactly.
nlohmann::json canonical_config(const RunConfig& c);

// Instantiates the objective for n nodes from the problem section (seeded
// synthetic generators or a partitioned libsvm file).
Problem build_problem(const ProblemConfig& pc, int n);

}  // namespace udna
