#include "udna/config.hpp"

#include <fstream>
#include <initializer_list>
#include <vector>

namespace udna {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(section + "." + it.key(), "unknown key");
    }
  }
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const json& j, const std::string& field) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) {
    throw ConfigError(field, "expected a nonnegative integer");
  }
  if (j.is_number_integer() && j.get<long long>() < 0) {
    throw ConfigError(field, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) throw ConfigError(field, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) throw ConfigError(field, "expected a boolean");
  return j.get<bool>();
}

PolySpec get_poly(const json& j, const std::string& field,
                  PolySpec::Role role) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(field, "expected a nonempty coefficient array");
  }
  PolySpec p;
  p.role = role;
  for (const json& c : j) {
    p.coeffs.push_back(get_number(c, field));
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
  return p;
}

ProblemConfig parse_problem(const json& j) {
  ProblemConfig pc;
  if (const json* k = find(j, "kind")) {
    pc.kind = get_string(*k, "problem.kind");
  }
  if (pc.kind == "synthetic-logistic") {
    check_keys(j, "problem",
               {"kind", "seed", "p", "m", "lambda_hat", "feature_scale",
                "flip_fraction"});
  } else if (pc.kind == "synthetic-quadratic") {
    check_keys(j, "problem",
               {"kind", "seed", "p", "min_curvature", "max_curvature"});
  } else if (pc.kind == "libsvm") {
    check_keys(j, "problem",
               {"kind", "seed", "path", "partition", "lambda_hat"});
    if (find(j, "path") == nullptr) {
      throw ConfigError("problem.path", "required for the libsvm kind");
    }
  } else {
    throw ConfigError("problem.kind",
                      "must be synthetic-logistic, synthetic-quadratic, or "
                      "libsvm");
  }

  if (const json* v = find(j, "seed")) pc.seed = get_seed(*v, "problem.seed");
  if (const json* v = find(j, "path")) {
    pc.path = get_string(*v, "problem.path");
  }
  if (const json* v = find(j, "partition")) {
    pc.partition = get_string(*v, "problem.partition");
    if (pc.partition != "contiguous" && pc.partition != "strided") {
      throw ConfigError("problem.partition",
                        "must be contiguous or strided");
    }
  }
  if (const json* v = find(j, "lambda_hat")) {
    pc.lambda_hat = get_number(*v, "problem.lambda_hat");
    if (pc.lambda_hat < 0.0) {
      throw ConfigError("problem.lambda_hat", "must be nonnegative");
    }
  }
  if (const json* v = find(j, "p")) {
    pc.p = get_int(*v, "problem.p");
    if (pc.p < 1) throw ConfigError("problem.p", "must be at least 1");
  }
  if (const json* v = find(j, "m")) {
    pc.m = get_int(*v, "problem.m");
    if (pc.m < 1) throw ConfigError("problem.m", "must be at least 1");
  }
  if (const json* v = find(j, "feature_scale")) {
    pc.feature_scale = get_number(*v, "problem.feature_scale");
    if (pc.feature_scale <= 0.0) {
      throw ConfigError("problem.feature_scale", "must be positive");
    }
  }
  if (const json* v = find(j, "flip_fraction")) {
    pc.flip_fraction = get_number(*v, "problem.flip_fraction");
    if (pc.flip_fraction < 0.0 || pc.flip_fraction > 1.0) {
      throw ConfigError("problem.flip_fraction", "must lie in [0, 1]");
    }
  }
  if (const json* v = find(j, "min_curvature")) {
    pc.min_curvature = get_number(*v, "problem.min_curvature");
  }
  if (const json* v = find(j, "max_curvature")) {
    pc.max_curvature = get_number(*v, "problem.max_curvature");
  }
  if (pc.min_curvature <= 0.0 || pc.max_curvature < pc.min_curvature) {
    throw ConfigError("problem.min_curvature",
                      "needs 0 < min_curvature <= max_curvature");
  }
  return pc;
}

NetworkConfig parse_network(const json& j) {
  check_keys(j, "network", {"n", "density", "seed"});
  NetworkConfig nc;
  if (const json* v = find(j, "n")) {
    nc.n = get_int(*v, "network.n");
    if (nc.n < 1) throw ConfigError("network.n", "must be at least 1");
  }
  if (const json* v = find(j, "density")) {
    nc.density = get_number(*v, "network.density");
  }
  if (nc.density <= 0.0 || nc.density > 1.0) {
    throw ConfigError("network.density", "must lie in (0, 1]");
  }
  if (const json* v = find(j, "seed")) {
    nc.seed = get_seed(*v, "network.seed");
  }
  return nc;
}

void parse_scheme_params(const json& j, SchemeParams& sp) {
  check_keys(j, "algorithm.scheme_params",
             {"sr1_lower", "sr1_upper", "bfgs_lower", "bfgs_upper",
              "bfgs_rho", "corr_lambda", "corr_cap", "bb_min", "bb_max",
              "bb_long", "dsg_min", "dsg_max", "eps_den"});
  const std::string base = "algorithm.scheme_params.";
  if (const json* v = find(j, "sr1_lower")) {
    sp.sr1_lower = get_number(*v, base + "sr1_lower");
  }
  if (const json* v = find(j, "sr1_upper")) {
    sp.sr1_upper = get_number(*v, base + "sr1_upper");
  }
  if (const json* v = find(j, "bfgs_lower")) {
    sp.bfgs_lower = get_number(*v, base + "bfgs_lower");
  }
  if (const json* v = find(j, "bfgs_upper")) {
    sp.bfgs_upper = get_number(*v, base + "bfgs_upper");
  }
  if (const json* v = find(j, "bfgs_rho")) {
    sp.bfgs_rho = get_number(*v, base + "bfgs_rho");
  }
  if (const json* v = find(j, "corr_lambda")) {
    sp.corr_lambda = get_number(*v, base + "corr_lambda");
  }
  if (const json* v = find(j, "corr_cap")) {
    sp.corr_cap = get_number(*v, base + "corr_cap");
  }
  if (const json* v = find(j, "bb_min")) {
    sp.bb_min = get_number(*v, base + "bb_min");
  }
  if (const json* v = find(j, "bb_max")) {
    sp.bb_max = get_number(*v, base + "bb_max");
  }
  if (const json* v = find(j, "bb_long")) {
    sp.bb_long = get_bool(*v, base + "bb_long");
  }
  if (const json* v = find(j, "dsg_min")) {
    sp.dsg_min = get_number(*v, base + "dsg_min");
  }
  if (const json* v = find(j, "dsg_max")) {
    sp.dsg_max = get_number(*v, base + "dsg_max");
  }
  if (const json* v = find(j, "eps_den")) {
    sp.eps_den = get_number(*v, base + "eps_den");
  }
}

AlgoConfig parse_algorithm(const json& j) {
  check_keys(j, "algorithm",
             {"preset", "power", "poly_a", "poly_b", "poly_c", "poly_d",
              "scheme", "scheme_params", "alpha", "psi", "psi_cap",
              "max_iters", "stop_tol"});

  AlgoConfig ac;
  if (const json* pv = find(j, "preset")) {
    const std::string name = get_string(*pv, "algorithm.preset");
    int power = 1;
    if (const json* kv = find(j, "power")) {
      power = get_int(*kv, "algorithm.power");
    }
    for (const char* banned : {"poly_a", "poly_b", "poly_c", "poly_d",
                               "scheme"}) {
      if (find(j, banned) != nullptr) {
        throw ConfigError(std::string("algorithm.") + banned,
                          "not allowed together with a preset");
      }
    }
    try {
      ac = preset(name, power);
    } catch (const std::exception& e) {
      throw ConfigError("algorithm.preset", e.what());
    }
  } else {
    if (find(j, "power") != nullptr) {
      throw ConfigError("algorithm.power", "only meaningful with a preset");
    }
    if (const json* v = find(j, "poly_a")) {
      ac.poly_a = get_poly(*v, "algorithm.poly_a", PolySpec::Role::A);
    }
    if (const json* v = find(j, "poly_b")) {
      ac.poly_b = get_poly(*v, "algorithm.poly_b", PolySpec::Role::B);
    }
    if (const json* v = find(j, "poly_c")) {
      ac.poly_c = get_poly(*v, "algorithm.poly_c", PolySpec::Role::C);
    }
    if (const json* v = find(j, "poly_d")) {
      ac.poly_d = get_poly(*v, "algorithm.poly_d", PolySpec::Role::D);
    }
    if (const json* v = find(j, "scheme")) {
      const std::string name = get_string(*v, "algorithm.scheme");
      const std::optional<Scheme> s = scheme_from_name(name);
      if (!s.has_value()) {
        throw ConfigError("algorithm.scheme",
                          "unknown scheme '" + name + "'");
      }
      ac.scheme = *s;
    }
  }

  if (const json* v = find(j, "scheme_params")) {
    if (!v->is_object()) {
      throw ConfigError("algorithm.scheme_params", "expected an object");
    }
    parse_scheme_params(*v, ac.scheme_params);
  }

  if (const json* v = find(j, "alpha")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "auto") {
        throw ConfigError("algorithm.alpha",
                          "expected \"auto\" or a positive number");
      }
      ac.auto_alpha = true;
    } else {
      const double a = get_number(*v, "algorithm.alpha");
      if (!(a > 0.0)) {
        throw ConfigError("algorithm.alpha", "must be positive");
      }
      ac.auto_alpha = false;
      ac.alpha = a;
    }
  }
  if (const json* v = find(j, "psi")) {
    ac.psi_override = get_number(*v, "algorithm.psi");
  }
  if (const json* v = find(j, "psi_cap")) {
    ac.psi_cap_override = get_number(*v, "algorithm.psi_cap");
  }
  if (ac.psi_override.has_value() &&
      !(ac.psi_override.value() > 0.0)) {
    throw ConfigError("algorithm.psi", "must be positive");
  }
  if (const json* v = find(j, "max_iters")) {
    ac.max_iters = get_int(*v, "algorithm.max_iters");
    if (ac.max_iters < 0) {
      throw ConfigError("algorithm.max_iters", "must be nonnegative");
    }
  }
  if (const json* v = find(j, "stop_tol")) {
    ac.stop_tol = get_number(*v, "algorithm.stop_tol");
    if (ac.stop_tol < 0.0) {
      throw ConfigError("algorithm.stop_tol", "must be nonnegative");
    }
  }
  return ac;
}

OutputConfig parse_output(const json& j) {
  check_keys(j, "output", {"trace", "summary", "record_every"});
  OutputConfig oc;
  if (const json* v = find(j, "trace")) {
    oc.trace = get_string(*v, "output.trace");
  }
  if (const json* v = find(j, "summary")) {
    oc.summary = get_string(*v, "output.summary");
  }
  if (const json* v = find(j, "record_every")) {
    oc.record_every = get_int(*v, "output.record_every");
    if (oc.record_every < 1) {
      throw ConfigError("output.record_every", "must be at least 1");
    }
  }
  return oc;
}

json scheme_params_json(const SchemeParams& sp) {
  return json{{"sr1_lower", sp.sr1_lower},
              {"sr1_upper", sp.sr1_upper},
              {"bfgs_lower", sp.bfgs_lower},
              {"bfgs_upper", sp.bfgs_upper},
              {"bfgs_rho", sp.bfgs_rho},
              {"corr_lambda", sp.corr_lambda},
              {"corr_cap", sp.corr_cap},
              {"bb_min", sp.bb_min},
              {"bb_max", sp.bb_max},
              {"bb_long", sp.bb_long},
              {"dsg_min", sp.dsg_min},
              {"dsg_max", sp.dsg_max},
              {"eps_den", sp.eps_den}};
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("config", "top level must be a JSON object");
  }
  check_keys(j, "config", {"problem", "network", "algorithm", "output"});
  RunConfig c;
  if (const json* v = find(j, "problem")) {
    if (!v->is_object()) throw ConfigError("problem", "expected an object");
    c.problem = parse_problem(*v);
  }
  if (const json* v = find(j, "network")) {
    if (!v->is_object()) throw ConfigError("network", "expected an object");
    c.network = parse_network(*v);
  }
  if (const json* v = find(j, "algorithm")) {
    if (!v->is_object()) {
      throw ConfigError("algorithm", "expected an object");
    }
    c.algorithm = parse_algorithm(*v);
  }
  if (const json* v = find(j, "output")) {
    if (!v->is_object()) throw ConfigError("output", "expected an object");
    c.output = parse_output(*v);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path, "cannot open config file");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json canonical_config(const RunConfig& c) {
  json problem;
  problem["kind"] = c.problem.kind;
  problem["seed"] = c.problem.seed;
  if (c.problem.kind == "synthetic-logistic") {
    problem["p"] = c.problem.p;
    problem["m"] = c.problem.m;
    problem["lambda_hat"] = c.problem.lambda_hat;
    problem["feature_scale"] = c.problem.feature_scale;
    problem["flip_fraction"] = c.problem.flip_fraction;
  } else if (c.problem.kind == "synthetic-quadratic") {
    problem["p"] = c.problem.p;
    problem["min_curvature"] = c.problem.min_curvature;
    problem["max_curvature"] = c.problem.max_curvature;
  } else {
    problem["path"] = c.problem.path;
    problem["partition"] = c.problem.partition;
    problem["lambda_hat"] = c.problem.lambda_hat;
  }

  json network{{"n", c.network.n},
               {"density", c.network.density},
               {"seed", c.network.seed}};

  json algorithm;
  if (c.algorithm.name != "custom") {
    algorithm["preset"] = c.algorithm.name;
    if (c.algorithm.name == "dgm-bb-c") {
      algorithm["power"] = c.algorithm.poly_a.degree();
    }
  } else {
    algorithm["poly_a"] = c.algorithm.poly_a.coeffs;
    algorithm["poly_b"] = c.algorithm.poly_b.coeffs;
    algorithm["poly_c"] = c.algorithm.poly_c.coeffs;
    algorithm["poly_d"] = c.algorithm.poly_d.coeffs;
    algorithm["scheme"] = scheme_name(c.algorithm.scheme);
  }
  algorithm["scheme_params"] = scheme_params_json(c.algorithm.scheme_params);
  if (c.algorithm.auto_alpha) {
    algorithm["alpha"] = "auto";
  } else {
    algorithm["alpha"] = c.algorithm.alpha;
  }
  if (c.algorithm.psi_override.has_value()) {
    algorithm["psi"] = *c.algorithm.psi_override;
  }
  if (c.algorithm.psi_cap_override.has_value()) {
    algorithm["psi_cap"] = *c.algorithm.psi_cap_override;
  }
  algorithm["max_iters"] = c.algorithm.max_iters;
  algorithm["stop_tol"] = c.algorithm.stop_tol;

  json output{{"trace", c.output.trace},
              {"summary", c.output.summary},
              {"record_every", c.output.record_every}};

  return json{{"problem", problem},
              {"network", network},
              {"algorithm", algorithm},
              {"output", output}};
}

Problem build_problem(const ProblemConfig& pc, int n) {
  if (pc.kind == "synthetic-logistic") {
    SyntheticOptions opts;
    opts.lambda_hat = pc.lambda_hat;
    opts.feature_scale = pc.feature_scale;
    opts.flip_fraction = pc.flip_fraction;
    return synthetic_problem(pc.seed, n, pc.p, pc.m,
                             Problem::Kind::LogisticNonconvex, opts);
  }
  if (pc.kind == "synthetic-quadratic") {
    SyntheticOptions opts;
    opts.min_curvature = pc.min_curvature;
    opts.max_curvature = pc.max_curvature;
    return synthetic_problem(pc.seed, n, pc.p, pc.m,
                             Problem::Kind::QuadraticSynthetic, opts);
  }
  Dataset d;
  try {
    d = parse_libsvm_file(pc.path);
  } catch (const std::exception& e) {
    throw ConfigError("problem.path", e.what());
  }
  const PartitionScheme scheme = pc.partition == "strided"
                                     ? PartitionScheme::Strided
                                     : PartitionScheme::Contiguous;
  std::vector<Shard> shards = partition(d, n, scheme, pc.seed);
  return Problem::logistic(std::move(shards), pc.lambda_hat);
}

}  // namespace udna
