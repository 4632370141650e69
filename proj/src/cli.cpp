#include "udna/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include "udna/diagnostics.hpp"
#include "udna/trace_io.hpp"

namespace udna {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

fs::path resolve(const std::string& out_dir, const std::string& file) {
  fs::path p(file);
  if (p.is_absolute()) return p;
  return fs::path(out_dir) / p;
}

void ensure_dir(const std::string& out_dir) {
  if (!out_dir.empty() && out_dir != ".") {
    fs::create_directories(out_dir);
  }
}

struct LoadedRun {
  RunConfig config;
  Graph graph;
  MixingMatrix w;
  Problem problem;
};

LoadedRun load_instance(const std::string& config_path) {
  RunConfig config = load_run_config(config_path);
  Graph graph = build_graph(config.network.n, config.network.density,
                            config.network.seed);
  MixingMatrix w = metropolis_weights(graph);
  Problem problem = build_problem(config.problem, config.network.n);
  return {std::move(config), std::move(graph), std::move(w),
          std::move(problem)};
}

json summary_json(const LoadedRun& inst, const RunResult& r,
                  double wall_time_s) {
  const TraceRow& last = r.trace.back();
  json summary;
  summary["schema"] = kTraceSchemaVersion;
  summary["status"] = run_status_name(r.status);
  summary["iterations"] = r.iterations;
  summary["volume"] = r.volume;
  summary["wall_time_s"] = wall_time_s;
  summary["final"] = json{{"f", last.f},
                          {"opt_err", last.opt_err},
                          {"eps_stat", last.eps_stat},
                          {"consensus_sq", last.consensus_sq},
                          {"tracking_sq", last.tracking_sq},
                          {"v_sq", last.v_sq},
                          {"potential", last.potential}};
  summary["alpha"] = json{
      {"used", r.setup.alpha},
      {"bound", r.setup.alpha_bound},
      {"auto", inst.config.algorithm.auto_alpha},
      {"tracking_term_dropped", r.setup.alpha_tracking_term_dropped}};
  summary["curvature"] = json{{"psi", r.setup.psi},
                              {"psi_cap", r.setup.psi_cap},
                              {"certified", r.setup.curvature_certified},
                              {"psi_realized", r.psi_realized},
                              {"psi_cap_realized", r.psi_cap_realized}};
  summary["spectral"] = json{{"sigma", r.setup.sc.sigma},
                             {"sigma_a", r.setup.sc.sigma_a},
                             {"sigma_b", r.setup.sc.sigma_b},
                             {"sigma_c", r.setup.sc.sigma_c},
                             {"sigma_d", r.setup.sc.sigma_d}};
  summary["potential"] = json{
      {"coefficient", r.setup.potential_coeff},
      {"tracking_defined", r.setup.potential_tracking_defined}};
  summary["descent"] = json{{"a1", r.setup.coeffs.a1},
                            {"a2", r.setup.coeffs.a2},
                            {"a3", r.setup.coeffs.a3},
                            {"gamma", r.setup.coeffs.gamma}};
  summary["tracking"] = json{{"max_violation", r.max_tracking_violation}};
  summary["rounds_per_iter"] = r.setup.rounds_per_iter;
  summary["graph"] = json{{"n", inst.graph.n},
                          {"edges", inst.graph.edge_count()},
                          {"density_realized", inst.graph.realized_density()},
                          {"lipschitz", inst.problem.lipschitz()}};
  summary["config"] = canonical_config(inst.config);
  return summary;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() +
                             " for writing");
  }
  out << j.dump(2) << "\n";
}

struct MemberOutcome {
  std::string label;
  std::string status;  // run status, "error", or "not-run"
  bool reached = false;
  int t_reach = 0;
  long long volume_reach = 0;
  double final_opt_err = std::numeric_limits<double>::quiet_NaN();
  std::vector<TraceRow> trace;
};

AlgoConfig member_algorithm(const std::string& entry,
                            const AlgoConfig& base) {
  std::string name = entry;
  int power = 1;
  const std::size_t colon = entry.find(':');
  if (colon != std::string::npos) {
    name = entry.substr(0, colon);
    power = std::stoi(entry.substr(colon + 1));
  }
  AlgoConfig ac = preset(name, power);
  ac.scheme_params = base.scheme_params;
  ac.auto_alpha = base.auto_alpha;
  ac.alpha = base.alpha;
  ac.psi_override = base.psi_override;
  ac.psi_cap_override = base.psi_cap_override;
  ac.max_iters = base.max_iters;
  ac.stop_tol = base.stop_tol;
  ac.record_every = base.record_every;
  return ac;
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  try {
    LoadedRun inst = load_instance(config_path);
    inst.config.algorithm.record_every = inst.config.output.record_every;

    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r =
        run(inst.problem, inst.w, inst.graph.edge_count(),
            inst.config.algorithm);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    ensure_dir(out_dir);
    const fs::path trace_path = resolve(out_dir, inst.config.output.trace);
    const fs::path summary_path =
        resolve(out_dir, inst.config.output.summary);
    write_trace_csv(trace_path.string(), r.trace);
    write_json(summary_path, summary_json(inst, r, wall));

    std::cout << "status=" << run_status_name(r.status)
              << " iterations=" << r.iterations << " volume=" << r.volume
              << " opt_err=" << fmt(r.trace.back().opt_err)
              << " trace=" << trace_path.string()
              << " summary=" << summary_path.string() << "\n";
    return r.status == RunStatus::Diverged ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_compare(const std::string& config_path,
                const std::vector<std::string>& presets, double threshold,
                const std::string& out_dir) {
  if (presets.size() < 2) {
    std::cerr << "error: compare needs at least two presets\n";
    return 1;
  }
  std::optional<LoadedRun> loaded;
  try {
    loaded.emplace(load_instance(config_path));
    loaded->config.algorithm.record_every =
        loaded->config.output.record_every;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  LoadedRun& inst = *loaded;

  std::vector<MemberOutcome> members;
  members.reserve(presets.size());
  int usable = 0;
  for (const std::string& entry : presets) {
    MemberOutcome m;
    m.label = entry;
    try {
      const AlgoConfig ac =
          member_algorithm(entry, inst.config.algorithm);
      const RunResult r =
          run(inst.problem, inst.w, inst.graph.edge_count(), ac);
      m.status = run_status_name(r.status);
      m.trace = r.trace;
      m.final_opt_err = r.trace.back().opt_err;
      for (const TraceRow& row : r.trace) {
        if (row.opt_err <= threshold) {
          m.reached = true;
          m.t_reach = row.t;
          m.volume_reach = row.volume;
          break;
        }
      }
      ++usable;
    } catch (const std::exception& e) {
      m.status = "error";
      std::cerr << "warning: preset " << entry << " failed: " << e.what()
                << "\n";
    }
    members.push_back(std::move(m));
  }
  if (usable == 0) {
    std::cerr << "error: every preset failed\n";
    return 1;
  }

  ensure_dir(out_dir);
  const fs::path long_path = resolve(out_dir, "compare.csv");
  {
    std::ofstream out(long_path);
    out << "preset,t,volume,opt_err\n";
    for (const MemberOutcome& m : members) {
      for (const TraceRow& row : m.trace) {
        out << m.label << ',' << row.t << ',' << row.volume << ','
            << fmt(row.opt_err) << "\n";
      }
    }
  }

  std::vector<int> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<int>(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const MemberOutcome& ma = members[a];
    const MemberOutcome& mb = members[b];
    if (ma.reached != mb.reached) return ma.reached;
    if (ma.reached && ma.volume_reach != mb.volume_reach) {
      return ma.volume_reach < mb.volume_reach;
    }
    return a < b;
  });
  std::vector<int> rank(members.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const MemberOutcome& m = members[order[pos]];
    if (pos == 0) {
      rank[order[pos]] = 1;
      continue;
    }
    const MemberOutcome& prev = members[order[pos - 1]];
    const bool tie = m.reached == prev.reached &&
                     (!m.reached || m.volume_reach == prev.volume_reach);
    rank[order[pos]] = tie ? rank[order[pos - 1]]
                           : static_cast<int>(pos) + 1;
  }

  const fs::path rank_path = resolve(out_dir, "ranking.csv");
  {
    std::ofstream out(rank_path);
    out << "rank,preset,reached,t_to_threshold,volume_to_threshold,"
           "final_opt_err,status\n";
    for (int idx : order) {
      const MemberOutcome& m = members[idx];
      out << rank[idx] << ',' << m.label << ','
          << (m.reached ? "yes" : "no") << ',';
      if (m.reached) {
        out << m.t_reach << ',' << m.volume_reach;
      } else {
        out << ",";
      }
      out << ',' << fmt(m.final_opt_err) << ',' << m.status << "\n";
    }
  }

  std::cout << "compare=" << long_path.string()
            << " ranking=" << rank_path.string() << "\n";
  return 0;
}

int cmd_diag(const std::string& trace_path, const std::string& config_path,
             const std::string& out_dir) {
  try {
    LoadedRun inst = load_instance(config_path);
    const RunSetup setup =
        resolve_setup(inst.problem, inst.w, inst.config.algorithm);
    const std::vector<TraceRow> trace = read_trace_csv(trace_path);
    if (trace.empty()) {
      throw std::runtime_error(trace_path + ": trace has no rows");
    }

    const KLWitness witness =
        kl_witness(trace, setup.sc, inst.problem.lipschitz(), inst.w.n,
                   setup.alpha, setup.psi, setup.psi_cap);
    const DescentReport descent =
        descent_report(trace, setup.coeffs, setup.alpha);
    std::vector<double> residuals;
    residuals.reserve(trace.size());
    for (const TraceRow& row : trace) residuals.push_back(row.opt_err);
    const RateFit fit = rate_fit(residuals);

    json diag;
    diag["schema"] = kTraceSchemaVersion;
    diag["witness"] = json{
        {"gamma", witness.gamma},
        {"c1", witness.c1},
        {"c2", witness.c2},
        {"c3", witness.c3},
        {"ok", witness.ok},
        {"worst",
         json{{"descent", witness.worst_descent},
              {"step", witness.worst_step},
              {"value", witness.worst_value},
              {"gradient", witness.worst_gradient}}},
        {"limit_proxy",
         "final-iterate proxy; it cancels from the descent and value "
         "inequalities"}};
    diag["descent"] = json{{"ok", descent.ok},
                           {"min_margin", descent.min_margin},
                           {"min_scaled_margin", descent.min_scaled_margin},
                           {"a1", setup.coeffs.a1},
                           {"a2", setup.coeffs.a2},
                           {"a3", setup.coeffs.a3},
                           {"gamma", setup.coeffs.gamma},
                           {"alpha", setup.alpha}};
    diag["rate"] = json{{"regime", rate_regime_name(fit.regime)},
                        {"rate", fit.rate},
                        {"exponent", fit.exponent},
                        {"r2", fit.r2},
                        {"window", json::array({fit.window_begin,
                                                fit.window_end})},
                        {"series", "opt_err"},
                        {"limit_proxy", "none (residual is opt_err)"}};

    ensure_dir(out_dir);
    const fs::path diag_path = resolve(out_dir, "diag.json");
    write_json(diag_path, diag);

    const fs::path margins_path = resolve(out_dir, "margins.csv");
    {
      std::ofstream out(margins_path);
      out << "# udna-margins v" << kTraceSchemaVersion << "\n";
      out << "t,F,consensus_sq,tracking_sq,v_sq,P,opt_err,eps_stat,volume,"
             "dx,gbar_norm,descent_margin,step_margin,value_margin,"
             "gradient_margin,potential_drop_margin\n";
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const TraceRow& r = trace[i];
        const bool has = i + 1 < trace.size();
        out << r.t << ',' << fmt(r.f) << ',' << fmt(r.consensus_sq) << ','
            << fmt(r.tracking_sq) << ',' << fmt(r.v_sq) << ','
            << fmt(r.potential) << ',' << fmt(r.opt_err) << ','
            << fmt(r.eps_stat) << ',' << r.volume << ',' << fmt(r.dx)
            << ',' << fmt(r.gbar_norm) << ','
            << fmt(has ? witness.descent_margin[i] : nan) << ','
            << fmt(has ? witness.step_margin[i] : nan) << ','
            << fmt(has ? witness.value_margin[i] : nan) << ','
            << fmt(has ? witness.gradient_margin[i] : nan) << ','
            << fmt(has ? descent.margins[i] : nan) << "\n";
      }
    }

    std::cout << "diag=" << diag_path.string()
              << " margins=" << margins_path.string()
              << " witness_ok=" << (witness.ok ? "yes" : "no")
              << " descent_ok=" << (descent.ok ? "yes" : "no")
              << " rate=" << rate_regime_name(fit.regime) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace udna
