#include "udna/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace udna {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using Role = PolySpec::Role;

PolySpec w_power(int k, Role r) { return PolySpec::power(k, r); }

}  // namespace

const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::ReachedMaxIters: return "max-iters";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

AlgoConfig preset(const std::string& name, int power) {
  AlgoConfig c;
  c.name = name;
  if (name == "non-atc-gt" || name == "dsg") {
    c.poly_a = w_power(1, Role::A);
    c.poly_b = PolySpec::identity(Role::B);
    c.poly_c = w_power(1, Role::C);
    c.poly_d = PolySpec::identity(Role::D);
    c.scheme = name == "dsg" ? Scheme::Dsg : Scheme::Identity;
  } else if (name == "atc-gt" || name == "udna1" || name == "udna2" ||
             name == "udna3" || name == "udna4") {
    c.poly_a = w_power(1, Role::A);
    c.poly_b = w_power(1, Role::B);
    c.poly_c = w_power(1, Role::C);
    c.poly_d = w_power(1, Role::D);
    if (name == "udna1") c.scheme = Scheme::Sr1Ml;
    if (name == "udna2") c.scheme = Scheme::BfgsMl;
    if (name == "udna3") c.scheme = Scheme::CorrectedDk;
    if (name == "udna4") c.scheme = Scheme::CorrectedHz;
  } else if (name == "semi-atc-gt") {
    c.poly_a = w_power(1, Role::A);
    c.poly_b = w_power(1, Role::B);
    c.poly_c = w_power(1, Role::C);
    c.poly_d = PolySpec::identity(Role::D);
    c.scheme = Scheme::Identity;
  } else if (name == "dqn") {
    c.poly_a = w_power(1, Role::A);
    c.poly_b = w_power(2, Role::B);
    c.poly_c = w_power(1, Role::C);
    c.poly_d = w_power(1, Role::D);
    c.scheme = Scheme::DqnBfgs;
  } else if (name == "dgm-bb-c") {
    if (power < 1) {
      throw std::invalid_argument("dgm-bb-c requires a power K >= 1");
    }
    c.poly_a = w_power(power, Role::A);
    c.poly_b = w_power(power, Role::B);
    c.poly_c = w_power(power, Role::C);
    c.poly_d = w_power(power, Role::D);
    c.scheme = Scheme::Bb;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

double max_stepsize(const SpectralConstants& sc, double lipschitz, int n,
                    double psi, double psi_cap,
                    bool* dropped_tracking_term) {
  if (!(lipschitz > 0.0)) {
    throw std::invalid_argument("max_stepsize requires L > 0");
  }
  if (!(psi > 0.0) || !(psi_cap >= psi)) {
    throw std::invalid_argument(
        "max_stepsize requires 0 < psi <= psi_cap");
  }
  if (sc.sigma_a >= 1.0 || sc.sigma_c >= 1.0) {
    throw std::invalid_argument(
        "max_stepsize requires contracting A and C polynomials");
  }
  const double nn = static_cast<double>(n);
  const double l2 = lipschitz * lipschitz;
  const double cap2 = psi_cap * psi_cap;
  const double gap_a = 1.0 - sc.sigma_a * sc.sigma_a;
  const double gap_c = 1.0 - sc.sigma_c * sc.sigma_c;

  const double term2 =
      gap_a * psi /
      ((2.0 * lipschitz + nn + 8.0 * sc.sigma_b * sc.sigma_b * nn) * cap2);
  const double term3 = gap_a * nn / (2.0 * l2 * cap2);
  double alpha = std::min(term2, term3);

  const bool drop = sc.sigma_d < kSigmaFloor;
  if (dropped_tracking_term != nullptr) *dropped_tracking_term = drop;
  if (!drop) {
    const double term1 = gap_a * gap_c * gap_c * nn /
                         (64.0 * l2 * sc.sigma_d * sc.sigma_d * cap2);
    alpha = std::min(alpha, term1);
  }
  return alpha;
}

DescentCoefficients descent_coefficients(const SpectralConstants& sc,
                                         double lipschitz, int n,
                                         double alpha, double psi,
                                         double psi_cap) {
  const double nn = static_cast<double>(n);
  const double l2 = lipschitz * lipschitz;
  const double cap2 = psi_cap * psi_cap;
  const double gap_a = 1.0 - sc.sigma_a * sc.sigma_a;
  const double gap_c = 1.0 - sc.sigma_c * sc.sigma_c;

  DescentCoefficients k;
  k.a1 = psi / (2.0 * nn) -
         (2.0 * lipschitz + nn + 8.0 * sc.sigma_b * sc.sigma_b * nn) * cap2 *
             alpha / (4.0 * nn * gap_a);
  k.a2 = sc.sigma_d < kSigmaFloor
             ? kInf
             : gap_a * gap_c * gap_c /
                       (32.0 * l2 * sc.sigma_d * sc.sigma_d) -
                   cap2 * alpha / nn;
  k.a3 = gap_a - l2 * cap2 * alpha / nn;
  k.gamma = std::min(k.a1, std::min(k.a2, k.a3));
  return k;
}

double potential_coefficient(const SpectralConstants& sc, double lipschitz,
                             bool* tracking_defined) {
  const bool defined = sc.sigma_d >= kSigmaFloor;
  if (tracking_defined != nullptr) *tracking_defined = defined;
  if (!defined) return 0.0;
  const double gap_a = 1.0 - sc.sigma_a * sc.sigma_a;
  const double gap_c = 1.0 - sc.sigma_c * sc.sigma_c;
  return gap_a * gap_c /
         (8.0 * (1.0 + sc.sigma_c * sc.sigma_c) * lipschitz * lipschitz *
          sc.sigma_d * sc.sigma_d);
}

namespace {

struct Metrics {
  double f;
  double consensus_sq;
  double tracking_sq;
  double v_sq;
  double potential;
  double opt_err;
  double eps_stat;
  double gbar_norm;
  double tracking_violation;
};

Metrics measure(const Problem& problem, const Eigen::MatrixXd& x,
                const Eigen::MatrixXd& v, const Eigen::MatrixXd& g,
                double potential_coeff) {
  Metrics m;
  const Eigen::RowVectorXd x_bar = block_mean(x);
  const Eigen::RowVectorXd g_bar = block_mean(g);
  const Eigen::RowVectorXd v_bar = block_mean(v);

  m.f = problem.average_value(x_bar.transpose());
  m.consensus_sq = consensus_error_sq(x);
  m.tracking_sq = consensus_error_sq(v);
  m.v_sq = v.squaredNorm();
  m.potential = m.f + m.consensus_sq + potential_coeff * m.tracking_sq;
  m.opt_err = g_bar.norm() + std::sqrt(m.consensus_sq);
  m.eps_stat = m.v_sq + m.tracking_sq + m.consensus_sq;
  m.gbar_norm = problem.mean_gradient(x_bar.transpose()).norm();
  m.tracking_violation = (v_bar - g_bar).norm() / (1.0 + g_bar.norm());
  return m;
}

TraceRow make_row(int t, const Metrics& m, long long volume) {
  TraceRow r;
  r.t = t;
  r.f = m.f;
  r.consensus_sq = m.consensus_sq;
  r.tracking_sq = m.tracking_sq;
  r.v_sq = m.v_sq;
  r.potential = m.potential;
  r.opt_err = m.opt_err;
  r.eps_stat = m.eps_stat;
  r.volume = volume;
  r.dx = kNaN;
  r.gbar_norm = m.gbar_norm;
  return r;
}

}  // namespace

RunSetup resolve_setup(const Problem& problem, const MixingMatrix& w,
                       const AlgoConfig& config) {
  const int n = w.n;
  if (problem.n() != n) {
    throw std::invalid_argument("problem has " +
                                std::to_string(problem.n()) +
                                " nodes but the mixing matrix has " +
                                std::to_string(n));
  }
  if (config.max_iters < 0) {
    throw std::invalid_argument("max_iters must be nonnegative");
  }
  if (config.record_every < 1) {
    throw std::invalid_argument("record_every must be at least 1");
  }
  config.poly_a.validate();
  config.poly_b.validate();
  config.poly_c.validate();
  config.poly_d.validate();

  const double lipschitz = problem.lipschitz();

  RunSetup setup;
  setup.sc = spectral_constants(w, config.poly_a, config.poly_b,
                                config.poly_c, config.poly_d);

  const auto envelope = scheme_certificate_interval(
      config.scheme, config.scheme_params, lipschitz);
  setup.psi = config.psi_override.value_or(
      envelope.has_value() ? envelope->first : kNaN);
  setup.psi_cap = config.psi_cap_override.value_or(
      envelope.has_value() ? envelope->second : kNaN);
  setup.curvature_certified =
      std::isfinite(setup.psi) && std::isfinite(setup.psi_cap) &&
      setup.psi > 0.0;

  const bool bound_computable = setup.curvature_certified &&
                                setup.sc.sigma_a < 1.0 &&
                                setup.sc.sigma_c < 1.0;
  setup.alpha_bound =
      bound_computable
          ? max_stepsize(setup.sc, lipschitz, n, setup.psi, setup.psi_cap,
                         &setup.alpha_tracking_term_dropped)
          : kNaN;

  if (config.auto_alpha) {
    if (!setup.curvature_certified) {
      throw std::invalid_argument(
          "scheme '" + std::string(scheme_name(config.scheme)) +
          "' has no a-priori curvature envelope; set alpha explicitly or "
          "override psi/Psi");
    }
    if (!bound_computable) {
      throw std::invalid_argument(
          "auto step size needs contracting A and C polynomials");
    }
    setup.alpha = setup.alpha_bound;
  } else {
    if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) {
      throw std::invalid_argument("explicit alpha must be positive");
    }
    setup.alpha = config.alpha;
  }

  setup.rounds_per_iter =
      std::max(config.poly_a.degree(), config.poly_b.degree()) +
      std::max(config.poly_c.degree(), config.poly_d.degree()) +
      (config.scheme == Scheme::Dsg ? 1 : 0);
  setup.potential_coeff = potential_coefficient(
      setup.sc, lipschitz, &setup.potential_tracking_defined);
  setup.coeffs = setup.curvature_certified
                     ? descent_coefficients(setup.sc, lipschitz, n,
                                            setup.alpha, setup.psi,
                                            setup.psi_cap)
                     : DescentCoefficients{kNaN, kNaN, kNaN, kNaN};
  return setup;
}

RunResult run(const Problem& problem, const MixingMatrix& w, int edge_count,
              const AlgoConfig& config) {
  const int n = w.n;
  const int p = problem.p();
  if (edge_count < 0) {
    throw std::invalid_argument("edge_count must be nonnegative");
  }

  RunResult out;
  out.setup = resolve_setup(problem, w, config);
  const RunSetup& setup = out.setup;

  Eigen::MatrixXd x;
  if (config.x0.size() == 0) {
    x = Eigen::MatrixXd::Zero(n, p);
  } else {
    if (config.x0.rows() != n || config.x0.cols() != p) {
      throw std::invalid_argument("x0 must be n x p");
    }
    x = config.x0;
  }
  Eigen::MatrixXd g = problem.gradients(x);
  Eigen::MatrixXd v = g;

  std::vector<NodeSchemeMemory> memory;
  memory.reserve(n);
  for (int i = 0; i < n; ++i) {
    memory.push_back(
        init_node_memory(config.scheme, config.scheme_params, p));
  }

  const long long volume_per_iter = static_cast<long long>(
      setup.rounds_per_iter) * edge_count * p;

  out.status = RunStatus::ReachedMaxIters;
  out.volume = 0;
  out.max_tracking_violation = 0.0;
  double psi_low = kInf;
  double psi_high = -kInf;

  Eigen::MatrixXd directions(n, p);
  Metrics m = measure(problem, x, v, g, setup.potential_coeff);

  for (int t = 0;; ++t) {
    out.max_tracking_violation =
        std::max(out.max_tracking_violation, m.tracking_violation);
    if (config.keep_iterates) out.iterates.push_back(x);

    const bool hit_tol = config.stop_tol > 0.0 && m.eps_stat <= config.stop_tol;
    if (hit_tol || t == config.max_iters) {
      out.trace.push_back(make_row(t, m, out.volume));
      out.status =
          hit_tol ? RunStatus::Converged : RunStatus::ReachedMaxIters;
      out.iterations = t;
      break;
    }

    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd vi = v.row(i).transpose();
      const DirectionResult r =
          compute_direction(config.scheme, memory[i], vi,
                            config.scheme_params);
      directions.row(i) = r.d.transpose();
      const double vn2 = vi.squaredNorm();
      if (vn2 > 0.0) {
        psi_low = std::min(psi_low, -vi.dot(r.d) / vn2);
        psi_high = std::max(psi_high, r.d.norm() / std::sqrt(vn2));
      }
    }

    const Eigen::MatrixXd x_next =
        mix_pair(config.poly_a, config.poly_b, w, x,
                 setup.alpha * directions)
            .value;
    const Eigen::MatrixXd g_next = problem.gradients(x_next);
    const Eigen::MatrixXd v_next =
        mix_pair(config.poly_c, config.poly_d, w, v, g_next - g).value;

    Metrics m_next{};
    bool bad = !x_next.allFinite() || !g_next.allFinite() ||
               !v_next.allFinite();
    if (!bad) {
      m_next = measure(problem, x_next, v_next, g_next,
                       setup.potential_coeff);
      bad = !std::isfinite(m_next.f) || !std::isfinite(m_next.eps_stat) ||
            !std::isfinite(m_next.potential);
    }
    if (bad) {
      out.trace.push_back(make_row(t, m, out.volume));
      out.status = RunStatus::Diverged;
      out.iterations = t;
      break;
    }

    if (t % config.record_every == 0) {
      TraceRow row = make_row(t, m, out.volume);
      row.dx = (x_next - x).norm();
      out.trace.push_back(row);
    }
    out.volume += volume_per_iter;

    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd s = (x_next.row(i) - x.row(i)).transpose();
      if (s.squaredNorm() == 0.0) {
        memory[i].stalled_last = true;
        continue;
      }
      memory[i].stalled_last = false;
      CurvaturePair pair;
      pair.s = s;
      pair.y_check = (v_next.row(i) - v.row(i)).transpose();
      pair.grad_delta = (g_next.row(i) - g.row(i)).transpose();
      switch (config.scheme) {
        case Scheme::Identity:
          break;
        case Scheme::Sr1Ml:
        case Scheme::BfgsMl:
        case Scheme::CorrectedDk:
        case Scheme::CorrectedHz:
          memory[i].pair = std::move(pair);
          memory[i].has_pair = true;
          break;
        case Scheme::Bb:
          memory[i].bb_h = bb_scale(pair, config.scheme_params).h;
          break;
        case Scheme::Dsg: {
          std::vector<std::pair<double, Eigen::VectorXd>> nbrs;
          for (Eigen::SparseMatrix<double>::InnerIterator it(w.weights, i);
               it; ++it) {
            if (it.row() == i) continue;
            nbrs.emplace_back(
                it.value(),
                (x_next.row(it.row()) - x.row(it.row())).transpose());
          }
          memory[i].dsg_delta =
              dsg_scale(pair.s, pair.grad_delta, memory[i].dsg_delta, nbrs,
                        config.scheme_params);
          break;
        }
        case Scheme::DqnBfgs:
          memory[i].dqn_h = dqn_bfgs_update(memory[i].dqn_h, pair,
                                            config.scheme_params);
          break;
      }
    }

    x = x_next;
    v = v_next;
    g = g_next;
    m = m_next;
  }

  out.x_final = std::move(x);
  out.v_final = std::move(v);
  out.psi_realized = std::isfinite(psi_low) ? psi_low : kNaN;
  out.psi_cap_realized = psi_high >= 0.0 ? psi_high : kNaN;
  return out;
}

}  // namespace udna
