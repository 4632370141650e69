#include "udna/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace udna {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_unit_stride(const std::vector<TraceRow>& trace,
                         const char* where) {
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    if (trace[i + 1].t != trace[i].t + 1) {
      throw std::invalid_argument(
          std::string(where) +
          " needs a trace recorded at every iteration (stride 1)");
    }
  }
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t m = xs.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(m);
  const double my = sy / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LineFit f;
  if (sxx == 0.0) {
    f.slope = 0.0;
    f.intercept = my;
    f.r2 = syy == 0.0 ? 1.0 : 0.0;
    return f;
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy == 0.0) {
    f.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = ys[i] - (f.intercept + f.slope * xs[i]);
      ss_res += e * e;
    }
    f.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return f;
}

}  // namespace

double stationarity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& v) {
  return v.squaredNorm() + consensus_error_sq(v) + consensus_error_sq(x);
}

double optimality_error(const Problem& problem, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd g = problem.gradients(x);
  return block_mean(g).norm() + std::sqrt(consensus_error_sq(x));
}

double kl_step_constant(double alpha, double psi_cap, double gamma) {
  return 2.0 * std::max(alpha * alpha * psi_cap * psi_cap, 4.0) /
         (gamma * std::min(1.0, alpha));
}

double kl_value_constant(const SpectralConstants& sc, double lipschitz,
                         double alpha, double gamma) {
  double weight = 1.0;
  if (sc.sigma_d >= kSigmaFloor) {
    const double gap_a = 1.0 - sc.sigma_a * sc.sigma_a;
    const double gap_c = 1.0 - sc.sigma_c * sc.sigma_c;
    weight = std::max(
        1.0, gap_a * gap_c /
                 (4.0 * (1.0 + sc.sigma_c * sc.sigma_c) * lipschitz *
                  lipschitz * sc.sigma_d * sc.sigma_d));
  }
  return weight / (gamma * std::min(1.0, alpha));
}

double kl_gradient_constant(double lipschitz, int n, double alpha,
                            double gamma) {
  const double nn = static_cast<double>(n);
  return std::sqrt(3.0 * std::max(1.0, lipschitz * lipschitz) /
                   (gamma * std::min(1.0, alpha) * nn * nn));
}

KLWitness kl_witness(const std::vector<TraceRow>& trace,
                     const SpectralConstants& sc, double lipschitz, int n,
                     double alpha, double psi, double psi_cap) {
  require_unit_stride(trace, "kl_witness");

  KLWitness w;
  w.gamma =
      descent_coefficients(sc, lipschitz, n, alpha, psi, psi_cap).gamma;
  w.c1 = kl_step_constant(alpha, psi_cap, w.gamma);
  w.c2 = kl_value_constant(sc, lipschitz, alpha, w.gamma);
  w.c3 = kl_gradient_constant(lipschitz, n, alpha, w.gamma);

  const double damp = w.gamma * std::min(1.0, alpha);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double sqrt_c1 = std::sqrt(w.c1);

  w.T.reserve(trace.size());
  for (const TraceRow& row : trace) {
    w.T.push_back(std::sqrt(damp * row.eps_stat));
  }

  const std::size_t steps = trace.empty() ? 0 : trace.size() - 1;
  w.descent_margin.reserve(steps);
  w.step_margin.reserve(steps);
  w.value_margin.reserve(steps);
  w.gradient_margin.reserve(steps);
  w.worst_descent = kNaN;
  w.worst_step = kNaN;
  w.worst_value = kNaN;
  w.worst_gradient = kNaN;

  auto fold = [](double& worst, double scaled) {
    if (std::isnan(worst) || scaled < worst) worst = scaled;
  };

  for (std::size_t t = 0; t < steps; ++t) {
    const TraceRow& cur = trace[t];
    const TraceRow& nxt = trace[t + 1];
    const double t2 = damp * cur.eps_stat;

    const double descent = (cur.potential - nxt.potential) - t2;
    w.descent_margin.push_back(descent);
    fold(w.worst_descent,
         descent / (1.0 + std::abs(cur.potential) + t2));

    const double step = sqrt_c1 * w.T[t] - cur.dx;
    w.step_margin.push_back(step);
    fold(w.worst_step, step / (1.0 + sqrt_c1 * w.T[t] + cur.dx));

    const double value = cur.f + w.c2 * t2 - nxt.potential;
    w.value_margin.push_back(value);
    fold(w.worst_value,
         value / (1.0 + std::abs(cur.f) + w.c2 * t2 +
                  std::abs(nxt.potential)));

    const double grad = w.c3 * w.T[t] - cur.gbar_norm / sqrt_n;
    w.gradient_margin.push_back(grad);
    fold(w.worst_gradient,
         grad / (1.0 + w.c3 * w.T[t] + cur.gbar_norm / sqrt_n));
  }

  const double tol = -1e-9;
  auto holds = [tol](double worst) {
    return std::isnan(worst) || worst >= tol;
  };
  w.ok = holds(w.worst_descent) && holds(w.worst_step) &&
         holds(w.worst_value) && holds(w.worst_gradient);
  return w;
}

DescentReport descent_report(const std::vector<TraceRow>& trace,
                             const DescentCoefficients& k, double alpha) {
  require_unit_stride(trace, "descent_report");

  DescentReport rep;
  rep.min_margin = kNaN;
  rep.min_scaled_margin = kNaN;
  if (trace.size() < 2) return rep;

  rep.margins.reserve(trace.size() - 1);
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    const TraceRow& cur = trace[t];
    const TraceRow& nxt = trace[t + 1];
    double bound = k.a1 * alpha * cur.v_sq + k.a3 * cur.consensus_sq;
    if (!std::isinf(k.a2)) bound += k.a2 * cur.tracking_sq;
    const double margin = -bound - (nxt.potential - cur.potential);
    rep.margins.push_back(margin);
    const double scaled =
        margin / (1.0 + std::abs(cur.potential) + std::abs(bound));
    if (std::isnan(rep.min_margin) || margin < rep.min_margin) {
      rep.min_margin = margin;
    }
    if (std::isnan(rep.min_scaled_margin) ||
        scaled < rep.min_scaled_margin) {
      rep.min_scaled_margin = scaled;
    }
  }
  rep.ok = std::isnan(rep.min_scaled_margin) ||
           rep.min_scaled_margin >= -1e-9;
  return rep;
}

const char* rate_regime_name(RateRegime r) {
  switch (r) {
    case RateRegime::Geometric: return "geometric";
    case RateRegime::Power: return "power";
    case RateRegime::Finite: return "finite";
    case RateRegime::InsufficientSamples: return "insufficient samples";
  }
  return "unknown";
}

RateFit rate_fit(const std::vector<double>& residuals,
                 const RateFitOptions& opts) {
  RateFit fit;
  fit.rate = kNaN;
  fit.exponent = kNaN;
  fit.r2 = kNaN;

  const int total = static_cast<int>(residuals.size());
  const int cut = static_cast<int>(
      std::floor(opts.transient_fraction * static_cast<double>(total)));
  fit.window_begin = cut;
  fit.window_end = total;

  for (int t = cut; t < total; ++t) {
    if (residuals[t] < opts.floor) {
      fit.regime = RateRegime::Finite;
      fit.window_end = t + 1;
      fit.r2 = 1.0;
      return fit;
    }
  }

  if (total - cut < opts.min_samples) {
    fit.regime = RateRegime::InsufficientSamples;
    return fit;
  }

  std::vector<double> ts, log_ts, log_rs, log_rs_pos;
  ts.reserve(total - cut);
  log_rs.reserve(total - cut);
  for (int t = cut; t < total; ++t) {
    const double lr = std::log(residuals[t]);
    ts.push_back(static_cast<double>(t));
    log_rs.push_back(lr);
    if (t >= 1) {
      log_ts.push_back(std::log(static_cast<double>(t)));
      log_rs_pos.push_back(lr);
    }
  }

  const LineFit geo = fit_line(ts, log_rs);
  const LineFit pow = log_ts.size() >= 2 ? fit_line(log_ts, log_rs_pos)
                                         : LineFit{0.0, 0.0, -1.0};

  if (geo.r2 >= pow.r2) {
    fit.regime = RateRegime::Geometric;
    fit.rate = std::exp(geo.slope);
    fit.r2 = geo.r2;
  } else {
    fit.regime = RateRegime::Power;
    fit.exponent = pow.slope;
    fit.r2 = pow.r2;
  }
  return fit;
}

}  // namespace udna
