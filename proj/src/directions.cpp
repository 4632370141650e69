#include "udna/directions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udna {

namespace {

double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

bool inside(double x, double lo, double hi) {
  // NaN compares false on both sides, so degenerate candidates are rejected.
  return x >= lo && x <= hi;
}

}  // namespace

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Identity: return "identity";
    case Scheme::Sr1Ml: return "sr1-ml";
    case Scheme::BfgsMl: return "bfgs-ml";
    case Scheme::CorrectedDk: return "corrected-dk";
    case Scheme::CorrectedHz: return "corrected-hz";
    case Scheme::Bb: return "bb";
    case Scheme::Dsg: return "dsg";
    case Scheme::DqnBfgs: return "dqn-bfgs";
  }
  return "unknown";
}

std::optional<Scheme> scheme_from_name(const std::string& name) {
  for (Scheme s : {Scheme::Identity, Scheme::Sr1Ml, Scheme::BfgsMl,
                   Scheme::CorrectedDk, Scheme::CorrectedHz, Scheme::Bb,
                   Scheme::Dsg, Scheme::DqnBfgs}) {
    if (name == scheme_name(s)) return s;
  }
  return std::nullopt;
}

double scheme_tau(Scheme s) {
  if (s == Scheme::CorrectedDk) return 1.0;
  if (s == Scheme::CorrectedHz) return 2.0;
  throw std::logic_error("scheme_tau: scheme has no tau parameter");
}

DirectionResult identity_direction(const Eigen::VectorXd& v) {
  DirectionResult r;
  r.d = -v;
  r.cert = EigenCertificate{1.0, 1.0, false, 1.0};
  return r;
}

DirectionResult sr1_ml_direction(const CurvaturePair& pair,
                                 const Eigen::VectorXd& v,
                                 const SchemeParams& params) {
  const Eigen::VectorXd u = pair.s - pair.y_check;
  const double unorm2 = u.squaredNorm();
  const double den = u.dot(pair.y_check);
  const double scale = std::sqrt(unorm2) * pair.y_check.norm();
  const double e = 1.0 + unorm2 / den;

  DirectionResult r;
  if (std::abs(den) > params.eps_den * scale &&
      inside(1.0, params.sr1_lower, params.sr1_upper) &&
      inside(e, params.sr1_lower, params.sr1_upper)) {
    r.d = -v - (u.dot(v) / den) * u;
    r.cert = EigenCertificate{std::min(1.0, e), std::max(1.0, e), false,
                              std::min(1.0, e)};
  } else {
    r.d = -v;
    r.cert = EigenCertificate{1.0, 1.0, true, 1.0};
  }
  return r;
}

namespace {

struct BfgsCandidates {
  double tau;  // s'y/||y||^2, the (p-2)-fold eigenvalue
  double lambda_minus;
  double lambda_plus;
};

BfgsCandidates bfgs_candidates(double snorm2, double ynorm2, double sy) {
  const double c = std::min(1.0, (sy * sy) / (snorm2 * ynorm2));
  const double root = std::sqrt(std::max(0.0, 1.0 - c));
  const double base = snorm2 / sy;
  return {sy / ynorm2, base * (1.0 - root), base * (1.0 + root)};
}

}  // namespace

DirectionResult bfgs_ml_direction(const CurvaturePair& pair,
                                  const Eigen::VectorXd& v,
                                  const SchemeParams& params) {
  const Eigen::VectorXd& s = pair.s;
  const double snorm2 = s.squaredNorm();
  if (snorm2 <= 0.0) return identity_direction(v);

  Eigen::VectorXd y = pair.y_check;
  double sy = s.dot(y);
  double ynorm2 = y.squaredNorm();
  bool keep = false;
  if (sy > params.eps_den * std::sqrt(snorm2 * ynorm2)) {
    const BfgsCandidates c = bfgs_candidates(snorm2, ynorm2, sy);
    keep = inside(c.tau, params.bfgs_lower, params.bfgs_upper) &&
           inside(c.lambda_minus, params.bfgs_lower, params.bfgs_upper) &&
           inside(c.lambda_plus, params.bfgs_lower, params.bfgs_upper);
  }

  DirectionResult r;
  if (!keep) {
    const double sdg = s.dot(pair.grad_delta);
    const double h = params.bfgs_rho + std::max(-sdg / snorm2, 0.0);
    y = pair.grad_delta + h * s;
    sy = sdg + h * snorm2;  // = s'y_hat >= rho ||s||^2 by construction
    ynorm2 = y.squaredNorm();
    r.used_y_hat = true;
  }

  const double sv = s.dot(v);
  const double yv = y.dot(v);
  r.d = -(sy / ynorm2) * v + (yv * s + sv * y) / ynorm2 - 2.0 * (sv / sy) * s;

  const BfgsCandidates c = bfgs_candidates(snorm2, ynorm2, sy);
  const double lo = std::min(c.tau, std::min(c.lambda_minus, c.lambda_plus));
  const double hi = std::max(c.tau, std::max(c.lambda_minus, c.lambda_plus));
  r.cert = EigenCertificate{lo, hi, false, c.lambda_minus};
  return r;
}

DirectionResult corrected_direction(const CurvaturePair& pair,
                                    const Eigen::VectorXd& v,
                                    const SchemeParams& params, double tau) {
  const Eigen::VectorXd& s = pair.s;
  const double snorm2 = s.squaredNorm();
  if (snorm2 <= 0.0) return identity_direction(v);

  const double lambda = params.corr_lambda;
  const double sy_raw = s.dot(pair.y_check);
  const double ynorm2_raw = pair.y_check.squaredNorm();

  double eta_hat;
  if (sy_raw > lambda * snorm2) {
    eta_hat = 1.0;
  } else {
    eta_hat = (1.0 - lambda) * snorm2 / (snorm2 - sy_raw);
  }
  double eta = eta_hat;
  if (ynorm2_raw > 0.0) {
    eta = std::min(eta_hat,
                   params.corr_cap * std::sqrt(snorm2 / ynorm2_raw));
  }

  const double sy = eta * sy_raw + (1.0 - eta) * snorm2;
  const double ynorm2 = eta * eta * ynorm2_raw +
                        2.0 * eta * (1.0 - eta) * sy_raw +
                        (1.0 - eta) * (1.0 - eta) * snorm2;
  const double p_bar = ynorm2 / sy;

  const double sv = s.dot(v);
  const double yv_blend = eta * pair.y_check.dot(v) + (1.0 - eta) * sv;
  const double zv = yv_blend - tau * p_bar * sv;

  Eigen::VectorXd z = eta * pair.y_check + (1.0 - eta) * s - (tau * p_bar) * s;

  DirectionResult r;
  r.d = -v + (zv / (2.0 * sy)) * s + (sv / (2.0 * sy)) * z;

  const double q = ynorm2 * snorm2 / (sy * sy);
  const double disc = std::max(0.0, tau * tau * q * q - 2.0 * tau * q + q);
  const double exact_min = 0.5 * (1.0 + tau * q - std::sqrt(disc));
  const double cap = params.corr_cap;
  r.cert = EigenCertificate{
      0.5, 2.0 * tau * (cap * cap + 1.0) / (lambda * lambda), false,
      exact_min};
  return r;
}

BbResult bb_scale(const CurvaturePair& pair, const SchemeParams& params) {
  const double snorm2 = pair.s.squaredNorm();
  const double ynorm2 = pair.grad_delta.squaredNorm();
  const double sy = pair.s.dot(pair.grad_delta);
  const double raw = params.bb_long ? snorm2 / sy : sy / ynorm2;

  BbResult r;
  r.cert = EigenCertificate{params.bb_min, params.bb_max, false, {}};
  if (!std::isfinite(raw) || raw <= 0.0) {
    r.h = params.bb_min;
    r.cert.fallback = true;
  } else {
    r.h = clamp(raw, params.bb_min, params.bb_max);
  }
  r.cert.exact_min = r.h;
  return r;
}

double dsg_scale(const Eigen::VectorXd& s, const Eigen::VectorXd& grad_delta,
                 double delta_prev,
                 const std::vector<std::pair<double, Eigen::VectorXd>>&
                     weighted_neighbor_s,
                 const SchemeParams& params) {
  const double snorm2 = s.squaredNorm();
  if (snorm2 <= 0.0) return delta_prev;

  double coupling = 0.0;
  for (const auto& [w, sj] : weighted_neighbor_s) {
    coupling += w * (1.0 - sj.dot(s) / snorm2);
  }
  const double raw = s.dot(grad_delta) / snorm2 + delta_prev * coupling;
  return clamp(raw, params.dsg_min, params.dsg_max);
}

Eigen::MatrixXd dqn_bfgs_update(const Eigen::MatrixXd& h_prev,
                                const CurvaturePair& pair,
                                const SchemeParams& params) {
  const Eigen::VectorXd& s = pair.s;
  const Eigen::VectorXd& y = pair.y_check;
  const double den = y.dot(s);
  if (std::abs(den) <= params.eps_den * s.norm() * y.norm()) return h_prev;

  const Eigen::Index p = s.size();
  const Eigen::MatrixXd left =
      Eigen::MatrixXd::Identity(p, p) - s * (y.transpose() / den);
  Eigen::MatrixXd h =
      left * h_prev * left.transpose() + s * (s.transpose() / den);
  h = 0.5 * (h + h.transpose());
  return h;
}

NodeSchemeMemory init_node_memory(Scheme scheme, const SchemeParams& params,
                                  int p) {
  NodeSchemeMemory m;
  m.bb_h = clamp(1.0, params.bb_min, params.bb_max);
  m.dsg_delta = clamp(1.0, params.dsg_min, params.dsg_max);
  if (scheme == Scheme::DqnBfgs) {
    m.dqn_h = Eigen::MatrixXd::Identity(p, p);
  }
  return m;
}

DirectionResult compute_direction(Scheme scheme,
                                  const NodeSchemeMemory& memory,
                                  const Eigen::VectorXd& v,
                                  const SchemeParams& params) {
  if (memory.stalled_last) return identity_direction(v);
  switch (scheme) {
    case Scheme::Identity:
      return identity_direction(v);
    case Scheme::Sr1Ml:
      if (!memory.has_pair) return identity_direction(v);
      return sr1_ml_direction(memory.pair, v, params);
    case Scheme::BfgsMl:
      if (!memory.has_pair) return identity_direction(v);
      return bfgs_ml_direction(memory.pair, v, params);
    case Scheme::CorrectedDk:
    case Scheme::CorrectedHz:
      if (!memory.has_pair) return identity_direction(v);
      return corrected_direction(memory.pair, v, params, scheme_tau(scheme));
    case Scheme::Bb: {
      DirectionResult r;
      r.d = -memory.bb_h * v;
      r.cert = EigenCertificate{params.bb_min, params.bb_max, false,
                                memory.bb_h};
      return r;
    }
    case Scheme::Dsg: {
      DirectionResult r;
      r.d = -v / memory.dsg_delta;
      r.cert = EigenCertificate{1.0 / params.dsg_max, 1.0 / params.dsg_min,
                                false, 1.0 / memory.dsg_delta};
      return r;
    }
    case Scheme::DqnBfgs: {
      DirectionResult r;
      if (memory.dqn_h.size() == 0) {
        r.d = -v;
      } else {
        r.d = -(memory.dqn_h * v);
      }
      r.cert = std::nullopt;
      return r;
    }
  }
  throw std::logic_error("compute_direction: unhandled scheme");
}

std::optional<std::pair<double, double>> scheme_certificate_interval(
    Scheme scheme, const SchemeParams& params, double lipschitz) {
  switch (scheme) {
    case Scheme::Identity:
      return std::make_pair(1.0, 1.0);
    case Scheme::Sr1Ml:
      return std::make_pair(std::min(1.0, params.sr1_lower),
                            std::max(1.0, params.sr1_upper));
    case Scheme::BfgsMl: {
      if (!(lipschitz > 0.0)) return std::nullopt;
      const double l = lipschitz;
      const double rho = params.bfgs_rho;
      const double rho_hat =
          1.0 / (4.0 * l * l + 4.0 * l * rho + rho * rho) + 1.0 / l;
      return std::make_pair(std::min(params.bfgs_lower, 0.5 * rho_hat),
                            std::max(params.bfgs_upper, 2.0 / rho));
    }
    case Scheme::CorrectedDk:
    case Scheme::CorrectedHz: {
      const double tau = scheme_tau(scheme);
      const double cap = params.corr_cap;
      const double lambda = params.corr_lambda;
      return std::make_pair(
          0.5, 2.0 * tau * (cap * cap + 1.0) / (lambda * lambda));
    }
    case Scheme::Bb:
      return std::make_pair(params.bb_min, params.bb_max);
    case Scheme::Dsg:
      return std::make_pair(1.0 / params.dsg_max, 1.0 / params.dsg_min);
    case Scheme::DqnBfgs:
      return std::nullopt;
  }
  throw std::logic_error("scheme_certificate_interval: unhandled scheme");
}

Eigen::MatrixXd materialize_direction_matrix(Scheme scheme,
                                             const CurvaturePair& pair,
                                             const SchemeParams& params,
                                             const OracleContext& ctx) {
  const Eigen::Index p = pair.s.size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
  switch (scheme) {
    case Scheme::Identity:
      return eye;
    case Scheme::Sr1Ml: {
      const Eigen::VectorXd u = pair.s - pair.y_check;
      const double den = u.dot(pair.y_check);
      if (std::abs(den) <= params.eps_den * u.norm() * pair.y_check.norm()) {
        return eye;
      }
      const double e = 1.0 + u.squaredNorm() / den;
      if (!inside(1.0, params.sr1_lower, params.sr1_upper) ||
          !inside(e, params.sr1_lower, params.sr1_upper)) {
        return eye;
      }
      return eye + u * u.transpose() / den;
    }
    case Scheme::BfgsMl: {
      const Eigen::VectorXd& s = pair.s;
      const double snorm2 = s.squaredNorm();
      Eigen::VectorXd y = pair.y_check;
      double sy = s.dot(y);
      double ynorm2 = y.squaredNorm();
      bool keep = false;
      if (sy > params.eps_den * std::sqrt(snorm2 * ynorm2)) {
        const BfgsCandidates c = bfgs_candidates(snorm2, ynorm2, sy);
        keep = inside(c.tau, params.bfgs_lower, params.bfgs_upper) &&
               inside(c.lambda_minus, params.bfgs_lower, params.bfgs_upper) &&
               inside(c.lambda_plus, params.bfgs_lower, params.bfgs_upper);
      }
      if (!keep) {
        const double sdg = s.dot(pair.grad_delta);
        const double h = params.bfgs_rho + std::max(-sdg / snorm2, 0.0);
        y = pair.grad_delta + h * s;
        // s'y via the cancellation-free identity; re-dotting the blended
        // vector loses the rho ||s||^2 lower bound under adversarial scales.
        sy = sdg + h * snorm2;
        ynorm2 = y.squaredNorm();
      }
      return (sy / ynorm2) * eye -
             (s * y.transpose() + y * s.transpose()) / ynorm2 +
             2.0 * s * s.transpose() / sy;
    }
    case Scheme::CorrectedDk:
    case Scheme::CorrectedHz: {
      const double tau = scheme_tau(scheme);
      const Eigen::VectorXd& s = pair.s;
      const double snorm2 = s.squaredNorm();
      const double sy_raw = s.dot(pair.y_check);
      const double lambda = params.corr_lambda;
      double eta_hat = 1.0;
      if (!(sy_raw > lambda * snorm2)) {
        eta_hat = (1.0 - lambda) * snorm2 / (snorm2 - sy_raw);
      }
      double eta = eta_hat;
      const double ynorm_raw = pair.y_check.norm();
      if (ynorm_raw > 0.0) {
        eta = std::min(eta_hat, params.corr_cap * s.norm() / ynorm_raw);
      }
      const Eigen::VectorXd y = eta * pair.y_check + (1.0 - eta) * s;
      const double sy = s.dot(y);
      const Eigen::VectorXd z = y - tau * (y.squaredNorm() / sy) * s;
      return eye -
             (s * z.transpose() + z * s.transpose()) / (2.0 * sy);
    }
    case Scheme::Bb:
      return bb_scale(pair, params).h * eye;
    case Scheme::Dsg: {
      const double delta = dsg_scale(pair.s, pair.grad_delta, ctx.delta_prev,
                                     ctx.weighted_neighbor_s, params);
      return eye / delta;
    }
    case Scheme::DqnBfgs: {
      const Eigen::VectorXd& s = pair.s;
      const Eigen::VectorXd& y = pair.y_check;
      const double den = y.dot(s);
      if (std::abs(den) <= params.eps_den * s.norm() * y.norm()) {
        return ctx.h_prev;
      }
      const Eigen::MatrixXd left = eye - s * y.transpose() / den;
      const Eigen::MatrixXd h =
          left * ctx.h_prev * left.transpose() + s * s.transpose() / den;
      return 0.5 * (h + h.transpose());
    }
  }
  throw std::logic_error("materialize_direction_matrix: unhandled scheme");
}

Eigen::VectorXd dense_direction_oracle(Scheme scheme,
                                       const CurvaturePair& pair,
                                       const Eigen::VectorXd& v,
                                       const SchemeParams& params,
                                       const OracleContext& ctx) {
  return -(materialize_direction_matrix(scheme, pair, params, ctx) * v);
}

}  // namespace udna
