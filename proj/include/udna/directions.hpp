#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace udna {

// Per-node curvature history between consecutive iterations:
// s = x+ - x, y_check = v+ - v, grad_delta = g+ - g.
struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y_check;
  Eigen::VectorXd grad_delta;
};

enum class Scheme {
  Identity,
  Sr1Ml,        // memoryless SR1 with eigenvalue safeguard
  BfgsMl,       // memoryless BFGS with curvature-pair selection
  CorrectedDk,  // rank-two corrected secant, tau = 1
  CorrectedHz,  // rank-two corrected secant, tau = 2
  Bb,           // Barzilai-Borwein scalar scaling
  Dsg,          // consensus-coupled scalar scaling
  DqnBfgs,      // stateful dense BFGS (experimental; no certificate)
};

const char* scheme_name(Scheme s);
std::optional<Scheme> scheme_from_name(const std::string& name);
double scheme_tau(Scheme s);  // 1 for CorrectedDk, 2 for CorrectedHz

struct SchemeParams {
  // SR1 safeguard box for the candidate eigenvalues {1, 1 + ||u||^2/u'y}.
  double sr1_lower = 1e-6;
  double sr1_upper = 1e6;
  // BFGS selection box plus the correction weight for rejected pairs.
  double bfgs_lower = 1e-6;
  double bfgs_upper = 1e6;
  double bfgs_rho = 0.05;
  // Corrected-secant blend threshold and relative cap on ||y||/||s||.
  double corr_lambda = 0.7;
  double corr_cap = 1.0;
  // Barzilai-Borwein clamp and variant.
  double bb_min = 1e-6;
  double bb_max = 1e6;
  bool bb_long = true;
  // Scalar-scaling projection interval.
  double dsg_min = 1e-6;
  double dsg_max = 1e6;
  // Scale-aware zero test for every denominator acceptance check.
  double eps_den = 1e-12;
};

// Two-sided bound on the spectrum of the direction matrix actually applied,
// with the exact smallest eigenvalue where a closed form exists.
struct EigenCertificate {
  double lower = 1.0;
  double upper = 1.0;
  bool fallback = false;  // safeguard rejected the pair, identity applied
  std::optional<double> exact_min;
};

struct DirectionResult {
  Eigen::VectorXd d;
  std::optional<EigenCertificate> cert;  // absent for DqnBfgs
  bool used_y_hat = false;               // BFGS corrected-pair branch
};

DirectionResult identity_direction(const Eigen::VectorXd& v);

// H = I + uu'/(u'y) with u = s - y; accepted only when both candidate
// eigenvalues {1, 1 + ||u||^2/(u'y)} sit inside the safeguard box and the
// denominator passes the scale-aware zero test. The direction needs three
// dot products (u'y, u'v, ||u||^2) plus axpys; rejection falls back to -v.
DirectionResult sr1_ml_direction(const CurvaturePair& pair,
                                 const Eigen::VectorXd& v,
                                 const SchemeParams& params);

// Memoryless BFGS. The pair (s, y_check) is kept when s'y_check > 0 and the
// three candidate eigenvalues {s'y/||y||^2, lambda-, lambda+} of
// H = (s'y/||y||^2) I - (sy' + ys')/||y||^2 + 2ss'/(s'y)
// sit in the selection box; otherwise y is replaced by the corrected pair
// y_hat = grad_delta + h s, h = rho + max(-s'grad_delta/||s||^2, 0), which
// guarantees s'y_hat >= rho ||s||^2. The direction is assembled from five
// scalars (||s||^2, ||y||^2, s'y, s'v, y'v). Requires ||s|| > 0.
DirectionResult bfgs_ml_direction(const CurvaturePair& pair,
                                  const Eigen::VectorXd& v,
                                  const SchemeParams& params);

// Rank-two corrected secant: blend y = eta y_check + (1 - eta) s with eta
// capped so s'y >= lambda ||s||^2, then H = I - (sz' + zs')/(2 s'y) with
// z = y - tau (||y||^2/(s'y)) s. Certificate: [1/2, 2 tau (cap^2+1)/lambda^2]
// with the exact smallest eigenvalue reported in closed form.
DirectionResult corrected_direction(const CurvaturePair& pair,
                                    const Eigen::VectorXd& v,
                                    const SchemeParams& params, double tau);

// Barzilai-Borwein step scale from the raw gradient variation, clamped to
// [bb_min, bb_max]; nonpositive or non-finite raw values fall back to
// bb_min. The applied matrix is h I.
struct BbResult {
  double h = 1.0;
  EigenCertificate cert;
};
BbResult bb_scale(const CurvaturePair& pair, const SchemeParams& params);

// Consensus-coupled scalar update: the new reciprocal scale is
// Proj[dsg_min, dsg_max](s'grad_delta/||s||^2
//                        + delta_prev sum_j w_ij (1 - s_j's / ||s||^2))
// over the weighted neighbor displacement vectors (the self term vanishes).
// ||s|| = 0 keeps delta_prev. The applied matrix is (1/delta) I.
double dsg_scale(const Eigen::VectorXd& s, const Eigen::VectorXd& grad_delta,
                 double delta_prev,
                 const std::vector<std::pair<double, Eigen::VectorXd>>&
                     weighted_neighbor_s,
                 const SchemeParams& params);

// Dense BFGS recursion on the inverse-Hessian approximation; a failed
// scale-aware curvature test returns h_prev unchanged. Result is
// symmetrized to absorb rounding.
Eigen::MatrixXd dqn_bfgs_update(const Eigen::MatrixXd& h_prev,
                                const CurvaturePair& pair,
                                const SchemeParams& params);

// Everything a node remembers between iterations, by scheme. A node whose
// last displacement was exactly zero raises stalled_last: its memory is kept
// as is and the next direction is forced to -v, so no kernel divides by a
// zero displacement.
struct NodeSchemeMemory {
  bool has_pair = false;
  bool stalled_last = false;
  CurvaturePair pair;
  double bb_h = 1.0;
  double dsg_delta = 1.0;
  Eigen::MatrixXd dqn_h;
};

// Fresh memory for one node: scalar scales start at the projection of 1
// onto their clamp interval, the dense matrix starts at the identity.
NodeSchemeMemory init_node_memory(Scheme scheme, const SchemeParams& params,
                                  int p);

// Scheme dispatch for the per-iteration direction d = -H v. Before the
// first curvature pair exists every scheme applies the identity.
DirectionResult compute_direction(Scheme scheme,
                                  const NodeSchemeMemory& memory,
                                  const Eigen::VectorXd& v,
                                  const SchemeParams& params);

// A-priori spectrum envelope per scheme, used for the automatic step-size
// bound. BfgsMl needs the smoothness constant for its corrected-pair edge;
// DqnBfgs has no envelope.
std::optional<std::pair<double, double>> scheme_certificate_interval(
    Scheme scheme, const SchemeParams& params, double lipschitz);

// Test-only independent evaluation route: materialize the direction matrix
// densely and multiply. neighbor data and the previous dense matrix are
// only read by the schemes that need them.
struct OracleContext {
  double delta_prev = 1.0;
  std::vector<std::pair<double, Eigen::VectorXd>> weighted_neighbor_s;
  Eigen::MatrixXd h_prev;
};
Eigen::MatrixXd materialize_direction_matrix(Scheme scheme,
                                             const CurvaturePair& pair,
                                             const SchemeParams& params,
                                             const OracleContext& ctx);
Eigen::VectorXd dense_direction_oracle(Scheme scheme,
                                       const CurvaturePair& pair,
                                       const Eigen::VectorXd& v,
                                       const SchemeParams& params,
                                       const OracleContext& ctx);

}  // namespace udna
