#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace udna {

// One labeled sample with sparse features. File indices are 1-based; they
// are stored 0-based and sorted by index, with the values kept verbatim.
struct Sample {
  int label = 0;  // +1 or -1
  std::vector<std::pair<int, double>> features;

  double dot(const Eigen::VectorXd& z) const;
};

struct Dataset {
  std::vector<Sample> samples;
  int p = 0;

  int m() const { return static_cast<int>(samples.size()); }
  int positives() const;
  std::string metadata_json() const;  // {"m":..., "p":..., "n_pos":...}
};

// LIBSVM text format: "<label> <index>:<value> ...". Labels map to +/-1 by
// sign (zero is rejected); feature indices must be unique per line but may
// appear in any order. p_override (when positive) fixes the feature
// dimension; indices beyond it are an error. Errors carry the 1-based line
// number. parse_libsvm_file adds the path to any error message.
Dataset parse_libsvm(std::istream& in, int p_override = 0);
Dataset parse_libsvm_file(const std::string& path, int p_override = 0);

enum class PartitionScheme { Contiguous, Strided };

// One node's slice of a dataset. n_nodes is carried along because the
// node-local regularizer weight is lambda_hat / n_nodes.
struct Shard {
  int node = 0;
  int n_nodes = 1;
  int p = 0;
  std::vector<Sample> samples;
};

// Contiguous: sizes differ by at most one, remainder going to the first
// shards. Strided: node k takes samples k, k+n, k+2n, ... The seed is
// accepted for forward compatibility; both schemes are deterministic.
std::vector<Shard> partition(const Dataset& d, int n, PartitionScheme scheme,
                             std::uint64_t seed = 0);

// Node objective: sum_j log(1 + exp(-b_j a_j' z)) plus the nonconvex
// regularizer (lambda_hat / n_nodes) * sum_k z_k^2 / (1 + z_k^2).
// The log-sum is evaluated as max(t,0) + log1p(exp(-|t|)) so large margins
// cannot overflow. grad may be null when only the value is needed.
double logistic_eval(const Shard& s, double lambda_hat,
                     const Eigen::VectorXd& z, Eigen::VectorXd* grad);

// Upper bound on the gradient Lipschitz constant across nodes:
// max_i (1/4) lambda_max(sum_j a_j a_j') + 2 lambda_hat / n, the Gram
// eigenvalue obtained by power iteration to 1e-6 relative accuracy.
double estimate_lipschitz(const std::vector<Shard>& shards,
                          double lambda_hat);

// A decentralized problem instance: one objective per node over a shared
// decision dimension p.
class Problem {
 public:
  enum class Kind { LogisticNonconvex, QuadraticSynthetic };

  static Problem logistic(std::vector<Shard> shards, double lambda_hat);
  static Problem quadratic(std::vector<Eigen::MatrixXd> q,
                           std::vector<Eigen::VectorXd> b,
                           std::optional<Eigen::VectorXd> z_star = {});

  Kind kind() const { return kind_; }
  int n() const;
  int p() const { return p_; }
  double lambda_hat() const { return lambda_hat_; }

  // f_i(z) and optionally its gradient.
  double eval_node(int node, const Eigen::VectorXd& z,
                   Eigen::VectorXd* grad) const;
  // Row i of the result is the gradient of f_i at row i of x.
  Eigen::MatrixXd gradients(const Eigen::MatrixXd& x) const;
  // F(z) = (1/n) sum_i f_i(z); mean_gradient is its gradient.
  double average_value(const Eigen::VectorXd& z) const;
  Eigen::VectorXd mean_gradient(const Eigen::VectorXd& z) const;

  // Smoothness constant: the shard bound for logistic objectives, the exact
  // max_i lambda_max(Q_i) for quadratics.
  double lipschitz() const;

  // Stationary point recorded by the quadratic generator.
  const std::optional<Eigen::VectorXd>& known_optimum() const {
    return z_star_;
  }
  const std::vector<Shard>& shards() const { return shards_; }

 private:
  Kind kind_ = Kind::LogisticNonconvex;
  int p_ = 0;
  double lambda_hat_ = 0.0;
  std::vector<Shard> shards_;
  std::vector<Eigen::MatrixXd> q_;
  std::vector<Eigen::VectorXd> b_;
  std::optional<Eigen::VectorXd> z_star_;
};

struct SyntheticOptions {
  double lambda_hat = 1.0;
  double feature_scale = 1.0;   // features drawn from N(0, scale^2 / p)
  double flip_fraction = 0.1;   // label noise for the planted separator
  double min_curvature = 0.5;   // quadratic eigenvalue range lower edge
  double max_curvature = 2.0;
};

// Deterministic synthetic instances. Logistic: Gaussian features, labels
// from a planted separator with a fraction flipped, contiguous shards.
// Quadratic: per-node positive definite Q_i with spectrum inside the
// curvature range and random b_i; the aggregate stationary point
// (sum Q_i)^{-1} sum b_i is recorded as the known optimum.
Problem synthetic_problem(std::uint64_t seed, int n, int p, int m,
                          Problem::Kind kind,
                          const SyntheticOptions& opts = {});

}  // namespace udna
