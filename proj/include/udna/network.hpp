#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace udna {

// Undirected simple graph on nodes 0..n-1.
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // each pair (i, j) with i < j, unique
  double requested_density = 0.0;

  int edge_count() const { return static_cast<int>(edges.size()); }
  double realized_density() const;
  std::vector<int> degrees() const;
  std::vector<std::vector<int>> adjacency() const;  // neighbor lists, sorted
  bool connected() const;                           // BFS from node 0
};

// Connected random graph: a uniform random spanning tree (Prufer decode)
// plus uniformly chosen extra edges up to round(density * n(n-1)/2).
// Requires n >= 2 and density in [2/n, 1]; deterministic per seed.
Graph build_graph(int n, double density, std::uint64_t seed);

// Symmetric doubly stochastic mixing weights with cached spectrum.
// eigenvalues are sorted descending; the leading one is 1 (consensus mode)
// and sigma = max(|lambda_2|, |lambda_n|) is the contraction factor of the
// non-consensus subspace. sigma = 0 (e.g. uniform weights on a complete
// graph) is legal but flagged: constants that divide by sigma-derived
// quantities must apply kSigmaFloor instead.
struct MixingMatrix {
  int n = 0;
  Eigen::SparseMatrix<double> weights;
  Eigen::VectorXd eigenvalues;
  double sigma = 0.0;
  bool sigma_below_floor = false;

  static MixingMatrix single_node();
};

inline constexpr double kSigmaFloor = 1e-12;

// Metropolis rule: w_ij = 1/(max(deg_i, deg_j) + 1) on edges, diagonal
// absorbs the remainder so every row sums to 1. Requires a connected graph.
MixingMatrix metropolis_weights(const Graph& g);

// Polynomial in the mixing matrix, stored low-degree-first: sum_p c_p W^p.
// Role A/C polynomials must have degree >= 1 and coefficient sum 1;
// role B/D may instead be the identity [1]. Trailing zero coefficients are
// trimmed at construction so degree() is the true polynomial degree.
struct PolySpec {
  enum class Role { A, B, C, D };

  std::vector<double> coeffs;
  Role role = Role::A;

  PolySpec() = default;
  PolySpec(std::vector<double> c, Role r);

  static PolySpec identity(Role r) { return PolySpec({1.0}, r); }
  static PolySpec power(int k, Role r);  // W^k

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  bool is_identity() const { return coeffs.size() == 1 && coeffs[0] == 1.0; }
  double evaluate(double lambda) const;  // Horner
  // Throws std::invalid_argument on a violated degree/coefficient-sum rule.
  void validate() const;
};

// Worst-case modulus of the polynomial over the non-consensus spectrum:
// max_{i>=2} |poly(lambda_i)|. Equals 1 for the identity. Values >= 1 for
// role A/C polynomials indicate a non-contracting choice and are flagged.
struct SpectralConstants {
  double sigma = 0.0;    // of the mixing matrix itself
  double sigma_a = 0.0;
  double sigma_b = 0.0;
  double sigma_c = 0.0;
  double sigma_d = 0.0;
  bool sigma_d_zero = false;
  bool non_contracting_a = false;  // sigma_a >= 1
  bool non_contracting_c = false;
};

SpectralConstants spectral_constants(const MixingMatrix& w, const PolySpec& a,
                                     const PolySpec& b, const PolySpec& c,
                                     const PolySpec& d);

// Node states live in the rows of an n x p matrix; applying the mixing
// matrix is a left-multiply. mix evaluates poly(W) * x by Horner, one
// neighbor exchange per degree, so the communication cost equals degree().
Eigen::MatrixXd mix(const PolySpec& spec, const MixingMatrix& w,
                    const Eigen::MatrixXd& x);

// poly_x(W) * x + poly_y(W) * y evaluated jointly: both Horner recursions
// share each round's exchange (one stacked vector per round), so the cost is
// max(poly_x.degree(), poly_y.degree()) rounds rather than the sum.
struct MixPairResult {
  Eigen::MatrixXd value;
  int rounds = 0;
};
MixPairResult mix_pair(const PolySpec& poly_x, const PolySpec& poly_y,
                       const MixingMatrix& w, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& y);

// Mean over nodes, and the mean replicated to every row (projection onto
// the consensus subspace). consensus_error_sq is the squared distance from
// that subspace.
Eigen::RowVectorXd block_mean(const Eigen::MatrixXd& x);
Eigen::MatrixXd replicate_mean(const Eigen::MatrixXd& x);
double consensus_error_sq(const Eigen::MatrixXd& x);

// ||W^k x - mean|| / ||x - mean||; 0 for consensual x. Bounded by sigma^k.
double contraction_check(const MixingMatrix& w, const Eigen::MatrixXd& x,
                         int k);

// {"n":..., "edges":[[i,j],...], "weights":[[i,j,w],...]} with 1-based node
// indices; weights list the diagonal and each undirected pair once (i <= j).
std::string graph_to_json(const Graph& g, const MixingMatrix& w);

}  // namespace udna
