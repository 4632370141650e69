#include "udna/network.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>

namespace udna {

double Graph::realized_density() const {
  const double max_edges = 0.5 * n * (n - 1);
  return max_edges > 0 ? edges.size() / max_edges : 0.0;
}

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(n, 0);
  for (const auto& [i, j] : edges) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

std::vector<std::vector<int>> Graph::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

bool Graph::connected() const {
  if (n <= 0) return false;
  const auto adj = adjacency();
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int u : adj[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++reached;
        frontier.push(u);
      }
    }
  }
  return reached == n;
}

namespace {

// Decode a Prufer sequence into its labeled tree; sequences drawn uniformly
// give uniform spanning trees of the complete graph.
std::vector<std::pair<int, int>> prufer_tree(const std::vector<int>& seq,
                                             int n) {
  std::vector<int> degree(n, 1);
  for (int v : seq) ++degree[v];
  std::vector<std::pair<int, int>> edges;
  edges.reserve(n - 1);
  std::priority_queue<int, std::vector<int>, std::greater<int>> leaves;
  for (int v = 0; v < n; ++v) {
    if (degree[v] == 1) leaves.push(v);
  }
  for (int v : seq) {
    const int leaf = leaves.top();
    leaves.pop();
    edges.emplace_back(std::min(leaf, v), std::max(leaf, v));
    if (--degree[v] == 1) leaves.push(v);
  }
  const int a = leaves.top();
  leaves.pop();
  const int b = leaves.top();
  edges.emplace_back(std::min(a, b), std::max(a, b));
  return edges;
}

}  // namespace

Graph build_graph(int n, double density, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("build_graph: n must be >= 2");
  const double max_edges = 0.5 * n * (n - 1);
  if (density > 1.0 + 1e-12 || density < 2.0 / n - 1e-12) {
    throw std::invalid_argument(
        "build_graph: density must lie in [2/n, 1] so a spanning tree fits");
  }
  const long target = std::clamp<long>(std::llround(density * max_edges),
                                       n - 1, static_cast<long>(max_edges));

  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> tree;
  if (n == 2) {
    tree = {{0, 1}};
  } else {
    std::uniform_int_distribution<int> node(0, n - 1);
    std::vector<int> seq(n - 2);
    for (int& v : seq) v = node(rng);
    tree = prufer_tree(seq, n);
  }

  std::set<std::pair<int, int>> chosen(tree.begin(), tree.end());
  std::vector<std::pair<int, int>> spare;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!chosen.count({i, j})) spare.emplace_back(i, j);
    }
  }
  std::shuffle(spare.begin(), spare.end(), rng);
  for (std::size_t k = 0; chosen.size() < static_cast<std::size_t>(target);
       ++k) {
    chosen.insert(spare[k]);
  }

  Graph g;
  g.n = n;
  g.requested_density = density;
  g.edges.assign(chosen.begin(), chosen.end());
  return g;
}

MixingMatrix MixingMatrix::single_node() {
  MixingMatrix w;
  w.n = 1;
  w.weights.resize(1, 1);
  w.weights.insert(0, 0) = 1.0;
  w.weights.makeCompressed();
  w.eigenvalues = Eigen::VectorXd::Ones(1);
  w.sigma = 0.0;
  w.sigma_below_floor = true;
  return w;
}

MixingMatrix metropolis_weights(const Graph& g) {
  if (!g.connected()) {
    throw std::invalid_argument("metropolis_weights: graph is not connected");
  }
  const auto deg = g.degrees();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * g.edges.size() + g.n);
  std::vector<double> diag(g.n, 1.0);
  for (const auto& [i, j] : g.edges) {
    const double w = 1.0 / (std::max(deg[i], deg[j]) + 1);
    entries.emplace_back(i, j, w);
    entries.emplace_back(j, i, w);
    diag[i] -= w;
    diag[j] -= w;
  }
  for (int i = 0; i < g.n; ++i) entries.emplace_back(i, i, diag[i]);

  MixingMatrix w;
  w.n = g.n;
  w.weights.resize(g.n, g.n);
  w.weights.setFromTriplets(entries.begin(), entries.end());
  w.weights.makeCompressed();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      Eigen::MatrixXd(w.weights));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("metropolis_weights: eigendecomposition failed");
  }
  w.eigenvalues = solver.eigenvalues().reverse();  // descending

  const double lead = w.eigenvalues(0);
  const double tail = w.eigenvalues(g.n - 1);
  if (std::abs(lead - 1.0) > 1e-10 || tail <= -1.0) {
    throw std::runtime_error("metropolis_weights: spectrum outside (-1, 1]");
  }
  w.sigma = g.n > 1 ? std::max(std::abs(w.eigenvalues(1)), std::abs(tail))
                    : 0.0;
  w.sigma_below_floor = w.sigma < kSigmaFloor;
  return w;
}

PolySpec::PolySpec(std::vector<double> c, Role r) : coeffs(std::move(c)),
                                                    role(r) {
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
}

PolySpec PolySpec::power(int k, Role r) {
  if (k < 0) throw std::invalid_argument("PolySpec::power: negative degree");
  std::vector<double> c(k + 1, 0.0);
  c[k] = 1.0;
  return PolySpec(std::move(c), r);
}

double PolySpec::evaluate(double lambda) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    acc = acc * lambda + *it;
  }
  return acc;
}

void PolySpec::validate() const {
  if (coeffs.empty()) {
    throw std::invalid_argument("PolySpec: empty coefficient list");
  }
  double sum = 0.0;
  for (double c : coeffs) sum += c;
  const bool stochastic = std::abs(sum - 1.0) <= 1e-12;
  if (role == Role::A || role == Role::C) {
    if (degree() < 1) {
      throw std::invalid_argument(
          "PolySpec: the x- and v-mixing polynomials need degree >= 1");
    }
    if (!stochastic) {
      throw std::invalid_argument(
          "PolySpec: coefficients must sum to 1 (doubly stochastic)");
    }
  } else if (!is_identity() && !stochastic) {
    throw std::invalid_argument(
        "PolySpec: need the identity or coefficients summing to 1");
  }
}

SpectralConstants spectral_constants(const MixingMatrix& w, const PolySpec& a,
                                     const PolySpec& b, const PolySpec& c,
                                     const PolySpec& d) {
  const auto worst = [&w](const PolySpec& spec) {
    double m = 0.0;
    for (int i = 1; i < w.n; ++i) {
      m = std::max(m, std::abs(spec.evaluate(w.eigenvalues(i))));
    }
    return m;
  };
  SpectralConstants sc;
  sc.sigma = w.sigma;
  sc.sigma_a = worst(a);
  sc.sigma_b = worst(b);
  sc.sigma_c = worst(c);
  sc.sigma_d = worst(d);
  sc.sigma_d_zero = sc.sigma_d == 0.0;
  sc.non_contracting_a = sc.sigma_a >= 1.0;
  sc.non_contracting_c = sc.sigma_c >= 1.0;
  return sc;
}

Eigen::MatrixXd mix(const PolySpec& spec, const MixingMatrix& w,
                    const Eigen::MatrixXd& x) {
  Eigen::MatrixXd acc = spec.coeffs.back() * x;
  for (int k = spec.degree() - 1; k >= 0; --k) {
    acc = w.weights * acc;
    if (spec.coeffs[k] != 0.0) acc += spec.coeffs[k] * x;
  }
  return acc;
}

MixPairResult mix_pair(const PolySpec& poly_x, const PolySpec& poly_y,
                       const MixingMatrix& w, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& y) {
  const int rounds = std::max(poly_x.degree(), poly_y.degree());
  const auto coeff = [](const PolySpec& s, int k) {
    return k < static_cast<int>(s.coeffs.size()) ? s.coeffs[k] : 0.0;
  };
  Eigen::MatrixXd acc =
      coeff(poly_x, rounds) * x + coeff(poly_y, rounds) * y;
  for (int k = rounds - 1; k >= 0; --k) {
    acc = w.weights * acc;
    if (coeff(poly_x, k) != 0.0) acc += coeff(poly_x, k) * x;
    if (coeff(poly_y, k) != 0.0) acc += coeff(poly_y, k) * y;
  }
  return {std::move(acc), rounds};
}

Eigen::RowVectorXd block_mean(const Eigen::MatrixXd& x) {
  return x.colwise().mean();
}

Eigen::MatrixXd replicate_mean(const Eigen::MatrixXd& x) {
  return block_mean(x).replicate(x.rows(), 1);
}

double consensus_error_sq(const Eigen::MatrixXd& x) {
  return (x - replicate_mean(x)).squaredNorm();
}

double contraction_check(const MixingMatrix& w, const Eigen::MatrixXd& x,
                         int k) {
  const Eigen::MatrixXd mean = replicate_mean(x);
  const double base = (x - mean).norm();
  if (base == 0.0) return 0.0;
  Eigen::MatrixXd y = x;
  for (int r = 0; r < k; ++r) y = w.weights * y;
  return (y - mean).norm() / base;
}

std::string graph_to_json(const Graph& g, const MixingMatrix& w) {
  nlohmann::json out;
  out["n"] = g.n;
  auto& edges = out["edges"] = nlohmann::json::array();
  for (const auto& [i, j] : g.edges) {
    edges.push_back({i + 1, j + 1});
  }
  auto& weights = out["weights"] = nlohmann::json::array();
  const Eigen::MatrixXd dense(w.weights);
  for (int i = 0; i < w.n; ++i) {
    for (int j = i; j < w.n; ++j) {
      if (dense(i, j) != 0.0) {
        weights.push_back({i + 1, j + 1, dense(i, j)});
      }
    }
  }
  return out.dump(2);
}

}  // namespace udna
