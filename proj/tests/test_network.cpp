#include "udna/network.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using udna::Graph;
using udna::MixingMatrix;
using udna::PolySpec;
using Role = udna::PolySpec::Role;

namespace {

// Test-local reachability oracle, independent of Graph::connected.
bool reachable_everywhere(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  const auto find = [&parent](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  int components = n;
  for (const auto& [i, j] : edges) {
    const int a = find(i), b = find(j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

// Dense-matrix oracle for the worst-case non-consensus modulus: materialize
// poly(W) - J/n and take its spectral radius with a fresh eigensolve.
double dense_poly_radius(const MixingMatrix& w, const PolySpec& spec) {
  const int n = w.n;
  const Eigen::MatrixXd dense(w.weights);
  Eigen::MatrixXd acc = spec.coeffs.back() * Eigen::MatrixXd::Identity(n, n);
  for (int k = spec.degree() - 1; k >= 0; --k) {
    acc = dense * acc;
    acc += spec.coeffs[k] * Eigen::MatrixXd::Identity(n, n);
  }
  acc -= Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(acc);
  return std::max(std::abs(solver.eigenvalues()(0)),
                  std::abs(solver.eigenvalues()(n - 1)));
}

Graph path_graph(int n) {
  Graph g;
  g.n = n;
  for (int i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
  return g;
}

}  // namespace

TEST_CASE("metropolis weights on the 3-node path") {
  const auto w = udna::metropolis_weights(path_graph(3));
  const Eigen::MatrixXd dense(w.weights);
  CHECK(dense(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(dense(1, 2) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(dense(0, 2) == 0.0);
  CHECK(dense(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(dense(1, 1) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(dense(2, 2) == doctest::Approx(2.0 / 3).epsilon(1e-15));

  REQUIRE(w.eigenvalues.size() == 3);
  CHECK(w.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.eigenvalues(1) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(w.eigenvalues(2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(std::abs(w.sigma - 2.0 / 3) <= 1e-12);
  CHECK_FALSE(w.sigma_below_floor);
}

TEST_CASE("uniform-weight matrices are accepted but flagged") {
  SUBCASE("single edge") {
    const auto w = udna::metropolis_weights(path_graph(2));
    const Eigen::MatrixXd dense(w.weights);
    CHECK(dense(0, 0) == doctest::Approx(0.5));
    CHECK(dense(0, 1) == doctest::Approx(0.5));
    CHECK(w.sigma == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    CHECK(w.sigma_below_floor);
  }
  SUBCASE("complete triangle") {
    Graph g;
    g.n = 3;
    g.edges = {{0, 1}, {0, 2}, {1, 2}};
    const auto w = udna::metropolis_weights(g);
    const Eigen::MatrixXd dense(w.weights);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(dense(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-14));
      }
    }
    CHECK(w.sigma_below_floor);
  }
}

TEST_CASE("metropolis weights are symmetric doubly stochastic") {
  std::mt19937_64 seeds(7);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 4 + trial * 3;
    const auto g = udna::build_graph(n, 0.5, seeds());
    const auto w = udna::metropolis_weights(g);
    const Eigen::MatrixXd dense(w.weights);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(dense.minCoeff() >= 0.0);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(dense.row(i).sum() - 1.0) <= 1e-12);
    }
    CHECK(w.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.eigenvalues(n - 1) > -1.0);
    const auto adj = g.adjacency();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool neighbor =
            i == j || std::binary_search(adj[i].begin(), adj[i].end(), j);
        CHECK((dense(i, j) > 0.0) == neighbor);
      }
    }
  }
}

TEST_CASE("metropolis rejects a disconnected graph") {
  Graph g;
  g.n = 4;
  g.edges = {{0, 1}, {2, 3}};
  CHECK_THROWS_AS(udna::metropolis_weights(g), std::invalid_argument);
}

TEST_CASE("build_graph hits the requested edge count and stays connected") {
  const auto g = udna::build_graph(10, 0.56, 3);
  CHECK(g.edge_count() == 25);
  CHECK(reachable_everywhere(g.n, g.edges));
  CHECK(g.realized_density() == doctest::Approx(25.0 / 45));

  SUBCASE("deterministic per seed") {
    const auto again = udna::build_graph(10, 0.56, 3);
    CHECK(again.edges == g.edges);
    bool any_different = false;
    for (std::uint64_t seed = 4; seed < 9; ++seed) {
      if (udna::build_graph(10, 0.56, seed).edges != g.edges) {
        any_different = true;
      }
    }
    CHECK(any_different);
  }
}

TEST_CASE("build_graph edge-count envelope") {
  SUBCASE("tree floor") {
    const auto g = udna::build_graph(12, 2.0 / 12, 11);
    CHECK(g.edge_count() == 11);
    CHECK(reachable_everywhere(g.n, g.edges));
  }
  SUBCASE("complete ceiling") {
    const auto g = udna::build_graph(7, 1.0, 5);
    CHECK(g.edge_count() == 21);
  }
  SUBCASE("two nodes") {
    const auto g = udna::build_graph(2, 1.0, 1);
    REQUIRE(g.edge_count() == 1);
    CHECK(g.edges[0] == std::pair<int, int>{0, 1});
  }
  SUBCASE("count within one of ceil") {
    std::mt19937_64 seeds(99);
    std::mt19937_64 dens(100);
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    for (int n : {5, 9, 16, 31}) {
      const double lo = 2.0 / n;
      const double density = lo + (1.0 - lo) * pick(dens);
      const auto g = udna::build_graph(n, density, seeds());
      const double requested = std::ceil(density * n * (n - 1) / 2);
      CHECK(std::abs(g.edge_count() - requested) <= 1.0);
      CHECK(reachable_everywhere(g.n, g.edges));
    }
  }
}

TEST_CASE("build_graph rejects infeasible requests") {
  CHECK_THROWS_AS(udna::build_graph(1, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(udna::build_graph(10, 0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(udna::build_graph(10, 1.2, 0), std::invalid_argument);
}

TEST_CASE("polynomial validation") {
  CHECK_NOTHROW(PolySpec({0.0, 1.0}, Role::A).validate());
  CHECK_NOTHROW(PolySpec({0.0, 0.5, 0.5}, Role::C).validate());
  CHECK_NOTHROW(PolySpec::identity(Role::B).validate());
  CHECK_NOTHROW(PolySpec::identity(Role::D).validate());
  // degree-0 choice is reserved for the application-side matrices
  CHECK_THROWS_AS(PolySpec::identity(Role::A).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(PolySpec({0.0, 0.9}, Role::A).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(PolySpec({0.3, 0.4}, Role::B).validate(),
                  std::invalid_argument);
  CHECK(PolySpec({0.0, 1.0, 0.0, 0.0}, Role::A).degree() == 1);
  CHECK(PolySpec::power(2, Role::B).degree() == 2);
}

TEST_CASE("spectral constants match a dense eigensolver oracle") {
  std::mt19937_64 seeds(21);
  for (int n : {4, 11, 23, 50}) {
    const auto g = udna::build_graph(n, std::max(0.3, 2.0 / n), seeds());
    const auto w = udna::metropolis_weights(g);
    const PolySpec a({0.0, 1.0}, Role::A);
    const PolySpec b = PolySpec::power(2, Role::B);
    const PolySpec c({0.0, 0.5, 0.5}, Role::C);
    const PolySpec d = PolySpec::identity(Role::D);
    const auto sc = udna::spectral_constants(w, a, b, c, d);
    CHECK(std::abs(sc.sigma_a - dense_poly_radius(w, a)) <= 1e-10);
    CHECK(std::abs(sc.sigma_b - dense_poly_radius(w, b)) <= 1e-10);
    CHECK(std::abs(sc.sigma_c - dense_poly_radius(w, c)) <= 1e-10);
    CHECK(sc.sigma_d == 1.0);  // identity leaves every mode untouched
    CHECK(std::abs(sc.sigma - w.sigma) == 0.0);
    CHECK(sc.sigma_a < 1.0);
    CHECK(sc.sigma_c < 1.0);
    CHECK_FALSE(sc.sigma_d_zero);
  }
}

TEST_CASE("mixing one round on the 3-node path") {
  const auto w = udna::metropolis_weights(path_graph(3));
  Eigen::MatrixXd x(3, 1);
  x << 1.0, 0.0, -1.0;
  const Eigen::MatrixXd y = udna::mix(PolySpec({0.0, 1.0}, Role::A), w, x);
  CHECK(y(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(y(2, 0) == doctest::Approx(-2.0 / 3).epsilon(1e-15));
}

TEST_CASE("mixing properties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  const auto g = udna::build_graph(9, 0.45, 17);
  const auto w = udna::metropolis_weights(g);
  Eigen::MatrixXd x(9, 4);
  Eigen::MatrixXd y(9, 4);
  for (int i = 0; i < x.size(); ++i) {
    x.data()[i] = gauss(rng);
    y.data()[i] = gauss(rng);
  }

  SUBCASE("identity is a no-op with zero rounds") {
    const auto id = PolySpec::identity(Role::B);
    CHECK((udna::mix(id, w, x) - x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(id.degree() == 0);
  }
  SUBCASE("repeated single rounds equal the monomial") {
    const PolySpec step({0.0, 1.0}, Role::A);
    Eigen::MatrixXd acc = x;
    for (int k = 1; k <= 4; ++k) {
      acc = udna::mix(step, w, acc);
      const Eigen::MatrixXd direct =
          udna::mix(PolySpec::power(k, Role::A), w, x);
      CHECK((acc - direct).cwiseAbs().maxCoeff() <= 1e-12 * acc.norm());
    }
  }
  SUBCASE("linearity") {
    const PolySpec spec({0.2, 0.3, 0.5}, Role::C);
    const Eigen::MatrixXd lhs = udna::mix(spec, w, 2.0 * x - 3.0 * y);
    const Eigen::MatrixXd rhs =
        2.0 * udna::mix(spec, w, x) - 3.0 * udna::mix(spec, w, y);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + rhs.norm()));
  }
  SUBCASE("pairwise evaluation matches two separate passes") {
    const PolySpec pa({0.0, 1.0}, Role::A);
    const PolySpec pb = PolySpec::power(2, Role::B);
    const auto joint = udna::mix_pair(pa, pb, w, x, y);
    const Eigen::MatrixXd split = udna::mix(pa, w, x) + udna::mix(pb, w, y);
    CHECK((joint.value - split).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + split.norm()));
    CHECK(joint.rounds == 2);
    CHECK(udna::mix_pair(pa, PolySpec::identity(Role::B), w, x, y).rounds ==
          1);
  }
  SUBCASE("mean is preserved") {
    const PolySpec spec({0.0, 0.5, 0.5}, Role::A);
    const Eigen::MatrixXd mixed = udna::mix(spec, w, x);
    CHECK((udna::block_mean(mixed) - udna::block_mean(x))
              .cwiseAbs()
              .maxCoeff() <= 1e-13);
  }
}

TEST_CASE("contraction factor bounds repeated mixing") {
  std::mt19937_64 seeds(31);
  std::mt19937_64 rng(32);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5 + 4 * trial;
    const auto g = udna::build_graph(n, 0.5, seeds());
    const auto w = udna::metropolis_weights(g);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::MatrixXd x(n, 3);
      for (int i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);
      for (int k = 1; k <= 10; ++k) {
        CHECK(udna::contraction_check(w, x, k) <=
              std::pow(w.sigma, k) + 1e-10);
      }
    }
  }
  SUBCASE("consensual input maps to zero") {
    const auto w = udna::metropolis_weights(path_graph(3));
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 2, 4.25);
    CHECK(udna::contraction_check(w, x, 3) == 0.0);
  }
}

TEST_CASE("graph export uses 1-based indices") {
  const auto g = path_graph(2);
  const auto w = udna::metropolis_weights(g);
  const std::string json = udna::graph_to_json(g, w);
  CHECK(json.find("\"n\": 2") != std::string::npos);
  CHECK(json.find("[\n      1,\n      2\n    ]") != std::string::npos);
  CHECK(json.find("0.5") != std::string::npos);
}
