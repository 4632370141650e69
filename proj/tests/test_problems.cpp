#include "udna/problems.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <sstream>

using udna::Dataset;
using udna::PartitionScheme;
using udna::Problem;
using udna::Sample;
using udna::Shard;

namespace {

// Central finite differences, the reference for every analytic gradient.
Eigen::VectorXd fd_gradient(const std::function<double(
                                const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& z, double h = 1e-5) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd probe = z;
  for (int k = 0; k < z.size(); ++k) {
    probe(k) = z(k) + h;
    const double hi = f(probe);
    probe(k) = z(k) - h;
    const double lo = f(probe);
    probe(k) = z(k);
    g(k) = (hi - lo) / (2.0 * h);
  }
  return g;
}

Shard random_shard(std::mt19937_64& rng, int m, int p, int n_nodes) {
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> coin(0, 1);
  Shard s;
  s.node = 0;
  s.n_nodes = n_nodes;
  s.p = p;
  s.samples.resize(m);
  for (Sample& sample : s.samples) {
    sample.label = coin(rng) ? 1 : -1;
    for (int k = 0; k < p; ++k) {
      if (coin(rng)) sample.features.emplace_back(k, gauss(rng));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("libsvm parsing maps labels by sign and sorts features") {
  std::istringstream in(
      "+1 3:0.5 1:-2.0\n"
      "-3 2:1.25\n"
      "2.0 5:0.125\n");
  const Dataset d = udna::parse_libsvm(in);
  REQUIRE(d.m() == 3);
  CHECK(d.p == 5);
  CHECK(d.samples[0].label == 1);
  CHECK(d.samples[1].label == -1);
  CHECK(d.samples[2].label == 1);
  REQUIRE(d.samples[0].features.size() == 2);
  CHECK(d.samples[0].features[0] == std::pair<int, double>{0, -2.0});
  CHECK(d.samples[0].features[1] == std::pair<int, double>{2, 0.5});
}

TEST_CASE("libsvm parsing rejects malformed lines with their line number") {
  const auto fails_with = [](const char* text, const char* needle) {
    std::istringstream in(text);
    try {
      udna::parse_libsvm(in);
      FAIL_CHECK("no error for: " << text);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  fails_with("1 1:0.5\n0 2:1.0\n", "line 2: label must be nonzero");
  fails_with("1 1:a\n", "line 1");
  fails_with("x 1:0.5\n", "malformed label");
  fails_with("1 a:0.5\n", "malformed feature index");
  fails_with("1 0:0.5\n", "malformed feature index");
  fails_with("1 3\n", "malformed feature token");
  fails_with("1 2:0.5 2:0.75\n", "duplicate feature index 2");
}

TEST_CASE("libsvm dimension override") {
  SUBCASE("upward override widens p") {
    std::istringstream in("1 2:1.0\n");
    CHECK(udna::parse_libsvm(in, 10).p == 10);
  }
  SUBCASE("indices beyond the declared dimension fail") {
    std::istringstream in("1 11:1.0\n");
    CHECK_THROWS_WITH_AS(udna::parse_libsvm(in, 10),
                         doctest::Contains("exceeds declared dimension"),
                         std::runtime_error);
  }
  SUBCASE("blank lines are skipped") {
    std::istringstream in("1 1:1.0\n\n-1 1:2.0\n");
    CHECK(udna::parse_libsvm(in).m() == 2);
  }
}

TEST_CASE("bundled fixture parses reproducibly") {
  const Dataset d =
      udna::parse_libsvm_file(std::string(UDNA_FIXTURE_DIR) +
                              "/sample50.svm");
  CHECK(d.m() == 50);
  CHECK(d.p == 12);
  CHECK(d.positives() == 30);
  CHECK(d.metadata_json() == "{\"m\":50,\"n_pos\":30,\"p\":12}");
}

TEST_CASE("partition schemes") {
  Dataset d;
  d.p = 2;
  for (int j = 0; j < 7; ++j) {
    Sample s;
    s.label = 1;
    s.features.emplace_back(0, double(j));
    d.samples.push_back(s);
  }
  SUBCASE("contiguous remainder goes to the first shards") {
    const auto shards = udna::partition(d, 3, PartitionScheme::Contiguous);
    REQUIRE(shards.size() == 3);
    CHECK(shards[0].samples.size() == 3);
    CHECK(shards[1].samples.size() == 2);
    CHECK(shards[2].samples.size() == 2);
    CHECK(shards[0].samples[0].features[0].second == 0.0);
    CHECK(shards[1].samples[0].features[0].second == 3.0);
    CHECK(shards[2].node == 2);
    CHECK(shards[2].n_nodes == 3);
    CHECK(shards[2].p == 2);
  }
  SUBCASE("strided interleaves") {
    d.samples.resize(6);
    const auto shards = udna::partition(d, 3, PartitionScheme::Strided);
    CHECK(shards[1].samples[0].features[0].second == 1.0);
    CHECK(shards[1].samples[1].features[0].second == 4.0);
  }
  SUBCASE("more nodes than samples is rejected") {
    CHECK_THROWS_AS(udna::partition(d, 8, PartitionScheme::Contiguous),
                    std::invalid_argument);
  }
}

TEST_CASE("logistic objective at the origin") {
  Shard s;
  s.n_nodes = 1;
  s.p = 2;
  Sample one;
  one.label = 1;
  one.features.emplace_back(0, 1.0);
  s.samples.push_back(one);

  Eigen::VectorXd grad;
  const double value =
      udna::logistic_eval(s, 0.0, Eigen::VectorXd::Zero(2), &grad);
  CHECK(value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(grad(0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(grad(1) == 0.0);

  s.samples.push_back(one);
  s.samples.push_back(one);
  CHECK(udna::logistic_eval(s, 0.0, Eigen::VectorXd::Zero(2), nullptr) ==
        doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logistic gradient matches finite differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 6; ++trial) {
    const int p = 3 + trial;
    const Shard s = random_shard(rng, 8, p, 4);
    const double lambda_hat = 0.5 * trial;
    Eigen::VectorXd z(p);
    for (int k = 0; k < p; ++k) z(k) = gauss(rng);

    Eigen::VectorXd grad;
    udna::logistic_eval(s, lambda_hat, z, &grad);
    const auto value = [&](const Eigen::VectorXd& at) {
      return udna::logistic_eval(s, lambda_hat, at, nullptr);
    };
    const Eigen::VectorXd reference = fd_gradient(value, z);
    CHECK((grad - reference).norm() <= 1e-6 * (1.0 + reference.norm()));
  }
}

TEST_CASE("logistic stays finite at extreme margins") {
  Shard s;
  s.n_nodes = 2;
  s.p = 1;
  for (int sign : {1, -1}) {
    Sample sample;
    sample.label = sign;
    sample.features.emplace_back(0, 1000.0);
    s.samples.push_back(sample);
  }
  Eigen::VectorXd z(1);
  z << 1000.0;
  Eigen::VectorXd grad;
  const double value = udna::logistic_eval(s, 1.0, z, &grad);
  CHECK(std::isfinite(value));
  CHECK(std::isfinite(grad(0)));
  // one sample sits at margin 1e6 (loss ~ 0), the mirrored one at -1e6
  CHECK(value == doctest::Approx(1e6 + 0.5).epsilon(1e-9));
}

TEST_CASE("shard values and gradients sum to the whole-dataset objective") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss;
  Dataset d;
  d.p = 5;
  std::uniform_int_distribution<int> coin(0, 1);
  for (int j = 0; j < 23; ++j) {
    Sample s;
    s.label = coin(rng) ? 1 : -1;
    for (int k = 0; k < d.p; ++k) {
      if (coin(rng)) s.features.emplace_back(k, gauss(rng));
    }
    d.samples.push_back(s);
  }
  Eigen::VectorXd z(d.p);
  for (int k = 0; k < d.p; ++k) z(k) = gauss(rng);
  const double lambda_hat = 0.75;

  const auto whole = udna::partition(d, 1, PartitionScheme::Contiguous);
  Eigen::VectorXd grad_whole;
  const double value_whole =
      udna::logistic_eval(whole[0], lambda_hat, z, &grad_whole);

  for (auto scheme : {PartitionScheme::Contiguous, PartitionScheme::Strided}) {
    double value_sum = 0.0;
    Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(d.p);
    for (const Shard& s : udna::partition(d, 4, scheme)) {
      Eigen::VectorXd g;
      value_sum += udna::logistic_eval(s, lambda_hat, z, &g);
      grad_sum += g;
    }
    CHECK(value_sum ==
          doctest::Approx(value_whole).epsilon(1e-10));
    CHECK((grad_sum - grad_whole).norm() <= 1e-10 * (1.0 + grad_whole.norm()));
  }
}

TEST_CASE("lipschitz estimate") {
  SUBCASE("single unit feature") {
    Shard s;
    s.n_nodes = 1;
    s.p = 2;
    Sample one;
    one.label = 1;
    one.features.emplace_back(0, 1.0);
    s.samples.push_back(one);
    CHECK(udna::estimate_lipschitz({s}, 0.0) ==
          doctest::Approx(0.25).epsilon(1e-9));
  }
  SUBCASE("regularizer only") {
    std::vector<Shard> shards(3);
    for (int i = 0; i < 3; ++i) {
      shards[i].node = i;
      shards[i].n_nodes = 3;
      shards[i].p = 4;
      shards[i].samples.resize(2);  // empty feature lists
      for (auto& sample : shards[i].samples) sample.label = 1;
    }
    CHECK(udna::estimate_lipschitz(shards, 3.0) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("matches a dense Gram eigensolve") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      const int p = 4 + 2 * trial;
      const Shard s = random_shard(rng, 12, p, 2);
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
      for (const Sample& sample : s.samples) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
        for (const auto& [idx, val] : sample.features) a(idx) = val;
        gram += a * a.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
      const double expected =
          0.25 * solver.eigenvalues().maxCoeff() + 2.0 * 1.5 / 2;
      CHECK(udna::estimate_lipschitz({s}, 1.5) ==
            doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("synthetic quadratic records its stationary point") {
  const Problem pr =
      udna::synthetic_problem(77, 4, 6, 0, Problem::Kind::QuadraticSynthetic);
  REQUIRE(pr.known_optimum().has_value());
  const Eigen::VectorXd& z_star = *pr.known_optimum();

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd g;
  for (int i = 0; i < pr.n(); ++i) {
    pr.eval_node(i, z_star, &g);
    sum += g;
  }
  CHECK(sum.norm() <= 1e-10);
  CHECK(pr.mean_gradient(z_star).norm() <= 1e-10);

  SUBCASE("gradients match finite differences") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd z(6);
    for (int k = 0; k < 6; ++k) z(k) = gauss(rng);
    for (int i = 0; i < pr.n(); ++i) {
      pr.eval_node(i, z, &g);
      const Eigen::VectorXd reference = fd_gradient(
          [&](const Eigen::VectorXd& at) {
            return pr.eval_node(i, at, nullptr);
          },
          z);
      CHECK((g - reference).norm() <= 1e-6 * (1.0 + reference.norm()));
    }
  }
  SUBCASE("curvature range bounds the smoothness constant") {
    CHECK(pr.lipschitz() <= 2.0 + 1e-9);
    CHECK(pr.lipschitz() >= 0.5);
  }
  SUBCASE("deterministic per seed") {
    const Problem again = udna::synthetic_problem(
        77, 4, 6, 0, Problem::Kind::QuadraticSynthetic);
    CHECK((*again.known_optimum() - z_star).norm() == 0.0);
  }
}

TEST_CASE("synthetic logistic shards evenly and reproducibly") {
  const Problem pr =
      udna::synthetic_problem(5, 5, 10, 200, Problem::Kind::LogisticNonconvex);
  CHECK(pr.n() == 5);
  CHECK(pr.p() == 10);
  for (const Shard& s : pr.shards()) {
    CHECK(s.samples.size() == 40);
    CHECK(s.n_nodes == 5);
  }
  const Problem again =
      udna::synthetic_problem(5, 5, 10, 200, Problem::Kind::LogisticNonconvex);
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(10, -0.5, 0.5);
  CHECK(pr.average_value(z) == again.average_value(z));

  SUBCASE("average value differentiates to the mean gradient") {
    const Eigen::VectorXd reference = fd_gradient(
        [&](const Eigen::VectorXd& at) { return pr.average_value(at); }, z);
    CHECK((pr.mean_gradient(z) - reference).norm() <=
          1e-6 * (1.0 + reference.norm()));
  }
}
