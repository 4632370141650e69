#include "udna/problems.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace udna {

double Sample::dot(const Eigen::VectorXd& z) const {
  double acc = 0.0;
  for (const auto& [idx, val] : features) acc += val * z(idx);
  return acc;
}

int Dataset::positives() const {
  return static_cast<int>(
      std::count_if(samples.begin(), samples.end(),
                    [](const Sample& s) { return s.label > 0; }));
}

std::string Dataset::metadata_json() const {
  nlohmann::json out;
  out["m"] = m();
  out["p"] = p;
  out["n_pos"] = positives();
  return out.dump();
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& token, int line,
                    const char* context) {
  // from_chars rejects an explicit plus sign, but "+1" labels are common
  const char* begin = token.data();
  const char* stop = token.data() + token.size();
  if (begin != stop && *begin == '+') ++begin;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(begin, stop, value);
  if (ec != std::errc() || end != stop || begin == stop ||
      !std::isfinite(value)) {
    parse_fail(line, std::string("malformed ") + context + " '" + token +
                         "'");
  }
  return value;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, int p_override) {
  Dataset d;
  d.p = std::max(p_override, 0);
  std::string line;
  int line_no = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;  // blank line

    Sample s;
    const double raw_label = parse_double(token, line_no, "label");
    if (raw_label == 0.0) parse_fail(line_no, "label must be nonzero");
    s.label = raw_label > 0.0 ? 1 : -1;

    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == token.size()) {
        parse_fail(line_no, "malformed feature token '" + token + "'");
      }
      long index = 0;
      const auto [end, ec] =
          std::from_chars(token.data(), token.data() + colon, index);
      if (ec != std::errc() || end != token.data() + colon || index < 1) {
        parse_fail(line_no, "malformed feature index in '" + token + "'");
      }
      if (p_override > 0 && index > p_override) {
        parse_fail(line_no, "feature index " + std::to_string(index) +
                                " exceeds declared dimension " +
                                std::to_string(p_override));
      }
      const double value =
          parse_double(token.substr(colon + 1), line_no, "feature value");
      s.features.emplace_back(static_cast<int>(index) - 1, value);
    }
    std::sort(s.features.begin(), s.features.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < s.features.size(); ++k) {
      if (s.features[k].first == s.features[k - 1].first) {
        parse_fail(line_no,
                   "duplicate feature index " +
                       std::to_string(s.features[k].first + 1));
      }
    }
    if (!s.features.empty()) {
      max_index = std::max(max_index, s.features.back().first + 1);
    }
    d.samples.push_back(std::move(s));
  }
  d.p = p_override > 0 ? p_override : max_index;
  return d;
}

Dataset parse_libsvm_file(const std::string& path, int p_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  try {
    return parse_libsvm(in, p_override);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<Shard> partition(const Dataset& d, int n, PartitionScheme scheme,
                             std::uint64_t /*seed*/) {
  if (n < 1 || n > d.m()) {
    throw std::invalid_argument(
        "partition: need 1 <= n <= m so every node owns a sample");
  }
  std::vector<Shard> shards(n);
  for (int k = 0; k < n; ++k) {
    shards[k].node = k;
    shards[k].n_nodes = n;
    shards[k].p = d.p;
  }
  if (scheme == PartitionScheme::Contiguous) {
    const int base = d.m() / n;
    const int rem = d.m() % n;
    int pos = 0;
    for (int k = 0; k < n; ++k) {
      const int size = base + (k < rem ? 1 : 0);
      shards[k].samples.assign(d.samples.begin() + pos,
                               d.samples.begin() + pos + size);
      pos += size;
    }
  } else {
    for (int j = 0; j < d.m(); ++j) {
      shards[j % n].samples.push_back(d.samples[j]);
    }
  }
  return shards;
}

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

}  // namespace

double logistic_eval(const Shard& s, double lambda_hat,
                     const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
  if (grad) grad->setZero(z.size());
  double value = 0.0;
  for (const Sample& sample : s.samples) {
    const double t = -sample.label * sample.dot(z);
    value += softplus(t);
    if (grad) {
      const double coef = -sample.label * sigmoid(t);
      for (const auto& [idx, val] : sample.features) {
        (*grad)(idx) += coef * val;
      }
    }
  }
  const double share = lambda_hat / s.n_nodes;
  for (int k = 0; k < z.size(); ++k) {
    const double zk2 = z(k) * z(k);
    value += share * zk2 / (1.0 + zk2);
    if (grad) {
      const double den = 1.0 + zk2;
      (*grad)(k) += share * 2.0 * z(k) / (den * den);
    }
  }
  return value;
}

double estimate_lipschitz(const std::vector<Shard>& shards,
                          double lambda_hat) {
  if (shards.empty()) {
    throw std::invalid_argument("estimate_lipschitz: no shards");
  }
  double worst_gram = 0.0;
  for (const Shard& s : shards) {
    if (s.p == 0) continue;
    const auto apply = [&s](const Eigen::VectorXd& v) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(v.size());
      for (const Sample& sample : s.samples) {
        const double c = sample.dot(v);
        for (const auto& [idx, val] : sample.features) w(idx) += c * val;
      }
      return w;
    };
    Eigen::VectorXd v(s.p);
    for (int i = 0; i < s.p; ++i) v(i) = 1.0 + double(i) / (s.p + 1);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
      const Eigen::VectorXd w = apply(v);
      const double next = v.dot(w);
      const double norm = w.norm();
      const bool settled = std::abs(next - lambda) <= 1e-7 * std::max(
          std::abs(next), 1e-30);
      lambda = next;
      if (norm == 0.0 || settled) break;
      v = w / norm;
    }
    worst_gram = std::max(worst_gram, lambda);
  }
  const int n = shards.front().n_nodes;
  return 0.25 * worst_gram + 2.0 * lambda_hat / n;
}

Problem Problem::logistic(std::vector<Shard> shards, double lambda_hat) {
  if (shards.empty()) {
    throw std::invalid_argument("Problem::logistic: no shards");
  }
  Problem pr;
  pr.kind_ = Kind::LogisticNonconvex;
  pr.p_ = shards.front().p;
  pr.lambda_hat_ = lambda_hat;
  pr.shards_ = std::move(shards);
  return pr;
}

Problem Problem::quadratic(std::vector<Eigen::MatrixXd> q,
                           std::vector<Eigen::VectorXd> b,
                           std::optional<Eigen::VectorXd> z_star) {
  if (q.empty() || q.size() != b.size()) {
    throw std::invalid_argument("Problem::quadratic: mismatched node data");
  }
  Problem pr;
  pr.kind_ = Kind::QuadraticSynthetic;
  pr.p_ = static_cast<int>(q.front().rows());
  pr.q_ = std::move(q);
  pr.b_ = std::move(b);
  pr.z_star_ = std::move(z_star);
  return pr;
}

int Problem::n() const {
  return kind_ == Kind::LogisticNonconvex ? static_cast<int>(shards_.size())
                                          : static_cast<int>(q_.size());
}

double Problem::eval_node(int node, const Eigen::VectorXd& z,
                          Eigen::VectorXd* grad) const {
  if (kind_ == Kind::LogisticNonconvex) {
    return logistic_eval(shards_[node], lambda_hat_, z, grad);
  }
  if (grad) *grad = q_[node] * z - b_[node];
  return 0.5 * z.dot(q_[node] * z) - b_[node].dot(z);
}

Eigen::MatrixXd Problem::gradients(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd g(x.rows(), x.cols());
  Eigen::VectorXd grad;
  for (int i = 0; i < x.rows(); ++i) {
    eval_node(i, x.row(i).transpose(), &grad);
    g.row(i) = grad.transpose();
  }
  return g;
}

double Problem::average_value(const Eigen::VectorXd& z) const {
  double total = 0.0;
  for (int i = 0; i < n(); ++i) total += eval_node(i, z, nullptr);
  return total / n();
}

Eigen::VectorXd Problem::mean_gradient(const Eigen::VectorXd& z) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p_);
  Eigen::VectorXd grad;
  for (int i = 0; i < n(); ++i) {
    eval_node(i, z, &grad);
    sum += grad;
  }
  return sum / n();
}

double Problem::lipschitz() const {
  if (kind_ == Kind::LogisticNonconvex) {
    return estimate_lipschitz(shards_, lambda_hat_);
  }
  double worst = 0.0;
  for (const auto& q : q_) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(q);
    worst = std::max(worst, solver.eigenvalues().maxCoeff());
  }
  return worst;
}

Problem synthetic_problem(std::uint64_t seed, int n, int p, int m,
                          Problem::Kind kind, const SyntheticOptions& opts) {
  if (n < 1 || p < 1) {
    throw std::invalid_argument("synthetic_problem: need n >= 1 and p >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  if (kind == Problem::Kind::LogisticNonconvex) {
    if (m < n) {
      throw std::invalid_argument("synthetic_problem: need m >= n");
    }
    Eigen::VectorXd separator(p);
    for (int k = 0; k < p; ++k) separator(k) = gauss(rng);

    Dataset d;
    d.p = p;
    const double scale = opts.feature_scale / std::sqrt(double(p));
    d.samples.resize(m);
    for (int j = 0; j < m; ++j) {
      Sample& s = d.samples[j];
      s.features.reserve(p);
      double margin = 0.0;
      for (int k = 0; k < p; ++k) {
        const double a = scale * gauss(rng);
        s.features.emplace_back(k, a);
        margin += a * separator(k);
      }
      s.label = margin >= 0.0 ? 1 : -1;
    }
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int flips = static_cast<int>(std::lround(opts.flip_fraction * m));
    for (int j = 0; j < flips; ++j) {
      d.samples[order[j]].label *= -1;
    }
    return Problem::logistic(partition(d, n, PartitionScheme::Contiguous),
                             opts.lambda_hat);
  }

  std::vector<Eigen::MatrixXd> q(n);
  std::vector<Eigen::VectorXd> b(n);
  std::uniform_real_distribution<double> curve(opts.min_curvature,
                                               opts.max_curvature);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd raw(p, p);
    for (int k = 0; k < raw.size(); ++k) raw.data()[k] = gauss(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    const Eigen::MatrixXd basis = qr.householderQ();
    Eigen::VectorXd spectrum(p);
    for (int k = 0; k < p; ++k) spectrum(k) = curve(rng);
    q[i] = basis * spectrum.asDiagonal() * basis.transpose();
    q[i] = 0.5 * (q[i] + q[i].transpose());  // kill rounding asymmetry
    b[i] = Eigen::VectorXd(p);
    for (int k = 0; k < p; ++k) b[i](k) = gauss(rng);
  }
  Eigen::MatrixXd q_total = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b_total = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < n; ++i) {
    q_total += q[i];
    b_total += b[i];
  }
  Eigen::VectorXd z_star = q_total.ldlt().solve(b_total);
  return Problem::quadratic(std::move(q), std::move(b), std::move(z_star));
}

}  // namespace udna
