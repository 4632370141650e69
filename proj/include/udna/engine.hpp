#pragma once

#include <optional>
#include <string>
#include <vector>

#include "udna/directions.hpp"
#include "udna/network.hpp"
#include "udna/problems.hpp"

namespace udna {

// One algorithm instance: the four mixing polynomials, the direction scheme,
// and the step size (explicit, or derived from the spectral constants and
// the scheme's curvature envelope when auto_alpha is set).
struct AlgoConfig {
  std::string name = "custom";
  PolySpec poly_a = PolySpec::power(1, PolySpec::Role::A);
  PolySpec poly_b = PolySpec::identity(PolySpec::Role::B);
  PolySpec poly_c = PolySpec::power(1, PolySpec::Role::C);
  PolySpec poly_d = PolySpec::identity(PolySpec::Role::D);
  Scheme scheme = Scheme::Identity;
  SchemeParams scheme_params;
  bool auto_alpha = true;
  double alpha = 0.0;
  // Curvature interval [psi, psi_cap] for the step-size bound and descent
  // constants; defaults come from the scheme's certificate envelope.
  std::optional<double> psi_override;
  std::optional<double> psi_cap_override;
  int max_iters = 1000;
  double stop_tol = 0.0;  // stationarity threshold; 0 disables early stop
  int record_every = 1;
  bool keep_iterates = false;  // store every iterate (tests, recursions)
  Eigen::MatrixXd x0;          // empty means the zero start
};

// Named instances: non-atc-gt, atc-gt, semi-atc-gt, dqn, dgm-bb-c, dsg,
// udna1 (SR1), udna2 (BFGS), udna3 (corrected tau=1), udna4 (corrected
// tau=2). power selects K for dgm-bb-c and is ignored elsewhere.
// Throws std::invalid_argument on an unknown name.
AlgoConfig preset(const std::string& name, int power = 1);

// Coefficients of the per-iteration potential descent bound. a2 is infinite
// when the tracking polynomial annihilates the disagreement subspace
// (sigma_d = 0); gamma = min(a1, a2, a3).
struct DescentCoefficients {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double gamma = 0.0;
};

// Largest certified step size for the given spectral constants, smoothness
// L, node count, and curvature interval. With sigma_d below the floor the
// tracking term is dropped (flag reported through dropped_tracking_term).
// Requires sigma_a, sigma_c < 1 and 0 < psi <= psi_cap.
double max_stepsize(const SpectralConstants& sc, double lipschitz, int n,
                    double psi, double psi_cap,
                    bool* dropped_tracking_term = nullptr);

DescentCoefficients descent_coefficients(const SpectralConstants& sc,
                                         double lipschitz, int n,
                                         double alpha, double psi,
                                         double psi_cap);

// Weight of the tracking penalty inside the potential function. Degenerates
// when sigma_d is below the floor; tracking_defined then reports false and
// the coefficient is 0, so the potential silently omits that term.
double potential_coefficient(const SpectralConstants& sc, double lipschitz,
                             bool* tracking_defined = nullptr);

// One recorded diagnostics row. dx is the step length ||x^{t+1} - x^t||
// taken FROM this row's iterate (NaN on the final row); gbar_norm is the
// gradient norm of the average objective at the average iterate.
struct TraceRow {
  int t = 0;
  double f = 0.0;
  double consensus_sq = 0.0;
  double tracking_sq = 0.0;
  double v_sq = 0.0;
  double potential = 0.0;
  double opt_err = 0.0;
  double eps_stat = 0.0;
  long long volume = 0;
  double dx = 0.0;
  double gbar_norm = 0.0;
};

enum class RunStatus { Converged, ReachedMaxIters, Diverged };
const char* run_status_name(RunStatus s);

// Everything resolved before the first iteration: spectral constants, the
// effective curvature interval, the step size and its certified bound, the
// communication rounds per iteration, and the potential/descent constants.
struct RunSetup {
  SpectralConstants sc;
  double psi = 1.0;
  double psi_cap = 1.0;
  bool curvature_certified = false;
  double alpha = 0.0;
  double alpha_bound = 0.0;  // NaN when no curvature interval exists
  bool alpha_tracking_term_dropped = false;
  int rounds_per_iter = 0;
  double potential_coeff = 0.0;
  bool potential_tracking_defined = true;
  DescentCoefficients coeffs;
};

struct RunResult {
  RunSetup setup;
  RunStatus status = RunStatus::ReachedMaxIters;
  int iterations = 0;   // steps actually executed
  long long volume = 0;
  std::vector<TraceRow> trace;
  Eigen::MatrixXd x_final;
  Eigen::MatrixXd v_final;
  // Largest relative violation of mean(v) = mean(g) seen at any iteration.
  double max_tracking_violation = 0.0;
  // Realized curvature interval: min Rayleigh quotient v'Hv/||v||^2 and max
  // amplification ||Hv||/||v|| across nodes and iterations (NaN if v stayed
  // zero throughout).
  double psi_realized = 0.0;
  double psi_cap_realized = 0.0;
  std::vector<Eigen::MatrixXd> iterates;  // filled when keep_iterates
};

// Validates the configuration against the problem and mixing matrix and
// resolves every pre-iteration quantity. Shared by run and the offline
// diagnostics so both see the exact same step size and constants. Throws
// std::invalid_argument on mismatches and on auto_alpha without a usable
// curvature interval.
RunSetup resolve_setup(const Problem& problem, const MixingMatrix& w,
                       const AlgoConfig& config);

// Executes the two-phase iteration x+ = A x + alpha B d, v+ = C v + D
// (g+ - g) until stop_tol, max_iters, or a non-finite iterate. edge_count
// feeds the communication-volume accounting (rounds x edges x p per
// iteration).
RunResult run(const Problem& problem, const MixingMatrix& w, int edge_count,
              const AlgoConfig& config);

}  // namespace udna
