#pragma once

#include <vector>

#include "udna/engine.hpp"

namespace udna {

// Stationarity measure ||v||^2 + ||v - Mv||^2 + ||x - Mx||^2 over the
// stacked node states. Zero exactly when every node agrees and the tracked
// average vanishes.
double stationarity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& v);

// Optimality error || (1/n) sum_i grad f_i(x_i) || + ||x - Mx||. Uses the
// raw per-node gradients at the current iterates, not the tracked average.
double optimality_error(const Problem& problem, const Eigen::MatrixXd& x);

// Constants of the stationarity-witness inequalities, split out so each can
// be evaluated against hand arithmetic. gamma is the descent constant and
// alpha the step size actually used.
double kl_step_constant(double alpha, double psi_cap, double gamma);
double kl_value_constant(const SpectralConstants& sc, double lipschitz,
                         double alpha, double gamma);
double kl_gradient_constant(double lipschitz, int n, double alpha,
                            double gamma);

// Per-iteration witness sequence T_t = sqrt(gamma min{1, alpha}) *
// sqrt(||V||^2 + ||V - MV||^2 + ||X - MX||^2) together with the margins of
// the four inequalities it certifies:
//   descent:  T_t^2             <= P_t - P_{t+1}
//   step:     ||X_{t+1} - X_t|| <= sqrt(c1) T_t
//   value:    P_{t+1}           <= F(xbar_t) + c2 T_t^2
//   gradient: ||grad F(xbar_t)|| / sqrt(n) <= c3 T_t
// worst_* holds the minimum margin normalized by the magnitudes involved;
// ok means every normalized margin is >= -1e-9. A trace needs consecutive
// iteration stamps (record stride 1), otherwise std::invalid_argument.
struct KLWitness {
  double gamma = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  std::vector<double> T;
  std::vector<double> descent_margin;
  std::vector<double> step_margin;
  std::vector<double> value_margin;
  std::vector<double> gradient_margin;
  double worst_descent = 0.0;
  double worst_step = 0.0;
  double worst_value = 0.0;
  double worst_gradient = 0.0;
  bool ok = true;
};

KLWitness kl_witness(const std::vector<TraceRow>& trace,
                     const SpectralConstants& sc, double lipschitz, int n,
                     double alpha, double psi, double psi_cap);

// Margins of the per-iteration potential drop bound
//   P_{t+1} - P_t <= -(a1 alpha ||v||^2 + a2 ||v - Mv||^2 + a3 ||x - Mx||^2)
// one entry per transition; empty when the trace has fewer than two rows.
// An infinite a2 (degenerate tracking subspace) contributes nothing. Out of
// contract inputs simply produce negative margins; nothing throws except a
// non-unit record stride.
struct DescentReport {
  std::vector<double> margins;
  double min_margin = 0.0;
  double min_scaled_margin = 0.0;
  bool ok = true;
};

DescentReport descent_report(const std::vector<TraceRow>& trace,
                             const DescentCoefficients& k, double alpha);

// Tail-window regression of a residual series: geometric (log r linear in
// t) against power law (log r linear in log t), keeping whichever explains
// the tail better. A residual below `floor` anywhere after the transient is
// classified as reaching zero in finitely many steps.
enum class RateRegime { Geometric, Power, Finite, InsufficientSamples };
const char* rate_regime_name(RateRegime r);

struct RateFitOptions {
  double transient_fraction = 0.2;
  double floor = 1e-14;
  int min_samples = 50;
};

struct RateFit {
  RateRegime regime = RateRegime::InsufficientSamples;
  double rate = 0.0;      // geometric ratio per iteration, when geometric
  double exponent = 0.0;  // power-law exponent, when power
  double r2 = 0.0;
  int window_begin = 0;
  int window_end = 0;
};

RateFit rate_fit(const std::vector<double>& residuals,
                 const RateFitOptions& opts = {});

}  // namespace udna
