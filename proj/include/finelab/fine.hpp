#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finelab/capacity.hpp"

namespace finelab {

enum class WienerMode { Rescaled, Global };
enum class Verdict { Thin, Thick, Inconclusive };

std::string to_string(WienerMode mode);
std::string to_string(Verdict verdict);
WienerMode parse_mode(const std::string& text);

struct ScaleDiagnostics {
  int j = 0;
  double r_j = 0.0;
  double cap_num = 0.0;
  double cap_den = 0.0;
  double term = 0.0;
  double kkt_residual = 0.0;  // worse of the two solves
  int iterations = 0;
  bool converged = true;
  bool convention = false;  // denominator vanished, term set to 1
  bool above_one = false;   // term exceeds 1.05
};

struct WienerOptions {
  double sigma = 2.0;
  double r0 = 1.0;
  int scales = 12;
  double p = 2.0;
  int resolution = 128;
  WienerMode mode = WienerMode::Rescaled;
  double tol = 1e-8;
  double weight_exponent = 0.0;
};

struct WienerReport {
  AnalyticSet descriptor;
  Point x0;
  WienerOptions options;
  std::vector<double> terms;         // one per computed scale
  std::vector<double> partial_sums;
  std::vector<ScaleDiagnostics> scales;
  std::vector<int> skipped_scales;   // global mode only
  double decay_ratio = 0.0;
  int convention_hits = 0;
  double max_term = 0.0;
  bool flagged = false;  // some term exceeded 1.05
};

/// Terms (cap(E cap B(x0, s^-j r0), B(x0, s^(1-j) r0)) / cap(B(x0, s^-j r0), B(x0, s^(1-j) r0)))^(1/(p-1))
/// for j = 1..scales. Rescaled mode evaluates every scale on the same unit
/// grid after pulling the set back by the dilation about x0.
WienerReport wiener_terms(const AnalyticSet& descriptor, const Point& x0, const WienerOptions& opts);

/// Geometric ratio fitted to the nonzero terms by least squares on log t_j.
double fit_decay_ratio(const std::vector<double>& terms, int tail_window);

struct ClassificationPolicy {
  double rho_max = 0.9;
  double eps_tail = 0.05;
  double tau_floor = 0.05;
  int K = 3;
};

struct Classification {
  Verdict verdict = Verdict::Inconclusive;
  double tail_estimate = 0.0;
  double floor_estimate = 0.0;
  double decay_ratio = 0.0;
  int scales_used = 0;
};

/// Thin when the fitted ratio is at most rho_max and the geometric tail
/// beyond the last term is at most eps_tail; Thick when the last K terms
/// stay above tau_floor without decaying faster than rho_max.
Classification classify_thin(const WienerReport& report, const ClassificationPolicy& policy = {});
Classification classify_terms(const std::vector<double>& terms, const ClassificationPolicy& policy = {});

struct ShrinkPoint {
  double rho = 0.0;
  double capacity = 0.0;
  CapacityDiagnostics diagnostics;
};

struct ShrinkProfile {
  std::vector<ShrinkPoint> points;
  bool monotone = true;  // nonincreasing as rho decreases, up to 2 tol
};

/// cap(E cap B(x0, rho), B) for each rho; radii must be strictly decreasing.
ShrinkProfile capacity_shrink_profile(const WeightedGraphSpace& space, const Region& E, const Point& x0,
                                      const Region& B, const std::vector<double>& radii, double p,
                                      double tol = 1e-8);

struct ThinUnionResult {
  std::vector<double> radii;     // r_j = sigma^-m_j r0
  std::vector<int> truncation;   // m_j
  std::vector<double> tails;     // tail of report j beyond m_j
  AnalyticSet union_descriptor;
  WienerReport combined;
  Classification classification;
  double parts_sum = 0.0;        // sum of the input reports' partial sums
};

/// Truncates each thin set so that its tail beyond the truncation scale is
/// at most budget 2^-j, then recomputes the Wiener terms of the union.
ThinUnionResult thin_union_radii(const std::vector<WienerReport>& reports, double budget,
                                 const ClassificationPolicy& policy = {});

}  // namespace finelab
