#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "marginlab/net_core.hpp"

namespace marginlab {

struct SeparatorSolution {
  Eigen::VectorXd w_star;  // unit vector
  double gamma_star = 0;   // min_i y_i <w_star, x_i>
  Eigen::VectorXd duals;   // lambda_i >= 0 of min ||w||^2 s.t. y<w,x> >= 1
  std::vector<Index> support;
  double kkt_residual = 0;
  int sweeps = 0;
};

struct SeparatorOptions {
  double kkt_tol = 1e-9;
  int max_sweeps = 1000000;
  double separable_floor = 1e-9;   // NotSeparable at or below this margin
  double support_rel_tol = 1e-6;   // y<w*,x> <= gamma*(1 + tol) is support
};

// Hard-margin separator through the origin. Throws NotSeparable.
SeparatorSolution max_margin_separator(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y,
                                       const SeparatorOptions& opts = {});
SeparatorSolution max_margin_separator(const Dataset<double>& data,
                                       const SeparatorOptions& opts = {});

// min_i y_i <w, x_i> for a unit-normalized copy of w.
double linear_margin(const Eigen::VectorXd& w, const Dataset<double>& data);

struct TiltedData {
  Eigen::MatrixXd x_plus;
  Eigen::MatrixXd x_minus;
  Eigen::VectorXd mu;
  Eigen::VectorXd mu_plus;
  Eigen::VectorXd mu_minus;
  double kappa = 0;
  std::optional<SeparatorSolution> plus;   // w+ / gamma+
  std::optional<SeparatorSolution> minus;  // w- / gamma-
};

Eigen::VectorXd mean_vector(const Dataset<double>& data);
TiltedData tilt(const Dataset<double>& data, double alpha);

bool cone_membership(const Eigen::VectorXd& w, const Dataset<double>& data,
                     double delta);

struct PrincipalDirection {
  std::string candidate;  // "w_star", "mu", "w_plus"
  Eigen::VectorXd w;
  double gamma = 0;
  double lhs = 0;
  double rhs = 0;
  double slack = 0;  // rhs - lhs; positive means the inequality holds
};

struct AssumptionReport {
  bool linearly_separable = false;
  std::optional<SeparatorSolution> separator;
  bool symmetric = false;
  std::vector<Index> pairing;  // partner index, -1 when none
  bool mu_dot_x_nonzero = false;
  bool cone_condition = false;
  std::vector<bool> cone_condition_per_sample;
  std::optional<PrincipalDirection> principal_direction;
  std::vector<PrincipalDirection> principal_candidates;
  bool mu_plus_greater = false;
  bool support_labels_positive = false;
  double mu_plus_norm = 0;
  double mu_minus_norm = 0;
};

AssumptionReport check_assumptions(const Dataset<double>& data, double alpha);

// Exact-match pairing x_j = -x_i, y_j = -y_i. Empty when not symmetric.
std::vector<Index> symmetric_pairing(const Dataset<double>& data,
                                     double tol = 1e-12);
bool is_symmetric(const Dataset<double>& data, double tol = 1e-12);

struct A4Report {
  bool shortcut = false;   // all tilted support vectors carry label +1
  bool heuristic = false;  // estimate comes from the probe-based minimax
  bool holds = false;
  double gamma_plus = 0;
  double bound = 0;  // estimate of the best all-negative-head margin
  std::vector<Index> support_plus;
};

struct A4Options {
  int probes = 16;
  int outer_iters = 200;
  int inner_iters = 200;
  std::uint64_t seed = 0;
};

A4Report assumption_A4_lemma_check(const Dataset<double>& data, double alpha,
                                   const A4Options& opts = {});

}  // namespace marginlab
