#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "marginlab/net_core.hpp"

namespace marginlab {

enum class InitScheme { kGaussian, kBalanced };
enum class SignPattern { kRandom, kAlternating };

struct InitConfig {
  double sigma_init = 1e-3;
  double c_ainit = 1.0;  // gaussian scheme: a_k ~ N(0, c^2 sigma^2)
  InitScheme scheme = InitScheme::kBalanced;
  SignPattern signs = SignPattern::kRandom;  // balanced scheme only
  std::uint64_t seed = 0;
};

// theta_0 = sigma_init * theta_bar_0, with theta_bar_0 drawn at unit scale.
NetParams<double> sample_init(const InitConfig& cfg, Index m, Index d,
                              double alpha);
NetParams<double> sample_unit_init(const InitConfig& cfg, Index m, Index d,
                                   double alpha);

// kFixed and kRK4 use a constant step eta0 (Euler and classical Runge-Kutta);
// kAdaptive is Euler with eta0 / loss once every margin is positive.
enum class StepRule { kFixed, kAdaptive, kRK4 };

enum class StopReason {
  kMaxSteps,
  kLossFloor,
  kDirectionalConvergence,
  kNormCap,
  kTimeHorizon,
  kStalled,  // backtracking exhausted
};

const char* stop_reason_name(StopReason r);

struct FlowConfig {
  StepRule step_rule = StepRule::kAdaptive;
  double eta0 = 1e-2;
  long max_steps = 100000;
  double loss_floor = 0;     // stop once loss < loss_floor; 0 disables
  double lr_loss_floor = 0;  // adaptive rule uses eta0 / max(loss, this)
  // After interpolation eta0 decays as eta0 / (1 + j / eta_decay_steps),
  // j counting post-interpolation steps, floored at eta_min. 0 disables.
  double eta_decay_steps = 0;
  double eta_min = 0;
  double dir_tol = 1e-4;
  double dir_window = 0.1;   // fraction of elapsed steps
  long min_dir_steps = 100;
  double norm_cap = 1e6;
  long record_every = 100;
  double t_end = std::numeric_limits<double>::infinity();
  bool keep_params = true;
  int max_backtracks = 60;
  // Once interpolating, also reject steps that lower the smoothed margin.
  // The flow never does, so a rejection means the step is too coarse.
  bool margin_guard = true;
  // The backtracking factor doubles (up to 1) after this many clean steps.
  // 0 keeps it non-increasing.
  long regrow_after = 20;
  bool check_dir = true;
};

struct Snapshot {
  long step = 0;
  double t = 0;      // physical time; may overflow to +inf
  double log_t = -std::numeric_limits<double>::infinity();
  double loss = 0;
  double log_loss = 0;
  double q_min = 0;
  double gamma = 0;
  double gamma_smoothed = 0;
  bool interpolating = false;
  double norm = 0;
  double dir_change = 0;
  double max_balance_residual = 0;
  double beta_cos = 0;
  Index kink_count = 0;
  std::optional<NetParams<double>> theta;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  NetParams<double> final_theta;
  StopReason stop = StopReason::kMaxSteps;
  long steps = 0;
  long backtracks = 0;
  double step_scale = 1;  // cumulative backtracking factor
  std::optional<long> interpolation_step;
};

Trajectory integrate(const NetParams<double>& theta0,
                     const Dataset<double>& data, const FlowConfig& cfg);

struct MonitorViolation {
  std::string quantity;  // "loss", "gamma_smoothed", "norm"
  long step = 0;
  double magnitude = 0;
};

struct MonitorReport {
  bool interpolation_reached = false;
  std::optional<long> interpolation_step;
  bool loss_monotone = true;
  bool gamma_smoothed_monotone = true;
  bool norm_increasing = true;
  double gamma_slack = 1e-7;
  double loss_slack = 1e-9;
  std::vector<MonitorViolation> violations;
};

MonitorReport loss_convergence_monitor(const Trajectory& traj,
                                       const Dataset<double>& data,
                                       double gamma_slack = 1e-7,
                                       double loss_slack = 1e-9);

// %.17g, or a decimal written from a base-10 logarithm when the value
// overflows a double.
std::string format_time(double t, double log_t);
std::string format_double(double v);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);

}  // namespace marginlab
