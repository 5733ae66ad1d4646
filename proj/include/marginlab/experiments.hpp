#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "marginlab/dynamics.hpp"
#include "marginlab/geometry.hpp"
#include "marginlab/net_core.hpp"

namespace marginlab {

// ---- parallelism and provenance --------------------------------------------

// MARGINLAB_THREADS when set to a positive integer, else the hardware count.
int thread_count();

// Runs body(0..n-1) on up to thread_count() workers. The first exception
// thrown by any task is rethrown after all workers finish.
void parallel_for(Index n, const std::function<void(Index)>& body);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// manifest.json with the command, inputs and their digests, seeds, versions.
void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const nlohmann::json& config);

// ---- parameter files ---------------------------------------------------------

nlohmann::json params_to_json(const NetParams<double>& theta);
NetParams<double> params_from_json(const nlohmann::json& j);
void write_params(const std::string& path, const NetParams<double>& theta);
NetParams<double> read_params(const std::string& path);

nlohmann::json vector_json(const Eigen::VectorXd& v);

// Flat object, one boolean per assumption plus the supporting numbers.
nlohmann::json assumption_report_json(const AssumptionReport& r);

// ---- function shape ------------------------------------------------------------

// 50 x 50 grid on [-1, 1]^2 for d = 2, else 2500 points uniform in the unit
// ball. Rows are probe points.
Eigen::MatrixXd probe_points(Index d, std::uint64_t seed = 0);

// max_x |f(x) - g(x)| / max_x |g(x)|. Dividing by the sup of the reference
// keeps the measure finite on the reference's zero set.
double sup_relative_error(const Eigen::VectorXd& f, const Eigen::VectorXd& g);

enum class ClassifierKind { kLinear, kOneLeakyRelu, kNonlinear };
const char* classifier_kind_name(ClassifierKind k);

struct FunctionFit {
  ClassifierKind kind = ClassifierKind::kNonlinear;
  Eigen::VectorXd linear_coef;  // least-squares <c, x> fit of f
  double linear_error = 0;      // sup-relative error of that fit
  Eigen::VectorXd neuron;       // u with f ~ +-phi(<+-u, x>)
  double neuron_sign = 1;
  double one_neuron_error = 0;
};

// Fits f_theta / |theta|^2 on the probes. The one-neuron fit reads u from
// the odd part f(x) - f(-x) = (1 + alpha) <u, x>.
FunctionFit classify_function(const NetParams<double>& theta,
                              const Eigen::MatrixXd& probes,
                              double tol = 1e-2);

// f_theta / |theta|^2 on the rows of probes.
Eigen::VectorXd normalized_outputs(const NetParams<double>& theta,
                                   const Eigen::MatrixXd& probes);

// ---- training runs -------------------------------------------------------------

struct TrainSpec {
  double alpha = 0.5;
  Index width = 2;
  InitConfig init;
  FlowConfig flow;
};

struct RunResult {
  Trajectory traj;
  MonitorReport monitor;
  FunctionFit fit;
  NetParams<double> direction;  // final theta / |theta|
  double final_gamma = 0;
  double final_gamma_smoothed = 0;
};

RunResult train_run(const Dataset<double>& data, const TrainSpec& spec);

nlohmann::json run_summary(const RunResult& run, const TrainSpec& spec,
                           const Dataset<double>& data);

// ---- Table 1 -------------------------------------------------------------------

struct Table1Options {
  std::vector<Index> n_list = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int seeds = 1;
  Index d = 50;
  Index width = 100;
  double gap = 0.5;
  Index test_n = 10000;
  double scale = 1e-3;  // multiple of the He initialization
  double eta0 = 1e-2;
  long max_steps = 20000;
  double norm_cap = 1e3;
  std::uint64_t seed = 0;
};

struct Table1Row {
  Index n = 0;
  int seed = 0;
  double svm_error = 0;
  double nn_error = 0;
  double nn_gamma = 0;
  double svm_gamma = 0;
  long steps = 0;
  std::string stop;
};

Table1Row table1_row(Index n, int seed, const Table1Options& opts);
std::vector<Table1Row> run_table1(const Table1Options& opts);
void write_table1_csv(const std::string& path,
                      const std::vector<Table1Row>& rows);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---- Phase I scaling --------------------------------------------------------

struct PhaseOneRow {
  double r = 0;
  double T1 = 0;
  double error = 0;  // M-norm of theta(T1) minus the prediction
  long steps = 0;
};

struct PhaseOneScaling {
  std::vector<PhaseOneRow> rows;
  double slope = 0;  // least-squares slope of log error against log r
};

// Integrates with classical Runge-Kutta at step eta up to each T1(r).
PhaseOneScaling phase_one_scaling(const Dataset<double>& data,
                                  const NetParams<double>& theta_bar0,
                                  double sigma, const std::vector<double>& r,
                                  double eta = 1e-2);

double log_log_slope(const std::vector<double>& x,
                     const std::vector<double>& y);

}  // namespace marginlab
