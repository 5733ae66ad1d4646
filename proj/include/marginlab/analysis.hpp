#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "marginlab/net_core.hpp"

namespace marginlab {

// G(w) = (1/2n) sum_i y_i phi(w . x_i).
double g_function(const Eigen::VectorXd& w, const Dataset<double>& data,
                  double alpha);

// Selected gradient of G at w.
Eigen::VectorXd g_gradient(const Eigen::VectorXd& w,
                           const Dataset<double>& data, double alpha);

// grad G, constant on symmetric data. Throws NotSymmetric.
Eigen::VectorXd mu_tilde(const Dataset<double>& data, double alpha);

// [[0, mu], [mu^T, 0]] of size (d + 1).
Eigen::MatrixXd m_matrix(const Eigen::VectorXd& mu);

struct Eigenpair {
  double value = 0;
  Eigen::VectorXd vector;  // unit, last entry >= 0
  double residual = 0;     // ||M v - value v||
  int iterations = 0;
};

// Power iteration on M + shift * I. The shift defaults to the Frobenius
// norm, which makes the spectrum nonnegative.
Eigenpair top_eigenpair(const Eigen::MatrixXd& M,
                        std::optional<double> shift = std::nullopt,
                        double tol = 1e-14, int max_iters = 100000);

struct PhaseOnePrediction {
  Eigen::VectorXd mu_tilde;
  double lambda0 = 0;
  Eigen::VectorXd top_eigvec;  // (mu_bar, 1) / sqrt(2)
  double eig_residual = 0;
  Eigen::VectorXd b_bar;
  double m_norm_bar0 = 0;
  double T1 = 0;
  double r = 0;
  NetParams<double> predicted;  // w_k = r b_k mu_bar, a_k = r b_k
};

// Throws NotSymmetric, or ScaleViolation when
// sigma > r^3 / (sqrt(m) ||theta_bar0||_M).
PhaseOnePrediction phase_one_predict(const NetParams<double>& theta_bar0,
                                     const Dataset<double>& data,
                                     double sigma, double r);

struct NonsymPhaseOnePrediction {
  Eigen::VectorXd mu_plus;
  Eigen::VectorXd mu_minus;
  Eigen::VectorXd mu_bar_plus;
  Eigen::VectorXd mu_bar_minus;
  double lambda_plus = 0;   // |mu+| / 2, growth rate inside the cone
  double lambda_minus = 0;  // |mu-| / 2
  double kappa = 0;         // 1 - |mu-| / |mu+|
  double T1 = 0;            // (1 / lambda_plus) ln(r / (sqrt(m) sigma))
  std::vector<Index> positive_heads;  // a_bar_k > 0, heading to mu_bar+
  std::vector<Index> negative_heads;  // a_bar_k < 0, heading to -mu_bar-
  // Scale of the negative heads at T1 relative to the positive ones.
  double negative_scale = 0;  // r^(-kappa) * (sqrt(m) sigma / r)^kappa
};

// Throws AssumptionViolation unless the cone condition holds and
// |mu+| > |mu-|.
NonsymPhaseOnePrediction nonsym_phase_one_predict(
    const NetParams<double>& theta_bar0, const Dataset<double>& data,
    double alpha, double sigma, double r);

struct EmbeddingVector {
  Eigen::VectorXd b;
  double b_plus = 0;   // sqrt(sum_{b_k > 0} b_k^2)
  double b_minus = 0;  // -sqrt(sum_{b_k < 0} b_k^2)
  bool good = false;   // no zeros, at least one entry of each sign
};

EmbeddingVector make_embedding_vector(const Eigen::VectorXd& b);

// b may contain zeros when the matching half of theta_hat is zero.
bool is_compatible(const NetParams<double>& theta_hat,
                   const EmbeddingVector& b);

// pi_b of a two-neuron net with a_1 >= 0 >= a_2. Throws
// IncompatibleEmbedding.
NetParams<double> embed(const NetParams<double>& theta_hat,
                        const EmbeddingVector& b);

// The same linear map without sign checks; used on gradients.
NetParams<double> embed_linear(const NetParams<double>& theta_hat,
                               const EmbeddingVector& b);

// Lawson-Hanson active set for min ||A x - b|| subject to x >= 0.
struct NnlsResult {
  Eigen::VectorXd x;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
};

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                double tol = 1e-10, int max_iters = -1);

enum class Verdict { kPass, kFail, kInconclusive };
const char* verdict_name(Verdict v);

struct KKTOptions {
  double tol_stat = 1e-6;
  double tol_bal = 1e-6;
  double support_tol = 1e-4;      // q_i <= q_min (1 + tol) is support
  double support_tol_max = 1e-2;  // widened x10 up to this
  double kink_tol = 1e-9;         // |w . x| <= tol |w| |x| is a kink
  int max_kinks = 8;              // beyond this the verdict is inconclusive
};

struct KKTCertificate {
  Eigen::VectorXd lambdas;  // one per sample, zero off support
  std::vector<Index> support;
  double support_tol = 0;   // value actually used
  bool widened = false;
  Index kink_count = 0;     // (neuron, support sample) pairs on a kink
  double stationarity_residual = 0;
  double balance_residual = 0;
  double q_min = 0;
  double gamma = 0;
  Verdict verdict = Verdict::kFail;
  KKTOptions options;

  std::string to_json() const;
};

// Residuals are measured on theta / |theta|. Throws NonPositiveMargin.
KKTCertificate kkt_certify(const NetParams<double>& theta,
                           const Dataset<double>& data,
                           const KKTOptions& opts = {});

enum class TwoNeuronClass { kFull, kPosOnly, kNegOnly, kNone };
const char* two_neuron_class_name(TwoNeuronClass c);

struct TwoNeuronMatch {
  TwoNeuronClass label = TwoNeuronClass::kNone;
  double distance = 0;  // to the closest canonical form
  double distance_full = 0;
  double distance_pos_only = 0;
  double distance_neg_only = 0;
};

// Matches theta / |theta| against (w*, -w*, 1, -1) / 2, (w*, 0, 1, 0) / sqrt2
// and (0, -w*, 0, -1) / sqrt2.
TwoNeuronMatch two_neuron_kkt_classify(const NetParams<double>& theta,
                                       const Dataset<double>& data,
                                       double tol = 1e-4);

struct GlobalMaxMargin {
  NetParams<double> theta;  // unit norm
  double gamma = 0;         // (1 + alpha) / 4 * gamma*
  Eigen::VectorXd w_star;
  double gamma_star = 0;
};

// pi_b((w*, -w*, 1, -1) / 2). Default b alternates +1, -1.
GlobalMaxMargin symmetric_global_max_margin(
    const Dataset<double>& data, double alpha, Index m,
    const std::optional<EmbeddingVector>& b = std::nullopt);

// Three-neuron KKT direction on kink_example_dataset(alpha), unit norm.
// Its decision boundary bends, and its margin is below the linear optimum.
NetParams<double> kink_example_params(double alpha);

struct OrthosepPrediction {
  Eigen::VectorXd w_pos;
  std::optional<Eigen::VectorXd> w_neg;  // empty for single-class data
  double gamma = 0;
  NetParams<double> theta;  // balanced, unit norm

  // relu(w_pos . x) - relu(w_neg . x)
  double operator()(const Eigen::VectorXd& x) const;
};

// Throws NotOrthogonallySeparable.
OrthosepPrediction orthosep_predicted_function(const Dataset<double>& data);

// One neuron (w+, |w+|) / sqrt2 from the tilted problem.
NetParams<double> one_neuron_direction(const Dataset<double>& data,
                                       double alpha);

struct ComparatorNet {
  NetParams<double> theta;  // unit norm
  double gamma = 0;
  double beta = 0;           // tilt of the two positive neurons
  double negative_weight = 0;
};

// Two positive neurons along cos(b) w* +- sin(b) w_perp and one negative
// neuron along -w*, with b and the negative weight picked by grid search.
ComparatorNet hinted_comparator(const Dataset<double>& data, double alpha,
                                const Eigen::VectorXd& w_star,
                                const Eigen::VectorXd& w_perp);

}  // namespace marginlab
