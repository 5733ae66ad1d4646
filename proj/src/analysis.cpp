#include "marginlab/analysis.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "marginlab/datasets.hpp"
#include "marginlab/geometry.hpp"

namespace marginlab {

using nlohmann::json;

double g_function(const Eigen::VectorXd& w, const Dataset<double>& data,
                  double alpha) {
  if (w.size() != data.d()) {
    throw Error(ErrorCode::kDimensionMismatch, "w has the wrong dimension");
  }
  const Eigen::VectorXd z = data.X * w;
  double s = 0;
  for (Index i = 0; i < data.n(); ++i) s += data.y(i) * leaky_relu(z(i), alpha);
  return s / (2.0 * static_cast<double>(data.n()));
}

Eigen::VectorXd g_gradient(const Eigen::VectorXd& w,
                           const Dataset<double>& data, double alpha) {
  if (w.size() != data.d()) {
    throw Error(ErrorCode::kDimensionMismatch, "w has the wrong dimension");
  }
  const Eigen::VectorXd z = data.X * w;
  Eigen::VectorXd c(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    c(i) = data.y(i) * leaky_relu_slope(z(i), alpha);
  }
  return data.X.transpose() * c / (2.0 * static_cast<double>(data.n()));
}

Eigen::VectorXd mu_tilde(const Dataset<double>& data, double alpha) {
  if (!is_symmetric(data)) {
    throw Error(ErrorCode::kNotSymmetric, "mu_tilde needs symmetric data");
  }
  // Any point off the kinks gives the same gradient.
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(data.d());
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Index j = 0; j < data.d(); ++j) w(j) = normal(rng);
    if ((data.X * w).cwiseAbs().minCoeff() > 1e-8) break;
  }
  return g_gradient(w, data, alpha);
}

Eigen::MatrixXd m_matrix(const Eigen::VectorXd& mu) {
  const Index d = mu.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d + 1, d + 1);
  M.col(d).head(d) = mu;
  M.row(d).head(d) = mu.transpose();
  return M;
}

Eigenpair top_eigenpair(const Eigen::MatrixXd& M, std::optional<double> shift,
                        double tol, int max_iters) {
  const Index n = M.rows();
  if (n == 0 || M.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix must be square");
  }
  const double s = shift ? *shift : M.norm();
  const Eigen::MatrixXd A = M + s * Eigen::MatrixXd::Identity(n, n);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  v.normalize();
  Eigenpair ep;
  for (ep.iterations = 0; ep.iterations < max_iters; ++ep.iterations) {
    Eigen::VectorXd next = A * v;
    const double nn = next.norm();
    if (nn == 0) break;
    next /= nn;
    const double change = (next - v).norm();
    v = next;
    if (change < tol) break;
  }
  if (v(n - 1) < 0) v = -v;
  ep.vector = v;
  ep.value = v.dot(M * v);
  ep.residual = (M * v - ep.value * v).norm();
  return ep;
}

PhaseOnePrediction phase_one_predict(const NetParams<double>& theta_bar0,
                                     const Dataset<double>& data,
                                     double sigma, double r) {
  check_dims(theta_bar0, data.d());
  if (!(sigma > 0) || !(r > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma and r must be positive");
  }
  PhaseOnePrediction p;
  p.r = r;
  p.mu_tilde = mu_tilde(data, theta_bar0.alpha);
  const double mu_norm = p.mu_tilde.norm();
  if (!(mu_norm > 0)) {
    throw Error(ErrorCode::kZeroVector, "mu_tilde vanishes");
  }
  const Eigenpair ep = top_eigenpair(m_matrix(p.mu_tilde));
  p.lambda0 = mu_norm;
  p.top_eigvec = ep.vector;
  p.eig_residual = ep.residual;
  const Eigen::VectorXd mu_bar = p.mu_tilde / mu_norm;

  const Index m = theta_bar0.m();
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  p.m_norm_bar0 = m_norm(theta_bar0);
  if (!(p.m_norm_bar0 > 0)) {
    throw Error(ErrorCode::kZeroVector, "theta_bar0 is zero");
  }
  if (sigma > r * r * r / (sqrt_m * p.m_norm_bar0)) {
    throw Error(ErrorCode::kScaleViolation,
                "sigma exceeds r^3 / (sqrt(m) |theta_bar0|_M)");
  }
  p.b_bar.resize(m);
  for (Index k = 0; k < m; ++k) {
    p.b_bar(k) = (theta_bar0.W.row(k).dot(mu_bar) + theta_bar0.a(k)) /
                 (2 * sqrt_m * p.m_norm_bar0);
  }
  p.T1 = std::log(r / (sqrt_m * sigma * p.m_norm_bar0)) / p.lambda0;
  p.predicted = NetParams<double>::Zero(m, data.d(), theta_bar0.alpha);
  for (Index k = 0; k < m; ++k) {
    p.predicted.W.row(k) = r * p.b_bar(k) * mu_bar.transpose();
    p.predicted.a(k) = r * p.b_bar(k);
  }
  return p;
}

NonsymPhaseOnePrediction nonsym_phase_one_predict(
    const NetParams<double>& theta_bar0, const Dataset<double>& data,
    double alpha, double sigma, double r) {
  check_dims(theta_bar0, data.d());
  if (!(sigma > 0) || !(r > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma and r must be positive");
  }
  const AssumptionReport rep = check_assumptions(data, alpha);
  if (!rep.cone_condition) {
    throw Error(ErrorCode::kAssumptionViolation, "cone condition fails");
  }
  if (!rep.mu_plus_greater) {
    throw Error(ErrorCode::kAssumptionViolation, "|mu+| > |mu-| fails");
  }
  const TiltedData td = tilt(data, alpha);
  NonsymPhaseOnePrediction p;
  p.mu_plus = td.mu_plus;
  p.mu_minus = td.mu_minus;
  p.mu_bar_plus = td.mu_plus.normalized();
  p.mu_bar_minus = td.mu_minus.normalized();
  p.lambda_plus = td.mu_plus.norm() / 2;
  p.lambda_minus = td.mu_minus.norm() / 2;
  p.kappa = 1 - td.mu_minus.norm() / td.mu_plus.norm();
  const double sqrt_m = std::sqrt(static_cast<double>(theta_bar0.m()));
  p.T1 = std::log(r / (sqrt_m * sigma)) / p.lambda_plus;
  for (Index k = 0; k < theta_bar0.m(); ++k) {
    if (theta_bar0.a(k) > 0) {
      p.positive_heads.push_back(k);
    } else if (theta_bar0.a(k) < 0) {
      p.negative_heads.push_back(k);
    }
  }
  p.negative_scale = std::pow(sqrt_m * sigma / r, p.kappa);
  return p;
}

EmbeddingVector make_embedding_vector(const Eigen::VectorXd& b) {
  EmbeddingVector e;
  e.b = b;
  double sp = 0;
  double sn = 0;
  bool has_zero = false;
  bool has_pos = false;
  bool has_neg = false;
  for (Index k = 0; k < b.size(); ++k) {
    if (b(k) > 0) {
      sp += b(k) * b(k);
      has_pos = true;
    } else if (b(k) < 0) {
      sn += b(k) * b(k);
      has_neg = true;
    } else {
      has_zero = true;
    }
  }
  e.b_plus = std::sqrt(sp);
  e.b_minus = -std::sqrt(sn);
  e.good = !has_zero && has_pos && has_neg;
  return e;
}

namespace {

bool half_is_zero(const NetParams<double>& t, Index k) {
  return t.W.row(k).squaredNorm() == 0 && t.a(k) == 0;
}

void check_two_neuron(const NetParams<double>& t) {
  if (t.m() != 2) {
    throw Error(ErrorCode::kDimensionMismatch, "expected a two-neuron net");
  }
}

}  // namespace

bool is_compatible(const NetParams<double>& theta_hat,
                   const EmbeddingVector& b) {
  check_two_neuron(theta_hat);
  if (theta_hat.a(0) < 0 || theta_hat.a(1) > 0) return false;
  if (b.b_plus == 0 && !half_is_zero(theta_hat, 0)) return false;
  if (b.b_minus == 0 && !half_is_zero(theta_hat, 1)) return false;
  return true;
}

NetParams<double> embed_linear(const NetParams<double>& theta_hat,
                               const EmbeddingVector& b) {
  check_two_neuron(theta_hat);
  const Index m = b.b.size();
  NetParams<double> out = NetParams<double>::Zero(m, theta_hat.d(),
                                                  theta_hat.alpha);
  for (Index k = 0; k < m; ++k) {
    const double bk = b.b(k);
    if (bk > 0) {
      const double c = bk / b.b_plus;
      out.W.row(k) = c * theta_hat.W.row(0);
      out.a(k) = c * theta_hat.a(0);
    } else if (bk < 0) {
      const double c = bk / b.b_minus;
      out.W.row(k) = c * theta_hat.W.row(1);
      out.a(k) = c * theta_hat.a(1);
    }
  }
  return out;
}

NetParams<double> embed(const NetParams<double>& theta_hat,
                        const EmbeddingVector& b) {
  if (!is_compatible(theta_hat, b)) {
    throw Error(ErrorCode::kIncompatibleEmbedding,
                "embedding vector is not compatible with theta_hat");
  }
  return embed_linear(theta_hat, b);
}

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                int max_iters) {
  const Index n = A.cols();
  if (A.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "A and b disagree");
  }
  if (max_iters < 0) max_iters = static_cast<int>(10 * std::max<Index>(n, 1));
  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double gtol =
      tol * std::max(1.0, (A.transpose() * b).cwiseAbs().maxCoeff());

  auto solve_passive = [&](const std::vector<bool>& P) {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j) {
      if (P[j]) idx.push_back(j);
    }
    Eigen::MatrixXd Ap(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
      Ap.col(static_cast<Index>(c)) = A.col(idx[c]);
    }
    const Eigen::VectorXd zp = Ap.completeOrthogonalDecomposition().solve(b);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      z(idx[c]) = zp(static_cast<Index>(c));
    }
    return z;
  };

  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    const Eigen::VectorXd g = A.transpose() * (b - A * res.x);
    Index best = -1;
    double best_g = gtol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[j] && g(j) > best_g) {
        best_g = g(j);
        best = j;
      }
    }
    if (best < 0) {
      res.converged = true;
      break;
    }
    passive[best] = true;
    while (true) {
      Eigen::VectorXd z = solve_passive(passive);
      bool feasible = true;
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0) feasible = false;
      }
      if (feasible) {
        res.x = z;
        break;
      }
      double step = 1;
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0) {
          step = std::min(step, res.x(j) / (res.x(j) - z(j)));
        }
      }
      res.x += step * (z - res.x);
      bool any = false;
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && res.x(j) <= 1e-15) {
          passive[j] = false;
          res.x(j) = 0;
          any = true;
        }
      }
      if (!any) {
        // Degenerate step; drop the most negative coordinate.
        Index worst = -1;
        for (Index j = 0; j < n; ++j) {
          if (passive[j] && (worst < 0 || z(j) < z(worst))) worst = j;
        }
        passive[worst] = false;
        res.x(worst) = 0;
      }
    }
  }
  res.residual = (A * res.x - b).norm();
  return res;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string KKTCertificate::to_json() const {
  json j;
  j["support"] = support;
  j["lambdas"] = std::vector<double>(lambdas.data(),
                                     lambdas.data() + lambdas.size());
  j["stationarity_residual"] = stationarity_residual;
  j["balance_residual"] = balance_residual;
  j["verdict"] = verdict_name(verdict);
  j["kink_count"] = kink_count;
  j["gamma"] = gamma;
  j["tolerances"] = {{"tol_stat", options.tol_stat},
                     {"tol_bal", options.tol_bal},
                     {"support_tol", support_tol},
                     {"support_widened", widened},
                     {"kink_tol", options.kink_tol}};
  return j.dump();
}

namespace {

struct KinkPair {
  Index neuron;
  Index sample;
};

// Stationarity system for theta_t = sum_{i in S} lambda_i grad q_i(theta_t).
// Kink pairs carry a free slope s in [alpha, 1], written as
// lambda_i s = alpha lambda_i + v with v + t = (1 - alpha) lambda_i.
void certify_on_support(const NetParams<double>& th,
                        const Dataset<double>& data,
                        const std::vector<Index>& support,
                        const std::vector<KinkPair>& kinks,
                        KKTCertificate& cert) {
  const Index m = th.m();
  const Index d = th.d();
  const double alpha = th.alpha;
  const Index ns = static_cast<Index>(support.size());
  const Index nk = static_cast<Index>(kinks.size());
  const Index rows = m * d + m + nk;
  const Index cols = ns + 2 * nk;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  const Eigen::MatrixXd Z = data.X * th.W.transpose();

  for (Index c = 0; c < ns; ++c) {
    const Index i = support[c];
    const double yi = data.y(i);
    for (Index k = 0; k < m; ++k) {
      const double z = Z(i, k);
      A.block(k * d, c, d, 1) =
          yi * th.a(k) * leaky_relu_slope(z, alpha) * data.X.row(i).transpose();
      A(m * d + k, c) = yi * leaky_relu(z, alpha);
    }
  }
  for (Index p = 0; p < nk; ++p) {
    const Index k = kinks[p].neuron;
    const Index i = kinks[p].sample;
    Index c = 0;
    while (support[c] != i) ++c;
    A.block(k * d, c, d, 1) =
        data.y(i) * th.a(k) * alpha * data.X.row(i).transpose();
    A(m * d + k, c) = 0;
    A.block(k * d, ns + 2 * p, d, 1) =
        data.y(i) * th.a(k) * data.X.row(i).transpose();
    const Index row = m * d + m + p;
    A(row, ns + 2 * p) = 1;
    A(row, ns + 2 * p + 1) = 1;
    A(row, c) = -(1 - alpha);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  b.head(m * d + m) = th.flat();

  const NnlsResult sol = nnls(A, b);
  const Eigen::VectorXd r = A * sol.x - b;
  double worst = 0;
  for (Index k = 0; k < m; ++k) {
    worst = std::max(worst, r.segment(k * d, d).norm());
    worst = std::max(worst, std::abs(r(m * d + k)));
  }
  for (Index p = 0; p < nk; ++p) {
    worst = std::max(worst, std::abs(r(m * d + m + p)));
  }
  cert.stationarity_residual = worst / th.norm();
  cert.lambdas = Eigen::VectorXd::Zero(data.n());
  for (Index c = 0; c < ns; ++c) cert.lambdas(support[c]) = sol.x(c);
}

}  // namespace

KKTCertificate kkt_certify(const NetParams<double>& theta,
                           const Dataset<double>& data,
                           const KKTOptions& opts) {
  check_dims(theta, data.d());
  KKTCertificate cert;
  cert.options = opts;
  const double nrm = theta.norm();
  const Eigen::VectorXd q0 = margins(theta, data);
  if (!(nrm > 0) || !(q0.minCoeff() > 0)) {
    throw Error(ErrorCode::kNonPositiveMargin, "q_min must be positive");
  }
  const NetParams<double> unit = theta.scaled(1 / nrm);
  const double qmin_unit = q0.minCoeff() / (nrm * nrm);
  const NetParams<double> th = unit.scaled(1 / std::sqrt(qmin_unit));
  const Eigen::VectorXd q = margins(th, data);  // q_min = 1
  cert.q_min = q0.minCoeff();
  cert.gamma = qmin_unit;
  for (Index k = 0; k < unit.m(); ++k) {
    cert.balance_residual =
        std::max(cert.balance_residual,
                 std::abs(unit.W.row(k).norm() - std::abs(unit.a(k))));
  }

  const Eigen::MatrixXd Z = data.X * th.W.transpose();
  double stol = opts.support_tol;
  while (true) {
    std::vector<Index> support;
    for (Index i = 0; i < data.n(); ++i) {
      if (q(i) <= 1 + stol) support.push_back(i);
    }
    std::vector<KinkPair> kinks;
    for (Index i : support) {
      for (Index k = 0; k < th.m(); ++k) {
        const double scale = th.W.row(k).norm() * data.X.row(i).norm();
        if (std::abs(Z(i, k)) <= opts.kink_tol * scale) kinks.push_back({k, i});
      }
    }
    cert.support = support;
    cert.support_tol = stol;
    cert.kink_count = static_cast<Index>(kinks.size());
    if (cert.kink_count > opts.max_kinks) {
      cert.lambdas = Eigen::VectorXd::Zero(data.n());
      cert.stationarity_residual = NAN;
      cert.verdict = Verdict::kInconclusive;
      return cert;
    }
    certify_on_support(th, data, support, kinks, cert);
    if (cert.stationarity_residual <= opts.tol_stat) break;
    if (stol * 10 > opts.support_tol_max * (1 + 1e-12)) break;
    stol *= 10;
    cert.widened = true;
  }
  const bool ok = cert.stationarity_residual <= opts.tol_stat &&
                  cert.balance_residual <= opts.tol_bal && cert.q_min > 0;
  cert.verdict = ok ? Verdict::kPass : Verdict::kFail;
  return cert;
}

const char* two_neuron_class_name(TwoNeuronClass c) {
  switch (c) {
    case TwoNeuronClass::kFull: return "full";
    case TwoNeuronClass::kPosOnly: return "pos_only";
    case TwoNeuronClass::kNegOnly: return "neg_only";
    case TwoNeuronClass::kNone: return "none";
  }
  return "unknown";
}

TwoNeuronMatch two_neuron_kkt_classify(const NetParams<double>& theta,
                                       const Dataset<double>& data,
                                       double tol) {
  check_dims(theta, data.d());
  if (theta.m() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "expected m = 2");
  }
  if (theta.a(0) < 0 || theta.a(1) > 0) {
    throw Error(ErrorCode::kInvalidArgument, "expected a_1 >= 0 >= a_2");
  }
  if (!is_symmetric(data)) {
    throw Error(ErrorCode::kNotSymmetric, "classification needs symmetric data");
  }
  const double nrm = theta.norm();
  if (!(nrm > 0)) throw Error(ErrorCode::kZeroVector, "theta is zero");
  const Eigen::VectorXd w = max_margin_separator(data).w_star;
  const Index d = data.d();
  const Eigen::VectorXd u = theta.flat() / nrm;

  auto canonical = [&](double c1, double c2, double a1, double a2) {
    NetParams<double> c = NetParams<double>::Zero(2, d, theta.alpha);
    c.W.row(0) = c1 * w.transpose();
    c.W.row(1) = c2 * w.transpose();
    c.a << a1, a2;
    return c.flat();
  };
  const double h = 0.5;
  const double s = 1 / std::sqrt(2.0);
  TwoNeuronMatch out;
  out.distance_full = (u - canonical(h, -h, h, -h)).norm();
  out.distance_pos_only = (u - canonical(s, 0, s, 0)).norm();
  out.distance_neg_only = (u - canonical(0, -s, 0, -s)).norm();
  out.distance = out.distance_full;
  TwoNeuronClass best = TwoNeuronClass::kFull;
  if (out.distance_pos_only < out.distance) {
    out.distance = out.distance_pos_only;
    best = TwoNeuronClass::kPosOnly;
  }
  if (out.distance_neg_only < out.distance) {
    out.distance = out.distance_neg_only;
    best = TwoNeuronClass::kNegOnly;
  }
  out.label = out.distance <= tol ? best : TwoNeuronClass::kNone;
  return out;
}

GlobalMaxMargin symmetric_global_max_margin(
    const Dataset<double>& data, double alpha, Index m,
    const std::optional<EmbeddingVector>& b) {
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "need m >= 2");
  if (!is_symmetric(data)) {
    throw Error(ErrorCode::kNotSymmetric, "needs symmetric data");
  }
  const SeparatorSolution sep = max_margin_separator(data);
  EmbeddingVector e;
  if (b) {
    e = *b;
    if (e.b.size() != m) {
      throw Error(ErrorCode::kDimensionMismatch, "b must have m entries");
    }
  } else {
    Eigen::VectorXd v(m);
    for (Index k = 0; k < m; ++k) v(k) = k % 2 == 0 ? 1 : -1;
    e = make_embedding_vector(v);
  }
  if (!e.good) {
    throw Error(ErrorCode::kIncompatibleEmbedding, "b is not good");
  }
  NetParams<double> hat = NetParams<double>::Zero(2, data.d(), alpha);
  hat.W.row(0) = 0.5 * sep.w_star.transpose();
  hat.W.row(1) = -0.5 * sep.w_star.transpose();
  hat.a << 0.5, -0.5;
  GlobalMaxMargin g;
  g.theta = embed(hat, e);
  g.gamma = normalized_margin(g.theta, data);
  g.w_star = sep.w_star;
  g.gamma_star = sep.gamma_star;
  return g;
}

NetParams<double> kink_example_params(double alpha) {
  const double beta = kink_example_beta(alpha);
  const double cb = std::cos(beta);
  const double sb = std::sin(beta);
  const double a1 = 1 / std::sqrt(2 * (1 + alpha) * cb);
  const double a3 = 1 / std::sqrt(1 + alpha);
  NetParams<double> t = NetParams<double>::Zero(3, 2, alpha);
  t.W.row(0) << a1 * cb, a1 * sb;
  t.W.row(1) << a1 * cb, -a1 * sb;
  t.W.row(2) << -a3, 0;
  t.a << a1, a1, -a3;
  return t.scaled(1 / t.norm());
}

double OrthosepPrediction::operator()(const Eigen::VectorXd& x) const {
  double f = std::max(0.0, w_pos.dot(x));
  if (w_neg) f -= std::max(0.0, w_neg->dot(x));
  return f;
}

namespace {

// min |w|^2 subject to <w, x_i> >= 1 over the rows of X.
Eigen::VectorXd min_norm_feasible(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());
  const SeparatorSolution s = max_margin_separator(X, ones);
  return s.w_star / s.gamma_star;
}

Eigen::MatrixXd rows_with_label(const Dataset<double>& data, double label) {
  Index count = 0;
  for (Index i = 0; i < data.n(); ++i) count += data.y(i) == label;
  Eigen::MatrixXd X(count, data.d());
  Index r = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (data.y(i) == label) X.row(r++) = data.X.row(i);
  }
  return X;
}

}  // namespace

OrthosepPrediction orthosep_predicted_function(const Dataset<double>& data) {
  if (!is_orthogonally_separable(data)) {
    throw Error(ErrorCode::kNotOrthogonallySeparable,
                "data is not orthogonally separable");
  }
  const Eigen::MatrixXd Xp = rows_with_label(data, 1);
  const Eigen::MatrixXd Xn = rows_with_label(data, -1);
  if (Xp.rows() == 0) {
    throw Error(ErrorCode::kInvalidDataset, "no positive samples");
  }
  OrthosepPrediction p;
  p.w_pos = min_norm_feasible(Xp);
  double total = p.w_pos.norm();
  if (Xn.rows() > 0) {
    p.w_neg = min_norm_feasible(Xn);
    total += p.w_neg->norm();
  }
  p.gamma = 1 / (2 * total);
  const Index m = p.w_neg ? 2 : 1;
  NetParams<double> t = NetParams<double>::Zero(m, data.d(), 0.0);
  const double sp = std::sqrt(p.w_pos.norm());
  t.W.row(0) = p.w_pos.transpose() / sp;
  t.a(0) = sp;
  if (p.w_neg) {
    const double sn = std::sqrt(p.w_neg->norm());
    t.W.row(1) = p.w_neg->transpose() / sn;
    t.a(1) = -sn;
  }
  p.theta = t.scaled(1 / t.norm());
  return p;
}

NetParams<double> one_neuron_direction(const Dataset<double>& data,
                                       double alpha) {
  const TiltedData td = tilt(data, alpha);
  if (!td.plus) {
    throw Error(ErrorCode::kNotSeparable, "tilted positive set not separable");
  }
  NetParams<double> t = NetParams<double>::Zero(1, data.d(), alpha);
  const double s = 1 / std::sqrt(2.0);
  t.W.row(0) = s * td.plus->w_star.transpose();
  t.a(0) = s;
  return t;
}

ComparatorNet hinted_comparator(const Dataset<double>& data, double alpha,
                                const Eigen::VectorXd& w_star,
                                const Eigen::VectorXd& w_perp) {
  auto build = [&](double beta, double rho) {
    NetParams<double> t = NetParams<double>::Zero(3, data.d(), alpha);
    const Eigen::VectorXd u1 = std::cos(beta) * w_star + std::sin(beta) * w_perp;
    const Eigen::VectorXd u2 = std::cos(beta) * w_star - std::sin(beta) * w_perp;
    t.W.row(0) = u1.transpose();
    t.W.row(1) = u2.transpose();
    t.W.row(2) = -rho * w_star.transpose();
    t.a << 1, 1, -rho;
    return t.scaled(1 / t.norm());
  };
  ComparatorNet best;
  best.gamma = -INFINITY;
  auto consider = [&](double beta, double rho) {
    const NetParams<double> t = build(beta, rho);
    const double g = margins(t, data).minCoeff();  // unit norm
    if (g > best.gamma) {
      best.gamma = g;
      best.theta = t;
      best.beta = beta;
      best.negative_weight = rho;
    }
  };
  const double half_pi = std::numbers::pi / 2;
  for (int i = 0; i < 180; ++i) {
    for (int j = 0; j <= 40; ++j) consider(half_pi * i / 180, 0.05 * j);
  }
  // Local refinement around the coarse optimum.
  for (int pass = 0; pass < 3; ++pass) {
    const double db = half_pi / 180 / std::pow(10.0, pass);
    const double dr = 0.05 / std::pow(10.0, pass);
    const double b0 = best.beta;
    const double r0 = best.negative_weight;
    for (int i = -10; i <= 10; ++i) {
      for (int j = -10; j <= 10; ++j) {
        const double b = std::clamp(b0 + db * i, 0.0, half_pi);
        const double r = std::max(0.0, r0 + dr * j);
        consider(b, r);
      }
    }
  }
  return best;
}

}  // namespace marginlab
