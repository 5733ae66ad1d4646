#pragma once

// Two-layer Leaky-ReLU network f(x) = sum_k a_k phi(w_k . x) with logistic
// loss, margins and a fixed Clarke-subgradient selection. Everything here is
// templated on the scalar type so that oracles can run in extended precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "marginlab/error.hpp"

namespace marginlab {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::Index;

enum class RescaleMode {
  kIfNeeded,   // divide by max norm only when it exceeds 1
  kUnitMax,    // always divide by max norm
  kNone,
};

template <typename Scalar>
struct Dataset {
  Mat<Scalar> X;  // n x d, row i is x_i
  Vec<Scalar> y;  // labels in {+1, -1}
  Scalar scale = 1;        // factor already applied to the raw points
  std::string provenance;  // JSON text, empty when unknown

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }
  Vec<Scalar> x(Index i) const { return X.row(i).transpose(); }

  template <typename Other>
  Dataset<Other> cast() const {
    Dataset<Other> out;
    out.X = X.template cast<Other>();
    out.y = y.template cast<Other>();
    out.scale = static_cast<Other>(scale);
    out.provenance = provenance;
    return out;
  }
};

// Validates labels and finiteness, then applies the requested rescaling so
// that every point lies in the closed unit ball.
template <typename Scalar>
Dataset<Scalar> make_dataset(Mat<Scalar> X, Vec<Scalar> y,
                             RescaleMode mode = RescaleMode::kIfNeeded) {
  if (X.rows() < 1 || X.cols() < 1) {
    throw Error(ErrorCode::kInvalidDataset, "need n >= 1 and d >= 1");
  }
  if (y.size() != X.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "label count differs from n");
  }
  if (!X.allFinite()) {
    throw Error(ErrorCode::kInvalidDataset, "non-finite coordinate");
  }
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != Scalar(1) && y(i) != Scalar(-1)) {
      throw Error(ErrorCode::kInvalidDataset,
                  "label at row " + std::to_string(i) + " is not +1/-1");
    }
  }
  Dataset<Scalar> data;
  const Scalar max_norm = X.rowwise().norm().maxCoeff();
  Scalar scale = 1;
  if (mode == RescaleMode::kUnitMax && max_norm > 0) {
    scale = Scalar(1) / max_norm;
  } else if (mode == RescaleMode::kIfNeeded && max_norm > 1) {
    scale = Scalar(1) / max_norm;
  }
  data.X = X * scale;
  data.y = std::move(y);
  data.scale = scale;
  return data;
}

template <typename Scalar>
struct NetParams {
  Mat<Scalar> W;  // m x d, row k is w_k
  Vec<Scalar> a;  // m
  Scalar alpha = Scalar(0.5);

  NetParams() = default;
  NetParams(Mat<Scalar> w, Vec<Scalar> a_in, Scalar alpha_in)
      : W(std::move(w)), a(std::move(a_in)), alpha(alpha_in) {
    if (W.rows() != a.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "W rows differ from a size");
    }
  }
  static NetParams Zero(Index m, Index d, Scalar alpha) {
    return NetParams(Mat<Scalar>::Zero(m, d), Vec<Scalar>::Zero(m), alpha);
  }

  Index m() const { return W.rows(); }
  Index d() const { return W.cols(); }
  Index dim() const { return W.size() + a.size(); }

  Scalar squared_norm() const { return W.squaredNorm() + a.squaredNorm(); }
  Scalar norm() const { return std::sqrt(squared_norm()); }

  // Flat layout (w_1, ..., w_m, a_1, ..., a_m).
  Vec<Scalar> flat() const {
    Vec<Scalar> v(dim());
    for (Index k = 0; k < m(); ++k) v.segment(k * d(), d()) = W.row(k);
    v.tail(m()) = a;
    return v;
  }
  static NetParams from_flat(const Vec<Scalar>& v, Index m, Index d,
                             Scalar alpha) {
    if (v.size() != m * d + m) {
      throw Error(ErrorCode::kDimensionMismatch, "flat size is not m*d + m");
    }
    NetParams p = Zero(m, d, alpha);
    for (Index k = 0; k < m; ++k) p.W.row(k) = v.segment(k * d, d);
    p.a = v.tail(m);
    return p;
  }

  NetParams scaled(Scalar c) const { return NetParams(W * c, a * c, alpha); }

  template <typename Other>
  NetParams<Other> cast() const {
    return NetParams<Other>(W.template cast<Other>(), a.template cast<Other>(),
                            static_cast<Other>(alpha));
  }
};

template <typename Scalar>
Scalar leaky_relu(Scalar z, Scalar alpha) {
  return z > 0 ? z : alpha * z;
}

// Clarke selection: the derivative at the kink is taken to be alpha.
template <typename Scalar>
Scalar leaky_relu_slope(Scalar z, Scalar alpha) {
  return z > 0 ? Scalar(1) : alpha;
}

template <typename Scalar>
void check_dims(const NetParams<Scalar>& theta, Index d) {
  if (theta.d() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "network expects d=" + std::to_string(theta.d()) + ", got " +
                    std::to_string(d));
  }
}

template <typename Scalar>
Scalar forward(const NetParams<Scalar>& theta, const Vec<Scalar>& x) {
  check_dims(theta, x.size());
  const Vec<Scalar> z = theta.W * x;
  Scalar f = 0;
  for (Index k = 0; k < theta.m(); ++k) {
    f += theta.a(k) * leaky_relu(z(k), theta.alpha);
  }
  return f;
}

// Outputs on every row of X.
template <typename Scalar>
Vec<Scalar> forward_batch(const NetParams<Scalar>& theta,
                          const Mat<Scalar>& X) {
  check_dims(theta, X.cols());
  Mat<Scalar> Z = X * theta.W.transpose();  // n x m
  const Scalar alpha = theta.alpha;
  Z = Z.unaryExpr([alpha](Scalar z) { return leaky_relu(z, alpha); });
  return Z * theta.a;
}

template <typename Scalar>
Vec<Scalar> margins(const NetParams<Scalar>& theta,
                    const Dataset<Scalar>& data) {
  return data.y.cwiseProduct(forward_batch(theta, data.X));
}

template <typename Scalar>
struct MarginReport {
  Vec<Scalar> q;
  Scalar q_min = 0;
  std::optional<Scalar> gamma;  // empty when theta = 0
  Scalar theta_norm = 0;
};

template <typename Scalar>
MarginReport<Scalar> margin_report(const NetParams<Scalar>& theta,
                                   const Dataset<Scalar>& data) {
  MarginReport<Scalar> r;
  r.q = margins(theta, data);
  r.q_min = r.q.minCoeff();
  r.theta_norm = theta.norm();
  if (r.theta_norm > 0) r.gamma = r.q_min / (r.theta_norm * r.theta_norm);
  return r;
}

// Normalized margin; throws when theta = 0.
template <typename Scalar>
Scalar normalized_margin(const NetParams<Scalar>& theta,
                         const Dataset<Scalar>& data) {
  const auto r = margin_report(theta, data);
  if (!r.gamma) {
    throw Error(ErrorCode::kUndefinedMargin, "theta is zero");
  }
  return *r.gamma;
}

// ---- scalar loss helpers ---------------------------------------------------

// log(1 + e^z) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (z > 0 ? z : Scalar(0)) + log1p(exp(-abs(z)));
}

// l(q) = ln(1 + e^{-q}).
template <typename Scalar>
Scalar logistic_loss(Scalar q) {
  return softplus(-q);
}

// log l(q), accurate when l(q) underflows.
template <typename Scalar>
Scalar log_logistic_loss(Scalar q) {
  using std::exp;
  using std::log;
  using std::log1p;
  if (q > Scalar(30)) {
    const Scalar e = exp(-q);
    // log(log1p(e)) = log e + log(1 - e/2 + e^2/3 - ...)
    return -q + log1p(-e / 2 + e * e / 3);
  }
  return log(softplus(-q));
}

// l'(q) = -1 / (1 + e^q).
template <typename Scalar>
Scalar logistic_loss_derivative(Scalar q) {
  using std::exp;
  if (q > 0) {
    const Scalar e = exp(-q);
    return -e / (1 + e);
  }
  return Scalar(-1) / (1 + exp(q));
}

// log(-l'(q)) = -softplus(q).
template <typename Scalar>
Scalar log_neg_loss_derivative(Scalar q) {
  return -softplus(q);
}

template <typename Scalar>
Scalar log_sum_exp(const Vec<Scalar>& v) {
  using std::exp;
  using std::log;
  const Scalar mx = v.maxCoeff();
  if (!std::isfinite(static_cast<double>(mx))) return mx;
  Scalar s = 0;
  for (Index i = 0; i < v.size(); ++i) s += exp(v(i) - mx);
  return mx + log(s);
}

// ---- loss -----------------------------------------------------------------

template <typename Scalar>
Scalar loss_from_margins(const Vec<Scalar>& q) {
  Scalar s = 0;
  for (Index i = 0; i < q.size(); ++i) s += logistic_loss(q(i));
  return s / static_cast<Scalar>(q.size());
}

// log L from margins; finite even when L underflows.
template <typename Scalar>
Scalar log_loss_from_margins(const Vec<Scalar>& q) {
  using std::log;
  Vec<Scalar> l(q.size());
  for (Index i = 0; i < q.size(); ++i) l(i) = log_logistic_loss(q(i));
  return log_sum_exp(l) - log(static_cast<Scalar>(q.size()));
}

template <typename Scalar>
Scalar loss(const NetParams<Scalar>& theta, const Dataset<Scalar>& data) {
  return loss_from_margins(margins(theta, data));
}

template <typename Scalar>
Scalar log_loss(const NetParams<Scalar>& theta, const Dataset<Scalar>& data) {
  return log_loss_from_margins(margins(theta, data));
}

// ---- gradients ------------------------------------------------------------

template <typename Scalar>
struct GradSelection {
  Mat<Scalar> dW;
  Vec<Scalar> da;
  Index kink_count = 0;

  Vec<Scalar> flat() const {
    Vec<Scalar> v(dW.size() + da.size());
    const Index d = dW.cols();
    for (Index k = 0; k < dW.rows(); ++k) v.segment(k * d, d) = dW.row(k);
    v.tail(da.size()) = da;
    return v;
  }
  Scalar norm() const {
    using std::sqrt;
    return sqrt(dW.squaredNorm() + da.squaredNorm());
  }
};

// sum_i c_i * grad_theta q_i(theta) under the alpha-at-kink selection.
template <typename Scalar>
GradSelection<Scalar> margin_gradient_combination(
    const NetParams<Scalar>& theta, const Dataset<Scalar>& data,
    const Vec<Scalar>& c) {
  check_dims(theta, data.d());
  const Scalar alpha = theta.alpha;
  const Mat<Scalar> Z = data.X * theta.W.transpose();  // n x m
  GradSelection<Scalar> g;
  g.kink_count = (Z.array() == Scalar(0)).count();
  const Vec<Scalar> cy = c.cwiseProduct(data.y);
  const Mat<Scalar> Phi =
      Z.unaryExpr([alpha](Scalar z) { return leaky_relu(z, alpha); });
  const Mat<Scalar> Slope =
      Z.unaryExpr([alpha](Scalar z) { return leaky_relu_slope(z, alpha); });
  g.da = Phi.transpose() * cy;
  // dW_k = a_k sum_i cy_i phi'(z_ik) x_i
  g.dW = (Slope.array().colwise() * cy.array()).matrix().transpose() * data.X;
  g.dW.array().colwise() *= theta.a.array();
  return g;
}

template <typename Scalar>
GradSelection<Scalar> grad_select(const NetParams<Scalar>& theta,
                                  const Dataset<Scalar>& data) {
  const Vec<Scalar> q = margins(theta, data);
  Vec<Scalar> c(q.size());
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(q.size());
  for (Index i = 0; i < q.size(); ++i) {
    c(i) = logistic_loss_derivative(q(i)) * inv_n;
  }
  return margin_gradient_combination(theta, data, c);
}

// Gradient of the single margin q_i.
template <typename Scalar>
GradSelection<Scalar> margin_gradient(const NetParams<Scalar>& theta,
                                      const Dataset<Scalar>& data, Index i) {
  Vec<Scalar> c = Vec<Scalar>::Zero(data.n());
  c(i) = 1;
  return margin_gradient_combination(theta, data, c);
}

// ---- norms and diagnostics --------------------------------------------------

template <typename Scalar>
Scalar m_norm(const NetParams<Scalar>& theta) {
  Scalar best = 0;
  for (Index k = 0; k < theta.m(); ++k) {
    best = std::max(best, theta.W.row(k).norm());
    best = std::max(best, static_cast<Scalar>(std::abs(theta.a(k))));
  }
  return best;
}

template <typename Scalar>
Scalar max_balance_residual(const NetParams<Scalar>& theta) {
  Scalar worst = 0;
  for (Index k = 0; k < theta.m(); ++k) {
    const Scalar r = theta.W.row(k).squaredNorm() - theta.a(k) * theta.a(k);
    worst = std::max(worst, static_cast<Scalar>(std::abs(r)));
  }
  return worst;
}

// l^{-1}(v) = -ln(e^v - 1) given log v.
template <typename Scalar>
Scalar inverse_logistic_loss_from_log(Scalar log_v) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  if (log_v < Scalar(-20)) {
    const Scalar v = exp(log_v);
    // -ln(v (1 + v/2 + v^2/6)) with v tiny
    return -log_v - log1p(v / 2 + v * v / 6);
  }
  return -log(expm1(exp(log_v)));
}

template <typename Scalar>
struct SmoothedMargin {
  Scalar value = 0;
  bool interpolating = false;  // n L < ln 2, i.e. value > 0
  bool underflow = false;      // n L below the smallest representable level
};

template <typename Scalar>
SmoothedMargin<Scalar> smoothed_margin_from_margins(const Vec<Scalar>& q,
                                                    Scalar theta_sq_norm) {
  using std::log;
  if (theta_sq_norm <= 0) {
    throw Error(ErrorCode::kUndefinedMargin, "theta is zero");
  }
  SmoothedMargin<Scalar> s;
  const Scalar log_nl =
      log_loss_from_margins(q) + log(static_cast<Scalar>(q.size()));
  if (!std::isfinite(static_cast<double>(log_nl))) {
    s.underflow = true;
    s.interpolating = true;
    s.value = std::numeric_limits<Scalar>::infinity();
    return s;
  }
  s.interpolating = log_nl < log(log(Scalar(2)));
  s.value = inverse_logistic_loss_from_log(log_nl) / theta_sq_norm;
  return s;
}

template <typename Scalar>
SmoothedMargin<Scalar> smoothed_margin(const NetParams<Scalar>& theta,
                                       const Dataset<Scalar>& data) {
  return smoothed_margin_from_margins(margins(theta, data),
                                      theta.squared_norm());
}

// Cosine between -grad and theta.
template <typename Scalar>
Scalar alignment_cosine(const NetParams<Scalar>& theta,
                        const GradSelection<Scalar>& grad) {
  const Scalar tn = theta.norm();
  const Scalar gn = grad.norm();
  if (tn == 0 || gn == 0) {
    throw Error(ErrorCode::kZeroVector, "alignment cosine of a zero vector");
  }
  const Scalar dot =
      (theta.W.array() * grad.dW.array()).sum() + theta.a.dot(grad.da);
  Scalar c = -dot / (tn * gn);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

}  // namespace marginlab
