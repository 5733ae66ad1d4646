#include "marginlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace marginlab {
namespace {

// Rows z_i = y_i x_i.
Eigen::MatrixXd signed_points(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
  return y.asDiagonal() * X;
}

// Affine minimum-norm point over the rows of Z indexed by `active`.
// Returns false when the KKT system is degenerate or the weights leave the
// simplex.
bool affine_polish(const Eigen::MatrixXd& Z, const std::vector<Index>& active,
                   Eigen::VectorXd* p) {
  const Index s = static_cast<Index>(active.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(s + 1, s + 1);
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) {
      K(a, b) = Z.row(active[a]).dot(Z.row(active[b]));
    }
    K(a, s) = 1;
    K(s, a) = 1;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  rhs(s) = 1;
  const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
  if (!sol.allFinite()) return false;
  if ((K * sol - rhs).norm() > 1e-10 * (1 + K.norm())) return false;
  for (Index a = 0; a < s; ++a) {
    if (sol(a) < 0) return false;
  }
  p->setZero();
  for (Index a = 0; a < s; ++a) (*p)(active[a]) = sol(a);
  *p /= p->sum();
  return true;
}

}  // namespace

// The hard-margin direction is the minimum-norm point u of conv{y_i x_i}:
// w* = u/||u|| and gamma* = ||u|| whenever u != 0. It is found by pairwise
// mass transfer on the simplex weights (Mitchell-Demyanov-Malozemov steps)
// with periodic exact solves on the active face.
SeparatorSolution max_margin_separator(const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y,
                                       const SeparatorOptions& opts) {
  const Index n = X.rows();
  if (n == 0 || y.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "empty or mismatched data");
  }
  const Eigen::MatrixXd Z = signed_points(X, y);
  for (Index i = 0; i < n; ++i) {
    if (Z.row(i).norm() == 0) {
      throw Error(ErrorCode::kNotSeparable, "a sample sits at the origin");
    }
  }

  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  {
    Index start = 0;
    Z.rowwise().squaredNorm().minCoeff(&start);
    p(start) = 1;
  }
  Eigen::VectorXd u = Z.transpose() * p;
  Eigen::VectorXd g = Z * u;

  auto gap_of = [&](const Eigen::VectorXd& gv, const Eigen::VectorXd& uv) {
    const double uu = uv.squaredNorm();
    return (uu - gv.minCoeff()) / std::max(uu, 1e-300);
  };

  int it = 0;
  double gap = gap_of(g, u);
  for (; it < opts.max_sweeps; ++it) {
    if (gap <= opts.kkt_tol) break;
    if (u.norm() <= opts.separable_floor) break;

    if (it % 25 == 24) {
      std::vector<Index> active;
      for (Index i = 0; i < n; ++i) {
        if (p(i) > 0) active.push_back(i);
      }
      Eigen::VectorXd cand = p;
      if (affine_polish(Z, active, &cand)) {
        const Eigen::VectorXd uc = Z.transpose() * cand;
        if (uc.squaredNorm() <= u.squaredNorm()) {
          p = cand;
          u = uc;
          g = Z * u;
          gap = gap_of(g, u);
          if (gap <= opts.kkt_tol) break;
        }
      }
    }

    Index i_min = 0;
    g.minCoeff(&i_min);
    Index j_max = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (p(j) > 0 && g(j) > g_max) {
        g_max = g(j);
        j_max = j;
      }
    }
    if (j_max < 0 || j_max == i_min) {
      // All mass on the most violated point yet gap is open: add mass to it
      // by a Frank-Wolfe step toward i_min.
      const Eigen::VectorXd delta = Z.row(i_min).transpose() - u;
      const double dd = delta.squaredNorm();
      if (dd == 0) break;
      const double t = std::clamp(-u.dot(delta) / dd, 0.0, 1.0);
      p *= (1 - t);
      p(i_min) += t;
    } else {
      const Eigen::VectorXd delta =
          Z.row(i_min).transpose() - Z.row(j_max).transpose();
      const double dd = delta.squaredNorm();
      if (dd == 0) break;
      const double t = std::clamp((g(j_max) - g(i_min)) / dd, 0.0, p(j_max));
      p(j_max) -= t;
      p(i_min) += t;
      if (p(j_max) < 1e-300) p(j_max) = 0;
    }
    u = Z.transpose() * p;
    g = Z * u;
    gap = gap_of(g, u);
  }

  const double u_norm = u.norm();
  if (u_norm <= opts.separable_floor) {
    throw Error(ErrorCode::kNotSeparable,
                "minimum-norm point of the signed hull is at the origin");
  }
  SeparatorSolution sol;
  sol.w_star = u / u_norm;
  const Eigen::VectorXd margins_vec = Z * sol.w_star;
  sol.gamma_star = margins_vec.minCoeff();
  if (sol.gamma_star <= opts.separable_floor) {
    throw Error(ErrorCode::kNotSeparable,
                "best linear margin " + std::to_string(sol.gamma_star));
  }
  sol.duals = p / (u_norm * u_norm);
  sol.kkt_residual = gap;
  sol.sweeps = it;
  const double cut = sol.gamma_star * (1 + opts.support_rel_tol);
  for (Index i = 0; i < n; ++i) {
    if (margins_vec(i) <= cut) sol.support.push_back(i);
  }
  return sol;
}

SeparatorSolution max_margin_separator(const Dataset<double>& data,
                                       const SeparatorOptions& opts) {
  return max_margin_separator(data.X, data.y, opts);
}

double linear_margin(const Eigen::VectorXd& w, const Dataset<double>& data) {
  const double nw = w.norm();
  if (nw == 0) throw Error(ErrorCode::kZeroVector, "linear margin of zero");
  return (data.y.asDiagonal() * data.X * (w / nw)).minCoeff();
}

Eigen::VectorXd mean_vector(const Dataset<double>& data) {
  return data.X.transpose() * data.y / static_cast<double>(data.n());
}

TiltedData tilt(const Dataset<double>& data, double alpha) {
  if (!(alpha > 0 && alpha < 1)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0,1)");
  }
  TiltedData t;
  const Index n = data.n();
  t.x_plus = data.X;
  t.x_minus = data.X;
  for (Index i = 0; i < n; ++i) {
    if (data.y(i) > 0) {
      t.x_minus.row(i) *= alpha;
    } else {
      t.x_plus.row(i) *= alpha;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  t.mu = mean_vector(data);
  t.mu_plus = t.x_plus.transpose() * data.y * inv_n;
  t.mu_minus = t.x_minus.transpose() * data.y * inv_n;
  const double np = t.mu_plus.norm();
  t.kappa = np > 0 ? 1 - t.mu_minus.norm() / np : 0;
  try {
    t.plus = max_margin_separator(t.x_plus, data.y);
  } catch (const Error&) {
  }
  try {
    t.minus = max_margin_separator(t.x_minus, data.y);
  } catch (const Error&) {
  }
  return t;
}

bool cone_membership(const Eigen::VectorXd& w, const Dataset<double>& data,
                     double delta) {
  const double nw = w.norm();
  if (nw == 0) throw Error(ErrorCode::kZeroVector, "cone membership of zero");
  const Eigen::VectorXd s = data.y.asDiagonal() * data.X * (w / nw);
  return s.minCoeff() >= delta;
}

std::vector<Index> symmetric_pairing(const Dataset<double>& data, double tol) {
  const Index n = data.n();
  std::vector<Index> pair(n, -1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (data.y(j) != -data.y(i)) continue;
      if ((data.X.row(i) + data.X.row(j)).norm() <= tol) {
        pair[i] = j;
        break;
      }
    }
    if (pair[i] < 0) return {};
  }
  return pair;
}

bool is_symmetric(const Dataset<double>& data, double tol) {
  return !symmetric_pairing(data, tol).empty();
}

namespace {

PrincipalDirection evaluate_principal(const std::string& name,
                                      const Eigen::VectorXd& w_in,
                                      const Dataset<double>& data,
                                      const Eigen::VectorXd& mu,
                                      double alpha) {
  PrincipalDirection pd;
  pd.candidate = name;
  pd.w = w_in / w_in.norm();
  const Index n = data.n();
  pd.gamma = (data.y.asDiagonal() * data.X * pd.w).minCoeff();
  const Eigen::MatrixXd P =
      Eigen::MatrixXd::Identity(pd.w.size(), pd.w.size()) -
      pd.w * pd.w.transpose();
  const Eigen::VectorXd perp = (data.X * P).rowwise().norm();
  const double mu_w = mu.dot(pd.w);
  const double inf = std::numeric_limits<double>::infinity();
  pd.lhs = mu_w > 0 ? (perp.sum() / static_cast<double>(n)) / (alpha * mu_w)
                    : inf;
  const double max_perp = perp.maxCoeff();
  pd.rhs = max_perp > 0 ? pd.gamma / max_perp : inf;
  if (pd.gamma <= 0) pd.rhs = -inf;
  pd.slack = pd.rhs - pd.lhs;
  return pd;
}

}  // namespace

AssumptionReport check_assumptions(const Dataset<double>& data, double alpha) {
  AssumptionReport rep;
  const Index n = data.n();
  try {
    rep.separator = max_margin_separator(data);
    rep.linearly_separable = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotSeparable) throw;
  }
  rep.pairing = symmetric_pairing(data);
  rep.symmetric = !rep.pairing.empty();

  const Eigen::VectorXd mu = mean_vector(data);
  const Eigen::VectorXd mu_x = data.X * mu;
  rep.mu_dot_x_nonzero =
      (mu_x.array().abs() > 1e-12 * std::max(mu.norm(), 1e-300)).all();

  const Eigen::MatrixXd Z = data.y.asDiagonal() * data.X;
  const Eigen::MatrixXd gram = Z * Z.transpose();
  const Eigen::VectorXd mu_z = Z * mu;
  rep.cone_condition_per_sample.resize(n);
  rep.cone_condition = true;
  const double coef = (1 - alpha) / (static_cast<double>(n) * alpha);
  for (Index i = 0; i < n; ++i) {
    double s = 0;
    for (Index j = 0; j < n; ++j) s += std::max(-gram(i, j), 0.0);
    const bool ok = mu_z(i) > coef * s;
    rep.cone_condition_per_sample[i] = ok;
    rep.cone_condition = rep.cone_condition && ok;
  }

  const TiltedData t = tilt(data, alpha);
  rep.mu_plus_norm = t.mu_plus.norm();
  rep.mu_minus_norm = t.mu_minus.norm();
  rep.mu_plus_greater =
      rep.mu_plus_norm > rep.mu_minus_norm * (1 + 1e-12) + 1e-300;

  std::vector<std::pair<std::string, Eigen::VectorXd>> candidates;
  if (rep.separator) candidates.emplace_back("w_star", rep.separator->w_star);
  if (mu.norm() > 0) candidates.emplace_back("mu", mu / mu.norm());
  if (t.plus) candidates.emplace_back("w_plus", t.plus->w_star);
  for (const auto& [name, w] : candidates) {
    PrincipalDirection pd = evaluate_principal(name, w, data, mu, alpha);
    rep.principal_candidates.push_back(pd);
    if (!rep.principal_direction && pd.gamma > 0 && pd.slack > 0) {
      rep.principal_direction = pd;
    }
  }

  if (t.plus) {
    rep.support_labels_positive = true;
    for (Index i : t.plus->support) {
      if (data.y(i) < 0) rep.support_labels_positive = false;
    }
  }
  return rep;
}

namespace {

// sup over the unit sphere of -1/2 sum_i lambda_i y_i phi(u . x_i).
double inner_sup(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& lambda, double alpha,
                 const std::vector<Eigen::VectorXd>& starts, int iters,
                 Eigen::VectorXd* best_u) {
  const Eigen::VectorXd c = -0.5 * lambda.cwiseProduct(y);
  auto value = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd z = X * u;
    double v = 0;
    for (Index i = 0; i < z.size(); ++i) v += c(i) * leaky_relu(z(i), alpha);
    return v;
  };
  double best = -std::numeric_limits<double>::infinity();
  for (const Eigen::VectorXd& s : starts) {
    Eigen::VectorXd u = s / s.norm();
    double step = 0.5;
    double cur = value(u);
    for (int t = 0; t < iters; ++t) {
      const Eigen::VectorXd z = X * u;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(u.size());
      for (Index i = 0; i < z.size(); ++i) {
        grad += c(i) * leaky_relu_slope(z(i), alpha) * X.row(i).transpose();
      }
      // Riemannian ascent on the sphere.
      grad -= grad.dot(u) * u;
      if (grad.norm() < 1e-14) break;
      Eigen::VectorXd cand = u + step * grad;
      cand /= cand.norm();
      const double v = value(cand);
      if (v >= cur) {
        u = cand;
        cur = v;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    if (cur > best) {
      best = cur;
      *best_u = u;
    }
  }
  return best;
}

}  // namespace

A4Report assumption_A4_lemma_check(const Dataset<double>& data, double alpha,
                                   const A4Options& opts) {
  A4Report rep;
  const TiltedData t = tilt(data, alpha);
  if (!t.plus) {
    throw Error(ErrorCode::kNotSeparable, "tilted data is not separable");
  }
  rep.gamma_plus = t.plus->gamma_star;
  rep.support_plus = t.plus->support;
  rep.shortcut = true;
  for (Index i : rep.support_plus) {
    if (data.y(i) < 0) rep.shortcut = false;
  }
  if (rep.shortcut) {
    // Negative-head neurons see positive support points only through the
    // alpha branch, which caps their margin at alpha * gamma+ / 2.
    rep.bound = alpha * rep.gamma_plus / 2;
    rep.holds = rep.bound < rep.gamma_plus / 2;
    return rep;
  }

  rep.heuristic = true;
  const Index s = static_cast<Index>(rep.support_plus.size());
  const Index d = data.d();
  Eigen::MatrixXd Xs(s, d);
  Eigen::VectorXd ys(s);
  for (Index a = 0; a < s; ++a) {
    Xs.row(a) = data.X.row(rep.support_plus[a]);
    ys(a) = data.y(rep.support_plus[a]);
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> starts;
  for (int k = 0; k < opts.probes; ++k) {
    Eigen::VectorXd u(d);
    for (Index j = 0; j < d; ++j) u(j) = normal(rng);
    starts.push_back(u);
  }
  for (Index a = 0; a < s; ++a) starts.push_back(-ys(a) * Xs.row(a).transpose());

  Eigen::VectorXd lambda = Eigen::VectorXd::Constant(s, 1.0 / s);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u_best(d);
  for (int it = 0; it < opts.outer_iters; ++it) {
    const double h =
        inner_sup(Xs, ys, lambda, alpha, starts, opts.inner_iters, &u_best);
    best = std::min(best, h);
    starts.resize(std::min<std::size_t>(starts.size(), opts.probes + s));
    starts.push_back(u_best);
    // Exponentiated-gradient step on the simplex.
    const Eigen::VectorXd z = Xs * u_best;
    Eigen::VectorXd sub(s);
    for (Index a = 0; a < s; ++a) sub(a) = -0.5 * ys(a) * leaky_relu(z(a), alpha);
    const double eta = 1.0 / std::sqrt(static_cast<double>(it + 1));
    for (Index a = 0; a < s; ++a) lambda(a) *= std::exp(-eta * sub(a));
    lambda /= lambda.sum();
  }
  rep.bound = best;
  rep.holds = rep.bound < rep.gamma_plus / 2;
  return rep;
}

}  // namespace marginlab
