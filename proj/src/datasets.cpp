#include "marginlab/datasets.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "marginlab/dynamics.hpp"
#include "marginlab/geometry.hpp"

namespace marginlab {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Dataset<double> with_provenance(Dataset<double> data, json prov) {
  prov["rescale"] = data.scale;
  data.provenance = prov.dump();
  return data;
}

}  // namespace

SymmetrizeResult symmetrize(const Dataset<double>& data) {
  SymmetrizeResult res;
  res.input_was_symmetric = is_symmetric(data);
  const Index n = data.n();
  Eigen::MatrixXd X(2 * n, data.d());
  Eigen::VectorXd y(2 * n);
  X.topRows(n) = data.X;
  X.bottomRows(n) = -data.X;
  y.head(n) = data.y;
  y.tail(n) = -data.y;
  res.data = make_dataset<double>(X, y, RescaleMode::kNone);
  res.data.scale = data.scale;
  json prov = {{"constructor", "symmetrize"},
               {"input_was_symmetric", res.input_was_symmetric}};
  if (!data.provenance.empty()) prov["source"] = json::parse(data.provenance);
  res.data = with_provenance(res.data, prov);
  return res;
}

namespace {

struct HintGeometry {
  Eigen::VectorXd w_star;
  double gamma_orig = 0;
};

HintGeometry base_geometry(const Dataset<double>& data) {
  const SeparatorSolution sol = max_margin_separator(data);
  return {sol.w_star, sol.gamma_star};
}

Eigen::MatrixXd hinted_points(const Dataset<double>& data,
                              const Eigen::VectorXd& w_star,
                              const HintedParams& p) {
  Eigen::MatrixXd X(data.n() + 3, data.d());
  X.row(0) = p.H * w_star.transpose();
  X.row(1) = (p.eps * w_star + p.K * p.w_perp).transpose();
  X.row(2) = (p.eps * w_star - p.K * p.w_perp).transpose();
  X.bottomRows(data.n()) = data.X;
  return X;
}

Eigen::VectorXd hinted_labels(const Dataset<double>& data) {
  Eigen::VectorXd y(data.n() + 3);
  y.head(3).setOnes();
  y.tail(data.n()) = data.y;
  return y;
}

// Terms of the H conditions that do not involve H itself.
struct HTerms {
  double H0 = 0;
  Eigen::VectorXd S_minus;  // sum_{j>1} y_j x-_j
  Eigen::VectorXd S_plus;   // sum_{j>1} y_j x+_j
};

HTerms h_terms(const Dataset<double>& data, double alpha,
               const Eigen::VectorXd& w_star, const HintedParams& p) {
  // Hint 1 is H w*; it has no component orthogonal to w* and is excluded
  // from the j > 1 sums, so nothing below depends on H.
  HintedParams q = p;
  q.H = 0;
  const Eigen::MatrixXd X = hinted_points(data, w_star, q);
  const Eigen::VectorXd y = hinted_labels(data);
  const Index n = X.rows();
  const Eigen::MatrixXd P =
      Eigen::MatrixXd::Identity(w_star.size(), w_star.size()) -
      w_star * w_star.transpose();
  const Eigen::VectorXd perp = (X * P).rowwise().norm();
  double min_margin = INFINITY;
  double sum_margin = 0;
  HTerms t;
  t.S_minus = Eigen::VectorXd::Zero(X.cols());
  t.S_plus = Eigen::VectorXd::Zero(X.cols());
  for (Index i = 1; i < n; ++i) {
    const double m = y(i) * X.row(i).dot(w_star);
    min_margin = std::min(min_margin, m);
    sum_margin += m;
    const double cp = y(i) > 0 ? 1.0 : alpha;
    const double cm = y(i) > 0 ? alpha : 1.0;
    t.S_plus += y(i) * cp * X.row(i).transpose();
    t.S_minus += y(i) * cm * X.row(i).transpose();
  }
  t.H0 = perp.maxCoeff() * perp.sum() / (alpha * min_margin) - sum_margin;
  return t;
}

// H - n|mu-(H)| - |S+| where n mu-(H) = alpha H w* + S-.
double h_condition(double H, double alpha, const Eigen::VectorXd& w_star,
                   const HTerms& t) {
  return H - (alpha * H * w_star + t.S_minus).norm() - t.S_plus.norm();
}

double h_required(double alpha, const Eigen::VectorXd& w_star,
                  const HTerms& t) {
  double lo = 0;
  double hi = (t.S_minus.norm() + t.S_plus.norm()) / (1 - alpha) + 1;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h_condition(mid, alpha, w_star, t) > 0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

Eigen::VectorXd default_perp(const Eigen::VectorXd& w_star) {
  Index j = 0;
  w_star.cwiseAbs().minCoeff(&j);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(w_star.size());
  e(j) = 1;
  e -= e.dot(w_star) * w_star;
  return e / e.norm();
}

}  // namespace

HintedParams auto_hinted_params(const Dataset<double>& data, double alpha,
                                HintedInfo* info) {
  if (data.d() < 2) {
    throw Error(ErrorCode::kInvalidHintParams, "hints need d >= 2");
  }
  const HintGeometry g = base_geometry(data);
  HintedParams p;
  p.eps = 0.5 * alpha * g.gamma_orig;
  p.K = 1;
  p.w_perp = default_perp(g.w_star);
  const HTerms t = h_terms(data, alpha, g.w_star, p);
  const double hreq = h_required(alpha, g.w_star, t);
  p.H = 1.01 * std::max({p.eps, t.H0, hreq});
  if (info) {
    info->params = p;
    info->w_star = g.w_star;
    info->gamma_orig = g.gamma_orig;
    info->H0 = t.H0;
    info->H_required = hreq;
  }
  return p;
}

void validate_hinted_params(const Dataset<double>& data, double alpha,
                            const HintedParams& p, HintedInfo* info) {
  const HintGeometry g = base_geometry(data);
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidHintParams, what);
  };
  if (p.w_perp.size() != data.d()) fail("w_perp has the wrong dimension");
  if (std::abs(p.w_perp.norm() - 1) > 1e-12) fail("||w_perp|| = 1");
  if (std::abs(p.w_perp.dot(g.w_star)) > 1e-12) fail("<w_perp, w*> = 0");
  if (!(p.K > 0)) fail("K > 0");
  if (!(p.eps > 0)) fail("eps > 0");
  if (!(p.eps < alpha * g.gamma_orig)) {
    fail("eps < alpha * min_i y_i <w*, x_i>");
  }
  const HTerms t = h_terms(data, alpha, g.w_star, p);
  if (!(p.H > p.eps)) fail("H > eps");
  if (!(p.H > t.H0)) fail("H > H0");
  if (!(h_condition(p.H, alpha, g.w_star, t) > 0)) {
    fail("H > n ||mu-|| + ||sum_{j>1} y_j x+_j||");
  }
  if (info) {
    info->params = p;
    info->w_star = g.w_star;
    info->gamma_orig = g.gamma_orig;
    info->H0 = t.H0;
    info->H_required = h_required(alpha, g.w_star, t);
  }
}

Dataset<double> make_hinted(const Dataset<double>& data, double alpha,
                            const std::optional<HintedParams>& params,
                            HintedInfo* info) {
  HintedInfo local;
  HintedInfo* inf = info ? info : &local;
  HintedParams p;
  if (params) {
    p = *params;
    validate_hinted_params(data, alpha, p, inf);
  } else {
    p = auto_hinted_params(data, alpha, inf);
    validate_hinted_params(data, alpha, p, inf);
  }
  Dataset<double> out = make_dataset<double>(
      hinted_points(data, inf->w_star, p), hinted_labels(data),
      RescaleMode::kUnitMax);
  inf->rescale = out.scale;
  out.scale *= data.scale;
  json prov = {{"constructor", "make_hinted"},
               {"mode", params ? "explicit" : "auto"},
               {"alpha", alpha},
               {"H", p.H},
               {"K", p.K},
               {"eps", p.eps},
               {"w_perp", vec_json(p.w_perp)},
               {"w_star", vec_json(inf->w_star)},
               {"H0", inf->H0},
               {"H_required", inf->H_required},
               {"hint_rescale", inf->rescale}};
  if (!data.provenance.empty()) prov["source"] = json::parse(data.provenance);
  return with_provenance(out, prov);
}

bool is_orthogonally_separable(const Dataset<double>& data) {
  const Eigen::MatrixXd G = data.X * data.X.transpose();
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.n(); ++j) {
      if (i == j) continue;
      if (data.y(i) == data.y(j) && !(G(i, j) > 0)) return false;
      if (data.y(i) != data.y(j) && G(i, j) > 0) return false;
    }
  }
  return true;
}

namespace {

// Uniform direction inside the cone of half-angle `half` around unit u.
Eigen::VectorXd sample_cone(const Eigen::VectorXd& u, double half,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Index d = u.size();
  Eigen::VectorXd v(d);
  for (Index j = 0; j < d; ++j) v(j) = normal(rng);
  v -= v.dot(u) * u;
  if (v.norm() == 0) return u;
  v.normalize();
  const double ang = half * unif(rng);
  return std::cos(ang) * u + std::sin(ang) * v;
}

}  // namespace

Dataset<double> gen_orthogonally_separable(Index n_per_class, Index d,
                                           double cone_halfangle,
                                           std::uint64_t seed) {
  if (!(cone_halfangle > 0 && cone_halfangle < std::numbers::pi / 4)) {
    throw Error(ErrorCode::kInvalidArgument, "cone half-angle must be < 45deg");
  }
  if (d < 2 || n_per_class < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need d >= 2, n_per_class >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.5, 1.0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  u(0) = 1;
  // Negatives sit in a cone whose axis makes an angle of 90deg plus twice the
  // half-angle with u, so every cross pair is at least 90deg apart.
  const double psi = std::numbers::pi / 2 + 2 * cone_halfangle;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v(0) = std::cos(psi);
  v(1) = std::sin(psi);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXd X(2 * n_per_class, d);
    Eigen::VectorXd y(2 * n_per_class);
    for (Index i = 0; i < n_per_class; ++i) {
      X.row(i) = radius(rng) * sample_cone(u, cone_halfangle, rng).transpose();
      y(i) = 1;
    }
    for (Index i = 0; i < n_per_class; ++i) {
      X.row(n_per_class + i) =
          radius(rng) * sample_cone(v, cone_halfangle, rng).transpose();
      y(n_per_class + i) = -1;
    }
    Dataset<double> data = make_dataset<double>(X, y, RescaleMode::kIfNeeded);
    if (!is_orthogonally_separable(data)) continue;
    return with_provenance(data, {{"constructor", "gen_orthogonally_separable"},
                                  {"n_per_class", n_per_class},
                                  {"d", d},
                                  {"cone_halfangle", cone_halfangle},
                                  {"seed", seed},
                                  {"attempt", attempt}});
  }
  throw Error(ErrorCode::kGenerationFailed,
              "orthogonal separability rejection sampling exhausted");
}

Dataset<double> gen_gaussian_halfspace(Index n, Index d, double margin_gap,
                                       std::uint64_t seed) {
  if (n < 2 || d < 1 || !(margin_gap > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "need n >= 2, d >= 1, gap > 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::MatrixXd X(n, d + 1);
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) X(i, j) = normal(rng);
      // w_true = e_1
      y(i) = X(i, 0) >= 0 ? 1.0 : -1.0;
      X(i, 0) += margin_gap * y(i);
      X(i, d) = 0.1;
    }
    if ((y.array() > 0).all() || (y.array() < 0).all()) continue;
    Dataset<double> data = make_dataset<double>(X, y, RescaleMode::kUnitMax);
    return with_provenance(data, {{"constructor", "gen_gaussian_halfspace"},
                                  {"n", n},
                                  {"d", d},
                                  {"margin_gap", margin_gap},
                                  {"seed", seed},
                                  {"attempt", attempt}});
  }
  throw Error(ErrorCode::kGenerationFailed, "a class stayed empty");
}

double kink_example_beta(double alpha) {
  auto f = [alpha](double b) {
    const double s = std::sin(b);
    const double c = std::cos(b);
    return (2 * s * s + c) * alpha * alpha - (1 + c) * alpha + std::cos(2 * b);
  };
  // Scan for the first sign change, then bisect.
  const int grid = 10000;
  double lo = 1e-9;
  double flo = f(lo);
  for (int k = 1; k <= grid; ++k) {
    const double hi = (std::numbers::pi / 2 - 1e-9) * k / grid;
    const double fhi = f(hi);
    if ((flo > 0) != (fhi > 0)) {
      double a = lo, b = hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if ((f(mid) > 0) == (flo > 0)) {
          a = mid;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    flo = fhi;
  }
  throw Error(ErrorCode::kInvalidArgument, "no root for this alpha");
}

Dataset<double> kink_example_dataset(double alpha) {
  const double cot = 1 / std::tan(kink_example_beta(alpha));
  Eigen::MatrixXd X(6, 2);
  X << 1, cot, 1, 0, 1, -cot, -1, -cot, -1, 0, -1, cot;
  Eigen::VectorXd y(6);
  y << 1, 1, 1, -1, -1, -1;
  Dataset<double> data = make_dataset<double>(X, y, RescaleMode::kUnitMax);
  return with_provenance(data, {{"constructor", "kink_example_dataset"},
                                {"alpha", alpha},
                                {"beta", kink_example_beta(alpha)}});
}

Fig1Examples fig1_examples() {
  Fig1Examples ex;
  ex.alpha = 0.5;
  ex.left = kink_example_dataset(ex.alpha);
  {
    json prov = json::parse(ex.left.provenance);
    prov["figure"] = "fig1-left";
    ex.left.provenance = prov.dump();
  }

  // Positives on [eps, inf) x {+1, -1}, negatives on (-inf, -eps'] x {0}, all
  // lifted by a constant third coordinate c < eps.
  const double eps = 0.1;
  const double eps_neg = 2.0;
  const double c = 0.05;
  const std::vector<double> pos_x = {eps, eps + 0.5, eps + 1.0, eps + 1.5,
                                     eps + 2.0};
  const std::vector<double> neg_x = {eps_neg, eps_neg + 0.5, eps_neg + 1.0};
  const Index n = static_cast<Index>(2 * pos_x.size() + neg_x.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  Index i = 0;
  for (double x : pos_x) {
    for (double s : {1.0, -1.0}) {
      X.row(i) << x, s, c;
      y(i++) = 1;
    }
  }
  for (double x : neg_x) {
    X.row(i) << -x, 0, c;
    y(i++) = -1;
  }
  ex.middle = with_provenance(
      make_dataset<double>(X, y, RescaleMode::kUnitMax),
      {{"constructor", "fig1_examples"},
       {"figure", "fig1-middle"},
       {"eps", eps},
       {"eps_neg", eps_neg},
       {"c", c}});

  Eigen::MatrixXd B(6, 2);
  B << 0.8, 0.3, 0.6, -0.4, 0.9, 0.0, -0.7, 0.2, -0.5, -0.6, -0.9, -0.1;
  Eigen::VectorXd yb(6);
  yb << 1, 1, 1, -1, -1, -1;
  ex.right_base = with_provenance(
      make_dataset<double>(B, yb, RescaleMode::kIfNeeded),
      {{"constructor", "fig1_examples"}, {"figure", "fig1-right-base"}});
  ex.right = make_hinted(ex.right_base, ex.alpha, std::nullopt);
  {
    json prov = json::parse(ex.right.provenance);
    prov["figure"] = "fig1-right";
    ex.right.provenance = prov.dump();
  }
  return ex;
}

Dataset<double> read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::string line;
  std::string provenance;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# provenance:", 0) == 0) {
      provenance = line.substr(std::string("# provenance:").size());
      const auto start = provenance.find_first_not_of(' ');
      provenance = start == std::string::npos ? "" : provenance.substr(start);
      continue;
    }
    if (line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    break;
  }
  if (header.size() < 2 || header.back() != "y") {
    throw Error(ErrorCode::kInvalidDataset, "header must be x0,...,y");
  }
  const Index d = static_cast<Index>(header.size()) - 1;
  for (Index j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j)) {
      throw Error(ErrorCode::kInvalidDataset, "unexpected column " + header[j]);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidDataset, "bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (static_cast<Index>(row.size()) != d + 1) {
      throw Error(ErrorCode::kInvalidDataset, "ragged row in " + path);
    }
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = rows[i][j];
    y(i) = rows[i][d];
  }
  Dataset<double> data = make_dataset<double>(X, y, RescaleMode::kIfNeeded);
  data.provenance = provenance;
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset<double>& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  if (!data.provenance.empty()) {
    out << "# provenance: " << data.provenance << '\n';
  }
  for (Index j = 0; j < data.d(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.d(); ++j) {
      out << format_double(data.X(i, j)) << ',';
    }
    out << (data.y(i) > 0 ? "1" : "-1") << '\n';
  }
}

}  // namespace marginlab
