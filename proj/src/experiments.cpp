#include "marginlab/experiments.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "marginlab/analysis.hpp"
#include "marginlab/datasets.hpp"
#include "marginlab/error.hpp"
#include "marginlab/geometry.hpp"
#include "marginlab/version.hpp"

namespace marginlab {

using nlohmann::json;

int thread_count() {
  if (const char* env = std::getenv("MARGINLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(Index n, const std::function<void(Index)>& body) {
  const int workers =
      static_cast<int>(std::min<Index>(thread_count(), std::max<Index>(n, 1)));
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const json& config) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
               std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["config"] = config;
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  j["inputs"] = in;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in " + dir);
  out << j.dump(2) << '\n';
}

json vector_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

json assumption_report_json(const AssumptionReport& r) {
  json j;
  j["linearly_separable"] = r.linearly_separable;
  j["symmetric"] = r.symmetric;
  j["mu_dot_x_nonzero"] = r.mu_dot_x_nonzero;
  j["cone_condition"] = r.cone_condition;
  j["principal_direction"] = r.principal_direction.has_value();
  j["mu_plus_greater"] = r.mu_plus_greater;
  j["support_labels_positive"] = r.support_labels_positive;
  j["mu_plus_norm"] = r.mu_plus_norm;
  j["mu_minus_norm"] = r.mu_minus_norm;
  if (r.separator) {
    j["gamma_star"] = r.separator->gamma_star;
    j["w_star"] = vector_json(r.separator->w_star);
  }
  if (r.principal_direction) {
    j["principal_candidate"] = r.principal_direction->candidate;
    j["principal_slack"] = r.principal_direction->slack;
  }
  return j;
}

json params_to_json(const NetParams<double>& theta) {
  json W = json::array();
  for (Index k = 0; k < theta.m(); ++k) {
    W.push_back(vector_json(theta.W.row(k).transpose()));
  }
  return {{"alpha", theta.alpha}, {"W", W}, {"a", vector_json(theta.a)}};
}

NetParams<double> params_from_json(const json& j) {
  try {
    const auto& W = j.at("W");
    const auto& a = j.at("a");
    const Index m = static_cast<Index>(W.size());
    if (m == 0 || static_cast<Index>(a.size()) != m) {
      throw Error(ErrorCode::kDimensionMismatch, "W and a sizes differ");
    }
    const Index d = static_cast<Index>(W[0].size());
    NetParams<double> theta =
        NetParams<double>::Zero(m, d, j.at("alpha").get<double>());
    for (Index k = 0; k < m; ++k) {
      if (static_cast<Index>(W[k].size()) != d) {
        throw Error(ErrorCode::kDimensionMismatch, "ragged W");
      }
      for (Index c = 0; c < d; ++c) theta.W(k, c) = W[k][c].get<double>();
      theta.a(k) = a[k].get<double>();
    }
    return theta;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("bad params json: ") + e.what());
  }
}

void write_params(const std::string& path, const NetParams<double>& theta) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << params_to_json(theta).dump(2) << '\n';
}

NetParams<double> read_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, path + ": " + e.what());
  }
  return params_from_json(j);
}

Eigen::MatrixXd probe_points(Index d, std::uint64_t seed) {
  if (d == 2) {
    const Index g = 50;
    Eigen::MatrixXd P(g * g, 2);
    for (Index i = 0; i < g; ++i) {
      for (Index j = 0; j < g; ++j) {
        P(i * g + j, 0) = -1.0 + 2.0 * j / (g - 1);
        P(i * g + j, 1) = -1.0 + 2.0 * i / (g - 1);
      }
    }
    return P;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd P(2500, d);
  for (Index i = 0; i < P.rows(); ++i) {
    Eigen::VectorXd v(d);
    for (Index c = 0; c < d; ++c) v(c) = normal(rng);
    const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(d));
    P.row(i) = (radius / v.norm()) * v.transpose();
  }
  return P;
}

double sup_relative_error(const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  if (f.size() != g.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe counts differ");
  }
  const double scale = g.cwiseAbs().maxCoeff();
  const double diff = (f - g).cwiseAbs().maxCoeff();
  if (scale == 0) return diff == 0 ? 0 : INFINITY;
  return diff / scale;
}

const char* classifier_kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::kLinear: return "linear";
    case ClassifierKind::kOneLeakyRelu: return "one_leaky_relu";
    case ClassifierKind::kNonlinear: return "nonlinear";
  }
  return "unknown";
}

Eigen::VectorXd normalized_outputs(const NetParams<double>& theta,
                                   const Eigen::MatrixXd& probes) {
  const double sq = theta.squared_norm();
  if (sq == 0) return Eigen::VectorXd::Zero(probes.rows());
  return forward_batch(theta, probes) / sq;
}

FunctionFit classify_function(const NetParams<double>& theta,
                              const Eigen::MatrixXd& probes, double tol) {
  FunctionFit fit;
  const double alpha = theta.alpha;
  const Eigen::VectorXd f = normalized_outputs(theta, probes);
  const Eigen::VectorXd f_neg = normalized_outputs(theta, -probes);
  const auto qr = probes.colPivHouseholderQr();

  fit.linear_coef = qr.solve(f);
  fit.linear_error = sup_relative_error(probes * fit.linear_coef, f);

  const Eigen::VectorXd odd = (f - f_neg) / (1 + alpha);
  fit.neuron = qr.solve(odd);
  const Eigen::VectorXd z = probes * fit.neuron;
  Eigen::VectorXd up(z.size()), down(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    up(i) = leaky_relu(z(i), alpha);
    down(i) = -leaky_relu(-z(i), alpha);
  }
  const double e_up = sup_relative_error(up, f);
  const double e_down = sup_relative_error(down, f);
  fit.neuron_sign = e_up <= e_down ? 1 : -1;
  fit.one_neuron_error = std::min(e_up, e_down);

  if (fit.linear_error <= tol) {
    fit.kind = ClassifierKind::kLinear;
  } else if (fit.one_neuron_error <= tol) {
    fit.kind = ClassifierKind::kOneLeakyRelu;
  }
  return fit;
}

RunResult train_run(const Dataset<double>& data, const TrainSpec& spec) {
  RunResult run;
  const NetParams<double> theta0 =
      sample_init(spec.init, spec.width, data.d(), spec.alpha);
  run.traj = integrate(theta0, data, spec.flow);
  run.monitor = loss_convergence_monitor(run.traj, data);
  const NetParams<double>& th = run.traj.final_theta;
  const double norm = th.norm();
  run.direction = norm > 0 ? th.scaled(1 / norm) : th;
  const double sq = th.squared_norm();
  if (sq > 0) {
    const Eigen::VectorXd q = margins(th, data);
    run.final_gamma = q.minCoeff() / sq;
    run.final_gamma_smoothed = smoothed_margin_from_margins(q, sq).value;
  }
  run.fit = classify_function(th, probe_points(data.d()));
  return run;
}

namespace {

// Best cosine between the unit direction and pi_b((w*, -w*, 1, -1) / 2)
// over all embedding vectors b.
double embedded_family_cosine(const NetParams<double>& theta,
                              const Eigen::VectorXd& w_star) {
  const Eigen::VectorXd s = theta.W * w_star + theta.a;
  const double pos = s.cwiseMax(0.0).norm();
  const double neg = s.cwiseMin(0.0).norm();
  const double norm = theta.norm();
  return norm > 0 ? 0.5 * (pos + neg) / norm : 0;
}

}  // namespace

json run_summary(const RunResult& run, const TrainSpec& spec,
                 const Dataset<double>& data) {
  json j;
  j["alpha"] = spec.alpha;
  j["width"] = spec.width;
  j["sigma_init"] = spec.init.sigma_init;
  j["seed"] = spec.init.seed;
  j["scheme"] = spec.init.scheme == InitScheme::kGaussian ? "gaussian" : "balanced";
  j["stop_reason"] = stop_reason_name(run.traj.stop);
  j["steps"] = run.traj.steps;
  j["backtracks"] = run.traj.backtracks;
  j["interpolation_step"] = run.traj.interpolation_step
                                ? json(*run.traj.interpolation_step)
                                : json(nullptr);
  j["final_gamma"] = run.final_gamma;
  j["final_gamma_smoothed"] = run.final_gamma_smoothed;
  j["final_norm"] = run.traj.final_theta.norm();
  j["final_direction"] = params_to_json(run.direction);
  j["final_classifier"] = classifier_kind_name(run.fit.kind);
  j["linear_fit_error"] = run.fit.linear_error;
  j["one_neuron_fit_error"] = run.fit.one_neuron_error;
  j["linear_coef"] = vector_json(run.fit.linear_coef);
  j["neuron"] = vector_json(run.fit.neuron);
  j["neuron_sign"] = run.fit.neuron_sign;
  try {
    const SeparatorSolution sep = max_margin_separator(data);
    j["w_star"] = vector_json(sep.w_star);
    j["gamma_star"] = sep.gamma_star;
    j["embedded_family_cosine"] =
        embedded_family_cosine(run.traj.final_theta, sep.w_star);
  } catch (const Error&) {
    j["w_star"] = nullptr;
  }
  json mon;
  mon["interpolation_reached"] = run.monitor.interpolation_reached;
  mon["loss_monotone"] = run.monitor.loss_monotone;
  mon["gamma_smoothed_monotone"] = run.monitor.gamma_smoothed_monotone;
  mon["norm_increasing"] = run.monitor.norm_increasing;
  json viol = json::array();
  for (const auto& v : run.monitor.violations) {
    viol.push_back({{"quantity", v.quantity}, {"step", v.step},
                    {"magnitude", v.magnitude}});
  }
  mon["violations"] = viol;
  j["monitor"] = mon;
  return j;
}

namespace {

double test_error(const Eigen::VectorXd& scores, const Eigen::VectorXd& y) {
  Index wrong = 0;
  for (Index i = 0; i < y.size(); ++i) {
    if ((scores(i) > 0 ? 1.0 : -1.0) != y(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

Table1Row table1_row(Index n, int seed, const Table1Options& opts) {
  Table1Row row;
  row.n = n;
  row.seed = seed;
  const auto s = static_cast<std::uint64_t>(seed);
  const Dataset<double> train = gen_gaussian_halfspace(
      n, opts.d, opts.gap, mix_seed(opts.seed, static_cast<std::uint64_t>(n), 2 * s));
  // Points are rescaled into the unit ball, which a sign classifier ignores.
  const Dataset<double> test =
      gen_gaussian_halfspace(opts.test_n, opts.d, opts.gap,
                             mix_seed(opts.seed, static_cast<std::uint64_t>(n), 2 * s + 1));

  const SeparatorSolution sep = max_margin_separator(train);
  row.svm_gamma = sep.gamma_star;
  row.svm_error = test_error(test.X * sep.w_star, test.y);

  // He initialization: W entries N(0, 2 / D), a entries N(0, 2 / m).
  const double D = static_cast<double>(train.d());
  const double m = static_cast<double>(opts.width);
  TrainSpec spec;
  spec.alpha = 0.5;
  spec.width = opts.width;
  spec.init.scheme = InitScheme::kGaussian;
  spec.init.sigma_init = opts.scale * std::sqrt(2 / D);
  spec.init.c_ainit = std::sqrt(D / m);
  spec.init.seed = mix_seed(opts.seed + 1, static_cast<std::uint64_t>(n), s);
  spec.flow.eta0 = opts.eta0;
  spec.flow.max_steps = opts.max_steps;
  spec.flow.norm_cap = opts.norm_cap;
  spec.flow.keep_params = false;
  spec.flow.record_every = 1000;
  const NetParams<double> theta0 =
      sample_init(spec.init, spec.width, train.d(), spec.alpha);
  const Trajectory traj = integrate(theta0, train, spec.flow);
  row.steps = traj.steps;
  row.stop = stop_reason_name(traj.stop);
  row.nn_gamma = normalized_margin(traj.final_theta, train);
  row.nn_error = test_error(forward_batch(traj.final_theta, test.X), test.y);
  return row;
}

std::vector<Table1Row> run_table1(const Table1Options& opts) {
  const Index per = opts.seeds;
  const Index total = static_cast<Index>(opts.n_list.size()) * per;
  std::vector<Table1Row> rows(static_cast<std::size_t>(total));
  parallel_for(total, [&](Index i) {
    rows[static_cast<std::size_t>(i)] =
        table1_row(opts.n_list[static_cast<std::size_t>(i / per)],
                   static_cast<int>(i % per), opts);
  });
  return rows;
}

void write_table1_csv(const std::string& path,
                      const std::vector<Table1Row>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "n,seed,svm_test_error,nn_test_error,svm_gamma,nn_gamma,steps,stop\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.seed << ',' << format_double(r.svm_error) << ','
        << format_double(r.nn_error) << ',' << format_double(r.svm_gamma)
        << ',' << format_double(r.nn_gamma) << ',' << r.steps << ',' << r.stop
        << '\n';
  }
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "spearman needs paired samples");
  }
  return pearson(average_ranks(a), average_ranks(b));
}

double log_log_slope(const std::vector<double>& x,
                     const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "slope needs paired samples");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

PhaseOneScaling phase_one_scaling(const Dataset<double>& data,
                                  const NetParams<double>& theta_bar0,
                                  double sigma, const std::vector<double>& r,
                                  double eta) {
  PhaseOneScaling out;
  std::vector<double> rs, errs;
  for (double ri : r) {
    const PhaseOnePrediction p = phase_one_predict(theta_bar0, data, sigma, ri);
    FlowConfig fc;
    fc.step_rule = StepRule::kRK4;
    fc.eta0 = eta;
    fc.t_end = p.T1;
    fc.max_steps = std::numeric_limits<long>::max();
    fc.record_every = std::numeric_limits<long>::max();
    fc.keep_params = false;
    fc.check_dir = false;
    const Trajectory tr = integrate(theta_bar0.scaled(sigma), data, fc);
    const NetParams<double> diff(tr.final_theta.W - p.predicted.W,
                                 tr.final_theta.a - p.predicted.a,
                                 theta_bar0.alpha);
    PhaseOneRow row;
    row.r = ri;
    row.T1 = p.T1;
    row.error = m_norm(diff);
    row.steps = tr.steps;
    out.rows.push_back(row);
    rs.push_back(ri);
    errs.push_back(row.error);
  }
  out.slope = log_log_slope(rs, errs);
  return out;
}

}  // namespace marginlab
