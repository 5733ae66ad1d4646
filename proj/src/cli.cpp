#include "marginlab/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "marginlab/analysis.hpp"
#include "marginlab/contour.hpp"
#include "marginlab/datasets.hpp"
#include "marginlab/dynamics.hpp"
#include "marginlab/error.hpp"
#include "marginlab/experiments.hpp"
#include "marginlab/geometry.hpp"

namespace marginlab {

using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotSeparable:
    case ErrorCode::kNotSymmetric:
    case ErrorCode::kScaleViolation:
    case ErrorCode::kAssumptionViolation:
    case ErrorCode::kIncompatibleEmbedding:
    case ErrorCode::kNonPositiveMargin:
    case ErrorCode::kNotOrthogonallySeparable:
    case ErrorCode::kInvalidHintParams:
      return kExitAssumption;
    case ErrorCode::kNonFinite:
      return kExitNumeric;
    default:
      return kExitError;
  }
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct TrainOptions {
  std::string data;
  std::string out;
  double alpha = 0.5;
  Index width = 2;
  double sigma_init = 1e-3;
  std::uint64_t seed = 0;
  long steps = 100000;
  std::string scheme = "balanced";
  std::string signs = "random";
  double c_ainit = 1;
  double eta0 = 1e-2;
  std::string rule = "adaptive";
  long record_every = 100;
  double norm_cap = 1e6;
  std::string expect;
};

void add_train_flags(CLI::App* cmd, TrainOptions& o) {
  cmd->add_option("--alpha", o.alpha, "Leaky-ReLU slope");
  cmd->add_option("--width", o.width, "hidden width m");
  cmd->add_option("--sigma-init", o.sigma_init, "initialization scale");
  cmd->add_option("--seed", o.seed, "initialization seed");
  cmd->add_option("--steps", o.steps, "maximum integrator steps");
  cmd->add_option("--scheme", o.scheme, "balanced or gaussian")
      ->check(CLI::IsMember({"balanced", "gaussian"}));
  cmd->add_option("--signs", o.signs, "random or alternating head signs")
      ->check(CLI::IsMember({"random", "alternating"}));
  cmd->add_option("--c-ainit", o.c_ainit, "gaussian scheme a/w scale ratio");
  cmd->add_option("--eta0", o.eta0, "base step size");
  cmd->add_option("--rule", o.rule, "adaptive, fixed or rk4")
      ->check(CLI::IsMember({"adaptive", "fixed", "rk4"}));
  cmd->add_option("--record-every", o.record_every, "snapshot stride");
  cmd->add_option("--norm-cap", o.norm_cap, "stop once |theta| exceeds this");
}

TrainSpec make_spec(const TrainOptions& o) {
  TrainSpec spec;
  spec.alpha = o.alpha;
  spec.width = o.width;
  spec.init.sigma_init = o.sigma_init;
  spec.init.seed = o.seed;
  spec.init.c_ainit = o.c_ainit;
  spec.init.scheme =
      o.scheme == "gaussian" ? InitScheme::kGaussian : InitScheme::kBalanced;
  spec.init.signs =
      o.signs == "alternating" ? SignPattern::kAlternating : SignPattern::kRandom;
  spec.flow.eta0 = o.eta0;
  spec.flow.max_steps = o.steps;
  spec.flow.record_every = o.record_every;
  spec.flow.norm_cap = o.norm_cap;
  spec.flow.keep_params = false;
  if (o.rule == "fixed") spec.flow.step_rule = StepRule::kFixed;
  if (o.rule == "rk4") spec.flow.step_rule = StepRule::kRK4;
  return spec;
}

json train_config_json(const TrainOptions& o) {
  return {{"data", o.data},         {"alpha", o.alpha},
          {"width", o.width},       {"sigma_init", o.sigma_init},
          {"seed", o.seed},         {"steps", o.steps},
          {"scheme", o.scheme},     {"signs", o.signs},
          {"c_ainit", o.c_ainit},   {"eta0", o.eta0},
          {"rule", o.rule},         {"record_every", o.record_every},
          {"norm_cap", o.norm_cap}};
}

bool run_ok(const RunResult& run) {
  return run.monitor.interpolation_reached && run.monitor.violations.empty();
}

// Trains, writes outputs into dir and returns the summary.
json train_into(const Dataset<double>& data, const TrainOptions& o,
                const std::string& dir, RunResult* result = nullptr) {
  const TrainSpec spec = make_spec(o);
  RunResult run = train_run(data, spec);
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir + "/trajectory.csv", run.traj);
  write_params(dir + "/params.json", run.traj.final_theta);
  json summary = run_summary(run, spec, data);
  write_json(dir + "/summary.json", summary);
  if (result) *result = std::move(run);
  return summary;
}

std::vector<SvgPoint> svg_points(const Dataset<double>& data) {
  std::vector<SvgPoint> pts;
  for (Index i = 0; i < data.n(); ++i) {
    pts.push_back({data.X(i, 0), data.d() > 1 ? data.X(i, 1) : 0.0,
                   data.y(i) > 0 ? 1 : -1});
  }
  return pts;
}

// Slice through the first two axes. Remaining coordinates are the data
// mean when data is given.
PlaneSlice slice_for(Index d, const Dataset<double>* data) {
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(d);
  if (data && d > 2) fixed = data->X.colwise().mean().transpose();
  return coordinate_plane(d, fixed);
}

json contour_into(const NetParams<double>& theta, const Dataset<double>* data,
                  const GridSpec& grid, const std::string& dir,
                  ContourArtifact* result = nullptr) {
  ContourArtifact c = net_contour(theta, slice_for(theta.d(), data), grid);
  std::filesystem::create_directories(dir);
  write_contour_svg(dir + "/contour.svg", c,
                    data ? svg_points(*data) : std::vector<SvgPoint>{});
  write_raster_csv(dir + "/raster.csv", c);
  json j;
  j["degenerate"] = c.degenerate;
  j["polylines"] = c.polylines.size();
  j["consistent"] = marching_squares_consistent(c);
  json fits = json::array();
  for (const auto& line : c.polylines) {
    const Polyline simple = douglas_peucker(line, grid.cell_diagonal());
    fits.push_back({{"vertices", line.size()},
                    {"segments", simple.size() > 0 ? simple.size() - 1 : 0},
                    {"line_fit_residual", line_fit_residual(line)}});
  }
  j["lines"] = fits;
  j["cell_diagonal"] = grid.cell_diagonal();
  write_json(dir + "/contour.json", j);
  if (result) *result = std::move(c);
  return j;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) v.push_back(std::stod(tok));
  }
  return v;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"margin-lab: gradient flow on two-layer Leaky-ReLU nets"};
  app.require_subcommand(1);
  app.fallthrough();
  bool assert_mode = false;
  app.add_flag("--assert", assert_mode, "exit 4 when the command's check fails");
  int code = kExitOk;

  // check
  std::string check_data;
  double check_alpha = 0.5;
  std::string check_out;
  auto* check = app.add_subcommand("check", "report dataset assumptions");
  check->add_option("data", check_data, "dataset CSV")->required();
  check->add_option("--alpha", check_alpha, "Leaky-ReLU slope");
  check->add_option("--out", check_out, "also write the report here");
  check->callback([&] {
    const Dataset<double> data = read_dataset_csv(check_data);
    const AssumptionReport r = check_assumptions(data, check_alpha);
    const json j = assumption_report_json(r);
    out << j.dump(2) << '\n';
    if (!check_out.empty()) write_json(check_out, j);
    if (!r.linearly_separable) code = kExitAssumption;
  });

  // gen
  std::string gen_family, gen_out, gen_base;
  double gen_alpha = 0.5, gen_gap = 0.5, gen_cone = 30;
  Index gen_n = 100, gen_d = 50;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "write a generated dataset");
  gen->add_option("family", gen_family,
                  "fig1-left, fig1-middle, fig1-right, kink, hinted, "
                  "symmetrize, orthosep, halfspace")
      ->required()
      ->check(CLI::IsMember({"fig1-left", "fig1-middle", "fig1-right", "kink",
                             "hinted", "symmetrize", "orthosep", "halfspace"}));
  gen->add_option("--out", gen_out, "output CSV")->required();
  gen->add_option("--base", gen_base, "input CSV for hinted and symmetrize");
  gen->add_option("--alpha", gen_alpha, "Leaky-ReLU slope");
  gen->add_option("--n", gen_n, "points (per class for orthosep)");
  gen->add_option("--d", gen_d, "dimension");
  gen->add_option("--gap", gen_gap, "halfspace margin gap");
  gen->add_option("--cone", gen_cone, "orthosep cone half-angle, degrees");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->callback([&] {
    Dataset<double> data;
    auto base = [&] {
      if (gen_base.empty()) {
        throw Error(ErrorCode::kInvalidArgument, gen_family + " needs --base");
      }
      return read_dataset_csv(gen_base);
    };
    if (gen_family == "fig1-left") data = fig1_examples().left;
    if (gen_family == "fig1-middle") data = fig1_examples().middle;
    if (gen_family == "fig1-right") data = fig1_examples().right;
    if (gen_family == "kink") data = kink_example_dataset(gen_alpha);
    if (gen_family == "hinted") {
      data = make_hinted(base(), gen_alpha, std::nullopt);
    }
    if (gen_family == "symmetrize") data = symmetrize(base()).data;
    if (gen_family == "orthosep") {
      data = gen_orthogonally_separable(gen_n, gen_d, gen_cone * M_PI / 180,
                                        gen_seed);
    }
    if (gen_family == "halfspace") {
      data = gen_gaussian_halfspace(gen_n, gen_d, gen_gap, gen_seed);
    }
    write_dataset_csv(gen_out, data);
    std::vector<std::string> inputs;
    if (!gen_base.empty()) inputs.push_back(gen_base);
    const auto dir = std::filesystem::path(gen_out).parent_path().string();
    write_manifest(dir.empty() ? "." : dir, "gen " + gen_family, inputs,
                   {{"family", gen_family}, {"alpha", gen_alpha},
                    {"n", gen_n}, {"d", gen_d}, {"gap", gen_gap},
                    {"cone", gen_cone}, {"seed", gen_seed}, {"out", gen_out}});
    out << gen_out << '\n';
  });

  // train
  TrainOptions topt;
  auto* train = app.add_subcommand("train", "integrate the flow from a seeded init");
  train->add_option("--data", topt.data, "dataset CSV")->required();
  train->add_option("--out", topt.out, "output directory")->required();
  train->add_option("--expect", topt.expect,
                    "classifier kind checked under --assert")
      ->check(CLI::IsMember({"linear", "one_leaky_relu", "nonlinear"}));
  add_train_flags(train, topt);
  train->callback([&] {
    const Dataset<double> data = read_dataset_csv(topt.data);
    RunResult run;
    const json summary = train_into(data, topt, topt.out, &run);
    write_manifest(topt.out, "train", {topt.data}, train_config_json(topt));
    out << summary.dump(2) << '\n';
    bool ok = run_ok(run);
    if (!topt.expect.empty()) {
      ok = ok && topt.expect == classifier_kind_name(run.fit.kind);
    }
    if (assert_mode && !ok) code = kExitAssert;
  });

  // certify
  std::string cert_data, cert_params, cert_out;
  KKTOptions kopt;
  auto* certify = app.add_subcommand("certify", "check KKT conditions of a direction");
  certify->add_option("--data", cert_data, "dataset CSV")->required();
  certify->add_option("--params", cert_params, "params JSON")->required();
  certify->add_option("--out", cert_out, "certificate JSON path");
  certify->add_option("--tol-stat", kopt.tol_stat, "stationarity tolerance");
  certify->add_option("--tol-bal", kopt.tol_bal, "balance tolerance");
  certify->add_option("--support-tol", kopt.support_tol, "support tolerance");
  certify->add_option("--max-kinks", kopt.max_kinks, "kink pairs allowed");
  certify->callback([&] {
    const Dataset<double> data = read_dataset_csv(cert_data);
    const NetParams<double> theta = read_params(cert_params);
    const KKTCertificate c = kkt_certify(theta, data, kopt);
    const std::string text = c.to_json();
    out << text << '\n';
    if (!cert_out.empty()) {
      write_text(cert_out, text + "\n");
      const auto dir = std::filesystem::path(cert_out).parent_path().string();
      write_manifest(dir.empty() ? "." : dir, "certify",
                     {cert_data, cert_params},
                     {{"tol_stat", kopt.tol_stat}, {"tol_bal", kopt.tol_bal},
                      {"support_tol", kopt.support_tol},
                      {"max_kinks", kopt.max_kinks}});
    }
    if (assert_mode && c.verdict != Verdict::kPass) code = kExitAssert;
  });

  // phase1
  std::string p1_data, p1_out, p1_r = "0.025,0.05,0.1,0.2";
  Index p1_width = 4;
  double p1_sigma = 1e-10, p1_eta = 1e-2, p1_alpha = 0.5;
  std::uint64_t p1_seed = 0;
  auto* phase1 = app.add_subcommand("phase1", "early-phase predictor error vs r");
  phase1->add_option("--data", p1_data, "symmetric dataset CSV")->required();
  phase1->add_option("--out", p1_out, "output directory")->required();
  phase1->add_option("--r", p1_r, "comma-separated radii");
  phase1->add_option("--width", p1_width, "hidden width m");
  phase1->add_option("--sigma-init", p1_sigma, "initialization scale");
  phase1->add_option("--seed", p1_seed, "initialization seed");
  phase1->add_option("--alpha", p1_alpha, "Leaky-ReLU slope");
  phase1->add_option("--eta", p1_eta, "Runge-Kutta step");
  phase1->callback([&] {
    const Dataset<double> data = read_dataset_csv(p1_data);
    InitConfig ic;
    ic.scheme = InitScheme::kGaussian;
    ic.seed = p1_seed;
    const NetParams<double> bar = sample_unit_init(ic, p1_width, data.d(), p1_alpha);
    const PhaseOneScaling s =
        phase_one_scaling(data, bar, p1_sigma, parse_doubles(p1_r), p1_eta);
    std::ostringstream csv;
    csv << "r,T1,error,error_over_r3,steps\n";
    for (const auto& row : s.rows) {
      csv << format_double(row.r) << ',' << format_double(row.T1) << ','
          << format_double(row.error) << ','
          << format_double(row.error / (row.r * row.r * row.r)) << ','
          << row.steps << '\n';
    }
    write_text(p1_out + "/phase1.csv", csv.str());
    const json j = {{"slope", s.slope}, {"width", p1_width},
                    {"sigma_init", p1_sigma}, {"seed", p1_seed}};
    write_json(p1_out + "/phase1.json", j);
    write_manifest(p1_out, "phase1", {p1_data},
                   {{"r", p1_r}, {"width", p1_width}, {"sigma_init", p1_sigma},
                    {"seed", p1_seed}, {"alpha", p1_alpha}, {"eta", p1_eta}});
    out << csv.str() << "slope " << format_double(s.slope) << '\n';
    if (assert_mode && !(std::abs(s.slope - 3) <= 0.3)) code = kExitAssert;
  });

  // table1
  Table1Options t1;
  std::string t1_out, t1_n;
  auto* table1 = app.add_subcommand("table1", "NN vs SVM test error over n");
  table1->add_option("--out", t1_out, "output directory")->required();
  table1->add_option("--n-list", t1_n, "comma-separated training sizes");
  table1->add_option("--seeds", t1.seeds, "seeds per size");
  table1->add_option("--gap", t1.gap, "halfspace margin gap");
  table1->add_option("--width", t1.width, "hidden width m");
  table1->add_option("--steps", t1.max_steps, "maximum steps per run");
  table1->add_option("--seed", t1.seed, "base seed");
  table1->callback([&] {
    if (!t1_n.empty()) {
      t1.n_list.clear();
      for (double v : parse_doubles(t1_n)) t1.n_list.push_back(static_cast<Index>(v));
    }
    const std::vector<Table1Row> rows = run_table1(t1);
    write_table1_csv(t1_out + "/table1_runs.csv", rows);
    std::map<Index, std::pair<double, double>> mean;
    for (const auto& r : rows) {
      mean[r.n].first += r.svm_error / t1.seeds;
      mean[r.n].second += r.nn_error / t1.seeds;
    }
    std::vector<double> ns, svm, nn;
    double max_gap = 0;
    std::ostringstream csv;
    csv << "n,svm_test_error,nn_test_error\n";
    for (const auto& [n, e] : mean) {
      ns.push_back(static_cast<double>(n));
      svm.push_back(e.first);
      nn.push_back(e.second);
      max_gap = std::max(max_gap, std::abs(e.first - e.second));
      csv << n << ',' << format_double(e.first) << ',' << format_double(e.second)
          << '\n';
    }
    write_text(t1_out + "/table1.csv", csv.str());
    json j = {{"max_gap", max_gap}, {"seeds", t1.seeds}, {"gap", t1.gap}};
    bool ok = max_gap <= 0.025;
    if (ns.size() >= 2) {
      j["spearman_svm"] = spearman(ns, svm);
      j["spearman_nn"] = spearman(ns, nn);
      ok = ok && spearman(ns, svm) <= -0.7 && spearman(ns, nn) <= -0.7;
    }
    write_json(t1_out + "/table1.json", j);
    write_manifest(t1_out, "table1", {},
                   {{"n_list", t1.n_list}, {"seeds", t1.seeds}, {"gap", t1.gap},
                    {"width", t1.width}, {"steps", t1.max_steps},
                    {"seed", t1.seed}});
    out << csv.str() << j.dump() << '\n';
    if (assert_mode && !ok) code = kExitAssert;
  });

  // contour
  std::string ct_params, ct_data, ct_out;
  GridSpec grid;
  auto* contour = app.add_subcommand("contour", "zero level set as SVG and CSV");
  contour->add_option("--params", ct_params, "params JSON")->required();
  contour->add_option("--out", ct_out, "output directory")->required();
  contour->add_option("--data", ct_data, "dataset CSV drawn as points");
  contour->add_option("--nx", grid.nx, "grid columns");
  contour->add_option("--ny", grid.ny, "grid rows");
  contour->add_option("--x-min", grid.x_min);
  contour->add_option("--x-max", grid.x_max);
  contour->add_option("--y-min", grid.y_min);
  contour->add_option("--y-max", grid.y_max);
  contour->callback([&] {
    const NetParams<double> theta = read_params(ct_params);
    std::optional<Dataset<double>> data;
    std::vector<std::string> inputs{ct_params};
    if (!ct_data.empty()) {
      data = read_dataset_csv(ct_data);
      inputs.push_back(ct_data);
    }
    ContourArtifact c;
    const json j = contour_into(theta, data ? &*data : nullptr, grid, ct_out, &c);
    write_manifest(ct_out, "contour", inputs,
                   {{"nx", grid.nx}, {"ny", grid.ny}, {"x_min", grid.x_min},
                    {"x_max", grid.x_max}, {"y_min", grid.y_min},
                    {"y_max", grid.y_max}});
    out << j.dump(2) << '\n';
    if (assert_mode && !j["consistent"].get<bool>()) code = kExitAssert;
  });

  // fig1
  std::string f1_out;
  std::uint64_t f1_seed = 0;
  long f1_steps = 100000;
  auto* fig1 = app.add_subcommand("fig1", "datasets, runs and contours of the three panels");
  fig1->add_option("--out", f1_out, "output directory")->required();
  fig1->add_option("--seed", f1_seed, "initialization seed");
  fig1->add_option("--steps", f1_steps, "maximum steps per run");
  fig1->callback([&] {
    const Fig1Examples ex = fig1_examples();
    struct Panel {
      const char* name;
      const Dataset<double>* data;
      Index width;
    };
    const Panel panels[] = {{"left", &ex.left, 8},
                            {"middle", &ex.middle, 8},
                            {"right", &ex.right, 4}};
    json all;
    bool ok = true;
    for (const auto& p : panels) {
      const std::string dir = f1_out + "/" + p.name;
      std::filesystem::create_directories(dir);
      write_dataset_csv(dir + "/data.csv", *p.data);
      TrainOptions o;
      o.data = dir + "/data.csv";
      o.alpha = ex.alpha;
      o.width = p.width;
      o.sigma_init = 1e-4;
      o.seed = f1_seed;
      o.steps = f1_steps;
      o.signs = "alternating";
      RunResult run;
      json summary = train_into(*p.data, o, dir, &run);
      ok = ok && run_ok(run);
      summary["contour"] = contour_into(run.direction, p.data, GridSpec{}, dir);
      write_manifest(dir, std::string("fig1 ") + p.name, {o.data},
                     train_config_json(o));
      all[p.name] = {{"final_classifier", summary["final_classifier"]},
                     {"final_gamma", summary["final_gamma"]},
                     {"stop_reason", summary["stop_reason"]}};
    }
    write_json(f1_out + "/fig1.json", all);
    out << all.dump(2) << '\n';
    if (assert_mode && !ok) code = kExitAssert;
  });

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int rc = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return rc == 0 ? kExitOk : kExitError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return code;
}

}  // namespace marginlab
