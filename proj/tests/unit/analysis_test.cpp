#include "marginlab/analysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "marginlab/datasets.hpp"
#include "marginlab/dynamics.hpp"
#include "marginlab/error.hpp"
#include "marginlab/geometry.hpp"
#include "test_util.hpp"

namespace marginlab {
namespace {

using ::marginlab::testing::gaussian_vector;
using ::marginlab::testing::random_params;
using ::marginlab::testing::random_separable;

Dataset<double> two_point_set() {
  Eigen::MatrixXd X(2, 2);
  X << 1, 0, -1, 0;
  Eigen::VectorXd y(2);
  y << 1, -1;
  return make_dataset<double>(X, y);
}

Dataset<double> random_symmetric(Index n, Index d, std::uint64_t seed) {
  return symmetrize(random_separable(n, d, seed)).data;
}

// ---- G and mu_tilde ----------------------------------------------------------

TEST(GFunction, TwoPointValue) {
  EXPECT_DOUBLE_EQ(g_function(Eigen::Vector2d(1, 0), two_point_set(), 0.5),
                   0.375);
}

TEST(GFunction, PositivelyHomogeneous) {
  const auto data = random_separable(20, 3, 1);
  std::mt19937_64 rng(2);
  const Eigen::VectorXd w = gaussian_vector(3, rng);
  EXPECT_NEAR(g_function(3.5 * w, data, 0.3), 3.5 * g_function(w, data, 0.3),
              1e-14);
}

TEST(GFunction, LinearOnSymmetricData) {
  const auto data = random_symmetric(15, 4, 3);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd w1 = gaussian_vector(4, rng);
    const Eigen::VectorXd w2 = gaussian_vector(4, rng);
    EXPECT_NEAR(g_function(w1 + w2, data, 0.5),
                g_function(w1, data, 0.5) + g_function(w2, data, 0.5), 1e-13);
  }
}

TEST(MuTilde, EqualsQuarterScaledMean) {
  const auto data = random_symmetric(12, 3, 5);
  const double alpha = 0.2;
  const Eigen::VectorXd expected = (1 + alpha) / 4 * mean_vector(data);
  EXPECT_LT((mu_tilde(data, alpha) - expected).norm(), 1e-14);
  std::mt19937_64 rng(6);
  const Eigen::VectorXd w = gaussian_vector(3, rng);
  EXPECT_NEAR(g_function(w, data, alpha), w.dot(mu_tilde(data, alpha)), 1e-14);
}

TEST(MuTilde, RejectsNonSymmetricData) {
  EXPECT_THROW(mu_tilde(random_separable(10, 2, 1), 0.5), Error);
}

// ---- M matrix spectrum ----------------------------------------------------------

TEST(MMatrix, SpectrumAgainstDenseSolver) {
  std::mt19937_64 rng(7);
  for (Index d : {1, 2, 5, 9}) {
    const Eigen::VectorXd mu = gaussian_vector(d, rng);
    const Eigen::MatrixXd M = m_matrix(mu);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double l0 = mu.norm();
    EXPECT_NEAR(ev(0), -l0, 1e-12);
    EXPECT_NEAR(ev(d), l0, 1e-12);
    for (Index i = 1; i < d; ++i) EXPECT_NEAR(ev(i), 0, 1e-12);

    const Eigenpair top = top_eigenpair(M);
    EXPECT_NEAR(top.value, l0, 1e-10);
    EXPECT_LE((M * top.vector - top.value * top.vector).norm(), 1e-10);
    EXPECT_LE(top.residual, 1e-10);
    Eigen::VectorXd expected(d + 1);
    expected << mu / l0, 1;
    expected /= std::sqrt(2.0);
    EXPECT_LT((top.vector - expected).norm(), 1e-8);
  }
}

// ---- Phase-one predictor -------------------------------------------------------

TEST(PhaseOne, PredictionFields) {
  const auto data = fig1_examples().left;
  InitConfig cfg;
  cfg.scheme = InitScheme::kGaussian;
  cfg.seed = 1;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  const auto p = phase_one_predict(bar, data, 1e-10, 0.1);
  EXPECT_NEAR(p.lambda0, p.mu_tilde.norm(), 1e-15);
  EXPECT_LE(p.eig_residual, 1e-10);
  const double sqrt_m = 2;
  EXPECT_NEAR(p.T1,
              std::log(0.1 / (sqrt_m * 1e-10 * m_norm(bar))) / p.lambda0, 1e-10);
  for (Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(p.predicted.a(k), 0.1 * p.b_bar(k), 1e-15);
  }
}

TEST(PhaseOne, ScaleViolation) {
  const auto data = fig1_examples().left;
  InitConfig cfg;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  try {
    phase_one_predict(bar, data, 1e-2, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kScaleViolation);
  }
}

Trajectory run_to_horizon(const NetParams<double>& theta0,
                          const Dataset<double>& data, double t_end,
                          double eta = 1e-2) {
  FlowConfig fc;
  fc.step_rule = StepRule::kRK4;
  fc.eta0 = eta;
  fc.t_end = t_end;
  fc.max_steps = 10000000;
  fc.record_every = 1000000;
  fc.check_dir = false;
  fc.keep_params = false;
  return integrate(theta0, data, fc);
}

TEST(PhaseOne, SignOfBBarPicksTheDirection) {
  const auto data = fig1_examples().left;
  InitConfig cfg;
  cfg.scheme = InitScheme::kGaussian;
  cfg.seed = 9;
  const auto bar = sample_unit_init(cfg, 6, 2, 0.5);
  const auto p = phase_one_predict(bar, data, 1e-8, 0.05);
  const auto th = run_to_horizon(bar.scaled(1e-8), data, p.T1).final_theta;
  const Eigen::VectorXd mu_bar = p.mu_tilde.normalized();
  const double big = p.b_bar.cwiseAbs().maxCoeff();
  int checked = 0;
  for (Index k = 0; k < 6; ++k) {
    // Neurons with a tiny b_bar are still dominated by the r^3 remainder.
    if (std::abs(p.b_bar(k)) < 0.2 * big) continue;
    ++checked;
    const Eigen::VectorXd w = th.W.row(k).transpose();
    const double cos = w.dot(mu_bar) / w.norm();
    EXPECT_GT(p.b_bar(k) > 0 ? cos : -cos, 0.99) << k;
    EXPECT_EQ(th.a(k) > 0, p.b_bar(k) > 0) << k;
  }
  EXPECT_GE(checked, 3);
}

TEST(PhaseOne, ErrorShrinksFasterThanR) {
  const auto data = fig1_examples().left;
  InitConfig cfg;
  cfg.scheme = InitScheme::kGaussian;
  cfg.seed = 4;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  auto error_at = [&](double r) {
    const auto p = phase_one_predict(bar, data, 1e-10, r);
    const auto th = run_to_horizon(bar.scaled(1e-10), data, p.T1).final_theta;
    return m_norm(NetParams<double>(th.W - p.predicted.W, th.a - p.predicted.a,
                                    0.5)) / r;
  };
  const double coarse = error_at(0.2);
  const double fine = error_at(0.05);
  // Relative error is O(r^2): a factor 16 for r / 4; require at least 8.
  EXPECT_GT(coarse / fine, 8);
  EXPECT_LT(fine, 0.05);
}

TEST(NonsymPhaseOne, AllPositiveLabels) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0.2, 0.8, -0.3, 0.9, 0.1;
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  const auto data = make_dataset<double>(X, y);
  const auto td = tilt(data, 0.5);
  EXPECT_LT((td.mu_minus - 0.5 * td.mu_plus).norm(), 1e-15);
  InitConfig cfg;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  const auto p = nonsym_phase_one_predict(bar, data, 0.5, 1e-6, 0.1);
  EXPECT_NEAR(p.kappa, 0.5, 1e-12);
}

TEST(NonsymPhaseOne, SymmetricDataIsRefused) {
  InitConfig cfg;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  try {
    nonsym_phase_one_predict(bar, fig1_examples().left, 0.5, 1e-6, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAssumptionViolation);
  }
}

TEST(NonsymPhaseOne, NegativeHeadsLagByKappa) {
  const auto data = fig1_examples().right;
  const double r = 0.05;
  InitConfig cfg;
  cfg.seed = 0;
  cfg.signs = SignPattern::kAlternating;
  const auto bar = sample_unit_init(cfg, 4, 2, 0.5);
  std::vector<double> log_ratio;
  double kappa = 0;
  for (double sigma : {1e-5, 1e-6, 1e-7}) {
    const auto p = nonsym_phase_one_predict(bar, data, 0.5, sigma, r);
    kappa = p.kappa;
    const auto th = run_to_horizon(bar.scaled(sigma), data, p.T1, 2e-2).final_theta;
    double pos = 0, neg = 0;
    for (Index k : p.positive_heads) {
      const Eigen::VectorXd w = th.W.row(k).transpose();
      EXPECT_GT(w.dot(p.mu_bar_plus) / w.norm(), 0.999) << sigma;
      pos = std::max(pos, w.norm());
    }
    for (Index k : p.negative_heads) {
      const Eigen::VectorXd w = th.W.row(k).transpose();
      EXPECT_LT(w.dot(p.mu_bar_minus) / w.norm(), -0.99) << sigma;
      neg = std::max(neg, w.norm());
    }
    log_ratio.push_back(std::log(neg / pos));
  }
  // Each decade of sigma shrinks the negative heads by 10^kappa.
  const double slope = (log_ratio[0] - log_ratio[2]) / (2 * std::log(10.0));
  EXPECT_NEAR(slope, kappa, 0.1 * kappa);
}

// ---- Embedding -------------------------------------------------------------------

TEST(EmbeddingVector, GoodFlag) {
  EXPECT_TRUE(make_embedding_vector(Eigen::Vector3d(3, 4, -1)).good);
  EXPECT_FALSE(make_embedding_vector(Eigen::Vector3d(3, 0, -1)).good);
  EXPECT_FALSE(make_embedding_vector(Eigen::Vector3d(3, 4, 1)).good);
  const auto e = make_embedding_vector(Eigen::Vector3d(3, 4, -1));
  EXPECT_DOUBLE_EQ(e.b_plus, 5);
  EXPECT_DOUBLE_EQ(e.b_minus, -1);
}

NetParams<double> random_two_neuron(std::mt19937_64& rng, Index d) {
  NetParams<double> t = random_params(2, d, 0.5, rng);
  t.a(0) = std::abs(t.a(0));
  t.a(1) = -std::abs(t.a(1));
  return t;
}

TEST(Embed, TwoNeuronIdentity) {
  std::mt19937_64 rng(1);
  const auto hat = random_two_neuron(rng, 3);
  const auto e = make_embedding_vector(Eigen::Vector2d(0.7, -2.0));
  const auto out = embed(hat, e);
  EXPECT_LT((out.flat() - hat.flat()).norm(), 1e-15);
}

TEST(Embed, ThreeFourMinusOneExample) {
  std::mt19937_64 rng(2);
  const auto hat = random_two_neuron(rng, 2);
  const auto out = embed(hat, make_embedding_vector(Eigen::Vector3d(3, 4, -1)));
  EXPECT_LT((out.W.row(0) - 0.6 * hat.W.row(0)).norm(), 1e-15);
  EXPECT_LT((out.W.row(1) - 0.8 * hat.W.row(0)).norm(), 1e-15);
  EXPECT_LT((out.W.row(2) - hat.W.row(1)).norm(), 1e-15);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = gaussian_vector(2, rng);
    EXPECT_NEAR(forward(out, x), forward(hat, x), 1e-12);
  }
}

TEST(Embed, IsometryAndFunctionEquality) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> width(2, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto hat = random_two_neuron(rng, 4);
    const Index m = width(rng);
    Eigen::VectorXd b = gaussian_vector(m, rng);
    b(0) = std::abs(b(0));
    b(1) = -std::abs(b(1));
    const auto out = embed(hat, make_embedding_vector(b));
    EXPECT_NEAR(out.norm(), hat.norm(), 1e-12);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd x = gaussian_vector(4, rng);
      const double f = forward(hat, x);
      worst = std::max(worst, std::abs(forward(out, x) - f) / (1 + std::abs(f)));
    }
    EXPECT_LE(worst, 1e-10);
  }
}

TEST(Embed, GradientEquivariance) {
  const auto data = random_separable(20, 3, 8);
  std::mt19937_64 rng(4);
  const auto hat = random_two_neuron(rng, 3);
  const auto e = make_embedding_vector(Eigen::Vector4d(1.0, -0.5, 2.0, -1.5));
  const auto g_hat = grad_select(hat, data);
  const auto g_emb = grad_select(embed(hat, e), data);
  const auto expected =
      embed_linear(NetParams<double>(g_hat.dW, g_hat.da, 0.5), e);
  EXPECT_LT((g_emb.flat() - expected.flat()).norm(),
            1e-12 * (1 + expected.norm()));
}

TEST(Embed, IncompatibleThrowsAndZeroHalfIsAllowed) {
  std::mt19937_64 rng(5);
  auto hat = random_two_neuron(rng, 2);
  const auto one_sided = make_embedding_vector(Eigen::Vector2d(1, 2));
  try {
    embed(hat, one_sided);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompatibleEmbedding);
  }
  // Only the positive half is live, so a b without negative entries works.
  hat.W.row(1).setZero();
  hat.a(1) = 0;
  const auto pos_only = make_embedding_vector(Eigen::Vector2d(1, 2));
  EXPECT_TRUE(is_compatible(hat, pos_only));
  EXPECT_NEAR(embed(hat, pos_only).norm(), hat.norm(), 1e-14);
}

TEST(Embed, GoodEmbeddingProbability) {
  // b_k = <w_k, mu_bar> + a_k under the unit Gaussian init has a symmetric
  // continuous law, so each sign is a fair coin.
  const auto data = fig1_examples().left;
  const Eigen::VectorXd mu_bar = mu_tilde(data, 0.5).normalized();
  for (Index m : {2, 3, 5}) {
    const int draws = 100000;
    int good = 0;
    for (int s = 0; s < draws; ++s) {
      InitConfig cfg;
      cfg.scheme = InitScheme::kGaussian;
      cfg.seed = static_cast<std::uint64_t>(m * draws + s);
      const auto bar = sample_unit_init(cfg, m, 2, 0.5);
      const Eigen::VectorXd b = bar.W * mu_bar + bar.a;
      good += make_embedding_vector(b).good;
    }
    const double p = 1 - std::pow(2.0, 1.0 - static_cast<double>(m));
    const double se = std::sqrt(p * (1 - p) / draws);
    EXPECT_NEAR(static_cast<double>(good) / draws, p, 3 * se) << m;
  }
}

// ---- NNLS -------------------------------------------------------------------------

// Enumerates passive sets; exact for small problems.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Index n = A.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_r = b.norm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < n; ++j) {
      if (mask & (1 << j)) cols.push_back(j);
    }
    Eigen::MatrixXd As(A.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) As.col(c) = A.col(cols[c]);
    const Eigen::VectorXd z = As.colPivHouseholderQr().solve(b);
    if (z.minCoeff() < 0) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) = z(c);
    const double r = (A * x - b).norm();
    if (r < best_r - 1e-14) {
      best_r = r;
      best = x;
    }
  }
  return best;
}

TEST(Nnls, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Index rows = 3 + trial % 5;
    const Index cols = 2 + trial % 5;
    const Eigen::MatrixXd A = testing::gaussian_matrix(rows, cols, rng);
    const Eigen::VectorXd b = gaussian_vector(rows, rng);
    const NnlsResult r = nnls(A, b);
    const Eigen::VectorXd ref = brute_force_nnls(A, b);
    EXPECT_TRUE(r.converged);
    EXPECT_GE(r.x.minCoeff(), 0);
    EXPECT_NEAR(r.residual, (A * ref - b).norm(), 1e-9);
  }
}

TEST(Nnls, ExactNonnegativeSolution) {
  Eigen::MatrixXd A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  const Eigen::Vector2d x(0.5, 2.0);
  const NnlsResult r = nnls(A, A * x);
  EXPECT_LT((r.x - x).norm(), 1e-12);
  EXPECT_LT(r.residual, 1e-12);
}

// ---- KKT certification ----------------------------------------------------------

TEST(Kkt, OneNeuronDirectionPassesAndAttainsHalfGammaPlus) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = random_separable(20, 3, seed);
    const auto theta = one_neuron_direction(data, 0.5);
    const auto cert = kkt_certify(theta, data);
    EXPECT_EQ(cert.verdict, Verdict::kPass) << cert.to_json();
    const auto td = tilt(data, 0.5);
    EXPECT_NEAR(cert.gamma, 0.5 * td.plus->gamma_star, 1e-10);
    for (Index i = 0; i < data.n(); ++i) {
      if (std::find(cert.support.begin(), cert.support.end(), i) ==
          cert.support.end()) {
        EXPECT_EQ(cert.lambdas(i), 0);
      }
    }
  }
}

TEST(Kkt, SymmetricOptimumPassesForEveryGoodB) {
  const auto data = random_symmetric(10, 3, 4);
  std::mt19937_64 rng(6);
  for (Index m : {2, 3, 6}) {
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXd b = gaussian_vector(m, rng);
      b(0) = std::abs(b(0)) + 0.1;
      b(1) = -std::abs(b(1)) - 0.1;
      const auto g =
          symmetric_global_max_margin(data, 0.5, m, make_embedding_vector(b));
      const auto cert = kkt_certify(g.theta, data);
      EXPECT_EQ(cert.verdict, Verdict::kPass) << cert.to_json();
      EXPECT_NEAR(g.gamma, 0.375 * g.gamma_star, 1e-12);
    }
  }
}

TEST(Kkt, KinkExamplePasses) {
  for (double alpha : {0.0, 0.5}) {
    const auto data = kink_example_dataset(alpha);
    const auto cert = kkt_certify(kink_example_params(alpha), data);
    EXPECT_EQ(cert.verdict, Verdict::kPass) << cert.to_json();
    EXPECT_GT(cert.kink_count, 0);
  }
}

TEST(Kkt, RandomDirectionsFail) {
  const auto data = random_separable(25, 3, 17);
  std::mt19937_64 rng(18);
  int tested = 0;
  while (tested < 100) {
    auto theta = random_params(4, 3, 0.5, rng);
    if (margins(theta, data).minCoeff() <= 0) continue;
    ++tested;
    EXPECT_NE(kkt_certify(theta, data).verdict, Verdict::kPass);
  }
}

TEST(Kkt, NonPositiveMarginThrows) {
  const auto data = random_separable(10, 2, 1);
  try {
    kkt_certify(NetParams<double>::Zero(2, 2, 0.5), data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveMargin);
  }
}

TEST(Kkt, CertificateJson) {
  const auto data = random_separable(10, 2, 3);
  const auto cert = kkt_certify(one_neuron_direction(data, 0.5), data);
  const auto j = nlohmann::json::parse(cert.to_json());
  for (const char* key : {"support", "lambdas", "stationarity_residual",
                          "balance_residual", "verdict", "tolerances"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["verdict"], "pass");
}

// ---- Two-neuron classification ----------------------------------------------

TEST(TwoNeuron, CanonicalForms) {
  const auto data = fig1_examples().left;
  const Eigen::VectorXd w = max_margin_separator(data).w_star;
  const double s = 1 / std::sqrt(2.0);
  NetParams<double> full = NetParams<double>::Zero(2, 2, 0.5);
  full.W.row(0) = 0.5 * w.transpose();
  full.W.row(1) = -0.5 * w.transpose();
  full.a << 0.5, -0.5;
  NetParams<double> pos = NetParams<double>::Zero(2, 2, 0.5);
  pos.W.row(0) = s * w.transpose();
  pos.a << s, 0;
  NetParams<double> neg = NetParams<double>::Zero(2, 2, 0.5);
  neg.W.row(1) = -s * w.transpose();
  neg.a << 0, -s;
  EXPECT_EQ(two_neuron_kkt_classify(full.scaled(7), data).label,
            TwoNeuronClass::kFull);
  EXPECT_EQ(two_neuron_kkt_classify(pos, data).label, TwoNeuronClass::kPosOnly);
  EXPECT_EQ(two_neuron_kkt_classify(neg, data).label, TwoNeuronClass::kNegOnly);

  Eigen::VectorXd v = full.flat();
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(6);
  dir(1) = 1;
  v += 0.1 * dir;
  const auto perturbed = NetParams<double>::from_flat(v, 2, 2, 0.5);
  EXPECT_EQ(two_neuron_kkt_classify(perturbed, data).label, TwoNeuronClass::kNone);
}

// ---- Constructions ---------------------------------------------------------------

TEST(GlobalMaxMargin, TwoPointSet) {
  const auto g = symmetric_global_max_margin(two_point_set(), 0.5, 2);
  EXPECT_NEAR(g.gamma, 0.375, 1e-15);
  EXPECT_NEAR(g.theta.norm(), 1, 1e-15);
}

TEST(GlobalMaxMargin, UpperBoundsRandomCandidates) {
  const auto data = random_symmetric(10, 2, 9);
  const auto g = symmetric_global_max_margin(data, 0.5, 4);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 2000; ++i) {
    const auto theta = random_params(4, 2, 0.5, rng);
    EXPECT_LE(normalized_margin(theta, data), g.gamma + 1e-12);
  }
}

TEST(GlobalMaxMargin, KinkExampleIsSuboptimal) {
  for (double alpha : {0.0, 0.5}) {
    const auto data = kink_example_dataset(alpha);
    const double kink = normalized_margin(kink_example_params(alpha), data);
    const auto g = symmetric_global_max_margin(data, alpha, 3);
    EXPECT_LT(kink, g.gamma * 0.99) << alpha;
  }
}

TEST(Orthosep, PredictedFunctionSeparatesWithUnitMargin) {
  const auto data = gen_orthogonally_separable(10, 3, 0.4, 2);
  const auto p = orthosep_predicted_function(data);
  ASSERT_TRUE(p.w_neg.has_value());
  for (Index i = 0; i < data.n(); ++i) {
    EXPECT_GE(data.y(i) * p(data.x(i)), 1 - 1e-9);
  }
  EXPECT_NEAR(p.theta.norm(), 1, 1e-14);
  EXPECT_NEAR(normalized_margin(p.theta, data), p.gamma, 1e-9);
  for (Index i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = data.x(i % data.n()) * 0.3;
    EXPECT_NEAR(forward(p.theta, x), p.gamma * p(x), 1e-12);
  }
}

TEST(Orthosep, SingleClass) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0.1, 0.9, -0.2, 0.8, 0.3;
  const auto data = make_dataset<double>(X, Eigen::VectorXd::Ones(3));
  const auto p = orthosep_predicted_function(data);
  EXPECT_FALSE(p.w_neg.has_value());
  const Eigen::Vector2d x(0.5, 0.5);
  EXPECT_NEAR(p(x), std::max(0.0, p.w_pos.dot(x)), 1e-15);
}

TEST(Orthosep, RejectsOtherData) {
  try {
    orthosep_predicted_function(fig1_examples().right);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotOrthogonallySeparable);
  }
}

}  // namespace
}  // namespace marginlab
