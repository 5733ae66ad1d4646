#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

#include "marginlab/net_core.hpp"

namespace marginlab {

struct SymmetrizeResult {
  Dataset<double> data;
  bool input_was_symmetric = false;
};

// Originals first, then (-x_i, -y_i).
SymmetrizeResult symmetrize(const Dataset<double>& data);

struct HintedParams {
  double H = 0;
  double K = 0;
  double eps = 0;
  Eigen::VectorXd w_perp;
};

// Quantities derived while building or validating hints.
struct HintedInfo {
  HintedParams params;
  Eigen::VectorXd w_star;  // separator of the base set
  double gamma_orig = 0;   // base-set margin of w_star
  double H0 = 0;
  double H_required = 0;   // smallest H with H > n|mu-| + |sum y x+|
  double rescale = 1;      // factor applied after prepending the hints
};

// Parameters chosen with slack 0.5 on eps and 1.01 on H.
HintedParams auto_hinted_params(const Dataset<double>& data, double alpha,
                                HintedInfo* info = nullptr);

// Throws InvalidHintParams naming the first violated condition.
void validate_hinted_params(const Dataset<double>& data, double alpha,
                            const HintedParams& params,
                            HintedInfo* info = nullptr);

// Prepends (H w*, +1), (eps w* + K w_perp, +1), (eps w* - K w_perp, +1) and
// rescales the result into the unit ball.
Dataset<double> make_hinted(const Dataset<double>& data, double alpha,
                            const std::optional<HintedParams>& params,
                            HintedInfo* info = nullptr);

// Def-style predicate: same-label products > 0, cross-label products <= 0.
bool is_orthogonally_separable(const Dataset<double>& data);

Dataset<double> gen_orthogonally_separable(Index n_per_class, Index d,
                                           double cone_halfangle,
                                           std::uint64_t seed);

// Output has d + 1 coordinates: the last one is the constant 0.1 before
// rescaling.
Dataset<double> gen_gaussian_halfspace(Index n, Index d, double margin_gap,
                                       std::uint64_t seed);

// Root in (0, pi/2) of
// (2 sin^2 b + cos b) a^2 - (1 + cos b) a + cos 2b = 0.
double kink_example_beta(double alpha);

// Symmetric planar set whose three-neuron KKT direction bends.
Dataset<double> kink_example_dataset(double alpha);

struct Fig1Examples {
  Dataset<double> left;
  Dataset<double> middle;
  Dataset<double> right;
  Dataset<double> right_base;
  double alpha = 0.5;
};

Fig1Examples fig1_examples();

// CSV with header x0..x{d-1},y and an optional "# provenance: {json}" line.
Dataset<double> read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset<double>& data);

}  // namespace marginlab
