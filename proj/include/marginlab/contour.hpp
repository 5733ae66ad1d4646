#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "marginlab/net_core.hpp"

namespace marginlab {

struct GridSpec {
  double x_min = -1;
  double x_max = 1;
  double y_min = -1;
  double y_max = 1;
  Index nx = 200;  // sample columns
  Index ny = 200;  // sample rows

  double x(Index j) const;
  double y(Index i) const;
  double cell_diagonal() const;
};

// Maps plane coordinates (s, t) to origin + s u + t v.
struct PlaneSlice {
  Eigen::VectorXd origin;
  Eigen::VectorXd u;
  Eigen::VectorXd v;

  Eigen::VectorXd point(double s, double t) const;
};

// Coordinate plane of the first two axes; for d > 2 the remaining
// coordinates are taken from `fixed` (zero when empty).
PlaneSlice coordinate_plane(Index d, const Eigen::VectorXd& fixed = {});

using Polyline = std::vector<Eigen::Vector2d>;

struct ContourArtifact {
  GridSpec grid;
  Eigen::MatrixXd values;  // ny x nx, values(i, j) = f at (x(j), y(i))
  std::vector<Polyline> polylines;
  bool degenerate = false;  // no sign change anywhere
};

// Marching squares for the level set f = 0 with the sign test f > 0.
// Crossings are placed by linear interpolation along cell edges.
ContourArtifact extract_contour(const std::function<double(double, double)>& f,
                                const GridSpec& grid);
ContourArtifact extract_contour(const Eigen::MatrixXd& values,
                                const GridSpec& grid);

ContourArtifact net_contour(const NetParams<double>& theta,
                            const PlaneSlice& plane, const GridSpec& grid);

Polyline douglas_peucker(const Polyline& line, double eps);

// Every polyline vertex lies on a cell edge whose endpoints have different
// signs, at the interpolated position.
bool marching_squares_consistent(const ContourArtifact& c, double tol = 1e-9);

// Largest distance from a polyline vertex to its total-least-squares line.
double line_fit_residual(const Polyline& line);

struct SvgPoint {
  double x = 0;
  double y = 0;
  int label = 1;
};

void write_contour_svg(const std::string& path, const ContourArtifact& c,
                       const std::vector<SvgPoint>& points = {});
void write_raster_csv(const std::string& path, const ContourArtifact& c);

}  // namespace marginlab
