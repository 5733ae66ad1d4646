#include "marginlab/contour.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace marginlab {

double GridSpec::x(Index j) const {
  return nx < 2 ? x_min : x_min + (x_max - x_min) * j / (nx - 1);
}

double GridSpec::y(Index i) const {
  return ny < 2 ? y_min : y_min + (y_max - y_min) * i / (ny - 1);
}

double GridSpec::cell_diagonal() const {
  const double dx = (x_max - x_min) / std::max<Index>(1, nx - 1);
  const double dy = (y_max - y_min) / std::max<Index>(1, ny - 1);
  return std::hypot(dx, dy);
}

Eigen::VectorXd PlaneSlice::point(double s, double t) const {
  return origin + s * u + t * v;
}

PlaneSlice coordinate_plane(Index d, const Eigen::VectorXd& fixed) {
  if (d < 2) throw Error(ErrorCode::kInvalidArgument, "need d >= 2");
  if (fixed.size() != 0 && fixed.size() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "fixed must have d entries");
  }
  PlaneSlice p;
  p.origin = fixed.size() ? fixed : Eigen::VectorXd::Zero(d);
  p.origin(0) = 0;
  p.origin(1) = 0;
  p.u = Eigen::VectorXd::Unit(d, 0);
  p.v = Eigen::VectorXd::Unit(d, 1);
  return p;
}

namespace {

// Edge ids: horizontal edge (i, j)-(i, j+1) and vertical edge (i, j)-(i+1, j).
struct EdgeKey {
  Index i;
  Index j;
  bool vertical;
  bool operator<(const EdgeKey& o) const {
    if (i != o.i) return i < o.i;
    if (j != o.j) return j < o.j;
    return vertical < o.vertical;
  }
  bool operator==(const EdgeKey& o) const {
    return i == o.i && j == o.j && vertical == o.vertical;
  }
};

Eigen::Vector2d crossing(const Eigen::MatrixXd& v, const GridSpec& g,
                         const EdgeKey& e) {
  const double f0 = v(e.i, e.j);
  const double f1 = e.vertical ? v(e.i + 1, e.j) : v(e.i, e.j + 1);
  const double t = f0 == f1 ? 0.5 : f0 / (f0 - f1);
  if (e.vertical) {
    return {g.x(e.j), g.y(e.i) + t * (g.y(e.i + 1) - g.y(e.i))};
  }
  return {g.x(e.j) + t * (g.x(e.j + 1) - g.x(e.j)), g.y(e.i)};
}

}  // namespace

ContourArtifact extract_contour(const Eigen::MatrixXd& values,
                                const GridSpec& grid) {
  if (values.rows() != grid.ny || values.cols() != grid.nx) {
    throw Error(ErrorCode::kDimensionMismatch, "raster does not match grid");
  }
  ContourArtifact c;
  c.grid = grid;
  c.values = values;
  const auto pos = [&](Index i, Index j) { return values(i, j) > 0; };

  std::vector<std::pair<EdgeKey, EdgeKey>> segs;
  for (Index i = 0; i + 1 < grid.ny; ++i) {
    for (Index j = 0; j + 1 < grid.nx; ++j) {
      // Corners counter-clockwise from bottom-left.
      const bool b0 = pos(i, j);
      const bool b1 = pos(i, j + 1);
      const bool b2 = pos(i + 1, j + 1);
      const bool b3 = pos(i + 1, j);
      const EdgeKey bottom{i, j, false};
      const EdgeKey right{i, j + 1, true};
      const EdgeKey top{i + 1, j, false};
      const EdgeKey left{i, j, true};
      std::vector<EdgeKey> hits;
      if (b0 != b1) hits.push_back(bottom);
      if (b1 != b2) hits.push_back(right);
      if (b2 != b3) hits.push_back(top);
      if (b3 != b0) hits.push_back(left);
      if (hits.size() == 2) {
        segs.emplace_back(hits[0], hits[1]);
      } else if (hits.size() == 4) {
        const double center = 0.25 * (values(i, j) + values(i, j + 1) +
                                      values(i + 1, j + 1) + values(i + 1, j));
        // Connect so that the center's sign region stays connected.
        if ((center > 0) == b0) {
          segs.emplace_back(bottom, right);
          segs.emplace_back(top, left);
        } else {
          segs.emplace_back(bottom, left);
          segs.emplace_back(right, top);
        }
      }
    }
  }

  std::map<EdgeKey, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    incident[segs[s].first].push_back(s);
    incident[segs[s].second].push_back(s);
  }
  std::vector<bool> used(segs.size(), false);
  auto other = [&](std::size_t s, const EdgeKey& e) {
    return segs[s].first == e ? segs[s].second : segs[s].first;
  };
  auto walk = [&](std::size_t s, EdgeKey from, Polyline& line) {
    EdgeKey cur = from;
    while (true) {
      used[s] = true;
      cur = other(s, cur);
      line.push_back(crossing(values, grid, cur));
      std::optional<std::size_t> next;
      for (std::size_t t : incident[cur]) {
        if (!used[t]) next = t;
      }
      if (!next) break;
      s = *next;
    }
  };
  // Open chains first, starting from edges with a single segment.
  for (const auto& [key, list] : incident) {
    if (list.size() != 1 || used[list[0]]) continue;
    Polyline line{crossing(values, grid, key)};
    walk(list[0], key, line);
    c.polylines.push_back(std::move(line));
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (used[s]) continue;
    Polyline line{crossing(values, grid, segs[s].first)};
    walk(s, segs[s].first, line);
    c.polylines.push_back(std::move(line));
  }
  c.degenerate = c.polylines.empty();
  return c;
}

ContourArtifact extract_contour(const std::function<double(double, double)>& f,
                                const GridSpec& grid) {
  if (grid.nx < 2 || grid.ny < 2) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs at least 2x2 samples");
  }
  Eigen::MatrixXd v(grid.ny, grid.nx);
  for (Index i = 0; i < grid.ny; ++i) {
    for (Index j = 0; j < grid.nx; ++j) v(i, j) = f(grid.x(j), grid.y(i));
  }
  return extract_contour(v, grid);
}

ContourArtifact net_contour(const NetParams<double>& theta,
                            const PlaneSlice& plane, const GridSpec& grid) {
  check_dims(theta, plane.origin.size());
  return extract_contour(
      [&](double s, double t) {
        return forward(theta, Eigen::VectorXd(plane.point(s, t)));
      },
      grid);
}

namespace {

double point_segment_distance(const Eigen::Vector2d& p,
                              const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void dp_recurse(const Polyline& line, std::size_t lo, std::size_t hi,
                double eps, std::vector<bool>& keep) {
  if (hi <= lo + 1) return;
  double best = -1;
  std::size_t idx = lo;
  for (std::size_t k = lo + 1; k < hi; ++k) {
    const double dist = point_segment_distance(line[k], line[lo], line[hi]);
    if (dist > best) {
      best = dist;
      idx = k;
    }
  }
  if (best > eps) {
    keep[idx] = true;
    dp_recurse(line, lo, idx, eps, keep);
    dp_recurse(line, idx, hi, eps, keep);
  }
}

}  // namespace

Polyline douglas_peucker(const Polyline& line, double eps) {
  if (line.size() < 3) return line;
  std::vector<bool> keep(line.size(), false);
  keep.front() = true;
  keep.back() = true;
  dp_recurse(line, 0, line.size() - 1, eps, keep);
  Polyline out;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (keep[k]) out.push_back(line[k]);
  }
  return out;
}

bool marching_squares_consistent(const ContourArtifact& c, double tol) {
  const GridSpec& g = c.grid;
  const double dx = (g.x_max - g.x_min) / (g.nx - 1);
  const double dy = (g.y_max - g.y_min) / (g.ny - 1);
  const auto pos = [&](Index i, Index j) { return c.values(i, j) > 0; };
  for (const Polyline& line : c.polylines) {
    for (const Eigen::Vector2d& p : line) {
      const double fi = (p.y() - g.y_min) / dy;
      const double fj = (p.x() - g.x_min) / dx;
      const Index ri = static_cast<Index>(std::llround(fi));
      const Index rj = static_cast<Index>(std::llround(fj));
      bool ok = false;
      // On a horizontal edge.
      if (std::abs(fi - ri) <= tol && ri >= 0 && ri < g.ny) {
        const Index j = std::clamp<Index>(static_cast<Index>(std::floor(fj)),
                                          0, g.nx - 2);
        for (Index jj : {j, std::max<Index>(0, j - 1)}) {
          if (jj + 1 >= g.nx || pos(ri, jj) == pos(ri, jj + 1)) continue;
          const Eigen::Vector2d q = crossing(c.values, g, {ri, jj, false});
          if ((q - p).norm() <= tol * std::max(dx, dy)) ok = true;
        }
      }
      // On a vertical edge.
      if (!ok && std::abs(fj - rj) <= tol && rj >= 0 && rj < g.nx) {
        const Index i = std::clamp<Index>(static_cast<Index>(std::floor(fi)),
                                          0, g.ny - 2);
        for (Index ii : {i, std::max<Index>(0, i - 1)}) {
          if (ii + 1 >= g.ny || pos(ii, rj) == pos(ii + 1, rj)) continue;
          const Eigen::Vector2d q = crossing(c.values, g, {ii, rj, true});
          if ((q - p).norm() <= tol * std::max(dx, dy)) ok = true;
        }
      }
      if (!ok) return false;
    }
  }
  return true;
}

double line_fit_residual(const Polyline& line) {
  if (line.size() < 3) return 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : line) mean += p;
  mean /= static_cast<double>(line.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : line) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d normal = es.eigenvectors().col(0);
  double worst = 0;
  for (const auto& p : line) {
    worst = std::max(worst, std::abs((p - mean).dot(normal)));
  }
  return worst;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_contour_svg(const std::string& path, const ContourArtifact& c,
                       const std::vector<SvgPoint>& points) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const GridSpec& g = c.grid;
  const double size = 500;
  const auto px = [&](double x) {
    return (x - g.x_min) / (g.x_max - g.x_min) * size;
  };
  const auto py = [&](double y) {
    return size - (y - g.y_min) / (g.y_max - g.y_min) * size;
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << " " << size
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const Polyline& line : c.polylines) {
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" "
           "points=\"";
    for (const auto& p : line) out << fmt(px(p.x())) << "," << fmt(py(p.y())) << " ";
    out << "\"/>\n";
  }
  for (const SvgPoint& p : points) {
    out << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.y))
        << "\" r=\"4\" fill=\"" << (p.label > 0 ? "#d33" : "#33d")
        << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_raster_csv(const std::string& path, const ContourArtifact& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "x,y,f\n";
  for (Index i = 0; i < c.grid.ny; ++i) {
    for (Index j = 0; j < c.grid.nx; ++j) {
      out << fmt(c.grid.x(j)) << "," << fmt(c.grid.y(i)) << ","
          << fmt(c.values(i, j)) << "\n";
    }
  }
}

}  // namespace marginlab
