#include "marginlab/contour.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "marginlab/analysis.hpp"
#include "marginlab/datasets.hpp"

namespace marginlab {
namespace {

GridSpec small_grid(Index n = 81) {
  GridSpec g;
  g.nx = n;
  g.ny = n;
  return g;
}

std::size_t vertex_count(const ContourArtifact& c) {
  std::size_t total = 0;
  for (const auto& l : c.polylines) total += l.size();
  return total;
}

TEST(Grid, EndpointsAndDiagonal) {
  GridSpec g = small_grid(11);
  EXPECT_DOUBLE_EQ(g.x(0), -1);
  EXPECT_DOUBLE_EQ(g.x(10), 1);
  EXPECT_DOUBLE_EQ(g.y(5), 0);
  EXPECT_NEAR(g.cell_diagonal(), std::sqrt(2.0) * 0.2, 1e-15);
}

TEST(Contour, ValuesFollowRowColumnLayout) {
  const GridSpec g = small_grid(7);
  const auto c = extract_contour([](double x, double y) { return x + 10 * y; }, g);
  ASSERT_EQ(c.values.rows(), 7);
  ASSERT_EQ(c.values.cols(), 7);
  EXPECT_DOUBLE_EQ(c.values(2, 5), g.x(5) + 10 * g.y(2));
}

TEST(Contour, CircleIsClosedAndAccurate) {
  const auto c = extract_contour(
      [](double x, double y) { return x * x + y * y - 0.25; }, small_grid());
  ASSERT_FALSE(c.degenerate);
  ASSERT_EQ(c.polylines.size(), 1u);
  const Polyline& line = c.polylines[0];
  EXPECT_LT((line.front() - line.back()).norm(), 1e-12);
  for (const auto& p : line) EXPECT_NEAR(p.norm(), 0.5, 2e-3);
  EXPECT_TRUE(marching_squares_consistent(c));
}

TEST(Contour, TwoComponents) {
  const auto c = extract_contour(
      [](double x, double) { return x * x - 0.25; }, small_grid());
  EXPECT_EQ(c.polylines.size(), 2u);
  EXPECT_TRUE(marching_squares_consistent(c));
  for (const auto& l : c.polylines) EXPECT_LT(line_fit_residual(l), 1e-12);
}

TEST(Contour, ConsistencyDetectsMovedVertex) {
  auto c = extract_contour([](double x, double y) { return x - 0.3 * y - 0.1; },
                           small_grid(21));
  ASSERT_TRUE(marching_squares_consistent(c));
  c.polylines[0][1] += Eigen::Vector2d(0.01, 0.013);
  EXPECT_FALSE(marching_squares_consistent(c));
}

TEST(Contour, ConstantFunctionsAreDegenerate) {
  EXPECT_TRUE(
      extract_contour([](double, double) { return 1.0; }, small_grid()).degenerate);
  EXPECT_TRUE(
      extract_contour([](double, double) { return 0.0; }, small_grid()).degenerate);
}

TEST(DouglasPeucker, DropsCollinearVertices) {
  Polyline line;
  for (int i = 0; i <= 10; ++i) line.emplace_back(0.1 * i, 0.2 * i);
  const auto out = douglas_peucker(line, 1e-9);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.front(), line.front());
  EXPECT_EQ(out.back(), line.back());
}

TEST(DouglasPeucker, KeepsACorner) {
  const Polyline line = {{0, 0}, {0.5, 0.01}, {1, 0}, {1, 1}};
  const auto out = douglas_peucker(line, 0.05);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[1], Eigen::Vector2d(1, 0));
  EXPECT_EQ(douglas_peucker(line, 1e-3).size(), 4u);
}

TEST(LineFit, ResidualOfAnOffsetPoint) {
  const Polyline line = {{-1, 0}, {0, 0.3}, {1, 0}};
  // The TLS line is y = 0.1; the farthest vertex sits 0.2 away.
  EXPECT_NEAR(line_fit_residual(line), 0.2, 1e-12);
}

TEST(PlaneSliceTest, FixedCoordinates) {
  Eigen::VectorXd fixed(4);
  fixed << 9, 9, 0.3, -0.2;
  const auto plane = coordinate_plane(4, fixed);
  const Eigen::VectorXd p = plane.point(0.5, -0.25);
  EXPECT_EQ(p, (Eigen::Vector4d(0.5, -0.25, 0.3, -0.2)));
  EXPECT_EQ(coordinate_plane(3).point(1, 2), Eigen::Vector3d(1, 2, 0));
}

TEST(NetContour, SymmetricOptimumIsAStraightLine) {
  const auto data = fig1_examples().left;
  const auto g = symmetric_global_max_margin(data, 0.5, 4);
  const GridSpec grid = small_grid();
  const auto c = net_contour(g.theta, coordinate_plane(2), grid);
  ASSERT_EQ(c.polylines.size(), 1u);
  EXPECT_TRUE(marching_squares_consistent(c));
  EXPECT_LE(line_fit_residual(c.polylines[0]), grid.cell_diagonal());
  EXPECT_EQ(douglas_peucker(c.polylines[0], grid.cell_diagonal()).size(), 2u);
  // The line is the separator's null space.
  for (const auto& p : c.polylines[0]) {
    EXPECT_LT(std::abs(g.w_star.dot(p)), 1e-9);
  }
}

TEST(NetContour, KinkNetBends) {
  for (double alpha : {0.0, 0.5}) {
    const GridSpec grid = small_grid(201);
    const auto c =
        net_contour(kink_example_params(alpha), coordinate_plane(2), grid);
    ASSERT_FALSE(c.degenerate);
    EXPECT_TRUE(marching_squares_consistent(c));
    std::size_t segments = 0;
    for (const auto& l : c.polylines) {
      segments += douglas_peucker(l, grid.cell_diagonal()).size() - 1;
    }
    EXPECT_GE(segments, 2u) << alpha;
  }
}

TEST(NetContour, ZeroNetIsDegenerate) {
  const auto c = net_contour(NetParams<double>::Zero(3, 2, 0.5),
                             coordinate_plane(2), small_grid(11));
  EXPECT_TRUE(c.degenerate);
  EXPECT_TRUE(c.polylines.empty());
}

TEST(ContourFiles, SvgAndRaster) {
  const GridSpec grid = small_grid(9);
  const auto c = extract_contour([](double x, double y) { return x - y; }, grid);
  const auto dir = std::filesystem::temp_directory_path() / "marginlab_contour";
  std::filesystem::create_directories(dir);
  const std::string svg = (dir / "c.svg").string();
  const std::string csv = (dir / "r.csv").string();
  write_contour_svg(svg, c, {{0.5, -0.5, 1}, {-0.5, 0.5, -1}});
  write_raster_csv(csv, c);

  std::ifstream s(svg);
  const std::string text((std::istreambuf_iterator<char>(s)), {});
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_NE(text.find("<polyline"), std::string::npos);
  EXPECT_NE(text.find("<circle"), std::string::npos);
  EXPECT_NE(text.find("</svg>"), std::string::npos);

  std::ifstream r(csv);
  std::string line;
  std::getline(r, line);
  EXPECT_EQ(line, "x,y,f");
  int rows = 0;
  while (std::getline(r, line)) {
    if (!line.empty()) ++rows;
  }
  EXPECT_EQ(rows, 81);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace marginlab
