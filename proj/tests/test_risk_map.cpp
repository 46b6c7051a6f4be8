#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "riskmpc/risk_map.hpp"

using namespace riskmpc;
namespace fs = std::filesystem;

namespace {

const RiskParams kParams{1.0, 0.1, 2.0, 5.0, 0.0};

GridSpec small_grid() { return {0.0, 100.0, -12.0, 12.0, 201, 97}; }

RiskMapGrid single_neighbor_map(const GridSpec& spec, Vec2 nb_pos, Vec2 nb_vel, double cov = 0.0,
                                Vec2 ego_vel = {15, 0}) {
  const std::vector<NoisyAgentState> others{{nb_pos, nb_vel, {cov, cov}, {cov, cov}}};
  const std::vector<RiskParams> ps{kParams};
  return compute_risk_map(spec, {ego_vel, {}, {}}, others, ps);
}

int index_of(double v, double lo, double step) { return static_cast<int>(std::lround((v - lo) / step)); }

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("riskmpc_test_" + name);
}

RiskMapGrid handmade(int nx, int ny, std::vector<double> values) {
  RiskMapGrid g;
  g.spec = {0.0, double(nx - 1), 0.0, double(ny - 1), nx, ny};
  g.values = std::move(values);
  return g;
}

}  // namespace

TEST(ComputeRiskMap, Examples) {
  const GridSpec spec{0.0, 100.0, -10.0, 10.0, 401, 81};
  const RiskMapGrid g = single_neighbor_map(spec, {50, 4}, {15, 0});
  const double step = spec.dx();
  const int j4 = index_of(4.0, spec.y_min, spec.dy());
  EXPECT_DOUBLE_EQ(g.at(index_of(50, 0, step), j4), 25.0);
  EXPECT_LT(g.at(0, j4), -2000.0);
  EXPECT_DOUBLE_EQ(g.at(index_of(45, 0, step), j4), g.at(index_of(55, 0, step), j4));
  for (double v : g.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(g.values.size(), 401u * 81u);
}

TEST(ComputeRiskMap, RejectsEmptyNeighborList) {
  EXPECT_THROW(compute_risk_map(small_grid(), {}, {}, {}), std::invalid_argument);
}

TEST(ComputeRiskMap, ParallelMatchesSerial) {
  const std::vector<NoisyAgentState> others{{{40, 0}, {10, 0}, {0.1, 0.1}, {0.1, 0.1}},
                                            {{70, 4}, {15, 1.5}, {0.05, 0.1}, {0.1, 0.02}}};
  const std::vector<RiskParams> ps{kParams, {2.0, 0.05, 1.0, 6.0, 0.3}};
  const CounterfactualEgo ego{{15, 0}, {0.01, 0.01}, {0.02, 0.02}};
  const RiskMapGrid a = compute_risk_map(small_grid(), ego, others, ps);
  const RiskMapGrid b = compute_risk_map_serial(small_grid(), ego, others, ps);
  EXPECT_EQ(a.values, b.values);
}

TEST(RiskMapShape, SymmetricForEqualVelocities) {
  const GridSpec spec{0.0, 120.0, -20.0, 20.0, 481, 161};
  const RiskMapGrid g = single_neighbor_map(spec, {60, 0}, {15, 0}, 0.1);
  double worst = 0.0;
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i) worst = std::max(worst, std::abs(g.at(i, j) - g.at(spec.nx - 1 - i, j)));
  EXPECT_LE(worst, 1e-9);
}

TEST(RiskMapShape, SlowerLeaderBiasesRearward) {
  const RiskMapGrid g = single_neighbor_map({}, {60, 0}, {10, 0}, 0.1);
  const double rear = positive_area(g, [](double x, double) { return x < 60.0; });
  const double front = positive_area(g, [](double x, double) { return x > 60.0; });
  EXPECT_GT(rear, front);
}

TEST(RiskMapShape, LateralVelocityBiasesTowardPositiveY) {
  const RiskMapGrid g = single_neighbor_map({}, {60, 0}, {15, 1.5}, 0.1);
  const double up = positive_area(g, [](double, double y) { return y > 0.0; });
  const double down = positive_area(g, [](double, double y) { return y < 0.0; });
  EXPECT_GT(up, down);
}

TEST(RiskMapShape, NoiseNeverDecreasesAnyCell) {
  const RiskMapGrid lo = single_neighbor_map(small_grid(), {50, 2}, {11, 0.4}, 0.02);
  const RiskMapGrid hi = single_neighbor_map(small_grid(), {50, 2}, {11, 0.4}, 0.2);
  for (std::size_t k = 0; k < lo.values.size(); ++k) EXPECT_GE(hi.values[k], lo.values[k]);
}

TEST(ExtractZeroContour, AllNegativeGivesNothing) {
  EXPECT_TRUE(extract_zero_contour(handmade(3, 3, std::vector<double>(9, -1.0))).empty());
}

TEST(ExtractZeroContour, SinglePositiveCellGivesClosedLoop) {
  std::vector<double> v(25, -1.0);
  v[2 * 5 + 2] = 1.0;
  const auto contour = extract_zero_contour(handmade(5, 5, v));
  ASSERT_EQ(contour.size(), 1u);
  EXPECT_TRUE(contour[0].closed);
  EXPECT_GE(contour[0].points.size(), 4u);
  for (const Vec2& p : contour[0].points) EXPECT_NEAR(std::abs(p.x - 2) + std::abs(p.y - 2), 0.5, 1e-12);
}

TEST(ExtractZeroContour, ApproximatesSafetyEllipse) {
  const GridSpec spec{30.0, 70.0, -15.0, 15.0, 161, 121};
  const RiskMapGrid g = single_neighbor_map(spec, {50, 0}, {15, 0});
  const auto contour = extract_zero_contour(g);
  ASSERT_EQ(contour.size(), 1u);
  EXPECT_TRUE(contour[0].closed);
  const double a = kParams.d_safe, b = kParams.tau * kParams.d_safe;
  const double diag = std::hypot(spec.dx(), spec.dy());
  for (const Vec2& p : contour[0].points) {
    const double dx = p.x - 50.0, dy = p.y;
    const double r = std::hypot(dx, dy);
    const double r_ellipse = 1.0 / std::sqrt(dx * dx / (r * r * a * a) + dy * dy / (r * r * b * b));
    EXPECT_LE(std::abs(r - r_ellipse), 1.5 * diag);
  }
}

TEST(ExportGridCsv, TwoByTwoRowsAndRoundTrip) {
  RiskMapGrid g = handmade(2, 2, {0.1, -2.5, 1e-7, 123456.789012345});
  g.spec = {-1.0, 3.0, 0.5, 1.5, 2, 2};
  const fs::path path = temp_file("grid.csv");
  export_grid_csv(g, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,risk");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
  const RiskMapGrid back = read_grid_csv(path);
  EXPECT_EQ(back.spec.nx, 2);
  EXPECT_EQ(back.spec.ny, 2);
  EXPECT_DOUBLE_EQ(back.spec.x_min, -1.0);
  EXPECT_DOUBLE_EQ(back.spec.y_max, 1.5);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(back.values[k], g.values[k], 1e-9);
  fs::remove(path);
}

TEST(ExportGridCsv, LargeGridRoundTrip) {
  const RiskMapGrid g = single_neighbor_map(small_grid(), {50, 2}, {11, 0.4}, 0.1);
  const fs::path path = temp_file("big.csv");
  export_grid_csv(g, path);
  const RiskMapGrid back = read_grid_csv(path);
  ASSERT_EQ(back.values.size(), g.values.size());
  for (std::size_t k = 0; k < g.values.size(); ++k) EXPECT_NEAR(back.values[k], g.values[k], 1e-9);
  fs::remove(path);
}

TEST(ExportGridCsv, ReportsPathOnFailure) {
  const fs::path bad = "/nonexistent_dir_for_riskmpc/grid.csv";
  try {
    export_grid_csv(handmade(2, 2, {0, 0, 0, 0}), bad);
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(bad.string()), std::string::npos);
  }
}

TEST(ExportGridPgm, ConstantGridIsAllZeros) {
  const fs::path path = temp_file("const.pgm");
  export_grid_pgm(handmade(3, 2, std::vector<double>(6, -4.5)), path);
  std::ifstream in(path, std::ios::binary);
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(comment.rfind("# affine: offset=-4.5 scale=0", 0), 0u) << comment;
  int w, h, maxval;
  in >> w >> h >> maxval;
  in.get();
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 2);
  EXPECT_EQ(maxval, 65535);
  std::string data((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(data, std::string(12, '\0'));
  fs::remove(path);
}

TEST(ExportGridPgm, MapsRangeBigEndianTopRowIsYMax) {
  const fs::path path = temp_file("ramp.pgm");
  export_grid_pgm(handmade(2, 2, {0.0, 1.0, 2.0, 4.0}), path);
  std::ifstream in(path, std::ios::binary);
  std::string line;
  for (int k = 0; k < 4; ++k) std::getline(in, line);
  std::string data((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(data.size(), 8u);
  auto px = [&](int k) {
    return (static_cast<unsigned char>(data[2 * k]) << 8) | static_cast<unsigned char>(data[2 * k + 1]);
  };
  EXPECT_EQ(px(0), static_cast<int>(std::lround(2.0 * 65535.0 / 4.0)));
  EXPECT_EQ(px(1), 65535);
  EXPECT_EQ(px(2), 0);
  EXPECT_EQ(px(3), static_cast<int>(std::lround(65535.0 / 4.0)));
  fs::remove(path);
}

TEST(ExportContourCsv, Header) {
  const std::vector<Polyline> c{{{{0, 0}, {1, 0}, {1, 1}}, true}};
  const fs::path path = temp_file("contour.csv");
  export_contour_csv(c, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "polyline,x,y");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_GE(rows, 3);
  fs::remove(path);
}

TEST(GridSpecValidation, RejectsDegenerate) {
  EXPECT_NO_THROW(validate(GridSpec{}));
  EXPECT_THROW(validate(GridSpec{0, 0, -1, 1, 3, 3}), std::invalid_argument);
  EXPECT_THROW(validate(GridSpec{0, 1, -1, 1, 1, 3}), std::invalid_argument);
}
