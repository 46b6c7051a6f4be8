#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "riskmpc/risk_core.hpp"

namespace riskmpc {

/// Lattice of nx * ny sample points spanning [x_min, x_max] x [y_min, y_max],
/// endpoints included.
struct GridSpec {
  double x_min = 0.0;
  double x_max = 120.0;
  double y_min = -20.0;
  double y_max = 20.0;
  int nx = 481;
  int ny = 161;

  double dx() const { return (x_max - x_min) / (nx - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  double x_at(int i) const { return x_min + i * dx(); }
  double y_at(int j) const { return y_min + j * dy(); }
};

void validate(const GridSpec& g);

/// Row-major risk values: values[j * nx + i] is the sample at (x_at(i), y_at(j)).
struct RiskMapGrid {
  GridSpec spec;
  std::vector<double> values;
  Vec2 ego_velocity;

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(j) * spec.nx + i];
  }
};

/// Counterfactual ego used at every sample point.
struct CounterfactualEgo {
  Vec2 velocity;
  DiagCov pos_cov;
  DiagCov vel_cov;
};

/// Aggregated risk at every lattice point, cells evaluated in parallel.
/// Throws std::invalid_argument on an empty neighbor list or size mismatch.
RiskMapGrid compute_risk_map(const GridSpec& spec, const CounterfactualEgo& ego,
                             std::span<const NoisyAgentState> others,
                             std::span<const RiskParams> per_pair);

/// Single-threaded reference of compute_risk_map.
RiskMapGrid compute_risk_map_serial(const GridSpec& spec,
                                    const CounterfactualEgo& ego,
                                    std::span<const NoisyAgentState> others,
                                    std::span<const RiskParams> per_pair);

struct Polyline {
  std::vector<Vec2> points;
  bool closed = false;
};

/// Zero level set by marching squares with linear edge interpolation.
/// Saddles are resolved by the sign of the mean of the four corners.
std::vector<Polyline> extract_zero_contour(const RiskMapGrid& grid);

/// Area of samples with risk > 0 (each sample weighted by dx * dy),
/// filtered by a predicate on the sample position.
template <typename Pred>
double positive_area(const RiskMapGrid& grid, Pred&& keep) {
  double area = 0.0;
  const double cell = grid.spec.dx() * grid.spec.dy();
  for (int j = 0; j < grid.spec.ny; ++j) {
    for (int i = 0; i < grid.spec.nx; ++i) {
      if (grid.at(i, j) > 0.0 && keep(grid.spec.x_at(i), grid.spec.y_at(j))) {
        area += cell;
      }
    }
  }
  return area;
}

/// CSV with header "x,y,risk". Throws std::runtime_error naming the path on
/// I/O failure.
void export_grid_csv(const RiskMapGrid& grid, const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian). Top image row is y_max.
/// pixel = round((risk - offset) * scale), recorded in a comment line.
void export_grid_pgm(const RiskMapGrid& grid, const std::filesystem::path& path);

/// CSV with header "polyline,x,y".
void export_contour_csv(std::span<const Polyline> contour,
                        const std::filesystem::path& path);

/// Reads a grid back from export_grid_csv output; the lattice is
/// recovered from the distinct coordinates.
RiskMapGrid read_grid_csv(const std::filesystem::path& path);

}  // namespace riskmpc
