#include "riskmpc/risk_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "riskmpc/text_format.hpp"

namespace riskmpc {

void validate(const GridSpec& g) {
  if (!(g.x_max > g.x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
  if (!(g.y_max > g.y_min)) throw std::invalid_argument("grid: y_max must exceed y_min");
  if (g.nx < 2 || g.ny < 2) throw std::invalid_argument("grid: nx and ny must be >= 2");
}

namespace {

void check_inputs(const GridSpec& spec, std::span<const NoisyAgentState> others,
                  std::span<const RiskParams> per_pair) {
  validate(spec);
  if (others.empty()) {
    throw std::invalid_argument("compute_risk_map: at least one neighbor required");
  }
  if (others.size() != per_pair.size()) {
    throw std::invalid_argument("compute_risk_map: neighbor/params size mismatch");
  }
}

double cell_risk(const GridSpec& spec, const CounterfactualEgo& ego,
                 std::span<const NoisyAgentState> others,
                 std::span<const RiskParams> per_pair, int i, int j) {
  const NoisyAgentState e{{spec.x_at(i), spec.y_at(j)}, ego.velocity,
                          ego.pos_cov, ego.vel_cov};
  // non-empty, so always engaged
  return *aggregate_risk(e, others, per_pair);
}

RiskMapGrid make_grid(const GridSpec& spec, const CounterfactualEgo& ego) {
  RiskMapGrid grid{spec, {}, ego.velocity};
  grid.values.resize(static_cast<std::size_t>(spec.nx) * spec.ny);
  return grid;
}

}  // namespace

RiskMapGrid compute_risk_map(const GridSpec& spec, const CounterfactualEgo& ego,
                             std::span<const NoisyAgentState> others,
                             std::span<const RiskParams> per_pair) {
  check_inputs(spec, others, per_pair);
  RiskMapGrid grid = make_grid(spec, ego);
  const int nx = spec.nx;
  const long long total = static_cast<long long>(nx) * spec.ny;
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < total; ++k) {
    const int i = static_cast<int>(k % nx);
    const int j = static_cast<int>(k / nx);
    grid.values[static_cast<std::size_t>(k)] =
        cell_risk(spec, ego, others, per_pair, i, j);
  }
  return grid;
}

RiskMapGrid compute_risk_map_serial(const GridSpec& spec,
                                    const CounterfactualEgo& ego,
                                    std::span<const NoisyAgentState> others,
                                    std::span<const RiskParams> per_pair) {
  check_inputs(spec, others, per_pair);
  RiskMapGrid grid = make_grid(spec, ego);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      grid.values[static_cast<std::size_t>(j) * spec.nx + i] =
          cell_risk(spec, ego, others, per_pair, i, j);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Marching squares

namespace {

// Edge keys: 2 * node + 0 for the horizontal edge node -> node + (1, 0),
// 2 * node + 1 for the vertical edge node -> node + (0, 1).
using EdgeKey = std::int64_t;

struct Segment {
  EdgeKey a, b;
};

Vec2 edge_point(const RiskMapGrid& g, EdgeKey key) {
  const std::int64_t node = key / 2;
  const int i = static_cast<int>(node % g.spec.nx);
  const int j = static_cast<int>(node / g.spec.nx);
  const bool vertical = key % 2 == 1;
  const int i2 = vertical ? i : i + 1;
  const int j2 = vertical ? j + 1 : j;
  const double va = g.at(i, j);
  const double vb = g.at(i2, j2);
  const double t = va / (va - vb);
  return {g.spec.x_at(i) + t * (g.spec.x_at(i2) - g.spec.x_at(i)),
          g.spec.y_at(j) + t * (g.spec.y_at(j2) - g.spec.y_at(j))};
}

}  // namespace

std::vector<Polyline> extract_zero_contour(const RiskMapGrid& grid) {
  const int nx = grid.spec.nx;
  const int ny = grid.spec.ny;
  auto node = [nx](int i, int j) { return static_cast<std::int64_t>(j) * nx + i; };

  std::vector<Segment> segments;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double v00 = grid.at(i, j), v10 = grid.at(i + 1, j);
      const double v11 = grid.at(i + 1, j + 1), v01 = grid.at(i, j + 1);
      const int c = (v00 > 0) | (v10 > 0) << 1 | (v11 > 0) << 2 | (v01 > 0) << 3;
      if (c == 0 || c == 15) continue;

      const EdgeKey bottom = 2 * node(i, j);
      const EdgeKey right = 2 * node(i + 1, j) + 1;
      const EdgeKey top = 2 * node(i, j + 1);
      const EdgeKey left = 2 * node(i, j) + 1;

      if (c == 5 || c == 10) {
        const bool center_pos = 0.25 * (v00 + v10 + v11 + v01) > 0.0;
        // Cut around the corners whose sign differs from the center.
        const bool cut_00_11 = (c == 5) != center_pos;
        if (cut_00_11) {
          segments.push_back({bottom, left});
          segments.push_back({right, top});
        } else {
          segments.push_back({bottom, right});
          segments.push_back({left, top});
        }
        continue;
      }
      EdgeKey found[2];
      int n = 0;
      if ((c & 1) != (c >> 1 & 1)) found[n++] = bottom;
      if ((c >> 1 & 1) != (c >> 2 & 1)) found[n++] = right;
      if ((c >> 2 & 1) != (c >> 3 & 1)) found[n++] = top;
      if ((c >> 3 & 1) != (c & 1)) found[n++] = left;
      segments.push_back({found[0], found[1]});
    }
  }

  // Each crossing point is shared by at most two segments.
  std::unordered_map<EdgeKey, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].a].push_back(s);
    incident[segments[s].b].push_back(s);
  }

  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> out;

  auto walk = [&](std::size_t seg, EdgeKey start) {
    Polyline line;
    line.points.push_back(edge_point(grid, start));
    EdgeKey cur = start;
    std::size_t s = seg;
    while (true) {
      used[s] = true;
      const EdgeKey next = segments[s].a == cur ? segments[s].b : segments[s].a;
      line.points.push_back(edge_point(grid, next));
      cur = next;
      const auto& inc = incident[cur];
      std::size_t nxt = segments.size();
      for (std::size_t cand : inc) {
        if (!used[cand]) nxt = cand;
      }
      if (nxt == segments.size()) {
        line.closed = cur == start && line.points.size() > 2;
        break;
      }
      s = nxt;
    }
    if (line.closed) line.points.pop_back();
    out.push_back(std::move(line));
  };

  // Open polylines start at boundary crossings (degree 1).
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    for (EdgeKey end : {segments[s].a, segments[s].b}) {
      if (!used[s] && incident[end].size() == 1) walk(s, end);
    }
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) walk(s, segments[s].a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::ofstream open_for_write(const std::filesystem::path& path, bool binary) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  return f;
}

void finish(std::ofstream& f, const std::filesystem::path& path) {
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void export_grid_csv(const RiskMapGrid& grid, const std::filesystem::path& path) {
  std::ofstream f = open_for_write(path, false);
  f << "x,y,risk\n";
  for (int j = 0; j < grid.spec.ny; ++j) {
    for (int i = 0; i < grid.spec.nx; ++i) {
      f << format_double(grid.spec.x_at(i)) << ',' << format_double(grid.spec.y_at(j))
        << ',' << format_double(grid.at(i, j)) << '\n';
    }
  }
  finish(f, path);
}

void export_grid_pgm(const RiskMapGrid& grid, const std::filesystem::path& path) {
  const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double offset = *lo;
  const double scale = *hi > *lo ? 65535.0 / (*hi - *lo) : 0.0;

  std::ofstream f = open_for_write(path, true);
  f << "P5\n# affine: offset=" << format_double(offset)
    << " scale=" << format_double(scale) << '\n'
    << grid.spec.nx << ' ' << grid.spec.ny << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(grid.spec.nx) * 2);
  for (int j = grid.spec.ny - 1; j >= 0; --j) {
    for (int i = 0; i < grid.spec.nx; ++i) {
      const double p = std::round((grid.at(i, j) - offset) * scale);
      const auto px = static_cast<std::uint16_t>(std::clamp(p, 0.0, 65535.0));
      row[2 * i] = static_cast<unsigned char>(px >> 8);
      row[2 * i + 1] = static_cast<unsigned char>(px & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  }
  finish(f, path);
}

void export_contour_csv(std::span<const Polyline> contour,
                        const std::filesystem::path& path) {
  std::ofstream f = open_for_write(path, false);
  f << "polyline,x,y\n";
  for (std::size_t k = 0; k < contour.size(); ++k) {
    const auto& pts = contour[k].points;
    for (const Vec2& p : pts) {
      f << k << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
    }
    if (contour[k].closed && !pts.empty()) {
      f << k << ',' << format_double(pts.front().x) << ','
        << format_double(pts.front().y) << '\n';
    }
  }
  finish(f, path);
}

RiskMapGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(f, line) || split_csv_line(line) !=
      std::vector<std::string_view>{"x", "y", "risk"}) {
    throw std::runtime_error(path.string() + ": expected header x,y,risk");
  }
  struct Row {
    double x, y, r;
  };
  std::vector<Row> rows;
  std::set<double> xs, ys;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw std::runtime_error(path.string() + ": bad row " + std::to_string(rows.size() + 2));
    }
    Row r{parse_double(fields[0]), parse_double(fields[1]), parse_double(fields[2])};
    xs.insert(r.x);
    ys.insert(r.y);
    rows.push_back(r);
  }
  if (xs.size() < 2 || ys.size() < 2 || rows.size() != xs.size() * ys.size()) {
    throw std::runtime_error(path.string() + ": not a complete lattice");
  }
  RiskMapGrid g;
  g.spec = {*xs.begin(), *xs.rbegin(), *ys.begin(), *ys.rbegin(),
            static_cast<int>(xs.size()), static_cast<int>(ys.size())};
  g.values.assign(rows.size(), 0.0);
  std::map<double, int> xi, yi;
  int k = 0;
  for (double x : xs) xi[x] = k++;
  k = 0;
  for (double y : ys) yi[y] = k++;
  for (const Row& r : rows) {
    g.values[static_cast<std::size_t>(yi[r.y]) * g.spec.nx + xi[r.x]] = r.r;
  }
  return g;
}

}  // namespace riskmpc
