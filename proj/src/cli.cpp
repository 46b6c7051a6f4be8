#include "riskmpc/cli.hpp"

#include <omp.h>

#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "riskmpc/config.hpp"
#include "riskmpc/risk_map.hpp"
#include "riskmpc/sim.hpp"
#include "riskmpc/text_format.hpp"
#include "riskmpc/trace_io.hpp"
#include "riskmpc/trajectory.hpp"

namespace riskmpc {

namespace {

// Validation failures that are not config errors but still map to exit 1.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const long long a = parse_int(std::string_view(text).substr(0, dots));
      const long long b = parse_int(std::string_view(text).substr(dots + 2));
      if (a < 0 || b < a) throw UsageError("--seeds: range must be a..b with 0 <= a <= b");
      for (long long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
    } else {
      for (std::string_view f : split_csv_line(text)) {
        const long long s = parse_int(f);
        if (s < 0) throw UsageError("--seeds: seeds must be non-negative");
        out.push_back(static_cast<std::uint64_t>(s));
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--seeds: ") + e.what());
  }
  return out;
}

std::optional<std::string> stamp(bool suppressed) {
  if (suppressed) return std::nullopt;
  return utc_timestamp();
}

std::vector<RiskParams> riskmap_params(const RunConfig& c) {
  std::vector<RiskParams> out;
  for (const RiskMapNeighbor& n : c.riskmap.neighbors) {
    out.push_back(c.sim.geometry_sizing
                      ? pair_params(c.risk, c.scene.ego.geometry, n.geometry, c.sim.sizing)
                      : c.risk);
  }
  return out;
}

int run_riskmap(const RunConfig& c, const std::string& out, const std::string& pgm,
                const std::string& contour) {
  if (c.riskmap.neighbors.empty()) throw ConfigError("riskmap.neighbors", "riskmap.neighbors must not be empty");
  std::vector<NoisyAgentState> others;
  for (const RiskMapNeighbor& n : c.riskmap.neighbors) {
    others.push_back({n.pos, n.vel, c.sim.neighbor_pos_cov, c.sim.neighbor_vel_cov});
  }
  const auto params = riskmap_params(c);
  const CounterfactualEgo ego{c.riskmap.ego_velocity, c.mpc.ego_pos_cov, c.mpc.ego_vel_cov};
  const RiskMapGrid grid = compute_risk_map(c.riskmap.grid, ego, others, params);
  export_grid_csv(grid, out);
  if (!pgm.empty()) export_grid_pgm(grid, pgm);
  const auto lines = extract_zero_contour(grid);
  if (!contour.empty()) export_contour_csv(lines, contour);
  write_config_echo(c, out);
  std::cout << "riskmap: " << grid.spec.nx << "x" << grid.spec.ny << " samples, " << lines.size()
            << " contour polylines -> " << out << '\n';
  return 0;
}

int run_simulate(RunConfig c, std::optional<int> steps, std::optional<std::uint64_t> seed,
                 const std::string& log, bool no_timestamp) {
  if (steps) {
    if (*steps < 1) throw UsageError("--steps must be >= 1");
    c.sim.steps = *steps;
  }
  if (seed) c.seed = *seed;
  SimConfig sim = c.sim;
  sim.rng_seed = c.seed;
  const HighwayScene scene = scene_for_seed(c, c.seed);
  const SimTrace trace = run_episode(scene, sim, effective_mpc(c), c.risk);
  write_trace(trace, scene.ego().id, log, stamp(no_timestamp));
  write_config_echo(c, log);
  const EpisodeMetrics& m = trace.metrics;
  std::cout << "simulate: avg_speed=" << format_double(m.avg_speed)
            << " long_dist=" << format_double(m.long_dist)
            << " min_dist=" << format_double(m.min_dist) << " collision=" << m.collision << '\n';
  return 0;
}

int run_batch_cmd(RunConfig c, std::optional<int> trials, const std::string& seeds_text,
                  const std::string& out, bool no_timestamp) {
  std::vector<std::uint64_t> seeds;
  if (!seeds_text.empty()) {
    seeds = parse_seeds(seeds_text);
  } else {
    const int n = trials.value_or(10);
    if (n < 1) throw UsageError("--trials must be >= 1");
    for (int k = 0; k < n; ++k) seeds.push_back(c.seed + static_cast<std::uint64_t>(k));
  }
  if (trials && static_cast<std::size_t>(*trials) != seeds.size()) {
    throw UsageError("--trials (" + std::to_string(*trials) + ") does not match the number of seeds (" +
                     std::to_string(seeds.size()) + ")");
  }
  const BatchResult result =
      run_batch(build_scene(c), c.sim, effective_mpc(c), c.risk, c.scene.placement, seeds);
  write_batch_summary(result, out, stamp(no_timestamp));
  write_config_echo(c, out);
  const BatchSummary& s = result.summary;
  std::cout << "batch: " << seeds.size() << " trials, mean avg_speed="
            << format_double(s.avg_speed.mean) << " mean min_dist=" << format_double(s.min_dist.mean)
            << " collisions=" << s.collisions << '\n';
  return 0;
}

int run_replay(RunConfig c, const std::string& dataset, int ego_id, std::optional<int> steps,
               const std::string& log, bool no_timestamp) {
  if (steps) {
    if (*steps < 1) throw UsageError("--steps must be >= 1");
    c.sim.steps = *steps;
  }
  auto streams = load_trajectories(dataset);
  const HighwayScene scene = make_replay_scene(std::move(streams), ego_id, c.scene.lane_count,
                                               c.scene.lane_width, c.scene.road_length);
  MpcConfig mpc = c.mpc;
  mpc.ego_geometry = scene.ego().geometry;
  SimConfig sim = c.sim;
  sim.rng_seed = c.seed;
  const SimTrace trace = run_episode(scene, sim, mpc, c.risk);
  write_trace(trace, ego_id, log, stamp(no_timestamp));
  write_config_echo(c, log);
  const EpisodeMetrics& m = trace.metrics;
  std::cout << "replay: ego " << ego_id << " avg_speed=" << format_double(m.avg_speed)
            << " min_dist=" << format_double(m.min_dist) << " collision=" << m.collision << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Risk-aware highway planning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = omp_get_max_threads();
  bool no_timestamp = false;
  app.add_option("--threads", threads, "Worker threads for parallel kernels")
      ->envname("RISKMPC_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-timestamp", no_timestamp, "Omit the generated= comment line");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration")->required();
  };

  std::string out, pgm, contour, log, dataset, seeds_text;
  std::optional<int> steps, trials;
  std::optional<std::uint64_t> seed;
  int ego_id = 0;

  CLI::App* riskmap = app.add_subcommand("riskmap", "Rasterize the risk field of a static scene");
  add_config(riskmap);
  riskmap->add_option("--out", out, "Grid CSV")->required();
  riskmap->add_option("--pgm", pgm, "16-bit PGM image");
  riskmap->add_option("--contour", contour, "Zero-level contour CSV");

  CLI::App* simulate = app.add_subcommand("simulate", "Run one closed-loop episode");
  add_config(simulate);
  simulate->add_option("--steps", steps, "Override sim.steps");
  simulate->add_option("--seed", seed, "Override seed");
  simulate->add_option("--log", log, "Trace CSV")->required();

  CLI::App* batch = app.add_subcommand("batch", "Run randomized trials");
  add_config(batch);
  batch->add_option("--trials", trials, "Number of trials");
  batch->add_option("--seeds", seeds_text, "Seed list a,b,c or range a..b");
  batch->add_option("--out", out, "Summary CSV")->required();

  CLI::App* replay = app.add_subcommand("replay", "Hand one dataset vehicle to the controller");
  add_config(replay);
  replay->add_option("--dataset", dataset, "Trajectory CSV")->required();
  replay->add_option("--ego-id", ego_id, "Vehicle replaced by the controller")->required();
  replay->add_option("--steps", steps, "Override sim.steps");
  replay->add_option("--log", log, "Trace CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  omp_set_num_threads(threads);
  try {
    const RunConfig c = load_config(config_path);
    if (riskmap->parsed()) return run_riskmap(c, out, pgm, contour);
    if (simulate->parsed()) return run_simulate(c, steps, seed, log, no_timestamp);
    if (batch->parsed()) return run_batch_cmd(c, trials, seeds_text, out, no_timestamp);
    return run_replay(c, dataset, ego_id, steps, log, no_timestamp);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"riskmpc"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  argv.push_back(nullptr);
  return cli_main(static_cast<int>(args.size() + 1), argv.data());
}

}  // namespace riskmpc
