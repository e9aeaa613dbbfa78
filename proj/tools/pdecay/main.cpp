#include "commands.hpp"

#include "pdecay/errors.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace pdecay::cli;

int main(int argc, char** argv) {
  CLI::App app{"Decay rates of Markov semigroups in L^p: gaps, bounds, checks and sweeps"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir, backend, p_list, potential, interval, family, sweep_values;
  double slack = 0.0, grid_slack = 0.0, t_end = 0.0, c_p = 0.0;
  int m = 0, quad_nodes = 0, n = 0, count = 0, t_points = 0;
  std::string sweep_axis;
  std::vector<std::string> extra_bounds;

  auto* o_config = app.add_option("--config", config_path, "JSON run configuration");
  auto* o_seed = app.add_option("--seed", seed, "Seed of the test-function families");
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_backend = app.add_option("--backend", backend, "ou | grid");
  auto* o_p = app.add_option("--p", p_list, "Comma-separated exponents");
  auto* o_slack = app.add_option("--slack", slack, "Relative slack of inequality checks");
  auto* o_grid_slack = app.add_option("--grid-slack", grid_slack, "Default slack on grid backends");
  auto* o_m = app.add_option("--m", m, "Hermite modes of the ou backend");
  auto* o_quad = app.add_option("--quad-nodes", quad_nodes, "Quadrature nodes of the ou backend");
  auto* o_potential = app.add_option("--potential", potential,
                                     "gaussian | uniform | quartic | double-well | poly:c0,c1,...");
  auto* o_interval = app.add_option("--interval", interval, "Grid interval a,b");
  auto* o_n = app.add_option("--n", n, "Grid nodes");
  auto* o_family = app.add_option("--family", family,
                                  "eigen-mixtures | random-smooth | polynomial | sign-balanced");
  auto* o_count = app.add_option("--count", count, "Family size");
  auto* o_t_points = app.add_option("--t-points", t_points, "Points of the time grid");
  auto* o_t_end = app.add_option("--t-end", t_end, "Last time (default 10 / gap)");
  auto* o_c_p = app.add_option("--c-p", c_p, "Poincare constant for `bounds` (skips the backend)");
  auto* o_axis = app.add_option("--sweep-axis", sweep_axis, "n | p");
  auto* o_values = app.add_option("--sweep-values", sweep_values, "Comma-separated axis values");
  auto* o_extra = app.add_option("--extra-bound", extra_bounds,
                                 "Additional envelope p:lambda:K[:source] for verify");

  auto* gap = app.add_subcommand("gap", "Spectral gap and Poincare constant; writes rates.csv");
  auto* bounds = app.add_subcommand("bounds", "Every decay bound per p; writes bounds.json");
  auto* evolve = app.add_subcommand("evolve", "Decay curves of a family; writes curves.csv");
  auto* verify = app.add_subcommand("verify", "Full check suite; writes report.json, report.csv");
  auto* sweep = app.add_subcommand("sweep", "n- or p-sweep; writes sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig c = o_config->count() ? load_config(config_path) : RunConfig{};
    if (o_seed->count()) c.seed = seed;
    if (o_out->count()) c.out = out_dir;
    if (o_backend->count()) c.backend = backend;
    if (o_p->count()) c.p = parse_real_list(p_list);
    if (o_slack->count()) c.slack = slack;
    if (o_grid_slack->count()) c.grid_slack = grid_slack;
    if (o_m->count()) c.m = m;
    if (o_quad->count()) c.quad_nodes = quad_nodes;
    if (o_potential->count()) c.potential = potential;
    if (o_interval->count()) {
      const auto v = parse_real_list(interval);
      if (v.size() != 2) throw UsageError("--interval needs a,b");
      c.interval = std::pair{v[0], v[1]};
    }
    if (o_n->count()) c.n = n;
    if (o_family->count()) c.family = family;
    if (o_count->count()) c.count = count;
    if (o_t_points->count()) c.t_points = t_points;
    if (o_t_end->count()) c.t_end = t_end;
    if (o_c_p->count()) c.c_p = c_p;
    if (o_axis->count()) c.sweep_axis = sweep_axis;
    if (o_values->count()) c.sweep_values = parse_real_list(sweep_values);
    for (const auto& b : extra_bounds) c.extra_bounds.push_back(parse_bound(b));
    validate(c);

    if (gap->parsed()) return cmd_gap(c, std::cout);
    if (bounds->parsed()) return cmd_bounds(c, std::cout);
    if (evolve->parsed()) return cmd_evolve(c, std::cout);
    if (verify->parsed()) return cmd_verify(c, std::cout);
    if (sweep->parsed()) return cmd_sweep(c, std::cout);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const pdecay::NonErgodicError& e) {
    std::cerr << "non-ergodic: " << e.what() << '\n';
    return kExitNonErgodic;
  } catch (const pdecay::ConstructionError& e) {
    std::cerr << "construction failed: " << e.what() << '\n';
    return kExitConstruction;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConstruction;
  }
}
