#pragma once

#include "pdecay/constants.hpp"
#include "pdecay/generator.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdecay::cli {

/// Bad flags or config values; maps to exit code 64.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string backend = "ou";
  int m = 24;
  /// 0 selects 8 m.
  int quad_nodes = 0;
  std::string potential = "gaussian";
  std::optional<std::pair<double, double>> interval;
  int n = 401;

  std::uint64_t seed = 20240101;
  std::string family = "eigen-mixtures";
  int count = 200;
  std::vector<double> p{2.0, 4.0};
  int t_points = 40;
  /// 0 selects 10 / gap.
  double t_end = 0.0;
  std::optional<double> slack;
  double grid_slack = 0.02;
  /// Skips the backend for `bounds` when set.
  std::optional<double> c_p;
  std::string out = ".";

  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::vector<DecayBound> extra_bounds;

  /// Slack for inequality checks: explicit value, else 1e-8 (ou) or grid_slack.
  double effective_slack() const;
};

/// Reads the JSON document (kebab-case keys) on top of the defaults.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

/// Enforces p > 1, n >= 3, m >= 2 and friends.
void validate(const RunConfig& c);

std::vector<double> parse_real_list(const std::string& text);
/// "p:lambda:K" or "p:lambda:K:source"; the source defaults to probe.
DecayBound parse_bound(const std::string& text);

struct Potential {
  std::string name;
  std::function<double(double)> v;
  double a = 0.0;
  double b = 1.0;
  /// Spectral gap of the continuum diffusion when known in closed form.
  std::optional<double> continuum_gap;
};

/// gaussian, uniform, quartic, double-well or poly:c0,c1,...
Potential parse_potential(const std::string& text,
                          const std::optional<std::pair<double, double>>& interval);

/// Throws ConstructionError for any failure while building.
GeneratorRep build_backend(const RunConfig& c);
nlohmann::json describe_backend(const RunConfig& c);

}  // namespace pdecay::cli
