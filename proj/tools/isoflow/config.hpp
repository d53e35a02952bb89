#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "isoflow/errors.hpp"
#include "isoflow/weights.hpp"

namespace isoflow::cli {

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct DensityConfig {
  std::string weight = "zero";  // zero | affine | quadratic | log_power | piecewise_linear
  double slope = 0.0;
  double intercept = 0.0;
  double curvature = 0.0;
  double exponent = 0.0;
  std::vector<double> knots;
  std::vector<double> values;
  double c = 0.5;
  int dim = 2;
  double slab_lo = -kInf;
  double slab_hi = kInf;
  bool allow_nonconcave = false;
  bool operator==(const DensityConfig&) const = default;
};

struct ProfileConfig {
  int grid = 65;
  double endpoint_fraction = 1e-3;
  double volume_tolerance = 1e-10;
  double ode_tolerance = 1e-6;
  double equality_tolerance = 1e-8;
  double interior_fraction = 0.9;
  double tie_tolerance = 1e-8;
  bool operator==(const ProfileConfig&) const = default;
};

struct TransportConfig {
  int nodes = 801;
  double half_width = 0.0;
  double clip = 1e-14;
  double contraction_tolerance = 1e-6;
  double identity_tolerance = 1e-8;
  double derivative_tolerance = 1e-8;
  int intervals = 50;
  double pushforward_tolerance = 1e-8;
  int curves = 100;
  int curve_samples = 201;
  double perimeter_tolerance = 1e-6;
  bool operator==(const TransportConfig&) const = default;
};

struct SpectrumConfig {
  int nodes = 2000;
  double cutoff = 0.0;
  double relative_tolerance = 5e-3;
  bool operator==(const SpectrumConfig&) const = default;
};

struct StabilityConfig {
  double level = std::numeric_limits<double>::quiet_NaN();  // NaN: chosen from the slab
  int nodes = 4001;
  double witness_tolerance = 1e-4;
  double neutral_tolerance = 1e-6;
  int samples = 200;
  int line_nodes = 801;
  double line_x = 0.0;
  double sample_tolerance = 1e-6;
  bool operator==(const StabilityConfig& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return same(level, o.level) && nodes == o.nodes && witness_tolerance == o.witness_tolerance &&
           neutral_tolerance == o.neutral_tolerance && samples == o.samples && line_nodes == o.line_nodes &&
           line_x == o.line_x && sample_tolerance == o.sample_tolerance;
  }
};

struct JacobiConfig {
  std::vector<double> targets{0.0, -1.0};
  double x0 = 0.6;
  double t0 = -0.5;
  double angle = 1.0;
  double length = 2.5;
  std::vector<double> steps{4e-3, 2e-3, 1e-3};
  double min_ratio = 3.5;
  double exact_floor = 1e-12;
  bool operator==(const JacobiConfig&) const = default;
};

struct OptimizeConfig {
  int controls = 12;
  int starts = 1;
  double area_fraction = 0.5;
  double spread = 0.3;
  double max_slope = 1.0;
  double wiggle = 0.05;
  int max_iterations = 500;
  double grad_tolerance = 1e-9;
  double length_tolerance = 5e-3;
  double area_tolerance = 1e-8;
  bool operator==(const OptimizeConfig&) const = default;
};

struct RunSection {
  std::uint64_t seed = 1;
  int threads = 0;  // 0: ISOFLOW_THREADS or 1
  bool operator==(const RunSection&) const = default;
};

struct OutputConfig {
  std::string dir = "isoflow_out";
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  DensityConfig density;
  ProfileConfig profile;
  TransportConfig transport;
  SpectrumConfig spectrum;
  StabilityConfig stability;
  JacobiConfig jacobi;
  OptimizeConfig optimize;
  RunSection run;
  OutputConfig output;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string emit_config(const RunConfig& cfg);

Density make_density(const DensityConfig& cfg);

/// Replaces automatic settings (thread count, stability level) by concrete
/// values so that the echo is complete.
void resolve(RunConfig& cfg, const Density& d);

/// Checks the settings used by `command` against the module preconditions.
void validate(const RunConfig& cfg, const Density& d, std::string_view command);

}  // namespace isoflow::cli
