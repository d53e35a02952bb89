#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "isoflow/io.hpp"
#include "isoflow/parallel.hpp"

namespace isoflow::cli {

namespace {

using FieldRef =
    std::variant<double*, int*, std::uint64_t*, bool*, std::string*, std::vector<double>*>;

struct Field {
  std::string_view section;
  std::string_view key;
  FieldRef ref;
};

std::vector<Field> fields(RunConfig& c) {
  auto& d = c.density;
  auto& p = c.profile;
  auto& t = c.transport;
  auto& s = c.spectrum;
  auto& st = c.stability;
  auto& j = c.jacobi;
  auto& o = c.optimize;
  return {
      {"density", "weight", &d.weight},
      {"density", "slope", &d.slope},
      {"density", "intercept", &d.intercept},
      {"density", "curvature", &d.curvature},
      {"density", "exponent", &d.exponent},
      {"density", "knots", &d.knots},
      {"density", "values", &d.values},
      {"density", "c", &d.c},
      {"density", "dim", &d.dim},
      {"density", "slab_lo", &d.slab_lo},
      {"density", "slab_hi", &d.slab_hi},
      {"density", "allow_nonconcave", &d.allow_nonconcave},

      {"profile", "grid", &p.grid},
      {"profile", "endpoint_fraction", &p.endpoint_fraction},
      {"profile", "volume_tolerance", &p.volume_tolerance},
      {"profile", "ode_tolerance", &p.ode_tolerance},
      {"profile", "equality_tolerance", &p.equality_tolerance},
      {"profile", "interior_fraction", &p.interior_fraction},
      {"profile", "tie_tolerance", &p.tie_tolerance},

      {"transport", "nodes", &t.nodes},
      {"transport", "half_width", &t.half_width},
      {"transport", "clip", &t.clip},
      {"transport", "contraction_tolerance", &t.contraction_tolerance},
      {"transport", "identity_tolerance", &t.identity_tolerance},
      {"transport", "derivative_tolerance", &t.derivative_tolerance},
      {"transport", "intervals", &t.intervals},
      {"transport", "pushforward_tolerance", &t.pushforward_tolerance},
      {"transport", "curves", &t.curves},
      {"transport", "curve_samples", &t.curve_samples},
      {"transport", "perimeter_tolerance", &t.perimeter_tolerance},

      {"spectrum", "nodes", &s.nodes},
      {"spectrum", "cutoff", &s.cutoff},
      {"spectrum", "relative_tolerance", &s.relative_tolerance},

      {"stability", "level", &st.level},
      {"stability", "nodes", &st.nodes},
      {"stability", "witness_tolerance", &st.witness_tolerance},
      {"stability", "neutral_tolerance", &st.neutral_tolerance},
      {"stability", "samples", &st.samples},
      {"stability", "line_nodes", &st.line_nodes},
      {"stability", "line_x", &st.line_x},
      {"stability", "sample_tolerance", &st.sample_tolerance},

      {"jacobi", "targets", &j.targets},
      {"jacobi", "x0", &j.x0},
      {"jacobi", "t0", &j.t0},
      {"jacobi", "angle", &j.angle},
      {"jacobi", "length", &j.length},
      {"jacobi", "steps", &j.steps},
      {"jacobi", "min_ratio", &j.min_ratio},
      {"jacobi", "exact_floor", &j.exact_floor},

      {"optimize", "controls", &o.controls},
      {"optimize", "starts", &o.starts},
      {"optimize", "area_fraction", &o.area_fraction},
      {"optimize", "spread", &o.spread},
      {"optimize", "max_slope", &o.max_slope},
      {"optimize", "wiggle", &o.wiggle},
      {"optimize", "max_iterations", &o.max_iterations},
      {"optimize", "grad_tolerance", &o.grad_tolerance},
      {"optimize", "length_tolerance", &o.length_tolerance},
      {"optimize", "area_tolerance", &o.area_tolerance},

      {"run", "seed", &c.run.seed},
      {"run", "threads", &c.run.threads},

      {"output", "dir", &c.output.dir},
  };
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view text, std::string_view where) {
  const std::string s = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(std::string(where) + ": cannot parse '" + s + "'");
  return value;
}

double parse_double(std::string_view text, std::string_view where) {
  if (trim(text) == "auto") return std::numeric_limits<double>::quiet_NaN();
  const double v = parse_number<double>(text, where);
  if (std::isnan(v)) throw ConfigError(std::string(where) + ": nan is not a valid value");
  return v;
}

std::string format_value(double v) { return std::isnan(v) ? "auto" : format_double(v); }

void assign(const Field& f, const std::string& raw) {
  const std::string where = std::string(f.section) + "." + std::string(f.key);
  std::visit(
      [&](auto* target) {
        using T = std::remove_pointer_t<decltype(target)>;
        if constexpr (std::is_same_v<T, double>) {
          *target = parse_double(raw, where);
        } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          *target = parse_number<T>(raw, where);
        } else if constexpr (std::is_same_v<T, bool>) {
          const auto v = trim(raw);
          if (v == "true") *target = true;
          else if (v == "false") *target = false;
          else throw ConfigError(where + ": expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
          *target = trim(raw);
        } else {
          target->clear();
          std::stringstream ss(raw);
          std::string item;
          while (std::getline(ss, item, ',')) {
            if (trim(item).empty()) continue;
            target->push_back(parse_double(item, where));
          }
        }
      },
      f.ref);
}

std::string render(const Field& f) {
  return std::visit(
      [](auto* v) -> std::string {
        using T = std::remove_pointer_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_value(*v);
        else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) return std::to_string(*v);
        else if constexpr (std::is_same_v<T, bool>) return *v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return *v;
        else {
          std::string out;
          for (std::size_t i = 0; i < v->size(); ++i) out += (i ? ", " : "") + format_value((*v)[i]);
          return out;
        }
      },
      f.ref);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  auto table = fields(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' appears outside a section");
    if (std::none_of(table.begin(), table.end(), [&](const Field& f) { return f.section == section; }))
      throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError("config: unknown key " + section + "." + key);
      assign(*it, value.data());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  std::string_view current;
  for (const auto& f : fields(copy)) {
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + std::string(f.section) + "]\n";
      current = f.section;
    }
    out += std::string(f.key) + " = " + render(f) + "\n";
  }
  return out;
}

Density make_density(const DensityConfig& c) {
  Weight1D w;
  if (c.weight == "zero") w = Weight1D::zero();
  else if (c.weight == "affine") w = Weight1D::affine(c.slope, c.intercept);
  else if (c.weight == "quadratic") w = Weight1D::quadratic(c.curvature, c.slope, c.intercept);
  else if (c.weight == "log_power") w = Weight1D::log_power(c.exponent);
  else if (c.weight == "piecewise_linear") w = Weight1D::piecewise_linear(c.knots, c.values);
  else throw ConfigError("density.weight: unknown weight '" + c.weight + "'");
  for (double v : {c.slope, c.intercept, c.curvature, c.exponent})
    require(std::isfinite(v), "density: weight parameters must be finite");
  Density d(std::move(w), c.c, c.dim, Slab{c.slab_lo, c.slab_hi});
  if (!c.allow_nonconcave) {
    const auto rep = check_concavity(d.weight());
    if (!rep.concave) throw ConfigError("density: weight is not concave (" + rep.detail + ")");
  }
  return d;
}

void resolve(RunConfig& cfg, const Density& d) {
  if (cfg.run.threads <= 0) cfg.run.threads = default_threads();
  if (std::isnan(cfg.stability.level)) {
    const auto& s = d.slab();
    const double scale = 1.0 / std::sqrt(d.c());
    if (s.bounded()) cfg.stability.level = 0.5 * (s.lo + s.hi);
    else if (s.whole_line()) cfg.stability.level = 0.0;
    else if (std::isfinite(s.lo)) cfg.stability.level = s.lo + scale;
    else cfg.stability.level = s.hi - scale;
  }
}

void validate(const RunConfig& cfg, const Density& d, std::string_view command) {
  const bool all = command == "all";
  auto uses = [&](std::string_view name) { return all || command == name; };
  require(cfg.run.threads >= 0, "run.threads must be >= 0");
  require(!cfg.output.dir.empty(), "output.dir must not be empty");
  const bool smooth = d.weight().smoothness() == Smoothness::Smooth;
  const bool planar = d.ambient_dim() == 2;

  if (uses("profile")) {
    const auto& p = cfg.profile;
    require(d.ambient_dim() >= 2, "profile: the perpendicular family needs dim >= 2");
    require(p.grid >= 3, "profile.grid must be >= 3");
    require(p.endpoint_fraction > 0 && p.endpoint_fraction < 0.5, "profile.endpoint_fraction must lie in (0, 0.5)");
    require(p.interior_fraction > 0 && p.interior_fraction <= 1, "profile.interior_fraction must lie in (0, 1]");
    for (double v : {p.volume_tolerance, p.ode_tolerance, p.equality_tolerance, p.tie_tolerance})
      require(v > 0, "profile: tolerances must be positive");
  }
  if (uses("transport")) {
    const auto& t = cfg.transport;
    require(t.nodes >= 3, "transport.nodes must be >= 3");
    require(t.half_width >= 0, "transport.half_width must be >= 0");
    require(t.clip > 0 && t.clip < 0.5, "transport.clip must lie in (0, 0.5)");
    require(t.intervals >= 0 && t.curves >= 0, "transport: counts must be >= 0");
    require(t.curve_samples >= 2, "transport.curve_samples must be >= 2");
    require(t.curves == 0 || planar, "transport: perimeter curves need dim = 2 (set curves = 0)");
  }
  if (uses("spectrum")) {
    require(cfg.spectrum.nodes >= 16, "spectrum.nodes must be >= 16");
    require(cfg.spectrum.cutoff >= 0, "spectrum.cutoff must be >= 0");
    require(cfg.spectrum.relative_tolerance > 0, "spectrum.relative_tolerance must be positive");
  }
  if (uses("stability")) {
    const auto& s = cfg.stability;
    require(planar, "stability: needs dim = 2");
    require(smooth, "stability: needs a smooth weight");
    require(std::isnan(s.level) || d.slab().contains(s.level), "stability.level must lie inside the slab");
    require(s.nodes >= 5 && s.line_nodes >= 5, "stability: node counts must be >= 5");
    require(s.samples >= 0, "stability.samples must be >= 0");
  }
  if (uses("jacobi")) {
    const auto& j = cfg.jacobi;
    require(planar, "jacobi: needs dim = 2");
    require(smooth, "jacobi: needs a smooth weight");
    require(!j.targets.empty(), "jacobi.targets must not be empty");
    require(j.steps.size() >= 2, "jacobi.steps needs at least two step sizes");
    for (double h : j.steps) require(h > 0, "jacobi.steps must be positive");
    require(j.length > 0, "jacobi.length must be positive");
    require(d.slab().contains(j.t0), "jacobi.t0 must lie inside the slab");
  }
  if (uses("optimize")) {
    const auto& o = cfg.optimize;
    require(d.ambient_dim() >= 2, "optimize: needs dim >= 2");
    require(smooth, "optimize: needs a smooth weight");
    require(o.controls >= 8 && o.controls <= 32, "optimize.controls must lie in [8, 32]");
    require(o.starts >= 1, "optimize.starts must be >= 1");
    require(o.area_fraction > 0 && o.area_fraction < 1, "optimize.area_fraction must lie in (0, 1)");
    require(o.max_iterations >= 1, "optimize.max_iterations must be >= 1");
  }
}

}  // namespace isoflow::cli
