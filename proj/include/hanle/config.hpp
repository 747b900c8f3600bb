#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bloch.hpp"
#include "doppler.hpp"
#include "errors.hpp"
#include "resonance.hpp"

namespace hanle {

/// Ellipticities of a sweep: an explicit list, or count points spread over [min, max].
struct SweepSpec {
  std::vector<double> epsilons;
  double eps_min = -std::numbers::pi / 4;
  double eps_max = std::numbers::pi / 4;
  int eps_count = 25;

  std::vector<double> grid() const {
    if (!epsilons.empty()) return epsilons;
    return linspace(eps_min, eps_max, eps_count);
  }

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// Single point for solve-one.
struct SolveSpec {
  double delta = 0.0;
  double omega_g = 0.0;

  friend bool operator==(const SolveSpec&, const SolveSpec&) = default;
};

enum class OutputFormat { csv, both };

struct OutputSpec {
  std::string dir = ".";
  std::string prefix = "hanle";
  OutputFormat format = OutputFormat::csv;  // both = csv plus gnuplot data files

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct RunConfig {
  AtomSpec atom;
  double rabi = 5.0;
  double epsilon = 0.0;
  double delta0 = 0.0;
  DopplerSpec doppler;
  ScanSettings scan;
  SweepSpec sweep;
  SolveSpec solve;
  OutputSpec output;

  FieldParams field() const { return {rabi, Polarization::from_ellipticity(epsilon), delta0}; }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> plain_number(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

/// Real number, also accepting multiples of pi such as "pi/9", "-pi/4" or "3*pi/16".
inline double parse_real(const std::string& raw) {
  const std::string text = trim(raw);
  if (const auto v = plain_number(text)) {
    if (!std::isfinite(*v)) throw std::invalid_argument("'" + text + "' is not a finite number");
    return *v;
  }
  static const std::regex pi_form(R"(^([+-]?)(?:([0-9.eE+-]+)\s*\*\s*)?pi(?:\s*/\s*([0-9.eE+-]+))?$)");
  std::smatch m;
  if (std::regex_match(text, m, pi_form)) {
    double v = std::numbers::pi;
    if (m[2].matched) {
      const auto k = plain_number(m[2].str());
      if (!k) throw std::invalid_argument("'" + text + "' is not a number");
      v *= *k;
    }
    if (m[3].matched) {
      const auto d = plain_number(m[3].str());
      if (!d || *d == 0.0) throw std::invalid_argument("'" + text + "' is not a number");
      v /= *d;
    }
    if (m[1].str() == "-") v = -v;
    return v;
  }
  throw std::invalid_argument("'" + text + "' is not a number");
}

inline int parse_int(const std::string& raw) {
  const std::string text = trim(raw);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw std::invalid_argument("'" + text + "' is not an integer");
  return v;
}

/// Spin written as an integer, a half-integer fraction "3/2", or a decimal "1.5".
inline Spin parse_spin(const std::string& raw) {
  const std::string text = trim(raw);
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const int num = parse_int(text.substr(0, slash));
    const int den = parse_int(text.substr(slash + 1));
    if (den != 2 || num % 2 == 0) throw std::invalid_argument("'" + text + "' is not a half-integer spin");
    return Spin::from_twice(num);
  }
  const double v = parse_real(text);
  const double twice = 2.0 * v;
  if (twice != std::round(twice)) throw std::invalid_argument("'" + text + "' is not an integer or half-integer");
  return Spin::from_twice(static_cast<int>(twice));
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0)) throw std::domain_error(std::string(what) + " must be positive");
}

inline void require_ellipticity(double eps) {
  if (std::abs(eps) > std::numbers::pi / 4 * (1 + 1e-12))
    throw std::domain_error("ellipticity " + format_real(eps) + " outside [-pi/4, pi/4]");
}

struct Key {
  std::string name;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Field>
Key real_key(std::string name, Field field, std::function<void(double)> check = {}) {
  return {std::move(name),
          [field, check](RunConfig& c, const std::string& v) {
            const double x = parse_real(v);
            if (check) check(x);
            field(c) = x;
          },
          [field](const RunConfig& c) {
            RunConfig copy = c;
            return format_real(field(copy));
          }};
}

template <class Field>
Key int_key(std::string name, Field field) {
  return {std::move(name), [field](RunConfig& c, const std::string& v) { field(c) = parse_int(v); },
          [field](const RunConfig& c) {
            RunConfig copy = c;
            return std::to_string(field(copy));
          }};
}

inline const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"atom.f_g", [](RunConfig& c, const std::string& v) { c.atom.f_g = parse_spin(v); },
                 [](const RunConfig& c) { return to_string(c.atom.f_g); }});
    k.push_back({"atom.f_e", [](RunConfig& c, const std::string& v) { c.atom.f_e = parse_spin(v); },
                 [](const RunConfig& c) { return to_string(c.atom.f_e); }});
    k.push_back(real_key("atom.g_g", [](RunConfig& c) -> double& { return c.atom.g_g; }));
    k.push_back(real_key("atom.g_e", [](RunConfig& c) -> double& { return c.atom.g_e; }));
    k.push_back(real_key("atom.gamma_r", [](RunConfig& c) -> double& { return c.atom.gamma_r; },
                         [](double v) { if (!(v >= 0)) throw std::domain_error("gamma_r must be >= 0"); }));
    k.push_back(real_key("atom.big_gamma", [](RunConfig& c) -> double& { return c.atom.big_gamma; },
                         [](double v) { require_positive(v, "big_gamma"); }));
    k.push_back(real_key("atom.gamma_eg", [](RunConfig& c) -> double& { return c.atom.gamma_eg; },
                         [](double v) { require_positive(v, "gamma_eg"); }));

    k.push_back(real_key("field.rabi", [](RunConfig& c) -> double& { return c.rabi; },
                         [](double v) { if (!(v >= 0)) throw std::domain_error("rabi must be >= 0"); }));
    k.push_back(real_key("field.epsilon", [](RunConfig& c) -> double& { return c.epsilon; }, require_ellipticity));
    k.push_back(real_key("field.delta0", [](RunConfig& c) -> double& { return c.delta0; }));

    k.push_back(real_key("doppler.width", [](RunConfig& c) -> double& { return c.doppler.width; },
                         [](double v) { if (!(v >= 0)) throw std::domain_error("Doppler width must be >= 0"); }));
    k.push_back(int_key("doppler.nodes", [](RunConfig& c) -> int& { return c.doppler.nodes; }));
    k.push_back({"doppler.rule",
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "mapped")
                     c.doppler.rule = DopplerRule::lorentz_mapped;
                   else if (t == "hermite")
                     c.doppler.rule = DopplerRule::hermite;
                   else
                     throw std::invalid_argument("'" + t + "' is not one of mapped, hermite");
                 },
                 [](const RunConfig& c) { return to_string(c.doppler.rule); }});
    k.push_back(real_key("doppler.core_width", [](RunConfig& c) -> double& { return c.doppler.core_width; }));

    k.push_back(real_key("scan.coarse_range", [](RunConfig& c) -> double& { return c.scan.coarse_range; }));
    k.push_back(int_key("scan.coarse_points", [](RunConfig& c) -> int& { return c.scan.coarse_points; }));
    k.push_back(real_key("scan.probe_min", [](RunConfig& c) -> double& { return c.scan.probe_min; }));
    k.push_back(int_key("scan.probe_points", [](RunConfig& c) -> int& { return c.scan.probe_points; }));
    k.push_back(real_key("scan.fine_factor", [](RunConfig& c) -> double& { return c.scan.fine_factor; }));
    k.push_back(int_key("scan.fine_points", [](RunConfig& c) -> int& { return c.scan.fine_points; }));
    k.push_back(int_key("scan.max_refinements", [](RunConfig& c) -> int& { return c.scan.max_refinements; }));
    k.push_back(real_key("scan.width_tolerance", [](RunConfig& c) -> double& { return c.scan.width_tolerance; }));
    k.push_back(real_key("scan.annulus_inner", [](RunConfig& c) -> double& { return c.scan.annulus_inner; }));
    k.push_back(real_key("scan.annulus_outer", [](RunConfig& c) -> double& { return c.scan.annulus_outer; }));
    k.push_back(
        real_key("scan.background_tolerance", [](RunConfig& c) -> double& { return c.scan.background_tolerance; }));

    k.push_back({"sweep.epsilons",
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t.empty()) {
                     c.sweep.epsilons.clear();
                     return;
                   }
                   auto list = parse_list(t);
                   for (double e : list) require_ellipticity(e);
                   c.sweep.epsilons = std::move(list);
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.sweep.epsilons.size(); ++i)
                     out += (i ? ", " : "") + format_real(c.sweep.epsilons[i]);
                   return out;
                 }});
    k.push_back(real_key("sweep.eps_min", [](RunConfig& c) -> double& { return c.sweep.eps_min; }, require_ellipticity));
    k.push_back(real_key("sweep.eps_max", [](RunConfig& c) -> double& { return c.sweep.eps_max; }, require_ellipticity));
    k.push_back(int_key("sweep.eps_count", [](RunConfig& c) -> int& { return c.sweep.eps_count; }));

    k.push_back(real_key("solve.delta", [](RunConfig& c) -> double& { return c.solve.delta; }));
    k.push_back(real_key("solve.omega_g", [](RunConfig& c) -> double& { return c.solve.omega_g; }));

    k.push_back({"output.dir", [](RunConfig& c, const std::string& v) { c.output.dir = trim(v); },
                 [](const RunConfig& c) { return c.output.dir; }});
    k.push_back({"output.prefix", [](RunConfig& c, const std::string& v) { c.output.prefix = trim(v); },
                 [](const RunConfig& c) { return c.output.prefix; }});
    k.push_back({"output.format",
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "csv")
                     c.output.format = OutputFormat::csv;
                   else if (t == "both")
                     c.output.format = OutputFormat::both;
                   else
                     throw std::invalid_argument("'" + t + "' is not one of csv, both");
                 },
                 [](const RunConfig& c) { return std::string(c.output.format == OutputFormat::both ? "both" : "csv"); }});
    return k;
  }();
  return table;
}

inline const Key* find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

struct Assignment {
  std::string key;
  std::string value;
  std::string where;  // "file:line" or "override"
};

inline void apply(RunConfig& config, const Assignment& a) {
  const Key* key = find_key(a.key);
  if (!key) throw ConfigError(a.where + ": unknown key '" + a.key + "'");
  try {
    key->set(config, a.value);
  } catch (const std::exception& e) {
    throw ConfigError(a.where + ": " + a.key + ": " + e.what());
  }
}

/// Checks that need several keys at once; errors point at the last key involved.
inline void validate(const RunConfig& c, const std::map<std::string, std::string>& where) {
  auto at = [&](const std::string& key) {
    const auto it = where.find(key);
    return (it == where.end() ? std::string("defaults") : it->second) + ": " + key + ": ";
  };
  auto check = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw ConfigError(at(key) + e.what());
    }
  };
  check("atom.f_e", [&] { require_dipole_allowed(c.atom.f_g, c.atom.f_e); });
  check("atom.g_g", [&] {
    if (c.atom.g_g == 0.0) throw std::domain_error("g_g must be nonzero (Omega_e is derived from Omega_g)");
  });
  check("doppler.nodes", [&] { c.doppler.validate(); });
  check("scan.fine_points", [&] { c.scan.validate(); });
  check("sweep.eps_count", [&] {
    if (c.sweep.epsilons.empty()) {
      if (c.sweep.eps_count < 1) throw std::domain_error("eps_count must be >= 1");
      if (!(c.sweep.eps_min <= c.sweep.eps_max)) throw std::domain_error("eps_min must not exceed eps_max");
    }
  });
  check("output.prefix", [&] {
    if (c.output.prefix.empty() || c.output.prefix.find('/') != std::string::npos)
      throw std::domain_error("prefix must be a non-empty file name stem");
  });
}

}  // namespace config_detail

/// Config text in sectioned "key = value" form:
///
///   [atom]
///   f_g = 2
///   # comment
///
/// Every key is optional. Unknown sections or keys are errors.
class ConfigParser {
 public:
  void read_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string where = source + ":" + std::to_string(number);
      const auto hash = line.find('#');
      const std::string body = config_detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') throw ConfigError(where + ": malformed section header '" + body + "'");
        section = config_detail::trim(body.substr(1, body.size() - 2));
        static const std::vector<std::string> known{"atom", "field", "doppler", "scan", "sweep", "solve", "output"};
        if (std::find(known.begin(), known.end(), section) == known.end())
          throw ConfigError(where + ": unknown section '" + section + "'");
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + body + "'");
      const std::string key = config_detail::trim(body.substr(0, eq));
      if (key.empty()) throw ConfigError(where + ": missing key before '='");
      if (section.empty()) throw ConfigError(where + ": key '" + key + "' appears before any [section]");
      const std::string full = section + "." + key;
      if (seen_.count(full)) throw ConfigError(where + ": duplicate key '" + full + "' (first at " + seen_[full] + ")");
      seen_[full] = where;
      add({full, body.substr(eq + 1), where});
    }
  }

  void read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    read_text(buf.str(), path);
  }

  /// "section.key=value" given on the command line.
  void add_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    const std::string where = "override '" + assignment + "'";
    if (eq == std::string::npos) throw ConfigError(where + ": expected section.key=value");
    const std::string key = config_detail::trim(assignment.substr(0, eq));
    add({key, assignment.substr(eq + 1), where});
  }

  RunConfig build() const {
    RunConfig config;
    std::map<std::string, std::string> where;
    for (const auto& a : assignments_) {
      config_detail::apply(config, a);
      where[a.key] = a.where;
    }
    config_detail::validate(config, where);
    return config;
  }

 private:
  void add(config_detail::Assignment a) {
    if (!config_detail::find_key(a.key)) throw ConfigError(a.where + ": unknown key '" + a.key + "'");
    assignments_.push_back(std::move(a));
  }

  std::vector<config_detail::Assignment> assignments_;
  std::map<std::string, std::string> seen_;
};

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  ConfigParser p;
  p.read_text(text, source);
  return p.build();
}

inline RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  ConfigParser p;
  p.read_file(path);
  for (const auto& o : overrides) p.add_override(o);
  return p.build();
}

/// Full config in parseable form, every key present, numbers with 17 significant digits.
inline std::string write_config(const RunConfig& config, const std::string& line_prefix = "") {
  std::ostringstream os;
  std::string section;
  for (const auto& key : config_detail::keys()) {
    const auto dot = key.name.find('.');
    const std::string sec = key.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << line_prefix << "\n";
      os << line_prefix << "[" << sec << "]\n";
      section = sec;
    }
    os << line_prefix << key.name.substr(dot + 1) << " = " << key.get(config) << "\n";
  }
  return os.str();
}

}  // namespace hanle
