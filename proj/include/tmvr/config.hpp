#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmvr/embedding.hpp"
#include "tmvr/experiments/divfield.hpp"
#include "tmvr/experiments/lorenz.hpp"
#include "tmvr/experiments/map1d.hpp"
#include "tmvr/io.hpp"
#include "tmvr/random.hpp"

namespace tmvr {

// Raised for unknown keys, malformed values and violated constraints. The
// message starts with the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::size_t workers = 1;
  std::string out = "runs/latest";

  Map1dConfig map1d;
  LorenzConfig lorenz;
  DivfieldConfig divfield;

  EmbeddingThresholds embedding;
  std::size_t embedding_points = 256;
  std::size_t embedding_densities = 6;

  void validate() const {
    if (trials < 1) throw ConfigError("run.trials must be >= 1");
    if (workers < 1) throw ConfigError("run.workers must be >= 1");
    if (out.empty()) throw ConfigError("run.out must not be empty");
    if (!(embedding.separation > 0.0)) throw ConfigError("embedding.sep_threshold must be > 0");
    if (!(embedding.singular_value > 0.0)) throw ConfigError("embedding.sv_threshold must be > 0");
    if (embedding_points < 2) throw ConfigError("embedding.points must be >= 2");
    if (embedding_densities < 2) throw ConfigError("embedding.densities must be >= 2");
    try {
      map1d.validate();
      lorenz.validate();
      divfield.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace config_detail {

inline std::uint64_t parse_uint(const std::string& key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(text) + "'");
  return v;
}

inline double parse_real(const std::string& key, std::string_view text) {
  double v = 0.0;
  if (!parse_double(text, v) || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite number, got '" + std::string(trim(text)) + "'");
  return v;
}

inline std::string parse_string(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '"' || text.back() != '"')
    throw ConfigError(key + ": expected a quoted string, got '" + std::string(text) + "'");
  std::string out;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (i + 2 >= text.size()) throw ConfigError(key + ": dangling escape in string");
      c = text[++i];
      if (c == 'n') c = '\n';
      else if (c == 't') c = '\t';
      else if (c != '"' && c != '\\') throw ConfigError(key + ": unsupported escape in string");
    } else if (c == '"') {
      throw ConfigError(key + ": unescaped quote in string");
    }
    out += c;
  }
  return out;
}

inline std::vector<std::string_view> parse_list_items(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']')
    throw ConfigError(key + ": expected a list like [1, 2], got '" + std::string(text) + "'");
  std::vector<std::string_view> items;
  std::string_view body = trim(text.substr(1, text.size() - 2));
  if (body.empty()) return items;
  while (true) {
    const auto comma = body.find(',');
    items.push_back(trim(body.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return items;
}

inline std::vector<std::size_t> parse_uint_list(const std::string& key, std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : parse_list_items(key, text)) out.push_back(static_cast<std::size_t>(parse_uint(key, item)));
  return out;
}

inline Vec parse_real_vector(const std::string& key, std::string_view text) {
  const auto items = parse_list_items(key, text);
  Vec v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_real(key, items[i]);
  return v;
}

inline std::string show_real(double x) {
  std::string s = format_double(x);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string show_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string show_uint_list(const std::vector<std::size_t>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + std::to_string(xs[i]);
  return s + "]";
}

inline std::string show_real_vector(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + show_real(v(i));
  return s + "]";
}

struct Key {
  std::string name;  // section.field
  std::function<std::string(const RunConfig&)> show;
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
  bool in_digest = true;
};

template <class T>
Key uint_key(std::string name, T RunConfig::*section, std::size_t T::*field) {
  return {name, [=](const RunConfig& c) { return std::to_string(c.*section.*field); },
          [=](RunConfig& c, const std::string& k, std::string_view t) {
            c.*section.*field = static_cast<std::size_t>(parse_uint(k, t));
          }};
}

template <class T>
Key real_key(std::string name, T RunConfig::*section, double T::*field) {
  return {name, [=](const RunConfig& c) { return show_real(c.*section.*field); },
          [=](RunConfig& c, const std::string& k, std::string_view t) { c.*section.*field = parse_real(k, t); }};
}

template <class T>
Key hidden_key(std::string name, T RunConfig::*section) {
  return {name, [=](const RunConfig& c) { return show_uint_list((c.*section).hidden); },
          [=](RunConfig& c, const std::string& k, std::string_view t) { (c.*section).hidden = parse_uint_list(k, t); }};
}

template <class T, class Law>
Key law_real_key(std::string name, T RunConfig::*section, Law T::*law, double Law::*field) {
  return {name, [=](const RunConfig& c) { return show_real(c.*section.*law.*field); },
          [=](RunConfig& c, const std::string& k, std::string_view t) { c.*section.*law.*field = parse_real(k, t); }};
}

template <class T>
Key law_vector_key(std::string name, T RunConfig::*section, Vec GaussianLaw::*field) {
  return {name, [=](const RunConfig& c) { return show_real_vector((c.*section).law.*field); },
          [=](RunConfig& c, const std::string& k, std::string_view t) { (c.*section).law.*field = parse_real_vector(k, t); }};
}

template <class T>
Key lorenz_param_key(std::string name, double LorenzParams::*field) {
  return {name, [=](const RunConfig& c) { return show_real(c.lorenz.params.*field); },
          [=](RunConfig& c, const std::string& k, std::string_view t) { c.lorenz.params.*field = parse_real(k, t); }};
}

inline const std::vector<Key>& keys() {
  static const std::vector<Key> all = [] {
    std::vector<Key> k;
    k.push_back({"run.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.seed = parse_uint(n, t); }});
    k.push_back({"run.trials", [](const RunConfig& c) { return std::to_string(c.trials); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.trials = parse_uint(n, t); }});
    k.push_back({"run.workers", [](const RunConfig& c) { return std::to_string(c.workers); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.workers = parse_uint(n, t); }, false});
    k.push_back({"run.out", [](const RunConfig& c) { return show_string(c.out); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.out = parse_string(n, t); }, false});

    using M = Map1dConfig;
    k.push_back(uint_key("map1d.densities", &RunConfig::map1d, &M::densities));
    k.push_back(uint_key("map1d.batch", &RunConfig::map1d, &M::batch));
    k.push_back(real_key("map1d.learning_rate", &RunConfig::map1d, &M::learning_rate));
    k.push_back(uint_key("map1d.iterations", &RunConfig::map1d, &M::iterations));
    k.push_back(hidden_key("map1d.hidden", &RunConfig::map1d));
    k.push_back(law_real_key("map1d.alpha_min", &RunConfig::map1d, &M::law, &VonMisesLaw::alpha_min));
    k.push_back(law_real_key("map1d.alpha_max", &RunConfig::map1d, &M::law, &VonMisesLaw::alpha_max));
    k.push_back(law_real_key("map1d.beta_min", &RunConfig::map1d, &M::law, &VonMisesLaw::beta_min));
    k.push_back(law_real_key("map1d.beta_max", &RunConfig::map1d, &M::law, &VonMisesLaw::beta_max));
    k.push_back(uint_key("map1d.eval_points", &RunConfig::map1d, &M::eval_points));
    k.push_back(uint_key("map1d.log_every", &RunConfig::map1d, &M::log_every));

    using L = LorenzConfig;
    k.push_back(uint_key("lorenz.particles", &RunConfig::lorenz, &L::particles));
    k.push_back(uint_key("lorenz.snapshots", &RunConfig::lorenz, &L::snapshots));
    k.push_back(real_key("lorenz.dt", &RunConfig::lorenz, &L::dt));
    k.push_back(real_key("lorenz.substep", &RunConfig::lorenz, &L::substep));
    k.push_back(uint_key("lorenz.batch", &RunConfig::lorenz, &L::batch));
    k.push_back(real_key("lorenz.learning_rate", &RunConfig::lorenz, &L::learning_rate));
    k.push_back(uint_key("lorenz.iterations", &RunConfig::lorenz, &L::iterations));
    k.push_back(hidden_key("lorenz.hidden", &RunConfig::lorenz));
    k.push_back(lorenz_param_key<L>("lorenz.sigma", &LorenzParams::sigma));
    k.push_back(lorenz_param_key<L>("lorenz.rho", &LorenzParams::rho));
    k.push_back(lorenz_param_key<L>("lorenz.beta", &LorenzParams::beta));
    k.push_back(law_vector_key("lorenz.center_min", &RunConfig::lorenz, &GaussianLaw::center_min));
    k.push_back(law_vector_key("lorenz.center_max", &RunConfig::lorenz, &GaussianLaw::center_max));
    k.push_back(law_real_key("lorenz.init_sigma_min", &RunConfig::lorenz, &L::law, &GaussianLaw::sigma_min));
    k.push_back(law_real_key("lorenz.init_sigma_max", &RunConfig::lorenz, &L::law, &GaussianLaw::sigma_max));
    k.push_back(uint_key("lorenz.eval_samples", &RunConfig::lorenz, &L::eval_samples));
    k.push_back(uint_key("lorenz.marginal_samples", &RunConfig::lorenz, &L::marginal_samples));
    k.push_back(uint_key("lorenz.log_every", &RunConfig::lorenz, &L::log_every));

    using D = DivfieldConfig;
    k.push_back(uint_key("divfield.densities", &RunConfig::divfield, &D::densities));
    k.push_back(uint_key("divfield.batch", &RunConfig::divfield, &D::batch));
    k.push_back(real_key("divfield.learning_rate", &RunConfig::divfield, &D::learning_rate));
    k.push_back(uint_key("divfield.iterations", &RunConfig::divfield, &D::iterations));
    k.push_back(hidden_key("divfield.hidden", &RunConfig::divfield));
    k.push_back(law_vector_key("divfield.center_min", &RunConfig::divfield, &GaussianLaw::center_min));
    k.push_back(law_vector_key("divfield.center_max", &RunConfig::divfield, &GaussianLaw::center_max));
    k.push_back(law_real_key("divfield.sigma_min", &RunConfig::divfield, &D::law, &GaussianLaw::sigma_min));
    k.push_back(law_real_key("divfield.sigma_max", &RunConfig::divfield, &D::law, &GaussianLaw::sigma_max));
    k.push_back(uint_key("divfield.eval_grid", &RunConfig::divfield, &D::eval_grid));
    k.push_back(uint_key("divfield.m_max", &RunConfig::divfield, &D::m_max));
    k.push_back(uint_key("divfield.repeats", &RunConfig::divfield, &D::repeats));
    k.push_back(uint_key("divfield.log_every", &RunConfig::divfield, &D::log_every));

    k.push_back({"embedding.sep_threshold", [](const RunConfig& c) { return show_real(c.embedding.separation); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.embedding.separation = parse_real(n, t); }});
    k.push_back({"embedding.sv_threshold", [](const RunConfig& c) { return show_real(c.embedding.singular_value); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.embedding.singular_value = parse_real(n, t); }});
    k.push_back({"embedding.points", [](const RunConfig& c) { return std::to_string(c.embedding_points); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.embedding_points = parse_uint(n, t); }});
    k.push_back({"embedding.densities", [](const RunConfig& c) { return std::to_string(c.embedding_densities); },
                 [](RunConfig& c, const std::string& n, std::string_view t) { c.embedding_densities = parse_uint(n, t); }});
    return k;
  }();
  return all;
}

inline const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return k;
  throw ConfigError(name + ": unknown key");
}

// Strips a trailing comment that is not inside a quoted string.
inline std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
      continue;
    }
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace config_detail

// Sets one key from its textual value. `key` is the dotted path; a bare
// name such as `seed` refers to the run section.
inline void set_config_value(RunConfig& cfg, const std::string& key, std::string_view value) {
  const std::string full = key.find('.') == std::string::npos ? "run." + key : key;
  config_detail::find_key(full).set(cfg, full, value);
}

// Applies a "section.key=value" override.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  set_config_value(cfg, std::string(trim(assignment.substr(0, eq))), assignment.substr(eq + 1));
}

// Parses the sectioned key = value format on top of `base`. Keys may be
// written as `[section]` followed by `key = value`, or as `section.key = value`.
inline RunConfig parse_config_text(std::string_view text, RunConfig base = {}, const std::string& source = "config") {
  std::string section;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::istringstream is{std::string(text)};
  std::string raw;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto line = trim(config_detail::strip_comment(raw));
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string name(trim(line.substr(0, eq)));
    if (name.empty()) throw ConfigError(where + "missing key");
    std::string key = section.empty() ? name : section + "." + name;
    if (key.find('.') == std::string::npos) key = "run." + key;
    if (!seen.insert(key).second) throw ConfigError(where + key + ": duplicate key");
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

inline RunConfig parse_config_file(const std::string& path, RunConfig base = {}) {
  return parse_config_text(read_text_file(path), std::move(base), path);
}

// Every key with its value, grouped by section in a fixed order.
inline std::string render_config(const RunConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& k : config_detail::keys()) {
    const auto dot = k.name.find('.');
    const std::string section = k.name.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + section + "]\n";
      current = section;
    }
    out += k.name.substr(dot + 1) + " = " + k.show(cfg) + "\n";
  }
  return out;
}

// FNV-1a over the sorted "key = value" lines of every key that affects
// results (run.out and run.workers do not).
inline std::string config_digest(const RunConfig& cfg) {
  std::vector<std::string> lines;
  for (const auto& k : config_detail::keys())
    if (k.in_digest) lines.push_back(k.name + " = " + k.show(cfg));
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(joined)));
  return buf;
}

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> names;
  for (const auto& k : config_detail::keys()) names.push_back(k.name);
  return names;
}

}  // namespace tmvr
