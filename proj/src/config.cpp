#include "lilsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

namespace lilsim {
namespace {

enum class Type { integer, real, boolean, string };

using Check = std::function<std::optional<std::string>(const ConfigValue&)>;

struct KeySpec {
  std::string name;
  Type type;
  std::optional<ConfigValue> fallback;  // default; absent and optional when empty
  bool required = false;
  Check check;
};

std::string fmt(double v) { return format_double(v); }

Check real_range(double lo, double hi, bool lo_open, bool hi_open) {
  return [=](const ConfigValue& v) -> std::optional<std::string> {
    const double x = std::get<double>(v);
    const bool ok = std::isfinite(x) && (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (ok) return std::nullopt;
    std::string range = std::string(lo_open ? "(" : "[") + (std::isinf(lo) ? "-inf" : fmt(lo)) + "," +
                        (std::isinf(hi) ? "inf" : fmt(hi)) + (hi_open ? ")" : "]");
    return "value " + fmt(x) + " outside " + range;
  };
}

Check positive() { return real_range(0.0, INFINITY, true, true); }
Check nonnegative() { return real_range(0.0, INFINITY, false, true); }
Check any_real() { return real_range(-INFINITY, INFINITY, true, true); }

Check int_min(std::int64_t lo) {
  return [=](const ConfigValue& v) -> std::optional<std::string> {
    const auto x = std::get<std::int64_t>(v);
    if (x >= lo) return std::nullopt;
    return "value " + std::to_string(x) + " must be >= " + std::to_string(lo);
  };
}

Check one_of(std::vector<std::string> options) {
  return [=](const ConfigValue& v) -> std::optional<std::string> {
    const auto& s = std::get<std::string>(v);
    if (std::find(options.begin(), options.end(), s) != options.end()) return std::nullopt;
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    return "value '" + s + "' is not one of {" + list + "}";
  };
}

Check any_string() {
  return [](const ConfigValue&) -> std::optional<std::string> { return std::nullopt; };
}
Check any_bool() { return any_string(); }

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    auto add = [&](std::string name, Type t, std::optional<ConfigValue> def, bool required, Check check) {
      k.push_back({std::move(name), t, std::move(def), required, std::move(check)});
    };
    using I = std::int64_t;
    add("seed", Type::integer, std::nullopt, true, int_min(0));

    add("grid.kind", Type::string, std::nullopt, true, one_of({"harmonic", "power", "constant"}));
    add("grid.n_steps", Type::integer, std::nullopt, true, int_min(1));
    add("grid.theta", Type::real, 0.75, false, real_range(0.0, 1.0, true, false));
    add("grid.scale", Type::real, 1.0, false, positive());
    add("grid.cap", Type::real, 1.0, false, positive());

    add("model.kind", Type::string, std::nullopt, true, one_of({"ou", "sode", "spde"}));
    add("model.a", Type::real, 1.0, false, nonnegative());
    add("model.sigma", Type::real, 1.0, false, nonnegative());
    add("model.dim", Type::integer, I{1}, false, int_min(1));
    add("model.cubic", Type::real, 1.0, false, nonnegative());
    add("model.x0", Type::real, 0.0, false, any_real());
    for (const char* c : {"model.c1", "model.c2", "model.c3", "model.c4", "model.c6", "model.qbar"}) {
      add(c, Type::real, std::nullopt, false, nonnegative());
    }
    add("model.c9", Type::real, 0.0, false, any_real());

    add("spde.modes", Type::integer, I{64}, false, int_min(1));
    add("spde.beta1", Type::real, 1.0, false, positive());
    add("spde.q_law", Type::string, std::string("power:2"), false, any_string());
    add("spde.F", Type::string, std::string("zero"), false, any_string());
    add("spde.mesh", Type::integer, I{0}, false, int_min(0));

    add("scheme.kind", Type::string, std::nullopt, false, one_of({"bem", "exp_euler", "exact_ou", "em_baseline"}));
    add("scheme.newton_tol", Type::real, 1e-12, false, positive());
    add("scheme.newton_max_iter", Type::integer, I{50}, false, int_min(1));

    add("f.kind", Type::string, std::string("identity"), false,
        one_of({"identity", "coordinate", "saturating", "capped_square_norm"}));
    add("f.index", Type::integer, I{0}, false, int_min(0));
    add("f.cap", Type::real, 1.0, false, positive());
    add("f.weights", Type::string, std::string("1"), false, any_string());
    add("f.p", Type::real, std::nullopt, false, real_range(1.0, INFINITY, false, true));
    add("f.gamma", Type::real, std::nullopt, false, real_range(0.0, 1.0, true, false));
    add("f.mu_exact", Type::real, std::nullopt, false, any_real());

    add("stats.checkpoint_ratio", Type::real, 1.2, false, real_range(1.0, INFINITY, true, true));
    add("stats.first_checkpoint", Type::real, 1.0, false, positive());
    add("stats.window_start", Type::real, std::nullopt, false, nonnegative());
    add("stats.window_end", Type::real, std::nullopt, false, positive());
    add("stats.batch_length", Type::real, 0.0, false, nonnegative());
    add("stats.k_max", Type::integer, I{0}, false, int_min(0));

    add("mc.paths", Type::integer, std::nullopt, true, int_min(1));
    add("mc.workers", Type::integer, I{1}, false, int_min(1));
    add("mc.fail_fast", Type::boolean, false, false, any_bool());
    add("mc.first_path_id", Type::integer, I{0}, false, int_min(0));
    add("mc.inject_failure_path", Type::integer, I{-1}, false, int_min(-1));
    add("mc.inner_paths", Type::integer, I{64}, false, int_min(1));

    add("output.dir", Type::string, std::string("out"), false, any_string());

    add("verify.context", Type::string, std::string("thm3_1"), false,
        one_of({"prop2_2", "thm3_1", "prop4_3", "prop4_4"}));
    add("verify.r", Type::real, 100.0, false, any_real());
    add("verify.q", Type::real, 100.0, false, any_real());
    add("verify.r_tilde", Type::real, 1.0, false, any_real());
    add("verify.q_tilde", Type::real, 1.0, false, any_real());
    add("verify.beta", Type::real, 0.0, false, any_real());
    add("verify.kappa", Type::real, 0.0, false, any_real());
    add("verify.gamma1", Type::real, 1.0, false, any_real());
    add("verify.gamma", Type::real, 1.0, false, any_real());
    add("verify.l", Type::real, 1.0, false, any_real());
    add("verify.l_tilde", Type::real, 0.5, false, any_real());
    add("verify.alpha", Type::real, 1.0, false, any_real());
    add("verify.p", Type::real, 1.0, false, any_real());
    add("verify.rho_rate", Type::real, 1.0, false, positive());
    add("verify.rho_tau_rate", Type::real, 1.0, false, positive());
    add("verify.horizon", Type::integer, I{1000000}, false, int_min(2));
    return k;
  }();
  return keys;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const std::set<std::string> kDerived = {"model.c5", "model.c7", "model.c8"};
const std::set<std::string> kSections = {"grid", "model", "spde", "scheme", "f", "stats", "mc", "output", "verify"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<ConfigValue> convert(Type t, const std::string& raw, std::string& error) {
  switch (t) {
    case Type::integer: {
      std::int64_t v = 0;
      const auto r = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (r.ec != std::errc() || r.ptr != raw.data() + raw.size() || raw.empty()) {
        error = "expected an integer, got '" + raw + "'";
        return std::nullopt;
      }
      return v;
    }
    case Type::real: {
      char* end = nullptr;
      const double v = std::strtod(raw.c_str(), &end);
      if (raw.empty() || end != raw.c_str() + raw.size()) {
        error = "expected a real number, got '" + raw + "'";
        return std::nullopt;
      }
      return v;
    }
    case Type::boolean:
      if (raw == "true" || raw == "1" || raw == "yes") return true;
      if (raw == "false" || raw == "0" || raw == "no") return false;
      error = "expected true or false, got '" + raw + "'";
      return std::nullopt;
    case Type::string:
      if (raw.empty()) {
        error = "empty value";
        return std::nullopt;
      }
      return raw;
  }
  return std::nullopt;
}

std::string unknown_message(const std::string& what, const std::string& name) {
  std::string msg = "unknown " + what + " '" + name + "'";
  if (auto s = suggest_key(name)) msg += " (did you mean '" + *s + "'?)";
  return msg;
}

// Cross-field checks on a config whose individual values are valid.
void cross_checks(const RunConfig& c, std::vector<Diagnostic>& out) {
  auto guard = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      out.push_back({0, key, e.what()});
    }
  };
  const bool has_ws = c.has("stats.window_start"), has_we = c.has("stats.window_end");
  if (has_ws != has_we) {
    out.push_back({0, "stats.window_start", "stats.window_start and stats.window_end must be given together"});
  } else if (has_ws && !(c.real("stats.window_start") < c.real("stats.window_end"))) {
    out.push_back({0, "stats.window_end", "stats.window_end must exceed stats.window_start"});
  }
  guard("grid", [&] { make_step_spec(c).validate(); });
  guard("model", [&] {
    const Model m = make_model(c);
    guard("scheme", [&] {
      make_scheme(c).validate();
      check_compatible(m, make_scheme(c));
    });
    guard("f", [&] {
      const auto f = make_test_function(c);
      f.validate();
      const std::size_t dim = std::holds_alternative<SodeModel>(m) ? std::get<SodeModel>(m).dim
                                                                   : std::get<SpectralSpdeModel>(m).modes;
      if (c.string("f.kind") == "coordinate" && static_cast<std::size_t>(c.integer("f.index")) >= dim) {
        throw ConfigError("f.index = " + std::to_string(c.integer("f.index")) + " must be below the state dimension " +
                          std::to_string(dim));
      }
    });
  });
  guard("verify", [&] {
    const auto x = make_exponent_params(c);
    x.validate();
    if (c.string("verify.context") == "thm3_1" && !(x.p <= std::min(x.r, x.q / 4.0))) {
      throw ConfigError("verify.p = " + fmt(x.p) + " must satisfy p <= r ^ q/4 = " + fmt(std::min(x.r, x.q / 4.0)) +
                        " for context thm3_1");
    }
  });
}

}  // namespace

std::string Diagnostic::format() const {
  std::string s;
  if (line > 0) s += "line " + std::to_string(line) + ": ";
  if (!key.empty()) s += key + ": ";
  return s + message;
}

namespace {
std::string join_diagnostics(const std::vector<Diagnostic>& d) {
  std::string s = "invalid configuration (" + std::to_string(d.size()) + " problem" + (d.size() == 1 ? "" : "s") + ")";
  for (const auto& x : d) s += "\n  " + x.format();
  return s;
}
}  // namespace

ConfigDiagnostics::ConfigDiagnostics(std::vector<Diagnostic> diagnostics)
    : ConfigError(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::int64_t RunConfig::integer(const std::string& key) const { return std::get<std::int64_t>(values.at(key)); }
double RunConfig::real(const std::string& key) const { return std::get<double>(values.at(key)); }
bool RunConfig::boolean(const std::string& key) const { return std::get<bool>(values.at(key)); }
const std::string& RunConfig::string(const std::string& key) const { return std::get<std::string>(values.at(key)); }
std::optional<double> RunConfig::optional_real(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return real(key);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : schema()) out.push_back(k.name);
  return out;
}

std::optional<std::string> suggest_key(const std::string& unknown) {
  std::optional<std::string> best;
  std::size_t best_d = 4;
  auto consider = [&](const std::string& name) {
    const std::size_t d = levenshtein(unknown, name);
    if (d < best_d) best_d = d, best = name;
  };
  for (const auto& k : schema()) consider(k.name);
  for (const auto& s : kSections) consider(s);
  return best;
}

ParseResult try_parse_config(std::string_view text) {
  ParseResult result;
  auto& diag = result.diagnostics;
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw_line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line(raw_line);
    if (const auto h = line.find_first_of("#;"); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        diag.push_back({line_no, "", "syntax error: unterminated section header '" + line + "'"});
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!kSections.count(section)) {
        diag.push_back({line_no, section, unknown_message("section", section)});
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      diag.push_back({line_no, "", "syntax error: expected 'key = value', got '" + line + "'"});
      continue;
    }
    const std::string key_part = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key_part.empty()) {
      diag.push_back({line_no, "", "syntax error: empty key"});
      continue;
    }
    const std::string key =
        section.empty() || key_part.find('.') != std::string::npos ? key_part : section + "." + key_part;
    if (kDerived.count(key)) {
      diag.push_back({line_no, key,
                      key + " is derived (c5 = 2 c3 - 15 c1^2, c7 = b(0)^2/c3 + c6 c2^2, c8 = c5/(1 + c5 tau_bar)) "
                            "and cannot be set"});
      continue;
    }
    const KeySpec* spec = find_key(key);
    if (!spec) {
      diag.push_back({line_no, key, unknown_message("key", key)});
      continue;
    }
    if (auto it = seen.find(key); it != seen.end()) {
      diag.push_back({line_no, key, "duplicate key (first set on line " + std::to_string(it->second) + ")"});
      continue;
    }
    seen[key] = line_no;
    std::string error;
    auto v = convert(spec->type, value, error);
    if (!v) {
      diag.push_back({line_no, key, error});
      continue;
    }
    if (auto bad = spec->check(*v)) {
      diag.push_back({line_no, key, *bad});
      continue;
    }
    cfg.values[key] = *v;
  }

  for (const auto& k : schema()) {
    if (cfg.has(k.name) || seen.count(k.name)) continue;
    if (k.required) {
      diag.push_back({0, k.name, "missing required key"});
    } else if (k.fallback) {
      cfg.values[k.name] = *k.fallback;
    }
  }
  if (!cfg.has("scheme.kind") && !seen.count("scheme.kind") && cfg.has("model.kind")) {
    cfg.values["scheme.kind"] = std::string(cfg.string("model.kind") == "spde" ? "exp_euler" : "bem");
  }
  if (diag.empty()) cross_checks(cfg, diag);
  if (diag.empty()) result.config = std::move(cfg);
  return result;
}

RunConfig parse_config(std::string_view text) {
  auto r = try_parse_config(text);
  if (!r.config) throw ConfigDiagnostics(std::move(r.diagnostics));
  return std::move(*r.config);
}

void validate_config(const RunConfig& config) {
  const RunConfig again = parse_config(emit_config(config));
  if (!(again == config)) throw ConfigError("configuration does not survive re-validation");
}

namespace {
std::string render(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        if constexpr (std::is_same_v<T, double>) return format_double(x);
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        if constexpr (std::is_same_v<T, std::string>) return x;
      },
      v);
}

std::string emit_filtered(const RunConfig& c, const std::set<std::string>& skip) {
  std::string out;
  std::string section;
  for (const auto& k : schema()) {
    if (!c.has(k.name) || skip.count(k.name)) continue;
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    const std::string key = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key + " = " + render(c.values.at(k.name)) + "\n";
  }
  return out;
}
}  // namespace

std::string emit_config(const RunConfig& c) { return emit_filtered(c, {}); }

std::uint64_t config_fingerprint(const RunConfig& c) {
  return fnv1a64(emit_filtered(
      c, {"mc.paths", "mc.first_path_id", "mc.workers", "mc.fail_fast", "mc.inject_failure_path", "output.dir"}));
}

StepSpec make_step_spec(const RunConfig& c) {
  const auto& kind = c.string("grid.kind");
  if (kind == "harmonic") return StepSpec::harmonic(c.real("grid.scale"), c.real("grid.cap"));
  if (kind == "power") return StepSpec::power(c.real("grid.theta"), c.real("grid.scale"), c.real("grid.cap"));
  return StepSpec::constant(c.real("grid.cap"));
}

namespace {
double parse_suffix_real(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(what + ": expected a real number, got '" + s + "'");
  return v;
}
}  // namespace

Model make_model(const RunConfig& c) {
  const auto& kind = c.string("model.kind");
  if (kind == "spde") {
    SpectralSpdeModel m;
    m.modes = static_cast<std::size_t>(c.integer("spde.modes"));
    m.beta1 = c.real("spde.beta1");
    m.c9 = c.real("model.c9");
    m.mesh = static_cast<std::size_t>(c.integer("spde.mesh"));
    const auto& law = c.string("spde.q_law");
    if (law == "white") {
      m.noise.kind = NoiseLawKind::white;
    } else if (law.rfind("power:", 0) == 0) {
      m.noise.kind = NoiseLawKind::power;
      m.noise.exponent = parse_suffix_real(law.substr(6), "spde.q_law");
    } else {
      throw ConfigError("spde.q_law must be 'power:<exponent>' or 'white', got '" + law + "'");
    }
    const auto& F = c.string("spde.F");
    if (F == "zero") {
      m.F = Nonlinearity::zero();
    } else if (F.rfind("linear:", 0) == 0) {
      m.F = Nonlinearity::linear(parse_suffix_real(F.substr(7), "spde.F"));
    } else if (F.rfind("nemytskii:", 0) == 0) {
      m.F = Nonlinearity::nemytskii(F.substr(10));
    } else {
      throw ConfigError("spde.F must be 'zero', 'linear:<slope>' or 'nemytskii:<name>', got '" + F + "'");
    }
    m.validate();
    return m;
  }
  SodeModel m = kind == "ou"
                    ? SodeModel::ornstein_uhlenbeck(c.real("model.a"), c.real("model.sigma"),
                                                    static_cast<std::size_t>(c.integer("model.dim")))
                    : SodeModel::polynomial(c.real("model.a"), c.real("model.cubic"), c.real("model.sigma"));
  if (kind == "sode" && c.integer("model.dim") != 1) throw ConfigError("model.dim must be 1 for model.kind = sode");
  auto& k = m.constants;
  if (auto v = c.optional_real("model.c1")) k.c1 = *v;
  if (auto v = c.optional_real("model.c2")) k.c2 = *v;
  if (auto v = c.optional_real("model.c3")) k.c3 = *v;
  if (auto v = c.optional_real("model.c4")) k.c4 = *v;
  if (auto v = c.optional_real("model.c6")) k.c6 = *v;
  if (auto v = c.optional_real("model.qbar")) k.qbar = *v;
  m.validate();
  return m;
}

SchemeSpec make_scheme(const RunConfig& c) {
  SchemeSpec s;
  s.kind = scheme_kind_from_string(c.string("scheme.kind"));
  s.newton_tol = c.real("scheme.newton_tol");
  s.newton_max_iter = static_cast<int>(c.integer("scheme.newton_max_iter"));
  return s;
}

TestFunction make_test_function(const RunConfig& c) {
  const auto& kind = c.string("f.kind");
  TestFunction f;
  if (kind == "identity") {
    f = TestFunction::identity();
  } else if (kind == "coordinate") {
    f = TestFunction::coordinate(static_cast<std::size_t>(c.integer("f.index")));
  } else if (kind == "capped_square_norm") {
    f = TestFunction::capped_square_norm(c.real("f.cap"));
  } else {
    std::vector<double> w;
    std::stringstream ss(c.string("f.weights"));
    std::string item;
    while (std::getline(ss, item, ',')) w.push_back(parse_suffix_real(trim(item), "f.weights"));
    f = TestFunction::saturating(std::move(w));
  }
  if (auto p = c.optional_real("f.p")) f.p = *p;
  if (auto g = c.optional_real("f.gamma")) f.gamma = *g;
  if (auto mu = c.optional_real("f.mu_exact")) f.exact_mean = *mu;
  return f;
}

State make_initial_state(const RunConfig& c) {
  const std::size_t dim = c.string("model.kind") == "spde" ? static_cast<std::size_t>(c.integer("spde.modes"))
                                                           : static_cast<std::size_t>(c.integer("model.dim"));
  return State(dim, c.real("model.x0"));
}

EnsembleConfig make_ensemble_config(const RunConfig& c) {
  EnsembleConfig e;
  e.model = make_model(c);
  e.scheme = make_scheme(c);
  e.x0 = make_initial_state(c);
  e.f = make_test_function(c);
  e.mu = c.optional_real("f.mu_exact");
  if (!e.mu && e.f.exact_mean) e.mu = e.f.exact_mean;
  if (!e.mu && e.f.name == "identity" && std::holds_alternative<SodeModel>(e.model)) {
    // Built-in SODE drifts are odd.
    e.mu = 0.0;
  }
  e.lil.checkpoint_ratio = c.real("stats.checkpoint_ratio");
  e.lil.first_checkpoint = c.real("stats.first_checkpoint");
  if (c.has("stats.window_start")) e.lil.window = {c.real("stats.window_start"), c.real("stats.window_end")};
  e.batch_length = c.real("stats.batch_length");
  e.paths = static_cast<std::uint64_t>(c.integer("mc.paths"));
  e.first_path_id = static_cast<std::uint64_t>(c.integer("mc.first_path_id"));
  e.seed = static_cast<std::uint64_t>(c.integer("seed"));
  e.workers = static_cast<unsigned>(c.integer("mc.workers"));
  e.fail_fast = c.boolean("mc.fail_fast");
  if (c.integer("mc.inject_failure_path") >= 0) {
    e.inject_failure_path = static_cast<std::uint64_t>(c.integer("mc.inject_failure_path"));
  }
  e.fingerprint = config_fingerprint(c);
  return e;
}

ExponentParams make_exponent_params(const RunConfig& c) {
  ExponentParams x;
  x.r = c.real("verify.r");
  x.q = c.real("verify.q");
  x.r_tilde = c.real("verify.r_tilde");
  x.q_tilde = c.real("verify.q_tilde");
  x.beta = c.real("verify.beta");
  x.kappa = c.real("verify.kappa");
  x.gamma1 = c.real("verify.gamma1");
  x.gamma = c.real("verify.gamma");
  x.l = c.real("verify.l");
  x.l_tilde = c.real("verify.l_tilde");
  x.alpha = c.real("verify.alpha");
  x.p = c.real("verify.p");
  return x;
}

StepConditionInputs make_step_inputs(const RunConfig& c) {
  StepConditionInputs in;
  in.spec = make_step_spec(c);
  in.gamma = c.real("verify.gamma");
  in.alpha = c.real("verify.alpha");
  in.l_tilde = c.real("verify.l_tilde");
  in.gamma1 = c.real("verify.gamma1");
  in.rho = RhoLaw::exponential(c.real("verify.rho_rate"));
  in.rho_tau = RhoLaw::exponential(c.real("verify.rho_tau_rate"));
  in.horizon = static_cast<std::uint64_t>(c.integer("verify.horizon"));
  return in;
}

}  // namespace lilsim
