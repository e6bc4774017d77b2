#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lilsim/assume.hpp"
#include "lilsim/errors.hpp"
#include "lilsim/grid.hpp"
#include "lilsim/integrate.hpp"
#include "lilsim/mc.hpp"
#include "lilsim/model.hpp"

namespace lilsim {

using ConfigValue = std::variant<std::int64_t, double, bool, std::string>;

struct Diagnostic {
  std::size_t line = 0;  // 0 when the problem is not tied to a line
  std::string key;
  std::string message;

  std::string format() const;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// A configuration that failed validation, with every violation found.
class ConfigDiagnostics : public ConfigError {
 public:
  explicit ConfigDiagnostics(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// Resolved configuration: every known key with a default is present.
struct RunConfig {
  std::map<std::string, ConfigValue> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& string(const std::string& key) const;
  std::optional<double> optional_real(const std::string& key) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<Diagnostic> diagnostics;
};

/// Never throws: returns a config or the full list of violations.
ParseResult try_parse_config(std::string_view text);

/// Throws ConfigDiagnostics on any violation.
RunConfig parse_config(std::string_view text);

/// Re-validates a config after programmatic edits (overrides).
void validate_config(const RunConfig& config);

/// INI text of the resolved config; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// Hash of the config without the keys that only affect scheduling or the
/// slice of paths (mc.paths, mc.first_path_id, mc.workers, mc.fail_fast,
/// mc.inject_failure_path, output.dir).
std::uint64_t config_fingerprint(const RunConfig& config);

/// Every key the parser accepts.
std::vector<std::string> known_keys();

/// Closest known key within edit distance 3, if any.
std::optional<std::string> suggest_key(const std::string& unknown);

std::size_t levenshtein(std::string_view a, std::string_view b);

// Builders from a validated config.
StepSpec make_step_spec(const RunConfig& c);
Model make_model(const RunConfig& c);
SchemeSpec make_scheme(const RunConfig& c);
TestFunction make_test_function(const RunConfig& c);
State make_initial_state(const RunConfig& c);
EnsembleConfig make_ensemble_config(const RunConfig& c);
ExponentParams make_exponent_params(const RunConfig& c);
StepConditionInputs make_step_inputs(const RunConfig& c);

}  // namespace lilsim
