#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hxkit/error.hpp"

namespace hxkit::report {
struct AnalysisReport;
}

namespace hxkit::ops {

/// Bad invocation (unknown parameter, malformed value). The CLI maps it to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParamType { text, input, output, integer, real, flag, reals, integers };

struct ParamSpec {
  std::string name;  // snake_case; the CLI spells it --kebab-case
  ParamType type = ParamType::text;
  bool required = false;
  std::optional<std::string> default_value;  // in CLI text form
  std::string help;
  bool positional = false;
  std::vector<std::string> choices;  // text only; empty = free
};

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>,
                           std::vector<std::int64_t>>;

class Params {
 public:
  void set(const std::string& name, Value v) { values_[name] = std::move(v); }
  bool has(const std::string& name) const { return values_.count(name) != 0; }

  std::string text(const std::string& name) const;
  std::filesystem::path path(const std::string& name) const { return text(name); }
  std::int64_t integer(const std::string& name) const;
  std::size_t count(const std::string& name) const;  // integer >= 0
  double real(const std::string& name) const;
  bool flag(const std::string& name) const;
  std::vector<double> reals(const std::string& name) const;
  std::vector<std::int64_t> integers(const std::string& name) const;

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  const Value& get(const std::string& name) const;
  std::map<std::string, Value> values_;
};

struct Context {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::uint64_t seed = 42;
  bool timestamps = false;
  std::optional<std::filesystem::path> report_dir;
  Warnings warnings;
};

struct Operation {
  std::string name;  // dotted path, e.g. "unmix.extract"
  std::string help;
  std::vector<ParamSpec> params;
  bool seeded = false;
  std::function<void(const Params&, Context&)> run;

  const ParamSpec* find(const std::string& param) const;
};

const std::vector<Operation>& registry();
const Operation* find(std::string_view name);

/// Converts CLI text to the declared type; UsageError on mismatch.
Value parse_value(const ParamSpec& spec, const std::string& text);

/// Fills defaults, checks required parameters and choices. Unknown keys are a UsageError.
Params resolve(const Operation& op, std::map<std::string, Value> given);

/// Emits the report when the step asked for one (`report` parameter or a context report_dir).
void finish_report(const Operation& op, const Params& params, Context& ctx,
                   report::AnalysisReport& report);

std::string cli_flag(const std::string& param_name);

}  // namespace hxkit::ops
