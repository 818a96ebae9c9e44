#include "hxkit/pipeline.hpp"

#include <toml.hpp>

#include <iostream>
#include <sstream>

#include "hxkit/envi_io.hpp"

namespace hxkit::pipeline {

namespace {

std::string where(std::size_t index, const std::string& op) {
  return "step " + std::to_string(index + 1) + (op.empty() ? "" : " (" + op + ")");
}

ops::Value convert(const ops::ParamSpec& spec, const toml::node& node, const std::filesystem::path& base,
                   const std::string& ctx) {
  auto bad = [&](const char* what) { return ops::UsageError(ctx + ": " + spec.name + " must be " + what); };
  auto number = [&](const toml::node& n) -> double {
    if (auto i = n.value<std::int64_t>(); i && n.is_integer()) return static_cast<double>(*i);
    if (auto d = n.value<double>(); d && n.is_floating_point()) return *d;
    throw bad("a number");
  };
  switch (spec.type) {
    case ops::ParamType::text: {
      if (!node.is_string()) throw bad("a string");
      return std::string(*node.value<std::string>());
    }
    case ops::ParamType::input:
    case ops::ParamType::output: {
      if (!node.is_string()) throw bad("a path string");
      std::filesystem::path p = *node.value<std::string>();
      if (p.is_relative()) p = base / p;
      return p.lexically_normal().string();
    }
    case ops::ParamType::integer:
      if (!node.is_integer()) throw bad("an integer");
      return *node.value<std::int64_t>();
    case ops::ParamType::real:
      return number(node);
    case ops::ParamType::flag:
      if (!node.is_boolean()) throw bad("a boolean");
      return *node.value<bool>();
    case ops::ParamType::reals: {
      std::vector<double> out;
      if (const auto* arr = node.as_array()) {
        for (const auto& item : *arr) out.push_back(number(item));
      } else {
        out.push_back(number(node));
      }
      return out;
    }
    case ops::ParamType::integers: {
      std::vector<std::int64_t> out;
      const auto* arr = node.as_array();
      if (!arr) throw bad("an array of integers");
      for (const auto& item : *arr) {
        if (!item.is_integer()) throw bad("an array of integers");
        out.push_back(*item.value<std::int64_t>());
      }
      return out;
    }
  }
  throw bad("a value");
}

}  // namespace

Config parse(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "pipeline config: " << e.description() << " at line " << e.source().begin.line;
    throw ops::UsageError(os.str());
  }
  Config cfg;
  cfg.base_dir = base_dir;
  for (const auto& [key, node] : root) {
    const std::string k(key.str());
    if (k == "seed") {
      if (!node.is_integer() || *node.value<std::int64_t>() < 0) throw ops::UsageError("pipeline config: seed must be a non-negative integer");
      cfg.seed = static_cast<std::uint64_t>(*node.value<std::int64_t>());
    } else if (k == "threads") {
      if (!node.is_integer() || *node.value<std::int64_t>() < 0) throw ops::UsageError("pipeline config: threads must be a non-negative integer");
      cfg.threads = static_cast<std::size_t>(*node.value<std::int64_t>());
    } else if (k == "report_dir") {
      if (!node.is_string()) throw ops::UsageError("pipeline config: report_dir must be a string");
      std::filesystem::path p = *node.value<std::string>();
      cfg.report_dir = p.is_relative() ? base_dir / p : p;
    } else if (k != "step") {
      throw ops::UsageError("pipeline config: unknown key '" + k + "'");
    }
  }
  const toml::array* steps = root["step"].as_array();
  if (!steps || steps->empty()) throw ops::UsageError("pipeline config: no [[step]] tables");
  for (std::size_t i = 0; i < steps->size(); ++i) {
    const toml::table* t = (*steps)[i].as_table();
    if (!t) throw ops::UsageError(where(i, "") + ": not a table");
    const auto op_name = (*t)["op"].value<std::string>();
    if (!op_name) throw ops::UsageError(where(i, "") + ": missing op");
    const ops::Operation* op = ops::find(*op_name);
    if (!op) throw ops::UsageError(where(i, *op_name) + ": unknown operation");
    std::map<std::string, ops::Value> given;
    for (const auto& [key, node] : *t) {
      const std::string k(key.str());
      if (k == "op") continue;
      const ops::ParamSpec* spec = op->find(k);
      if (!spec) throw ops::UsageError(where(i, *op_name) + ": unknown parameter '" + k + "'");
      given[k] = convert(*spec, node, base_dir, where(i, *op_name));
    }
    try {
      cfg.steps.push_back({*op_name, ops::resolve(*op, std::move(given))});
    } catch (const ops::UsageError& e) {
      throw ops::UsageError(where(i, *op_name) + ": " + e.what());
    }
  }
  return cfg;
}

Config load(const std::filesystem::path& config_path) {
  const std::string text = envi::read_file_text(config_path);
  std::filesystem::path base = config_path.parent_path();
  if (base.empty()) base = ".";
  return parse(text, base);
}

void run(const Config& config, ops::Context& ctx) {
  std::ostream& log = ctx.err ? *ctx.err : std::cerr;
  for (std::size_t i = 0; i < config.steps.size(); ++i) {
    const auto& step = config.steps[i];
    log << "[" << i + 1 << "/" << config.steps.size() << "] " << step.op << "\n";
    ops::find(step.op)->run(step.params, ctx);
  }
}

}  // namespace hxkit::pipeline
