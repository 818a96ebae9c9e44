#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hxkit/ops.hpp"

namespace hxkit::pipeline {

struct Step {
  std::string op;
  ops::Params params;
};

/// TOML: top-level seed / threads / report_dir, then [[step]] tables with an
/// `op` key and the operation's parameters. Relative paths resolve against base_dir.
struct Config {
  std::vector<Step> steps;
  std::uint64_t seed = 42;
  std::optional<std::size_t> threads;
  std::optional<std::filesystem::path> report_dir;
  std::filesystem::path base_dir;
};

/// Parses and type-checks every step; nothing executes.
Config parse(std::string_view toml_text, const std::filesystem::path& base_dir = ".");
Config load(const std::filesystem::path& config_path);

void run(const Config& config, ops::Context& ctx);

}  // namespace hxkit::pipeline
