#include "hxkit/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iostream>
#include <map>

#include "hxkit/detail/strings.hpp"
#include "hxkit/ops.hpp"
#include "hxkit/parallel.hpp"
#include "hxkit/pipeline.hpp"

namespace hxkit::cli {

namespace {

struct Leaf {
  const ops::Operation* op = nullptr;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
};

CLI::App* child(CLI::App* parent, const std::string& name, const std::string& help) {
  for (CLI::App* sub : parent->get_subcommands({}))
    if (sub->get_name() == name) return sub;
  CLI::App* sub = parent->add_subcommand(name, help);
  return sub;
}

std::string type_hint(ops::ParamType t) {
  switch (t) {
    case ops::ParamType::integer: return "INT";
    case ops::ParamType::real: return "NUM";
    case ops::ParamType::reals: return "NUM,...";
    case ops::ParamType::integers: return "INT,...";
    case ops::ParamType::input:
    case ops::ParamType::output: return "PATH";
    default: return "TEXT";
  }
}

std::size_t threads_from_env() {
  const char* env = std::getenv("HXKIT_THREADS");
  if (!env) return 0;
  const auto v = detail::parse_int(detail::trim(env));
  return v && *v >= 0 ? static_cast<std::size_t>(*v) : 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hxkit: hyperspectral image analysis toolkit"};
  app.name("hxkit");
  app.fallthrough();
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  std::optional<std::size_t> threads;
  bool timestamps = false;
  std::string report_dir;
  app.add_option("--seed", seed, "seed for randomized steps")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = all cores; env HXKIT_THREADS)");
  app.add_flag("--timestamps", timestamps, "embed the run time in reports");
  app.add_option("--report-dir", report_dir, "write a report for every reporting step here");

  std::deque<Leaf> leaves;
  for (const auto& op : ops::registry()) {
    CLI::App* node = &app;
    const auto parts = detail::split(op.name, '.');
    for (std::size_t i = 0; i < parts.size(); ++i) {
      node = child(node, parts[i], i + 1 == parts.size() ? op.help : parts[i] + " operations");
      if (i + 1 < parts.size()) node->require_subcommand(1);
    }
    Leaf& leaf = leaves.emplace_back();
    leaf.op = &op;
    leaf.app = node;
    for (const auto& spec : op.params) {
      if (spec.type == ops::ParamType::flag) {
        node->add_flag(ops::cli_flag(spec.name), leaf.flags[spec.name], spec.help);
        continue;
      }
      const std::string name = spec.positional ? spec.name : ops::cli_flag(spec.name);
      std::string help = spec.help;
      if (spec.default_value && !spec.default_value->empty()) help += " [default: " + *spec.default_value + "]";
      CLI::Option* opt = node->add_option(name, leaf.text[spec.name], help)->type_name(type_hint(spec.type));
      if (spec.required && !spec.default_value) opt->required();
      if (!spec.choices.empty()) opt->check(CLI::IsMember(spec.choices));
    }
  }
  CLI::App* pipe = app.add_subcommand("pipeline", "batch processing from a TOML config");
  pipe->require_subcommand(1);
  CLI::App* pipe_run = pipe->add_subcommand("run", "run every step of a config");
  std::string config_path;
  pipe_run->add_option("config", config_path, "pipeline TOML")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << app.help();
    return 1;
  }

  set_thread_count(threads ? *threads : threads_from_env());
  ops::Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.seed = seed;
  ctx.timestamps = timestamps;
  if (!report_dir.empty()) ctx.report_dir = report_dir;

  int code = 0;
  try {
    if (pipe_run->parsed()) {
      pipeline::Config cfg = pipeline::load(config_path);
      if (app.count("--seed") == 0) ctx.seed = cfg.seed;
      if (!threads && !std::getenv("HXKIT_THREADS") && cfg.threads) set_thread_count(*cfg.threads);
      if (!ctx.report_dir) ctx.report_dir = cfg.report_dir;
      pipeline::run(cfg, ctx);
    } else {
      const Leaf* chosen = nullptr;
      for (const auto& leaf : leaves)
        if (leaf.app->parsed()) chosen = &leaf;
      if (!chosen) throw ops::UsageError("no operation selected");
      std::map<std::string, ops::Value> given;
      for (const auto& spec : chosen->op->params) {
        if (spec.type == ops::ParamType::flag) {
          if (chosen->app->count(ops::cli_flag(spec.name))) given[spec.name] = chosen->flags.at(spec.name);
          continue;
        }
        const std::string name = spec.positional ? spec.name : ops::cli_flag(spec.name);
        if (chosen->app->count(name)) given[spec.name] = ops::parse_value(spec, chosen->text.at(spec.name));
      }
      const ops::Params params = ops::resolve(*chosen->op, std::move(given));
      chosen->op->run(params, ctx);
    }
  } catch (const ops::UsageError& e) {
    err << "error: " << e.what() << "\n";
    code = 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = 2;
  }
  for (const auto& w : ctx.warnings) err << "warning: " << w << "\n";
  return code;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hxkit::cli
