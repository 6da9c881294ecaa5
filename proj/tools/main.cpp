#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_config.hpp"
#include "commands.hpp"

using namespace dynaflow;
using namespace dynaflow::cli;

namespace {

// Config keys become flags on every subcommand; values stay as text until
// they are layered over the config file.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::optional<std::string> config_file;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat key = value config file (default: $DYNAFLOW_CONFIG)");
    for (const auto& key : config_keys()) {
      std::string names = "--" + key.name;
      if (key.name == "window_size") names += ",--window";
      options[key.name] = app->add_option(names, values[key.name],
                                          key.help + " [default: " + default_value(key.name) + "]");
    }
    app->group("Options");
  }

  Config resolve() const {
    Settings flags;
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) flags[name] = values.at(name);
    }
    Settings file;
    if (const auto path = config_path(config_file)) file = read_config_file(*path);
    return resolve_config(file, flags);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynaflow: dynamic flow images by rank pooling optical flow"};
  app.require_subcommand(1);
  app.footer("Config keys may also be set in a key = value file passed with --config or named by\n"
             "DYNAFLOW_CONFIG. Precedence: flag > file > default.");

  std::string in_dir, out_dir;

  ConfigFlags flow_flags;
  auto* flow = app.add_subcommand("flow", "compute TV-L1 flow between consecutive frames");
  flow->add_option("frames", in_dir, "directory of raster frames")->required();
  flow->add_option("out", out_dir, "output directory for .flo files")->required();
  flow_flags.attach(flow);

  ConfigFlags pool_flags;
  PoolRequest pool_req;
  std::string mode = "df";
  auto* pool = app.add_subcommand("pool", "pool sliding windows into dynamic flow (df) or dynamic (di) images");
  pool->add_option("input", in_dir, "directory of .flo files or raster frames")->required();
  pool->add_option("out", out_dir, "output directory")->required();
  pool->add_option("--mode", mode, "df or di [default: df]")->check(CLI::IsMember({"df", "di"}));
  pool->add_option("--clip-id", pool_req.clip_id, "clip identifier [default: input directory name]");
  pool->add_option("--label", pool_req.label, "label carried by every window [default: unlabeled]");
  pool_flags.attach(pool);

  ConfigFlags sweep_flags;
  std::vector<int> sweep_sizes = {15, 25, 30};
  auto* sweep = app.add_subcommand("sweep", "pool the same flow once per window size");
  sweep->add_option("input", in_dir, "directory of .flo files or raster frames")->required();
  sweep->add_option("out", out_dir, "output directory")->required();
  sweep->add_option("--sizes", sweep_sizes, "window sizes [default: 15 25 30]")->delimiter(',');
  sweep_flags.attach(sweep);

  ConfigFlags toy_flags;
  ToyevalRequest toy_req;
  std::string toy_out;
  auto* toy = app.add_subcommand("toyeval", "synthetic DF vs DI comparison under background drift");
  toy->add_flag("--easy", toy_req.easy, "drift-free regime (both modes should score >= 95%)");
  toy->add_option("--classes", toy_req.classes, "motion classes, 2..4 [default: 4]");
  toy->add_option("--clips-per-class", toy_req.clips_per_class, "clips per class [default: 50]");
  toy->add_option("--seed", toy_req.seed, "dataset seed [default: 7]");
  toy->add_flag("--tvl1", toy_req.estimated_flow, "use TV-L1 flow instead of ground-truth flow");
  toy->add_option("--out", toy_out, "directory for report.txt and report.json");
  toy_flags.attach(toy);

  ConfigFlags render_flags;
  std::string npy_path, prefix;
  auto* rend = app.add_subcommand("render", "render a raw .npy plane file to PNG");
  rend->add_option("planes", npy_path, "raw .npy planes")->required();
  rend->add_option("prefix", prefix, "output path prefix")->required();
  render_flags.attach(rend);  // accepted and validated; rendering itself has no tunables

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*flow) return cmd_flow(in_dir, out_dir, flow_flags.resolve(), std::cout);
    if (*pool) {
      pool_req.input = in_dir;
      pool_req.out_dir = out_dir;
      pool_req.mode = mode == "di" ? PoolMode::DynamicImage : PoolMode::DynamicFlow;
      return cmd_pool(pool_req, pool_flags.resolve(), std::cout);
    }
    if (*sweep) return cmd_sweep(in_dir, out_dir, sweep_sizes, sweep_flags.resolve(), std::cout);
    if (*toy) {
      if (!toy_out.empty()) toy_req.out_dir = toy_out;
      return cmd_toyeval(toy_req, toy_flags.resolve(), std::cout);
    }
    if (*rend) {
      render_flags.resolve();
      return cmd_render(npy_path, prefix, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_status(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
