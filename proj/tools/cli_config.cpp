#include "cli_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace dynaflow::cli {

namespace {

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorKind::Configuration, message); }

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) bad("bad value for " + key + ": \"" + text + "\"");
  return value;
}

std::string format(double x) {
  std::ostringstream out;
  out << x;
  return out.str();
}

struct KeyDef {
  ConfigKey key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      {{"window_size", "frames per pooled window"},
       [](Config& c, const std::string& v) { c.windows.window = parse_number<int>("window_size", v); },
       [](const Config& c) { return std::to_string(c.windows.window); }},
      {{"stride", "hop between window starts, frames"},
       [](Config& c, const std::string& v) { c.windows.stride = parse_number<int>("stride", v); },
       [](const Config& c) { return std::to_string(c.windows.stride); }},
      {{"clip_bound", "flow threshold and quantization range, pixels"},
       [](Config& c, const std::string& v) { c.clip_bound = parse_number<float>("clip_bound", v); },
       [](const Config& c) { return format(c.clip_bound); }},
      {{"svm_c", "ranking hinge-loss weight C"},
       [](Config& c, const std::string& v) { c.svm_c = parse_number<double>("svm_c", v); },
       [](const Config& c) { return format(c.svm_c); }},
      {{"solver_tolerance", "relative duality gap at which pooling stops"},
       [](Config& c, const std::string& v) { c.solver.tolerance = parse_number<double>("solver_tolerance", v); },
       [](const Config& c) { return format(c.solver.tolerance); }},
      {{"solver_epochs", "maximum pooling solver epochs"},
       [](Config& c, const std::string& v) { c.solver.max_epochs = parse_number<int>("solver_epochs", v); },
       [](const Config& c) { return std::to_string(c.solver.max_epochs); }},
      {{"solver_seed", "seed of the pair visiting order"},
       [](Config& c, const std::string& v) { c.solver.seed = parse_number<std::uint64_t>("solver_seed", v); },
       [](const Config& c) { return std::to_string(c.solver.seed); }},
      {{"tvl1_tau", "TV-L1 time step"},
       [](Config& c, const std::string& v) { c.tvl1.tau = parse_number<double>("tvl1_tau", v); },
       [](const Config& c) { return format(c.tvl1.tau); }},
      {{"tvl1_lambda", "TV-L1 data term weight"},
       [](Config& c, const std::string& v) { c.tvl1.lambda = parse_number<double>("tvl1_lambda", v); },
       [](const Config& c) { return format(c.tvl1.lambda); }},
      {{"tvl1_theta", "TV-L1 coupling weight"},
       [](Config& c, const std::string& v) { c.tvl1.theta = parse_number<double>("tvl1_theta", v); },
       [](const Config& c) { return format(c.tvl1.theta); }},
      {{"tvl1_levels", "TV-L1 pyramid levels"},
       [](Config& c, const std::string& v) { c.tvl1.pyramid_levels = parse_number<int>("tvl1_levels", v); },
       [](const Config& c) { return std::to_string(c.tvl1.pyramid_levels); }},
      {{"tvl1_scale", "TV-L1 pyramid downscale ratio"},
       [](Config& c, const std::string& v) { c.tvl1.pyramid_scale = parse_number<double>("tvl1_scale", v); },
       [](const Config& c) { return format(c.tvl1.pyramid_scale); }},
      {{"tvl1_warps", "TV-L1 warps per level"},
       [](Config& c, const std::string& v) { c.tvl1.warps_per_level = parse_number<int>("tvl1_warps", v); },
       [](const Config& c) { return std::to_string(c.tvl1.warps_per_level); }},
      {{"tvl1_iterations", "TV-L1 inner iterations per warp"},
       [](Config& c, const std::string& v) { c.tvl1.inner_iterations = parse_number<int>("tvl1_iterations", v); },
       [](const Config& c) { return std::to_string(c.tvl1.inner_iterations); }},
      {{"tvl1_eps", "TV-L1 stopping threshold on the RMS flow update"},
       [](Config& c, const std::string& v) { c.tvl1.convergence_eps = parse_number<double>("tvl1_eps", v); },
       [](const Config& c) { return format(c.tvl1.convergence_eps); }},
      {{"workers", "worker threads; unset means available parallelism"},
       [](Config& c, const std::string& v) { c.workers = parse_number<int>("workers", v); },
       [](const Config& c) { return std::to_string(c.workers); }},
  };
  return defs;
}

const KeyDef* find_key(std::string_view name) {
  for (const auto& d : key_defs()) {
    if (d.key.name == name) return &d;
  }
  return nullptr;
}

}  // namespace

PoolSettings Config::pool_settings() const { return PoolSettings{windows, clip_bound, svm_c, solver, workers}; }

void Config::validate() const {
  windows.validate();
  solver.validate();
  tvl1.validate();
  if (!(clip_bound > 0.0f)) bad("clip_bound must be positive");
  if (!(svm_c > 0.0)) bad("svm_c must be positive");
  if (workers < 1) bad("workers must be >= 1");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& d : key_defs()) out.push_back(d.key);
    return out;
  }();
  return keys;
}

std::string default_value(std::string_view key) {
  const KeyDef* def = find_key(key);
  if (!def) bad("unknown config key \"" + std::string(key) + "\"");
  return def->get(Config{});
}

Settings parse_config_text(std::string_view text) {
  Settings out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) bad("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!find_key(key)) bad("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    out[key] = value;
  }
  return out;
}

Settings read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

Config resolve_config(const Settings& file, const Settings& flags) {
  Config cfg;
  for (const Settings* layer : {&file, &flags}) {
    for (const auto& [key, value] : *layer) {
      const KeyDef* def = find_key(key);
      if (!def) bad("unknown config key \"" + key + "\"");
      def->set(cfg, value);
    }
  }
  cfg.validate();
  return cfg;
}

std::optional<std::filesystem::path> config_path(const std::optional<std::string>& flag) {
  if (flag) return std::filesystem::path(*flag);
  if (const char* env = std::getenv("DYNAFLOW_CONFIG"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

}  // namespace dynaflow::cli
