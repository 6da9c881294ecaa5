#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "dynaflow/flow_core.hpp"
#include "dynaflow/toyeval.hpp"
#include "support.hpp"

namespace testing {

inline std::string frame_name(std::size_t i, const char* ext) {
  std::ostringstream s;
  s << std::setw(4) << std::setfill('0') << i << ext;
  return s.str();
}

// A moving-square clip written as PNG frames 0000.png, 0001.png, ...
inline void write_frame_fixture(const fs::path& dir, int n_frames, int size = 32) {
  fs::create_directories(dir);
  dynaflow::SyntheticClipConfig cfg;
  cfg.size = size;
  cfg.n_frames = n_frames;
  cfg.speed = 0.3;
  cfg.background_ramp = 0.5;
  cfg.noise_sigma = 2.0;
  cfg.seed = 3;
  const auto clip = dynaflow::generate_clip(cfg);
  for (std::size_t i = 0; i < clip.frames.size(); ++i) dynaflow::write_png(clip.frames[i], dir / frame_name(i, ".png"));
}

// Random smooth-ish flow fields written as 0000.flo, 0001.flo, ...
inline void write_flow_fixture(const fs::path& dir, int n_fields, int w = 16, int h = 12, std::uint64_t seed = 5) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 3.0f);
  for (int i = 0; i < n_fields; ++i) {
    std::vector<float> u(static_cast<std::size_t>(w) * h), v(u.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto k = static_cast<std::size_t>(y * w + x);
        u[k] = 0.05f * static_cast<float>(i) * static_cast<float>(x) + d(rng);
        v[k] = -0.5f + d(rng);
      }
    }
    dynaflow::write_flo(dynaflow::FlowField(w, h, u, v), dir / frame_name(static_cast<std::size_t>(i), ".flo"));
  }
}

// Relative path -> bytes for every regular file below `dir`.
inline std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
  }
  return out;
}

struct RunResult {
  int status = -1;
  std::string output;
};

// Runs the CLI through the shell with stdout and stderr captured.
inline RunResult run_cli(const std::string& exe, const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + exe + "' " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace testing
