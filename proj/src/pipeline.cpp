#include "dynaflow/pipeline.hpp"

#include <chrono>
#include <optional>
#include <cmath>
#include <sstream>

#include "dynaflow/preprocess.hpp"
#include "dynaflow/work_pool.hpp"

namespace dynaflow {

void WindowSpec::validate() const {
  if (window < 1) throw Error(ErrorKind::Configuration, "window size must be >= 1");
  if (stride < 1) throw Error(ErrorKind::Configuration, "stride must be >= 1");
}

std::vector<Window> make_windows(std::size_t n, const WindowSpec& spec) {
  spec.validate();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "cannot window an empty clip");
  const auto w = static_cast<std::size_t>(spec.window);
  const auto s = static_cast<std::size_t>(spec.stride);
  if (n < w) return {{0, n}};
  std::vector<Window> out;
  for (std::size_t start = 0; start + w <= n; start += s) out.push_back({start, start + w});
  return out;
}

std::size_t expansion_factor(std::size_t n, const WindowSpec& spec) { return make_windows(n, spec).size(); }

// --- manifest ----------------------------------------------------------------

namespace {

void check_field(const std::string& value, const char* name) {
  if (value.empty() || value.find_first_of("\t\n\r") != std::string::npos || value.front() == '#') {
    throw Error(ErrorKind::Format, std::string("manifest ") + name + " must be nonempty, free of tabs/newlines "
                                   "and must not start with '#': \"" + value + "\"");
  }
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', pos);
    fields.emplace_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

std::size_t parse_count(const std::string& field, std::size_t line_no) {
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size() || field.front() == '-') {
    throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_no) + ": bad count \"" + field + "\"");
  }
  return static_cast<std::size_t>(value);
}

}  // namespace

void ClipManifest::validate() const {
  check_field(clip_id, "clip_id");
  check_field(label, "label");
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& e = windows[k];
    check_field(e.path, "path");
    if (e.start >= e.end || e.end > n_frames) {
      throw Error(ErrorKind::Format, "manifest window [" + std::to_string(e.start) + ", " + std::to_string(e.end) +
                                         ") outside clip of " + std::to_string(n_frames) + " frames");
    }
    for (std::size_t m = 0; m < k; ++m) {
      if (windows[m].start == e.start) throw Error(ErrorKind::Format, "manifest repeats window start " + std::to_string(e.start));
    }
  }
}

std::string window_stem(std::string_view clip_id, std::size_t start) {
  return std::string(clip_id) + "_w" + std::to_string(start);
}

std::string serialize_manifest(std::span<const ClipManifest> clips) {
  std::ostringstream out;
  for (const auto& clip : clips) {
    clip.validate();
    out << "#clip\t" << clip.clip_id << '\t' << clip.label << '\t' << clip.n_frames << '\n';
    for (const auto& e : clip.windows) {
      out << clip.clip_id << '\t' << clip.label << '\t' << e.start << '\t' << e.end << '\t' << e.path << '\n';
    }
  }
  return out.str();
}

std::vector<ClipManifest> parse_manifest(std::string_view text) {
  std::vector<ClipManifest> clips;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.front() == "#clip") {
      if (fields.size() != 4) throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_no) + ": bad clip header");
      clips.push_back(ClipManifest{fields[1], fields[2], parse_count(fields[3], line_no), {}});
      continue;
    }
    if (fields.size() != 5) {
      throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_no) + ": expected 5 fields, got " +
                                         std::to_string(fields.size()));
    }
    if (clips.empty() || clips.back().clip_id != fields[0] || clips.back().label != fields[1]) {
      throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_no) + ": record outside its clip header");
    }
    clips.back().windows.push_back({parse_count(fields[2], line_no), parse_count(fields[3], line_no), fields[4]});
  }
  for (const auto& clip : clips) clip.validate();
  return clips;
}

// --- per-clip orchestration -----------------------------------------------------

namespace {

ClipManifest plan_manifest(const std::vector<Window>& windows, std::size_t n, const std::string& clip_id,
                           const std::string& label) {
  ClipManifest manifest{clip_id, label, n, {}};
  for (const auto& w : windows) manifest.windows.push_back({w.start, w.end, window_stem(clip_id, w.start) + ".npy"});
  manifest.validate();
  return manifest;
}

void validate_settings(const PoolSettings& settings) {
  settings.windows.validate();
  settings.solver.validate();
  if (!(settings.clip_bound > 0.0f)) throw Error(ErrorKind::Configuration, "clip_bound must be positive");
  if (!(settings.svm_c > 0.0)) throw Error(ErrorKind::Configuration, "svm_c must be positive");
}

template <typename Image, typename PoolFn>
void pool_windows(const std::vector<Window>& windows, int workers, std::vector<Image>& images,
                  std::vector<double>& seconds, PoolFn pool) {
  std::vector<std::optional<Image>> slots(windows.size());
  seconds.assign(windows.size(), 0.0);
  try {
    parallel_for(windows.size(), workers, [&](std::size_t k) {
      const auto t0 = std::chrono::steady_clock::now();
      slots[k] = pool(windows[k]);
      seconds[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
  } catch (const Error& e) {
    std::size_t failed = 0;
    while (failed < slots.size() && slots[failed]) ++failed;
    throw Error(e.kind(), "window " + std::to_string(failed) + " [" + std::to_string(windows[failed].start) + ", " +
                              std::to_string(windows[failed].end) + "): " + e.what());
  }
  images.clear();
  images.reserve(slots.size());
  for (auto& s : slots) images.push_back(std::move(*s));
}

}  // namespace

ClipResult run_clip(const FlowSequence& flow, const PoolSettings& settings, const std::string& clip_id,
                    const std::string& label) {
  validate_settings(settings);
  const auto windows = make_windows(flow.size(), settings.windows);
  ClipResult result;
  result.manifest = plan_manifest(windows, flow.size(), clip_id, label);
  pool_windows(windows, settings.workers, result.images, result.pool_seconds, [&](const Window& w) {
    const std::span<const FlowField> frames(flow.frames().data() + w.start, w.end - w.start);
    const auto conditioned = condition_sequence(frames, settings.clip_bound);
    return pool_flow(conditioned, settings.svm_c, settings.solver);
  });
  return result;
}

RgbClipResult run_rgb_clip(std::span<const RgbFrame> frames, const PoolSettings& settings, const std::string& clip_id,
                           const std::string& label) {
  validate_settings(settings);
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "no frames to pool");
  const auto windows = make_windows(frames.size(), settings.windows);
  RgbClipResult result;
  result.manifest = plan_manifest(windows, frames.size(), clip_id, label);
  pool_windows(windows, settings.workers, result.images, result.pool_seconds, [&](const Window& w) {
    return pool_rgb(frames.subspan(w.start, w.end - w.start), settings.svm_c, settings.solver);
  });
  return result;
}

Vector assemble_feature(std::span<const Vector> parts, bool l2_normalize) {
  if (parts.empty()) throw Error(ErrorKind::EmptyInput, "no feature parts to assemble");
  Vector out;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Vector& part = parts[p];
    if (part.empty()) throw Error(ErrorKind::Dimension, "feature part " + std::to_string(p) + " is empty");
    double norm = 1.0;
    if (l2_normalize) {
      double norm2 = 0.0;
      for (double x : part) norm2 += x * x;
      if (norm2 > 0.0) norm = std::sqrt(norm2);
    }
    for (double x : part) out.push_back(x / norm);
  }
  return out;
}

}  // namespace dynaflow
