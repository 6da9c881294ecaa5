#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynaflow/flow_core.hpp"
#include "dynaflow/rankpool.hpp"

namespace dynaflow {

struct WindowSpec {
  int window = 25;  // frames per pooled window
  int stride = 5;   // hop between window starts

  void validate() const;  // throws Configuration
};

struct Window {
  std::size_t start;
  std::size_t end;  // exclusive

  friend bool operator==(const Window&, const Window&) = default;
};

/// Full-length windows [k*s, k*s + w) for k = 0..floor((n - w) / s); a clip
/// shorter than the window yields the single window [0, n). Partial tail
/// windows are dropped.
std::vector<Window> make_windows(std::size_t n, const WindowSpec& spec);

/// Number of pooled samples one clip of n frames contributes (~ n / s for n >> w).
std::size_t expansion_factor(std::size_t n, const WindowSpec& spec);

struct ManifestEntry {
  std::size_t start;
  std::size_t end;
  std::string path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ClipManifest {
  std::string clip_id;
  std::string label;
  std::size_t n_frames = 0;
  std::vector<ManifestEntry> windows;

  void validate() const;  // throws Format
  friend bool operator==(const ClipManifest&, const ClipManifest&) = default;
};

// Output stem for one window: "{clip_id}_w{start}".
std::string window_stem(std::string_view clip_id, std::size_t start);

// Tab-separated records, one per window, fields clip_id, label, start, end,
// path; each clip opens with a "#clip" line carrying its frame count.
std::string serialize_manifest(std::span<const ClipManifest> clips);
std::vector<ClipManifest> parse_manifest(std::string_view text);

struct PoolSettings {
  WindowSpec windows;
  float clip_bound = kDefaultClipBound;
  double svm_c = kDefaultSvmC;
  SolverConfig solver;
  int workers = 1;
};

struct ClipResult {
  std::vector<DynamicFlowImage> images;
  ClipManifest manifest;
  std::vector<double> pool_seconds;  // wall time per window
};

/// Conditions and pools every window of a flow clip. Manifest paths are the
/// raw-plane names "{stem}.npy", relative to wherever the caller stores them.
ClipResult run_clip(const FlowSequence& flow, const PoolSettings& settings, const std::string& clip_id,
                    const std::string& label);

struct RgbClipResult {
  std::vector<DynamicImage> images;
  ClipManifest manifest;
  std::vector<double> pool_seconds;
};

/// Dynamic-image baseline over windows of RGB frames.
RgbClipResult run_rgb_clip(std::span<const RgbFrame> frames, const PoolSettings& settings,
                           const std::string& clip_id, const std::string& label);

/// Concatenates feature parts in order, optionally scaling each part to unit
/// L2 norm first (all-zero parts are left as they are).
Vector assemble_feature(std::span<const Vector> parts, bool l2_normalize = false);

}  // namespace dynaflow
