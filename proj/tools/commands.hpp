#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cli_config.hpp"

namespace dynaflow::cli {

// Process exit statuses. Library errors map one-to-one from ErrorKind.
enum ExitStatus : int {
  kExitOk = 0,
  kExitCriterionUnmet = 1,
  kExitUsage = 2,
  kExitFormat = 3,
  kExitLength = 4,
  kExitDimension = 5,
  kExitIo = 6,
  kExitEmptyInput = 7,
  kExitConfiguration = 8,
  kExitContract = 9,
  kExitInternal = 10,
};

int exit_status(ErrorKind kind);

namespace fs = std::filesystem;

/// Flow between consecutive frames, one "{stem of earlier frame}.flo" each.
int cmd_flow(const fs::path& frames_dir, const fs::path& out_dir, const Config& cfg, std::ostream& out);

enum class PoolMode { DynamicFlow, DynamicImage };

struct PoolRequest {
  fs::path input;  // .flo directory, or raster frames (flow is computed first in df mode)
  fs::path out_dir;
  PoolMode mode = PoolMode::DynamicFlow;
  std::string clip_id;  // defaults to the input directory name
  std::string label = "unlabeled";
};

/// Per window: "{stem}.npy" raw planes plus rendered PNGs; "manifest.tsv" lists the windows.
int cmd_pool(const PoolRequest& request, const Config& cfg, std::ostream& out);

/// Pools the same input once per window size into out_dir/w{size}/ and writes
/// out_dir/sweep.tsv. Wall times are printed, not stored.
int cmd_sweep(const fs::path& input, const fs::path& out_dir, const std::vector<int>& window_sizes,
              const Config& cfg, std::ostream& out);

struct ToyevalRequest {
  bool easy = false;
  int classes = 4;
  int clips_per_class = 50;
  std::uint64_t seed = 7;
  bool estimated_flow = false;  // TV-L1 instead of ground-truth flow for DF
  std::optional<fs::path> out_dir;
};

/// Exit 0 iff the regime's acceptance criterion holds.
int cmd_toyeval(const ToyevalRequest& request, const Config& cfg, std::ostream& out);

/// Renders a raw plane file: [2,h,w] as flow (u, v and color PNGs), [3,h,w]
/// as RGB, [h,w] or [1,h,w] as grayscale.
int cmd_render(const fs::path& npy, const fs::path& out_prefix, std::ostream& out);

}  // namespace dynaflow::cli
