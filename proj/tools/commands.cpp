#include "commands.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "dynaflow/npy.hpp"
#include "dynaflow/toyeval.hpp"
#include "dynaflow/work_pool.hpp"

namespace dynaflow::cli {

int exit_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return kExitFormat;
    case ErrorKind::Length: return kExitLength;
    case ErrorKind::Dimension: return kExitDimension;
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::EmptyInput: return kExitEmptyInput;
    case ErrorKind::Configuration: return kExitConfiguration;
    case ErrorKind::Contract: return kExitContract;
  }
  return kExitInternal;
}

namespace {

// Files written by one command. Unless commit() is reached, everything
// written so far is removed again, including a directory the command created.
class OutputSet {
 public:
  explicit OutputSet(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    if (!fs::exists(dir_, ec)) {
      if (!fs::create_directories(dir_, ec) || ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string());
      created_.push_back(dir_);
    } else if (!fs::is_directory(dir_, ec)) {
      throw Error(ErrorKind::Io, "not a directory: " + dir_.string());
    }
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ignored;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) {
      // Something else squatting on an output name is not ours to delete.
      if (!fs::is_directory(*it, ignored)) fs::remove(*it, ignored);
    }
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove(*it, ignored);
  }

  const fs::path& dir() const { return dir_; }

  // Registers before writing so a half-finished file is cleaned up as well.
  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }

  void subdir(const std::string& name) {
    const fs::path p = dir_ / name;
    std::error_code ec;
    if (!fs::exists(p, ec)) {
      if (!fs::create_directories(p, ec) || ec) throw Error(ErrorKind::Io, "cannot create " + p.string());
      created_.push_back(p);
    }
  }

  std::size_t count() const { return files_.size(); }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  std::vector<fs::path> created_;
  bool committed_ = false;
};

void write_text(OutputSet& outputs, const std::string& name, const std::string& text) {
  const fs::path p = outputs.add(name);
  write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool is_flo(const fs::path& path) { return path.extension() == ".flo"; }

FlowSequence estimate_flow(const std::vector<GrayFrame>& frames, const Config& cfg) {
  if (frames.size() < 2) throw Error(ErrorKind::EmptyInput, "need at least two frames to compute flow");
  std::vector<std::optional<FlowField>> slots(frames.size() - 1);
  parallel_for(slots.size(), cfg.workers,
               [&](std::size_t i) { slots[i] = compute_flow(frames[i], frames[i + 1], cfg.tvl1); });
  std::vector<FlowField> fields;
  fields.reserve(slots.size());
  for (auto& s : slots) fields.push_back(std::move(*s));
  return FlowSequence(std::move(fields));
}

// A directory of .flo files, or raster frames from which flow is computed.
FlowSequence load_flow_input(const fs::path& input, const Config& cfg) {
  const auto flo_files = sorted_files(input, is_flo);
  if (flo_files.empty()) return estimate_flow(load_gray_sequence(input), cfg);
  std::vector<FlowField> fields;
  fields.reserve(flo_files.size());
  for (const auto& f : flo_files) fields.push_back(read_flo(f));
  return FlowSequence(std::move(fields));
}

std::string default_clip_id(const fs::path& input) {
  fs::path p = input;
  if (!p.has_filename()) p = p.parent_path();
  std::string name = p.filename().string();
  return name.empty() || name == "." || name == ".." ? std::string("clip") : name;
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<std::size_t> plane_shape(std::size_t channels, int width, int height) {
  return {channels, static_cast<std::size_t>(height), static_cast<std::size_t>(width)};
}

void write_flow_images(OutputSet& outputs, const std::string& prefix, const ClipResult& result) {
  for (std::size_t k = 0; k < result.images.size(); ++k) {
    const auto& image = result.images[k];
    const std::string stem = prefix + window_stem(result.manifest.clip_id, result.manifest.windows[k].start);
    const auto shape = plane_shape(2, image.width(), image.height());
    write_npy(outputs.add(stem + ".npy"), shape, image.flatten());
    const FlowRendering r = render(image);
    write_png(r.u, outputs.add(stem + "_u.png"));
    write_png(r.v, outputs.add(stem + "_v.png"));
    write_png(r.color, outputs.add(stem + "_flow.png"));
  }
  const ClipManifest manifests[] = {result.manifest};
  write_text(outputs, prefix + "manifest.tsv", serialize_manifest(manifests));
}

void write_rgb_images(OutputSet& outputs, const RgbClipResult& result) {
  for (std::size_t k = 0; k < result.images.size(); ++k) {
    const auto& image = result.images[k];
    const std::string stem = window_stem(result.manifest.clip_id, result.manifest.windows[k].start);
    write_npy(outputs.add(stem + ".npy"), plane_shape(3, image.width(), image.height()), image.flatten());
    write_png(render(image), outputs.add(stem + ".png"));
  }
  const ClipManifest manifests[] = {result.manifest};
  write_text(outputs, "manifest.tsv", serialize_manifest(manifests));
}

}  // namespace

int cmd_flow(const fs::path& frames_dir, const fs::path& out_dir, const Config& cfg, std::ostream& out) {
  const auto names = sorted_files(frames_dir, is_raster_image);
  const FlowSequence flow = estimate_flow(load_gray_sequence(frames_dir), cfg);
  OutputSet outputs(out_dir);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    write_flo(flow[i], outputs.add(names[i].stem().string() + ".flo"));
  }
  outputs.commit();
  out << "wrote " << flow.size() << " flow fields to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_pool(const PoolRequest& request, const Config& cfg, std::ostream& out) {
  const std::string clip_id = request.clip_id.empty() ? default_clip_id(request.input) : request.clip_id;
  const PoolSettings settings = cfg.pool_settings();
  std::size_t windows = 0;
  double seconds = 0.0;
  if (request.mode == PoolMode::DynamicFlow) {
    const ClipResult result = run_clip(load_flow_input(request.input, cfg), settings, clip_id, request.label);
    OutputSet outputs(request.out_dir);
    write_flow_images(outputs, "", result);
    outputs.commit();
    windows = result.images.size();
    seconds = mean(result.pool_seconds);
  } else {
    const auto frames = load_rgb_sequence(request.input);
    const RgbClipResult result = run_rgb_clip(frames, settings, clip_id, request.label);
    OutputSet outputs(request.out_dir);
    write_rgb_images(outputs, result);
    outputs.commit();
    windows = result.images.size();
    seconds = mean(result.pool_seconds);
  }
  out << "pooled " << windows << " window(s) into " << request.out_dir.string() << " (mean " << std::fixed
      << std::setprecision(3) << seconds << " s/window)\n";
  return kExitOk;
}

int cmd_sweep(const fs::path& input, const fs::path& out_dir, const std::vector<int>& window_sizes,
              const Config& cfg, std::ostream& out) {
  if (window_sizes.empty()) throw Error(ErrorKind::Configuration, "no window sizes to sweep");
  const FlowSequence flow = load_flow_input(input, cfg);
  const std::string clip_id = default_clip_id(input);

  struct Row {
    int window;
    std::size_t count;
    double seconds;
  };
  std::vector<Row> rows;
  OutputSet outputs(out_dir);
  for (int w : window_sizes) {
    PoolSettings settings = cfg.pool_settings();
    settings.windows.window = w;
    const ClipResult result = run_clip(flow, settings, clip_id, "unlabeled");
    const std::string sub = "w" + std::to_string(w);
    outputs.subdir(sub);
    write_flow_images(outputs, sub + "/", result);
    rows.push_back({w, result.images.size(), mean(result.pool_seconds)});
  }
  std::ostringstream tsv;
  tsv << "window\tstride\tflow_frames\twindows\n";
  for (const auto& r : rows) tsv << r.window << '\t' << cfg.windows.stride << '\t' << flow.size() << '\t' << r.count << '\n';
  write_text(outputs, "sweep.tsv", tsv.str());
  outputs.commit();

  out << "window\twindows\tmean_pool_seconds\n";
  for (const auto& r : rows) out << r.window << '\t' << r.count << '\t' << std::fixed << std::setprecision(4) << r.seconds << '\n';
  return kExitOk;
}

int cmd_toyeval(const ToyevalRequest& request, const Config& cfg, std::ostream& out) {
  ComparisonConfig cc;
  cc.classes = request.classes;
  cc.clips_per_class = request.clips_per_class;
  cc.regime = request.easy ? Regime::Easy : Regime::Contaminated;
  cc.seed = request.seed;
  cc.workers = cfg.workers;
  cc.features.use_true_flow = !request.estimated_flow;
  cc.features.clip_bound = cfg.clip_bound;
  cc.features.svm_c = cfg.svm_c;
  cc.features.solver = cfg.solver;
  cc.features.tvl1 = cfg.tvl1;
  cc.validate();

  const ComparisonReport report = run_comparison(cc);
  const bool pass = report.passes(cc.regime);
  std::ostringstream summary;
  summary << report.table() << "regime\t" << (request.easy ? "easy" : "contaminated") << '\n'
          << "gap_points\t" << std::fixed << std::setprecision(2) << 100.0 * (report.accuracy_df - report.accuracy_di)
          << '\n'
          << "criterion\t" << (pass ? "met" : "not met") << '\n';
  if (request.out_dir) {
    OutputSet outputs(*request.out_dir);
    write_text(outputs, "report.txt", summary.str());
    write_text(outputs, "report.json", report.json());
    outputs.commit();
  }
  out << summary.str();
  return pass ? kExitOk : kExitCriterionUnmet;
}

int cmd_render(const fs::path& npy, const fs::path& out_prefix, std::ostream& out) {
  const NpyArray a = read_npy(npy);
  std::size_t channels = 1;
  std::size_t h = 0, w = 0;
  if (a.shape.size() == 2) {
    h = a.shape[0];
    w = a.shape[1];
  } else if (a.shape.size() == 3) {
    channels = a.shape[0];
    h = a.shape[1];
    w = a.shape[2];
  }
  if (h == 0 || w == 0 || (channels != 1 && channels != 2 && channels != 3)) {
    throw Error(ErrorKind::Dimension, "expected planes shaped [h,w], [1,h,w], [2,h,w] or [3,h,w] in " + npy.string());
  }
  const std::size_t n = h * w;
  auto plane = [&](std::size_t c) {
    return Plane<double>(static_cast<int>(w), static_cast<int>(h),
                         std::vector<double>(a.data.begin() + static_cast<std::ptrdiff_t>(c * n),
                                             a.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n)));
  };
  const fs::path dir = out_prefix.has_parent_path() ? out_prefix.parent_path() : fs::path(".");
  const std::string base = out_prefix.filename().string();
  if (base.empty()) throw Error(ErrorKind::Configuration, "output prefix needs a file name part");
  OutputSet outputs(dir);
  if (channels == 2) {
    const FlowRendering r = render(DynamicFlowImage{plane(0), plane(1)});
    write_png(r.u, outputs.add(base + "_u.png"));
    write_png(r.v, outputs.add(base + "_v.png"));
    write_png(r.color, outputs.add(base + "_flow.png"));
  } else if (channels == 3) {
    write_png(render(DynamicImage{plane(0), plane(1), plane(2)}), outputs.add(base + ".png"));
  } else {
    write_png(render_plane(plane(0)), outputs.add(base + ".png"));
  }
  const std::size_t written = outputs.count();
  outputs.commit();
  out << "rendered " << written << " image(s) from " << npy.string() << '\n';
  return kExitOk;
}

}  // namespace dynaflow::cli
