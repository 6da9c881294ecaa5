#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynaflow/flow_core.hpp"
#include "dynaflow/rankpool.hpp"
#include "dynaflow/tvl1.hpp"

namespace dynaflow {

enum class Motion { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kMotionClassCount = 4;

std::string_view to_string(Motion motion);

/// A bright square translating over a background whose brightness drifts.
///
/// Background intensity at (x, y) in frame t is
///   background_level + background_ramp * t * (1 + illumination_gradient * s(x, y))
/// where s is the signed offset from the frame center along the direction
/// illumination_angle, in units of half the frame side. s averages to zero, so
/// the mean brightness moves by background_ramp per frame; a nonzero gradient
/// makes one side brighten faster than the other, as under a lighting sweep.
struct SyntheticClipConfig {
  int size = 32;             // frame side, pixels
  int n_frames = 30;
  Motion motion = Motion::Right;
  int square_side = 6;
  double speed = 0.4;            // pixels/frame
  double background_ramp = 0.0;  // intensity/frame
  double noise_sigma = 0.0;      // intensity std-dev
  double illumination_gradient = 0.0;
  double illumination_angle = 0.0;  // radians, 0 = brighter towards +x
  // Independent light patches: Gaussian bumps with random centers whose
  // brightness drifts at a rate drawn from [-patch_rate, patch_rate].
  int patch_count = 0;
  double patch_rate = 0.0;    // intensity/frame at a patch center
  double patch_radius = 3.0;  // Gaussian sigma, pixels
  std::uint64_t seed = 0;
  double background_level = 128.0;
  double square_level = 148.0;
  // Top-left corner of the square in frame 0; unset means centered across the
  // motion axis and placed so the square finishes in the frame center.
  std::optional<double> start_x;
  std::optional<double> start_y;

  void validate() const;  // throws Configuration (including a square leaving the frame)
};

struct SyntheticClip {
  std::vector<GrayFrame> frames;
  FlowSequence truth;  // n_frames - 1 fields
};

SyntheticClip generate_clip(const SyntheticClipConfig& cfg);

enum class FeatureMode { DynamicFlow, DynamicImage };

struct FeatureParams {
  bool use_true_flow = true;
  float clip_bound = 20.0f;
  double svm_c = kDefaultSvmC;
  SolverConfig solver;
  Tvl1Params tvl1;
};

/// Whole-clip pooled feature. DynamicFlow pools conditioned flow (ground truth
/// or TV-L1); DynamicImage pools the frames replicated into three channels.
Vector featurize(const SyntheticClip& clip, FeatureMode mode, const FeatureParams& params = {});

struct ToyDataset {
  std::vector<Vector> features;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, a seeded shuffle sends round(train_fraction * count) items to
/// train and the rest to test.
void stratified_split(ToyDataset& data, int classes, double train_fraction, std::uint64_t seed);

struct LinearTrainConfig {
  double c = 10.0;  // weight of the mean hinge loss against 0.5|w|^2
  int epochs = 300;
};

struct LinearModel {
  std::vector<Vector> weights;  // one per class
  std::vector<double> bias;
  std::vector<double> loss_history;  // summed one-vs-rest objective after each epoch

  int predict(std::span<const double> x) const;  // ties go to the lowest class
};

/// One-vs-rest linear hinge classifiers trained by full-batch subgradient
/// descent over the train split. Examples are visited in a canonical order
/// (label, then feature values) so the result does not depend on how the
/// dataset happens to be ordered.
LinearModel train_linear(const ToyDataset& data, int classes, const LinearTrainConfig& cfg = {});

double accuracy(const LinearModel& model, const ToyDataset& data, std::span<const std::size_t> indices);

enum class Regime { Contaminated, Easy };

struct ComparisonConfig {
  int classes = kMotionClassCount;
  int clips_per_class = 50;
  Regime regime = Regime::Contaminated;
  SyntheticClipConfig clip;   // template; motion, nuisances, seed and start are overwritten
  double max_ramp = 1.0;      // |ramp| bound in the contaminated regime
  double max_noise = 3.0;     // noise sigma bound in the contaminated regime
  double gradient = 0.5;      // illumination gradient in the contaminated regime (random angle)
  int patch_count = 5;
  double patch_rate = 2.0;
  int start_jitter = 1;       // +- pixels around the default start
  double train_fraction = 0.5;
  std::uint64_t seed = 7;
  FeatureParams features;
  LinearTrainConfig classifier;
  int workers = 1;

  void validate() const;
};

struct ClassRow {
  std::string name;
  std::size_t test_count = 0;
  double accuracy_df = 0.0;
  double accuracy_di = 0.0;
};

struct ComparisonReport {
  double accuracy_df = 0.0;
  double accuracy_di = 0.0;
  std::vector<ClassRow> rows;

  bool passes(Regime regime) const;
  std::string table() const;
  std::string json() const;
};

/// Synthesizes a stratified dataset, featurizes each clip both ways, trains a
/// classifier per mode and reports test accuracy per class.
ComparisonReport run_comparison(const ComparisonConfig& cfg);

}  // namespace dynaflow
