#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dynaflow/flow_core.hpp"
#include "dynaflow/preprocess.hpp"

namespace dynaflow {

using Vector = std::vector<double>;

inline constexpr double kDefaultSvmC = 1.0;

struct SolverConfig {
  int max_epochs = 10000;
  double tolerance = 1e-6;  // relative duality gap at which the solver stops
  std::uint64_t seed = 0;   // pair visiting order

  void validate() const;  // throws Configuration
};

/// Running average: output[t] = mean(input[0..t]). Frames must share a length.
std::vector<Vector> smooth(std::span<const Vector> seq);

/// Pairwise ranking problem over T frames: for every i < j the difference
/// frames[j] - frames[i] should score at least one.
///
/// The T(T-1)/2 difference vectors are not stored; diff(k) materializes one on
/// demand. Pairs are enumerated lexicographically: (0,1), (0,2), ..., (T-2,T-1).
class RankingProblem {
 public:
  RankingProblem(std::span<const Vector> frames, double c);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t frame_count() const noexcept { return frame_count_; }
  std::size_t pair_count() const noexcept { return pairs_.size(); }
  double c() const noexcept { return c_; }

  std::pair<std::size_t, std::size_t> pair(std::size_t k) const { return pairs_[k]; }
  Vector diff(std::size_t k) const;
  std::span<const double> frame(std::size_t t) const {
    return {frames_.data() + t * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::size_t frame_count_;
  double c_;
  std::vector<double> frames_;  // frame_count_ x dim_, row-major
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

RankingProblem build_problem(std::span<const Vector> smoothed, double c);

/// J(w) = |w|^2 + C * sum_{i<j} max(0, 1 - <w, frames[j] - frames[i]>),
/// evaluated directly from the difference vectors.
double ranking_objective(const RankingProblem& problem, std::span<const double> w);

struct Solution {
  Vector w;
  double objective = 0.0;     // J(w)
  double duality_gap = 0.0;   // bound on J(w) - J(w*), in units of J
  int epochs = 0;
  bool converged = true;
};

/// Dual coordinate descent over the pairwise hinge losses. Stops when the
/// duality gap falls below cfg.tolerance * J; otherwise returns the best
/// iterate seen after cfg.max_epochs with converged = false.
Solution solve(const RankingProblem& problem, const SolverConfig& cfg = {});

struct DynamicFlowImage {
  Plane<double> fu;
  Plane<double> fv;

  int width() const noexcept { return fu.width(); }
  int height() const noexcept { return fu.height(); }
  Vector flatten() const;
};

struct DynamicImage {
  Plane<double> r;
  Plane<double> g;
  Plane<double> b;

  int width() const noexcept { return r.width(); }
  int height() const noexcept { return r.height(); }
  Vector flatten() const;
};

/// Smooths, builds and solves the ranking problem over the quantized u and v
/// planes (values in [0, 255], concatenated u then v).
DynamicFlowImage pool_flow(std::span<const QuantizedFlowFrame> window, double c = kDefaultSvmC,
                           const SolverConfig& cfg = {});

/// The same pooling over RGB frames with the r, g and b planes concatenated.
DynamicImage pool_rgb(std::span<const RgbFrame> frames, double c = kDefaultSvmC, const SolverConfig& cfg = {});

/// Closed-form approximation of rank pooling over unsmoothed frames:
/// alpha_t = 2(T - t + 1) - (T + 1)(H_T - H_{t-1}) for t = 1..T.
Vector approximate_pool_coefficients(std::size_t frame_count);
Vector approximate_pool(std::span<const Vector> frames);

struct FlowRendering {
  GrayFrame u;
  GrayFrame v;
  RgbFrame color;  // hue = direction, value = magnitude
};

/// Min-max normalization to [0, 255]; a constant plane renders as 128.
GrayFrame render_plane(const Plane<double>& plane);
FlowRendering render(const DynamicFlowImage& image);
RgbFrame render(const DynamicImage& image);

}  // namespace dynaflow
