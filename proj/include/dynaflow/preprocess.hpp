#pragma once

#include <span>
#include <vector>

#include "dynaflow/flow_core.hpp"

namespace dynaflow {

inline constexpr float kDefaultClipBound = 20.0f;

/// One flow field rendered as a pair of 8-bit planes; 128 encodes zero flow.
struct QuantizedFlowFrame {
  GrayFrame u_gray;
  GrayFrame v_gray;

  QuantizedFlowFrame(GrayFrame u, GrayFrame v);
  int width() const noexcept { return u_gray.width(); }
  int height() const noexcept { return u_gray.height(); }
};

// Median of a sample set; even counts average the two central order statistics.
double median(std::span<const float> samples);

/// Removes the per-channel scalar median, a crude camera-motion compensation.
FlowField subtract_median(const FlowField& field);

/// Zeroes the whole vector at every pixel where |u| or |v| exceeds `bound`.
FlowField threshold_flow(const FlowField& field, float bound = kDefaultClipBound);

/// Affine map [-bound, bound] -> [0, 255], rounding half away from zero.
/// Throws Contract if any sample lies outside the closed interval.
QuantizedFlowFrame quantize_flow(const FlowField& field, float bound = kDefaultClipBound);
std::uint8_t quantize_sample(float x, float bound);

/// subtract_median -> threshold_flow -> quantize_flow on every frame.
std::vector<QuantizedFlowFrame> condition_sequence(const FlowSequence& seq, float bound = kDefaultClipBound);
std::vector<QuantizedFlowFrame> condition_sequence(std::span<const FlowField> frames,
                                                   float bound = kDefaultClipBound);

}  // namespace dynaflow
