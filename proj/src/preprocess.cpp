#include "dynaflow/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynaflow {

namespace {

void check_bound(float bound) {
  if (!(bound > 0.0f) || !std::isfinite(bound)) {
    throw Error(ErrorKind::Configuration, "clip bound must be positive, got " + std::to_string(bound));
  }
}

Plane<float> shifted(const Plane<float>& plane, float offset) {
  Plane<float> out = plane;
  for (float& s : out.samples()) s -= offset;
  return out;
}

GrayFrame quantize_plane(const Plane<float>& plane, float bound, char channel) {
  GrayFrame out(plane.width(), plane.height());
  for (int y = 0; y < plane.height(); ++y) {
    for (int x = 0; x < plane.width(); ++x) {
      const float s = plane.at(x, y);
      if (s < -bound || s > bound) {
        throw Error(ErrorKind::Contract, std::string("flow sample ") + channel + "(" + std::to_string(x) + ", " +
                                             std::to_string(y) + ") = " + std::to_string(s) +
                                             " outside [-" + std::to_string(bound) + ", " +
                                             std::to_string(bound) + "]; threshold first");
      }
      out.at(x, y) = quantize_sample(s, bound);
    }
  }
  return out;
}

}  // namespace

QuantizedFlowFrame::QuantizedFlowFrame(GrayFrame u, GrayFrame v) : u_gray(std::move(u)), v_gray(std::move(v)) {
  if (!u_gray.same_shape(v_gray)) throw Error(ErrorKind::Dimension, "quantized channels differ in shape");
}

double median(std::span<const float> samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyInput, "median of no samples");
  std::vector<float> work(samples.begin(), samples.end());
  const std::size_t mid = work.size() / 2;
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(mid), work.end());
  const double upper = work[mid];
  if (work.size() % 2 == 1) return upper;
  const double lower = *std::max_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

FlowField subtract_median(const FlowField& field) {
  const auto mu = static_cast<float>(median(field.u().samples()));
  const auto mv = static_cast<float>(median(field.v().samples()));
  return FlowField(shifted(field.u(), mu), shifted(field.v(), mv));
}

FlowField threshold_flow(const FlowField& field, float bound) {
  check_bound(bound);
  Plane<float> u = field.u();
  Plane<float> v = field.v();
  auto us = u.samples();
  auto vs = v.samples();
  for (std::size_t i = 0; i < us.size(); ++i) {
    if (std::abs(us[i]) > bound || std::abs(vs[i]) > bound) {
      us[i] = 0.0f;
      vs[i] = 0.0f;
    }
  }
  return FlowField(std::move(u), std::move(v));
}

std::uint8_t quantize_sample(float x, float bound) {
  const double scaled = (static_cast<double>(x) + bound) / (2.0 * bound) * 255.0;
  return static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0, 255.0));
}

QuantizedFlowFrame quantize_flow(const FlowField& field, float bound) {
  check_bound(bound);
  return QuantizedFlowFrame(quantize_plane(field.u(), bound, 'u'), quantize_plane(field.v(), bound, 'v'));
}

std::vector<QuantizedFlowFrame> condition_sequence(std::span<const FlowField> frames, float bound) {
  check_bound(bound);
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "no flow frames to condition");
  std::vector<QuantizedFlowFrame> out;
  out.reserve(frames.size());
  for (const FlowField& f : frames) out.push_back(quantize_flow(threshold_flow(subtract_median(f), bound), bound));
  return out;
}

std::vector<QuantizedFlowFrame> condition_sequence(const FlowSequence& seq, float bound) {
  return condition_sequence(std::span<const FlowField>(seq.frames()), bound);
}

}  // namespace dynaflow
