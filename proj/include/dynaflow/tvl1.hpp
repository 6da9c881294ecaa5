#pragma once

#include <span>
#include <vector>

#include "dynaflow/flow_core.hpp"

namespace dynaflow {

/// Parameters of the duality-based TV-L1 solver. Defaults follow the common
/// reference implementation.
struct Tvl1Params {
  double tau = 0.25;             // primal-dual time step
  double lambda = 0.15;          // weight of the data attachment term
  double theta = 0.3;            // coupling between u and its auxiliary variable
  int pyramid_levels = 5;
  double pyramid_scale = 0.5;
  int warps_per_level = 5;
  int inner_iterations = 300;
  double convergence_eps = 0.01;  // stop once the RMS flow update drops below this

  void validate() const;  // throws Configuration
};

// Frames below this size on either side are rejected.
inline constexpr int kMinFlowFrameSide = 8;

/// Number of pyramid levels actually used for a frame of the given size: the
/// requested count, reduced until the coarsest level keeps both sides >= 8.
int effective_pyramid_levels(int width, int height, const Tvl1Params& params);

/// Dense flow mapping `prev` onto `next`: prev(x, y) ~ next(x + u, y + v).
FlowField compute_flow(const GrayFrame& prev, const GrayFrame& next, const Tvl1Params& params = {});

/// Flow between each consecutive pair; returns frames.size() - 1 fields.
FlowSequence sequence_flow(std::span<const GrayFrame> frames, const Tvl1Params& params = {});

/// TV-L1 energy of `flow` for the pair: sum of the isotropic total variation
/// of both channels plus lambda * sum |next(x + flow) - prev(x)|, with the
/// warp evaluated by bilinear interpolation.
double tvl1_energy(const GrayFrame& prev, const GrayFrame& next, const FlowField& flow,
                   const Tvl1Params& params = {});

}  // namespace dynaflow
