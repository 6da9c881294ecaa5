#include "dynaflow/tvl1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dynaflow {

namespace {

using Image = Plane<float>;

constexpr float kGradIsZero = 1e-10f;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::Configuration, message);
}

Image to_float(const GrayFrame& frame) {
  Image out(frame.width(), frame.height());
  const auto src = frame.samples();
  auto dst = out.samples();
  std::transform(src.begin(), src.end(), dst.begin(), [](std::uint8_t s) { return static_cast<float>(s); });
  return out;
}

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Bilinear sample with replicated borders.
float sample(const Image& img, float x, float y) {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0f, static_cast<float>(w - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(h - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = (1.0f - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const float bottom = (1.0f - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0f - fy) * top + fy * bottom;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double value = std::exp(-0.5 * k * k / (sigma * sigma));
    kernel[k + radius] = static_cast<float>(value);
    total += value;
  }
  for (float& k : kernel) k = static_cast<float>(k / total);

  const int w = img.width();
  const int h = img.height();
  Image tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(clampi(x + k, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp.at(x, clampi(y + k, 0, h - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

// Pixel-center aligned bilinear resampling.
Image resample(const Image& img, int width, int height) {
  Image out(width, height);
  const float sx = static_cast<float>(img.width()) / static_cast<float>(width);
  const float sy = static_cast<float>(img.height()) / static_cast<float>(height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.at(x, y) = sample(img, (static_cast<float>(x) + 0.5f) * sx - 0.5f, (static_cast<float>(y) + 0.5f) * sy - 0.5f);
    }
  }
  return out;
}

Image downscale(const Image& img, int width, int height, double scale) {
  const double sigma = 0.6 * std::sqrt(1.0 / (scale * scale) - 1.0);
  return resample(gaussian_blur(img, sigma), width, height);
}

// Central differences with replicated borders.
void centered_gradient(const Image& img, Image& gx, Image& gy) {
  const int w = img.width();
  const int h = img.height();
  gx = Image(w, h);
  gy = Image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx.at(x, y) = 0.5f * (img.at(std::min(x + 1, w - 1), y) - img.at(std::max(x - 1, 0), y));
      gy.at(x, y) = 0.5f * (img.at(x, std::min(y + 1, h - 1)) - img.at(x, std::max(y - 1, 0)));
    }
  }
}

// Forward differences, zero on the last column/row.
void forward_gradient(const Image& f, Image& fx, Image& fy) {
  const int w = f.width();
  const int h = f.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      fx.at(x, y) = x + 1 < w ? f.at(x + 1, y) - f.at(x, y) : 0.0f;
      fy.at(x, y) = y + 1 < h ? f.at(x, y + 1) - f.at(x, y) : 0.0f;
    }
  }
}

// Negative adjoint of forward_gradient.
void divergence(const Image& px, const Image& py, Image& div) {
  const int w = px.width();
  const int h = px.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float dx;
      if (x == 0) dx = px.at(x, y);
      else if (x == w - 1) dx = -px.at(x - 1, y);
      else dx = px.at(x, y) - px.at(x - 1, y);
      float dy;
      if (y == 0) dy = py.at(x, y);
      else if (y == h - 1) dy = -py.at(x, y - 1);
      else dy = py.at(x, y) - py.at(x, y - 1);
      if (w == 1) dx = 0.0f;
      if (h == 1) dy = 0.0f;
      div.at(x, y) = dx + dy;
    }
  }
}

struct LevelSize {
  int width;
  int height;
};

std::vector<LevelSize> pyramid_sizes(int width, int height, const Tvl1Params& params) {
  std::vector<LevelSize> sizes{{width, height}};
  for (int level = 1; level < params.pyramid_levels; ++level) {
    const LevelSize prev = sizes.back();
    const int w = static_cast<int>(prev.width * params.pyramid_scale + 0.5);
    const int h = static_cast<int>(prev.height * params.pyramid_scale + 0.5);
    if (w < kMinFlowFrameSide || h < kMinFlowFrameSide) break;
    sizes.push_back({w, h});
  }
  return sizes;
}

// Refines (u1, u2) on one pyramid level.
void solve_level(const Image& i0, const Image& i1, Image& u1, Image& u2, const Tvl1Params& params) {
  const int w = i0.width();
  const int h = i0.height();
  const std::size_t n = i0.size();
  const float lt = static_cast<float>(params.lambda * params.theta);
  const float theta = static_cast<float>(params.theta);
  const float taut = static_cast<float>(params.tau / params.theta);
  const double eps2 = params.convergence_eps * params.convergence_eps;

  Image i1x, i1y;
  centered_gradient(i1, i1x, i1y);

  Image i1w(w, h), i1wx(w, h), i1wy(w, h), grad(w, h), rho_c(w, h);
  Image v1(w, h), v2(w, h), div1(w, h), div2(w, h);
  Image u1x(w, h), u1y(w, h), u2x(w, h), u2y(w, h);
  Image p11(w, h), p12(w, h), p21(w, h), p22(w, h);

  for (int warp = 0; warp < params.warps_per_level; ++warp) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float wx = static_cast<float>(x) + u1.at(x, y);
        const float wy = static_cast<float>(y) + u2.at(x, y);
        i1w.at(x, y) = sample(i1, wx, wy);
        i1wx.at(x, y) = sample(i1x, wx, wy);
        i1wy.at(x, y) = sample(i1y, wx, wy);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const float gx = i1wx.samples()[i];
      const float gy = i1wy.samples()[i];
      grad.samples()[i] = gx * gx + gy * gy;
      rho_c.samples()[i] = i1w.samples()[i] - gx * u1.samples()[i] - gy * u2.samples()[i] - i0.samples()[i];
    }

    double error = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < params.inner_iterations && error > eps2; ++iter) {
      // Pointwise thresholding of the linearized data term.
      for (std::size_t i = 0; i < n; ++i) {
        const float gx = i1wx.samples()[i];
        const float gy = i1wy.samples()[i];
        const float g = grad.samples()[i];
        const float rho = rho_c.samples()[i] + gx * u1.samples()[i] + gy * u2.samples()[i];
        float d1 = 0.0f;
        float d2 = 0.0f;
        if (rho < -lt * g) {
          d1 = lt * gx;
          d2 = lt * gy;
        } else if (rho > lt * g) {
          d1 = -lt * gx;
          d2 = -lt * gy;
        } else if (g > kGradIsZero) {
          const float f = -rho / g;
          d1 = f * gx;
          d2 = f * gy;
        }
        v1.samples()[i] = u1.samples()[i] + d1;
        v2.samples()[i] = u2.samples()[i] + d2;
      }

      divergence(p11, p12, div1);
      divergence(p21, p22, div2);

      error = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const float a = v1.samples()[i] + theta * div1.samples()[i];
        const float b = v2.samples()[i] + theta * div2.samples()[i];
        const float da = a - u1.samples()[i];
        const float db = b - u2.samples()[i];
        error += static_cast<double>(da) * da + static_cast<double>(db) * db;
        u1.samples()[i] = a;
        u2.samples()[i] = b;
      }
      error /= static_cast<double>(n);

      // Dual ascent on the total-variation term of each channel.
      forward_gradient(u1, u1x, u1y);
      forward_gradient(u2, u2x, u2y);
      for (std::size_t i = 0; i < n; ++i) {
        const float ax = u1x.samples()[i], ay = u1y.samples()[i];
        const float bx = u2x.samples()[i], by = u2y.samples()[i];
        const float ng1 = 1.0f + taut * std::sqrt(ax * ax + ay * ay);
        const float ng2 = 1.0f + taut * std::sqrt(bx * bx + by * by);
        p11.samples()[i] = (p11.samples()[i] + taut * ax) / ng1;
        p12.samples()[i] = (p12.samples()[i] + taut * ay) / ng1;
        p21.samples()[i] = (p21.samples()[i] + taut * bx) / ng2;
        p22.samples()[i] = (p22.samples()[i] + taut * by) / ng2;
      }
    }
  }
}

}  // namespace

void Tvl1Params::validate() const {
  require(tau > 0.0, "tvl1 tau must be positive");
  require(lambda > 0.0, "tvl1 lambda must be positive");
  require(theta > 0.0, "tvl1 theta must be positive");
  require(pyramid_scale > 0.0 && pyramid_scale < 1.0, "tvl1 pyramid scale must lie in (0, 1)");
  require(pyramid_levels >= 1, "tvl1 pyramid levels must be >= 1");
  require(warps_per_level >= 1, "tvl1 warps per level must be >= 1");
  require(inner_iterations >= 1, "tvl1 inner iterations must be >= 1");
  require(convergence_eps > 0.0, "tvl1 convergence epsilon must be positive");
}

int effective_pyramid_levels(int width, int height, const Tvl1Params& params) {
  return static_cast<int>(pyramid_sizes(width, height, params).size());
}

FlowField compute_flow(const GrayFrame& prev, const GrayFrame& next, const Tvl1Params& params) {
  params.validate();
  if (!prev.same_shape(next)) {
    throw Error(ErrorKind::Dimension, "flow frames differ in size: " + std::to_string(prev.width()) + "x" +
                                          std::to_string(prev.height()) + " vs " + std::to_string(next.width()) +
                                          "x" + std::to_string(next.height()));
  }
  if (prev.width() < kMinFlowFrameSide || prev.height() < kMinFlowFrameSide) {
    throw Error(ErrorKind::Configuration, "frames must be at least 8x8 for the flow pyramid");
  }

  const auto sizes = pyramid_sizes(prev.width(), prev.height(), params);
  std::vector<Image> pyr0{to_float(prev)};
  std::vector<Image> pyr1{to_float(next)};
  for (std::size_t level = 1; level < sizes.size(); ++level) {
    pyr0.push_back(downscale(pyr0.back(), sizes[level].width, sizes[level].height, params.pyramid_scale));
    pyr1.push_back(downscale(pyr1.back(), sizes[level].width, sizes[level].height, params.pyramid_scale));
  }

  Image u1(sizes.back().width, sizes.back().height);
  Image u2(sizes.back().width, sizes.back().height);
  for (std::size_t level = sizes.size(); level-- > 0;) {
    if (u1.width() != sizes[level].width || u1.height() != sizes[level].height) {
      const float fx = static_cast<float>(sizes[level].width) / static_cast<float>(u1.width());
      const float fy = static_cast<float>(sizes[level].height) / static_cast<float>(u1.height());
      u1 = resample(u1, sizes[level].width, sizes[level].height);
      u2 = resample(u2, sizes[level].width, sizes[level].height);
      for (float& s : u1.samples()) s *= fx;
      for (float& s : u2.samples()) s *= fy;
    }
    solve_level(pyr0[level], pyr1[level], u1, u2, params);
  }
  return FlowField(std::move(u1), std::move(u2));
}

FlowSequence sequence_flow(std::span<const GrayFrame> frames, const Tvl1Params& params) {
  if (frames.size() < 2) throw Error(ErrorKind::EmptyInput, "flow needs at least two frames");
  std::vector<FlowField> fields;
  fields.reserve(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) fields.push_back(compute_flow(frames[i], frames[i + 1], params));
  return FlowSequence(std::move(fields));
}

double tvl1_energy(const GrayFrame& prev, const GrayFrame& next, const FlowField& flow, const Tvl1Params& params) {
  if (!prev.same_shape(next) || prev.width() != flow.width() || prev.height() != flow.height()) {
    throw Error(ErrorKind::Dimension, "energy inputs differ in size");
  }
  const Image i0 = to_float(prev);
  const Image i1 = to_float(next);
  const int w = i0.width();
  const int h = i0.height();
  Image ux(w, h), uy(w, h), vx(w, h), vy(w, h);
  forward_gradient(flow.u(), ux, uy);
  forward_gradient(flow.v(), vx, vy);
  double tv = 0.0;
  double data = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      tv += std::hypot(static_cast<double>(ux.at(x, y)), static_cast<double>(uy.at(x, y)));
      tv += std::hypot(static_cast<double>(vx.at(x, y)), static_cast<double>(vy.at(x, y)));
      const float warped = sample(i1, static_cast<float>(x) + flow.u().at(x, y), static_cast<float>(y) + flow.v().at(x, y));
      data += std::abs(static_cast<double>(warped) - i0.at(x, y));
    }
  }
  return tv + params.lambda * data;
}

}  // namespace dynaflow
