#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dynaflow/flow_core.hpp"
#include "dynaflow/rankpool.hpp"

namespace testing {

using dynaflow::Vector;
namespace fs = std::filesystem;

inline dynaflow::FlowField random_flow(std::mt19937_64& rng, int w, int h, float scale = 30.0f) {
  std::uniform_real_distribution<float> d(-scale, scale);
  std::vector<float> u(static_cast<std::size_t>(w) * h), v(u.size());
  for (auto& x : u) x = d(rng);
  for (auto& x : v) x = d(rng);
  return dynaflow::FlowField(w, h, std::move(u), std::move(v));
}

inline dynaflow::GrayFrame random_texture(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> d(0, 255);
  dynaflow::GrayFrame f(w, h);
  for (auto& s : f.samples()) s = static_cast<std::uint8_t>(d(rng));
  return f;
}

// Smooth random texture: box-blurred noise, so sub-pixel warps are well defined.
inline dynaflow::GrayFrame smooth_texture(std::mt19937_64& rng, int w, int h, int radius = 2) {
  std::uniform_real_distribution<double> d(0.0, 255.0);
  std::vector<double> noise(static_cast<std::size_t>(w) * h);
  for (auto& x : noise) x = d(rng);
  dynaflow::GrayFrame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int n = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = (x + dx + w) % w, yy = (y + dy + h) % h;
          acc += noise[static_cast<std::size_t>(yy) * w + xx];
          ++n;
        }
      }
      // Stretch the blurred histogram back towards the full range.
      const double v = 128.0 + 3.0 * (acc / n - 127.5);
      f.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return f;
}

// Circular shift: out(x + dx, y + dy) = in(x, y).
inline dynaflow::GrayFrame shift_wrap(const dynaflow::GrayFrame& in, int dx, int dy) {
  const int w = in.width(), h = in.height();
  dynaflow::GrayFrame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(((x + dx) % w + w) % w, ((y + dy) % h + h) % h) = in.at(x, y);
  }
  return out;
}

inline std::vector<Vector> random_frames(std::mt19937_64& rng, std::size_t t, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<Vector> out(t, Vector(dim));
  for (auto& f : out) {
    for (auto& x : f) x = d(rng);
  }
  return out;
}

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// J(w) computed from scratch over explicit pair differences.
inline double objective(const std::vector<Vector>& frames, double c, const Vector& w) {
  double j = dot(w, w);
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) {
      double s = 0.0;
      for (std::size_t d = 0; d < w.size(); ++d) s += w[d] * (frames[b][d] - frames[a][d]);
      j += c * std::max(0.0, 1.0 - s);
    }
  }
  return j;
}

inline std::vector<Vector> pair_diffs(const std::vector<Vector>& frames) {
  std::vector<Vector> out;
  for (std::size_t a = 0; a < frames.size(); ++a) {
    for (std::size_t b = a + 1; b < frames.size(); ++b) {
      Vector x(frames[a].size());
      for (std::size_t d = 0; d < x.size(); ++d) x[d] = frames[b][d] - frames[a][d];
      out.push_back(std::move(x));
    }
  }
  return out;
}

// Projected subgradient descent on J with diminishing steps 1/(2(k+1)),
// projected onto the ball |w| <= sqrt(J(0)) that contains the minimizer.
// Returns the best objective seen.
inline double subgradient_oracle(const std::vector<Vector>& frames, double c, long iterations) {
  const auto diffs = pair_diffs(frames);
  const std::size_t dim = frames.front().size();
  const double radius = std::sqrt(c * static_cast<double>(diffs.size()));
  Vector w(dim, 0.0), g(dim);
  double best = objective(frames, c, w);
  for (long k = 0; k < iterations; ++k) {
    double j = dot(w, w);
    for (std::size_t d = 0; d < dim; ++d) g[d] = 2.0 * w[d];
    for (const auto& x : diffs) {
      const double m = dot(w, x);
      if (m < 1.0) {
        j += c * (1.0 - m);
        for (std::size_t d = 0; d < dim; ++d) g[d] -= c * x[d];
      }
    }
    best = std::min(best, j);
    const double step = 1.0 / (2.0 * static_cast<double>(k + 1));
    for (std::size_t d = 0; d < dim; ++d) w[d] -= step * g[d];
    const double n = std::sqrt(dot(w, w));
    if (n > radius) {
      for (auto& x : w) x *= radius / n;
    }
  }
  return std::min(best, objective(frames, c, w));
}

// Exact minimum of J for a handful of pairs. The dual is a box QP over
// a_k in [0, 1] with w = (C/2) sum a_k x_k; some optimal dual point has every
// variable at a bound or in a linearly independent free set, so enumerating
// the 3^P status patterns and solving each free system finds the optimum.
inline double exact_oracle(const std::vector<Vector>& frames, double c, Vector* w_out = nullptr) {
  const auto diffs = pair_diffs(frames);
  const std::size_t p = diffs.size();
  const std::size_t dim = frames.front().size();
  double best = objective(frames, c, Vector(dim, 0.0));
  if (w_out) *w_out = Vector(dim, 0.0);
  std::size_t patterns = 1;
  for (std::size_t i = 0; i < p; ++i) patterns *= 3;
  for (std::size_t code = 0; code < patterns; ++code) {
    std::vector<int> status(p);  // 0 lower, 1 upper, 2 free
    std::size_t rest = code;
    for (auto& s : status) {
      s = static_cast<int>(rest % 3);
      rest /= 3;
    }
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < p; ++k) {
      if (status[k] == 2) free.push_back(k);
    }
    // (C/2) G_FF a_F = 1 - (C/2) G_FU 1
    const std::size_t n = free.size();
    std::vector<double> m(n * (n + 1));
    for (std::size_t r = 0; r < n; ++r) {
      double rhs = 1.0;
      for (std::size_t k = 0; k < p; ++k) {
        if (status[k] == 1) rhs -= 0.5 * c * dot(diffs[free[r]], diffs[k]);
      }
      for (std::size_t col = 0; col < n; ++col) m[r * (n + 1) + col] = 0.5 * c * dot(diffs[free[r]], diffs[free[col]]);
      m[r * (n + 1) + n] = rhs;
    }
    bool singular = false;
    for (std::size_t col = 0; col < n && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r) {
        if (std::abs(m[r * (n + 1) + col]) > std::abs(m[piv * (n + 1) + col])) piv = r;
      }
      if (std::abs(m[piv * (n + 1) + col]) < 1e-10) {
        singular = true;
        break;
      }
      for (std::size_t k = 0; k <= n; ++k) std::swap(m[col * (n + 1) + k], m[piv * (n + 1) + k]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = m[r * (n + 1) + col] / m[col * (n + 1) + col];
        for (std::size_t k = col; k <= n; ++k) m[r * (n + 1) + k] -= f * m[col * (n + 1) + k];
      }
    }
    if (singular) continue;
    Vector alpha(p, 0.0);
    bool feasible = true;
    for (std::size_t k = 0; k < p; ++k) alpha[k] = status[k] == 1 ? 1.0 : 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double a = m[r * (n + 1) + n] / m[r * (n + 1) + r];
      if (a < -1e-12 || a > 1.0 + 1e-12) feasible = false;
      alpha[free[r]] = std::clamp(a, 0.0, 1.0);
    }
    if (!feasible) continue;
    Vector w(dim, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
      for (std::size_t d = 0; d < dim; ++d) w[d] += 0.5 * c * alpha[k] * diffs[k][d];
    }
    const double j = objective(frames, c, w);
    if (j < best) {
      best = j;
      if (w_out) *w_out = w;
    }
  }
  return best;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("dynaflow-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace testing
