#include "dynaflow/rankpool.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace dynaflow {

void SolverConfig::validate() const {
  if (max_epochs < 1) throw Error(ErrorKind::Configuration, "solver max_epochs must be >= 1");
  if (!(tolerance > 0.0)) throw Error(ErrorKind::Configuration, "solver tolerance must be positive");
}

std::vector<Vector> smooth(std::span<const Vector> seq) {
  if (seq.empty()) throw Error(ErrorKind::EmptyInput, "cannot smooth an empty sequence");
  const std::size_t dim = seq.front().size();
  std::vector<Vector> out;
  out.reserve(seq.size());
  Vector mean(dim, 0.0);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != dim) {
      throw Error(ErrorKind::Dimension, "frame " + std::to_string(t) + " has length " +
                                            std::to_string(seq[t].size()) + ", expected " + std::to_string(dim));
    }
    // Incremental form keeps constant runs exactly fixed.
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t d = 0; d < dim; ++d) mean[d] += (seq[t][d] - mean[d]) * inv;
    out.push_back(mean);
  }
  return out;
}

// --- problem -----------------------------------------------------------------

RankingProblem::RankingProblem(std::span<const Vector> frames, double c)
    : dim_(frames.empty() ? 0 : frames.front().size()), frame_count_(frames.size()), c_(c) {
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "ranking problem needs at least one frame");
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::Configuration, "svm C must be positive");
  if (dim_ == 0) throw Error(ErrorKind::Dimension, "ranking frames are empty");
  frames_.reserve(frame_count_ * dim_);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != dim_) {
      throw Error(ErrorKind::Dimension, "ranking frame " + std::to_string(t) + " has length " +
                                            std::to_string(frames[t].size()) + ", expected " + std::to_string(dim_));
    }
    frames_.insert(frames_.end(), frames[t].begin(), frames[t].end());
  }
  pairs_.reserve(frame_count_ * (frame_count_ - 1) / 2);
  for (std::size_t i = 0; i < frame_count_; ++i) {
    for (std::size_t j = i + 1; j < frame_count_; ++j) pairs_.emplace_back(i, j);
  }
}

Vector RankingProblem::diff(std::size_t k) const {
  const auto [i, j] = pairs_[k];
  const auto fi = frame(i);
  const auto fj = frame(j);
  Vector out(dim_);
  for (std::size_t d = 0; d < dim_; ++d) out[d] = fj[d] - fi[d];
  return out;
}

RankingProblem build_problem(std::span<const Vector> smoothed, double c) { return RankingProblem(smoothed, c); }

double ranking_objective(const RankingProblem& problem, std::span<const double> w) {
  if (w.size() != problem.dim()) throw Error(ErrorKind::Dimension, "weight length does not match problem");
  double norm2 = 0.0;
  for (double x : w) norm2 += x * x;
  double hinge = 0.0;
  for (std::size_t k = 0; k < problem.pair_count(); ++k) {
    const Vector x = problem.diff(k);
    const double score = std::inner_product(x.begin(), x.end(), w.begin(), 0.0);
    hinge += std::max(0.0, 1.0 - score);
  }
  return norm2 + problem.c() * hinge;
}

// --- solver ------------------------------------------------------------------
//
// With J/2 = 0.5|w|^2 + (C/2) sum hinge, the dual is
//   max_a  sum a_k - 0.5 |sum a_k x_k|^2,   0 <= a_k <= C/2.
// Every x_k is a difference of two frames, so w = sum_t beta_t c_t over the
// frames centered on frame 0, and every inner product the solver needs comes
// from the T x T Gram matrix of the centered frames.

namespace {

struct GramSystem {
  std::size_t frames = 0;
  std::vector<double> centered;  // frames x dim
  std::vector<double> gram;      // frames x frames
  std::vector<double> pair_norm2;

  double g(std::size_t a, std::size_t b) const { return gram[a * frames + b]; }
};

GramSystem make_gram_system(const RankingProblem& problem) {
  GramSystem sys;
  const std::size_t t_count = problem.frame_count();
  const std::size_t dim = problem.dim();
  sys.frames = t_count;
  sys.centered.resize(t_count * dim);
  const auto ref = problem.frame(0);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto f = problem.frame(t);
    for (std::size_t d = 0; d < dim; ++d) sys.centered[t * dim + d] = f[d] - ref[d];
  }
  sys.gram.assign(t_count * t_count, 0.0);
  for (std::size_t a = 0; a < t_count; ++a) {
    const double* ca = sys.centered.data() + a * dim;
    for (std::size_t b = a; b < t_count; ++b) {
      const double* cb = sys.centered.data() + b * dim;
      double acc = 0.0;
      for (std::size_t d = 0; d < dim; ++d) acc += ca[d] * cb[d];
      sys.gram[a * t_count + b] = acc;
      sys.gram[b * t_count + a] = acc;
    }
  }
  // Pair curvatures straight from the difference vectors; the Gram identity
  // G_ii + G_jj - 2 G_ij loses precision when two frames nearly coincide.
  sys.pair_norm2.resize(problem.pair_count());
  for (std::size_t k = 0; k < problem.pair_count(); ++k) {
    const auto [i, j] = problem.pair(k);
    const auto fi = problem.frame(i);
    const auto fj = problem.frame(j);
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double x = fj[d] - fi[d];
      acc += x * x;
    }
    sys.pair_norm2[k] = acc;
  }
  return sys;
}

void multiply_gram(const GramSystem& sys, const Vector& beta, Vector& scores) {
  for (std::size_t a = 0; a < sys.frames; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < sys.frames; ++b) acc += sys.g(a, b) * beta[b];
    scores[a] = acc;
  }
}

}  // namespace

Solution solve(const RankingProblem& problem, const SolverConfig& cfg) {
  cfg.validate();
  Solution result;
  result.w.assign(problem.dim(), 0.0);
  if (problem.pair_count() == 0) return result;

  const GramSystem sys = make_gram_system(problem);
  const std::size_t n_pairs = problem.pair_count();
  const std::size_t t_count = problem.frame_count();
  const double upper = 0.5 * problem.c();

  Vector alpha(n_pairs, 0.0);
  Vector beta(t_count, 0.0);
  Vector scores(t_count, 0.0);  // scores[t] = <w, centered_t>
  // Zero difference vectors have a constant hinge of one; their dual
  // variables sit at the bound and never touch w.
  for (std::size_t k = 0; k < n_pairs; ++k) {
    if (sys.pair_norm2[k] == 0.0) alpha[k] = upper;
  }

  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);

  Vector best_beta = beta;
  double best_primal = std::numeric_limits<double>::infinity();
  double best_gap = std::numeric_limits<double>::infinity();
  result.converged = false;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const std::size_t k : order) {
      const double q = sys.pair_norm2[k];
      if (q == 0.0) continue;
      const auto [i, j] = problem.pair(k);
      const double grad = scores[j] - scores[i] - 1.0;
      const double a = alpha[k];
      double projected = grad;
      if (a == 0.0) projected = std::min(grad, 0.0);
      else if (a == upper) projected = std::max(grad, 0.0);
      if (projected == 0.0) continue;
      const double updated = std::clamp(a - grad / q, 0.0, upper);
      const double delta = updated - a;
      if (delta == 0.0) continue;
      alpha[k] = updated;
      beta[j] += delta;
      beta[i] -= delta;
      for (std::size_t t = 0; t < t_count; ++t) scores[t] += delta * (sys.g(t, j) - sys.g(t, i));
    }

    // Refresh scores exactly so incremental drift cannot accumulate.
    multiply_gram(sys, beta, scores);
    double norm2 = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) norm2 += beta[t] * scores[t];
    norm2 = std::max(norm2, 0.0);
    double hinge = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const auto [i, j] = problem.pair(k);
      hinge += std::max(0.0, 1.0 - (scores[j] - scores[i]));
    }
    const double primal = 0.5 * norm2 + upper * hinge;
    const double dual = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * norm2;
    const double gap = std::max(primal - dual, 0.0);

    result.epochs = epoch;
    if (primal < best_primal) {
      best_primal = primal;
      best_beta = beta;
      best_gap = gap;
    }
    if (gap <= cfg.tolerance * primal) {
      best_primal = primal;
      best_beta = beta;
      best_gap = gap;
      result.converged = true;
      break;
    }
  }

  const std::size_t dim = problem.dim();
  for (std::size_t t = 0; t < t_count; ++t) {
    const double b = best_beta[t];
    if (b == 0.0) continue;
    const double* ct = sys.centered.data() + t * dim;
    for (std::size_t d = 0; d < dim; ++d) result.w[d] += b * ct[d];
  }
  result.objective = 2.0 * best_primal;
  result.duality_gap = best_primal > 0.0 ? best_gap / best_primal : 0.0;
  return result;
}

// --- pooling -----------------------------------------------------------------

Vector DynamicFlowImage::flatten() const {
  Vector out(fu.samples().begin(), fu.samples().end());
  out.insert(out.end(), fv.samples().begin(), fv.samples().end());
  return out;
}

Vector DynamicImage::flatten() const {
  Vector out(r.samples().begin(), r.samples().end());
  out.insert(out.end(), g.samples().begin(), g.samples().end());
  out.insert(out.end(), b.samples().begin(), b.samples().end());
  return out;
}

namespace {

void append_plane(Vector& out, const Plane<std::uint8_t>& plane) {
  for (std::uint8_t s : plane.samples()) out.push_back(static_cast<double>(s));
}

Plane<double> slice_plane(const Vector& w, std::size_t index, int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const auto first = w.begin() + static_cast<std::ptrdiff_t>(index * n);
  return Plane<double>(width, height, Vector(first, first + static_cast<std::ptrdiff_t>(n)));
}

Vector solve_window(std::vector<Vector> frames, double c, const SolverConfig& cfg) {
  const std::vector<Vector> smoothed = smooth(frames);
  return solve(build_problem(smoothed, c), cfg).w;
}

}  // namespace

DynamicFlowImage pool_flow(std::span<const QuantizedFlowFrame> window, double c, const SolverConfig& cfg) {
  if (window.empty()) throw Error(ErrorKind::EmptyInput, "cannot pool an empty window");
  const int w = window.front().width();
  const int h = window.front().height();
  std::vector<Vector> frames;
  frames.reserve(window.size());
  for (const auto& q : window) {
    if (q.width() != w || q.height() != h) throw Error(ErrorKind::Dimension, "window frames differ in size");
    Vector flat;
    flat.reserve(2 * q.u_gray.size());
    append_plane(flat, q.u_gray);
    append_plane(flat, q.v_gray);
    frames.push_back(std::move(flat));
  }
  const Vector sol = solve_window(std::move(frames), c, cfg);
  return DynamicFlowImage{slice_plane(sol, 0, w, h), slice_plane(sol, 1, w, h)};
}

DynamicImage pool_rgb(std::span<const RgbFrame> clip, double c, const SolverConfig& cfg) {
  if (clip.empty()) throw Error(ErrorKind::EmptyInput, "cannot pool an empty clip");
  const int w = clip.front().width();
  const int h = clip.front().height();
  std::vector<Vector> frames;
  frames.reserve(clip.size());
  for (const auto& f : clip) {
    if (f.width() != w || f.height() != h) throw Error(ErrorKind::Dimension, "clip frames differ in size");
    Vector flat;
    flat.reserve(3 * f.r.size());
    append_plane(flat, f.r);
    append_plane(flat, f.g);
    append_plane(flat, f.b);
    frames.push_back(std::move(flat));
  }
  const Vector sol = solve_window(std::move(frames), c, cfg);
  return DynamicImage{slice_plane(sol, 0, w, h), slice_plane(sol, 1, w, h), slice_plane(sol, 2, w, h)};
}

Vector approximate_pool_coefficients(std::size_t frame_count) {
  const std::size_t t_count = frame_count;
  Vector alpha(t_count);
  // tail = H_T - H_{t-1} = sum_{i=t}^{T} 1/i, accumulated from the end in
  // extended precision so each coefficient is rounded once.
  long double tail = 0.0L;
  for (std::size_t t = t_count; t >= 1; --t) {
    tail += 1.0L / static_cast<long double>(t);
    alpha[t - 1] = static_cast<double>(2.0L * static_cast<long double>(t_count - t + 1) -
                                       static_cast<long double>(t_count + 1) * tail);
  }
  return alpha;
}

Vector approximate_pool(std::span<const Vector> frames) {
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "cannot pool an empty sequence");
  const std::size_t dim = frames.front().size();
  const Vector alpha = approximate_pool_coefficients(frames.size());
  Vector out(dim, 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != dim) throw Error(ErrorKind::Dimension, "frames differ in length");
    for (std::size_t d = 0; d < dim; ++d) out[d] += alpha[t] * frames[t][d];
  }
  return out;
}

// --- rendering ---------------------------------------------------------------

GrayFrame render_plane(const Plane<double>& plane) {
  const auto s = plane.samples();
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  GrayFrame out(plane.width(), plane.height(), 128);
  if (!(hi > lo)) return out;
  auto dst = out.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::round((s[i] - lo) / (hi - lo) * 255.0), 0.0, 255.0));
  }
  return out;
}

namespace {

// h in [0, 360), s and v in [0, 1].
void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0.0, g1 = 0.0, b1 = 0.0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  auto to8 = [](double f) { return static_cast<std::uint8_t>(std::clamp(std::round(f * 255.0), 0.0, 255.0)); };
  r = to8(r1 + m);
  g = to8(g1 + m);
  b = to8(b1 + m);
}

}  // namespace

FlowRendering render(const DynamicFlowImage& image) {
  const int w = image.width();
  const int h = image.height();
  double max_mag = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) max_mag = std::max(max_mag, std::hypot(image.fu.at(x, y), image.fv.at(x, y)));
  }
  Plane<std::uint8_t> r(w, h), g(w, h), b(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = image.fu.at(x, y);
      const double v = image.fv.at(x, y);
      const double mag = max_mag > 0.0 ? std::hypot(u, v) / max_mag : 0.0;
      double hue = std::atan2(v, u) * 180.0 / std::numbers::pi;
      if (hue < 0.0) hue += 360.0;
      if (hue >= 360.0) hue = 0.0;
      hsv_to_rgb(hue, 1.0, mag, r.at(x, y), g.at(x, y), b.at(x, y));
    }
  }
  return FlowRendering{render_plane(image.fu), render_plane(image.fv),
                       RgbFrame(std::move(r), std::move(g), std::move(b))};
}

RgbFrame render(const DynamicImage& image) {
  return RgbFrame(render_plane(image.r), render_plane(image.g), render_plane(image.b));
}

}  // namespace dynaflow
