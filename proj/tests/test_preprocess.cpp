#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dynaflow/preprocess.hpp"
#include "support.hpp"

using namespace dynaflow;

namespace {

FlowField uniform(int w, int h, float u, float v) {
  return FlowField(w, h, std::vector<float>(static_cast<std::size_t>(w) * h, u),
                   std::vector<float>(static_cast<std::size_t>(w) * h, v));
}

int error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

}  // namespace

TEST_CASE("median") {
  const std::vector<float> odd{5, 1, 3};
  const std::vector<float> even{1, 2, 3, 100};
  CHECK(median(odd) == 3.0);
  CHECK(median(even) == 2.5);
}

TEST_CASE("subtract_median examples") {
  const FlowField z = subtract_median(uniform(3, 2, 3.0f, -1.5f));
  for (float x : z.u().samples()) CHECK(x == 0.0f);
  for (float x : z.v().samples()) CHECK(x == 0.0f);

  const FlowField f(4, 1, {1, 2, 3, 100}, {0, 0, 0, 0});
  const FlowField g = subtract_median(f);
  CHECK(g.u().vector() == std::vector<float>{-1.5f, -0.5f, 0.5f, 97.5f});

  const FlowField centered(3, 1, {-1, 0, 4}, {2, 0, -7});
  CHECK(subtract_median(centered) == centered);
}

TEST_CASE("subtract_median leaves zero median, property") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> side(1, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = side(rng), h = side(rng);
    const FlowField g = subtract_median(testing::random_flow(rng, w, h, 50.0f));
    const double mu = median(g.u().samples());
    const double mv = median(g.v().samples());
    if ((w * h) % 2 == 1) {
      REQUIRE(mu == 0.0);
      REQUIRE(mv == 0.0);
    } else {
      REQUIRE(std::abs(mu) <= 1e-5);
      REQUIRE(std::abs(mv) <= 1e-5);
    }
  }
}

TEST_CASE("threshold_flow examples") {
  const FlowField f(3, 1, {25, 20, 0}, {3, -20, 0});
  const FlowField g = threshold_flow(f, 20.0f);
  CHECK(g.u().at(0, 0) == 0.0f);
  CHECK(g.v().at(0, 0) == 0.0f);
  CHECK(g.u().at(1, 0) == 20.0f);
  CHECK(g.v().at(1, 0) == -20.0f);
  const FlowField zero = uniform(4, 4, 0.0f, 0.0f);
  CHECK(threshold_flow(zero) == zero);
  CHECK(error_kind([&] { threshold_flow(zero, 0.0f); }) == static_cast<int>(ErrorKind::Configuration));
  CHECK(error_kind([&] { threshold_flow(zero, -1.0f); }) == static_cast<int>(ErrorKind::Configuration));
}

TEST_CASE("threshold_flow never grows a component and bounds the output, property") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const FlowField f = testing::random_flow(rng, 7, 5, 35.0f);
    const FlowField g = threshold_flow(f, 20.0f);
    for (std::size_t i = 0; i < f.u().size(); ++i) {
      const float fu = f.u().samples()[i], fv = f.v().samples()[i];
      const float gu = g.u().samples()[i], gv = g.v().samples()[i];
      REQUIRE(std::abs(gu) <= std::abs(fu));
      REQUIRE(std::abs(gv) <= std::abs(fv));
      REQUIRE(std::max(std::abs(gu), std::abs(gv)) <= 20.0f);
      const bool inside = std::abs(fu) <= 20.0f && std::abs(fv) <= 20.0f;
      REQUIRE((inside ? (gu == fu && gv == fv) : (gu == 0.0f && gv == 0.0f)));
    }
  }
}

TEST_CASE("quantize_sample examples") {
  CHECK(quantize_sample(-20.0f, 20.0f) == 0);
  CHECK(quantize_sample(0.0f, 20.0f) == 128);
  CHECK(quantize_sample(20.0f, 20.0f) == 255);
  CHECK(quantize_sample(10.0f, 20.0f) == 191);
  CHECK(quantize_sample(-10.0f, 20.0f) == 64);  // 63.75
}

TEST_CASE("quantize_flow rejects out-of-range samples naming the pixel") {
  const FlowField f(2, 2, {0, 0, 0, 20.5f}, {0, 0, 0, 0});
  try {
    quantize_flow(f);
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
    CHECK(std::string(e.what()).find("(1, 1)") != std::string::npos);
  }
}

TEST_CASE("quantization is monotone and dequantizes within one step, property") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> d(-20.0f, 20.0f);
  for (int i = 0; i < 5000; ++i) {
    float a = d(rng), b = d(rng);
    if (a > b) std::swap(a, b);
    REQUIRE(quantize_sample(a, 20.0f) <= quantize_sample(b, 20.0f));
    const double back = quantize_sample(a, 20.0f) / 255.0 * 40.0 - 20.0;
    REQUIRE(std::abs(back - a) <= 20.0 / 255.0 + 1e-6);
  }
}

TEST_CASE("condition_sequence") {
  const FlowSequence one({uniform(5, 4, 2.5f, -7.0f)});
  const auto q = condition_sequence(one);
  REQUIRE(q.size() == 1);
  for (auto s : q[0].u_gray.samples()) CHECK(s == 128);
  for (auto s : q[0].v_gray.samples()) CHECK(s == 128);

  std::vector<float> u(25, 0.3f), v(25, -0.2f);
  u[12] = 100.0f;
  v[12] = 0.0f;
  const auto outlier = condition_sequence(FlowSequence({FlowField(5, 5, u, v)}));
  CHECK(outlier[0].u_gray.at(2, 2) == 128);
  CHECK(outlier[0].v_gray.at(2, 2) == 128);

  std::mt19937_64 rng(24);
  std::vector<FlowField> frames;
  for (int t = 0; t < 6; ++t) frames.push_back(testing::random_flow(rng, 6, 4, 25.0f));
  const auto all = condition_sequence(FlowSequence(frames));
  CHECK(all.size() == 6);

  // Frame-wise independence: a permutation of the input permutes the output.
  std::vector<FlowField> reversed(frames.rbegin(), frames.rend());
  const auto rev = condition_sequence(FlowSequence(reversed));
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(rev[t].u_gray == all[5 - t].u_gray);
    CHECK(rev[t].v_gray == all[5 - t].v_gray);
  }
}
