#include <cmath>

#include "doctest.h"
#include "dynaflow/pipeline.hpp"
#include "dynaflow/work_pool.hpp"
#include "support.hpp"

using namespace dynaflow;
using testing::Vector;

namespace {

int error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<int>(e.kind());
  }
  return -1;
}

FlowSequence still_flow(std::size_t n, int w = 6, int h = 5, float u = 1.5f) {
  std::vector<FlowField> frames;
  for (std::size_t i = 0; i < n; ++i) {
    frames.emplace_back(w, h, std::vector<float>(static_cast<std::size_t>(w) * h, u),
                        std::vector<float>(static_cast<std::size_t>(w) * h, 0.0f));
  }
  return FlowSequence(std::move(frames));
}

FlowSequence random_sequence(std::mt19937_64& rng, std::size_t n, int w, int h) {
  std::vector<FlowField> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(testing::random_flow(rng, w, h, 8.0f));
  return FlowSequence(std::move(frames));
}

}  // namespace

TEST_CASE("make_windows examples") {
  const WindowSpec def;
  CHECK(make_windows(25, def) == std::vector<Window>{{0, 25}});
  const auto w100 = make_windows(100, def);
  REQUIRE(w100.size() == 16);
  CHECK(w100.front() == Window{0, 25});
  CHECK(w100.back() == Window{75, 100});
  CHECK(make_windows(10, def) == std::vector<Window>{{0, 10}});
  CHECK(expansion_factor(100, def) == 16);
  CHECK(expansion_factor(25, def) == 1);
  CHECK(expansion_factor(1000, def) == 196);
  CHECK(error_kind([] { make_windows(0, WindowSpec{}); }) == static_cast<int>(ErrorKind::EmptyInput));
  CHECK(error_kind([] { make_windows(5, WindowSpec{0, 5}); }) == static_cast<int>(ErrorKind::Configuration));
  CHECK(error_kind([] { make_windows(5, WindowSpec{5, 0}); }) == static_cast<int>(ErrorKind::Configuration));
}

TEST_CASE("window enumeration matches the closed form, property") {
  for (std::size_t n = 1; n <= 200; ++n) {
    for (int w = 1; w <= 40; w += 3) {
      for (int s = 1; s <= 12; s += 2) {
        const auto wins = make_windows(n, WindowSpec{w, s});
        const auto uw = static_cast<std::size_t>(w), us = static_cast<std::size_t>(s);
        const std::size_t expect = n < uw ? 1 : (n - uw) / us + 1;
        REQUIRE(wins.size() == expect);
        for (std::size_t k = 0; k < wins.size(); ++k) {
          if (n >= uw) {
            REQUIRE(wins[k].start == k * us);
            REQUIRE(wins[k].end - wins[k].start == uw);
          } else {
            REQUIRE(wins[k] == Window{0, n});
          }
          REQUIRE(wins[k].end <= n);
        }
        // No further full window fits.
        if (n >= uw) REQUIRE(wins.back().start + us + uw > n);
      }
    }
  }
}

TEST_CASE("manifest round trip") {
  ClipManifest a{"clip_7", "wave", 100, {}};
  for (const auto& w : make_windows(100, WindowSpec{})) a.windows.push_back({w.start, w.end, window_stem("clip_7", w.start) + ".npy"});
  ClipManifest b{"other clip", "run fast", 10, {{0, 10, "x/other clip_w0.npy"}}};
  const std::vector<ClipManifest> clips{a, b};
  const std::string text = serialize_manifest(clips);
  CHECK(parse_manifest(text) == clips);
  CHECK(text.find("clip_7\twave\t75\t100\tclip_7_w75.npy\n") != std::string::npos);
  CHECK(window_stem("c", 15) == "c_w15");
}

TEST_CASE("manifest round trip, property") {
  std::mt19937_64 rng(41);
  const std::string alphabet = "abcXYZ019 _-./";
  auto word = [&] {
    std::string s;
    const std::size_t len = 1 + rng() % 10;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ClipManifest> clips;
    for (std::size_t c = 0, n_clips = 1 + rng() % 4; c < n_clips; ++c) {
      ClipManifest m{"id" + word(), word(), 1 + rng() % 300, {}};
      for (const auto& w : make_windows(m.n_frames, WindowSpec{1 + static_cast<int>(rng() % 30), 1 + static_cast<int>(rng() % 7)})) {
        m.windows.push_back({w.start, w.end, word()});
      }
      clips.push_back(m);
    }
    REQUIRE(parse_manifest(serialize_manifest(clips)) == clips);
  }
}

TEST_CASE("manifest validation") {
  CHECK(error_kind([] { parse_manifest("a\tb\t0\t5\tp\n"); }) == static_cast<int>(ErrorKind::Format));
  CHECK(error_kind([] { parse_manifest("#clip\ta\tb\t4\na\tb\t0\t5\tp\n"); }) == static_cast<int>(ErrorKind::Format));
  CHECK(error_kind([] { parse_manifest("#clip\ta\tb\t9\na\tb\t0\t5\tp\na\tb\t0\t5\tq\n"); }) ==
        static_cast<int>(ErrorKind::Format));
  CHECK(error_kind([] { parse_manifest("#clip\ta\tb\tx\n"); }) == static_cast<int>(ErrorKind::Format));
  CHECK(error_kind([] { parse_manifest("#clip\ta\tb\t9\na\tb\t0\t5\n"); }) == static_cast<int>(ErrorKind::Format));
  const ClipManifest tabbed{"a\tb", "l", 3, {}};
  CHECK(error_kind([&] { tabbed.validate(); }) == static_cast<int>(ErrorKind::Format));
}

TEST_CASE("run_clip") {
  PoolSettings settings;
  const ClipResult one = run_clip(still_flow(25), settings, "c", "l");
  CHECK(one.images.size() == 1);
  const ClipResult six = run_clip(still_flow(50), settings, "c", "l");
  CHECK(six.images.size() == 6);
  CHECK(six.manifest.windows.size() == 6);
  CHECK(six.manifest.windows[5].start == 25);
  CHECK(six.manifest.windows[5].path == "c_w25.npy");
  CHECK(six.manifest.n_frames == 50);
  for (const auto& img : six.images) {
    for (double x : img.flatten()) REQUIRE(x == 0.0);
  }
  CHECK(six.pool_seconds.size() == 6);
  PoolSettings bad_window;
  bad_window.windows = {0, 1};
  CHECK(error_kind([&] { run_clip(still_flow(5), bad_window, "c", "l"); }) ==
        static_cast<int>(ErrorKind::Configuration));
  PoolSettings bad_bound;
  bad_bound.clip_bound = 0.0f;
  CHECK(error_kind([&] { run_clip(still_flow(5), bad_bound, "c", "l"); }) ==
        static_cast<int>(ErrorKind::Configuration));
}

TEST_CASE("run_clip output does not depend on the worker count") {
  std::mt19937_64 rng(42);
  const FlowSequence seq = random_sequence(rng, 40, 7, 6);
  PoolSettings serial;
  serial.windows = {10, 3};
  PoolSettings parallel = serial;
  parallel.workers = 4;
  const ClipResult a = run_clip(seq, serial, "c", "l");
  const ClipResult b = run_clip(seq, parallel, "c", "l");
  REQUIRE(a.images.size() == b.images.size());
  for (std::size_t k = 0; k < a.images.size(); ++k) CHECK(a.images[k].flatten() == b.images[k].flatten());
  CHECK(a.manifest == b.manifest);
}

TEST_CASE("invalid solver settings are rejected before pooling") {
  PoolSettings settings;
  settings.windows = {3, 1};
  settings.solver.max_epochs = 0;
  try {
    run_clip(still_flow(6), settings, "c", "l");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Configuration);
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (int workers : {1, 3}) {
    std::vector<int> done(20, 0);
    try {
      parallel_for(20, workers, [&](std::size_t i) {
        if (i == 7 || i == 12) throw Error(ErrorKind::Contract, "boom " + std::to_string(i));
        done[i] = 1;
      });
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()) == "boom 7");
    }
    for (std::size_t i = 0; i < 7; ++i) CHECK(done[i] == 1);
  }
}

TEST_CASE("run_rgb_clip") {
  std::vector<RgbFrame> frames;
  for (int t = 0; t < 30; ++t) frames.emplace_back(GrayFrame(4, 4, static_cast<std::uint8_t>(t)));
  const RgbClipResult r = run_rgb_clip(frames, PoolSettings{}, "rgb", "ramp");
  CHECK(r.images.size() == 2);
  CHECK(r.manifest.windows[1].start == 5);
  CHECK(error_kind([] { run_rgb_clip({}, PoolSettings{}, "c", "l"); }) == static_cast<int>(ErrorKind::EmptyInput));
}

TEST_CASE("assemble_feature") {
  const std::vector<Vector> parts{Vector(4, 1.0), Vector(6, 2.0)};
  CHECK(assemble_feature(parts).size() == 10);
  const std::vector<Vector> single{{1.0, -2.0, 3.5}};
  CHECK(assemble_feature(single) == single[0]);
  const std::vector<Vector> pythagorean{{3.0, 4.0}, {0.0, 0.0}, {2.0}};
  CHECK(assemble_feature(pythagorean, true) == Vector{0.6, 0.8, 0.0, 0.0, 1.0});
  const std::vector<Vector> with_empty{{1.0}, {}};
  CHECK(error_kind([&] { assemble_feature(with_empty); }) == static_cast<int>(ErrorKind::Dimension));
  CHECK(error_kind([] { assemble_feature(std::vector<Vector>{}); }) == static_cast<int>(ErrorKind::EmptyInput));
}
