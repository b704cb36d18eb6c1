// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "beamloop/scenario.hpp"

using namespace beamloop;

namespace {

ScenarioConfig small_cfg() {
  ScenarioConfig cfg;
  cfg.camera.width = 64;
  cfg.camera.height = 64;
  return cfg;
}

// Bounding box of the rendered disk.
struct DiskInfo {
  bool found = false;
  long min_x = 0, max_x = 0, min_y = 0, max_y = 0;
};

DiskInfo find_disk(const RenderResult& r, std::size_t w, std::size_t h) {
  DiskInfo d;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (r.pixels[y * w + x] == kDiskValue) {
        if (!d.found) {
          d.min_x = d.max_x = static_cast<long>(x);
          d.min_y = d.max_y = static_cast<long>(y);
          d.found = true;
        } else {
          d.min_x = std::min(d.min_x, static_cast<long>(x));
          d.max_x = std::max(d.max_x, static_cast<long>(x));
          d.min_y = std::min(d.min_y, static_cast<long>(y));
          d.max_y = std::max(d.max_y, static_cast<long>(y));
        }
      }
  return d;
}

} // namespace

TEST_CASE("gen_trajectory is deterministic in its seed") {
  auto cfg = small_cfg();
  auto a = gen_trajectory(cfg, 42);
  auto b = gen_trajectory(cfg, 42);
  REQUIRE(a.positions == b.positions);
  REQUIRE(a.velocities == b.velocities);
  REQUIRE(a.timestamps == b.timestamps);
  auto c = gen_trajectory(cfg, 43);
  REQUIRE(a.positions != c.positions);
}

TEST_CASE("gen_trajectory holds speed constant over a degenerate range") {
  auto cfg = small_cfg();
  cfg.speed_min = cfg.speed_max = 6.5;
  auto traj = gen_trajectory(cfg, 7, 200);
  for (const auto& v : traj.velocities) {
    const double mag = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    REQUIRE(std::abs(mag - 6.5) < 1e-9);
  }
}

TEST_CASE("gen_trajectory keeps 1000 steps inside the flight box") {
  auto cfg = small_cfg();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto traj = gen_trajectory(cfg, seed, 1000);
    REQUIRE(traj.positions.size() == 1000);
    for (const auto& p : traj.positions)
      for (int i = 0; i < 3; ++i) {
        REQUIRE(p[i] >= cfg.box_lo[i]);
        REQUIRE(p[i] <= cfg.box_hi[i]);
      }
  }
}

TEST_CASE("gen_trajectory timestamps follow the sample rate") {
  auto cfg = small_cfg();
  cfg.sample_rate = 4.0;
  auto traj = gen_trajectory(cfg, 5, 40);
  for (std::size_t i = 1; i < traj.timestamps.size(); ++i)
    REQUIRE(traj.timestamps[i] - traj.timestamps[i - 1] == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("gen_trajectory rejects a degenerate box") {
  auto cfg = small_cfg();
  cfg.box_lo[1] = cfg.box_hi[1];
  REQUIRE_THROWS_WITH(gen_trajectory(cfg, 1), Catch::Matchers::ContainsSubstring("degenerate-box"));
}

TEST_CASE("render_frame centers the disk for a UAV on the optical axis") {
  auto cfg = small_cfg();
  Vec3 pos{cfg.bs_position[0] + 60.0, cfg.bs_position[1], cfg.bs_position[2]};
  auto r = render_frame(pos, cfg);
  REQUIRE(r.visible);
  auto d = find_disk(r, 64, 64);
  REQUIRE(d.found);
  REQUIRE((d.min_x + d.max_x) / 2 == 32);
  REQUIRE((d.min_y + d.max_y) / 2 == 32);
}

TEST_CASE("render_frame halves the disk radius when distance doubles") {
  auto cfg = small_cfg();
  auto radius_at = [&](double dist) {
    Vec3 pos{cfg.bs_position[0] + dist, cfg.bs_position[1], cfg.bs_position[2]};
    auto d = find_disk(render_frame(pos, cfg), 64, 64);
    REQUIRE(d.found);
    return (d.max_x - d.min_x) / 2;
  };
  REQUIRE(radius_at(60.0) == 6);
  REQUIRE(radius_at(120.0) == 3);
}

TEST_CASE("render_frame disk x position is strictly monotone in azimuth") {
  auto cfg = small_cfg();
  long last = -1000;
  for (double az = -0.55; az <= 0.55; az += 0.11) {
    Vec3 pos{cfg.bs_position[0] + 70.0 * std::cos(az), cfg.bs_position[1] + 70.0 * std::sin(az),
             cfg.bs_position[2]};
    auto d = find_disk(render_frame(pos, cfg), 64, 64);
    REQUIRE(d.found);
    const long center = (d.min_x + d.max_x) / 2;
    REQUIRE(center > last);
    last = center;
  }
}

TEST_CASE("render_frame flags positions behind the camera") {
  auto cfg = small_cfg();
  Vec3 pos{cfg.bs_position[0] - 10.0, 0.0, cfg.bs_position[2]};
  auto r = render_frame(pos, cfg);
  REQUIRE_FALSE(r.visible);
  auto d = find_disk(r, 64, 64);
  REQUIRE_FALSE(d.found);
  // background must match the plain background exactly
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      REQUIRE(r.pixels[y * 64 + x] == background_value(x, y));
}

TEST_CASE("numeric_features for a static hovering UAV") {
  auto cfg = small_cfg();
  Trajectory traj;
  traj.positions.push_back({cfg.bs_position[0], cfg.bs_position[1], cfg.bs_position[2] + 10.0});
  traj.velocities.push_back({0.0, 0.0, 0.0});
  traj.timestamps.push_back(0.0);
  auto f = numeric_features(traj, 0, cfg.bs_position);
  REQUIRE(f == std::array<double, 7>{0, 0, 10, 0, 0, 0, 10});
}

TEST_CASE("numeric_features range equals the Euclidean norm") {
  auto cfg = small_cfg();
  auto traj = gen_trajectory(cfg, 11, 100);
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    auto f = numeric_features(traj, i, cfg.bs_position);
    const double norm = std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
    REQUIRE(f[6] == Catch::Approx(norm).margin(1e-12));
  }
}

TEST_CASE("numeric_features are invariant under a rigid translation") {
  auto cfg = small_cfg();
  auto traj = gen_trajectory(cfg, 13, 50);
  const Vec3 shift{510.0, -230.0, 40.0};
  Trajectory moved = traj;
  for (auto& p : moved.positions)
    for (int i = 0; i < 3; ++i) p[i] += shift[i];
  Vec3 moved_bs{cfg.bs_position[0] + shift[0], cfg.bs_position[1] + shift[1],
                cfg.bs_position[2] + shift[2]};
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    auto a = numeric_features(traj, i, cfg.bs_position);
    auto b = numeric_features(moved, i, moved_bs);
    for (int j = 0; j < 7; ++j) REQUIRE(a[j] == Catch::Approx(b[j]).margin(1e-9));
  }
}
