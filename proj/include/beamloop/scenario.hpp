// SPDX-License-Identifier: Apache-2.0
//
// Synthetic UAV flight scenario: piecewise-constant-velocity trajectories
// inside an axis-aligned flight box, a pinhole camera render of the UAV as
// a bright disk over a fixed textured background, and the numeric feature
// vector sensed by the base station.
//
// Geometry conventions: the ULA sits at bs_position with its elements
// along the y axis and broadside along +x; azimuth is measured in the x-y
// plane from +x. The camera shares the base-station origin and looks along
// +x, so image-x tracks azimuth and image-y tracks elevation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "beamloop/channel.hpp"

namespace beamloop {

using Vec3 = std::array<double, 3>;

struct CameraIntrinsics {
  double focal_px = 28.0;
  std::size_t width = 64;
  std::size_t height = 64;
};

struct ScenarioConfig {
  Vec3 bs_position{0.0, 0.0, 5.0};
  CameraIntrinsics camera;
  Vec3 box_lo{40.0, -40.0, 6.0};
  Vec3 box_hi{120.0, 40.0, 44.0};
  double speed_min = 3.0;  // m/s
  double speed_max = 7.0;  // m/s
  double sample_rate = 1.0; // Hz
  std::size_t seq_len = 10; // T, observation window
  std::size_t horizon = 5;  // P, prediction horizon
  std::size_t traj_len = 34;
  double heading_sigma = 0.03; // rad per step
  double pitch_sigma = 0.015;  // rad per step
  std::uint64_t seed = 6;

  void validate() const {
    if (camera.width < 16 || camera.height < 16)
      throw std::invalid_argument("ScenarioConfig: frame size must be at least 16x16");
    if (seq_len < 1 || horizon < 1)
      throw std::invalid_argument("ScenarioConfig: window and horizon must be >= 1");
    for (int i = 0; i < 3; ++i)
      if (!(box_lo[i] < box_hi[i]))
        throw std::invalid_argument("ScenarioConfig: degenerate-box");
    if (!(speed_min > 0.0) || speed_max < speed_min)
      throw std::invalid_argument("ScenarioConfig: invalid speed range");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("ScenarioConfig: sample_rate must be > 0");
    if (traj_len < seq_len + horizon)
      throw std::invalid_argument("ScenarioConfig: insufficient-trajectory-length");
  }
};

struct Trajectory {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities; // velocities[i] moves positions[i] -> positions[i+1]
  std::vector<double> timestamps;
};

inline constexpr std::size_t kNumericFeatureDim = 7; // d_n

// Disk size calibration for the rendered UAV.
inline constexpr double kDiskRefRadiusPx = 6.0;
inline constexpr double kDiskRefDistanceM = 60.0;
inline constexpr double kMinCameraDepth = 0.5;
inline constexpr std::uint8_t kDiskValue = 230;

/// Constant-speed flight with Gaussian heading/pitch perturbations; walls
/// reflect the velocity component that would leave the box.
inline Trajectory gen_trajectory(const ScenarioConfig& cfg, std::uint64_t seed,
                                 std::size_t length = 0) {
  cfg.validate();
  const std::size_t n = length == 0 ? cfg.traj_len : length;
  const double dt = 1.0 / cfg.sample_rate;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);
  Vec3 pos;
  for (int i = 0; i < 3; ++i)
    pos[i] = cfg.box_lo[i] + (cfg.box_hi[i] - cfg.box_lo[i]) * unit(rng);
  double heading = 2.0 * kPi * unit(rng);
  double pitch = 0.3 * (unit(rng) - 0.5);

  Trajectory traj;
  traj.positions.reserve(n);
  traj.velocities.reserve(n);
  traj.timestamps.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    Vec3 vel{speed * std::cos(pitch) * std::cos(heading),
             speed * std::cos(pitch) * std::sin(heading), speed * std::sin(pitch)};
    // reflect any component whose step would exit the box
    Vec3 next;
    for (int ax = 0; ax < 3; ++ax) {
      next[ax] = pos[ax] + vel[ax] * dt;
      if (next[ax] < cfg.box_lo[ax] || next[ax] > cfg.box_hi[ax]) {
        vel[ax] = -vel[ax];
        next[ax] = pos[ax] + vel[ax] * dt;
        next[ax] = std::clamp(next[ax], cfg.box_lo[ax], cfg.box_hi[ax]);
      }
    }
    traj.positions.push_back(pos);
    traj.velocities.push_back(vel);
    traj.timestamps.push_back(static_cast<double>(i) * dt);

    pos = next;
    heading = std::atan2(vel[1], vel[0]) + cfg.heading_sigma * gauss(rng);
    pitch = std::asin(std::clamp(vel[2] / speed, -1.0, 1.0)) + cfg.pitch_sigma * gauss(rng);
    pitch = std::clamp(pitch, -0.3, 0.3);
  }
  return traj;
}

struct RenderResult {
  std::vector<std::uint8_t> pixels; // H*W, row-major
  bool visible = true;
};

inline std::uint8_t background_value(std::size_t px, std::size_t py) {
  const int checker = static_cast<int>(((px >> 3) + (py >> 3)) & 1u);
  const double wave = 3.0 * std::sin(0.35 * static_cast<double>(px)) *
                      std::cos(0.27 * static_cast<double>(py));
  const double v = 10.0 + 6.0 * checker + wave;
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 35.0));
}

/// Pinhole projection of the UAV as a filled bright disk whose radius
/// scales inversely with distance. Positions at or behind the camera
/// plane produce a pure background frame flagged not-visible.
inline RenderResult render_frame(const Vec3& pos, const ScenarioConfig& cfg) {
  const std::size_t w = cfg.camera.width, h = cfg.camera.height;
  RenderResult out;
  out.pixels.resize(w * h);
  for (std::size_t py = 0; py < h; ++py)
    for (std::size_t px = 0; px < w; ++px) out.pixels[py * w + px] = background_value(px, py);

  const double dx = pos[0] - cfg.bs_position[0];
  const double dy = pos[1] - cfg.bs_position[1];
  const double dz = pos[2] - cfg.bs_position[2];
  if (dx < kMinCameraDepth) {
    out.visible = false;
    return out;
  }
  const double u = static_cast<double>(w) / 2.0 + cfg.camera.focal_px * (dy / dx);
  const double v = static_cast<double>(h) / 2.0 - cfg.camera.focal_px * (dz / dx);
  const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
  const long radius =
      std::max<long>(1, std::lround(kDiskRefRadiusPx * kDiskRefDistanceM / dist));

  const long cy = std::lround(v), cx = std::lround(u);
  for (long py = cy - radius; py <= cy + radius; ++py) {
    if (py < 0 || py >= static_cast<long>(h)) continue;
    for (long px = cx - radius; px <= cx + radius; ++px) {
      if (px < 0 || px >= static_cast<long>(w)) continue;
      const long ddx = px - cx, ddy = py - cy;
      if (ddx * ddx + ddy * ddy <= radius * radius)
        out.pixels[static_cast<std::size_t>(py) * w + static_cast<std::size_t>(px)] = kDiskValue;
    }
  }
  return out;
}

/// Features sensed per step: position relative to the base station,
/// velocity, and range. d_n = 7.
inline std::array<double, kNumericFeatureDim> numeric_features(const Trajectory& traj,
                                                               std::size_t idx,
                                                               const Vec3& bs_position) {
  if (idx >= traj.positions.size())
    throw std::out_of_range("numeric_features: index beyond trajectory");
  const auto& p = traj.positions[idx];
  const auto& v = traj.velocities[idx];
  const double dx = p[0] - bs_position[0];
  const double dy = p[1] - bs_position[1];
  const double dz = p[2] - bs_position[2];
  return {dx, dy, dz, v[0], v[1], v[2], std::sqrt(dx * dx + dy * dy + dz * dz)};
}

/// Azimuth/elevation/range of the UAV as seen from the base station.
struct LosGeometry {
  double azimuth = 0.0;
  double elevation = 0.0;
  double range = 0.0;
};

inline LosGeometry los_geometry(const Vec3& pos, const Vec3& bs_position) {
  const double dx = pos[0] - bs_position[0];
  const double dy = pos[1] - bs_position[1];
  const double dz = pos[2] - bs_position[2];
  LosGeometry g;
  const double ground = std::sqrt(dx * dx + dy * dy);
  g.azimuth = std::atan2(dy, dx);
  g.elevation = std::atan2(dz, ground);
  g.range = std::sqrt(dx * dx + dy * dy + dz * dz);
  return g;
}

} // namespace beamloop
