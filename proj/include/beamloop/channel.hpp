// SPDX-License-Identifier: Apache-2.0
//
// Geometric mmWave channel simulation for a ULA base station: DFT-style
// steering codebooks, wideband OFDM channel responses, beamforming gain /
// SNR evaluation and the exhaustive-search optimal-beam oracle.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace beamloop {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// OFDM link parameters. Power and noise are linear watts.
struct OfdmConfig {
  std::size_t num_subcarriers = 64;  // K
  std::size_t cyclic_prefix_len = 8; // D taps
  double sample_interval = 1e-7;     // seconds per tap
  double carrier_freq = 60e9;        // Hz, metadata only
  double noise_power = 1e-3;         // sigma^2
  double tx_power = 1.0;             // P

  void validate() const {
    if (num_subcarriers < 1 || cyclic_prefix_len < 1)
      throw std::invalid_argument("OfdmConfig: K and D must be >= 1");
    if (!(sample_interval > 0.0))
      throw std::invalid_argument("OfdmConfig: sample_interval must be > 0");
    if (!(noise_power > 0.0) || !(tx_power > 0.0))
      throw std::invalid_argument("OfdmConfig: powers must be > 0");
  }
};

/// One propagation path. Elevation is carried through but does not enter
/// the ULA response, which has no elevation degree of freedom.
struct ChannelPath {
  cplx gain{1.0, 0.0}; // alpha
  double delay = 0.0;  // tau, seconds
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// DFT-style ULA beamforming codebook: Q unit-norm vectors of length M,
/// steered on a uniform sin(theta) grid over [-1, 1).
struct Codebook {
  std::size_t num_elements = 0; // M
  std::size_t num_beams = 0;    // Q
  std::vector<std::vector<cplx>> vectors;
  std::vector<double> steer_grid;
};

/// Per-subcarrier channel vectors h_k, k = 0..K-1, each of length M.
struct ChannelState {
  std::vector<std::vector<cplx>> per_subcarrier;
  double timestamp = 0.0;
};

/// Non-fatal diagnostics accumulated while building a channel response.
struct ChannelStats {
  std::size_t truncated_paths = 0; // paths with delay beyond the CP window
};

struct BeamMetrics {
  double gain = 0.0;   // linear beamforming gain
  double snr_db = 0.0; // 10*log10(P*gain/sigma^2)
};

/// ULA steering vector [exp(j*pi*m*sin_theta)]_{m=0..M-1}.
inline std::vector<cplx> steering_vector(std::size_t num_elements, double sin_theta) {
  std::vector<cplx> a(num_elements);
  for (std::size_t m = 0; m < num_elements; ++m)
    a[m] = std::polar(1.0, kPi * static_cast<double>(m) * sin_theta);
  return a;
}

inline Codebook build_codebook(std::size_t num_elements, std::size_t num_beams) {
  if (num_elements < 1 || num_beams < num_elements)
    throw std::invalid_argument("build_codebook: invalid-dimensions (need Q >= M >= 1)");
  Codebook cb;
  cb.num_elements = num_elements;
  cb.num_beams = num_beams;
  cb.vectors.resize(num_beams);
  cb.steer_grid.resize(num_beams);
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_elements));
  for (std::size_t q = 0; q < num_beams; ++q) {
    const double g = -1.0 + 2.0 * static_cast<double>(q) / static_cast<double>(num_beams);
    cb.steer_grid[q] = g;
    auto v = steering_vector(num_elements, g);
    for (auto& x : v) x *= scale;
    cb.vectors[q] = std::move(v);
  }
  return cb;
}

/// Band-limited pulse shape, p(x) = sinc(x / dt) with p(0) = 1.
inline double pulse_shape(double x, double dt) {
  const double u = x / dt;
  if (u == 0.0) return 1.0;
  return std::sin(kPi * u) / (kPi * u);
}

/// Wideband channel response h_k = sum_d sum_n alpha_n e^{-j2pi k d/K}
/// p(d*dt - tau_n) a(theta_n), evaluated over the D-tap cyclic-prefix
/// window. Paths with tau beyond D*dt still contribute their in-window
/// taps; they are counted in stats->truncated_paths when stats is given.
inline ChannelState channel_response(const std::vector<ChannelPath>& paths,
                                     const OfdmConfig& cfg, std::size_t num_elements,
                                     double t, ChannelStats* stats = nullptr) {
  cfg.validate();
  if (paths.empty())
    throw std::invalid_argument("channel_response: paths must be non-empty");

  const std::size_t K = cfg.num_subcarriers;
  const std::size_t D = cfg.cyclic_prefix_len;
  const double dt = cfg.sample_interval;

  ChannelState ch;
  ch.timestamp = t;
  ch.per_subcarrier.assign(K, std::vector<cplx>(num_elements, cplx{0.0, 0.0}));

  for (const auto& path : paths) {
    if (path.delay < 0.0)
      throw std::invalid_argument("channel_response: negative path delay");
    if (path.delay > static_cast<double>(D) * dt && stats != nullptr)
      ++stats->truncated_paths;

    const auto a = steering_vector(num_elements, std::sin(path.azimuth));
    for (std::size_t k = 0; k < K; ++k) {
      cplx tap_sum{0.0, 0.0};
      for (std::size_t d = 0; d < D; ++d) {
        const double p = pulse_shape(static_cast<double>(d) * dt - path.delay, dt);
        if (p == 0.0) continue;
        const double phase = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(d) /
                             static_cast<double>(K);
        tap_sum += std::polar(p, phase);
      }
      const cplx w = path.gain * tap_sum;
      auto& hk = ch.per_subcarrier[k];
      for (std::size_t m = 0; m < num_elements; ++m) hk[m] += w * a[m];
    }
  }
  return ch;
}

/// Beamforming gain (1/K) sum_k |h_k^H b|^2 and the resulting SNR in dB.
inline BeamMetrics beam_metrics(const ChannelState& ch, const std::vector<cplx>& beam,
                                const OfdmConfig& cfg) {
  if (ch.per_subcarrier.empty() || ch.per_subcarrier.front().size() != beam.size())
    throw std::invalid_argument("beam_metrics: dimension-mismatch between channel and beam");
  double acc = 0.0;
  for (const auto& hk : ch.per_subcarrier) {
    cplx inner{0.0, 0.0};
    for (std::size_t m = 0; m < beam.size(); ++m) inner += std::conj(hk[m]) * beam[m];
    acc += std::norm(inner);
  }
  BeamMetrics out;
  out.gain = acc / static_cast<double>(ch.per_subcarrier.size());
  out.snr_db = 10.0 * std::log10(cfg.tx_power * out.gain / cfg.noise_power);
  return out;
}

/// Exhaustive codebook sweep; ties broken toward the lowest beam index.
inline std::size_t optimal_beam(const ChannelState& ch, const Codebook& cb,
                                const OfdmConfig& cfg) {
  if (cb.num_beams == 0 || ch.per_subcarrier.empty() ||
      ch.per_subcarrier.front().size() != cb.num_elements)
    throw std::invalid_argument("optimal_beam: dimension-mismatch between channel and codebook");
  std::size_t best = 0;
  double best_gain = -1.0;
  for (std::size_t q = 0; q < cb.num_beams; ++q) {
    const double g = beam_metrics(ch, cb.vectors[q], cfg).gain;
    if (g > best_gain) {
      best_gain = g;
      best = q;
    }
  }
  return best;
}

} // namespace beamloop
