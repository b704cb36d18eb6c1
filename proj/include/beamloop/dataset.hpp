// SPDX-License-Identifier: Apache-2.0
//
// Dataset synthesis and serialization. On-disk layout under one root:
//   meta.json       {Q, M, d_n, T, P, sample_rate, seed, H, W, count}
//   manifest.jsonl  one record per sample
//   numeric/<id>.csv       T rows x d_n columns, 9 significant digits
//   images/<id>_<t>.pgm    binary PGM per frame
//   trajs/traj<idx>.csv    source trajectories (synthetic builds only)
// Labels are stored inline in manifest records. Beam labels come from the
// exhaustive-search oracle on the line-of-sight path of the float32-rounded
// stored position, so a reload reproduces them exactly.
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamloop/channel.hpp"
#include "beamloop/pgm.hpp"
#include "beamloop/scenario.hpp"

namespace beamloop {

using ordered_json = nlohmann::ordered_json;

struct DatasetMeta {
  std::size_t num_beams = 64;   // Q
  std::size_t num_elements = 16; // M
  std::size_t numeric_dim = kNumericFeatureDim;
  std::size_t window = 10;  // T
  std::size_t horizon = 5;  // P
  double sample_rate = 1.0;
  std::uint64_t seed = 6;
  std::size_t frame_h = 64;
  std::size_t frame_w = 64;
  std::size_t count = 0;

  ordered_json to_json() const {
    ordered_json j;
    j["Q"] = num_beams;
    j["M"] = num_elements;
    j["d_n"] = numeric_dim;
    j["T"] = window;
    j["P"] = horizon;
    j["sample_rate"] = sample_rate;
    j["seed"] = seed;
    j["H"] = frame_h;
    j["W"] = frame_w;
    j["count"] = count;
    return j;
  }

  static DatasetMeta from_json(const ordered_json& j) {
    DatasetMeta m;
    m.num_beams = j.at("Q").get<std::size_t>();
    m.num_elements = j.at("M").get<std::size_t>();
    m.numeric_dim = j.at("d_n").get<std::size_t>();
    m.window = j.at("T").get<std::size_t>();
    m.horizon = j.at("P").get<std::size_t>();
    m.sample_rate = j.at("sample_rate").get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.frame_h = j.at("H").get<std::size_t>();
    m.frame_w = j.at("W").get<std::size_t>();
    m.count = j.value("count", std::size_t{0});
    return m;
  }
};

struct Sample {
  std::string id;
  std::size_t traj = 0;
  std::size_t t0 = 0; // window start within the trajectory
  std::string split;  // "train" or "test"
  std::vector<float> numeric;                    // T * d_n, row-major
  std::vector<std::vector<std::uint8_t>> frames; // T frames of H*W (may be empty)
  std::vector<std::size_t> labels;               // P beam indices
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Sample> samples;

  std::vector<std::size_t> split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].split == split) out.push_back(i);
    return out;
  }
};

struct ManifestRecord {
  std::string id;
  std::size_t traj = 0;
  std::size_t t0 = 0;
  std::string split;
  std::string numeric_file;
  std::vector<std::string> image_files;
  std::vector<std::size_t> labels;
};

struct DatasetManifest {
  std::string root;
  DatasetMeta meta;
  std::vector<ManifestRecord> records;
};

namespace detail {

inline std::string format_f32(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

inline float parse_f32(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const float v = std::stof(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("schema-violation: bad number '" + s + "' in " + where);
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

} // namespace detail

/// 70/30 trajectory-interleaved split: trajectories with index mod 10 in
/// [0,7) train, the rest test.
inline std::string split_for_trajectory(std::size_t traj_index) {
  return (traj_index % 10) < 7 ? "train" : "test";
}

/// Single line-of-sight path from the base station to a (float32-rounded)
/// UAV position; gain 1/range, delay range/c.
inline ChannelPath los_path(const Vec3& pos, const Vec3& bs_position) {
  const auto g = los_geometry(pos, bs_position);
  ChannelPath p;
  p.gain = cplx{1.0 / std::max(g.range, 1e-9), 0.0};
  p.delay = g.range / 299792458.0;
  p.azimuth = g.azimuth;
  p.elevation = g.elevation;
  return p;
}

inline std::size_t oracle_beam(const Vec3& pos, const Vec3& bs_position, const OfdmConfig& ofdm,
                               const Codebook& cb) {
  const auto ch = channel_response({los_path(pos, bs_position)}, ofdm, cb.num_elements, 0.0);
  return optimal_beam(ch, cb, ofdm);
}

inline Vec3 round_f32(const Vec3& v) {
  return {static_cast<double>(static_cast<float>(v[0])),
          static_cast<double>(static_cast<float>(v[1])),
          static_cast<double>(static_cast<float>(v[2]))};
}

/// Writes samples (and optional source trajectories) under `root` and
/// returns the manifest. Fails with io-failure on unwritable targets.
inline DatasetManifest save_dataset(const Dataset& ds, const std::string& root,
                                    const std::vector<Trajectory>* trajs = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(root) / "numeric", ec);
  fs::create_directories(fs::path(root) / "images", ec);
  if (trajs != nullptr) fs::create_directories(fs::path(root) / "trajs", ec);
  if (ec) throw std::runtime_error("io-failure: cannot create dataset directories under " + root);

  DatasetManifest manifest;
  manifest.root = root;
  manifest.meta = ds.meta;
  manifest.meta.count = ds.samples.size();

  {
    std::ofstream os(fs::path(root) / "meta.json");
    if (!os) throw std::runtime_error("io-failure: cannot write meta.json under " + root);
    os << manifest.meta.to_json().dump(2) << "\n";
  }

  std::ofstream mos(fs::path(root) / "manifest.jsonl");
  if (!mos) throw std::runtime_error("io-failure: cannot write manifest.jsonl under " + root);

  for (const auto& s : ds.samples) {
    ManifestRecord rec;
    rec.id = s.id;
    rec.traj = s.traj;
    rec.t0 = s.t0;
    rec.split = s.split;
    rec.numeric_file = "numeric/" + s.id + ".csv";
    rec.labels = s.labels;

    {
      std::ofstream os(fs::path(root) / rec.numeric_file);
      if (!os) throw std::runtime_error("io-failure: cannot write " + rec.numeric_file);
      for (std::size_t t = 0; t < ds.meta.window; ++t) {
        for (std::size_t j = 0; j < ds.meta.numeric_dim; ++j) {
          if (j) os << ",";
          os << detail::format_f32(s.numeric[t * ds.meta.numeric_dim + j]);
        }
        os << "\n";
      }
    }
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      const std::string rel = "images/" + s.id + "_" + std::to_string(t) + ".pgm";
      write_pgm((fs::path(root) / rel).string(), ds.meta.frame_w, ds.meta.frame_h, s.frames[t]);
      rec.image_files.push_back(rel);
    }

    ordered_json j;
    j["id"] = rec.id;
    j["traj"] = rec.traj;
    j["t0"] = rec.t0;
    j["split"] = rec.split;
    j["numeric"] = rec.numeric_file;
    j["images"] = rec.image_files;
    j["labels"] = rec.labels;
    mos << j.dump() << "\n";
    manifest.records.push_back(std::move(rec));
  }
  if (!mos) throw std::runtime_error("io-failure: short write to manifest.jsonl");

  if (trajs != nullptr) {
    for (std::size_t i = 0; i < trajs->size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "trajs/traj%05zu.csv", i);
      std::ofstream os(fs::path(root) / name);
      if (!os) throw std::runtime_error("io-failure: cannot write trajectory file");
      const auto& tr = (*trajs)[i];
      for (std::size_t t = 0; t < tr.positions.size(); ++t) {
        os << detail::format_f32(static_cast<float>(tr.positions[t][0]));
        for (int a = 1; a < 3; ++a)
          os << "," << detail::format_f32(static_cast<float>(tr.positions[t][a]));
        for (int a = 0; a < 3; ++a)
          os << "," << detail::format_f32(static_cast<float>(tr.velocities[t][a]));
        os << "\n";
      }
    }
  }
  return manifest;
}

/// Generates trajectories, renders frames, labels windows with the beam
/// oracle and writes everything under `out_dir`.
inline DatasetManifest build_dataset(const ScenarioConfig& cfg, const OfdmConfig& ofdm,
                                     const Codebook& cb, std::size_t num_samples,
                                     const std::string& out_dir) {
  cfg.validate();
  ofdm.validate();
  const std::size_t wins_per_traj = cfg.traj_len - cfg.seq_len - cfg.horizon + 1;
  const std::size_t n_traj =
      num_samples == 0 ? 0 : (num_samples + wins_per_traj - 1) / wins_per_traj;

  Dataset ds;
  ds.meta.num_beams = cb.num_beams;
  ds.meta.num_elements = cb.num_elements;
  ds.meta.numeric_dim = kNumericFeatureDim;
  ds.meta.window = cfg.seq_len;
  ds.meta.horizon = cfg.horizon;
  ds.meta.sample_rate = cfg.sample_rate;
  ds.meta.seed = cfg.seed;
  ds.meta.frame_h = cfg.camera.height;
  ds.meta.frame_w = cfg.camera.width;

  std::vector<Trajectory> trajs;
  trajs.reserve(n_traj);
  std::size_t emitted = 0;
  for (std::size_t ti = 0; ti < n_traj && emitted < num_samples; ++ti) {
    const std::uint64_t traj_seed = cfg.seed ^ (0x9E3779B97F4A7C15ULL * (ti + 1));
    auto traj = gen_trajectory(cfg, traj_seed);

    // per-step caches shared by the overlapping windows
    std::vector<std::size_t> beam_at(traj.positions.size());
    std::vector<std::vector<std::uint8_t>> frame_at(traj.positions.size());
    for (std::size_t t = 0; t < traj.positions.size(); ++t) {
      const Vec3 stored = round_f32(traj.positions[t]);
      beam_at[t] = oracle_beam(stored, cfg.bs_position, ofdm, cb);
      frame_at[t] = render_frame(traj.positions[t], cfg).pixels;
    }

    for (std::size_t w = 0; w < wins_per_traj && emitted < num_samples; ++w, ++emitted) {
      Sample s;
      char id[16];
      std::snprintf(id, sizeof(id), "s%06zu", emitted);
      s.id = id;
      s.traj = ti;
      s.t0 = w;
      s.split = split_for_trajectory(ti);
      s.numeric.resize(cfg.seq_len * kNumericFeatureDim);
      for (std::size_t t = 0; t < cfg.seq_len; ++t) {
        const auto f = numeric_features(traj, w + t, cfg.bs_position);
        for (std::size_t j = 0; j < kNumericFeatureDim; ++j)
          s.numeric[t * kNumericFeatureDim + j] = static_cast<float>(f[j]);
        s.frames.push_back(frame_at[w + t]);
      }
      for (std::size_t p = 0; p < cfg.horizon; ++p)
        s.labels.push_back(beam_at[w + cfg.seq_len + p]);
      ds.samples.push_back(std::move(s));
    }
    trajs.push_back(std::move(traj));
  }
  return save_dataset(ds, out_dir, &trajs);
}

inline DatasetManifest load_manifest(const std::string& root) {
  namespace fs = std::filesystem;
  std::ifstream ms(fs::path(root) / "meta.json");
  if (!ms) throw std::runtime_error("missing-file: " + root + "/meta.json");
  ordered_json meta_json;
  try {
    ms >> meta_json;
  } catch (const std::exception& e) {
    throw std::runtime_error("schema-violation: meta.json: " + std::string(e.what()));
  }

  DatasetManifest manifest;
  manifest.root = root;
  manifest.meta = DatasetMeta::from_json(meta_json);

  std::ifstream is(fs::path(root) / "manifest.jsonl");
  if (!is) throw std::runtime_error("missing-file: " + root + "/manifest.jsonl");
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("schema-violation: manifest.jsonl: " + std::string(e.what()));
    }
    ManifestRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.traj = j.at("traj").get<std::size_t>();
    rec.t0 = j.at("t0").get<std::size_t>();
    rec.split = j.at("split").get<std::string>();
    rec.numeric_file = j.at("numeric").get<std::string>();
    rec.image_files = j.at("images").get<std::vector<std::string>>();
    rec.labels = j.at("labels").get<std::vector<std::size_t>>();
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

/// Loads every sample into memory, validating shapes, labels and files.
/// Errors name the offending record.
inline Dataset load_dataset(const std::string& root) {
  namespace fs = std::filesystem;
  const auto manifest = load_manifest(root);
  Dataset ds;
  ds.meta = manifest.meta;
  for (const auto& rec : manifest.records) {
    Sample s;
    s.id = rec.id;
    s.traj = rec.traj;
    s.t0 = rec.t0;
    s.split = rec.split;
    s.labels = rec.labels;
    for (auto lab : s.labels)
      if (lab >= ds.meta.num_beams)
        throw std::runtime_error("label-out-of-range: sample " + rec.id + " has label " +
                                 std::to_string(lab) + " with Q=" +
                                 std::to_string(ds.meta.num_beams));
    if (s.labels.size() != ds.meta.horizon)
      throw std::runtime_error("schema-violation: sample " + rec.id + " label count");

    std::ifstream ns(fs::path(root) / rec.numeric_file);
    if (!ns) throw std::runtime_error("missing-file: " + rec.numeric_file + " (sample " + rec.id + ")");
    std::string line;
    while (std::getline(ns, line)) {
      if (line.empty()) continue;
      for (const auto& cell : detail::split_csv_line(line))
        s.numeric.push_back(detail::parse_f32(cell, rec.numeric_file));
    }
    if (s.numeric.size() != ds.meta.window * ds.meta.numeric_dim)
      throw std::runtime_error("schema-violation: sample " + rec.id + " numeric window is " +
                               std::to_string(s.numeric.size()) + " values, expected " +
                               std::to_string(ds.meta.window * ds.meta.numeric_dim));
    for (float v : s.numeric)
      if (!std::isfinite(v))
        throw std::runtime_error("schema-violation: sample " + rec.id + " has non-finite feature");

    for (const auto& rel : rec.image_files) {
      PgmImage img;
      try {
        img = read_pgm((fs::path(root) / rel).string());
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string(e.what()) + " (sample " + rec.id + ")");
      }
      if (img.width != ds.meta.frame_w || img.height != ds.meta.frame_h)
        throw std::runtime_error("schema-violation: sample " + rec.id + " frame " + rel +
                                 " is not " + std::to_string(ds.meta.frame_w) + "x" +
                                 std::to_string(ds.meta.frame_h));
      s.frames.push_back(std::move(img.pixels));
    }
    if (!s.frames.empty() && s.frames.size() != ds.meta.window)
      throw std::runtime_error("schema-violation: sample " + rec.id + " frame count");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Loads a stored synthetic trajectory (positions and velocities).
inline Trajectory load_trajectory(const std::string& root, std::size_t index) {
  namespace fs = std::filesystem;
  char name[32];
  std::snprintf(name, sizeof(name), "trajs/traj%05zu.csv", index);
  std::ifstream is(fs::path(root) / name);
  if (!is) throw std::runtime_error("missing-file: " + std::string(name));
  Trajectory tr;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 6) throw std::runtime_error("schema-violation: trajectory row in " + std::string(name));
    Vec3 p, v;
    for (int i = 0; i < 3; ++i) p[i] = detail::parse_f32(cells[i], name);
    for (int i = 0; i < 3; ++i) v[i] = detail::parse_f32(cells[3 + i], name);
    tr.positions.push_back(p);
    tr.velocities.push_back(v);
    tr.timestamps.push_back(static_cast<double>(tr.timestamps.size()));
  }
  return tr;
}

/// Adapter for third-party data: a directory holding meta.json plus
/// data.csv with header seq,t,f0..f{d_n-1},beam,image. Windows are slid
/// over each sequence with stride 1; beam labels are taken verbatim.
inline Dataset ingest_external(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream ms(fs::path(dir) / "meta.json");
  if (!ms) throw std::runtime_error("missing-file: " + dir + "/meta.json");
  ordered_json mj;
  try {
    ms >> mj;
  } catch (const std::exception& e) {
    throw std::runtime_error("schema-violation: meta.json: " + std::string(e.what()));
  }
  Dataset ds;
  ds.meta.num_beams = mj.at("Q").get<std::size_t>();
  ds.meta.num_elements = mj.value("M", std::size_t{16});
  ds.meta.numeric_dim = mj.at("d_n").get<std::size_t>();
  ds.meta.window = mj.at("T").get<std::size_t>();
  ds.meta.horizon = mj.at("P").get<std::size_t>();
  ds.meta.sample_rate = mj.value("sample_rate", 1.0);
  ds.meta.frame_h = mj.value("H", std::size_t{0});
  ds.meta.frame_w = mj.value("W", std::size_t{0});

  std::ifstream is(fs::path(dir) / "data.csv");
  if (!is) throw std::runtime_error("missing-file: " + dir + "/data.csv");
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("schema-violation: data.csv is empty");

  struct Row {
    long t;
    std::vector<float> features;
    std::size_t beam;
    std::string image;
  };
  std::vector<std::string> seq_order;
  std::map<std::string, std::vector<Row>> by_seq;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = "data.csv line " + std::to_string(line_no);
    if (cells.size() != 2 + ds.meta.numeric_dim + 2)
      throw std::runtime_error("schema-violation: " + where + " has " +
                               std::to_string(cells.size()) + " columns");
    Row r;
    r.t = std::strtol(cells[1].c_str(), nullptr, 10);
    for (std::size_t j = 0; j < ds.meta.numeric_dim; ++j)
      r.features.push_back(detail::parse_f32(cells[2 + j], where));
    const long beam = std::strtol(cells[2 + ds.meta.numeric_dim].c_str(), nullptr, 10);
    if (beam < 0 || static_cast<std::size_t>(beam) >= ds.meta.num_beams)
      throw std::runtime_error("label-out-of-range: " + where + " beam " +
                               std::to_string(beam) + " with Q=" +
                               std::to_string(ds.meta.num_beams));
    r.beam = static_cast<std::size_t>(beam);
    r.image = cells[3 + ds.meta.numeric_dim];
    if (by_seq.find(cells[0]) == by_seq.end()) seq_order.push_back(cells[0]);
    by_seq[cells[0]].push_back(std::move(r));
  }

  std::size_t emitted = 0;
  for (std::size_t si = 0; si < seq_order.size(); ++si) {
    auto& rows = by_seq[seq_order[si]];
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].t != rows[i - 1].t + 1)
        throw std::runtime_error("schema-violation: sequence " + seq_order[si] +
                                 " has non-consecutive timestamps");
    if (rows.size() < ds.meta.window + ds.meta.horizon) continue;
    const std::size_t wins = rows.size() - ds.meta.window - ds.meta.horizon + 1;
    for (std::size_t w = 0; w < wins; ++w) {
      Sample s;
      char id[16];
      std::snprintf(id, sizeof(id), "x%06zu", emitted++);
      s.id = id;
      s.traj = si;
      s.t0 = w;
      s.split = split_for_trajectory(si);
      for (std::size_t t = 0; t < ds.meta.window; ++t) {
        const auto& r = rows[w + t];
        s.numeric.insert(s.numeric.end(), r.features.begin(), r.features.end());
        if (!r.image.empty()) {
          PgmImage img = read_pgm((fs::path(dir) / r.image).string());
          if (ds.meta.frame_h == 0) {
            ds.meta.frame_h = img.height;
            ds.meta.frame_w = img.width;
          }
          if (img.width != ds.meta.frame_w || img.height != ds.meta.frame_h)
            throw std::runtime_error("schema-violation: image " + r.image + " size mismatch");
          s.frames.push_back(std::move(img.pixels));
        }
      }
      if (!s.frames.empty() && s.frames.size() != ds.meta.window)
        throw std::runtime_error("schema-violation: sequence " + seq_order[si] +
                                 " mixes rows with and without images");
      for (std::size_t p = 0; p < ds.meta.horizon; ++p)
        s.labels.push_back(rows[w + ds.meta.window + p].beam);
      ds.samples.push_back(std::move(s));
    }
  }
  ds.meta.count = ds.samples.size();
  return ds;
}

} // namespace beamloop
