// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace beamloop {

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

inline void write_pgm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height)
    throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("io-failure: cannot open " + path + " for writing");
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) throw std::runtime_error("io-failure: short write to " + path);
}

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing-file: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw std::runtime_error("pgm-decode: " + path + " is not binary PGM");
  auto next_int = [&](const char* what) {
    // skip whitespace and '#' comment lines
    int c = is.peek();
    while (is && (std::isspace(c) || c == '#')) {
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else {
        is.get();
      }
      c = is.peek();
    }
    long v = -1;
    is >> v;
    if (!is || v < 0) throw std::runtime_error(std::string("pgm-decode: bad ") + what + " in " + path);
    return static_cast<std::size_t>(v);
  };
  PgmImage img;
  img.width = next_int("width");
  img.height = next_int("height");
  const std::size_t maxval = next_int("maxval");
  if (maxval != 255) throw std::runtime_error("pgm-decode: unsupported maxval in " + path);
  is.get(); // single whitespace after header
  img.pixels.resize(img.width * img.height);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw std::runtime_error("pgm-decode: truncated pixel data in " + path);
  return img;
}

} // namespace beamloop
