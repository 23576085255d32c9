#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../sph/vec3.hpp"

namespace hyb::render {

// Image: row-major 8-bit RGB.
struct Image {
  std::size_t width {0};
  std::size_t height {0};
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h) : width{w}, height{h}, pixels(w * h * 3, 0) {}

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &pixels[(y * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Linear [0, 1] to 8 bits: clamp, scale, round half up.
inline std::uint8_t to_byte(double v) {
  const double c = v > 0.0 ? (v < 1.0 ? v : 1.0) : 0.0;
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  const auto data = encode_ppm(img);
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if(!os) {
    throw Error("cannot write " + path);
  }
}

}  // end of namespace hyb::render -------------------------------------------
