#include "core/image_io.hpp"

#include <fstream>
#include <stdexcept>

namespace phg {

void write_ppm(const std::string& path, const Raster& r) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
  f << "P6\n" << r.w << " " << r.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(r.rgb.data()), static_cast<std::streamsize>(r.rgb.size()));
  if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

Raster read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: " + path + " is not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("read_ppm: unsupported header in " + path);
  f.get();  // single whitespace after the header
  Raster r;
  r.w = w;
  r.h = h;
  r.rgb.resize(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(r.rgb.data()), static_cast<std::streamsize>(r.rgb.size()));
  if (!f) throw std::runtime_error("read_ppm: truncated payload in " + path);
  return r;
}

void write_pgm(const std::string& path, int w, int h, const std::vector<uint8_t>& gray) {
  if (static_cast<size_t>(w) * h != gray.size())
    throw std::invalid_argument("write_pgm: payload size does not match dimensions");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
  f << "P5\n" << w << " " << h << "\n255\n";
  f.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
  if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace phg
