#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/scenes.hpp"

namespace phg {

// Binary netpbm writers/readers. Headers are exactly "P6\n<w> <h>\n255\n"
// and "P5\n<w> <h>\n255\n" followed by the raw payload.
void write_ppm(const std::string& path, const Raster& r);
Raster read_ppm(const std::string& path);

void write_pgm(const std::string& path, int w, int h, const std::vector<uint8_t>& gray);

}  // namespace phg
