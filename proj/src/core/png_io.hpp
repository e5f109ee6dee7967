#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace raseg {

// Minimal PNG support: 8-bit grayscale or RGB, filter 0, zlib stream with
// stored (uncompressed) deflate blocks. Enough for label masks and previews;
// the reader only accepts files produced by this writer.
void write_png(const std::string& path, const uint8_t* data, int width, int height,
               int channels);

struct PngImage {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> data;  // row-major, interleaved
};

PngImage read_png(const std::string& path);

}  // namespace raseg
