#pragma once

#include <filesystem>

#include "bitsel/types.hpp"

namespace bitsel {

// Reads an uncompressed BMP (8-bit palette, 24-bit or 32-bit) as grayscale.
// Paletted images map through their palette; RGB images with equal channels
// take channel 0, anything else goes through an integer luma approximation.
Image8 read_bmp_gray(const std::filesystem::path& path);

// Writes an 8-bit grayscale BMP with an identity palette.
void write_bmp_gray(const Image8& img, const std::filesystem::path& path);

}  // namespace bitsel
