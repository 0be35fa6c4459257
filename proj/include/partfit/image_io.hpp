#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partfit {

// 8-bit single-channel image, row-major. The only pixel container the
// toolkit reads or writes; label maps store part codes in it.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static GrayImage zeros(int width, int height);

  std::uint8_t at(int x, int y) const { return pixels[y * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[y * width + x]; }
};

// Reads a PGM (P5) or PNG file, dispatching on the magic bytes. Throws
// FormatError for anything that is not an 8-bit single-channel image and
// IoError when the file cannot be opened.
GrayImage read_gray_image(const std::string& path);

void write_pgm(const std::string& path, const GrayImage& img);
void write_png(const std::string& path, const GrayImage& img);

}  // namespace partfit
