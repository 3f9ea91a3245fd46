#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "freqattack/tensor.hpp"

namespace freqattack {

// 8-bit grayscale, gray+alpha, RGB or RGBA PNG. Alpha is dropped; gray
// becomes C = 1 and color C = 3. Pixel value v maps to v / 255.
Image load_png(const std::filesystem::path& path);

// Quantizes with round(v * 255) after clipping to [0, 1].
void save_png(const Image& image, const std::filesystem::path& path);

// Raw tensor interchange format: one JSON header line
//   {"byte_order":"little","dtype":"f64","shape":[...]}
// followed by the little-endian IEEE-754 binary64 payload.
void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);
void save_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

// Loads a .png or a raw tensor file (any other extension) as an Image.
Image load_image(const std::filesystem::path& path);

// Shortest "%.17g"-style text that round-trips the value exactly.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace freqattack
