#pragma once

#include "headlab/core/image.hpp"

#include <optional>
#include <string>

namespace headlab {

// Minimal PNG codec (8-bit RGB / grayscale, non-interlaced) built on zlib.
// Covers exactly the files this project writes; read rejects anything else.

/// Optional tEXt chunk ("comment") carried by written files, used to stamp
/// artifacts with the producing config hash.
void write_png_rgb(const std::string& path, const Image& img,
                   const std::string& comment = "");
void write_png_gray(const std::string& path, const Mat& m,
                    const std::string& comment = "");

Image read_png_rgb(const std::string& path);
Mat read_png_gray(const std::string& path);

/// Returns the comment chunk of a PNG written by this codec, if present.
std::optional<std::string> read_png_comment(const std::string& path);

}  // namespace headlab
