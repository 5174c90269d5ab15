#pragma once

#include "headlab/core/common.hpp"

#include <vector>

namespace headlab {

/// RGB image with values in [0,1], one dense matrix per channel.
struct Image {
  Mat r, g, b;

  Image() = default;
  Image(int rows, int cols, double fill = 0.0)
      : r(Mat::Constant(rows, cols, fill)),
        g(Mat::Constant(rows, cols, fill)),
        b(Mat::Constant(rows, cols, fill)) {}

  int rows() const { return static_cast<int>(r.rows()); }
  int cols() const { return static_cast<int>(r.cols()); }

  const Mat& channel(int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  Mat& channel(int c) { return c == 0 ? r : (c == 1 ? g : b); }

  void clamp() {
    r = r.cwiseMax(0.0).cwiseMin(1.0);
    g = g.cwiseMax(0.0).cwiseMin(1.0);
    b = b.cwiseMax(0.0).cwiseMin(1.0);
  }
};

/// 2x box-average downsample (rows and cols must be even).
Mat box_down2(const Mat& m);
Image box_down2(const Image& img);

/// Bilinear resize with half-pixel centers and edge clamping.
Mat resize_bilinear(const Mat& m, int out_rows, int out_cols);
Image resize_bilinear(const Image& img, int out_rows, int out_cols);

/// Flattens to row-major [r,g,b-plane] vector of length 3*h*w.
Vec flatten_rgb(const Image& img);

/// Mean absolute difference across all channels.
double image_mad(const Image& a, const Image& b);

/// Quantizes to the 8-bit grid used by the on-disk encoding.
Image quantize8(const Image& img);
Mat quantize8(const Mat& m);

}  // namespace headlab
