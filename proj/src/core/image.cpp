#include "headlab/core/image.hpp"

#include <cmath>

namespace headlab {

Mat box_down2(const Mat& m) {
  require(m.rows() % 2 == 0 && m.cols() % 2 == 0, "box_down2: odd dimensions");
  const int R = static_cast<int>(m.rows()) / 2;
  const int C = static_cast<int>(m.cols()) / 2;
  Mat out(R, C);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      out(i, j) = 0.25 * (m(2 * i, 2 * j) + m(2 * i + 1, 2 * j) +
                          m(2 * i, 2 * j + 1) + m(2 * i + 1, 2 * j + 1));
  return out;
}

Image box_down2(const Image& img) {
  Image out;
  out.r = box_down2(img.r);
  out.g = box_down2(img.g);
  out.b = box_down2(img.b);
  return out;
}

Mat resize_bilinear(const Mat& m, int out_rows, int out_cols) {
  const int ir = static_cast<int>(m.rows());
  const int ic = static_cast<int>(m.cols());
  Mat out(out_rows, out_cols);
  const double sr = static_cast<double>(ir) / out_rows;
  const double sc = static_cast<double>(ic) / out_cols;
  for (int i = 0; i < out_rows; ++i) {
    double y = (i + 0.5) * sr - 0.5;
    int y0 = static_cast<int>(std::floor(y));
    double wy = y - y0;
    int ya = std::min(std::max(y0, 0), ir - 1);
    int yb = std::min(std::max(y0 + 1, 0), ir - 1);
    for (int j = 0; j < out_cols; ++j) {
      double x = (j + 0.5) * sc - 0.5;
      int x0 = static_cast<int>(std::floor(x));
      double wx = x - x0;
      int xa = std::min(std::max(x0, 0), ic - 1);
      int xb = std::min(std::max(x0 + 1, 0), ic - 1);
      out(i, j) = (1 - wy) * ((1 - wx) * m(ya, xa) + wx * m(ya, xb)) +
                  wy * ((1 - wx) * m(yb, xa) + wx * m(yb, xb));
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int out_rows, int out_cols) {
  Image out;
  out.r = resize_bilinear(img.r, out_rows, out_cols);
  out.g = resize_bilinear(img.g, out_rows, out_cols);
  out.b = resize_bilinear(img.b, out_rows, out_cols);
  return out;
}

Vec flatten_rgb(const Image& img) {
  const int h = img.rows(), w = img.cols();
  Vec v(3 * h * w);
  int k = 0;
  for (int c = 0; c < 3; ++c) {
    const Mat& m = img.channel(c);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) v[k++] = m(i, j);
  }
  return v;
}

double image_mad(const Image& a, const Image& b) {
  double s = (a.r - b.r).cwiseAbs().sum() + (a.g - b.g).cwiseAbs().sum() +
             (a.b - b.b).cwiseAbs().sum();
  return s / (3.0 * a.rows() * a.cols());
}

Mat quantize8(const Mat& m) {
  Mat out = m;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) {
      double v = clamp01(out(i, j));
      out(i, j) = std::round(v * 255.0) / 255.0;
    }
  return out;
}

Image quantize8(const Image& img) {
  Image out;
  out.r = quantize8(img.r);
  out.g = quantize8(img.g);
  out.b = quantize8(img.b);
  return out;
}

}  // namespace headlab
