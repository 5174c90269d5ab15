#include "headlab/cond/embedder.hpp"

#include "headlab/core/rng.hpp"
#include "headlab/core/tsv.hpp"

#include <cmath>

namespace headlab::cond {

namespace {
constexpr int kPatch = 16;
constexpr int kFlat = kPatch * kPatch * 3;
}  // namespace

ConditionEmbedder::ConditionEmbedder(uint64_t seed, int dim, int expected_resolution,
                                     bool normalize, bool identity_mode)
    : seed_(seed), dim_(dim), res_(expected_resolution), normalize_(normalize),
      identity_mode_(identity_mode) {
  require(dim_ >= 1 && dim_ <= kFlat, "embedder: dim must be in [1, 768]");
  Rng rng = Rng::from(seed, 0x0e4bedULL);
  Mat gauss(kFlat, dim_);
  for (int i = 0; i < kFlat; ++i)
    for (int j = 0; j < dim_; ++j) gauss(i, j) = rng.normal();
  // Orthonormal columns of Q give orthonormal rows of the projection.
  Eigen::HouseholderQR<Mat> qr(gauss);
  Mat q = qr.householderQ() * Mat::Identity(kFlat, dim_);
  proj_ = q.transpose();
}

SemanticCondition ConditionEmbedder::embed(const Image& img) const {
  require(img.rows() == res_ && img.cols() == res_,
          "embedder: expected " + std::to_string(res_) + "x" + std::to_string(res_) +
              " image, got " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()));
  Image work = img;
  if (identity_mode_) {
    // Keep only the central disk where front-view face features live; fill the
    // rest with the neutral background value.
    const double cx = 0.5 * (img.cols() - 1);
    const double cy = 0.5 * (img.rows() - 1);
    const double rad = 0.35 * img.rows();
    for (int i = 0; i < img.rows(); ++i)
      for (int j = 0; j < img.cols(); ++j) {
        const double d = std::hypot(i - cy, j - cx);
        if (d > rad) {
          work.r(i, j) = 0.5;
          work.g(i, j) = 0.5;
          work.b(i, j) = 0.5;
        }
      }
  }
  Image small = resize_bilinear(work, kPatch, kPatch);
  Vec flat = flatten_rgb(small).array() - 0.5;
  Vec z = (proj_ * flat * gain_).array().tanh();
  if (normalize_) {
    double n = z.norm();
    if (n > 0.0) z /= n;
  }
  // Quantize to the manifest's 9-significant-digit grid so embeddings survive
  // dataset round trips bit-exactly.
  for (int i = 0; i < z.size(); ++i) z[i] = quantize_g9(z[i]);
  return SemanticCondition{z, normalize_};
}

}  // namespace headlab::cond
