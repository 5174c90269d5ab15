#pragma once

#include "headlab/core/common.hpp"
#include "headlab/core/image.hpp"

namespace headlab::cond {

struct SemanticCondition {
  Vec v;
  bool normalized = true;
};

/// Frozen, seeded image embedder: downsample to 16x16, flatten, project with a
/// fixed random orthonormal map, tanh squash, optional L2 normalization.
/// Never trained; identical images embed bitwise identically. Identity mode
/// first masks the image to the central face region, so embeddings of views
/// where that region is hidden (back views) drift — mirroring face-recognition
/// features that only see the face crop.
class ConditionEmbedder {
 public:
  ConditionEmbedder(uint64_t seed, int dim, int expected_resolution, bool normalize = true,
                    bool identity_mode = false);

  SemanticCondition embed(const Image& img) const;

  int dim() const { return dim_; }
  uint64_t seed() const { return seed_; }
  int expected_resolution() const { return res_; }
  bool normalizes() const { return normalize_; }
  bool identity_mode() const { return identity_mode_; }

  /// Operator norm bound of the linear stage (orthonormal rows -> 1), exposed
  /// for Lipschitz probes.
  double projection_gain() const { return gain_; }

 private:
  uint64_t seed_;
  int dim_;
  int res_;
  bool normalize_;
  bool identity_mode_;
  double gain_ = 3.0;
  Mat proj_;  // [dim, 768], orthonormal rows
};

}  // namespace headlab::cond
