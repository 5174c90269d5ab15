#pragma once

#include "headlab/core/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace headlab::synth {

struct FaceFeature {
  Eigen::Vector3d dir;   // unit, front hemisphere (z > 0)
  double radius = 0.1;   // angular radius, radians
  Eigen::Vector3d color;
};

enum class AccessoryKind { kBand, kCap };

struct Accessory {
  AccessoryKind kind = AccessoryKind::kBand;
  Eigen::Vector3d color;
};

/// Procedural head description. Fully determined by its seed.
struct SubjectSpec {
  uint64_t seed = 0;
  Eigen::Vector3d head_axes;   // ellipsoid semi-axes, scene units
  Eigen::Vector3d skin_color;  // [0,1]^3
  Eigen::Vector3d hair_color;
  double hair_coverage = 0.5;  // polar-cap angular fraction in [0,1]
  std::vector<FaceFeature> face_features;
  std::optional<Accessory> accessory;
  double shoulder_offset = 0.1;

  /// Canonical text form; used for determinism and distinctness checks.
  std::string to_text() const;
};

SubjectSpec generate_subject(uint64_t seed);

}  // namespace headlab::synth
