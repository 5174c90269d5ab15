#pragma once

#include "headlab/core/common.hpp"
#include "headlab/core/rng.hpp"

#include <string>

namespace headlab::cam {

/// Look-at-origin camera on a sphere. yaw 0 / pitch 0 puts the camera on the
/// +z axis; positive yaw moves toward the subject's left (+x side).
struct CameraPose {
  double yaw = 0.0;     // radians
  double pitch = 0.0;   // radians, limited to +/- pi/3
  double radius = 2.7;  // scene units
  double fov = 0.5235987755982988;  // radians (30 deg)

  bool finite() const;
};

constexpr int kLabelDim = 25;
using CameraLabel = Eigen::Matrix<double, kLabelDim, 1>;

/// Camera center in world coordinates.
Eigen::Vector3d eye_position(const CameraPose& pose);

/// World-from-camera rotation; columns are the camera x (right), y (down),
/// z (forward, toward origin) axes.
Eigen::Matrix3d camera_rotation(const CameraPose& pose);

/// 25-value conditioning label: flattened 4x4 world-from-camera extrinsic
/// (row-major) followed by the flattened normalized 3x3 intrinsic.
CameraLabel pose_to_label(const CameraPose& pose);

/// Inverse of pose_to_label. Throws if the rotation block is not orthonormal
/// (reports the max deviation) or the bottom row is malformed.
CameraPose label_to_pose(const CameraLabel& label);

struct Rays {
  Mat origins;     // [R*R, 3]
  Mat directions;  // [R*R, 3], unit norm
  int resolution = 0;
};

/// Pixel-center ray grid; row-major pixel order.
Rays generate_rays(const CameraPose& pose, int resolution);

/// Ray through the continuous image point (u, v) in [0,1]^2.
void ray_for_uv(const CameraPose& pose, double u, double v, Eigen::Vector3d& origin,
                Eigen::Vector3d& dir);

/// Projects a world point to image coordinates (u, v) in [0,1]^2.
/// Returns false when the point is behind the camera.
bool project_point(const CameraPose& pose, const Eigen::Vector3d& p, double& u, double& v);

enum class PoseKind { kFullSphere, kFrontBand, kFixed };

struct PoseDistribution {
  PoseKind kind = PoseKind::kFullSphere;
  double pitch_min = -kPi / 6.0;
  double pitch_max = kPi / 6.0;
  double radius = 2.7;
  double fov = 0.5235987755982988;
  double fixed_yaw = 0.0;  // kFixed only
  double fixed_pitch = 0.0;

  static PoseDistribution full_sphere();
  static PoseDistribution front_band();
  static PoseDistribution fixed(double yaw, double pitch);
};

CameraPose sample_pose(const PoseDistribution& dist, Rng& rng);

std::string label_to_text(const CameraLabel& label);
CameraLabel label_from_text_fields(const std::vector<std::string>& fields, size_t offset);

}  // namespace headlab::cam
