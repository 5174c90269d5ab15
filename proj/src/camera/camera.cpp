#include "headlab/camera/camera.hpp"

#include "headlab/core/tsv.hpp"

#include <cmath>
#include <sstream>

namespace headlab::cam {

bool CameraPose::finite() const {
  return std::isfinite(yaw) && std::isfinite(pitch) && std::isfinite(radius) &&
         std::isfinite(fov) && radius > 0.0 && fov > 0.0 && fov < kPi;
}

Eigen::Vector3d eye_position(const CameraPose& pose) {
  const double cp = std::cos(pose.pitch);
  return pose.radius *
         Eigen::Vector3d(std::sin(pose.yaw) * cp, std::sin(pose.pitch), std::cos(pose.yaw) * cp);
}

Eigen::Matrix3d camera_rotation(const CameraPose& pose) {
  const Eigen::Vector3d eye = eye_position(pose);
  const Eigen::Vector3d up(0.0, 1.0, 0.0);
  const Eigen::Vector3d z = (-eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return R;
}

CameraLabel pose_to_label(const CameraPose& pose) {
  require(pose.finite(), "pose_to_label: non-finite pose");
  const Eigen::Matrix3d R = camera_rotation(pose);
  const Eigen::Vector3d t = eye_position(pose);
  CameraLabel v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v[i * 4 + j] = R(i, j);
  v[3] = t[0];
  v[7] = t[1];
  v[11] = t[2];
  v[12] = 0.0;
  v[13] = 0.0;
  v[14] = 0.0;
  v[15] = 1.0;
  const double f = 0.5 / std::tan(0.5 * pose.fov);
  double K[9] = {f, 0, 0.5, 0, f, 0.5, 0, 0, 1};
  for (int i = 0; i < 9; ++i) v[16 + i] = K[i];
  return v;
}

CameraPose label_to_pose(const CameraLabel& label) {
  require(label.allFinite(), "label_to_pose: non-finite label");
  require(label[12] == 0.0 && label[13] == 0.0 && label[14] == 0.0 && label[15] == 1.0,
          "label_to_pose: extrinsic bottom row must be (0,0,0,1)");
  Eigen::Matrix3d R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) R(i, j) = label[i * 4 + j];
  const Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
  const double dev = err.cwiseAbs().maxCoeff();
  if (dev > 1e-6) {
    std::ostringstream ss;
    ss << "label_to_pose: rotation block not orthonormal, max deviation " << dev;
    throw HeadlabError(ss.str());
  }
  require(R.determinant() > 0.0, "label_to_pose: rotation block must have det +1");

  const Eigen::Vector3d t(label[3], label[7], label[11]);
  CameraPose pose;
  pose.radius = t.norm();
  require(pose.radius > 0.0, "label_to_pose: camera at origin");
  pose.pitch = std::asin(t[1] / pose.radius);
  pose.yaw = std::atan2(t[0], t[2]);
  const double fx = label[16];
  require(fx > 0.0 && label[16 + 4] > 0.0 && label[16 + 8] > 0.0,
          "label_to_pose: intrinsic diagonal must be positive");
  require(label[17] == 0.0 && label[22] == 0.0 && label[23] == 0.0,
          "label_to_pose: intrinsic must be upper-triangular");
  pose.fov = 2.0 * std::atan(0.5 / fx);
  return pose;
}

void ray_for_uv(const CameraPose& pose, double u, double v, Eigen::Vector3d& origin,
                Eigen::Vector3d& dir) {
  const double f = 0.5 / std::tan(0.5 * pose.fov);
  const Eigen::Matrix3d R = camera_rotation(pose);
  origin = eye_position(pose);
  Eigen::Vector3d cam_dir((u - 0.5) / f, (v - 0.5) / f, 1.0);
  dir = (R * cam_dir).normalized();
}

Rays generate_rays(const CameraPose& pose, int resolution) {
  require(resolution >= 2, "generate_rays: resolution must be >= 2");
  require(pose.finite(), "generate_rays: non-finite pose");
  Rays rays;
  rays.resolution = resolution;
  rays.origins.resize(static_cast<long>(resolution) * resolution, 3);
  rays.directions.resize(static_cast<long>(resolution) * resolution, 3);
  const double f = 0.5 / std::tan(0.5 * pose.fov);
  const Eigen::Matrix3d R = camera_rotation(pose);
  const Eigen::Vector3d eye = eye_position(pose);
  for (int i = 0; i < resolution; ++i) {
    const double v = (i + 0.5) / resolution;
    for (int j = 0; j < resolution; ++j) {
      const double u = (j + 0.5) / resolution;
      Eigen::Vector3d d = (R * Eigen::Vector3d((u - 0.5) / f, (v - 0.5) / f, 1.0)).normalized();
      const long k = static_cast<long>(i) * resolution + j;
      rays.origins.row(k) = eye.transpose();
      rays.directions.row(k) = d.transpose();
    }
  }
  return rays;
}

bool project_point(const CameraPose& pose, const Eigen::Vector3d& p, double& u, double& v) {
  const Eigen::Matrix3d R = camera_rotation(pose);
  const Eigen::Vector3d rel = R.transpose() * (p - eye_position(pose));
  if (rel[2] <= 0.0) return false;
  const double f = 0.5 / std::tan(0.5 * pose.fov);
  u = f * rel[0] / rel[2] + 0.5;
  v = f * rel[1] / rel[2] + 0.5;
  return true;
}

PoseDistribution PoseDistribution::full_sphere() { return PoseDistribution{}; }

PoseDistribution PoseDistribution::front_band() {
  PoseDistribution d;
  d.kind = PoseKind::kFrontBand;
  return d;
}

PoseDistribution PoseDistribution::fixed(double yaw, double pitch) {
  PoseDistribution d;
  d.kind = PoseKind::kFixed;
  d.fixed_yaw = yaw;
  d.fixed_pitch = pitch;
  return d;
}

CameraPose sample_pose(const PoseDistribution& dist, Rng& rng) {
  CameraPose pose;
  pose.radius = dist.radius;
  pose.fov = dist.fov;
  switch (dist.kind) {
    case PoseKind::kFullSphere:
      pose.yaw = rng.uniform(0.0, 2.0 * kPi);
      pose.pitch = rng.uniform(dist.pitch_min, dist.pitch_max);
      break;
    case PoseKind::kFrontBand:
      pose.yaw = rng.uniform(-kPi / 4.0, kPi / 4.0);
      pose.pitch = rng.uniform(dist.pitch_min, dist.pitch_max);
      break;
    case PoseKind::kFixed:
      pose.yaw = dist.fixed_yaw;
      pose.pitch = dist.fixed_pitch;
      break;
  }
  return pose;
}

std::string label_to_text(const CameraLabel& label) {
  std::vector<std::string> f;
  f.reserve(kLabelDim);
  for (int i = 0; i < kLabelDim; ++i) f.push_back(format_g9(label[i]));
  return join_tabs(f);
}

CameraLabel label_from_text_fields(const std::vector<std::string>& fields, size_t offset) {
  require(fields.size() >= offset + kLabelDim, "camera label: not enough fields");
  CameraLabel v;
  for (int i = 0; i < kLabelDim; ++i) v[i] = std::strtod(fields[offset + i].c_str(), nullptr);
  return v;
}

}  // namespace headlab::cam
