#include "headlab/synth/subject.hpp"

#include "headlab/core/rng.hpp"

#include <cstdio>
#include <sstream>

namespace headlab::synth {

namespace {

Eigen::Vector3d clamped(const Eigen::Vector3d& c) {
  return Eigen::Vector3d(clamp01(c[0]), clamp01(c[1]), clamp01(c[2]));
}

Eigen::Vector3d front_unit(double side, double up) {
  // Direction on the front hemisphere given lateral/vertical offsets.
  Eigen::Vector3d d(side, up, 1.0);
  return d.normalized();
}

}  // namespace

SubjectSpec generate_subject(uint64_t seed) {
  Rng rng = Rng::from(seed, 0x5ab1ec7ULL);
  SubjectSpec s;
  s.seed = seed;
  s.head_axes = Eigen::Vector3d(rng.uniform(0.24, 0.38), rng.uniform(0.28, 0.44),
                                rng.uniform(0.24, 0.36));

  const double base = rng.uniform(0.35, 0.95);
  s.skin_color = clamped(Eigen::Vector3d(base, base * rng.uniform(0.62, 0.9),
                                         base * rng.uniform(0.45, 0.85)));
  s.hair_color = clamped(Eigen::Vector3d(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                                         rng.uniform(0.0, 1.0)));
  s.hair_coverage = rng.uniform(0.2, 0.9);

  const double eye_side = rng.uniform(0.3, 0.45);
  const double eye_up = rng.uniform(0.1, 0.25);
  const double eye_rad = rng.uniform(0.07, 0.12);
  Eigen::Vector3d eye_color = clamped(
      Eigen::Vector3d(rng.uniform(0.0, 0.25), rng.uniform(0.0, 0.45), rng.uniform(0.1, 0.7)));
  s.face_features.push_back({front_unit(-eye_side, eye_up), eye_rad, eye_color});
  s.face_features.push_back({front_unit(eye_side, eye_up), eye_rad, eye_color});
  Eigen::Vector3d mouth_color =
      clamped(Eigen::Vector3d(rng.uniform(0.5, 0.9), rng.uniform(0.05, 0.3),
                              rng.uniform(0.1, 0.35)));
  s.face_features.push_back(
      {front_unit(rng.uniform(-0.05, 0.05), rng.uniform(-0.55, -0.35)),
       rng.uniform(0.1, 0.16), mouth_color});
  if (rng.uniform() < 0.5) {
    // Nose patch.
    s.face_features.push_back(
        {front_unit(0.0, rng.uniform(-0.15, 0.0)), rng.uniform(0.04, 0.08),
         clamped(s.skin_color * 0.75)});
  }

  const double acc = rng.uniform();
  if (acc < 0.2) {
    s.accessory = Accessory{AccessoryKind::kBand,
                            clamped(Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform()))};
  } else if (acc < 0.4) {
    s.accessory = Accessory{AccessoryKind::kCap,
                            clamped(Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform()))};
  }
  s.shoulder_offset = rng.uniform(0.02, 0.18);
  return s;
}

std::string SubjectSpec::to_text() const {
  std::ostringstream ss;
  auto put = [&ss](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    ss << buf << ' ';
  };
  ss << seed << ' ';
  for (int i = 0; i < 3; ++i) put(head_axes[i]);
  for (int i = 0; i < 3; ++i) put(skin_color[i]);
  for (int i = 0; i < 3; ++i) put(hair_color[i]);
  put(hair_coverage);
  ss << face_features.size() << ' ';
  for (const auto& f : face_features) {
    for (int i = 0; i < 3; ++i) put(f.dir[i]);
    put(f.radius);
    for (int i = 0; i < 3; ++i) put(f.color[i]);
  }
  if (accessory) {
    ss << (accessory->kind == AccessoryKind::kBand ? "band " : "cap ");
    for (int i = 0; i < 3; ++i) put(accessory->color[i]);
  } else {
    ss << "none ";
  }
  put(shoulder_offset);
  return ss.str();
}

}  // namespace headlab::synth
