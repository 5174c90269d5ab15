#include "headlab/synth/render_gt.hpp"

#include "headlab/core/rng.hpp"

#include <cmath>

namespace headlab::synth {

namespace {

// Hair cap pole tilted toward the back so typical coverages leave the face
// open; coverage 1 still wraps the whole head.
const Eigen::Vector3d kHairPole = Eigen::Vector3d(0.0, 0.766, -0.643).normalized();
const Eigen::Vector3d kLightDir = Eigen::Vector3d(0.3, 0.8, 0.5).normalized();

struct Hit {
  double t = -1.0;
  Eigen::Vector3d point;
  bool shoulders = false;
};

// Nearest positive intersection of a ray with an axis-aligned ellipsoid.
bool ray_ellipsoid(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                   const Eigen::Vector3d& center, const Eigen::Vector3d& axes, double& t) {
  const Eigen::Vector3d inv = axes.cwiseInverse();
  const Eigen::Vector3d oo = (o - center).cwiseProduct(inv);
  const Eigen::Vector3d dd = d.cwiseProduct(inv);
  const double a = dd.squaredNorm();
  const double b = 2.0 * oo.dot(dd);
  const double c = oo.squaredNorm() - 1.0;
  const double disc = b * b - 4 * a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  double t0 = (-b - sq) / (2 * a);
  double t1 = (-b + sq) / (2 * a);
  if (t0 > 1e-9) {
    t = t0;
    return true;
  }
  if (t1 > 1e-9) {
    t = t1;
    return true;
  }
  return false;
}

struct JitteredSubject {
  SubjectSpec spec;
  Eigen::Vector3d clothing;
};

JitteredSubject jitter_subject(const SubjectSpec& spec, double level, uint64_t seed) {
  JitteredSubject out{spec, {}};
  if (level > 0.0) {
    Rng rng = Rng::from(seed, 0x717e3ULL);
    auto wobble_color = [&](Eigen::Vector3d& c) {
      for (int i = 0; i < 3; ++i) c[i] = clamp01(c[i] + level * rng.normal());
    };
    wobble_color(out.spec.skin_color);
    wobble_color(out.spec.hair_color);
    for (auto& f : out.spec.face_features) {
      wobble_color(f.color);
      Eigen::Vector3d d = f.dir;
      for (int i = 0; i < 3; ++i) d[i] += level * rng.normal();
      if (d.norm() > 1e-9) f.dir = d.normalized();
    }
    if (out.spec.accessory) wobble_color(out.spec.accessory->color);
  }
  const Eigen::Vector3d& skin = out.spec.skin_color;
  out.clothing = Eigen::Vector3d(clamp01(0.9 - 0.6 * skin[0]), clamp01(0.9 - 0.6 * skin[1]),
                                 clamp01(0.9 - 0.6 * skin[2]));
  return out;
}

Eigen::Vector3d shade_head(const JitteredSubject& js, const Eigen::Vector3d& p) {
  const SubjectSpec& s = js.spec;
  // Unit-sphere preimage of the surface point selects the color region.
  const Eigen::Vector3d dir = p.cwiseQuotient(s.head_axes).normalized();
  const double polar = std::acos(std::min(1.0, std::max(-1.0, dir[1])));

  Eigen::Vector3d color = s.skin_color;
  bool covered = false;
  if (s.accessory) {
    if (s.accessory->kind == AccessoryKind::kBand) {
      if (polar >= 0.30 * kPi && polar <= 0.40 * kPi) {
        color = s.accessory->color;
        covered = true;
      }
    } else {
      if (polar <= 0.22 * kPi) {
        color = s.accessory->color;
        covered = true;
      }
    }
  }
  if (!covered) {
    const double hair_angle = std::acos(std::min(1.0, std::max(-1.0, dir.dot(kHairPole))));
    if (hair_angle <= s.hair_coverage * kPi) {
      color = s.hair_color;
      covered = true;
    }
  }
  if (!covered) {
    for (const auto& f : s.face_features) {
      const double a = std::acos(std::min(1.0, std::max(-1.0, dir.dot(f.dir))));
      if (a <= f.radius) {
        color = f.color;
        break;
      }
    }
  }

  // Lambert-ish term so geometry reads from every view.
  const Eigen::Vector3d n =
      p.cwiseQuotient(s.head_axes.cwiseProduct(s.head_axes)).normalized();
  const double lambert = 0.7 + 0.3 * std::max(0.0, n.dot(kLightDir));
  return color * lambert;
}

}  // namespace

void render_ground_truth(const SubjectSpec& spec, const cam::CameraPose& pose, int resolution,
                         double jitter_level, uint64_t jitter_seed, Image& image, Mat& mask) {
  require(pose.finite(), "render_ground_truth: non-finite pose");
  require(resolution >= 8, "render_ground_truth: resolution must be >= 8");
  require(jitter_level >= 0.0 && std::isfinite(jitter_level),
          "render_ground_truth: jitter_level must be >= 0");

  const JitteredSubject js = jitter_subject(spec, jitter_level, jitter_seed);
  const Eigen::Vector3d bg = background_color();
  const Eigen::Vector3d head_center(0, 0, 0);
  const Eigen::Vector3d sh_axes(2.2 * js.spec.head_axes[0], 0.5 * js.spec.head_axes[1],
                                1.1 * js.spec.head_axes[2]);
  const Eigen::Vector3d sh_center(0.0, -(js.spec.head_axes[1] + js.spec.shoulder_offset +
                                         0.3 * sh_axes[1]),
                                  0.0);

  image = Image(resolution, resolution);
  mask = Mat::Zero(resolution, resolution);
  cam::Rays rays = cam::generate_rays(pose, resolution);

  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const long k = static_cast<long>(i) * resolution + j;
      const Eigen::Vector3d o = rays.origins.row(k);
      const Eigen::Vector3d d = rays.directions.row(k);
      double t_head, t_sh;
      const bool hit_head = ray_ellipsoid(o, d, head_center, js.spec.head_axes, t_head);
      const bool hit_sh = ray_ellipsoid(o, d, sh_center, sh_axes, t_sh);

      Eigen::Vector3d color = bg;
      double m = 0.0;
      if (hit_head && (!hit_sh || t_head <= t_sh)) {
        color = shade_head(js, o + t_head * d);
        m = 1.0;
      } else if (hit_sh) {
        const Eigen::Vector3d p = o + t_sh * d;
        const Eigen::Vector3d n =
            (p - sh_center).cwiseQuotient(sh_axes.cwiseProduct(sh_axes)).normalized();
        color = js.clothing * (0.7 + 0.3 * std::max(0.0, n.dot(kLightDir)));
        m = 1.0;
      }
      image.r(i, j) = clamp01(color[0]);
      image.g(i, j) = clamp01(color[1]);
      image.b(i, j) = clamp01(color[2]);
      mask(i, j) = m;
    }
}

}  // namespace headlab::synth
