#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "headlab/camera/camera.hpp"
#include "headlab/core/rng.hpp"
#include "headlab/core/tsv.hpp"

using namespace headlab;
using namespace headlab::cam;

TEST_CASE("front pose extrinsic is the canonical look-at") {
  CameraPose pose;  // yaw 0, pitch 0
  Eigen::Matrix3d R = camera_rotation(pose);
  // Camera on +z looking at origin: x right, y down, z toward -z.
  CHECK((R.col(0) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  CHECK((R.col(1) - Eigen::Vector3d(0, -1, 0)).norm() < 1e-12);
  CHECK((R.col(2) - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0));
}

TEST_CASE("label round trip on random poses") {
  Rng rng(100);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    CameraPose p;
    p.yaw = rng.uniform(-kPi, kPi);
    p.pitch = rng.uniform(-kPi / 3, kPi / 3);
    p.radius = rng.uniform(1.5, 5.0);
    p.fov = rng.uniform(0.2, 1.2);
    CameraPose q = label_to_pose(pose_to_label(p));
    worst = std::max(worst, std::abs(p.yaw - q.yaw));
    worst = std::max(worst, std::abs(p.pitch - q.pitch));
    worst = std::max(worst, std::abs(p.radius - q.radius));
    worst = std::max(worst, std::abs(p.fov - q.fov));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("tampered label rejected with deviation report") {
  CameraPose p;
  p.yaw = 0.4;
  CameraLabel label = pose_to_label(p);
  for (int j = 0; j < 3; ++j) label[j] *= 1.01;
  CHECK_THROWS_WITH_AS(label_to_pose(label), doctest::Contains("not orthonormal"),
                       HeadlabError);
}

TEST_CASE("label invariants") {
  CameraPose p;
  p.yaw = 1.1;
  p.pitch = -0.3;
  CameraLabel v = pose_to_label(p);
  CHECK(v[12] == 0.0);
  CHECK(v[15] == 1.0);
  CHECK(v[16] > 0.0);   // fx
  CHECK(v[17] == 0.0);  // upper-triangular
}

TEST_CASE("ray directions are unit and central ray hits origin") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    CameraPose p;
    p.yaw = rng.uniform(0, 2 * kPi);
    p.pitch = rng.uniform(-1.0, 1.0);
    Rays rays = generate_rays(p, 9);
    for (int k = 0; k < rays.directions.rows(); ++k)
      CHECK(std::abs(rays.directions.row(k).norm() - 1.0) < 1e-9);

    Eigen::Vector3d o, d;
    ray_for_uv(p, 0.5, 0.5, o, d);
    // Distance from origin to the central ray.
    Eigen::Vector3d closest = o - d * d.dot(o);
    CHECK(closest.norm() < 1e-9);
  }
}

TEST_CASE("yaw mirror symmetry of ray fields") {
  const int R = 8;
  Rng rng(102);
  for (int trial = 0; trial < 4; ++trial) {
    double phi = rng.uniform(0.1, 2.8);
    CameraPose a, b;
    a.yaw = phi;
    b.yaw = -phi;
    a.pitch = b.pitch = rng.uniform(-0.9, 0.9);
    Rays ra = generate_rays(a, R);
    Rays rb = generate_rays(b, R);
    double worst = 0.0;
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < R; ++j) {
        long ka = static_cast<long>(i) * R + j;
        long kb = static_cast<long>(i) * R + (R - 1 - j);
        Eigen::Vector3d da = ra.directions.row(ka);
        Eigen::Vector3d db = rb.directions.row(kb);
        db[0] = -db[0];
        worst = std::max(worst, (da - db).cwiseAbs().maxCoeff());
        Eigen::Vector3d oa = ra.origins.row(ka);
        Eigen::Vector3d ob = rb.origins.row(kb);
        ob[0] = -ob[0];
        worst = std::max(worst, (oa - ob).cwiseAbs().maxCoeff());
      }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("reprojection consistency") {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    CameraPose p;
    p.yaw = rng.uniform(0, 2 * kPi);
    p.pitch = rng.uniform(-1.0, 1.0);
    const int res = 32;
    int i = static_cast<int>(rng.below(res));
    int j = static_cast<int>(rng.below(res));
    Rays rays = generate_rays(p, res);
    long k = static_cast<long>(i) * res + j;
    // A point along the pixel's ray must project back to the pixel center.
    Eigen::Vector3d pt = rays.origins.row(k).transpose() +
                         rng.uniform(1.0, 4.0) * rays.directions.row(k).transpose();
    double u, v;
    REQUIRE(project_point(p, pt, u, v));
    CHECK(std::abs(u * res - (j + 0.5)) < 0.5);
    CHECK(std::abs(v * res - (i + 0.5)) < 0.5);
  }
}

TEST_CASE("pose sampling supports") {
  Rng rng(104);
  PoseDistribution fixed = PoseDistribution::fixed(0, 0);
  for (int i = 0; i < 5; ++i) {
    CameraPose p = sample_pose(fixed, rng);
    CHECK(p.yaw == 0.0);
    CHECK(p.pitch == 0.0);
  }

  PoseDistribution band = PoseDistribution::front_band();
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sample_pose(band, rng).yaw) <= kPi / 4);

  PoseDistribution sphere = PoseDistribution::full_sphere();
  int bins[8] = {0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double yaw = sample_pose(sphere, rng).yaw;
    bins[static_cast<int>(yaw / (2 * kPi) * 8)]++;
  }
  int mn = bins[0], mx = bins[0];
  for (int v : bins) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  CHECK(static_cast<double>(mx) / mn <= 1.1);
}

TEST_CASE("label text round trip") {
  CameraPose p;
  p.yaw = 2.13;
  p.pitch = 0.21;
  CameraLabel v = pose_to_label(p);
  // Manifest storage is quantized to 9 significant digits at record-build
  // time; a quantized label round-trips bit-exactly.
  for (int i = 0; i < kLabelDim; ++i) v[i] = quantize_g9(v[i]);
  CameraLabel w = label_from_text_fields(split_tabs(label_to_text(v)), 0);
  for (int i = 0; i < kLabelDim; ++i) CHECK(w[i] == v[i]);
}
