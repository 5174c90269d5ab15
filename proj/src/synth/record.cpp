#include "headlab/synth/record.hpp"

#include "headlab/core/rng.hpp"
#include "headlab/core/tsv.hpp"
#include "headlab/synth/render_gt.hpp"

#include <cmath>

namespace headlab::synth {

std::string view_tag_name(ViewTag tag) {
  switch (tag) {
    case ViewTag::kFront: return "front";
    case ViewTag::kLeft: return "left";
    case ViewTag::kRight: return "right";
    case ViewTag::kBack: return "back";
    case ViewTag::kRandom: return "random";
  }
  return "random";
}

ViewTag view_tag_from_name(const std::string& name) {
  if (name == "front") return ViewTag::kFront;
  if (name == "left") return ViewTag::kLeft;
  if (name == "right") return ViewTag::kRight;
  if (name == "back") return ViewTag::kBack;
  return ViewTag::kRandom;
}

ViewTag classify_view(double yaw) {
  const double deg = rad_to_deg(wrap_angle(yaw));
  if (deg <= 22.5 || deg >= 337.5) return ViewTag::kFront;
  if (deg >= 67.5 && deg <= 112.5) return ViewTag::kLeft;
  if (deg >= 157.5 && deg <= 202.5) return ViewTag::kBack;
  if (deg >= 247.5 && deg <= 292.5) return ViewTag::kRight;
  return ViewTag::kRandom;
}

namespace {

cam::CameraLabel quantized_label(const cam::CameraPose& pose) {
  cam::CameraLabel label = cam::pose_to_label(pose);
  for (int i = 0; i < cam::kLabelDim; ++i) label[i] = quantize_g9(label[i]);
  return label;
}

/// Full-sphere yaw draw with the front bin [0, 45deg) thinned so that the
/// forced front view does not overweight it: acceptance (n-8)/(n-1) keeps
/// the expected per-bin count at n/8 views per subject.
double balanced_yaw(Rng& rng, int n_views) {
  const double accept = n_views > 8 ? static_cast<double>(n_views - 8) / (n_views - 1) : 0.0;
  for (int guard = 0; guard < 4096; ++guard) {
    double yaw = rng.uniform(0.0, 2.0 * kPi);
    if (yaw < kPi / 4.0 && rng.uniform() >= accept) continue;
    return yaw;
  }
  return rng.uniform(kPi / 4.0, 2.0 * kPi);
}

}  // namespace

MultiViewRecord build_record(const SubjectSpec& spec, const RecordBuildConfig& cfg,
                             const cond::ConditionEmbedder& embedder, int subject_id) {
  require(cfg.n_views >= 2, "build_record: n_views must be >= 2");
  MultiViewRecord rec;
  rec.subject_id = subject_id;
  rec.jitter_level = cfg.jitter_level;
  rec.views.reserve(cfg.n_views);

  Rng pose_rng = Rng::from(spec.seed, 0x9053ULL);
  for (int v = 0; v < cfg.n_views; ++v) {
    cam::CameraPose pose;
    if (v == 0) {
      pose.radius = cfg.dist.radius;
      pose.fov = cfg.dist.fov;
      pose.yaw = 0.0;
      pose.pitch = 0.0;
    } else if (cfg.dist.kind == cam::PoseKind::kFullSphere) {
      pose.radius = cfg.dist.radius;
      pose.fov = cfg.dist.fov;
      pose.yaw = balanced_yaw(pose_rng, cfg.n_views);
      pose.pitch = pose_rng.uniform(cfg.dist.pitch_min, cfg.dist.pitch_max);
    } else {
      pose = cam::sample_pose(cfg.dist, pose_rng);
    }

    RecordView view;
    view.camera = quantized_label(pose);
    // Render at the pose recovered from the stored label so a reader can
    // reproduce the view bit-exactly from manifest values alone.
    const cam::CameraPose render_pose = cam::label_to_pose(view.camera);
    render_ground_truth(spec, render_pose, cfg.resolution, cfg.jitter_level,
                        Rng::mix(Rng::mix(spec.seed, 0x71d3aULL), v), view.image, view.mask);
    view.tag = v == 0 ? ViewTag::kFront : classify_view(pose.yaw);
    rec.views.push_back(std::move(view));
  }

  // Condition from the stored (8-bit) front image so embeddings are
  // reproducible from dataset files alone; copied, never recomputed per view.
  rec.condition = embedder.embed(quantize8(rec.views[0].image)).v;
  return rec;
}

}  // namespace headlab::synth
