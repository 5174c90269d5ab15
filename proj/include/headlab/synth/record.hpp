#pragma once

#include "headlab/camera/camera.hpp"
#include "headlab/cond/embedder.hpp"
#include "headlab/core/image.hpp"
#include "headlab/synth/subject.hpp"

#include <string>
#include <vector>

namespace headlab::synth {

enum class ViewTag { kFront, kLeft, kRight, kBack, kRandom };

std::string view_tag_name(ViewTag tag);
ViewTag view_tag_from_name(const std::string& name);
ViewTag classify_view(double yaw);

struct RecordView {
  Image image;
  Mat mask;
  cam::CameraLabel camera;  // quantized to the manifest's 9-digit grid
  ViewTag tag = ViewTag::kRandom;
};

/// One subject's view-balanced image set sharing a single front-view
/// condition vector (bitwise identical across views).
struct MultiViewRecord {
  int subject_id = 0;
  std::vector<RecordView> views;
  Vec condition;
  double jitter_level = 0.0;
};

struct RecordBuildConfig {
  int n_views = 8;
  int resolution = 64;
  double jitter_level = 0.0;
  cam::PoseDistribution dist = cam::PoseDistribution::full_sphere();
};

/// Renders one exact front view plus n_views-1 sampled views, embeds the
/// front view, and copies that condition to every view. With the full-sphere
/// distribution the sampled yaws are thinned in the front bin to balance the
/// forced front view, keeping the 8-bin yaw histogram flat.
MultiViewRecord build_record(const SubjectSpec& spec, const RecordBuildConfig& cfg,
                             const cond::ConditionEmbedder& embedder, int subject_id = 0);

}  // namespace headlab::synth
