#pragma once

#include "headlab/camera/camera.hpp"
#include "headlab/core/image.hpp"
#include "headlab/synth/subject.hpp"

namespace headlab::synth {

/// Background color shared by ground-truth renders and the neural renderer.
inline Eigen::Vector3d background_color() { return {0.5, 0.5, 0.5}; }

/// Analytic rasterization of the subject by ray-ellipsoid intersection.
/// jitter_level > 0 perturbs this view's colors and feature directions with
/// zero-mean noise seeded by jitter_seed, so different views of one subject
/// disagree slightly (the deliberate cross-view inconsistency knob).
/// Returns the image and foreground mask; background pixels are the constant
/// background color with mask 0.
void render_ground_truth(const SubjectSpec& spec, const cam::CameraPose& pose, int resolution,
                         double jitter_level, uint64_t jitter_seed, Image& image, Mat& mask);

}  // namespace headlab::synth
