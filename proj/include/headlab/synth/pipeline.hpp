#pragma once

#include "headlab/camera/camera.hpp"
#include "headlab/core/common.hpp"

#include <string>
#include <vector>

namespace headlab::synth {

enum class GateAction { kKeep, kEnhance, kDiscard };

struct PipelineVerdict {
  GateAction action = GateAction::kKeep;
  std::string reason;
};

/// Quality partition: keep above 60, discard below 35, enhance in between.
PipelineVerdict quality_gate(double score);

/// True iff |yaw| <= 10 degrees (boundary inclusive).
bool yaw_gate(const cam::CameraPose& pose);

/// Index of the candidate embedding with the highest cosine similarity to the
/// reference (ties -> lowest index). pick_lowest flips to the literal
/// lowest-similarity reading.
size_t select_front_candidate(const std::vector<Vec>& candidate_embeddings,
                              const Vec& reference_embedding, bool pick_lowest = false);

}  // namespace headlab::synth
