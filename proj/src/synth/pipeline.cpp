#include "headlab/synth/pipeline.hpp"

#include <cmath>

namespace headlab::synth {

PipelineVerdict quality_gate(double score) {
  require(std::isfinite(score), "quality_gate: non-finite score");
  if (score > 60.0) return {GateAction::kKeep, "score above 60"};
  if (score < 35.0) return {GateAction::kDiscard, "score below 35"};
  return {GateAction::kEnhance, "score between 35 and 60"};
}

bool yaw_gate(const cam::CameraPose& pose) {
  require(pose.finite(), "yaw_gate: non-finite pose");
  return std::abs(rad_to_deg(pose.yaw)) <= 10.0;
}

size_t select_front_candidate(const std::vector<Vec>& candidate_embeddings,
                              const Vec& reference_embedding, bool pick_lowest) {
  require(!candidate_embeddings.empty(), "select_front_candidate: empty candidate list");
  const double ref_norm = reference_embedding.norm();
  require(ref_norm > 0.0, "select_front_candidate: zero-norm reference embedding");

  size_t best = 0;
  double best_sim = 0.0;
  for (size_t i = 0; i < candidate_embeddings.size(); ++i) {
    const Vec& c = candidate_embeddings[i];
    require(c.size() == reference_embedding.size(),
            "select_front_candidate: embedding length mismatch");
    const double n = c.norm();
    require(n > 0.0, "select_front_candidate: zero-norm candidate embedding");
    const double sim = c.dot(reference_embedding) / (n * ref_norm);
    const bool better = pick_lowest ? sim < best_sim : sim > best_sim;
    if (i == 0 || better) {
      best = i;
      best_sim = sim;
    }
  }
  return best;
}

}  // namespace headlab::synth
