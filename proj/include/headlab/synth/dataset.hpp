#pragma once

#include "headlab/synth/record.hpp"

#include <string>
#include <vector>

namespace headlab::synth {

struct DatasetMeta {
  int resolution = 64;
  uint64_t embed_seed = 1;
  int embed_dim = 512;
  bool embed_normalized = true;
  uint64_t dataset_seed = 0;
  double jitter = 0.0;
  std::string config_hash;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<MultiViewRecord> records;

  cond::ConditionEmbedder make_embedder(bool identity_mode = false) const;
};

/// Generates subjects `0..n_subjects-1` deterministically from the dataset
/// seed and builds one record per subject.
Dataset generate_dataset(int n_subjects, const RecordBuildConfig& cfg, const DatasetMeta& meta);

/// Layout: manifest.txt + images/<subject>_<view>.png + masks/<subject>_<view>.png.
/// Per-record image files are written first, the manifest last; floats use 9
/// significant digits; image files are checksummed in the manifest.
void dataset_write(const Dataset& ds, const std::string& dir);

/// Lossless for conditions and camera labels, 8-bit-exact for images. Throws
/// naming the offending file on missing files or checksum mismatches.
Dataset dataset_read(const std::string& dir);

}  // namespace headlab::synth
