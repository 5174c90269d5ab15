#include "headlab/synth/dataset.hpp"

#include "headlab/core/png_io.hpp"
#include "headlab/core/rng.hpp"
#include "headlab/core/tsv.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace headlab::synth {

namespace {

uint32_t crc32_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "missing file: " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize n = f.gcount();
    if (n > 0)
      crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(n));
  }
  return static_cast<uint32_t>(crc);
}

std::string crc_hex(uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return std::string(buf);
}

}  // namespace

cond::ConditionEmbedder Dataset::make_embedder(bool identity_mode) const {
  return cond::ConditionEmbedder(meta.embed_seed, meta.embed_dim, meta.resolution,
                                 meta.embed_normalized, identity_mode);
}

Dataset generate_dataset(int n_subjects, const RecordBuildConfig& cfg, const DatasetMeta& meta) {
  Dataset ds;
  ds.meta = meta;
  ds.meta.resolution = cfg.resolution;
  ds.meta.jitter = cfg.jitter_level;
  cond::ConditionEmbedder embedder = ds.make_embedder();
  ds.records.reserve(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    SubjectSpec spec = generate_subject(Rng::mix(meta.dataset_seed, i));
    ds.records.push_back(build_record(spec, cfg, embedder, i));
  }
  return ds;
}

void dataset_write(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");

  std::string body;
  for (const auto& rec : ds.records) {
    std::vector<std::string> fields;
    fields.push_back(std::to_string(rec.subject_id));
    fields.push_back(format_g9(rec.jitter_level));
    fields.push_back(std::to_string(rec.views.size()));
    for (size_t v = 0; v < rec.views.size(); ++v) {
      const auto& view = rec.views[v];
      const std::string img_rel =
          "images/" + std::to_string(rec.subject_id) + "_" + std::to_string(v) + ".png";
      const std::string mask_rel =
          "masks/" + std::to_string(rec.subject_id) + "_" + std::to_string(v) + ".png";
      const std::string img_path = (fs::path(dir) / img_rel).string();
      const std::string mask_path = (fs::path(dir) / mask_rel).string();
      write_png_rgb(img_path, view.image, ds.meta.config_hash);
      write_png_gray(mask_path, view.mask, ds.meta.config_hash);
      fields.push_back(img_rel);
      fields.push_back(crc_hex(crc32_file(img_path)));
      fields.push_back(mask_rel);
      fields.push_back(crc_hex(crc32_file(mask_path)));
      fields.push_back(view_tag_name(view.tag));
      for (int i = 0; i < cam::kLabelDim; ++i) fields.push_back(format_g9(view.camera[i]));
    }
    fields.push_back(std::to_string(rec.condition.size()));
    for (int i = 0; i < rec.condition.size(); ++i)
      fields.push_back(format_g9(rec.condition[i]));
    body += join_tabs(fields);
    body += '\n';
  }

  std::string head = "# headlab-dataset v1\n";
  head += "resolution\t" + std::to_string(ds.meta.resolution) + "\n";
  head += "embed_seed\t" + std::to_string(ds.meta.embed_seed) + "\n";
  head += "embed_dim\t" + std::to_string(ds.meta.embed_dim) + "\n";
  head += "embed_normalized\t" + std::string(ds.meta.embed_normalized ? "1" : "0") + "\n";
  head += "dataset_seed\t" + std::to_string(ds.meta.dataset_seed) + "\n";
  head += "jitter\t" + format_g9(ds.meta.jitter) + "\n";
  head += "config_hash\t" + ds.meta.config_hash + "\n";
  head += "records\t" + std::to_string(ds.records.size()) + "\n";

  // Manifest written last: a reader never sees files without their manifest.
  write_text((fs::path(dir) / "manifest.txt").string(), head + body);
}

Dataset dataset_read(const std::string& dir) {
  const std::string manifest = (fs::path(dir) / "manifest.txt").string();
  require(fs::exists(manifest), "dataset_read: missing manifest: " + manifest);
  std::vector<std::string> lines = read_lines(manifest);
  require(!lines.empty() && lines[0] == "# headlab-dataset v1",
          "dataset_read: unrecognized manifest header");

  Dataset ds;
  size_t li = 1;
  size_t expected_records = 0;
  for (; li < lines.size(); ++li) {
    auto f = split_tabs(lines[li]);
    if (f.size() != 2) break;
    if (f[0] == "resolution") ds.meta.resolution = std::stoi(f[1]);
    else if (f[0] == "embed_seed") ds.meta.embed_seed = std::stoull(f[1]);
    else if (f[0] == "embed_dim") ds.meta.embed_dim = std::stoi(f[1]);
    else if (f[0] == "embed_normalized") ds.meta.embed_normalized = f[1] == "1";
    else if (f[0] == "dataset_seed") ds.meta.dataset_seed = std::stoull(f[1]);
    else if (f[0] == "jitter") ds.meta.jitter = std::strtod(f[1].c_str(), nullptr);
    else if (f[0] == "config_hash") ds.meta.config_hash = f[1];
    else if (f[0] == "records") {
      expected_records = std::stoul(f[1]);
      ++li;
      break;
    }
  }

  for (; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto f = split_tabs(lines[li]);
    size_t k = 0;
    MultiViewRecord rec;
    rec.subject_id = std::stoi(f.at(k++));
    rec.jitter_level = std::strtod(f.at(k++).c_str(), nullptr);
    const size_t n_views = std::stoul(f.at(k++));
    for (size_t v = 0; v < n_views; ++v) {
      RecordView view;
      const std::string img_rel = f.at(k++);
      const std::string img_crc = f.at(k++);
      const std::string mask_rel = f.at(k++);
      const std::string mask_crc = f.at(k++);
      view.tag = view_tag_from_name(f.at(k++));
      view.camera = cam::label_from_text_fields(f, k);
      k += cam::kLabelDim;

      const std::string img_path = (fs::path(dir) / img_rel).string();
      const std::string mask_path = (fs::path(dir) / mask_rel).string();
      require(fs::exists(img_path), "dataset_read: missing image file: " + img_rel);
      require(fs::exists(mask_path), "dataset_read: missing mask file: " + mask_rel);
      require(crc_hex(crc32_file(img_path)) == img_crc,
              "dataset_read: checksum mismatch: " + img_rel);
      require(crc_hex(crc32_file(mask_path)) == mask_crc,
              "dataset_read: checksum mismatch: " + mask_rel);
      view.image = read_png_rgb(img_path);
      view.mask = read_png_gray(mask_path);
      require(view.image.rows() == view.mask.rows() && view.image.cols() == view.mask.cols(),
              "dataset_read: image/mask size mismatch: " + img_rel);
      rec.views.push_back(std::move(view));
    }
    const int dim = std::stoi(f.at(k++));
    rec.condition.resize(dim);
    for (int i = 0; i < dim; ++i) rec.condition[i] = std::strtod(f.at(k++).c_str(), nullptr);
    ds.records.push_back(std::move(rec));
  }

  require(ds.records.size() == expected_records,
          "dataset_read: manifest/file count mismatch: expected " +
              std::to_string(expected_records) + ", found " +
              std::to_string(ds.records.size()));
  return ds;
}

}  // namespace headlab::synth
