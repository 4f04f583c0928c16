#pragma once

#include "graphsolver/em.hpp"
#include "graphsolver/graph.hpp"
#include "graphsolver/mesh.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace graphsolver::data {

/// Inclusive grid start, start + step, ... up to stop.
struct Range {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  std::vector<double> values() const;
  static Range single(double v) { return {v, v, 1.0}; }
};

struct SweepSpec {
  mesh::ShapeKind family = mesh::ShapeKind::spheroid;
  std::map<std::string, Range> parameters;
  Range theta{10.0, 90.0, 10.0};
  Range phi{90.0, 180.0, 10.0};
  em::Polarization polarization = em::Polarization::theta;
  double frequency = 300e6;
  double amplitude = 1.0;
  /// Target edge length in wavelengths.
  double mesh_density = 0.1;
  double alpha = 0.5;
  graph::EdgeVectorMode edge_mode = graph::EdgeVectorMode::centroid_displacement;
  /// Keep at most this many grid points (0 keeps all), chosen with `seed`.
  std::size_t sample_cap = 0;
  std::uint64_t seed = 0;
  std::size_t max_triangles = 20000;

  void validate() const;
  std::string to_json() const;
  static SweepSpec from_json(const std::string& text);

  std::vector<mesh::ShapeSpec> geometries() const;
  std::size_t grid_size() const;
};

struct SampleRecord {
  std::string id;    // "s000123", the grid index
  std::string file;  // relative to the dataset directory
  mesh::ShapeSpec shape;
  em::PlaneWave incidence;
  std::size_t nodes = 0;
  std::size_t n_rwg = 0;
  double residual = 0.0;
  std::string checksum;  // SHA-256 of the sample file, hex
};

struct SkipRecord {
  std::string id;
  std::string reason;
};

struct Split {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct Normalization {
  std::vector<double> feature_mean, feature_std, label_mean, label_std;
  double edge_scale = 1.0;
};

struct DatasetManifest {
  std::string dataset_id;
  SweepSpec sweep;
  std::vector<SampleRecord> samples;  // in grid order
  std::vector<SkipRecord> skipped;
  std::optional<Normalization> normalization;
  std::optional<Split> split;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  const SampleRecord& record(const std::string& id) const;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Writes through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

DatasetManifest read_manifest(const std::string& dir);
void write_manifest(const std::string& dir, const DatasetManifest& manifest);

struct GenerateOptions {
  int workers = 1;
  /// Progress line per geometry; may be empty.
  std::function<void(const std::string&)> log;
};

struct GenerateSummary {
  std::size_t generated = 0;
  std::size_t reused = 0;
  std::size_t skipped = 0;
};

/// Meshes, solves and persists every grid sample under `dir`. Samples already
/// present with a matching checksum are kept, so reruns resume.
DatasetManifest generate_dataset(const SweepSpec& sweep, const std::string& dir, const GenerateOptions& options = {},
                                 GenerateSummary* summary = nullptr);

/// Seeded shuffle into disjoint train / test id lists; stores the split and
/// the training-set normalization in the manifest.
Split split_dataset(DatasetManifest& manifest, const std::string& dir, double train_fraction, std::uint64_t seed);

std::vector<graph::GraphSample> load_samples(const std::string& dir, const DatasetManifest& manifest,
                                             const std::vector<std::string>& ids);

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<std::string> problems;
  double worst_tangency = 0.0;  // max over nodes of |J . n| / |J|
};

/// Checksums every sample and checks that labels are tangential.
VerifyReport verify_dataset(const std::string& dir, const DatasetManifest& manifest);

}  // namespace graphsolver::data
