#include "graphsolver/data.hpp"

#include "graphsolver/nn.hpp"
#include "graphsolver/random.hpp"
#include "graphsolver/rwg.hpp"

#include "detail/json_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace graphsolver::data {

namespace fs = std::filesystem;
using detail::json;

// ---------------------------------------------------------------- sweep

std::vector<double> Range::values() const {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step)) {
    throw InvalidArgument("grid bounds must be finite");
  }
  if (!(step > 0.0)) throw InvalidArgument("grid increment must be > 0");
  if (stop < start) throw InvalidArgument("grid stop lies below its start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (n > 100000) throw InvalidArgument("grid has too many points");
  std::vector<double> out(n);
  // Rounded so that 0.1-steps print as written.
  for (std::size_t i = 0; i < n; ++i) out[i] = std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12;
  return out;
}

namespace {

json range_to_json(const Range& r) { return {{"start", r.start}, {"stop", r.stop}, {"step", r.step}}; }

Range range_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Range::single(j.get<double>());
  if (!j.is_object()) throw InvalidArgument(what + " must be a number or {start, stop, step}");
  for (const auto& [key, value] : j.items()) {
    if (key != "start" && key != "stop" && key != "step") throw InvalidArgument(what + ": unknown key '" + key + "'");
  }
  Range r;
  r.start = j.at("start").get<double>();
  r.stop = j.value("stop", r.start);
  r.step = j.value("step", 1.0);
  return r;
}

}  // namespace

void SweepSpec::validate() const {
  const auto& names = mesh::ShapeSpec::parameter_names(family);
  for (const auto& [name, range] : parameters) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw InvalidArgument(mesh::to_string(family) + ": unknown parameter '" + name + "'");
    }
    range.values();
  }
  for (const auto& name : names) {
    if (!parameters.count(name)) throw InvalidArgument(mesh::to_string(family) + ": missing parameter '" + name + "'");
  }
  theta.values();
  phi.values();
  if (!(frequency > 0.0) || !std::isfinite(frequency)) throw InvalidArgument("frequency must be > 0");
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw InvalidArgument("amplitude must be > 0");
  if (!(mesh_density > 0.0 && mesh_density <= 1.0)) throw InvalidArgument("mesh_density must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (max_triangles < 4) throw InvalidArgument("max_triangles must be >= 4");
}

std::string SweepSpec::to_json() const {
  json params = json::object();
  for (const auto& [name, range] : parameters) params[name] = range_to_json(range);
  const json j = {{"family", mesh::to_string(family)},
                  {"parameters", params},
                  {"theta", range_to_json(theta)},
                  {"phi", range_to_json(phi)},
                  {"polarization", em::to_string(polarization)},
                  {"frequency", frequency},
                  {"amplitude", amplitude},
                  {"mesh_density", mesh_density},
                  {"alpha", alpha},
                  {"edge_mode", graph::to_string(edge_mode)},
                  {"sample_cap", sample_cap},
                  {"seed", seed},
                  {"max_triangles", max_triangles}};
  return j.dump();
}

SweepSpec SweepSpec::from_json(const std::string& text) {
  SweepSpec s;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw InvalidArgument("sweep must be a JSON object");
    static const std::set<std::string> known{"family", "parameters", "theta",      "phi",  "polarization",
                                             "frequency", "amplitude", "mesh_density", "alpha", "edge_mode",
                                             "sample_cap", "seed", "max_triangles"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw InvalidArgument("sweep: unknown key '" + key + "'");
    }
    s.family = mesh::shape_kind_from_string(j.at("family").get<std::string>());
    for (const auto& [name, value] : j.at("parameters").items()) s.parameters[name] = range_from_json(value, name);
    if (j.contains("theta")) s.theta = range_from_json(j.at("theta"), "theta");
    if (j.contains("phi")) s.phi = range_from_json(j.at("phi"), "phi");
    if (j.contains("polarization")) s.polarization = em::polarization_from_string(j.at("polarization").get<std::string>());
    s.frequency = j.value("frequency", s.frequency);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.mesh_density = j.value("mesh_density", s.mesh_density);
    s.alpha = j.value("alpha", s.alpha);
    if (j.contains("edge_mode")) s.edge_mode = graph::edge_vector_mode_from_string(j.at("edge_mode").get<std::string>());
    s.sample_cap = j.value("sample_cap", s.sample_cap);
    s.seed = j.value("seed", s.seed);
    s.max_triangles = j.value("max_triangles", s.max_triangles);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed sweep: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<mesh::ShapeSpec> SweepSpec::geometries() const {
  validate();
  const auto& names = mesh::ShapeSpec::parameter_names(family);
  std::vector<std::vector<double>> axes;
  for (const auto& name : names) axes.push_back(parameters.at(name).values());
  std::vector<mesh::ShapeSpec> out;
  std::vector<std::size_t> at(names.size(), 0);
  for (;;) {
    mesh::ShapeSpec spec;
    spec.kind = family;
    for (std::size_t d = 0; d < names.size(); ++d) spec.parameters[names[d]] = axes[d][at[d]];
    out.push_back(std::move(spec));
    // Last parameter varies fastest.
    std::size_t d = names.size();
    while (d > 0) {
      --d;
      if (++at[d] < axes[d].size()) break;
      at[d] = 0;
      if (d == 0) return out;
    }
    if (names.empty()) return out;
  }
}

std::size_t SweepSpec::grid_size() const {
  return geometries().size() * theta.values().size() * phi.values().size();
}

// ---------------------------------------------------------------- manifest

namespace {

std::string sample_id(std::size_t index) {
  std::ostringstream os;
  os << 's' << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

json norm_to_json(const Normalization& n) {
  return {{"feature_mean", n.feature_mean},
          {"feature_std", n.feature_std},
          {"label_mean", n.label_mean},
          {"label_std", n.label_std},
          {"edge_scale", n.edge_scale}};
}

}  // namespace

std::string DatasetManifest::to_json() const {
  json samples_j = json::array();
  for (const auto& r : samples) {
    samples_j.push_back({{"id", r.id},
                         {"file", r.file},
                         {"shape", detail::shape_to_json(r.shape)},
                         {"incidence", detail::plane_wave_to_json(r.incidence)},
                         {"M", r.nodes},
                         {"N_rwg", r.n_rwg},
                         {"residual", r.residual},
                         {"checksum", r.checksum}});
  }
  json skipped_j = json::array();
  for (const auto& s : skipped) skipped_j.push_back({{"id", s.id}, {"reason", s.reason}});
  json j = {{"dataset_id", dataset_id},
            {"seed", sweep.seed},
            {"sweep", json::parse(sweep.to_json())},
            {"samples", samples_j},
            {"skipped", skipped_j}};
  j["normalization"] = normalization ? norm_to_json(*normalization) : json(nullptr);
  if (split) {
    j["split"] = {{"seed", split->seed},
                  {"train_fraction", split->train_fraction},
                  {"train", split->train},
                  {"test", split->test}};
  } else {
    j["split"] = nullptr;
  }
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.sweep = SweepSpec::from_json(j.at("sweep").dump());
    for (const auto& r : j.at("samples")) {
      SampleRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.file = r.at("file").get<std::string>();
      rec.shape = detail::shape_from_json(r.at("shape"));
      rec.incidence = detail::plane_wave_from_json(r.at("incidence"));
      rec.nodes = r.at("M").get<std::size_t>();
      rec.n_rwg = r.at("N_rwg").get<std::size_t>();
      rec.residual = r.at("residual").get<double>();
      rec.checksum = r.at("checksum").get<std::string>();
      m.samples.push_back(std::move(rec));
    }
    for (const auto& s : j.at("skipped")) m.skipped.push_back({s.at("id").get<std::string>(), s.at("reason").get<std::string>()});
    if (j.contains("normalization") && !j.at("normalization").is_null()) {
      const auto& n = j.at("normalization");
      m.normalization = Normalization{n.at("feature_mean").get<std::vector<double>>(),
                                      n.at("feature_std").get<std::vector<double>>(),
                                      n.at("label_mean").get<std::vector<double>>(),
                                      n.at("label_std").get<std::vector<double>>(),
                                      n.value("edge_scale", 1.0)};
    }
    if (j.contains("split") && !j.at("split").is_null()) {
      const auto& s = j.at("split");
      m.split = Split{s.at("seed").get<std::uint64_t>(), s.at("train_fraction").get<double>(),
                      s.at("train").get<std::vector<std::string>>(), s.at("test").get<std::vector<std::string>>()};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
  return m;
}

const SampleRecord& DatasetManifest::record(const std::string& id) const {
  for (const auto& r : samples) {
    if (r.id == id) return r;
  }
  throw InvalidArgument("dataset has no sample '" + id + "'");
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

std::string sha256_file(const std::string& path) { return sha256_hex(read_bytes(path)); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + tmp + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw FormatError("failed writing '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

DatasetManifest read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / kManifestName).string();
  try {
    return DatasetManifest::from_json(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_manifest(const std::string& dir, const DatasetManifest& manifest) {
  write_file_atomic((fs::path(dir) / kManifestName).string(), manifest.to_json());
}

// ---------------------------------------------------------------- generation

namespace {

std::string dataset_id_of(const SweepSpec& sweep) { return "ds-" + sha256_hex(sweep.to_json()).substr(0, 16); }

std::vector<std::size_t> selected_indices(const SweepSpec& sweep) {
  const std::size_t total = sweep.grid_size();
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  if (sweep.sample_cap > 0 && sweep.sample_cap < total) {
    Rng rng(sweep.seed);
    rng.shuffle(idx);
    idx.resize(sweep.sample_cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

bool record_intact(const std::string& dir, const SampleRecord& r) {
  const fs::path path = fs::path(dir) / r.file;
  if (!fs::exists(path)) return false;
  return sha256_file(path.string()) == r.checksum;
}

}  // namespace

namespace {

bool same_samples(const std::vector<SampleRecord>& a, const std::vector<SampleRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].checksum != b[i].checksum) return false;
  }
  return true;
}

}  // namespace

DatasetManifest generate_dataset(const SweepSpec& sweep, const std::string& dir, const GenerateOptions& options,
                                 GenerateSummary* summary) {
  sweep.validate();
  auto log = [&](const std::string& line) {
    if (options.log) options.log(line);
  };
  const fs::path root(dir);
  fs::create_directories(root / "samples");

  DatasetManifest manifest;
  manifest.dataset_id = dataset_id_of(sweep);
  manifest.sweep = sweep;

  std::map<std::string, SampleRecord> previous;
  std::optional<DatasetManifest> old;
  if (fs::exists(root / kManifestName)) {
    old = read_manifest(dir);
    if (old->dataset_id != manifest.dataset_id) {
      throw InvalidArgument("'" + dir + "' holds dataset " + old->dataset_id + " built from a different sweep");
    }
    for (const auto& r : old->samples) previous[r.id] = r;
  }

  const auto geometries = sweep.geometries();
  const auto thetas = sweep.theta.values();
  const auto phis = sweep.phi.values();
  const std::size_t per_geometry = thetas.size() * phis.size();
  const auto selected = selected_indices(sweep);
  const double lambda = wavelength(sweep.frequency);
  GenerateSummary counts;

  std::size_t cursor = 0;
  for (std::size_t gi = 0; gi < geometries.size(); ++gi) {
    std::vector<std::size_t> members;
    while (cursor < selected.size() && selected[cursor] / per_geometry == gi) members.push_back(selected[cursor++]);
    if (members.empty()) continue;
    const auto& shape = geometries[gi];

    std::vector<std::size_t> todo;
    std::map<std::size_t, SampleRecord> done;
    for (auto index : members) {
      auto it = previous.find(sample_id(index));
      if (it != previous.end() && record_intact(dir, it->second)) {
        done[index] = it->second;
      } else {
        todo.push_back(index);
      }
    }
    counts.reused += done.size();

    if (!todo.empty()) {
      std::optional<std::string> failure;
      mesh::TriangleMesh tri;
      try {
        shape.validate();
        mesh::GenerateOptions gen;
        gen.max_triangles = sweep.max_triangles;
        tri = mesh::generate_primitive(shape, sweep.mesh_density, lambda, gen);
      } catch (const std::exception& e) {
        failure = e.what();
      }
      if (failure) {
        log("skip " + shape.describe() + ": " + *failure);
        for (auto index : todo) manifest.skipped.push_back({sample_id(index), "mesh generation failed: " + *failure});
        counts.skipped += todo.size();
      } else {
        const rwg::RwgSet rwg = rwg::build_rwg(tri);
        em::AssemblyOptions opts;
        opts.workers = options.workers;
        const CMatrix z = em::assemble_matrix(rwg, sweep.frequency, sweep.alpha, opts);
        const em::DenseSolver solver(z);
        for (auto index : todo) {
          const std::size_t local = index % per_geometry;
          em::PlaneWave pw;
          pw.frequency = sweep.frequency;
          pw.theta = thetas[local / phis.size()];
          pw.phi = phis[local % phis.size()];
          pw.polarization = sweep.polarization;
          pw.amplitude = sweep.amplitude;
          pw.validate();
          em::SolveReport rep;
          const CVector u = solver.solve(em::assemble_excitation(rwg, pw, sweep.alpha, opts), &rep);
          graph::GraphSample g = graph::attach_labels(graph::build_graph(tri, rwg, pw, sweep.edge_mode),
                                                      rwg::centroid_currents(rwg, u));
          g.meta.shape = shape;
          g.meta.mesh_density = sweep.mesh_density;
          g.meta.incidence = pw;
          g.meta.alpha = sweep.alpha;
          g.meta.residual = rep.residual;
          g.meta.n_rwg = static_cast<std::uint32_t>(rwg.size());

          std::ostringstream bytes;
          graph::write_sample(bytes, g);
          SampleRecord rec;
          rec.id = sample_id(index);
          rec.file = "samples/" + rec.id + ".gsb";
          rec.shape = shape;
          rec.incidence = pw;
          rec.nodes = g.node_count;
          rec.n_rwg = rwg.size();
          rec.residual = rep.residual;
          rec.checksum = sha256_hex(bytes.str());
          write_file_atomic((root / rec.file).string(), bytes.str());
          done[index] = std::move(rec);
          ++counts.generated;
        }
        log(shape.describe() + ": " + std::to_string(todo.size()) + " samples, M=" +
            std::to_string(tri.triangles.size()) + ", N=" + std::to_string(rwg.size()));
      }
    }
    const bool fresh = done.size() > members.size() - todo.size();
    for (auto& [index, rec] : done) manifest.samples.push_back(std::move(rec));
    if (fresh) {
      // Checkpoint; records of geometries not reached yet stay listed.
      DatasetManifest partial = manifest;
      for (const auto& [id, rec] : previous) {
        if (id > partial.samples.back().id) partial.samples.push_back(rec);
      }
      write_manifest(dir, partial);
    }
  }

  if (old && same_samples(old->samples, manifest.samples) && old->skipped.size() == manifest.skipped.size()) {
    // Same files as before; keep the split and statistics already recorded.
    manifest.split = old->split;
    manifest.normalization = old->normalization;
  }
  const std::string text = manifest.to_json();
  if (!old || old->to_json() != text) write_manifest(dir, manifest);
  counts.skipped = manifest.skipped.size();
  if (summary) *summary = counts;
  return manifest;
}

// ---------------------------------------------------------------- split / load

std::vector<graph::GraphSample> load_samples(const std::string& dir, const DatasetManifest& manifest,
                                             const std::vector<std::string>& ids) {
  std::vector<graph::GraphSample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto& rec = manifest.record(id);
    const std::string path = (fs::path(dir) / rec.file).string();
    const std::string bytes = read_bytes(path);
    if (sha256_hex(bytes) != rec.checksum) throw FormatError(path + ": checksum mismatch");
    std::istringstream in(bytes);
    try {
      out.push_back(graph::read_sample(in));
    } catch (const FormatError& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  return out;
}

Split split_dataset(DatasetManifest& manifest, const std::string& dir, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train fraction must lie in (0, 1)");
  const std::size_t n = manifest.samples.size();
  if (n < 2) throw InvalidArgument("splitting needs at least 2 samples");
  std::vector<std::string> ids;
  for (const auto& r : manifest.samples) ids.push_back(r.id);
  Rng rng(seed);
  rng.shuffle(ids);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());

  const auto train_samples = load_samples(dir, manifest, split.train);
  std::vector<const graph::GraphSample*> ptrs;
  for (const auto& g : train_samples) ptrs.push_back(&g);
  const nn::Normalization fit = nn::Normalization::fit(ptrs);
  auto vec = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  manifest.normalization =
      Normalization{vec(fit.feature_mean), vec(fit.feature_std), vec(fit.label_mean), vec(fit.label_std), fit.edge_scale};
  manifest.split = split;
  write_manifest(dir, manifest);
  return split;
}

VerifyReport verify_dataset(const std::string& dir, const DatasetManifest& manifest) {
  VerifyReport report;
  std::map<std::string, mesh::TriangleMesh> meshes;
  for (const auto& rec : manifest.samples) {
    ++report.checked;
    graph::GraphSample g;
    try {
      g = load_samples(dir, manifest, {rec.id}).front();
    } catch (const std::exception& e) {
      report.problems.push_back(rec.id + ": " + e.what());
      continue;
    }
    if (!g.labels) {
      report.problems.push_back(rec.id + ": no labels");
      continue;
    }
    const std::string key = rec.shape.describe();
    if (!meshes.count(key)) {
      mesh::GenerateOptions gen;
      gen.max_triangles = manifest.sweep.max_triangles;
      meshes[key] =
          mesh::generate_primitive(rec.shape, manifest.sweep.mesh_density, wavelength(manifest.sweep.frequency), gen);
    }
    const auto& tri = meshes[key];
    if (tri.triangles.size() != g.node_count) {
      report.problems.push_back(rec.id + ": regenerated mesh has a different triangle count");
      continue;
    }
    const rwg::RwgSet rwg = rwg::build_rwg(tri);
    const auto currents = graph::labels_to_currents(*g.labels);
    double worst = 0.0;
    for (std::size_t i = 0; i < currents.size(); ++i) {
      const double mag = currents[i].norm();
      if (mag == 0.0) continue;
      worst = std::max(worst, std::abs(currents[i].dot(rwg.triangles[i].normal.cast<Complex>())) / mag);
    }
    report.worst_tangency = std::max(report.worst_tangency, worst);
    if (worst > 1e-10) report.problems.push_back(rec.id + ": labels are not tangential (" + std::to_string(worst) + ")");
  }
  return report;
}

}  // namespace graphsolver::data
