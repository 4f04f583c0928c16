#include "graphsolver/cli.hpp"

#include "graphsolver/data.hpp"
#include "graphsolver/em.hpp"
#include "graphsolver/graph.hpp"
#include "graphsolver/mesh.hpp"
#include "graphsolver/nn.hpp"
#include "graphsolver/rwg.hpp"
#include "graphsolver/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace graphsolver::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Mapped to exit code 2.
struct BadFlags : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

int default_workers() {
  if (const char* env = std::getenv("GRAPHSOLVER_WORKERS")) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(env, &used);
      if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw BadFlags(std::string("GRAPHSOLVER_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

// Appends entries of a JSON config file as flags that are not already given.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw BadFlags("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;
  std::ifstream in(path);
  if (!in) throw BadFlags("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw BadFlags("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw BadFlags("config file must hold a JSON object");
  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& [key, value] : j.items()) {
    if (given.count(key)) continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) rest.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        rest.push_back(flag);
        rest.push_back(scalar(v));
      }
    } else if (value.is_null()) {
      continue;
    } else {
      rest.push_back(flag);
      rest.push_back(scalar(value));
    }
  }
  return rest;
}

void echo_resolved(const CLI::App& sub) {
  json opts = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() && opt->get_name().empty()) continue;
    std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->get_type_size() == 0) {
      opts[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      opts[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      opts[name] = opt->get_default_str().empty() ? json(nullptr) : json(opt->get_default_str());
    }
  }
  std::cerr << json{{"subcommand", sub.get_name()}, {"config", opts}}.dump() << '\n';
}

void log_line(const std::string& line) { std::cerr << line << '\n'; }

// ---------------------------------------------------------------- shared flag groups

struct ShapeFlags {
  std::string shape;
  std::vector<std::string> params;

  void add(CLI::App* app) {
    app->add_option("--shape", shape, "spheroid, conical_frustum, hexahedron or missilehead");
    app->add_option("--param", params, "shape parameter NAME=VALUE (repeatable)");
  }
  mesh::ShapeSpec spec() const {
    mesh::ShapeSpec s;
    s.kind = mesh::shape_kind_from_string(shape);
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw BadFlags("--param expects NAME=VALUE, got '" + p + "'");
      try {
        std::size_t used = 0;
        const std::string text = p.substr(eq + 1);
        s.parameters[p.substr(0, eq)] = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
      } catch (const std::logic_error&) {
        throw BadFlags("--param value is not a number: '" + p + "'");
      }
    }
    s.validate();
    return s;
  }
};

struct WaveFlags {
  double freq = 300e6;
  double theta = 0.0;
  double phi = 0.0;
  std::string pol = "theta";
  double amplitude = 1.0;

  void add(CLI::App* app) {
    app->add_option("--freq", freq, "frequency in Hz")->capture_default_str();
    app->add_option("--theta", theta, "incidence propagation theta in degrees")->capture_default_str();
    app->add_option("--phi", phi, "incidence propagation phi in degrees")->capture_default_str();
    app->add_option("--pol", pol, "theta or phi")->capture_default_str();
    app->add_option("--amplitude", amplitude, "|E0| in V/m")->capture_default_str();
  }
  em::PlaneWave wave() const {
    em::PlaneWave pw;
    pw.frequency = freq;
    pw.theta = theta;
    pw.phi = phi;
    pw.polarization = em::polarization_from_string(pol);
    pw.amplitude = amplitude;
    pw.validate();
    return pw;
  }
};

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void write_currents_csv(const std::vector<CVec3>& currents, const std::string& path) {
  std::ostringstream out;
  out << "triangle,re_x,re_y,re_z,im_x,im_y,im_z\n" << std::setprecision(17);
  for (std::size_t i = 0; i < currents.size(); ++i) {
    const auto& j = currents[i];
    out << i << ',' << j.x().real() << ',' << j.y().real() << ',' << j.z().real() << ',' << j.x().imag() << ','
        << j.y().imag() << ',' << j.z().imag() << '\n';
  }
  data::write_file_atomic(path, out.str());
}

void print_json(const json& j) { std::cout << j.dump() << '\n'; }

// ---------------------------------------------------------------- subcommands

struct Genmesh {
  ShapeFlags shape;
  double freq = 300e6;
  double density = 0.1;
  std::size_t max_triangles = 200000;
  std::string out;

  void add(CLI::App* app) {
    shape.add(app);
    app->add_option("--freq", freq, "frequency in Hz (sets the wavelength)")->capture_default_str();
    app->add_option("--density", density, "target edge length in wavelengths")->capture_default_str();
    app->add_option("--max-triangles", max_triangles)->capture_default_str();
    app->add_option("--out", out, "output OBJ file")->required();
  }
  int run() const {
    if (shape.shape.empty()) throw BadFlags("--shape is required");
    mesh::GenerateOptions gen;
    gen.max_triangles = max_triangles;
    const auto tri = mesh::generate_primitive(shape.spec(), density, wavelength(freq), gen);
    std::ostringstream obj;
    mesh::export_obj(tri, obj);
    ensure_dir(fs::path(out).parent_path().string());
    data::write_file_atomic(out, obj.str());
    const auto r = mesh::validate_mesh(tri);
    print_json({{"triangles", r.triangle_count},
                {"vertices", r.vertex_count},
                {"edges", r.edge_count},
                {"n_rwg", r.edge_count},
                {"mean_edge", r.mean_edge_len},
                {"closed", r.is_closed},
                {"oriented", r.is_oriented}});
    return 0;
  }
};

struct Solve {
  std::string mesh_file;
  ShapeFlags shape;
  double density = 0.1;
  WaveFlags wave;
  double alpha = 0.5;
  std::string plane = "phi0";
  double step = 1.0;
  int* workers = nullptr;
  std::string out;

  void add(CLI::App* app, int& w) {
    workers = &w;
    app->add_option("--mesh", mesh_file, "input OBJ mesh");
    shape.add(app);
    app->add_option("--density", density, "target edge in wavelengths when meshing --shape")->capture_default_str();
    wave.add(app);
    app->add_option("--alpha", alpha, "CFIE weight (0 = EFIE, 1 = MFIE)")->capture_default_str();
    app->add_option("--rcs-plane", plane, "phi0, phi90 or theta90")->capture_default_str();
    app->add_option("--rcs-step", step, "cut sampling step in degrees")->capture_default_str();
    app->add_option("--out", out, "output directory")->required();
  }
  int run() const {
    if (mesh_file.empty() == shape.shape.empty()) throw BadFlags("give exactly one of --mesh and --shape");
    const em::PlaneWave pw = wave.wave();
    const mesh::TriangleMesh tri = mesh_file.empty()
                                       ? mesh::generate_primitive(shape.spec(), density, wavelength(pw.frequency))
                                       : mesh::import_obj_file(mesh_file);
    const em::CutPlane cut = em::cut_plane_from_string(plane);
    const rwg::RwgSet rwg = rwg::build_rwg(tri);
    for (const auto& w : em::check_discretization(rwg, pw.frequency)) log_line("warning: " + w);
    em::AssemblyOptions opts;
    opts.workers = *workers;
    const em::ImpedanceSystem sys = em::assemble_system(rwg, pw, alpha, opts);
    em::SolveReport rep;
    const CVector u = em::solve_system(sys, &rep);
    ensure_dir(out);
    em::SolutionHeader header;
    header.n = static_cast<std::uint64_t>(u.size());
    header.frequency = pw.frequency;
    header.alpha = alpha;
    header.theta = pw.theta;
    header.phi = pw.phi;
    header.polarization = pw.polarization;
    header.amplitude = pw.amplitude;
    em::write_solution_file((fs::path(out) / "solution.bin").string(), header, u);
    em::write_rcs_csv_file(em::bistatic_rcs(rwg, u, pw, cut, step), (fs::path(out) / "rcs.csv").string());
    write_currents_csv(rwg::centroid_currents(rwg, u), (fs::path(out) / "currents.csv").string());
    print_json({{"triangles", tri.triangles.size()},
                {"n_rwg", rwg.size()},
                {"residual", rep.residual},
                {"rcond", rep.rcond},
                {"out", out}});
    return 0;
  }
};

struct Mie {
  double radius = 0.5;
  WaveFlags wave;
  std::string plane = "phi0";
  double step = 1.0;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--radius", radius, "sphere radius in m")->capture_default_str();
    wave.add(app);
    app->add_option("--rcs-plane", plane, "phi0, phi90 or theta90")->capture_default_str();
    app->add_option("--rcs-step", step, "cut sampling step in degrees")->capture_default_str();
    app->add_option("--out", out, "output CSV")->required();
  }
  int run() const {
    const em::PlaneWave pw = wave.wave();
    const auto cut = em::mie_sphere_rcs(radius, pw.frequency, em::cut_plane_from_string(plane), step, pw);
    ensure_dir(fs::path(out).parent_path().string());
    em::write_rcs_csv_file(cut, out);
    print_json({{"samples", cut.angles.size()}, {"ka", wavenumber(pw.frequency) * radius}, {"out", out}});
    return 0;
  }
};

struct EvalRcs {
  std::string test;
  std::string reference;
  double range = 30.0;
  double max_db = -1.0;

  void add(CLI::App* app) {
    app->add_option("test", test, "RCS CSV under test")->required();
    app->add_option("reference", reference, "reference RCS CSV")->required();
    app->add_option("--range", range, "dynamic range below the reference peak in dB")->capture_default_str();
    app->add_option("--max-db", max_db, "exit 1 when the largest deviation exceeds this");
  }
  int run() const {
    const auto c = em::compare_rcs(em::read_rcs_csv_file(test), em::read_rcs_csv_file(reference), range);
    const bool ok = max_db < 0.0 || c.max_abs_db <= max_db;
    print_json({{"max_abs_db", c.max_abs_db},
                {"rms_db", c.rms_db},
                {"compared", c.compared},
                {"worst_angle", c.worst_angle},
                {"pass", ok}});
    return ok ? 0 : 1;
  }
};

struct DatasetGen {
  std::string sweep_file;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verify = false;
  int* workers = nullptr;

  void add(CLI::App* app, int& w) {
    workers = &w;
    app->add_option("--sweep", sweep_file, "sweep JSON")->required();
    app->add_option("--out", out, "dataset directory")->required();
    app->add_option("--seed", seed, "overrides the sweep seed");
    app->add_flag("--verify", verify, "re-check checksums and label tangency afterwards");
  }
  int run() const {
    std::ifstream in(sweep_file);
    if (!in) throw BadFlags("cannot open sweep file '" + sweep_file + "'");
    std::stringstream text;
    text << in.rdbuf();
    data::SweepSpec sweep = data::SweepSpec::from_json(text.str());
    if (seed) sweep.seed = *seed;
    data::GenerateOptions opts;
    opts.workers = *workers;
    opts.log = log_line;
    data::GenerateSummary summary;
    const auto manifest = data::generate_dataset(sweep, out, opts, &summary);
    json result = {{"dataset_id", manifest.dataset_id},
                   {"samples", manifest.samples.size()},
                   {"generated", summary.generated},
                   {"reused", summary.reused},
                   {"skipped", summary.skipped}};
    int code = 0;
    if (verify) {
      const auto report = data::verify_dataset(out, manifest);
      result["verified"] = report.checked;
      result["worst_tangency"] = report.worst_tangency;
      result["problems"] = report.problems;
      if (!report.problems.empty()) code = 1;
    }
    print_json(result);
    return code;
  }
};

struct DatasetSplit {
  std::string dir;
  double fraction = 0.8;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--data", dir, "dataset directory")->required();
    app->add_option("--fraction", fraction, "training fraction")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
  }
  int run() const {
    auto manifest = data::read_manifest(dir);
    const auto split = data::split_dataset(manifest, dir, fraction, seed);
    print_json({{"train", split.train.size()}, {"test", split.test.size()}});
    return 0;
  }
};

struct ModelFlags {
  nn::ModelConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--hidden", cfg.hidden, "node feature width C")->capture_default_str();
    app->add_option("--gcn-layers", cfg.gcn_layers)->capture_default_str();
    app->add_option("--kernel-hidden", cfg.kernel_hidden, "kernel FCN hidden width")->capture_default_str();
    app->add_option("--kernel-layers", cfg.kernel_layers, "kernel FCN hidden layers")->capture_default_str();
    app->add_option("--head-hidden", cfg.head_hidden)->capture_default_str();
  }
};

std::vector<std::string> split_ids(const data::DatasetManifest& m, const std::string& which) {
  if (which == "all") {
    std::vector<std::string> ids;
    for (const auto& r : m.samples) ids.push_back(r.id);
    return ids;
  }
  if (!m.split) throw InvalidArgument("dataset has no split; run dataset-split first or pass --split all");
  if (which == "train") return m.split->train;
  if (which == "test") return m.split->test;
  throw BadFlags("--split must be train, test or all");
}

struct Train {
  std::string dir;
  std::string test_dir;
  train::TrainConfig tc;
  std::string warm;
  bool no_normalize = false;
  ModelFlags model;
  std::string out;
  int* workers = nullptr;

  void add(CLI::App* app, int& w) {
    workers = &w;
    app->add_option("--data", dir, "dataset directory with a split")->required();
    app->add_option("--test-data", test_dir, "separate dataset used whole for testing");
    app->add_option("--epochs", tc.epochs)->capture_default_str();
    app->add_option("--lr", tc.base_lr, "initial learning rate")->capture_default_str();
    app->add_option("--decay", tc.decay, "learning-rate factor per decay step")->capture_default_str();
    app->add_option("--decay-every", tc.decay_every, "epochs per decay step")->capture_default_str();
    app->add_option("--batch-size", tc.batch_size, "graphs per step")->capture_default_str();
    app->add_option("--seed", tc.seed)->capture_default_str();
    app->add_flag("--batch-norm", tc.use_batch_norm, "batch normalization in the GCN trunk");
    app->add_option("--warm-start", warm, "parameter container to start from");
    app->add_flag("--freeze-trunk", tc.freeze_trunk, "train only the output heads");
    app->add_flag("--no-normalize", no_normalize, "train on raw SI features and labels");
    model.add(app);
    app->add_option("--out", out, "output directory")->required();
  }
  int run() {
    tc.workers = *workers;
    tc.normalize = !no_normalize;
    if (!warm.empty()) tc.warm_start = warm;
    const auto manifest = data::read_manifest(dir);
    const auto train_set = data::load_samples(dir, manifest, split_ids(manifest, test_dir.empty() ? "train" : "all"));
    std::vector<graph::GraphSample> test_set;
    if (test_dir.empty()) {
      test_set = data::load_samples(dir, manifest, split_ids(manifest, "test"));
    } else {
      const auto tm = data::read_manifest(test_dir);
      test_set = data::load_samples(test_dir, tm, split_ids(tm, "all"));
    }
    tc.on_epoch = [](const train::EpochRecord& e) {
      std::ostringstream line;
      line << "epoch " << e.epoch << " train " << e.train_mse << " test " << e.test_mse << " lr " << e.lr << ' '
           << e.seconds << 's';
      log_line(line.str());
    };
    const auto result = train::train(train_set, test_set, tc, model.cfg);
    ensure_dir(out);
    nn::save_params_file((fs::path(out) / "model.gsnn").string(), result.best, result.model);
    nn::save_params_file((fs::path(out) / "final.gsnn").string(), result.final, result.model);
    train::write_report_csv_file(result.report, (fs::path(out) / "report.csv").string());
    const auto& last = result.report.epochs.back();
    print_json({{"initial_train_mse", result.report.initial_train_mse},
                {"initial_test_mse", result.report.initial_test_mse},
                {"final_train_mse", last.train_mse},
                {"final_test_mse", last.test_mse},
                {"best_epoch", result.report.best_epoch},
                {"parameters", result.final.scalar_count()},
                {"out", out}});
    return 0;
  }
};

struct Predict {
  std::string model_file;
  std::string sample_file;
  std::string out;
  std::string rcs_out;
  std::string plane = "phi0";
  double step = 1.0;

  void add(CLI::App* app) {
    app->add_option("--model", model_file, "parameter container")->required();
    app->add_option("--sample", sample_file, "graph sample (.gsb)")->required();
    app->add_option("--out", out, "predicted currents CSV")->required();
    app->add_option("--rcs-out", rcs_out, "also write the RCS cut of the predicted currents");
    app->add_option("--rcs-plane", plane, "phi0, phi90 or theta90")->capture_default_str();
    app->add_option("--rcs-step", step, "cut sampling step in degrees")->capture_default_str();
  }
  int run() const {
    const auto [params, cfg] = nn::load_params_file(model_file);
    const auto g = graph::read_sample_file(sample_file);
    const auto currents = graph::labels_to_currents(nn::predict(params, cfg, g));
    ensure_dir(fs::path(out).parent_path().string());
    write_currents_csv(currents, out);
    json result = {{"nodes", g.node_count}, {"out", out}};
    if (g.labels) {
      const RowMatrix pred = graph::currents_to_labels(currents);
      result["relative_l2"] = (pred - *g.labels).norm() / g.labels->norm();
    }
    if (!rcs_out.empty()) {
      if (!g.meta.shape) throw InvalidArgument("sample carries no shape, so its mesh cannot be rebuilt for RCS");
      const auto tri = mesh::generate_primitive(*g.meta.shape, g.meta.mesh_density, wavelength(g.meta.incidence.frequency));
      if (tri.triangles.size() != g.node_count) throw NumericalError("rebuilt mesh does not match the sample");
      const auto rwg = rwg::build_rwg(tri);
      ensure_dir(fs::path(rcs_out).parent_path().string());
      em::write_rcs_csv_file(
          em::bistatic_rcs_from_centroids(rwg, currents, g.meta.incidence, em::cut_plane_from_string(plane), step),
          rcs_out);
      result["rcs_out"] = rcs_out;
    }
    print_json(result);
    return 0;
  }
};

struct Eval {
  std::string model_file;
  std::string dir;
  std::string which = "test";
  std::string out;
  int* workers = nullptr;

  void add(CLI::App* app, int& w) {
    workers = &w;
    app->add_option("--model", model_file, "parameter container")->required();
    app->add_option("--data", dir, "dataset directory")->required();
    app->add_option("--split", which, "train, test or all")->capture_default_str();
    app->add_option("--out", out, "metrics JSON file");
  }
  int run() const {
    const auto [params, cfg] = nn::load_params_file(model_file);
    const auto manifest = data::read_manifest(dir);
    const auto ids = split_ids(manifest, which);
    const auto m = train::evaluate(params, cfg, data::load_samples(dir, manifest, ids), *workers);
    json per = json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      per.push_back({{"id", ids[i]}, {"mse", m.sample_mse[i]}, {"relative_l2", m.relative_l2[i]}});
    }
    const json result = {{"mean_mse", m.mean_mse}, {"mean_relative_l2", m.mean_relative_l2}, {"samples", per}};
    if (!out.empty()) {
      ensure_dir(fs::path(out).parent_path().string());
      data::write_file_atomic(out, result.dump(2) + "\n");
    }
    print_json({{"mean_mse", m.mean_mse}, {"mean_relative_l2", m.mean_relative_l2}, {"samples", ids.size()}});
    return 0;
  }
};

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    int workers = default_workers();

    CLI::App app{"GraphSolver: MoM scattering solver and graph-network surrogate"};
    app.require_subcommand(1);
    Genmesh genmesh;
    Solve solve;
    Mie mie;
    EvalRcs eval_rcs;
    DatasetGen dataset_gen;
    DatasetSplit dataset_split;
    Train train_cmd;
    Predict predict;
    Eval eval;
    std::vector<std::pair<CLI::App*, std::function<int()>>> subs;
    auto with_workers = [&](CLI::App* sub) {
      sub->add_option("--workers", workers, "worker threads (default $GRAPHSOLVER_WORKERS or 1)")
          ->check(CLI::PositiveNumber)
          ->default_str(std::to_string(workers));
    };
    {
      auto* s = app.add_subcommand("genmesh", "mesh a parametric target");
      genmesh.add(s);
      subs.emplace_back(s, [&] { return genmesh.run(); });
    }
    {
      auto* s = app.add_subcommand("solve", "CFIE solve, RCS cut and centroid currents");
      solve.add(s, workers);
      with_workers(s);
      subs.emplace_back(s, [&] { return solve.run(); });
    }
    {
      auto* s = app.add_subcommand("mie", "analytic PEC sphere RCS cut");
      mie.add(s);
      subs.emplace_back(s, [&] { return mie.run(); });
    }
    {
      auto* s = app.add_subcommand("eval-rcs", "compare two RCS cuts in dB");
      eval_rcs.add(s);
      subs.emplace_back(s, [&] { return eval_rcs.run(); });
    }
    {
      auto* s = app.add_subcommand("dataset-gen", "generate labeled graph samples from a sweep");
      dataset_gen.add(s, workers);
      with_workers(s);
      subs.emplace_back(s, [&] { return dataset_gen.run(); });
    }
    {
      auto* s = app.add_subcommand("dataset-split", "seeded train/test split");
      dataset_split.add(s);
      subs.emplace_back(s, [&] { return dataset_split.run(); });
    }
    {
      auto* s = app.add_subcommand("train", "train the graph network");
      train_cmd.add(s, workers);
      with_workers(s);
      subs.emplace_back(s, [&] { return train_cmd.run(); });
    }
    {
      auto* s = app.add_subcommand("predict", "predict surface currents of one sample");
      predict.add(s);
      subs.emplace_back(s, [&] { return predict.run(); });
    }
    {
      auto* s = app.add_subcommand("eval", "evaluate a model on a dataset");
      eval.add(s, workers);
      with_workers(s);
      subs.emplace_back(s, [&] { return eval.run(); });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      emit_error("bad_flags", e.what());
      return 2;
    }
    for (auto& [sub, fn] : subs) {
      if (sub->parsed()) {
        echo_resolved(*sub);
        return fn();
      }
    }
    emit_error("bad_flags", "no subcommand given");
    return 2;
  } catch (const BadFlags& e) {
    emit_error("bad_flags", e.what());
    return 2;
  } catch (const InvalidArgument& e) {
    emit_error("invalid_argument", e.what());
    return 2;
  } catch (const FormatError& e) {
    emit_error("format_error", e.what());
    return 1;
  } catch (const NumericalError& e) {
    emit_error("numerical_error", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("runtime_error", e.what());
    return 1;
  }
}

}  // namespace graphsolver::cli
