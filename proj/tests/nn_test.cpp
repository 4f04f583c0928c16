#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "detail/nn_ops.hpp"
#include "support.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

using namespace graphsolver;
using testing::random_graph;

namespace {

nn::ModelConfig small_config() {
  nn::ModelConfig cfg;
  cfg.hidden = 6;
  cfg.gcn_layers = 2;
  cfg.kernel_hidden = 5;
  cfg.kernel_layers = 2;
  cfg.head_hidden = 4;
  return cfg;
}

bool same_values(const nn::ParamSet& a, const nn::ParamSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.entries()[i].second.data != b.entries()[i].second.data) return false;
  }
  return true;
}

std::vector<std::uint32_t> random_perm(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
  Rng rng(seed);
  rng.shuffle(p);
  return p;
}

/// Two nodes joined by one edge.
graph::GraphSample pair_graph(const Vec3& r) {
  graph::GraphSample g;
  g.node_count = 2;
  g.adjacency = {{0, 1}};
  g.edge_vectors.resize(2, 3);
  g.edge_vectors.row(0) = r.transpose();
  g.edge_vectors.row(1) = -r.transpose();
  g.features = RowMatrix::Zero(2, 9);
  return g;
}

}  // namespace

TEST_CASE("initialization") {
  const auto cfg = small_config();
  const auto a = nn::init_params(cfg, 3), b = nn::init_params(cfg, 3), c = nn::init_params(cfg, 4);
  CHECK(same_values(a, b));
  CHECK(a.same_layout(c));
  CHECK_FALSE(same_values(a, c));
  for (const auto& [name, t] : a.entries()) {
    if (name.find(".act") != std::string::npos) {
      for (double v : t.data) CHECK(v == 0.25);
      continue;
    }
    const double bound = std::sqrt(1.0 / static_cast<double>(name.find(".bias") != std::string::npos
                                                                 ? a.at(name.substr(0, name.size() - 4) + "weight").shape[0]
                                                                 : t.shape[0]));
    for (double v : t.data) CHECK(std::abs(v) <= bound);
  }
  auto bn = cfg;
  bn.use_batch_norm = true;
  const auto p = nn::init_params(bn, 1);
  CHECK(p.at("gcn.1.bn.scale").data == nn::TensorData(6, 1.0));
  CHECK(p.at("gcn.1.bn.running_var").data == nn::TensorData(6, 1.0));
  CHECK_FALSE(p.at("gcn.1.bn.running_mean").trainable);
}

TEST_CASE("default architecture") {
  const nn::ModelConfig cfg;
  const auto p = nn::init_params(cfg, 0);
  CHECK(p.at("up.0.weight").shape == std::vector<std::size_t>{9, 64});
  CHECK(p.at("gcn.3.kernel.3.weight").shape == std::vector<std::size_t>{256, 4096});
  CHECK(p.at("head.z_i.1.weight").shape == std::vector<std::size_t>{32, 1});
  CHECK_FALSE(p.contains("gcn.4.weight"));
}

TEST_CASE("kernel_fcn") {
  auto cfg = small_config();
  auto zero = nn::init_params(cfg, 1);
  for (auto& [name, t] : zero.entries()) std::fill(t.data.begin(), t.data.end(), 0.0);
  CHECK(nn::kernel_fcn(zero, cfg, 0, Vec3(0.3, -0.2, 0.5)).isZero(0.0));

  const auto p = nn::init_params(cfg, 2);
  const Vec3 r(0.1, 0.4, -0.3);
  const RowMatrix k1 = nn::kernel_fcn(p, cfg, 1, r), k2 = nn::kernel_fcn(p, cfg, 1, r);
  CHECK(k1.rows() == 6);
  CHECK(k1.cols() == 6);
  CHECK(k1 == k2);

  // one hidden unit: 3 -> 1 -> PReLU -> 4, reshaped to 2 x 2
  nn::ModelConfig tiny;
  tiny.hidden = 2;
  tiny.gcn_layers = 1;
  tiny.kernel_hidden = 1;
  tiny.kernel_layers = 1;
  tiny.head_hidden = 1;
  auto t = nn::init_params(tiny, 0);
  t.at("gcn.0.kernel.0.weight").data = {0.5, -1.0, 2.0};
  t.at("gcn.0.kernel.0.bias").data = {0.1};
  t.at("gcn.0.kernel.act.0").data = {0.2};
  t.at("gcn.0.kernel.1.weight").data = {1.0, 2.0, 3.0, 4.0};
  t.at("gcn.0.kernel.1.bias").data = {0.0, 0.5, -0.5, 1.0};
  const Vec3 re(1.0, 1.0, 0.1);
  // z = 0.5 - 1 + 0.2 + 0.1 = -0.2, PReLU gives -0.04
  const double h = -0.04;
  const RowMatrix k = nn::kernel_fcn(t, tiny, 0, re);
  CHECK(k(0, 0) == doctest::Approx(h * 1.0 + 0.0).epsilon(1e-15));
  CHECK(k(0, 1) == doctest::Approx(h * 2.0 + 0.5).epsilon(1e-15));
  CHECK(k(1, 0) == doctest::Approx(h * 3.0 - 0.5).epsilon(1e-15));
  CHECK(k(1, 1) == doctest::Approx(h * 4.0 + 1.0).epsilon(1e-15));
}

TEST_CASE("graph_conv special cases") {
  auto cfg = small_config();
  const int c = cfg.hidden;
  auto p = nn::init_params(cfg, 5);
  Rng rng(6);
  RowMatrix f(2, c);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);

  // isolated nodes with W = I
  graph::GraphSample lone;
  lone.node_count = 2;
  lone.edge_vectors.resize(0, 3);
  lone.features = RowMatrix::Zero(2, 9);
  p.mat("gcn.0.weight") = RowMatrix::Identity(c, c);
  CHECK(nn::graph_conv(p, cfg, 0, nn::make_topology(lone), f) == f);

  // W = 0 and K = I through the final kernel bias
  p.mat("gcn.0.weight").setZero();
  p.mat("gcn.0.kernel.2.weight").setZero();
  auto bias = p.at("gcn.0.kernel.2.bias").data.data();
  Eigen::Map<RowMatrix>(bias, c, c) = RowMatrix::Identity(c, c);
  const RowMatrix out = nn::graph_conv(p, cfg, 0, nn::make_topology(pair_graph(Vec3(0.1, 0.2, 0.3))), f);
  CHECK(out.row(0) == f.row(1));
  CHECK(out.row(1) == f.row(0));
}

TEST_CASE("graph_conv matches the naive double loop") {
  const auto cfg = small_config();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = random_graph(5 + s, 100 + s, 0.5);
    const auto p = nn::init_params(cfg, s);
    Rng rng(s);
    RowMatrix f(static_cast<Eigen::Index>(g.node_count), cfg.hidden);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
    for (int layer = 0; layer < cfg.gcn_layers; ++layer) {
      const RowMatrix fast = nn::graph_conv(p, cfg, layer, nn::make_topology(g), f);
      CHECK(testing::max_abs_diff(fast, testing::naive_graph_conv(p, cfg, layer, g, f)) <= 1e-12);
    }
  }
}

TEST_CASE("forward contract") {
  const auto cfg = small_config();
  auto zero = nn::init_params(cfg, 9);
  for (auto& [name, t] : zero.entries()) std::fill(t.data.begin(), t.data.end(), 0.0);
  for (std::size_t m : {1u, 4u, 17u}) {
    const auto g = random_graph(m, m);
    const RowMatrix out = nn::forward(zero, cfg, g);
    CHECK(out.rows() == static_cast<Eigen::Index>(m));
    CHECK(out.cols() == 6);
    CHECK(out.isZero(0.0));
    CHECK(nn::forward(nn::init_params(cfg, 1), cfg, g).rows() == static_cast<Eigen::Index>(m));
  }
  const auto p = nn::init_params(cfg, 1);
  const auto g = random_graph(12, 3);
  CHECK(nn::forward(p, cfg, g) == nn::forward(p, cfg, g));

  auto scaled = g;
  scaled.features.col(0) *= 2.0;
  const RowMatrix a = nn::forward(p, cfg, g), b = nn::forward(p, cfg, scaled);
  CHECK((a - b).cwiseAbs().maxCoeff() > 1e-6);
  CHECK((b - 2.0 * a).cwiseAbs().maxCoeff() > 1e-6);

  auto bad = g;
  bad.features = RowMatrix::Zero(12, 8);
  CHECK_THROWS(nn::forward(p, cfg, bad));
}

TEST_CASE("forward is permutation equivariant") {
  for (bool bn : {false, true}) {
    auto cfg = small_config();
    cfg.use_batch_norm = bn;
    auto p = nn::init_params(cfg, 21);
    if (bn) {
      Rng rng(2);
      for (auto& [name, t] : p.entries()) {
        if (name.find("running") != std::string::npos) {
          for (double& v : t.data) v = rng.uniform(0.5, 1.5);
        }
      }
    }
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto g = random_graph(11, 40 + s);
      const auto perm = random_perm(g.node_count, s);
      const auto pg = graph::permute_nodes(g, perm);
      const RowMatrix out = nn::forward(p, cfg, g), pout = nn::forward(p, cfg, pg);
      double worst = 0;
      for (std::size_t i = 0; i < g.node_count; ++i) {
        worst = std::max(worst, (pout.row(perm[i]) - out.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-12);
    }
  }
}

TEST_CASE("mse_loss") {
  RowMatrix a(2, 6);
  a << 1, 2, 3, 4, 5, 6, -1, -2, -3, -4, -5, -6;
  CHECK(nn::mse_loss(a, a) == 0.0);
  CHECK(nn::mse_loss((a.array() + 1.0).matrix(), a) == 1.0);
  RowMatrix b(2, 6);
  b << 0.5, 2, 2, 4, 5, 7, -1, 0, -3, -4, -5, -6.25;
  // squared differences: 0.25 + 0 + 1 + 0 + 0 + 1 + 0 + 4 + 0 + 0 + 0 + 0.0625 = 6.3125
  CHECK(std::abs(nn::mse_loss(b, a) - 6.3125 / 12.0) <= 1e-15);
  CHECK_THROWS_AS(nn::mse_loss(a, RowMatrix::Zero(3, 6)), InvalidArgument);
}

TEST_CASE("zero loss gives zero gradients") {
  const auto cfg = small_config();
  const auto p = nn::init_params(cfg, 4);
  const auto g = random_graph(9, 2);
  const auto grad = nn::backward(p, cfg, g, nn::forward(p, cfg, g));
  for (const auto& [name, t] : grad.entries()) {
    for (double v : t.data) CHECK(v == 0.0);
  }
}

TEST_CASE("shared self weight sums the per-node contributions") {
  // F'(i) = W F(i) + F(j) K(r): dL/dW = sum_i g_i^T F_i, dL/dF_0 = g_0 W + g_1 K(r_{1->0})^T
  auto cfg = small_config();
  const Eigen::Index c = cfg.hidden;
  const auto p = nn::init_params(cfg, 13);
  const auto g = pair_graph(Vec3(0.2, -0.1, 0.4));
  const auto topo = nn::make_topology(g);
  Rng rng(1);
  RowMatrix f(2, c), up(2, c);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.uniform(-1, 1);

  const auto kernel = nn::detail::fold_kernel<double>(p, cfg, 0);
  const RowMatrix h = nn::detail::kernel_hidden<double>(p, cfg, 0, topo.edge_vectors, nullptr);
  const auto grads = nn::detail::conv_backward(p.mat("gcn.0.weight"), kernel, topo, f, h, up);

  RowMatrix dw = RowMatrix::Zero(c, c);
  for (int i = 0; i < 2; ++i) dw += up.row(i).transpose() * f.row(i);
  CHECK((grads.dw - dw).cwiseAbs().maxCoeff() <= 1e-14);
  const RowMatrix single = up.row(0).transpose() * f.row(0);
  CHECK((grads.dw - single).cwiseAbs().maxCoeff() > 1e-3);

  const RowMatrix w = p.mat("gcn.0.weight");
  const RowMatrix k10 = nn::kernel_fcn(p, cfg, 0, Vec3(-0.2, 0.1, -0.4));
  const RowMatrix k01 = nn::kernel_fcn(p, cfg, 0, Vec3(0.2, -0.1, 0.4));
  CHECK((grads.df.row(0) - (up.row(0) * w + up.row(1) * k10.transpose())).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((grads.df.row(1) - (up.row(1) * w + up.row(0) * k01.transpose())).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gradients match finite differences on a small model") {
  for (bool bn : {false, true}) {
    auto cfg = small_config();
    cfg.use_batch_norm = bn;
    const auto mode = bn ? nn::Mode::training : nn::Mode::inference;
    auto p = nn::init_params(cfg, 8);
    const auto g = random_graph(10, 77);
    const auto topo = nn::make_topology(g);
    const RowMatrix labels = *g.labels;
    const auto lg = nn::loss_and_gradient(p, cfg, topo, g.features, labels, mode);
    const RowMatrixT<DoubleDouble> fdd = g.features.cast<DoubleDouble>();
    const RowMatrixT<DoubleDouble> ldd = labels.cast<DoubleDouble>();
    CHECK(static_cast<double>(nn::batch_loss<DoubleDouble>(p, cfg, topo, fdd, ldd, mode)) ==
          doctest::Approx(lg.loss).epsilon(1e-14));
    double worst = 0;
    const double h = 1e-6;
    for (auto& [name, t] : p.entries()) {
      if (!t.trainable) continue;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = t.data[i];
        t.data[i] = v + h;
        const DoubleDouble up = nn::batch_loss<DoubleDouble>(p, cfg, topo, fdd, ldd, mode);
        t.data[i] = v - h;
        const DoubleDouble down = nn::batch_loss<DoubleDouble>(p, cfg, topo, fdd, ldd, mode);
        t.data[i] = v;
        const double fd = static_cast<double>((up - down) / (DoubleDouble(v + h) - DoubleDouble(v - h)));
        const double an = lg.grad.at(name).data[i];
        const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-300);
        worst = std::max(worst, (std::abs(fd) + std::abs(an)) < 1e-300 ? 0.0 : rel);
      }
    }
    CAPTURE(bn);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("batch norm running statistics") {
  auto cfg = small_config();
  cfg.use_batch_norm = true;
  auto p = nn::init_params(cfg, 3);
  const auto g = random_graph(14, 5);
  const auto topo = nn::make_topology(g);
  const auto lg = nn::loss_and_gradient(p, cfg, topo, g.features, *g.labels, nn::Mode::training);
  nn::update_running_stats(p, cfg, lg.cache);
  const auto& mean = p.at("gcn.0.bn.running_mean").data;
  const auto& lc = lg.cache.gcn[0];
  for (int ch = 0; ch < cfg.hidden; ++ch) CHECK(mean[ch] == doctest::Approx(0.1 * lc.batch_mean(ch)).epsilon(1e-14));
  for (const auto& [name, t] : lg.grad.entries()) {
    if (!t.trainable) {
      for (double v : t.data) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("parameter container") {
  auto cfg = small_config();
  cfg.use_batch_norm = true;
  auto p = nn::init_params(cfg, 17);
  std::stringstream first;
  nn::save_params(first, p, cfg);
  const std::string bytes = first.str();
  CHECK(bytes.substr(0, 4) == "GSNN");
  auto [loaded, lcfg] = nn::load_params(first);
  CHECK(lcfg == cfg);
  std::stringstream second;
  nn::save_params(second, loaded, lcfg);
  CHECK(second.str() == bytes);

  const auto g = random_graph(8, 1);
  const RowMatrix a = nn::forward(p, cfg, g), b = nn::forward(loaded, lcfg, g);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);

  auto other = cfg;
  other.hidden = 7;
  std::stringstream again(bytes);
  CHECK_THROWS_AS(nn::load_params_for(again, other), InvalidArgument);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(nn::load_params(truncated), FormatError);
  std::stringstream magic("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(nn::load_params(magic), FormatError);
}

TEST_CASE("normalization buffers") {
  const auto cfg = small_config();
  auto p = nn::init_params(cfg, 2);
  std::vector<graph::GraphSample> gs{random_graph(6, 1), random_graph(9, 2)};
  for (auto& g : gs) *g.labels *= 1e-3;
  const auto norm = nn::Normalization::fit({&gs[0], &gs[1]});
  CHECK_FALSE(nn::has_normalization(p));
  nn::set_normalization(p, norm);
  CHECK(nn::has_normalization(p));
  nn::check_compatible(p, cfg);
  const auto back = nn::normalization_of(p);
  CHECK(back.label_std == norm.label_std);
  const RowMatrix z = norm.labels(*gs[0].labels);
  CHECK((norm.restore_labels(z) - *gs[0].labels).cwiseAbs().maxCoeff() <= 1e-18);
  CHECK(back.edge_scale == norm.edge_scale);
  double sq = 0.0;
  for (const auto& g : gs) sq += g.edge_vectors.squaredNorm();
  CHECK(norm.edge_scale == doctest::Approx(std::sqrt(sq / static_cast<double>(gs[0].edge_vectors.rows() +
                                                                             gs[1].edge_vectors.rows()))));
  const RowMatrix pred = nn::predict(p, cfg, gs[1]);
  auto topo = nn::make_topology(gs[1]);
  norm.scale_edges(topo);
  const RowMatrix raw = nn::forward<double>(p, cfg, topo, norm.features(gs[1].features));
  CHECK((pred - norm.restore_labels(raw)).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream stored;
  nn::save_params(stored, p, cfg);
  CHECK(nn::normalization_of(nn::load_params(stored).first).edge_scale == norm.edge_scale);

  // rescaled geometry with a refitted scale predicts the same
  auto scaled = gs;
  for (auto& g : scaled) g.edge_vectors *= 8.0;
  auto q = nn::init_params(cfg, 2);
  const auto refit = nn::Normalization::fit({&scaled[0], &scaled[1]});
  CHECK(refit.edge_scale == doctest::Approx(8.0 * norm.edge_scale).epsilon(1e-14));
  nn::set_normalization(q, refit);
  CHECK((nn::predict(q, cfg, scaled[1]) - pred).cwiseAbs().maxCoeff() <= 1e-12 * pred.cwiseAbs().maxCoeff());

  auto bad = p;
  bad.at("norm.edge_scale").data[0] = 0.0;
  CHECK_THROWS_AS(nn::normalization_of(bad), FormatError);
}

TEST_CASE("double-double arithmetic") {
  const DoubleDouble third = DoubleDouble(1.0) / DoubleDouble(3.0);
  const DoubleDouble back = third * DoubleDouble(3.0) - DoubleDouble(1.0);
  CHECK(std::abs(static_cast<double>(back)) < 1e-31);
  const DoubleDouble two = sqrt(DoubleDouble(2.0));
  CHECK(std::abs(static_cast<double>(two * two - DoubleDouble(2.0))) < 1e-30);
  const DoubleDouble tiny = DoubleDouble(1.0) + DoubleDouble(1e-20);
  CHECK(static_cast<double>(tiny - DoubleDouble(1.0)) == doctest::Approx(1e-20).epsilon(1e-12));
  CHECK(DoubleDouble(-2.0) < DoubleDouble(1.0));
  CHECK(static_cast<double>(abs(DoubleDouble(-2.5))) == 2.5);
}
