#include "graphsolver/quadrature.hpp"

namespace graphsolver::quadrature {

const std::vector<BaryPoint>& gauss7() {
  static const std::vector<BaryPoint> rule = [] {
    constexpr double a1 = 0.059715871789769820, b1 = 0.470142064105115090, w1 = 0.132394152788506181;
    constexpr double a2 = 0.797426985353087322, b2 = 0.101286507323456339, w2 = 0.125939180544827153;
    return std::vector<BaryPoint>{
        {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225},
        {{a1, b1, b1}, w1}, {{b1, a1, b1}, w1}, {{b1, b1, a1}, w1},
        {{a2, b2, b2}, w2}, {{b2, a2, b2}, w2}, {{b2, b2, a2}, w2},
    };
  }();
  return rule;
}

std::vector<BaryPoint> subdivided(const std::vector<BaryPoint>& rule, int levels) {
  using Corner = std::array<double, 3>;
  using Tri = std::array<Corner, 3>;
  std::vector<Tri> pieces{{Corner{1, 0, 0}, Corner{0, 1, 0}, Corner{0, 0, 1}}};
  auto mid = [](const Corner& a, const Corner& b) {
    return Corner{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
  };
  for (int l = 0; l < levels; ++l) {
    std::vector<Tri> next;
    next.reserve(pieces.size() * 4);
    for (const auto& t : pieces) {
      const Corner m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
      next.push_back({t[0], m01, m20});
      next.push_back({m01, t[1], m12});
      next.push_back({m20, m12, t[2]});
      next.push_back({m01, m12, m20});
    }
    pieces = std::move(next);
  }
  std::vector<BaryPoint> out;
  out.reserve(pieces.size() * rule.size());
  const double scale = 1.0 / static_cast<double>(pieces.size());
  for (const auto& t : pieces) {
    for (const auto& q : rule) {
      BaryPoint p{{0, 0, 0}, q.weight * scale};
      for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 3; ++k) p.bary[c] += q.bary[k] * t[k][c];
      }
      out.push_back(p);
    }
  }
  return out;
}

std::vector<Point> map_rule(const std::vector<BaryPoint>& rule, const std::array<Vec3, 3>& vertices, double area) {
  std::vector<Point> out;
  out.reserve(rule.size());
  for (const auto& q : rule) {
    out.push_back({q.bary[0] * vertices[0] + q.bary[1] * vertices[1] + q.bary[2] * vertices[2], q.weight * area});
  }
  return out;
}

}  // namespace graphsolver::quadrature
