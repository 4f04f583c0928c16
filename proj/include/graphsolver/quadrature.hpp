#pragma once

#include "graphsolver/types.hpp"

#include <array>
#include <vector>

namespace graphsolver::quadrature {

/// Barycentric point with a weight normalized so the weights sum to 1.
struct BaryPoint {
  std::array<double, 3> bary;
  double weight;
};

/// Symmetric 7-point Gaussian rule, exact to degree 5.
const std::vector<BaryPoint>& gauss7();

/// The 7-point rule applied on each of the 4^levels congruent sub-triangles.
std::vector<BaryPoint> subdivided(const std::vector<BaryPoint>& rule, int levels);

struct Point {
  Vec3 position;
  double weight;  // includes the triangle area
};

std::vector<Point> map_rule(const std::vector<BaryPoint>& rule, const std::array<Vec3, 3>& vertices, double area);

}  // namespace graphsolver::quadrature
