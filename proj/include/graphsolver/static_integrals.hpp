#pragma once

#include "graphsolver/types.hpp"

#include <array>

namespace graphsolver::em {

/// Closed-form integrals of the static kernel over a flat triangle, observed
/// from an arbitrary point r (R = |r - r'|):
///   scalar   = \int 1/R dS'
///   moment   = \int r'/R dS'
///   gradient = grad_r \int 1/R dS'
struct StaticIntegrals {
  double scalar = 0.0;
  Vec3 moment = Vec3::Zero();
  Vec3 gradient = Vec3::Zero();
};

/// `vertices` counterclockwise about `normal` (unit).
StaticIntegrals static_integrals(const std::array<Vec3, 3>& vertices, const Vec3& normal, const Vec3& r);

}  // namespace graphsolver::em
