#include "graphsolver/static_integrals.hpp"

#include <cmath>

namespace graphsolver::em {

StaticIntegrals static_integrals(const std::array<Vec3, 3>& vertices, const Vec3& normal, const Vec3& r) {
  const double d = normal.dot(r - vertices[0]);
  const double abs_d = std::abs(d);
  const Vec3 rho = r - d * normal;
  const double scale2 = (vertices[1] - vertices[0]).squaredNorm();
  const double tiny = 1e-28 * scale2;

  StaticIntegrals out;
  Vec3 moment_rel = Vec3::Zero();
  double beta_sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = vertices[i];
    const Vec3& b = vertices[(i + 1) % 3];
    const Vec3 edge = b - a;
    const Vec3 l_hat = edge.normalized();
    const Vec3 u_hat = l_hat.cross(normal);

    const double l_plus = (b - rho).dot(l_hat);
    const double l_minus = (a - rho).dot(l_hat);
    const double p0 = (a - rho).dot(u_hat);
    const double r0_sq = p0 * p0 + d * d;
    const double r_plus = (r - b).norm();
    const double r_minus = (r - a).norm();

    // ln((R+ + l+)/(R- + l-)) with the cancelling branches rewritten via R0^2
    double f;
    if (l_plus < 0.0 && l_minus < 0.0) {
      f = std::log((r_minus - l_minus) / (r_plus - l_plus));
    } else {
      const double num = l_plus >= 0.0 ? r_plus + l_plus : std::max(r0_sq, tiny) / (r_plus - l_plus);
      const double den = l_minus >= 0.0 ? r_minus + l_minus : std::max(r0_sq, tiny) / (r_minus - l_minus);
      f = std::log(num / den);
    }

    double beta = 0.0;
    if (std::abs(p0) * std::abs(p0) > tiny) {
      beta = std::atan(p0 * l_plus / (r0_sq + abs_d * r_plus)) - std::atan(p0 * l_minus / (r0_sq + abs_d * r_minus));
    }

    out.scalar += p0 * f - abs_d * beta;
    out.gradient -= u_hat * f;
    moment_rel += 0.5 * u_hat * (r0_sq * f + l_plus * r_plus - l_minus * r_minus);
    beta_sum += beta;
  }
  const double sign_d = (d > 0.0) ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  out.gradient -= normal * (sign_d * beta_sum);
  out.moment = moment_rel + rho * out.scalar;
  return out;
}

}  // namespace graphsolver::em
