#include "graphsolver/em.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace graphsolver::em {

int mie_truncation(double ka) {
  return static_cast<int>(std::ceil(ka + 4.0 * std::cbrt(ka) + 2.0));
}

namespace {

struct MieCoefficients {
  std::vector<Complex> a;  // index n = 1..N
  std::vector<Complex> b;
};

// PEC limit of the Bohren-Huffman coefficients with psi_n = x j_n(x),
// xi_n = x h^(1)_n(x):  a_n = psi_n'/xi_n', b_n = psi_n/xi_n.
MieCoefficients pec_coefficients(double x, int terms) {
  MieCoefficients c;
  c.a.assign(terms + 1, Complex(0.0, 0.0));
  c.b.assign(terms + 1, Complex(0.0, 0.0));
  for (int n = 1; n <= terms; ++n) {
    const auto un = static_cast<unsigned>(n);
    const double jn = std::sph_bessel(un, x);
    const double jm = std::sph_bessel(un - 1, x);
    const double yn = std::sph_neumann(un, x);
    const double ym = std::sph_neumann(un - 1, x);
    const double psi = x * jn;
    const double dpsi = x * jm - n * jn;
    const Complex xi(x * jn, x * yn);
    const Complex dxi(x * jm - n * jn, x * ym - n * yn);
    c.a[n] = dpsi / dxi;
    c.b[n] = psi / xi;
  }
  return c;
}

/// S1, S2 at cos(scattering angle) mu.
std::pair<Complex, Complex> amplitudes(const MieCoefficients& c, double mu) {
  const int terms = static_cast<int>(c.a.size()) - 1;
  Complex s1(0.0, 0.0), s2(0.0, 0.0);
  double pi_prev = 0.0;  // pi_0
  double pi_n = 1.0;     // pi_1
  for (int n = 1; n <= terms; ++n) {
    const double tau_n = n * mu * pi_n - (n + 1) * pi_prev;
    const double weight = (2.0 * n + 1.0) / (n * (n + 1.0));
    s1 += weight * (c.a[n] * pi_n + c.b[n] * tau_n);
    s2 += weight * (c.a[n] * tau_n + c.b[n] * pi_n);
    const double pi_next = ((2.0 * n + 1.0) * mu * pi_n - (n + 1.0) * pi_prev) / n;
    pi_prev = pi_n;
    pi_n = pi_next;
  }
  return {s1, s2};
}

double sigma_from(const MieCoefficients& c, double k, const Vec3& k_hat, const Vec3& e_hat, const Vec3& r_hat) {
  const double mu = std::clamp(k_hat.dot(r_hat), -1.0, 1.0);
  const auto [s1, s2] = amplitudes(c, mu);
  const Vec3 transverse = r_hat - mu * k_hat;
  double cos_psi = 1.0;
  double sin_psi = 0.0;
  if (transverse.norm() > 1e-12) {
    const Vec3 t = transverse.normalized();
    cos_psi = e_hat.dot(t);
    sin_psi = k_hat.cross(e_hat).dot(t);
  }
  return 4.0 * constants::pi / (k * k) * (std::norm(s2) * cos_psi * cos_psi + std::norm(s1) * sin_psi * sin_psi);
}

}  // namespace

double mie_sphere_sigma(double radius, double frequency, const PlaneWave& incidence, const Vec3& observation,
                        int extra_terms) {
  if (!(radius > 0.0) || !(frequency > 0.0)) throw InvalidArgument("radius and frequency must be > 0");
  const double k = wavenumber(frequency);
  const auto coeffs = pec_coefficients(k * radius, mie_truncation(k * radius) + extra_terms);
  return sigma_from(coeffs, k, incidence.direction(), incidence.e_direction(), observation.normalized());
}

RcsCut mie_sphere_rcs(double radius, double frequency, CutPlane plane, double step, const PlaneWave& incidence,
                      int extra_terms) {
  if (!(radius > 0.0) || !(frequency > 0.0)) throw InvalidArgument("radius and frequency must be > 0");
  const double k = wavenumber(frequency);
  const auto coeffs = pec_coefficients(k * radius, mie_truncation(k * radius) + extra_terms);
  const Vec3 k_hat = incidence.direction();
  const Vec3 e_hat = incidence.e_direction();
  RcsCut cut;
  cut.plane = plane;
  cut.angles = cut_angles(step);
  for (double angle : cut.angles) cut.sigma.push_back(sigma_from(coeffs, k, k_hat, e_hat, cut_direction(plane, angle)));
  return cut;
}

}  // namespace graphsolver::em
