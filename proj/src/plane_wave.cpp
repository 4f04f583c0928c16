#include "graphsolver/em.hpp"

#include <cmath>

namespace graphsolver::em {

std::string to_string(Polarization p) { return p == Polarization::theta ? "theta" : "phi"; }

Polarization polarization_from_string(const std::string& name) {
  if (name == "theta" || name == "theta_pol" || name == "vertical") return Polarization::theta;
  if (name == "phi" || name == "phi_pol" || name == "horizontal") return Polarization::phi;
  throw InvalidArgument("unknown polarization '" + name + "'");
}

void PlaneWave::validate() const {
  if (!(frequency > 0.0)) throw InvalidArgument("plane wave frequency must be > 0");
  if (!(amplitude > 0.0)) throw InvalidArgument("plane wave amplitude must be > 0");
  if (!(theta >= 0.0 && theta <= 180.0)) throw InvalidArgument("plane wave theta must lie in [0, 180]");
  if (!(phi >= 0.0 && phi < 360.0)) throw InvalidArgument("plane wave phi must lie in [0, 360)");
}

namespace {
constexpr double kDeg = constants::pi / 180.0;
}

Vec3 PlaneWave::direction() const {
  const double t = theta * kDeg;
  const double p = phi * kDeg;
  return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

Vec3 PlaneWave::e_direction() const {
  const double t = theta * kDeg;
  const double p = phi * kDeg;
  if (polarization == Polarization::theta) {
    return {std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), -std::sin(t)};
  }
  return {-std::sin(p), std::cos(p), 0.0};
}

IncidentField plane_wave_fields(const PlaneWave& pw, const Vec3& r, PhaseConvention convention) {
  const double k = wavenumber(pw.frequency);
  const Vec3 k_hat = pw.direction();
  const Vec3 e_hat = pw.e_direction();
  const double phase = k * k_hat.dot(r);
  const double s = convention == PhaseConvention::standard ? -1.0 : 1.0;
  const Complex carrier = pw.amplitude * Complex(std::cos(phase), s * std::sin(phase));
  IncidentField f;
  f.e = e_hat.cast<Complex>() * carrier;
  f.h = k_hat.cross(e_hat).cast<Complex>() * (carrier / constants::z0);
  return f;
}

}  // namespace graphsolver::em
