#include "graphsolver/em.hpp"
#include "graphsolver/quadrature.hpp"

#include <cmath>

namespace graphsolver::em {

std::string to_string(CutPlane plane) {
  switch (plane) {
    case CutPlane::phi0:
      return "phi0";
    case CutPlane::phi90:
      return "phi90";
    case CutPlane::theta90:
      return "theta90";
  }
  return "phi0";
}

CutPlane cut_plane_from_string(const std::string& name) {
  if (name == "phi0") return CutPlane::phi0;
  if (name == "phi90") return CutPlane::phi90;
  if (name == "theta90") return CutPlane::theta90;
  throw InvalidArgument("unknown cut plane '" + name + "' (expected phi0, phi90 or theta90)");
}

std::vector<double> cut_angles(double step) {
  if (!(step > 0.0 && step <= 180.0)) throw InvalidArgument("cut step must lie in (0, 180] degrees");
  std::vector<double> angles;
  for (long i = 0;; ++i) {
    const double a = static_cast<double>(i) * step;
    if (a >= 360.0 - 1e-9) break;
    angles.push_back(a);
  }
  return angles;
}

Vec3 cut_direction(CutPlane plane, double angle_deg) {
  constexpr double deg = constants::pi / 180.0;
  if (plane == CutPlane::theta90) {
    return {std::cos(angle_deg * deg), std::sin(angle_deg * deg), 0.0};
  }
  double phi = plane == CutPlane::phi0 ? 0.0 : 90.0;
  double theta = angle_deg;
  if (angle_deg > 180.0) {
    theta = 360.0 - angle_deg;
    phi += 180.0;
  }
  const double t = theta * deg;
  const double p = phi * deg;
  return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

namespace {

struct CurrentSample {
  Vec3 position;
  CVec3 weighted_current;  // J * quadrature weight
};

RcsCut radiate(const std::vector<CurrentSample>& samples, const PlaneWave& pw, CutPlane plane, double step) {
  const double k = wavenumber(pw.frequency);
  const double prefactor = (k * constants::z0) * (k * constants::z0) / (4.0 * constants::pi * pw.amplitude * pw.amplitude);
  RcsCut cut;
  cut.plane = plane;
  cut.angles = cut_angles(step);
  cut.sigma.reserve(cut.angles.size());
  for (double angle : cut.angles) {
    const Vec3 r_hat = cut_direction(plane, angle);
    CVec3 radiation = CVec3::Zero();
    for (const auto& s : samples) {
      const double phase = k * r_hat.dot(s.position);
      radiation += s.weighted_current * Complex(std::cos(phase), std::sin(phase));
    }
    const CVec3 transverse = radiation - r_hat.cast<Complex>() * (r_hat.cast<Complex>().dot(radiation));
    cut.sigma.push_back(prefactor * transverse.squaredNorm());
  }
  return cut;
}

}  // namespace

RcsCut bistatic_rcs(const rwg::RwgSet& rwg, const CVector& u, const PlaneWave& pw, CutPlane plane, double step) {
  if (static_cast<std::size_t>(u.size()) != rwg.size()) throw InvalidArgument("coefficient length mismatch");
  std::vector<CurrentSample> samples;
  samples.reserve(rwg.triangles.size() * 7);
  for (std::size_t t = 0; t < rwg.triangles.size(); ++t) {
    const auto& tri = rwg.triangles[t];
    for (const auto& p : quadrature::map_rule(quadrature::gauss7(), tri.vertices, tri.area)) {
      samples.push_back({p.position, rwg::current_at(rwg, u, t, p.position) * p.weight});
    }
  }
  return radiate(samples, pw, plane, step);
}

RcsCut bistatic_rcs_from_centroids(const rwg::RwgSet& rwg, const std::vector<CVec3>& currents, const PlaneWave& pw,
                                   CutPlane plane, double step) {
  if (currents.size() != rwg.triangles.size()) throw InvalidArgument("one current per triangle expected");
  std::vector<CurrentSample> samples;
  samples.reserve(currents.size());
  for (std::size_t t = 0; t < currents.size(); ++t) {
    samples.push_back({rwg.triangles[t].centroid, currents[t] * rwg.triangles[t].area});
  }
  return radiate(samples, pw, plane, step);
}

}  // namespace graphsolver::em
