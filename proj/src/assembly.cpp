#include "graphsolver/em.hpp"
#include "graphsolver/parallel.hpp"
#include "graphsolver/quadrature.hpp"
#include "graphsolver/static_integrals.hpp"

#include <cmath>
#include <sstream>

namespace graphsolver::em {

namespace {

constexpr double kFourPi = 4.0 * constants::pi;

struct TriangleRules {
  std::vector<quadrature::Point> coarse;
  std::vector<quadrature::Point> fine;
};

std::vector<TriangleRules> build_rules(const rwg::RwgSet& rwg, int fine_levels) {
  const auto fine_rule = quadrature::subdivided(quadrature::gauss7(), fine_levels);
  std::vector<TriangleRules> rules(rwg.triangles.size());
  for (std::size_t t = 0; t < rwg.triangles.size(); ++t) {
    const auto& info = rwg.triangles[t];
    rules[t].coarse = quadrature::map_rule(quadrature::gauss7(), info.vertices, info.area);
    rules[t].fine = quadrature::map_rule(fine_rule, info.vertices, info.area);
  }
  return rules;
}

bool share_vertex(const rwg::TriangleInfo& a, const rwg::TriangleInfo& b) {
  for (auto va : a.vertex_ids) {
    for (auto vb : b.vertex_ids) {
      if (va == vb) return true;
    }
  }
  return false;
}

/// Inner integrals over a source triangle seen from one point r:
///   scalar = \int G, moment = \int r' G, curl = \int (r - r') g
/// with G = e^{-jkR}/(4 pi R) and g = (1 + jkR) e^{-jkR} / (4 pi R^3).
struct InnerTerms {
  Complex scalar{0.0, 0.0};
  CVec3 moment = CVec3::Zero();
  CVec3 curl = CVec3::Zero();
};

class Kernel {
 public:
  Kernel(double k, PhaseConvention convention) : k_(k), s_(convention == PhaseConvention::standard ? -1.0 : 1.0) {}

  /// Full kernels by plain quadrature.
  void regular(const std::vector<quadrature::Point>& source, const Vec3& r, bool want_potentials, bool want_curl,
               InnerTerms& out) const {
    for (const auto& q : source) {
      const Vec3 d = r - q.position;
      const double R = d.norm();
      const double x = k_ * R;
      const Complex phase(std::cos(x), s_ * std::sin(x));
      if (want_potentials) {
        const Complex g = q.weight * phase / (kFourPi * R);
        out.scalar += g;
        out.moment += q.position.cast<Complex>() * g;
      }
      if (want_curl) {
        const Complex c = q.weight * Complex(1.0, -s_ * x) * phase / (kFourPi * R * R * R);
        out.curl += d.cast<Complex>() * c;
      }
    }
  }

  /// Static part in closed form plus the smooth dynamic remainder.
  void extracted(const rwg::TriangleInfo& tri, const std::vector<quadrature::Point>& source, const Vec3& r,
                 bool want_potentials, bool want_curl, InnerTerms& out) const {
    const StaticIntegrals st = static_integrals(tri.vertices, tri.normal, r);
    if (want_potentials) {
      out.scalar += st.scalar / kFourPi;
      out.moment += (st.moment / kFourPi).cast<Complex>();
    }
    if (want_curl) out.curl += (-st.gradient / kFourPi).cast<Complex>();
    for (const auto& q : source) {
      const Vec3 d = r - q.position;
      const double R = d.norm();
      const double x = k_ * R;
      if (want_potentials) {
        // (e^{-jx} - 1) / R, finite as R -> 0
        Complex g;
        if (x < 1e-3) {
          g = q.weight * k_ * Complex(-0.5 * x + x * x * x / 24.0, s_ * (1.0 - x * x / 6.0)) / kFourPi;
        } else {
          const double half_sin = std::sin(0.5 * x);
          g = q.weight * Complex(-2.0 * half_sin * half_sin, s_ * std::sin(x)) / (kFourPi * R);
        }
        out.scalar += g;
        out.moment += q.position.cast<Complex>() * g;
      }
      if (want_curl && R > 0.0) {
        Complex num;
        if (x < 1e-2) {
          const double x2 = x * x;
          num = Complex(x2 / 2.0 - x2 * x2 / 8.0, s_ * (x2 * x / 3.0 - x2 * x2 * x / 30.0));
        } else {
          num = Complex(1.0, -s_ * x) * Complex(std::cos(x), s_ * std::sin(x)) - 1.0;
        }
        out.curl += d.cast<Complex>() * (q.weight * num / (kFourPi * R * R * R));
      }
    }
  }

 private:
  double k_;
  double s_;
};

}  // namespace

std::vector<std::string> check_discretization(const rwg::RwgSet& rwg, double frequency) {
  std::vector<std::string> warnings;
  const double ratio = rwg.mean_edge_length / wavelength(frequency);
  std::ostringstream msg;
  msg << "mean edge length " << ratio << " wavelengths";
  if (ratio > 0.2) throw InvalidArgument(msg.str() + " exceeds 0.2");
  if (ratio > 0.12) warnings.push_back(msg.str() + " is coarser than 0.12; expect reduced accuracy");
  return warnings;
}

CMatrix assemble_matrix(const rwg::RwgSet& rwg, double frequency, double alpha, const AssemblyOptions& options) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (!(frequency > 0.0)) throw InvalidArgument("frequency must be > 0");
  const std::size_t n_basis = rwg.size();
  const std::size_t n_tri = rwg.triangles.size();
  const double k = wavenumber(frequency);
  const double z0 = constants::z0;
  const double sign = options.convention == PhaseConvention::standard ? -1.0 : 1.0;
  // j omega mu = j k Z0 under e^{+jwt}
  const Complex efie_scale = Complex(0.0, -sign * k * z0) * (1.0 - alpha);
  const double mfie_scale = alpha * z0;
  const bool want_curl = alpha > 0.0 && options.include_k_term;
  const double near_distance = options.extraction_radius * rwg.mean_edge_length;

  const auto rules = build_rules(rwg, options.touching_subdivision);
  const Kernel kernel(k, options.convention);

  // rows[3 t + a] holds the contribution of test slot a on triangle t
  RowMatrixT<Complex> rows(static_cast<Eigen::Index>(3 * n_tri), static_cast<Eigen::Index>(n_basis));
  CMatrix z = CMatrix::Zero(static_cast<Eigen::Index>(n_basis), static_cast<Eigen::Index>(n_basis));

  // Adds the test-slot rows of both triangles of every basis into z.
  auto fold = [&] {
    for (std::size_t m = 0; m < n_basis; ++m) {
      const auto& basis = rwg.bases[m];
      int k_plus = 0, k_minus = 0;
      for (int a = 0; a < 3; ++a) {
        if (rwg.triangles[basis.plus_triangle].basis[a] == m) k_plus = a;
        if (rwg.triangles[basis.minus_triangle].basis[a] == m) k_minus = a;
      }
      z.row(static_cast<Eigen::Index>(m)) +=
          rows.row(3 * basis.plus_triangle + k_plus) + rows.row(3 * basis.minus_triangle + k_minus);
    }
  };

  // The EFIE pass visits each unordered triangle pair once (self pairs at
  // half weight) and is completed by adding its transpose, so the Galerkin
  // symmetry holds whatever the quadrature asymmetry between the two sides.
  // The MFIE pass visits every ordered pair.
  auto pass = [&](bool efie) {
    rows.setZero();
    parallel_for(n_tri, options.workers, [&](std::size_t t) {
      const auto& test = rwg.triangles[t];
      std::array<double, 3> c_test{}, d_test{};
      for (int a = 0; a < 3; ++a) {
        if (test.basis[a] == rwg::kNoBasis) continue;
        const double len = rwg.bases[test.basis[a]].length;
        c_test[a] = test.sign[a] * len / (2.0 * test.area);
        d_test[a] = test.sign[a] * len / test.area;
      }
      for (std::size_t s = efie ? t : 0; s < n_tri; ++s) {
        const auto& src = rwg.triangles[s];
        const bool self = (s == t);
        const bool touching = self || share_vertex(test, src);
        const bool near = touching || (test.centroid - src.centroid).norm() < near_distance;
        const auto& outer = touching ? rules[t].fine : rules[t].coarse;
        const bool curl = !efie && want_curl && !self;

        Complex vector_part[3][3] = {};
        Complex curl_part[3][3] = {};
        Complex scalar_part{0.0, 0.0};
        if (efie || curl) {
          for (const auto& p : outer) {
            InnerTerms inner;
            if (near) {
              kernel.extracted(src, rules[s].coarse, p.position, efie, curl, inner);
            } else {
              kernel.regular(rules[s].coarse, p.position, efie, curl, inner);
            }
            scalar_part += p.weight * inner.scalar;
            for (int b = 0; b < 3; ++b) {
              const Vec3& q = src.vertices[b];
              if (efie) {
                const CVec3 moment_b = inner.moment - q.cast<Complex>() * inner.scalar;
                for (int a = 0; a < 3; ++a) {
                  vector_part[a][b] += p.weight * (p.position - test.vertices[a]).cast<Complex>().dot(moment_b);
                }
              } else {
                const CVec3 rotated =
                    cross<Complex>(test.normal.cast<Complex>(), cross<Complex>(inner.curl, (p.position - q).cast<Complex>()));
                for (int a = 0; a < 3; ++a) {
                  curl_part[a][b] += p.weight * (p.position - test.vertices[a]).cast<Complex>().dot(rotated);
                }
              }
            }
          }
        }

        std::array<double, 3> c_src{}, d_src{};
        for (int b = 0; b < 3; ++b) {
          if (src.basis[b] == rwg::kNoBasis) continue;
          const double len = rwg.bases[src.basis[b]].length;
          c_src[b] = src.sign[b] * len / (2.0 * src.area);
          d_src[b] = src.sign[b] * len / src.area;
        }
        for (int a = 0; a < 3; ++a) {
          if (test.basis[a] == rwg::kNoBasis) continue;
          for (int b = 0; b < 3; ++b) {
            if (src.basis[b] == rwg::kNoBasis) continue;
            Complex value;
            if (efie) {
              value = (self ? 0.5 : 1.0) * efie_scale *
                      (c_test[a] * c_src[b] * vector_part[a][b] - d_test[a] * d_src[b] * scalar_part / (k * k));
            } else {
              Complex m = c_test[a] * c_src[b] * curl_part[a][b];
              if (self) {
                double gram = 0.0;
                for (const auto& p : rules[t].coarse) {
                  gram += p.weight * (p.position - test.vertices[a]).dot(p.position - test.vertices[b]);
                }
                m += 0.5 * c_test[a] * c_src[b] * gram;
              }
              value = mfie_scale * m;
            }
            rows(static_cast<Eigen::Index>(3 * t + a), src.basis[b]) += value;
          }
        }
      }
    });
    fold();
  };

  if (alpha < 1.0) {
    pass(true);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = i; j < z.cols(); ++j) {
        const Complex sum = z(i, j) + z(j, i);
        z(i, j) = sum;
        z(j, i) = sum;
      }
    }
  }
  if (mfie_scale > 0.0) pass(false);
  return z;
}

CVector assemble_excitation(const rwg::RwgSet& rwg, const PlaneWave& pw, double alpha, const AssemblyOptions& options) {
  pw.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  CVector b = CVector::Zero(static_cast<Eigen::Index>(rwg.size()));
  for (std::size_t t = 0; t < rwg.triangles.size(); ++t) {
    const auto& tri = rwg.triangles[t];
    const auto points = quadrature::map_rule(quadrature::gauss7(), tri.vertices, tri.area);
    for (const auto& p : points) {
      const IncidentField f = plane_wave_fields(pw, p.position, options.convention);
      const CVec3 drive = (1.0 - alpha) * f.e + (alpha * constants::z0) * cross<Complex>(tri.normal.cast<Complex>(), f.h);
      for (int a = 0; a < 3; ++a) {
        const auto n = tri.basis[a];
        if (n == rwg::kNoBasis) continue;
        const double c = tri.sign[a] * rwg.bases[n].length / (2.0 * tri.area);
        b[n] += p.weight * c * (p.position - tri.vertices[a]).cast<Complex>().dot(drive);
      }
    }
  }
  return b;
}

ImpedanceSystem assemble_system(const rwg::RwgSet& rwg, const PlaneWave& pw, double alpha,
                                const AssemblyOptions& options) {
  ImpedanceSystem sys;
  sys.warnings = check_discretization(rwg, pw.frequency);
  sys.alpha = alpha;
  sys.frequency = pw.frequency;
  sys.z = assemble_matrix(rwg, pw.frequency, alpha, options);
  sys.b = assemble_excitation(rwg, pw, alpha, options);
  return sys;
}

Eigen::MatrixXd gram_matrix(const rwg::RwgSet& rwg) {
  const auto n = static_cast<Eigen::Index>(rwg.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (const auto& tri : rwg.triangles) {
    const auto points = quadrature::map_rule(quadrature::gauss7(), tri.vertices, tri.area);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (tri.basis[a] == rwg::kNoBasis || tri.basis[b] == rwg::kNoBasis) continue;
        const double ca = tri.sign[a] * rwg.bases[tri.basis[a]].length / (2.0 * tri.area);
        const double cb = tri.sign[b] * rwg.bases[tri.basis[b]].length / (2.0 * tri.area);
        double sum = 0.0;
        for (const auto& p : points) sum += p.weight * (p.position - tri.vertices[a]).dot(p.position - tri.vertices[b]);
        g(tri.basis[a], tri.basis[b]) += ca * cb * sum;
      }
    }
  }
  return g;
}

}  // namespace graphsolver::em
