#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "graphsolver/em.hpp"
#include "graphsolver/mesh.hpp"
#include "graphsolver/quadrature.hpp"
#include "graphsolver/random.hpp"
#include "graphsolver/rwg.hpp"
#include "graphsolver/static_integrals.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

using namespace graphsolver;

namespace {

rwg::RwgSet sphere_basis(double radius, double density, double frequency, mesh::TriangleMesh* out = nullptr) {
  auto m = mesh::generate_primitive({mesh::ShapeKind::spheroid, {{"Rx", radius}, {"Ry", radius}, {"Rz", radius}}},
                                    density, wavelength(frequency));
  auto set = rwg::build_rwg(m);
  if (out) *out = std::move(m);
  return set;
}

rwg::RwgSet tetra_basis(double scale) {
  mesh::TriangleMesh m;
  m.vertices = {Vec3(1, 1, 1) * scale, Vec3(1, -1, -1) * scale, Vec3(-1, 1, -1) * scale, Vec3(-1, -1, 1) * scale};
  m.triangles = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return rwg::build_rwg(m);
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("plane wave fields") {
  em::PlaneWave pw;
  pw.theta = 37.0;
  pw.phi = 121.0;
  pw.amplitude = 2.5;
  for (auto pol : {em::Polarization::theta, em::Polarization::phi}) {
    pw.polarization = pol;
    const auto f0 = em::plane_wave_fields(pw, Vec3::Zero());
    CHECK(f0.e.norm() == doctest::Approx(2.5).epsilon(1e-15));
    const Vec3 k = pw.direction();
    const Vec3 rs[] = {Vec3::Zero(), Vec3(0.3, -1.2, 0.7), Vec3(5, 5, -5)};
    for (const auto& r : rs) {
      const auto f = em::plane_wave_fields(pw, r);
      CHECK(f.e.norm() / f.h.norm() == doctest::Approx(376.7303).epsilon(1e-6));
      CHECK(f.e.norm() / f.h.norm() == doctest::Approx(constants::z0).epsilon(1e-14));
      CHECK(std::abs(f.e.dot(k.cast<Complex>())) <= 1e-14 * f.e.norm());
      CHECK(std::abs(f.h.dot(k.cast<Complex>())) <= 1e-14 * f.h.norm());
      // H = k x E / Z0
      const CVec3 h = cross<Complex>(k.cast<Complex>(), f.e) / constants::z0;
      CHECK((h - f.h).norm() <= 1e-15 * f.h.norm());
      // phase e^{-jk.r}
      const Complex phase = std::exp(Complex(0, -wavenumber(pw.frequency) * k.dot(r)));
      CHECK((f.e - f0.e * phase).norm() <= 1e-12 * f.e.norm());
    }
  }
  em::PlaneWave bad;
  bad.frequency = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = {};
  bad.theta = 190;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("static integrals against fine quadrature") {
  const std::array<Vec3, 3> v{Vec3(0, 0, 0), Vec3(0.1, 0.01, 0), Vec3(0.02, 0.09, 0)};
  const Vec3 n(0, 0, 1);
  const double area = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
  const auto rule = quadrature::map_rule(quadrature::subdivided(quadrature::gauss7(), 6), v, area);
  const Vec3 obs[] = {Vec3(0.04, 0.03, 0.05), Vec3(0.2, -0.1, 0.02), Vec3(-0.05, 0.2, -0.1), Vec3(0.3, 0.3, 0.0)};
  for (const auto& r : obs) {
    double s = 0;
    Vec3 mom = Vec3::Zero(), grad = Vec3::Zero();
    for (const auto& q : rule) {
      const Vec3 d = r - q.position;
      const double rr = d.norm();
      s += q.weight / rr;
      mom += q.weight * q.position / rr;
      grad -= q.weight * d / (rr * rr * rr);
    }
    const auto si = em::static_integrals(v, n, r);
    CHECK(si.scalar == doctest::Approx(s).epsilon(1e-8));
    CHECK((si.moment - mom).norm() <= 1e-8 * mom.norm());
    CHECK((si.gradient - grad).norm() <= 1e-7 * grad.norm());
  }
  // on the triangle itself the integrals stay finite
  const auto self = em::static_integrals(v, n, (v[0] + v[1] + v[2]) / 3.0);
  CHECK(std::isfinite(self.scalar));
  CHECK(self.scalar > 0);
}

TEST_CASE("quadrature rule") {
  const auto& g = quadrature::gauss7();
  CHECK(g.size() == 7);
  double w = 0;
  for (const auto& p : g) w += p.weight;
  CHECK(w == doctest::Approx(1.0).epsilon(1e-15));
  // degree 5 exactness: integral of x^2 y^3 over the unit right triangle is 1/420
  const std::array<Vec3, 3> tri{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  double s = 0;
  for (const auto& q : quadrature::map_rule(g, tri, 0.5)) s += q.weight * std::pow(q.position.x(), 2) * std::pow(q.position.y(), 3);
  CHECK(s == doctest::Approx(1.0 / 420.0).epsilon(1e-13));
  CHECK(quadrature::subdivided(g, 2).size() == 7 * 16);
}

TEST_CASE("EFIE Galerkin matrix is complex symmetric") {
  const double f = 300e6;
  const auto set = sphere_basis(0.2, 0.12, f);
  const CMatrix z = em::assemble_matrix(set, f, 0.0);
  CHECK(max_abs(z - z.transpose()) / max_abs(z) < 1e-6);
}

TEST_CASE("CFIE operator is affine in alpha") {
  const double f = 300e6;
  const auto set = sphere_basis(0.2, 0.12, f);
  const CMatrix z0 = em::assemble_matrix(set, f, 0.0);
  const CMatrix z1 = em::assemble_matrix(set, f, 1.0);
  const CMatrix zh = em::assemble_matrix(set, f, 0.3);
  CHECK(max_abs(zh - (0.3 * z1 + 0.7 * z0)) <= 1e-12 * max_abs(zh));
  // with alpha = 1 no L-operator term remains, so the identity part is the Gram matrix
  em::AssemblyOptions no_k;
  no_k.include_k_term = false;
  const CMatrix z1n = em::assemble_matrix(set, f, 1.0, no_k);
  const Eigen::MatrixXd g = em::gram_matrix(set);
  CHECK(max_abs(z1n - (0.5 * constants::z0 * g).cast<Complex>()) <= 1e-12 * max_abs(z1n));
  CHECK_THROWS_AS(em::assemble_matrix(set, f, 1.5), InvalidArgument);
}

TEST_CASE("low-frequency MFIE limit on a tetrahedron") {
  const auto set = tetra_basis(0.1);
  const Eigen::MatrixXd g = em::gram_matrix(set);
  em::AssemblyOptions no_k;
  no_k.include_k_term = false;
  for (double f : {1e6, 1e3}) {
    const CMatrix z = em::assemble_matrix(set, f, 1.0, no_k);
    const CMatrix want = (0.5 * constants::z0 * g).cast<Complex>();
    CHECK(max_abs(z - want) <= 0.01 * max_abs(want));
  }
  // the Gram matrix matches its closed form on the diagonal
  for (std::size_t n = 0; n < set.size(); ++n) {
    const auto& b = set.bases[n];
    double want = 0;
    for (auto [t, free] : {std::pair{b.plus_triangle, b.plus_free_vertex}, std::pair{b.minus_triangle, b.minus_free_vertex}}) {
      const auto& info = set.triangles[t];
      std::array<Vec3, 3> p;
      int k = 0;
      for (int i = 0; i < 3; ++i) {
        if (info.vertex_ids[i] != free) p[1 + k++] = info.vertices[i];
        else p[0] = info.vertices[i];
      }
      // <rho, rho> over the triangle with rho measured from vertex p0
      const Vec3 a = p[1] - p[0], c = p[2] - p[0];
      const double rho2 = info.area / 6.0 * (a.squaredNorm() + c.squaredNorm() + a.dot(c));
      want += b.length * b.length / (4 * info.area * info.area) * rho2;
    }
    CHECK(g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("conjugate phase convention conjugates the solution") {
  const double f = 300e6;
  const auto set = sphere_basis(0.2, 0.12, f);
  em::PlaneWave pw;
  pw.theta = 40;
  pw.phi = 110;
  const auto sys = em::assemble_system(set, pw, 0.5);
  em::AssemblyOptions conj;
  conj.convention = em::PhaseConvention::conjugate;
  const auto csys = em::assemble_system(set, pw, 0.5, conj);
  const CVector u = em::solve_system(sys);
  const CVector uc = em::solve_system(csys);
  CHECK((uc - u.conjugate()).norm() <= 1e-10 * u.norm());
}

TEST_CASE("dense solver") {
  const CMatrix eye = CMatrix::Identity(12, 12);
  em::ImpedanceSystem sys;
  sys.z = eye;
  sys.b = CVector::Zero(12);
  CHECK(em::solve_system(sys).norm() == 0.0);
  Rng rng(2);
  for (auto& x : sys.b) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  CHECK((em::solve_system(sys) - sys.b).norm() == 0.0);

  CMatrix z(50, 50);
  for (auto& x : z.reshaped()) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  z += 10.0 * CMatrix::Identity(50, 50);
  CVector known(50);
  for (auto& x : known) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  sys.z = z;
  sys.b = z * known;
  em::SolveReport report;
  const CVector u = em::solve_system(sys, &report);
  CHECK((z * u - sys.b).norm() / sys.b.norm() <= 1e-10);
  CHECK(report.residual <= 1e-10);
  CHECK((u - known).norm() <= 1e-10 * known.norm());
  CHECK(report.rcond > 0.0);

  sys.z = CMatrix::Zero(3, 3);
  sys.b = CVector::Ones(3);
  CHECK_THROWS_AS(em::solve_system(sys), NumericalError);
  sys.z = CMatrix::Identity(3, 3);
  sys.b = CVector::Ones(4);
  CHECK_THROWS_AS(em::solve_system(sys), InvalidArgument);
}

TEST_CASE("solver reuses its factorization") {
  Rng rng(8);
  CMatrix z(20, 20);
  for (auto& x : z.reshaped()) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  z += 8.0 * CMatrix::Identity(20, 20);
  const em::DenseSolver solver(z);
  for (int k = 0; k < 3; ++k) {
    CVector b(20);
    for (auto& x : b) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK((z * solver.solve(b) - b).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("discretization checks") {
  const double f = 300e6;
  const auto fine = sphere_basis(0.3, 0.1, f);
  CHECK(em::check_discretization(fine, f).empty());
  // frequencies at which the mean edge is 0.15 and 0.25 wavelengths
  const double per_lambda = fine.mean_edge_length / wavelength(f);
  CHECK(em::check_discretization(fine, f * 0.15 / per_lambda).size() == 1);
  CHECK_THROWS_AS(em::check_discretization(fine, f * 0.25 / per_lambda), InvalidArgument);
}

TEST_CASE("cut geometry") {
  const auto a = em::cut_angles(1.0);
  CHECK(a.size() == 360);
  CHECK(a.front() == 0.0);
  CHECK(a.back() == 359.0);
  CHECK((em::cut_direction(em::CutPlane::phi0, 90) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((em::cut_direction(em::CutPlane::phi0, 270) - Vec3(-1, 0, 0)).norm() < 1e-15);
  CHECK((em::cut_direction(em::CutPlane::phi0, 180) - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK((em::cut_direction(em::CutPlane::phi90, 90) - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((em::cut_direction(em::CutPlane::theta90, 90) - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(em::cut_angles(0.0), InvalidArgument);
  CHECK_THROWS_AS(em::cut_plane_from_string("phi45"), InvalidArgument);
}

TEST_CASE("zero currents scatter nothing") {
  const auto set = sphere_basis(0.2, 0.12, 300e6);
  const auto cut = em::bistatic_rcs(set, CVector::Zero(static_cast<Eigen::Index>(set.size())), {}, em::CutPlane::phi0, 5.0);
  for (double s : cut.sigma) CHECK(s == 0.0);
}

TEST_CASE("Mie series") {
  const double a = 0.5;
  const auto freq_for = [&](double ka) { return ka * constants::c0 / (2 * constants::pi * a); };
  em::PlaneWave pw;
  const Vec3 back = -pw.direction();

  CHECK(em::mie_truncation(constants::pi) == static_cast<int>(std::ceil(constants::pi + 4 * std::cbrt(constants::pi) + 2)));

  for (double ka : {0.5, constants::pi, 10.0}) {
    const auto base = em::mie_sphere_rcs(a, freq_for(ka), em::CutPlane::phi0, 2.0);
    const auto more = em::mie_sphere_rcs(a, freq_for(ka), em::CutPlane::phi0, 2.0, {}, 5);
    for (std::size_t i = 0; i < base.sigma.size(); ++i) {
      CHECK(std::abs(base.sigma[i] - more.sigma[i]) <= 1e-10 * more.sigma[i]);
    }
  }

  const double s1 = em::mie_sphere_sigma(a, freq_for(0.1), pw, back);
  const double s2 = em::mie_sphere_sigma(a, freq_for(0.05), pw, back);
  CHECK(s1 / s2 == doctest::Approx(16.0).epsilon(0.05));
  // Rayleigh limit of a PEC sphere: 9 pi a^2 (ka)^4
  CHECK(s2 == doctest::Approx(9 * constants::pi * a * a * std::pow(0.05, 4)).epsilon(0.01));

  const double optics = em::mie_sphere_sigma(a, freq_for(10.0), pw, back) / (constants::pi * a * a);
  CHECK(optics == doctest::Approx(1.0).epsilon(0.2));

  // the incidence direction only rotates the pattern
  em::PlaneWave tilted;
  tilted.theta = 50;
  tilted.phi = 120;
  CHECK(em::mie_sphere_sigma(a, freq_for(2.0), tilted, -tilted.direction()) ==
        doctest::Approx(em::mie_sphere_sigma(a, freq_for(2.0), pw, back)).epsilon(1e-10));
  CHECK_THROWS_AS(em::mie_sphere_rcs(-1, 1e8, em::CutPlane::phi0, 1), InvalidArgument);
}

TEST_CASE("sphere RCS is symmetric about the incidence axis and refines toward Mie") {
  const double f = 300e6, a = 0.5;
  mesh::TriangleMesh m;
  em::PlaneWave pw;
  em::RcsComparison previous;
  for (double density : {0.2, 0.1}) {
    const auto set = sphere_basis(a, density, f, &m);
    const CVector u = em::solve_system(em::assemble_system(set, pw, 0.5));
    const auto cut = em::bistatic_rcs(set, u, pw, em::CutPlane::phi0, 1.0);
    const auto mie = em::mie_sphere_rcs(a, f, em::CutPlane::phi0, 1.0, pw);
    const auto cmp = em::compare_rcs(cut, mie, 30.0);
    CAPTURE(density);
    CAPTURE(cmp.max_abs_db);
    if (density == 0.1) {
      CHECK(cmp.max_abs_db < previous.max_abs_db);
      const double peak = *std::max_element(cut.sigma.begin(), cut.sigma.end());
      for (std::size_t i = 1; i < 180; ++i) {
        const double s = cut.sigma[i], mirrored = cut.sigma[360 - i];
        if (s > 1e-2 * peak) CHECK(std::abs(s - mirrored) <= 0.01 * s);
      }
    }
    previous = cmp;
  }
}

TEST_CASE("large sphere backscatter approaches the optics limit") {
  const double a = 0.5, ka = 10.0;
  const double f = ka * constants::c0 / (2 * constants::pi * a);
  const auto set = sphere_basis(a, 0.2, f);
  em::PlaneWave pw;
  pw.frequency = f;
  const CVector u = em::solve_system(em::assemble_system(set, pw, 0.5));
  const auto cut = em::bistatic_rcs(set, u, pw, em::CutPlane::phi0, 1.0);
  CHECK(cut.sigma[180] / (constants::pi * a * a) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("assembly does not depend on the worker count") {
  const double f = 300e6;
  const auto set = sphere_basis(0.2, 0.12, f);
  em::AssemblyOptions one, four;
  four.workers = 4;
  const CMatrix z1 = em::assemble_matrix(set, f, 0.5, one);
  const CMatrix z4 = em::assemble_matrix(set, f, 0.5, four);
  CHECK(std::memcmp(z1.data(), z4.data(), sizeof(Complex) * static_cast<std::size_t>(z1.size())) == 0);
}

TEST_CASE("centroid currents radiate like the RWG expansion") {
  const double f = 300e6;
  const auto set = sphere_basis(0.3, 0.1, f);
  em::PlaneWave pw;
  const CVector u = em::solve_system(em::assemble_system(set, pw, 0.5));
  const auto exact = em::bistatic_rcs(set, u, pw, em::CutPlane::phi0, 2.0);
  const auto approx = em::bistatic_rcs_from_centroids(set, rwg::centroid_currents(set, u), pw, em::CutPlane::phi0, 2.0);
  CHECK(em::compare_rcs(approx, exact, 20.0).max_abs_db < 1.0);
}

TEST_CASE("artifacts round trip") {
  Rng rng(4);
  CVector u(17);
  for (auto& x : u) x = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  em::SolutionHeader h;
  h.n = 17;
  h.frequency = 3e8;
  h.alpha = 0.5;
  h.theta = 30;
  h.phi = 120;
  h.polarization = em::Polarization::phi;
  std::stringstream buf;
  em::write_solution(buf, h, u);
  CHECK(buf.str().size() == 7 * 8 + 17 * 16);
  em::SolutionHeader back;
  CHECK(em::read_solution(buf, &back) == u);
  CHECK(back.polarization == em::Polarization::phi);
  CHECK(back.phi == 120);

  std::stringstream truncated(buf.str().substr(0, 60));
  CHECK_THROWS_AS(em::read_solution(truncated), FormatError);

  em::RcsCut cut{em::CutPlane::phi0, {0, 90, 180, 270}, {1.0, 0.5, 0.0, 2.0}};
  std::ostringstream csv;
  em::write_rcs_csv(cut, csv);
  CHECK(csv.str().rfind("angle_deg,sigma_m2,sigma_dbsm\n", 0) == 0);
  CHECK(em::to_dbsm(0.0) == em::kDbFloor);
  CHECK(em::to_dbsm(10.0) == doctest::Approx(10.0));
}

TEST_CASE("RCS comparison in dB") {
  em::RcsCut ref{em::CutPlane::phi0, {0, 1, 2, 3}, {1.0, 1.0, 1e-5, 1.0}};
  em::RcsCut test = ref;
  test.sigma = {2.0, 1.0, 1.0, 1.0};
  const auto c = em::compare_rcs(test, ref, 30.0);
  CHECK(c.compared == 3);
  CHECK(c.max_abs_db == doctest::Approx(10 * std::log10(2.0)));
  CHECK(c.worst_angle == 0.0);
}
