#pragma once

#include "graphsolver/rwg.hpp"
#include "graphsolver/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace graphsolver::em {

// Time convention: e^{+jwt}, so an incident plane wave carries e^{-jk.r} and
// the free-space Green's function is e^{-jkR}/(4 pi R).

enum class Polarization { theta, phi };

std::string to_string(Polarization p);
Polarization polarization_from_string(const std::string& name);

struct PlaneWave {
  double frequency = 300e6;  // Hz
  double theta = 0.0;        // degrees, propagation direction
  double phi = 0.0;          // degrees
  Polarization polarization = Polarization::theta;
  double amplitude = 1.0;  // V/m

  void validate() const;
  /// Unit propagation vector k̂.
  Vec3 direction() const;
  /// Unit electric-field direction (θ̂ or φ̂ at the propagation angles).
  Vec3 e_direction() const;
};

struct IncidentField {
  CVec3 e;
  CVec3 h;
};

/// `conjugate` flips every phase (e^{-jwt} convention); used to cross-check
/// the implementation against its own complex conjugate.
enum class PhaseConvention { standard, conjugate };

IncidentField plane_wave_fields(const PlaneWave& pw, const Vec3& r,
                                PhaseConvention convention = PhaseConvention::standard);

struct AssemblyOptions {
  int workers = 1;
  /// Pairs sharing a vertex, or with centroid distance below this many mean
  /// edge lengths, use closed-form static-kernel extraction for the inner integral.
  double extraction_radius = 0.3;
  /// Subdivision levels of the outer rule for pairs that share a vertex
  /// (each level multiplies the points by 4).
  int touching_subdivision = 1;
  bool include_k_term = true;
  PhaseConvention convention = PhaseConvention::standard;
};

struct ImpedanceSystem {
  CMatrix z;
  CVector b;
  double alpha = 0.5;
  double frequency = 0.0;
  std::vector<std::string> warnings;
};

/// Mesh-density checks shared by assembly entry points. Throws above 0.2 λ.
std::vector<std::string> check_discretization(const rwg::RwgSet& rwg, double frequency);

/// Galerkin-tested CFIE operator
///   alpha * Z0 * (1/2 Gram + K) + (1 - alpha) * L.
CMatrix assemble_matrix(const rwg::RwgSet& rwg, double frequency, double alpha, const AssemblyOptions& options = {});

/// Tested incident terms alpha * Z0 <f, n̂ x H> + (1 - alpha) <f, E>.
CVector assemble_excitation(const rwg::RwgSet& rwg, const PlaneWave& pw, double alpha,
                            const AssemblyOptions& options = {});

ImpedanceSystem assemble_system(const rwg::RwgSet& rwg, const PlaneWave& pw, double alpha,
                                const AssemblyOptions& options = {});

/// RWG Gram matrix <f_m, f_n>.
Eigen::MatrixXd gram_matrix(const rwg::RwgSet& rwg);

struct SolveReport {
  double residual = 0.0;
  double rcond = 0.0;
  bool refined = false;
};

/// LU factorization reusable across right-hand sides.
class DenseSolver {
 public:
  explicit DenseSolver(const CMatrix& z);
  CVector solve(const CVector& b, SolveReport* report = nullptr) const;
  double rcond() const { return rcond_; }

 private:
  const CMatrix* z_;
  Eigen::PartialPivLU<CMatrix> lu_;
  double rcond_;
};

inline constexpr double kMaxResidual = 1e-8;
inline constexpr double kMinRcond = 1e-14;

CVector solve_system(const ImpedanceSystem& sys, SolveReport* report = nullptr);

// ---------------------------------------------------------------- far field

enum class CutPlane { phi0, phi90, theta90 };

std::string to_string(CutPlane plane);
CutPlane cut_plane_from_string(const std::string& name);

/// Observation directions of a cut. For phi0/phi90 the cut angle t runs over
/// [0, 360): t <= 180 is θ = t in the half-plane φ = φc, t > 180 is
/// θ = 360 - t in the half-plane φ = φc + 180. For theta90 t is φ.
std::vector<double> cut_angles(double step);
Vec3 cut_direction(CutPlane plane, double angle_deg);

struct RcsCut {
  CutPlane plane = CutPlane::phi0;
  std::vector<double> angles;  // degrees
  std::vector<double> sigma;   // m^2
};

RcsCut bistatic_rcs(const rwg::RwgSet& rwg, const CVector& u, const PlaneWave& pw, CutPlane plane, double step);

/// Same radiation integral with one constant current per triangle.
RcsCut bistatic_rcs_from_centroids(const rwg::RwgSet& rwg, const std::vector<CVec3>& currents, const PlaneWave& pw,
                                   CutPlane plane, double step);

// ---------------------------------------------------------------- Mie oracle

/// ceil(x + 4 x^{1/3} + 2)
int mie_truncation(double ka);

/// Bistatic RCS of a PEC sphere centered at the origin illuminated by `incidence`
/// (its frequency field is ignored in favour of `frequency`).
RcsCut mie_sphere_rcs(double radius, double frequency, CutPlane plane, double step,
                      const PlaneWave& incidence = {}, int extra_terms = 0);

/// σ for one observation direction.
double mie_sphere_sigma(double radius, double frequency, const PlaneWave& incidence, const Vec3& observation,
                        int extra_terms = 0);

// ---------------------------------------------------------------- artifacts

inline constexpr double kDbFloor = -300.0;
double to_dbsm(double sigma);

void write_rcs_csv(const RcsCut& cut, std::ostream& out);
void write_rcs_csv_file(const RcsCut& cut, const std::string& path);
RcsCut read_rcs_csv_file(const std::string& path);

struct RcsComparison {
  double max_abs_db = 0.0;
  double rms_db = 0.0;
  std::size_t compared = 0;
  double worst_angle = 0.0;
};

/// Difference in dB over the samples whose reference σ is within
/// `dynamic_range_db` of the reference peak.
RcsComparison compare_rcs(const RcsCut& test, const RcsCut& reference, double dynamic_range_db = 30.0);

struct SolutionHeader {
  std::uint64_t n = 0;
  double frequency = 0.0;
  double alpha = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  Polarization polarization = Polarization::theta;
  double amplitude = 1.0;
};

/// Little-endian record: u64 N, f64 frequency, f64 alpha, f64 theta, f64 phi,
/// u64 polarization (0 theta, 1 phi), f64 amplitude, then N (re, im) f64 pairs.
void write_solution(std::ostream& out, const SolutionHeader& header, const CVector& u);
void write_solution_file(const std::string& path, const SolutionHeader& header, const CVector& u);
CVector read_solution(std::istream& in, SolutionHeader* header = nullptr);
CVector read_solution_file(const std::string& path, SolutionHeader* header = nullptr);

}  // namespace graphsolver::em
