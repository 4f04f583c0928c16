#include "graphsolver/em.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace graphsolver::em {

double to_dbsm(double sigma) {
  if (!(sigma > 0.0)) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(sigma));
}

void write_rcs_csv(const RcsCut& cut, std::ostream& out) {
  out << "angle_deg,sigma_m2,sigma_dbsm\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cut.angles.size(); ++i) {
    out << cut.angles[i] << ',' << cut.sigma[i] << ',' << to_dbsm(cut.sigma[i]) << '\n';
  }
}

void write_rcs_csv_file(const RcsCut& cut, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_rcs_csv(cut, out);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

RcsCut read_rcs_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("angle_deg,sigma_m2", 0) != 0) {
    throw FormatError(path + ": missing RCS csv header");
  }
  RcsCut cut;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double angle = 0.0, sigma = 0.0;
    if (!(fields >> angle >> sigma)) throw FormatError(path + ":" + std::to_string(line_no) + ": malformed row");
    cut.angles.push_back(angle);
    cut.sigma.push_back(sigma);
  }
  return cut;
}

RcsComparison compare_rcs(const RcsCut& test, const RcsCut& reference, double dynamic_range_db) {
  if (test.angles.size() != reference.angles.size()) throw InvalidArgument("RCS cuts have different sample counts");
  for (std::size_t i = 0; i < test.angles.size(); ++i) {
    if (std::abs(test.angles[i] - reference.angles[i]) > 1e-9) throw InvalidArgument("RCS cuts use different angles");
  }
  RcsComparison cmp;
  if (reference.sigma.empty()) return cmp;
  const double peak = to_dbsm(*std::max_element(reference.sigma.begin(), reference.sigma.end()));
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < reference.sigma.size(); ++i) {
    const double ref_db = to_dbsm(reference.sigma[i]);
    if (ref_db < peak - dynamic_range_db) continue;
    const double diff = std::abs(to_dbsm(test.sigma[i]) - ref_db);
    sum_sq += diff * diff;
    ++cmp.compared;
    if (diff > cmp.max_abs_db) {
      cmp.max_abs_db = diff;
      cmp.worst_angle = reference.angles[i];
    }
  }
  if (cmp.compared > 0) cmp.rms_db = std::sqrt(sum_sq / static_cast<double>(cmp.compared));
  return cmp;
}

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) throw FormatError("truncated solution file");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_solution(std::ostream& out, const SolutionHeader& header, const CVector& u) {
  if (header.n != static_cast<std::uint64_t>(u.size())) throw InvalidArgument("solution header N does not match data");
  put<std::uint64_t>(out, header.n);
  put<double>(out, header.frequency);
  put<double>(out, header.alpha);
  put<double>(out, header.theta);
  put<double>(out, header.phi);
  put<std::uint64_t>(out, header.polarization == Polarization::theta ? 0 : 1);
  put<double>(out, header.amplitude);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    put<double>(out, u[i].real());
    put<double>(out, u[i].imag());
  }
}

void write_solution_file(const std::string& path, const SolutionHeader& header, const CVector& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_solution(out, header, u);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

CVector read_solution(std::istream& in, SolutionHeader* header) {
  SolutionHeader h;
  h.n = get<std::uint64_t>(in);
  h.frequency = get<double>(in);
  h.alpha = get<double>(in);
  h.theta = get<double>(in);
  h.phi = get<double>(in);
  const auto pol = get<std::uint64_t>(in);
  if (pol > 1) throw FormatError("solution file has invalid polarization code");
  h.polarization = pol == 0 ? Polarization::theta : Polarization::phi;
  h.amplitude = get<double>(in);
  if (h.n > (std::uint64_t{1} << 32)) throw FormatError("solution file declares an implausible size");
  CVector u(static_cast<Eigen::Index>(h.n));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double re = get<double>(in);
    const double im = get<double>(in);
    u[i] = Complex(re, im);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after solution data");
  if (header) *header = h;
  return u;
}

CVector read_solution_file(const std::string& path, SolutionHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_solution(in, header);
}

}  // namespace graphsolver::em
