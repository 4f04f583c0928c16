#include "graphsolver/em.hpp"

#include <sstream>

namespace graphsolver::em {

DenseSolver::DenseSolver(const CMatrix& z) : z_(&z) {
  if (z.rows() != z.cols()) throw InvalidArgument("impedance matrix must be square");
  if (!z.allFinite()) throw NumericalError("impedance matrix has non-finite entries");
  lu_.compute(z);
  rcond_ = z.rows() == 0 ? 1.0 : lu_.rcond();
  if (!(rcond_ >= kMinRcond)) {
    std::ostringstream msg;
    msg << "impedance matrix is singular or ill-conditioned (rcond estimate " << rcond_ << ")";
    throw NumericalError(msg.str());
  }
}

CVector DenseSolver::solve(const CVector& b, SolveReport* report) const {
  if (b.size() != z_->rows()) throw InvalidArgument("excitation length does not match the matrix");
  const double b_norm = b.norm();
  SolveReport local;
  local.rcond = rcond_;
  if (b_norm == 0.0) {
    if (report) *report = local;
    return CVector::Zero(b.size());
  }
  CVector u = lu_.solve(b);
  CVector r = b - (*z_) * u;
  local.residual = r.norm() / b_norm;
  if (local.residual > 1e-12) {
    u += lu_.solve(r);
    local.residual = (b - (*z_) * u).norm() / b_norm;
    local.refined = true;
  }
  if (!u.allFinite()) throw NumericalError("solution has non-finite entries");
  if (local.residual > kMaxResidual) {
    std::ostringstream msg;
    msg << "linear solve residual " << local.residual << " exceeds " << kMaxResidual << " (rcond " << rcond_ << ")";
    throw NumericalError(msg.str());
  }
  if (report) *report = local;
  return u;
}

CVector solve_system(const ImpedanceSystem& sys, SolveReport* report) {
  DenseSolver solver(sys.z);
  return solver.solve(sys.b, report);
}

}  // namespace graphsolver::em
