#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "curveddg/assembly.hpp"
#include "curveddg/blockmatrix.hpp"
#include "curveddg/types.hpp"

namespace cdg {

enum class LinearSolverKind { CG, GMRES };
enum class PreconditionerKind { None, BlockJacobi, ILU0 };
enum class Globalization { None, LineSearch, PseudoTransient };

struct NewtonConfig {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_newton = 50;
  LinearSolverKind linear = LinearSolverKind::GMRES;
  int gmres_restart = 60;
  double linear_tol = 1e-4;  // relative; tightened to 1e-10 on final steps
  PreconditionerKind preconditioner = PreconditionerKind::BlockJacobi;
  Globalization globalization = Globalization::LineSearch;
  double ptc_cfl0 = 10.0;
  double ptc_growth = 2.0;
  JacobianMode jacobian_mode = JacobianMode::Analytic;
  bool verbose = false;
};

struct SolveReport {
  bool converged = false;
  int newton_iterations = 0;
  std::vector<double> residual_history;  // l2 norms, one entry per iterate
  std::vector<int> linear_iterations;
  double wall_time_seconds = 0.0;
  std::string failure;
};

using MatVec = std::function<void(const VectorXd&, VectorXd&)>;

struct KrylovResult {
  VectorXd x;
  int iterations = 0;
  bool converged = false;
  double true_residual = 0.0;  // recomputed relative residual
};

/// Restarted GMRES(m) with right preconditioning; the returned relative
/// residual is recomputed from the iterate, not the recurrence.  Throws on
/// stagnation across 3 restarts.
KrylovResult gmres(const MatVec& apply, const VectorXd& rhs, int restart, double tol,
                   const MatVec& precond = nullptr, int max_iterations = 10000);

/// Preconditioned conjugate gradients; throws "operator not SPD" on negative
/// curvature.
KrylovResult cg(const MatVec& apply, const VectorXd& rhs, double tol,
                const MatVec& precond = nullptr, int max_iterations = 10000);

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const VectorXd& x, VectorXd& y) const = 0;
  MatVec op() const {
    return [this](const VectorXd& x, VectorXd& y) { apply(x, y); };
  }
};

/// Exact inverses of the diagonal blocks.
std::unique_ptr<Preconditioner> block_jacobi_preconditioner(const BlockSparseMatrix& matrix);
/// Block ILU(0) on the matrix sparsity.
std::unique_ptr<Preconditioner> block_ilu0_preconditioner(const BlockSparseMatrix& matrix);
std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind,
                                                    const BlockSparseMatrix& matrix);

/// Newton iteration on R(u) = 0 with inexact linear solves and optional
/// line-search or pseudo-transient globalization.
std::pair<VectorXd, SolveReport> newton_solve(const DiscreteSystem& system,
                                              const VectorXd& state0,
                                              const NewtonConfig& config = {});

}  // namespace cdg
