#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "curveddg/assembly.hpp"
#include "curveddg/solver.hpp"

namespace cdg {

enum class CaseKind { Poisson, EulerVortex, NsCouette };
enum class KgPolicy { Sub, Iso, Super };

inline int geometry_order(KgPolicy policy, int k) {
  switch (policy) {
    case KgPolicy::Sub:
      return 1;
    case KgPolicy::Iso:
      return k;
    case KgPolicy::Super:
      return k + 1;
  }
  return k;
}

struct ErrorReport {
  std::vector<std::string> variables;
  std::vector<double> errors;
  double h = 0.0;
  int n_elements = 0;
  double ar_realized = 0.0;
};

/// order_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i); NaN marks an undefined
/// order (zero error).
std::vector<double> convergence_orders(const std::vector<double>& errors,
                                       const std::vector<double>& h);

struct ConvergenceRow {
  double h = 0.0;
  int n_elements = 0;
  double ar_realized = 0.0;
  bool failed = false;
  std::vector<double> errors;
  std::vector<double> orders;  // empty on the first row / failed rows
  SolveReport solve;
};

struct ConvergenceTable {
  std::string case_id;
  int k = 1;
  KgPolicy policy = KgPolicy::Iso;
  int k_g = 1;
  double ar_target = 1.0;
  std::vector<std::string> variables;
  std::vector<ConvergenceRow> rows;
};

enum class TableFormat { Markdown, Csv };
std::string render_table(const ConvergenceTable& table, TableFormat format);

// ------------------------------------------------------------- error norms

/// L2 errors of (u, q1, q2) against the manufactured solution, with cubature
/// strength 2k+2 on the curved geometry.
ErrorReport poisson_l2_error(const Discretization& disc, const PoissonSystem& system,
                             const VectorXd& u,
                             const std::function<double(const Vec2&)>& exact_u,
                             const std::function<Vec2(const Vec2&)>& exact_grad,
                             int strength = -1);

/// L2 errors of the primitive variables (rho, u, v, p) plus the normalized
/// entropy norm against a pointwise exact solution.
ErrorReport euler_l2_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                           const std::function<FlowPrimitives(const Vec2&)>& exact,
                           double entropy_ref, int strength = -1);

/// L2 errors of (u, v, T).
ErrorReport ns_l2_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                        const std::function<CouetteState(const Vec2&)>& exact,
                        int strength = -1);

/// Normalized entropy error norm with reference state s_ref = p0/rho0^gamma.
double entropy_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                     double entropy_ref, int strength = -1);

// ------------------------------------------------------------ study driver

struct StudyConfig {
  CaseKind case_kind = CaseKind::Poisson;
  ElementKind element = ElementKind::Triangle;
  std::vector<int> k_list = {1, 2, 3};
  KgPolicy policy = KgPolicy::Iso;
  double ar = 1.0;
  int levels = 4;
  int level_start = 0;
  double mu = 1e-3;
  NormalMode normal_mode = NormalMode::FromGeometry;
  int over_integrate = 0;
  std::string init = "exact";  // or "uniform"
  NewtonConfig solver;
  std::string output_dir;
  bool write_svg = false;
};

StudyConfig parse_study_config(std::istream& is);
StudyConfig parse_study_config_file(const std::string& path);

struct StudyResult {
  std::vector<ConvergenceTable> tables;  // one per k
};

/// Runs the configured refinement study: per (k, level) generate the mesh,
/// assemble, solve, and measure errors.  A failed solve marks its row and the
/// study continues.
StudyResult run_study(const StudyConfig& config);

// per-case building blocks (used by the study driver, the CLI and tests)
AnnulusDomain case_domain(CaseKind kind);
BoundaryMap case_boundary_conditions(CaseKind kind, const GasModel& gas, double mu);
GasModel case_gas(CaseKind kind, double mu);
VectorXd initial_state(CaseKind kind, const Discretization& disc, const GasModel& gas,
                       const std::string& init);
ErrorReport case_error_report(CaseKind kind, const Discretization& disc,
                              const DiscreteSystem& system, const VectorXd& u,
                              const GasModel& gas);

}  // namespace cdg
