#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "curveddg/blockmatrix.hpp"
#include "curveddg/geometry.hpp"
#include "curveddg/physics.hpp"
#include "curveddg/reference.hpp"
#include "curveddg/types.hpp"

namespace cdg {

/// Per-element solution coefficients in the nodal basis, flattened as
/// [element][variable][node]; auxiliary gradient coefficients (one set per
/// space dimension, same layout) are filled by the second-order systems.
struct FieldState {
  int n_elems = 0, n_vars = 0, nodes_per_elem = 0;
  VectorXd coeffs;
  std::array<VectorXd, 2> grad;  // q or Q coefficients; empty until recovered

  int dofs() const { return n_elems * n_vars * nodes_per_elem; }
  int elem_offset(int e) const { return e * n_vars * nodes_per_elem; }
  double& at(int e, int var, int node) {
    return coeffs[elem_offset(e) + var * nodes_per_elem + node];
  }
  double at(int e, int var, int node) const {
    return coeffs[elem_offset(e) + var * nodes_per_elem + node];
  }
};

enum class BCKind {
  Dirichlet,        // Poisson: u* = g
  Neumann,          // Poisson: q*.n = g_n
  SlipWall,         // mirror normal velocity
  RiemannInvariant, // characteristic far field against a free state
  NoSlipAdiabatic,  // reversed velocity ghost, wall heat flux removed
  NoSlipIsothermal, // reversed velocity, reflected T and p
  ExactDirichlet    // ghost = supplied exact state
};

struct BoundaryCondition {
  BCKind kind = BCKind::Dirichlet;
  std::function<double(const Vec2&)> g;                      // Poisson Dirichlet data
  std::function<double(const Vec2&, const Vec2&)> g_n;       // Poisson Neumann data (x, normal)
  std::function<State<double>(const Vec2&)> free_state;      // Riemann / exact states
  double T_wall = 1.0, p_wall = 1.0;                         // isothermal wall data
  std::function<Vec2(const Vec2&)> wall_velocity;            // moving no-slip walls
};

using BoundaryMap = std::map<std::string, BoundaryCondition>;

/// Ghost (exterior) state for the flow boundary conditions.  Templated so the
/// analytic Jacobian picks up the exact ghost-state chain rule.
template <class T>
State<T> flow_ghost_state(const BoundaryCondition& bc, const State<T>& wi, double nx, double ny,
                          const Vec2& x, const GasModel& gas) {
  switch (bc.kind) {
    case BCKind::SlipWall: {
      const Primitives<T> pr = primitives(wi, gas);
      const T vn = pr.u * nx + pr.v * ny;
      return conservative_from_primitives(pr.rho, pr.u - 2.0 * vn * nx, pr.v - 2.0 * vn * ny,
                                          pr.p, gas);
    }
    case BCKind::NoSlipAdiabatic: {
      const Primitives<T> pr = primitives(wi, gas);
      const Vec2 vw = bc.wall_velocity ? bc.wall_velocity(x) : Vec2::Zero();
      return conservative_from_primitives(pr.rho, 2.0 * vw.x() - pr.u, 2.0 * vw.y() - pr.v,
                                          pr.p, gas);
    }
    case BCKind::NoSlipIsothermal: {
      const Primitives<T> pr = primitives(wi, gas);
      const T tg = 2.0 * bc.T_wall - pr.temperature;
      const T pg = 2.0 * bc.p_wall - pr.p;
      if (!(value(tg) > 0.0) || !(value(pg) > 0.0)) throw_nonphysical(value(pg), value(tg));
      const T rhog = pg / (gas.R() * tg);
      const Vec2 vw = bc.wall_velocity ? bc.wall_velocity(x) : Vec2::Zero();
      return conservative_from_primitives(rhog, 2.0 * vw.x() - pr.u, 2.0 * vw.y() - pr.v, pg,
                                          gas);
    }
    case BCKind::ExactDirichlet: {
      const State<double> we = bc.free_state(x);
      return {T(we[0]), T(we[1]), T(we[2]), T(we[3])};
    }
    case BCKind::RiemannInvariant: {
      const State<double> wf = bc.free_state(x);
      const Primitives<double> fr = primitives(wf, gas);
      const Primitives<T> in = primitives(wi, gas);
      const double gm1 = gas.gamma - 1.0;
      const T a_i = sqrt(gas.gamma * in.p / in.rho);
      const double a_f = std::sqrt(gas.gamma * fr.p / fr.rho);
      const T un_i = in.u * nx + in.v * ny;
      const double un_f = fr.u * nx + fr.v * ny;
      if (value(un_i - a_i) >= 0.0) return wi;  // supersonic outflow
      if (un_f + a_f <= 0.0)                    // supersonic inflow
        return {T(wf[0]), T(wf[1]), T(wf[2]), T(wf[3])};
      const T rplus = un_i + 2.0 * a_i / gm1;
      const double rminus = un_f - 2.0 * a_f / gm1;
      const T un_b = 0.5 * (rplus + rminus);
      const T a_b = 0.25 * gm1 * (rplus - rminus);
      T entropy, ub, vb;
      if (value(un_b) >= 0.0) {  // outflow: entropy and tangential state from inside
        entropy = in.p / pow(in.rho, gas.gamma);
        ub = in.u + (un_b - un_i) * nx;
        vb = in.v + (un_b - un_i) * ny;
      } else {
        entropy = fr.p / std::pow(fr.rho, gas.gamma);
        ub = fr.u + (un_b - un_f) * nx;
        vb = fr.v + (un_b - un_f) * ny;
      }
      const T rhob = pow(a_b * a_b / (gas.gamma * entropy), 1.0 / gm1);
      const T pb = rhob * a_b * a_b / gas.gamma;
      return conservative_from_primitives(rhob, ub, vb, pb, gas);
    }
    default:
      fail("boundary condition kind not valid for a flow system");
  }
}

/// Mesh + reference element + metric terms + the element-local operators the
/// residuals need (physical derivative matrices, inverse mass, face lifting).
struct Discretization {
  const CurvedMesh* mesh = nullptr;
  ReferenceElement ref;
  GeometryMaps maps;
  int n = 0;  // nodes per element

  std::vector<MatrixXd> dx, dy;    // physical basis gradients at volume points
  std::vector<VectorXd> wdet;     // cubature weight times det J
  std::vector<MatrixXd> mass, minv;
  std::vector<MatrixXd> node_xy;  // physical coordinates of the solution nodes

  struct FaceSide {
    MatrixXd dxf, dyf;      // physical gradients at the side's face points (own order)
    MatrixXd lift_pt[2];    // face-point lifting values from jump values (own order)
    MatrixXd lift_coef[2];  // lifting coefficients from jump values (own order)
  };
  std::vector<FaceSide> int_l, int_r, bnd;

  std::vector<std::vector<int>> adjacency;  // sorted, self included

  // local faces of each element: (interior? face id : ~boundary id, side)
  struct ElemFace {
    bool interior;
    int index;  // into interior/boundary face arrays
    bool left;  // owning side (interior only)
  };
  std::vector<std::vector<ElemFace>> elem_faces;

  BlockPattern make_pattern(int n_vars) const;
  FieldState make_state(int n_vars) const;

  // convenience views
  Eigen::Map<const MatrixXd> elem_coeffs(const VectorXd& u, int e, int n_vars) const {
    return {u.data() + static_cast<long>(e) * n_vars * n, n, n_vars};
  }
  Eigen::Map<MatrixXd> elem_coeffs(VectorXd& u, int e, int n_vars) const {
    return {u.data() + static_cast<long>(e) * n_vars * n, n, n_vars};
  }
};

Discretization build_discretization(const CurvedMesh& mesh, int k, int strength = -1,
                                    NormalMode normal_mode = NormalMode::FromGeometry);

/// A steady discrete system R(u) = 0 with analytic block Jacobian.
class DiscreteSystem {
 public:
  virtual ~DiscreteSystem() = default;
  virtual const Discretization& disc() const = 0;
  virtual int n_vars() const = 0;
  virtual std::string name() const = 0;
  int dofs() const { return disc().mesh->n_elements() * n_vars() * disc().n; }
  const BlockPattern& pattern() const { return pattern_; }

  /// Residual; returns false (leaving r unusable) if a nonphysical state was
  /// encountered, so globalization can back off.
  virtual bool residual(const VectorXd& u, VectorXd& r) const = 0;
  virtual void jacobian(const VectorXd& u, BlockSparseMatrix& jac) const = 0;
  /// True for systems whose residual is affine in u.
  virtual bool linear() const { return false; }

 protected:
  BlockPattern pattern_;
};

enum class JacobianMode { Analytic, FiniteDifference };

/// Assemble the Jacobian either analytically or by colored one-sided
/// differences of the residual.
BlockSparseMatrix assemble_jacobian(const DiscreteSystem& system, const VectorXd& u,
                                    JacobianMode mode);

// --------------------------------------------------------------- Poisson (IP)

/// Mixed-form interior-penalty discretization of  laplace(u) = s  with the
/// gradient equation defining q and penalty tau = eta k^2 / h_f.
class PoissonSystem : public DiscreteSystem {
 public:
  PoissonSystem(const Discretization& disc, const BoundaryMap& bc,
                std::function<double(const Vec2&)> source, double eta = 10.0);

  const Discretization& disc() const override { return *disc_; }
  int n_vars() const override { return 1; }
  std::string name() const override { return "poisson"; }
  bool residual(const VectorXd& u, VectorXd& r) const override;
  void jacobian(const VectorXd& u, BlockSparseMatrix& jac) const override;
  bool linear() const override { return true; }

  /// Gradient coefficients q of the mixed formulation for a given u.
  std::array<VectorXd, 2> recover_gradients(const VectorXd& u) const;
  const BlockSparseMatrix& matrix() const { return matrix_; }

 private:
  const Discretization* disc_;
  BoundaryMap bc_;
  std::function<double(const Vec2&)> source_;
  double eta_;
  BlockSparseMatrix matrix_;
  VectorXd constant_;  // residual = matrix * u + constant
  void assemble();
};

// ------------------------------------------------------------------ Euler

/// Weak-form Euler discretization with the Roe-Pike interface flux; the flux
/// is evaluated directly at the cubature nodes.
class EulerSystem : public DiscreteSystem {
 public:
  EulerSystem(const Discretization& disc, const BoundaryMap& bc, const GasModel& gas);

  const Discretization& disc() const override { return *disc_; }
  int n_vars() const override { return kNsVars; }
  std::string name() const override { return "euler"; }
  bool residual(const VectorXd& u, VectorXd& r) const override;
  void jacobian(const VectorXd& u, BlockSparseMatrix& jac) const override;
  const GasModel& gas() const { return gas_; }

 protected:
  const Discretization* disc_;
  BoundaryMap bc_;
  GasModel gas_;
  const BoundaryCondition& bc_for(const std::string& tag) const;
};

// ------------------------------------------------------------ Navier-Stokes

/// Mixed-form Navier-Stokes discretization: the gradient equation (central
/// traces) defines Q, the volume flux is F^i - F^v(W, Q), interface fluxes are
/// Roe-Pike plus the BR2 viscous flux with stabilization equal to the number
/// of element faces.
class NavierStokesSystem : public EulerSystem {
 public:
  NavierStokesSystem(const Discretization& disc, const BoundaryMap& bc, const GasModel& gas);

  std::string name() const override { return "navier_stokes"; }
  bool residual(const VectorXd& u, VectorXd& r) const override;
  void jacobian(const VectorXd& u, BlockSparseMatrix& jac) const override;

  /// Solve the gradient equation for Q at the given state.
  std::array<VectorXd, 2> recover_gradients(const VectorXd& u) const;

 private:
  double eta_br2_;
  bool face_traces(const VectorXd& u, std::vector<MatrixXd>& wl, std::vector<MatrixXd>& wr,
                   std::vector<MatrixXd>& wb, std::vector<MatrixXd>& wg) const;
  void gradients_from_traces(const VectorXd& u, const std::vector<MatrixXd>& wl,
                             const std::vector<MatrixXd>& wr, const std::vector<MatrixXd>& wb,
                             const std::vector<MatrixXd>& wg, std::array<VectorXd, 2>& q) const;
};

}  // namespace cdg
