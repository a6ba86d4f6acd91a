#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "curveddg/dual.hpp"
#include "curveddg/types.hpp"

namespace cdg {

/// Calorically ideal gas with constant viscosity; zero bulk viscosity, so the
/// second viscosity coefficient is -2mu/3 and kappa = Cp mu / Pr.
struct GasModel {
  double gamma = 1.4;
  double Pr = 0.72;
  double Cp = 1.4 / 0.4;  // gamma/(gamma-1) makes R = 1
  double mu = 0.0;

  double R() const { return Cp * (gamma - 1.0) / gamma; }
  double Cv() const { return Cp / gamma; }
  double kappa() const { return Cp * mu / Pr; }
  double lambda2() const { return -2.0 * mu / 3.0; }

  static GasModel inviscid() { return GasModel{}; }
  static GasModel viscous(double mu_, double Pr_ = 0.72, double gamma_ = 1.4) {
    GasModel g;
    g.gamma = gamma_;
    g.Pr = Pr_;
    g.Cp = gamma_ / (gamma_ - 1.0);
    g.mu = mu_;
    return g;
  }
};

// Conservative state component order used throughout.
inline constexpr int kRho = 0, kMomX = 1, kMomY = 2, kEner = 3;
inline constexpr int kNsVars = 4;

template <class T>
using State = std::array<T, kNsVars>;
template <class T>
using Gradient = std::array<State<T>, 2>;  // [dim][var]

template <class T>
struct Primitives {
  T rho, u, v, p, temperature;
};

struct NonphysicalState : Error {
  explicit NonphysicalState(const std::string& what) : Error(what) {}
};

[[noreturn]] void throw_nonphysical(double rho, double p);

/// Primitive variables from conservative; throws NonphysicalState for
/// rho <= 0 or p <= 0 (only the values are inspected, so Dual works too).
template <class T>
Primitives<T> primitives(const State<T>& w, const GasModel& gas) {
  Primitives<T> pr;
  pr.rho = w[kRho];
  pr.u = w[kMomX] / w[kRho];
  pr.v = w[kMomY] / w[kRho];
  pr.p = (gas.gamma - 1.0) * (w[kEner] - 0.5 * (w[kMomX] * pr.u + w[kMomY] * pr.v));
  if (!(value(pr.rho) > 0.0) || !(value(pr.p) > 0.0)) throw_nonphysical(value(pr.rho), value(pr.p));
  pr.temperature = pr.p / (pr.rho * gas.R());
  return pr;
}

template <class T>
State<T> conservative_from_primitives(const T& rho, const T& u, const T& v, const T& p,
                                      const GasModel& gas) {
  State<T> w;
  w[kRho] = rho;
  w[kMomX] = rho * u;
  w[kMomY] = rho * v;
  w[kEner] = p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v);
  return w;
}

/// Columns [rho v, rho v (x) v + p I, (E + p) v] of the inviscid flux.
template <class T>
void inviscid_flux(const State<T>& w, const GasModel& gas, State<T>& fx, State<T>& fy) {
  const Primitives<T> pr = primitives(w, gas);
  const T ep = w[kEner] + pr.p;
  fx[kRho] = w[kMomX];
  fx[kMomX] = w[kMomX] * pr.u + pr.p;
  fx[kMomY] = w[kMomY] * pr.u;
  fx[kEner] = ep * pr.u;
  fy[kRho] = w[kMomY];
  fy[kMomX] = w[kMomX] * pr.v;
  fy[kMomY] = w[kMomY] * pr.v + pr.p;
  fy[kEner] = ep * pr.v;
}

/// Viscous flux from conservative variables and their gradients; velocity and
/// temperature gradients are recovered by the chain rule.  The energy row is
/// Pi v + kappa grad T (so the assembled equations carry F = F^i - F^v).
/// `drop_heat_flux` zeroes the conductive part (adiabatic wall faces).
template <class T>
void viscous_flux(const State<T>& w, const Gradient<T>& g, const GasModel& gas, State<T>& fx,
                  State<T>& fy, bool drop_heat_flux = false) {
  const Primitives<T> pr = primitives(w, gas);
  const T inv_rho = 1.0 / w[kRho];
  // du/dx_d = (d(rho u)/dx_d - u d(rho)/dx_d) / rho
  const T ux = (g[0][kMomX] - pr.u * g[0][kRho]) * inv_rho;
  const T uy = (g[1][kMomX] - pr.u * g[1][kRho]) * inv_rho;
  const T vx = (g[0][kMomY] - pr.v * g[0][kRho]) * inv_rho;
  const T vy = (g[1][kMomY] - pr.v * g[1][kRho]) * inv_rho;
  const T div = ux + vy;
  const T pixx = 2.0 * gas.mu * (ux - div / 3.0);
  const T piyy = 2.0 * gas.mu * (vy - div / 3.0);
  const T pixy = gas.mu * (uy + vx);
  // dT/dx_d via de/dx_d with e = E/rho - |v|^2/2 and T = e/Cv
  const T ex =
      (g[0][kEner] - w[kEner] * inv_rho * g[0][kRho]) * inv_rho - pr.u * ux - pr.v * vx;
  const T ey =
      (g[1][kEner] - w[kEner] * inv_rho * g[1][kRho]) * inv_rho - pr.u * uy - pr.v * vy;
  // kappa dT/dx = (kappa/Cv) de/dx for the calorically ideal gas
  const double k_over_cv = drop_heat_flux ? 0.0 : gas.kappa() / gas.Cv();
  const T qx = k_over_cv * ex;
  const T qy = k_over_cv * ey;
  fx[kRho] = 0.0;
  fx[kMomX] = pixx;
  fx[kMomY] = pixy;
  fx[kEner] = pixx * pr.u + pixy * pr.v + qx;
  fy[kRho] = 0.0;
  fy[kMomX] = pixy;
  fy[kMomY] = piyy;
  fy[kEner] = pixy * pr.u + piyy * pr.v + qy;
}

/// Roe-Pike approximate Riemann flux in direction n (unit), with a
/// Harten-type entropy fix on the acoustic waves.
template <class T>
State<T> roe_pike_flux(const State<T>& wl, const State<T>& wr, double nx, double ny,
                       const GasModel& gas) {
  const Primitives<T> l = primitives(wl, gas);
  const Primitives<T> r = primitives(wr, gas);

  const T sl = sqrt(l.rho), sr = sqrt(r.rho);
  const T inv = 1.0 / (sl + sr);
  const T rho = sl * sr;
  const T u = (sl * l.u + sr * r.u) * inv;
  const T v = (sl * l.v + sr * r.v) * inv;
  const T hl = (wl[kEner] + l.p) / l.rho, hr = (wr[kEner] + r.p) / r.rho;
  const T h = (sl * hl + sr * hr) * inv;
  const T a2 = (gas.gamma - 1.0) * (h - 0.5 * (u * u + v * v));
  if (!(value(a2) > 0.0)) throw_nonphysical(value(rho), value(a2));
  const T a = sqrt(a2);

  const T un = u * nx + v * ny;
  const double tx = -ny, ty = nx;
  const T ut = u * tx + v * ty;

  const T dp = r.p - l.p;
  const T dun = (r.u - l.u) * nx + (r.v - l.v) * ny;
  const T dut = (r.u - l.u) * tx + (r.v - l.v) * ty;
  const T drho = r.rho - l.rho;

  const T alpha1 = (dp - rho * a * dun) / (2.0 * a2);
  const T alpha2 = drho - dp / a2;
  const T alpha3 = rho * dut;
  const T alpha4 = (dp + rho * a * dun) / (2.0 * a2);

  // Harten entropy fix on the acoustic speeds.
  const T delta = 0.1 * (abs(un) + a);
  auto fixed_abs = [&delta](const T& lam) {
    const T al = abs(lam);
    if (value(al) >= value(delta)) return al;
    return (lam * lam + delta * delta) / (2.0 * delta);
  };
  const T l1 = fixed_abs(un - a);
  const T l2 = abs(un);
  const T l4 = fixed_abs(un + a);

  State<T> k1{T(1.0), u - a * nx, v - a * ny, h - a * un};
  State<T> k2{T(1.0), u, v, 0.5 * (u * u + v * v)};
  State<T> k3{T(0.0), T(tx), T(ty), ut};
  State<T> k4{T(1.0), u + a * nx, v + a * ny, h + a * un};

  State<T> fxl, fyl, fxr, fyr;
  inviscid_flux(wl, gas, fxl, fyl);
  inviscid_flux(wr, gas, fxr, fyr);

  State<T> flux;
  for (int c = 0; c < kNsVars; ++c) {
    flux[c] = 0.5 * (fxl[c] * nx + fyl[c] * ny + fxr[c] * nx + fyr[c] * ny) -
              0.5 * (alpha1 * l1 * k1[c] + alpha2 * l2 * k2[c] + alpha3 * l2 * k3[c] +
                     alpha4 * l4 * k4[c]);
  }
  return flux;
}

// ------------------------------------------------------------ exact solutions

/// Isentropic supersonic vortex in a quarter annulus; inner-surface density
/// and Mach number fix the whole field.
struct VortexParams {
  double r_i = 1.0;
  double r_o = 1.384;
  double rho_i = 1.0;
  double mach_i = 2.25;
};

struct FlowPrimitives {
  double rho, u, v, p;
};

FlowPrimitives supersonic_vortex_exact(const Vec2& x, const VortexParams& params,
                                       const GasModel& gas);

/// Rotating compressible Couette flow between concentric cylinders
/// (inner wall spinning at omega_i, outer wall at rest, adiabatic outside).
struct CouetteParams {
  double r_i = 0.5;
  double r_o = 1.0;
  double T_i = 1.0;
  double omega_i = 1.0;
  double rho_i = 1.0;

  double C() const { return omega_i / (1.0 / (r_i * r_i) - 1.0 / (r_o * r_o)); }
};

struct CouetteState {
  double u, v, temperature;
  double v_theta, omega;
};

CouetteState taylor_couette_exact(const Vec2& x, const CouetteParams& params, const GasModel& gas);

/// Verification oracle: residuals of the steady compressible flow equations
/// in polar coordinates, evaluated on the Couette solution with high-order
/// finite differences in r.  All entries should vanish to FD accuracy.
struct CylindricalResiduals {
  double dilation;             // velocity divergence
  double azimuthal_momentum;   // v'' + v'/r - v/r^2
  double energy;               // (1/(r Pr)) (r h')' + (v' - v/r)^2
  double angular_invariant;    // deviation of r^3 dw/dr from its reference value
  double illingworth;          // deviation of r (h' + r^2 Pr w w') from reference
};

CylindricalResiduals cylindrical_equation_residuals(const CouetteParams& params,
                                                    const GasModel& gas, double r);

/// Radial pressure distribution p(r) of the Couette solution from
/// rho v^2 / r = dp/dr with rho = p/(R T(r)); adaptive RK integration from
/// p(r_i) = rho_i R T_i.  Diagnostic and boundary-value use only.
class RadialPressureTable {
 public:
  RadialPressureTable(const CouetteParams& params, const GasModel& gas, double tol = 1e-12);
  double pressure(double r) const;
  double density(double r) const;
  double p_inner_wall() const { return p_wall_; }

 private:
  CouetteParams params_;
  GasModel gas_;
  double p_wall_;
  std::vector<double> r_, p_, dpdr_;
};

}  // namespace cdg
