#include "curveddg/physics.hpp"

#include <algorithm>
#include <cmath>

namespace cdg {

void throw_nonphysical(double rho, double p) {
  throw NonphysicalState("nonphysical state: rho = " + std::to_string(rho) +
                         ", p (or a^2) = " + std::to_string(p));
}

FlowPrimitives supersonic_vortex_exact(const Vec2& x, const VortexParams& params,
                                       const GasModel& gas) {
  const double r = x.norm();
  // discrete-geometry evaluation points may undershoot the arcs slightly
  require(r >= 0.95 * params.r_i && r <= 1.05 * params.r_o,
          "supersonic_vortex_exact: radius ", r, " outside [", params.r_i, ", ", params.r_o, "]");
  const double gm1 = gas.gamma - 1.0;
  const double ratio = params.r_i / r;
  const double rho =
      params.rho_i *
      std::pow(1.0 + 0.5 * gm1 * params.mach_i * params.mach_i * (1.0 - ratio * ratio), 1.0 / gm1);
  const double p = std::pow(rho, gas.gamma) / gas.gamma;
  // speed M_i a_i r_i / r with a_i = 1 for the standard parameters; tangential,
  // counterclockwise
  const double a_i = std::sqrt(gas.gamma * (std::pow(params.rho_i, gas.gamma) / gas.gamma) /
                               params.rho_i);
  const double speed = params.mach_i * a_i * params.r_i / r;
  const double ct = x.x() / r, st = x.y() / r;
  return {rho, -st * speed, ct * speed, p};
}

CouetteState taylor_couette_exact(const Vec2& x, const CouetteParams& params, const GasModel& gas) {
  const double r = x.norm();
  require(r >= 0.95 * params.r_i && r <= 1.05 * params.r_o,
          "taylor_couette_exact: radius ", r, " outside [", params.r_i, ", ", params.r_o, "]");
  const double c = params.C();
  const double v_theta = c * r * (1.0 / (r * r) - 1.0 / (params.r_o * params.r_o));
  const double mu_over_kappa = gas.Pr / gas.Cp;  // kappa = Cp mu / Pr
  const double temperature =
      params.T_i - c * c * mu_over_kappa *
                       (2.0 / (params.r_o * params.r_o) * std::log(r / params.r_i) +
                        (1.0 / (r * r) - 1.0 / (params.r_i * params.r_i)));
  const double theta = std::atan2(x.y(), x.x());
  CouetteState out;
  out.u = -std::sin(theta) * v_theta;
  out.v = std::cos(theta) * v_theta;
  out.temperature = temperature;
  out.v_theta = v_theta;
  out.omega = v_theta / r;
  return out;
}

namespace {

// 7-point central finite-difference stencils, O(h^6).
template <class F>
double fd1(const F& f, double x, double h) {
  return (-f(x - 3 * h) + 9 * f(x - 2 * h) - 45 * f(x - h) + 45 * f(x + h) - 9 * f(x + 2 * h) +
          f(x + 3 * h)) /
         (60 * h);
}
template <class F>
double fd2(const F& f, double x, double h) {
  return (2 * f(x - 3 * h) - 27 * f(x - 2 * h) + 270 * f(x - h) - 490 * f(x) + 270 * f(x + h) -
          27 * f(x + 2 * h) + 2 * f(x + 3 * h)) /
         (180 * h * h);
}

}  // namespace

CylindricalResiduals cylindrical_equation_residuals(const CouetteParams& params,
                                                    const GasModel& gas, double r) {
  require(r > params.r_i && r < params.r_o, "cylindrical residuals: radius ", r,
          " not inside (", params.r_i, ", ", params.r_o, ")");
  auto state_at = [&](double rr) { return taylor_couette_exact(Vec2(rr, 0.0), params, gas); };
  auto vt = [&](double rr) { return state_at(rr).v_theta; };
  auto enthalpy = [&](double rr) { return gas.Cp * state_at(rr).temperature; };
  auto omega = [&](double rr) { return state_at(rr).omega; };

  // Nested stencils reach r +/- 6h; balance truncation against roundoff.
  const double h = std::min(std::min(r - params.r_i, params.r_o - r) / 8.0, 0.01);

  CylindricalResiduals res;
  // v_r = 0 and d/dtheta = 0, so the dilation has no surviving term.
  res.dilation = 0.0 + vt(r) * 0.0;
  res.azimuthal_momentum = fd2(vt, r, h) + fd1(vt, r, h) / r - vt(r) / (r * r);
  {
    // (1/(r Pr)) d/dr(r dh/dr) expanded to avoid nested stencils
    const double dh = fd1(enthalpy, r, h), d2h = fd2(enthalpy, r, h);
    const double dv = fd1(vt, r, h) - vt(r) / r;
    res.energy = (dh + r * d2h) / (r * gas.Pr) + dv * dv;
  }
  {
    auto ang = [&](double rr) { return rr * rr * rr * fd1(omega, rr, h); };
    const double r_ref = 0.5 * (params.r_i + params.r_o);
    res.angular_invariant = ang(r) - ang(r_ref);
  }
  {
    auto illing = [&](double rr) {
      return rr * (fd1(enthalpy, rr, h) + rr * rr * gas.Pr * omega(rr) * fd1(omega, rr, h));
    };
    const double r_ref = 0.5 * (params.r_i + params.r_o);
    res.illingworth = illing(r) - illing(r_ref);
  }
  return res;
}

RadialPressureTable::RadialPressureTable(const CouetteParams& params, const GasModel& gas,
                                         double tol)
    : params_(params), gas_(gas) {
  p_wall_ = params.rho_i * gas.R() * params.T_i;
  auto rhs = [&](double r, double p) {
    const CouetteState s = taylor_couette_exact(Vec2(r, 0.0), params_, gas_);
    const double rho = p / (gas_.R() * s.temperature);
    return rho * s.v_theta * s.v_theta / r;
  };
  // Adaptive RK45 (Cash-Karp) with dense output nodes at the accepted steps.
  double r = params.r_i, p = p_wall_, step = (params.r_o - params.r_i) / 64.0;
  r_.push_back(r);
  p_.push_back(p);
  dpdr_.push_back(rhs(r, p));
  static constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
  while (r < params.r_o - 1e-15) {
    step = std::min(step, params.r_o - r);
    const double k1 = rhs(r, p);
    const double k2 = rhs(r + a2 * step, p + step * 0.2 * k1);
    const double k3 = rhs(r + a3 * step, p + step * (3.0 / 40 * k1 + 9.0 / 40 * k2));
    const double k4 = rhs(r + a4 * step, p + step * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
    const double k5 =
        rhs(r + a5 * step, p + step * (-11.0 / 54 * k1 + 2.5 * k2 - 70.0 / 27 * k3 + 35.0 / 27 * k4));
    const double k6 =
        rhs(r + a6 * step, p + step * (1631.0 / 55296 * k1 + 175.0 / 512 * k2 + 575.0 / 13824 * k3 +
                                       44275.0 / 110592 * k4 + 253.0 / 4096 * k5));
    const double p5 = p + step * (37.0 / 378 * k1 + 250.0 / 621 * k3 + 125.0 / 594 * k4 +
                                  512.0 / 1771 * k6);
    const double p4 = p + step * (2825.0 / 27648 * k1 + 18575.0 / 48384 * k3 +
                                  13525.0 / 55296 * k4 + 277.0 / 14336 * k5 + 0.25 * k6);
    const double err = std::abs(p5 - p4);
    const double scale = tol * std::max(1.0, std::abs(p));
    if (err <= scale || step < 1e-12) {
      r += step;
      p = p5;
      r_.push_back(r);
      p_.push_back(p);
      dpdr_.push_back(rhs(r, p));
    }
    const double factor = err > 0 ? 0.9 * std::pow(scale / err, 0.2) : 2.0;
    step *= std::clamp(factor, 0.2, 2.0);
  }
}

double RadialPressureTable::pressure(double r) const {
  require(r >= 0.95 * params_.r_i && r <= 1.05 * params_.r_o,
          "radial pressure table: radius ", r, " outside the annulus");
  r = std::clamp(r, r_.front(), r_.back());
  const auto it = std::upper_bound(r_.begin(), r_.end(), r);
  const auto i1 = std::clamp<std::ptrdiff_t>(it - r_.begin(), 1, static_cast<std::ptrdiff_t>(r_.size()) - 1);
  const auto i0 = i1 - 1;
  const double w = r_[i1] - r_[i0];
  const double t = (r - r_[i0]) / w;
  // cubic Hermite with ODE-supplied slopes
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * p_[i0] + h10 * w * dpdr_[i0] + h01 * p_[i1] + h11 * w * dpdr_[i1];
}

double RadialPressureTable::density(double r) const {
  const CouetteState s = taylor_couette_exact(Vec2(r, 0.0), params_, gas_);
  return pressure(r) / (gas_.R() * s.temperature);
}

}  // namespace cdg
