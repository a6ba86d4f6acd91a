#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "curveddg/physics.hpp"

using namespace cdg;

namespace {

std::mt19937 rng(42);

State<double> random_physical_state() {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double rho = 0.5 + u01(rng);
  const double u = 2.0 * (u01(rng) - 0.5);
  const double v = 2.0 * (u01(rng) - 0.5);
  const double p = 0.5 + u01(rng);
  return conservative_from_primitives(rho, u, v, p, GasModel::inviscid());
}

template <int N, class F>
void check_dual_vs_fd(const F& f, const std::array<double, N>& x0, double tol) {
  // f: array<T,N> -> array<T,4>
  std::array<Dual<N>, N> seeded;
  for (int i = 0; i < N; ++i) seeded[i] = Dual<N>::seed(x0[i], i);
  const auto dual_out = f(seeded);
  for (int j = 0; j < N; ++j) {
    const double h = std::sqrt(1e-16) * (1.0 + std::abs(x0[j]));
    auto xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    std::array<double, N> xpd, xmd;
    for (int i = 0; i < N; ++i) {
      xpd[i] = xp[i];
      xmd[i] = xm[i];
    }
    const auto fp = f(xpd), fm = f(xmd);
    for (int c = 0; c < 4; ++c) {
      const double fd = (value(fp[c]) - value(fm[c])) / (2.0 * h);
      const double ad = dual_out[c].d[j];
      CHECK(std::abs(fd - ad) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("gas model invariants") {
  const GasModel gas = GasModel::viscous(1e-3);
  CHECK(gas.gamma > 1.0);
  CHECK(gas.R() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(gas.kappa() - gas.Cp * gas.mu / gas.Pr) < 1e-15);
  CHECK(gas.lambda2() == doctest::Approx(-2.0 * gas.mu / 3.0));
}

TEST_CASE("primitives and round trip") {
  const GasModel gas = GasModel::inviscid();
  // E = 1/(gamma (gamma-1)) at rest: p = 1/gamma and T = p/(rho R) = 1/gamma
  // (p and T coincide here because rho R = 1)
  {
    State<double> w{1.0, 0.0, 0.0, 1.0 / (gas.gamma * (gas.gamma - 1.0))};
    const auto pr = primitives(w, gas);
    CHECK(pr.p == doctest::Approx(1.0 / gas.gamma).epsilon(1e-15));
    CHECK(pr.temperature == doctest::Approx(pr.p / (pr.rho * gas.R())).epsilon(1e-15));
  }
  for (int it = 0; it < 50; ++it) {
    const auto w = random_physical_state();
    const auto pr = primitives(w, gas);
    const auto back = conservative_from_primitives(pr.rho, pr.u, pr.v, pr.p, gas);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(back[c] - w[c]) < 1e-14);
  }
  // vortex inner-wall state: local Mach = 2.25
  {
    const auto w = conservative_from_primitives(1.0, 2.25, 0.0, 1.0 / gas.gamma, gas);
    const auto pr = primitives(w, gas);
    const double a = std::sqrt(gas.gamma * pr.p / pr.rho);
    CHECK(std::abs(std::hypot(pr.u, pr.v) / a - 2.25) < 1e-14);
  }
  State<double> vacuum{-1.0, 0.0, 0.0, 1.0};
  CHECK_THROWS_AS(primitives(vacuum, gas), NonphysicalState);
}

TEST_CASE("inviscid flux") {
  const GasModel gas = GasModel::inviscid();
  {
    const auto w = conservative_from_primitives(1.0, 0.0, 0.0, 1.0, gas);
    State<double> fx, fy;
    inviscid_flux(w, gas, fx, fy);
    CHECK(fx[kRho] == 0.0);
    CHECK(fy[kRho] == 0.0);
    CHECK(fx[kEner] == 0.0);
    CHECK(fx[kMomX] == doctest::Approx(1.0));
    CHECK(fx[kMomY] == 0.0);
    CHECK(fy[kMomY] == doctest::Approx(1.0));
  }
  {
    const auto w = conservative_from_primitives(1.0, 1.0, 0.0, 1.0 / gas.gamma, gas);
    State<double> fx, fy;
    inviscid_flux(w, gas, fx, fy);
    CHECK(fx[kRho] == doctest::Approx(1.0));
    CHECK(fx[kMomX] == doctest::Approx(1.0 + 1.0 / gas.gamma));
  }
  // rotation equivariance
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (int it = 0; it < 20; ++it) {
    const auto w = random_physical_state();
    const double a = ang(rng);
    const double c = std::cos(a), s = std::sin(a);
    State<double> wr = w;
    wr[kMomX] = c * w[kMomX] - s * w[kMomY];
    wr[kMomY] = s * w[kMomX] + c * w[kMomY];
    State<double> fx, fy, fxr, fyr;
    inviscid_flux(w, gas, fx, fy);
    inviscid_flux(wr, gas, fxr, fyr);
    // flux of rotated state = rotated flux tensor: F'(:,d') = R F R^T structure
    for (int comp = 0; comp < 4; ++comp) {
      double expect_x, expect_y;
      if (comp == kMomX) {
        const double txx = c * fx[kMomX] - s * fx[kMomY], txy = c * fy[kMomX] - s * fy[kMomY];
        expect_x = c * txx - s * txy;
        expect_y = s * txx + c * txy;
        (void)expect_y;
        CHECK(std::abs(fxr[kMomX] - expect_x) < 1e-13);
        continue;
      }
      if (comp == kMomY || comp == kRho || comp == kEner) {
        // scalar rows rotate as vectors in the flux direction
        if (comp == kMomY) continue;
        expect_x = c * fx[comp] - s * fy[comp];
        expect_y = s * fx[comp] + c * fy[comp];
        CHECK(std::abs(fxr[comp] - expect_x) < 1e-13);
        CHECK(std::abs(fyr[comp] - expect_y) < 1e-13);
      }
    }
  }
}

TEST_CASE("viscous flux") {
  const GasModel gas = GasModel::viscous(0.7);
  const double mu = gas.mu;
  {
    const auto w = random_physical_state();
    Gradient<double> g{};
    State<double> fx, fy;
    viscous_flux(w, g, gas, fx, fy);
    for (int c = 0; c < 4; ++c) {
      CHECK(fx[c] == 0.0);
      CHECK(fy[c] == 0.0);
    }
  }
  {
    // shear v = (y, 0) at y = 0.3, constant rho = 1, T: Pi_12 = mu
    const double y = 0.3;
    const auto w = conservative_from_primitives(1.0, y, 0.0, 1.0, gas);
    Gradient<double> g{};
    g[1][kMomX] = 1.0;        // d(rho u)/dy
    g[1][kEner] = y;          // d(E)/dy from kinetic energy
    State<double> fx, fy;
    viscous_flux(w, g, gas, fx, fy);
    CHECK(fx[kMomY] == doctest::Approx(mu).epsilon(1e-14));
    CHECK(fy[kMomX] == doctest::Approx(mu).epsilon(1e-14));
    CHECK(fx[kMomX] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(fy[kMomY] == doctest::Approx(0.0).epsilon(1e-14));
    // energy row: Pi v (+ zero heat flux): fy_E = Pi_21 u
    CHECK(fy[kEner] == doctest::Approx(mu * y).epsilon(1e-13));
  }
  {
    // dilation v = (x, y) at (x0,y0): Pi = (2mu/3) I
    const double x0 = 0.2, y0 = -0.4;
    const auto w = conservative_from_primitives(1.0, x0, y0, 1.0, gas);
    Gradient<double> g{};
    g[0][kMomX] = 1.0;
    g[1][kMomY] = 1.0;
    g[0][kEner] = x0;
    g[1][kEner] = y0;
    State<double> fx, fy;
    viscous_flux(w, g, gas, fx, fy);
    CHECK(fx[kMomX] == doctest::Approx(2.0 * mu / 3.0).epsilon(1e-14));
    CHECK(fy[kMomY] == doctest::Approx(2.0 * mu / 3.0).epsilon(1e-14));
    CHECK(fx[kMomY] == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("roe flux: consistency, conservation, upwinding") {
  const GasModel gas = GasModel::inviscid();
  {
    // consistency at the vortex inner-wall state
    const auto w = conservative_from_primitives(1.0, 0.0, 2.25, 1.0 / gas.gamma, gas);
    const double nx = 1.0, ny = 0.0;
    const auto flux = roe_pike_flux(w, w, nx, ny, gas);
    State<double> fx, fy;
    inviscid_flux(w, gas, fx, fy);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(flux[c] - (fx[c] * nx + fy[c] * ny)) < 1e-14);
  }
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (int it = 0; it < 50; ++it) {
    const auto wl = random_physical_state();
    const auto wr = random_physical_state();
    const double a = ang(rng);
    const double nx = std::cos(a), ny = std::sin(a);
    const auto f1 = roe_pike_flux(wl, wr, nx, ny, gas);
    const auto f2 = roe_pike_flux(wr, wl, -nx, -ny, gas);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(f1[c] + f2[c]) < 1e-13);
  }
  {
    // supersonic normal flow left -> right: full upwinding
    const auto wl = conservative_from_primitives(1.1, 2.5, 0.3, 0.9, gas);
    const auto wr = conservative_from_primitives(0.9, 2.2, -0.1, 0.8, gas);
    const auto flux = roe_pike_flux(wl, wr, 1.0, 0.0, gas);
    State<double> fx, fy;
    inviscid_flux(wl, gas, fx, fy);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(flux[c] - fx[c]) < 1e-12);
  }
}

TEST_CASE("supersonic vortex exact solution") {
  const GasModel gas = GasModel::inviscid();
  const VortexParams vp;
  {
    const auto s = supersonic_vortex_exact(Vec2(1.0, 0.0), vp, gas);
    CHECK(s.rho == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.p == doctest::Approx(1.0 / gas.gamma).epsilon(1e-15));
    CHECK(std::hypot(s.u, s.v) == doctest::Approx(2.25).epsilon(1e-14));
  }
  std::uniform_real_distribution<double> rad(vp.r_i, vp.r_o), ang(0.0, M_PI / 2.0);
  const double s_ref = (1.0 / gas.gamma);
  for (int it = 0; it < 100; ++it) {
    const double r = rad(rng), th = ang(rng);
    const auto s = supersonic_vortex_exact(Vec2(r * std::cos(th), r * std::sin(th)), vp, gas);
    CHECK(std::abs(s.p / std::pow(s.rho, gas.gamma) - s_ref) < 1e-14);
    // radial velocity zero
    CHECK(std::abs(s.u * std::cos(th) + s.v * std::sin(th)) < 1e-14);
  }
  {
    const auto s = supersonic_vortex_exact(Vec2(1.384, 0.0), vp, gas);
    const double expect =
        std::pow(1.0 + 1.0125 * (1.0 - 1.0 / (1.384 * 1.384)), 2.5);
    CHECK(s.rho == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(supersonic_vortex_exact(Vec2(0.5, 0.0), vp, gas), Error);

  // steady Euler: FD divergence of the flux vanishes
  auto flux_at = [&](double x, double y, int c, int d) {
    const auto s = supersonic_vortex_exact(Vec2(x, y), vp, gas);
    const auto w = conservative_from_primitives(s.rho, s.u, s.v, s.p, gas);
    State<double> fx, fy;
    inviscid_flux(w, gas, fx, fy);
    return d == 0 ? fx[c] : fy[c];
  };
  std::uniform_real_distribution<double> rad_in(vp.r_i + 0.05, vp.r_o - 0.05),
      ang_in(0.15, M_PI / 2.0 - 0.15);
  for (int it = 0; it < 10; ++it) {
    const double r = rad_in(rng), th = ang_in(rng);
    const double x = r * std::cos(th), y = r * std::sin(th);
    const double h = 1e-3;
    for (int c = 0; c < 4; ++c) {
      const double dfx = (-flux_at(x + 2 * h, y, c, 0) + 8 * flux_at(x + h, y, c, 0) -
                          8 * flux_at(x - h, y, c, 0) + flux_at(x - 2 * h, y, c, 0)) /
                         (12 * h);
      const double dfy = (-flux_at(x, y + 2 * h, c, 1) + 8 * flux_at(x, y + h, c, 1) -
                          8 * flux_at(x, y - h, c, 1) + flux_at(x, y - 2 * h, c, 1)) /
                         (12 * h);
      CHECK(std::abs(dfx + dfy) < 1e-7);
    }
  }
}

TEST_CASE("taylor-couette exact solution") {
  const GasModel gas = GasModel::viscous(1e-3);
  const CouetteParams cp;
  CHECK(cp.C() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  {
    const auto s = taylor_couette_exact(Vec2(0.0, cp.r_o), cp, gas);
    CHECK(std::abs(s.v_theta) < 1e-15);
  }
  {
    const auto s = taylor_couette_exact(Vec2(cp.r_i, 0.0), cp, gas);
    CHECK(s.v_theta == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s.temperature == doctest::Approx(1.0).epsilon(1e-14));
  }
  {
    // adiabatic outer wall: dT/dr(r_o) = 0 by central difference of the
    // closed form (independent reimplementation, valid slightly past r_o)
    const double c = cp.C(), mk = gas.Pr / gas.Cp;
    auto t_formula = [&](double r) {
      return cp.T_i - c * c * mk *
                          (2.0 / (cp.r_o * cp.r_o) * std::log(r / cp.r_i) +
                           (1.0 / (r * r) - 1.0 / (cp.r_i * cp.r_i)));
    };
    CHECK(t_formula(0.8) ==
          doctest::Approx(taylor_couette_exact(Vec2(0.8, 0.0), cp, gas).temperature)
              .epsilon(1e-14));
    const double h = 5e-3;  // 6th-order stencil keeps truncation+roundoff < 1e-12
    const double dtdr =
        (-t_formula(cp.r_o - 3 * h) + 9 * t_formula(cp.r_o - 2 * h) -
         45 * t_formula(cp.r_o - h) + 45 * t_formula(cp.r_o + h) -
         9 * t_formula(cp.r_o + 2 * h) + t_formula(cp.r_o + 3 * h)) /
        (60 * h);
    CHECK(std::abs(dtdr) < 1e-12);
  }
}

TEST_CASE("cylindrical equation residuals (appendix oracle)") {
  const GasModel gas = GasModel::viscous(1e-3);
  const CouetteParams cp;
  {
    const auto res = cylindrical_equation_residuals(cp, gas, 0.75);
    CHECK(std::abs(res.dilation) < 1e-12);
    CHECK(std::abs(res.azimuthal_momentum) < 1e-8);
    CHECK(std::abs(res.energy) < 1e-8);
    CHECK(std::abs(res.angular_invariant) < 1e-8);
    CHECK(std::abs(res.illingworth) < 1e-8);
  }
  {
    // r^3 dw/dr constant between r = 0.6 and r = 0.9
    const auto r1 = cylindrical_equation_residuals(cp, gas, 0.6);
    const auto r2 = cylindrical_equation_residuals(cp, gas, 0.9);
    CHECK(std::abs(r1.angular_invariant - r2.angular_invariant) < 1e-8);
  }
  for (int i = 0; i < 20; ++i) {
    const double r = 0.55 + 0.4 * i / 19.0;
    const auto res = cylindrical_equation_residuals(cp, gas, r);
    CHECK(std::abs(res.azimuthal_momentum) < 1e-8);
    CHECK(std::abs(res.energy) < 1e-8);
    CHECK(std::abs(res.angular_invariant) < 1e-8);
    CHECK(std::abs(res.illingworth) < 1e-8);
  }
}

TEST_CASE("radial pressure table") {
  const CouetteParams cp;
  {
    const GasModel gas = GasModel::viscous(1e-3);
    RadialPressureTable table(cp, gas);
    CHECK(table.p_inner_wall() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(table.pressure(cp.r_i) == doctest::Approx(1.0).epsilon(1e-12));
    // monotone: dp/dr >= 0
    double prev = table.pressure(cp.r_i);
    for (int i = 1; i <= 50; ++i) {
      const double r = cp.r_i + (cp.r_o - cp.r_i) * i / 50.0;
      const double p = table.pressure(r);
      CHECK(p >= prev - 1e-14);
      prev = p;
    }
  }
  {
    // vanishing dissipation (tiny Pr): T = T_i, closed-form pressure
    const GasModel gas = GasModel::viscous(1e-3, 1e-30);
    RadialPressureTable table(cp, gas);
    auto integrand = [&](double r) {
      const auto s = taylor_couette_exact(Vec2(r, 0.0), cp, gas);
      return s.v_theta * s.v_theta / (gas.R() * cp.T_i * r);
    };
    // composite Gauss quadrature of the exponent
    for (double r_end : {0.7, 0.9, 1.0}) {
      double integral = 0.0;
      const int panels = 200;
      const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
      const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      for (int i = 0; i < panels; ++i) {
        const double a = cp.r_i + (r_end - cp.r_i) * i / panels;
        const double b = cp.r_i + (r_end - cp.r_i) * (i + 1) / panels;
        for (int q = 0; q < 3; ++q)
          integral += 0.5 * (b - a) * gw[q] * integrand(0.5 * (a + b) + 0.5 * (b - a) * gx[q]);
      }
      const double closed_form = table.p_inner_wall() * std::exp(integral);
      CHECK(table.pressure(r_end) == doctest::Approx(closed_form).epsilon(1e-9));
    }
  }
}

TEST_CASE("flux jacobians: dual numbers match finite differences") {
  const GasModel gas = GasModel::inviscid();
  const GasModel vgas = GasModel::viscous(0.01);
  for (int it = 0; it < 10; ++it) {
    const auto w = random_physical_state();
    std::array<double, 4> x0;
    for (int i = 0; i < 4; ++i) x0[i] = w[i];
    check_dual_vs_fd<4>(
        [&](const auto& in) {
          State<std::decay_t<decltype(in[0])>> fx, fy;
          inviscid_flux({in[0], in[1], in[2], in[3]}, gas, fx, fy);
          return fx;
        },
        x0, 1e-6);

    const auto wr = random_physical_state();
    std::array<double, 8> pair;
    for (int i = 0; i < 4; ++i) {
      pair[i] = w[i];
      pair[4 + i] = wr[i];
    }
    check_dual_vs_fd<8>(
        [&](const auto& in) {
          using T = std::decay_t<decltype(in[0])>;
          State<T> l{in[0], in[1], in[2], in[3]}, r{in[4], in[5], in[6], in[7]};
          return roe_pike_flux(l, r, 0.6, 0.8, gas);
        },
        pair, 1e-6);

    std::array<double, 12> wg;
    std::uniform_real_distribution<double> u01(-0.5, 0.5);
    for (int i = 0; i < 4; ++i) wg[i] = w[i];
    for (int i = 4; i < 12; ++i) wg[i] = u01(rng);
    check_dual_vs_fd<12>(
        [&](const auto& in) {
          using T = std::decay_t<decltype(in[0])>;
          State<T> s{in[0], in[1], in[2], in[3]};
          Gradient<T> g{};
          for (int d = 0; d < 2; ++d)
            for (int c = 0; c < 4; ++c) g[d][c] = in[4 + 4 * d + c];
          State<T> fx, fy;
          viscous_flux(s, g, vgas, fx, fy);
          return fx;
        },
        wg, 1e-6);
  }
}
