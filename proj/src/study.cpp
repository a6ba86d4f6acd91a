#include "curveddg/study.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cdg {

std::vector<double> convergence_orders(const std::vector<double>& errors,
                                       const std::vector<double>& h) {
  require(errors.size() == h.size() && errors.size() >= 2,
          "convergence_orders: need two or more matching samples");
  std::vector<double> orders(errors.size() - 1);
  for (size_t i = 1; i < errors.size(); ++i) {
    require(h[i] > 0 && h[i - 1] > 0, "convergence_orders: h must be positive");
    require(errors[i] >= 0 && errors[i - 1] >= 0, "convergence_orders: errors must be >= 0");
    if (errors[i] == 0.0 || errors[i - 1] == 0.0)
      orders[i - 1] = std::numeric_limits<double>::quiet_NaN();  // undefined
    else
      orders[i - 1] = std::log(errors[i - 1] / errors[i]) / std::log(h[i - 1] / h[i]);
  }
  return orders;
}

namespace {

std::string sci(double v, int digits = 4) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits - 1) << v;
  return os.str();
}

std::string fixed3(double v) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

std::string render_table(const ConvergenceTable& table, TableFormat format) {
  require(!table.rows.empty(), "render_table: empty table");
  std::ostringstream os;
  const auto& vars = table.variables;
  if (format == TableFormat::Markdown) {
    os << "| Order (k) | Mesh Size (h) |";
    for (const auto& v : vars) os << " L2 " << v << " |";
    for (const auto& v : vars) os << " Order " << v << " |";
    os << "\n|";
    for (size_t c = 0; c < 2 + 2 * vars.size(); ++c) os << "---|";
    os << "\n";
    bool first = true;
    for (const auto& row : table.rows) {
      os << "| " << (first ? std::to_string(table.k) : "") << " | " << sci(row.h) << " |";
      if (row.failed) {
        for (size_t c = 0; c < 2 * vars.size(); ++c) os << " failed |";
      } else {
        for (double e : row.errors) os << " " << sci(e) << " |";
        if (row.orders.empty())
          for (size_t c = 0; c < vars.size(); ++c) os << " - |";
        else
          for (double o : row.orders) os << " " << fixed3(o) << " |";
      }
      os << "\n";
      first = false;
    }
  } else {
    os << "k,h";
    for (const auto& v : vars) os << ",l2_" << v;
    for (const auto& v : vars) os << ",order_" << v;
    os << "\n";
    for (const auto& row : table.rows) {
      os << table.k << "," << sci(row.h, 10);
      if (row.failed) {
        for (size_t c = 0; c < 2 * vars.size(); ++c) os << ",failed";
      } else {
        for (double e : row.errors) os << "," << sci(e, 10);
        if (row.orders.empty())
          for (size_t c = 0; c < vars.size(); ++c) os << ",";
        else
          for (double o : row.orders) os << "," << sci(o, 10);
      }
      os << "\n";
    }
  }
  return os.str();
}

// --------------------------------------------------------------- error norms

namespace {

struct ErrorQuadrature {
  ReferenceElement ref;
  GeometryMaps maps;
  MatrixXd sol_basis;  // solution basis at the error cubature points

  ErrorQuadrature(const Discretization& disc, int strength)
      : ref(disc.mesh->kind, disc.ref.order(),
            strength > 0 ? strength : 2 * disc.ref.order() + 2),
        maps(compute_geometry_maps(*disc.mesh, ref, disc.maps.normal_mode)),
        sol_basis(disc.ref.basis_at(ref.vol_pts())) {}
};

}  // namespace

ErrorReport poisson_l2_error(const Discretization& disc, const PoissonSystem& system,
                             const VectorXd& u,
                             const std::function<double(const Vec2&)>& exact_u,
                             const std::function<Vec2(const Vec2&)>& exact_grad,
                             int strength) {
  const ErrorQuadrature eq(disc, strength);
  const auto qc = system.recover_gradients(u);
  const int ne = disc.mesh->n_elements(), n = disc.n;
  double eu = 0.0, eq1 = 0.0, eq2 = 0.0;
  for (int e = 0; e < ne; ++e) {
    const VectorXd uv = eq.sol_basis * u.segment(static_cast<long>(e) * n, n);
    const VectorXd q1v = eq.sol_basis * qc[0].segment(static_cast<long>(e) * n, n);
    const VectorXd q2v = eq.sol_basis * qc[1].segment(static_cast<long>(e) * n, n);
    for (Eigen::Index q = 0; q < eq.ref.vol_w().size(); ++q) {
      const Vec2 x = eq.maps.xq[e].row(q).transpose();
      const double jw = eq.ref.vol_w()[q] * eq.maps.det_j[e][q];
      const Vec2 g = exact_grad(x);
      eu += jw * std::pow(uv[q] - exact_u(x), 2);
      eq1 += jw * std::pow(q1v[q] - g.x(), 2);
      eq2 += jw * std::pow(q2v[q] - g.y(), 2);
    }
  }
  ErrorReport rep;
  rep.variables = {"u", "q1", "q2"};
  rep.errors = {std::sqrt(eu), std::sqrt(eq1), std::sqrt(eq2)};
  rep.h = mesh_size_h(*disc.mesh);
  rep.n_elements = ne;
  rep.ar_realized = disc.mesh->ar_realized;
  return rep;
}

double entropy_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                     double entropy_ref, int strength) {
  const ErrorQuadrature eq(disc, strength);
  const int ne = disc.mesh->n_elements();
  double accum = 0.0, area = 0.0;
  for (int e = 0; e < ne; ++e) {
    const MatrixXd wv = eq.sol_basis * disc.elem_coeffs(w, e, kNsVars);
    for (Eigen::Index q = 0; q < eq.ref.vol_w().size(); ++q) {
      const double jw = eq.ref.vol_w()[q] * eq.maps.det_j[e][q];
      const auto pr = primitives(State<double>{wv(q, 0), wv(q, 1), wv(q, 2), wv(q, 3)}, gas);
      const double s = pr.p / std::pow(pr.rho, gas.gamma);
      accum += jw * std::pow((s - entropy_ref) / entropy_ref, 2);
      area += jw;
    }
  }
  return std::sqrt(accum / area);
}

ErrorReport euler_l2_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                           const std::function<FlowPrimitives(const Vec2&)>& exact,
                           double entropy_ref, int strength) {
  const ErrorQuadrature eq(disc, strength);
  const int ne = disc.mesh->n_elements();
  std::array<double, 4> acc{};
  for (int e = 0; e < ne; ++e) {
    const MatrixXd wv = eq.sol_basis * disc.elem_coeffs(w, e, kNsVars);
    for (Eigen::Index q = 0; q < eq.ref.vol_w().size(); ++q) {
      const Vec2 x = eq.maps.xq[e].row(q).transpose();
      const double jw = eq.ref.vol_w()[q] * eq.maps.det_j[e][q];
      const auto pr = primitives(State<double>{wv(q, 0), wv(q, 1), wv(q, 2), wv(q, 3)}, gas);
      const auto ex = exact(x);
      acc[0] += jw * std::pow(pr.rho - ex.rho, 2);
      acc[1] += jw * std::pow(pr.u - ex.u, 2);
      acc[2] += jw * std::pow(pr.v - ex.v, 2);
      acc[3] += jw * std::pow(pr.p - ex.p, 2);
    }
  }
  ErrorReport rep;
  rep.variables = {"rho", "u", "v", "p", "s"};
  rep.errors = {std::sqrt(acc[0]), std::sqrt(acc[1]), std::sqrt(acc[2]), std::sqrt(acc[3]),
                entropy_error(disc, w, gas, entropy_ref, strength)};
  rep.h = mesh_size_h(*disc.mesh);
  rep.n_elements = ne;
  rep.ar_realized = disc.mesh->ar_realized;
  return rep;
}

ErrorReport ns_l2_error(const Discretization& disc, const VectorXd& w, const GasModel& gas,
                        const std::function<CouetteState(const Vec2&)>& exact,
                        int strength) {
  const ErrorQuadrature eq(disc, strength);
  const int ne = disc.mesh->n_elements();
  std::array<double, 3> acc{};
  for (int e = 0; e < ne; ++e) {
    const MatrixXd wv = eq.sol_basis * disc.elem_coeffs(w, e, kNsVars);
    for (Eigen::Index q = 0; q < eq.ref.vol_w().size(); ++q) {
      const Vec2 x = eq.maps.xq[e].row(q).transpose();
      const double jw = eq.ref.vol_w()[q] * eq.maps.det_j[e][q];
      const auto pr = primitives(State<double>{wv(q, 0), wv(q, 1), wv(q, 2), wv(q, 3)}, gas);
      const auto ex = exact(x);
      acc[0] += jw * std::pow(pr.u - ex.u, 2);
      acc[1] += jw * std::pow(pr.v - ex.v, 2);
      acc[2] += jw * std::pow(pr.temperature - ex.temperature, 2);
    }
  }
  ErrorReport rep;
  rep.variables = {"u", "v", "T"};
  rep.errors = {std::sqrt(acc[0]), std::sqrt(acc[1]), std::sqrt(acc[2])};
  rep.h = mesh_size_h(*disc.mesh);
  rep.n_elements = ne;
  rep.ar_realized = disc.mesh->ar_realized;
  return rep;
}

// -------------------------------------------------------------- case pieces

AnnulusDomain case_domain(CaseKind kind) {
  if (kind == CaseKind::NsCouette) return {DomainKind::FullAnnulus, 0.5, 1.0};
  return {DomainKind::QuarterAnnulus, 1.0, 1.384};
}

GasModel case_gas(CaseKind kind, double mu) {
  if (kind == CaseKind::NsCouette) return GasModel::viscous(mu);
  return GasModel::inviscid();
}

namespace {

double poisson_exact_u(const Vec2& x) { return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()); }
Vec2 poisson_exact_grad(const Vec2& x) {
  return {M_PI * std::cos(M_PI * x.x()) * std::sin(M_PI * x.y()),
          M_PI * std::sin(M_PI * x.x()) * std::cos(M_PI * x.y())};
}
double poisson_source(const Vec2& x) { return -2.0 * M_PI * M_PI * poisson_exact_u(x); }

State<double> vortex_state(const Vec2& x, const GasModel& gas) {
  const auto pr = supersonic_vortex_exact(x, VortexParams{}, gas);
  return conservative_from_primitives(pr.rho, pr.u, pr.v, pr.p, gas);
}

}  // namespace

BoundaryMap case_boundary_conditions(CaseKind kind, const GasModel& gas, double mu) {
  BoundaryMap bc;
  switch (kind) {
    case CaseKind::Poisson: {
      BoundaryCondition dir;
      dir.kind = BCKind::Dirichlet;
      dir.g = poisson_exact_u;
      // Flux data of the true problem: the outward normal of the *exact*
      // domain (radial on the arc), regardless of the discrete geometry.
      BoundaryCondition neu_arc;
      neu_arc.kind = BCKind::Neumann;
      neu_arc.g_n = [](const Vec2& x, const Vec2&) {
        return poisson_exact_grad(x).dot(x.normalized());
      };
      BoundaryCondition neu_bottom;
      neu_bottom.kind = BCKind::Neumann;
      neu_bottom.g_n = [](const Vec2& x, const Vec2&) {
        return poisson_exact_grad(x).dot(Vec2(0.0, -1.0));
      };
      bc["inner"] = dir;
      bc["theta1"] = dir;
      bc["outer"] = neu_arc;
      bc["theta0"] = neu_bottom;
      break;
    }
    case CaseKind::EulerVortex: {
      BoundaryCondition wall;
      wall.kind = BCKind::SlipWall;
      BoundaryCondition far;
      far.kind = BCKind::RiemannInvariant;
      far.free_state = [gas](const Vec2& x) { return vortex_state(x, gas); };
      bc["inner"] = wall;
      bc["outer"] = wall;
      bc["theta0"] = far;
      bc["theta1"] = far;
      break;
    }
    case CaseKind::NsCouette: {
      const CouetteParams cp;
      BoundaryCondition inner;
      inner.kind = BCKind::NoSlipIsothermal;
      inner.T_wall = cp.T_i;
      inner.p_wall = cp.rho_i * gas.R() * cp.T_i;
      inner.wall_velocity = [cp](const Vec2& x) {
        return Vec2(-cp.omega_i * x.y(), cp.omega_i * x.x());
      };
      BoundaryCondition outer;
      outer.kind = BCKind::NoSlipAdiabatic;
      bc["inner"] = inner;
      bc["outer"] = outer;
      (void)mu;
      break;
    }
  }
  return bc;
}

VectorXd initial_state(CaseKind kind, const Discretization& disc, const GasModel& gas,
                       const std::string& init) {
  const int ne = disc.mesh->n_elements(), n = disc.n;
  if (kind == CaseKind::Poisson) return VectorXd::Zero(static_cast<long>(ne) * n);

  VectorXd u(static_cast<long>(ne) * kNsVars * n);
  const CouetteParams cp;
  std::optional<RadialPressureTable> ptable;
  if (kind == CaseKind::NsCouette) ptable.emplace(cp, gas);
  for (int e = 0; e < ne; ++e) {
    auto w = disc.elem_coeffs(u, e, kNsVars);
    for (int i = 0; i < n; ++i) {
      Vec2 x = disc.node_xy[e].row(i).transpose();
      State<double> s;
      if (kind == CaseKind::EulerVortex) {
        if (init == "uniform") x = Vec2(0.5 * (1.0 + 1.384), 0.0);
        s = vortex_state(x, gas);
      } else {
        if (init == "uniform") x = Vec2(0.75, 0.0);
        const auto cs = taylor_couette_exact(x, cp, gas);
        const double r = x.norm();
        const double p = ptable->pressure(r);
        const double rho = p / (gas.R() * cs.temperature);
        s = conservative_from_primitives(rho, cs.u, cs.v, p, gas);
      }
      for (int c = 0; c < kNsVars; ++c) w(i, c) = s[c];
    }
  }
  return u;
}

ErrorReport case_error_report(CaseKind kind, const Discretization& disc,
                              const DiscreteSystem& system, const VectorXd& u,
                              const GasModel& gas) {
  switch (kind) {
    case CaseKind::Poisson:
      return poisson_l2_error(disc, dynamic_cast<const PoissonSystem&>(system), u,
                              poisson_exact_u, poisson_exact_grad);
    case CaseKind::EulerVortex: {
      const double s_ref = (1.0 / gas.gamma);  // inner-surface state
      return euler_l2_error(
          disc, u, gas,
          [&gas](const Vec2& x) { return supersonic_vortex_exact(x, VortexParams{}, gas); },
          s_ref);
    }
    case CaseKind::NsCouette:
      return ns_l2_error(disc, u, gas, [&gas](const Vec2& x) {
        return taylor_couette_exact(x, CouetteParams{}, gas);
      });
  }
  fail("unknown case");
}

// ------------------------------------------------------------ study driver

StudyResult run_study(const StudyConfig& config) {
  StudyResult result;
  const AnnulusDomain domain = case_domain(config.case_kind);
  const GasModel gas = case_gas(config.case_kind, config.mu);

  for (int k : config.k_list) {
    ConvergenceTable table;
    table.k = k;
    table.policy = config.policy;
    table.k_g = geometry_order(config.policy, k);
    table.ar_target = config.ar;
    {
      std::ostringstream id;
      id << (config.case_kind == CaseKind::Poisson
                 ? "poisson"
                 : config.case_kind == CaseKind::EulerVortex ? "euler_vortex" : "ns_couette")
         << "_" << (config.element == ElementKind::Triangle ? "tri" : "quad") << "_k" << k
         << "_kg" << table.k_g << "_ar" << config.ar;
      table.case_id = id.str();
    }

    std::vector<double> hs;
    std::vector<std::vector<double>> errors;
    for (int level = config.level_start; level < config.level_start + config.levels; ++level) {
      ConvergenceRow row;
      try {
        const CurvedMesh mesh =
            generate_tobecurved_annulus(config.element, table.k_g, level, config.ar, domain);
        const int strength = 2 * k + config.over_integrate;
        const Discretization disc =
            build_discretization(mesh, k, strength, config.normal_mode);
        const BoundaryMap bc = case_boundary_conditions(config.case_kind, gas, config.mu);

        std::unique_ptr<DiscreteSystem> system;
        if (config.case_kind == CaseKind::Poisson)
          system = std::make_unique<PoissonSystem>(disc, bc, poisson_source);
        else if (config.case_kind == CaseKind::EulerVortex)
          system = std::make_unique<EulerSystem>(disc, bc, gas);
        else
          system = std::make_unique<NavierStokesSystem>(disc, bc, gas);

        const VectorXd u0 = initial_state(config.case_kind, disc, gas, config.init);
        auto [u, report] = newton_solve(*system, u0, config.solver);
        row.solve = report;
        if (!report.converged) {
          row.failed = true;
          row.h = mesh_size_h(mesh);
          row.n_elements = mesh.n_elements();
          table.rows.push_back(row);
          continue;
        }
        ErrorReport err = case_error_report(config.case_kind, disc, *system, u, gas);
        table.variables = err.variables;
        row.h = err.h;
        row.n_elements = err.n_elements;
        row.ar_realized = err.ar_realized;
        row.errors = err.errors;
        hs.push_back(err.h);
        errors.push_back(err.errors);
        if (hs.size() >= 2) {
          row.orders.resize(err.errors.size());
          const size_t m = hs.size();
          for (size_t v = 0; v < err.errors.size(); ++v) {
            const std::vector<double> ev{errors[m - 2][v], errors[m - 1][v]};
            const std::vector<double> hv{hs[m - 2], hs[m - 1]};
            row.orders[v] = convergence_orders(ev, hv)[0];
          }
        }
      } catch (const Error& err) {
        row.failed = true;
        row.solve.failure = err.what();
      }
      table.rows.push_back(row);
    }
    if (table.variables.empty())
      table.variables = config.case_kind == CaseKind::Poisson
                            ? std::vector<std::string>{"u", "q1", "q2"}
                            : config.case_kind == CaseKind::EulerVortex
                                  ? std::vector<std::string>{"rho", "u", "v", "p", "s"}
                                  : std::vector<std::string>{"u", "v", "T"};
    result.tables.push_back(std::move(table));
  }
  return result;
}

// ------------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  const auto b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(trim(item)));
  return out;
}

}  // namespace

StudyConfig parse_study_config(std::istream& is) {
  StudyConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line ", lineno, ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "case") {
      if (val == "poisson")
        cfg.case_kind = CaseKind::Poisson;
      else if (val == "euler_vortex")
        cfg.case_kind = CaseKind::EulerVortex;
      else if (val == "ns_couette")
        cfg.case_kind = CaseKind::NsCouette;
      else
        fail("config: unknown case '", val, "'");
    } else if (key == "element") {
      if (val == "tri")
        cfg.element = ElementKind::Triangle;
      else if (val == "quad")
        cfg.element = ElementKind::Quadrilateral;
      else
        fail("config: unknown element '", val, "'");
    } else if (key == "k") {
      cfg.k_list = parse_int_list(val);
    } else if (key == "kg_policy") {
      if (val == "sub")
        cfg.policy = KgPolicy::Sub;
      else if (val == "iso")
        cfg.policy = KgPolicy::Iso;
      else if (val == "super")
        cfg.policy = KgPolicy::Super;
      else
        fail("config: unknown kg_policy '", val, "'");
    } else if (key == "ar") {
      cfg.ar = std::stod(val);
    } else if (key == "levels") {
      cfg.levels = std::stoi(val);
    } else if (key == "level_start") {
      cfg.level_start = std::stoi(val);
    } else if (key == "mu") {
      cfg.mu = std::stod(val);
    } else if (key == "normal_mode") {
      if (val == "geometry")
        cfg.normal_mode = NormalMode::FromGeometry;
      else if (val == "exact")
        cfg.normal_mode = NormalMode::ExactAnnulus;
      else
        fail("config: unknown normal_mode '", val, "'");
    } else if (key == "over_integrate") {
      cfg.over_integrate = std::stoi(val);
    } else if (key == "init") {
      require(val == "exact" || val == "uniform", "config: unknown init '", val, "'");
      cfg.init = val;
    } else if (key == "output_dir") {
      cfg.output_dir = val;
    } else if (key == "write_svg") {
      cfg.write_svg = val == "true" || val == "1";
    } else if (key == "solver.linear") {
      if (val == "gmres")
        cfg.solver.linear = LinearSolverKind::GMRES;
      else if (val == "cg")
        cfg.solver.linear = LinearSolverKind::CG;
      else
        fail("config: unknown solver.linear '", val, "'");
    } else if (key == "solver.precond") {
      if (val == "none")
        cfg.solver.preconditioner = PreconditionerKind::None;
      else if (val == "block_jacobi")
        cfg.solver.preconditioner = PreconditionerKind::BlockJacobi;
      else if (val == "ilu0")
        cfg.solver.preconditioner = PreconditionerKind::ILU0;
      else
        fail("config: unknown solver.precond '", val, "'");
    } else if (key == "solver.restart") {
      cfg.solver.gmres_restart = std::stoi(val);
    } else if (key == "solver.max_newton") {
      cfg.solver.max_newton = std::stoi(val);
    } else if (key == "solver.abs_tol") {
      cfg.solver.abs_tol = std::stod(val);
    } else if (key == "solver.rel_tol") {
      cfg.solver.rel_tol = std::stod(val);
    } else if (key == "solver.linear_tol") {
      cfg.solver.linear_tol = std::stod(val);
    } else if (key == "solver.globalization") {
      if (val == "none")
        cfg.solver.globalization = Globalization::None;
      else if (val == "line_search")
        cfg.solver.globalization = Globalization::LineSearch;
      else if (val == "ptc")
        cfg.solver.globalization = Globalization::PseudoTransient;
      else
        fail("config: unknown solver.globalization '", val, "'");
    } else {
      fail("config line ", lineno, ": unknown key '", key, "'");
    }
  }
  require(!cfg.k_list.empty(), "config: empty k list");
  require(cfg.levels >= 1, "config: levels must be >= 1");
  return cfg;
}

StudyConfig parse_study_config_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config file: ", path);
  return parse_study_config(is);
}

}  // namespace cdg
