#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "curveddg/solver.hpp"
#include "curveddg/study.hpp"

using namespace cdg;
using nlohmann::json;

namespace {

ElementKind parse_kind(const std::string& s) {
  if (s == "tri") return ElementKind::Triangle;
  if (s == "quad") return ElementKind::Quadrilateral;
  fail("unknown element kind '", s, "' (expected tri or quad)");
}

CaseKind parse_case(const std::string& s) {
  if (s == "poisson") return CaseKind::Poisson;
  if (s == "euler_vortex") return CaseKind::EulerVortex;
  if (s == "ns_couette") return CaseKind::NsCouette;
  fail("unknown case '", s, "'");
}

AnnulusDomain parse_domain(const std::string& s, double ri, double ro) {
  AnnulusDomain d;
  d.kind = s == "full" ? DomainKind::FullAnnulus : DomainKind::QuarterAnnulus;
  d.r_inner = ri;
  d.r_outer = ro;
  return d;
}

json solve_report_json(const SolveReport& rep) {
  json j;
  j["converged"] = rep.converged;
  j["newton_iterations"] = rep.newton_iterations;
  j["residual_history"] = rep.residual_history;
  j["linear_iterations"] = rep.linear_iterations;
  j["wall_time_seconds"] = rep.wall_time_seconds;
  if (!rep.failure.empty()) j["failure"] = rep.failure;
  return j;
}

json table_json(const ConvergenceTable& t) {
  json j;
  j["case_id"] = t.case_id;
  j["k"] = t.k;
  j["k_g"] = t.k_g;
  j["ar_target"] = t.ar_target;
  j["variables"] = t.variables;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r;
    r["h"] = row.h;
    r["n_elements"] = row.n_elements;
    r["ar_realized"] = row.ar_realized;
    r["failed"] = row.failed;
    r["errors"] = row.errors;
    r["orders"] = row.orders;
    r["solve"] = solve_report_json(row.solve);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

int run_study_cmd(const std::string& config_path, const std::string& output_override) {
  StudyConfig cfg = parse_study_config_file(config_path);
  if (!output_override.empty()) cfg.output_dir = output_override;
  if (cfg.output_dir.empty()) cfg.output_dir = "study_out";
  std::filesystem::create_directories(cfg.output_dir);

  const StudyResult result = run_study(cfg);
  std::ofstream md(cfg.output_dir + "/table.md");
  std::ofstream csv(cfg.output_dir + "/table.csv");
  json report;
  report["tables"] = json::array();
  for (const auto& t : result.tables) {
    md << "## " << t.case_id << "\n\n" << render_table(t, TableFormat::Markdown) << "\n";
    csv << render_table(t, TableFormat::Csv);
    report["tables"].push_back(table_json(t));
    std::cout << "## " << t.case_id << "\n\n" << render_table(t, TableFormat::Markdown) << "\n";
  }
  std::ofstream(cfg.output_dir + "/report.json") << report.dump(2) << "\n";
  if (cfg.write_svg) {
    for (int k : cfg.k_list) {
      const auto mesh = generate_tobecurved_annulus(cfg.element, geometry_order(cfg.policy, k),
                                                    cfg.level_start, cfg.ar,
                                                    case_domain(cfg.case_kind));
      write_mesh_svg(mesh, cfg.output_dir + "/mesh_k" + std::to_string(k) + ".svg");
    }
  }
  std::cout << "outputs written to " << cfg.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curved-dg: discontinuous Galerkin solvers on curved annular meshes"};
  app.require_subcommand(1);

  // ----------------------------------------------------------------- study
  auto* study = app.add_subcommand("study", "run a refinement study from a config file");
  std::string config_path, output_dir;
  study->add_option("--config", config_path, "study config file")->required();
  study->add_option("--output-dir", output_dir, "override the config's output directory");

  // ------------------------------------------------------------------ mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "generate a curved annular mesh");
  std::string m_kind = "tri", m_domain = "quarter", m_out = "mesh.txt", m_svg;
  int m_kg = 2, m_level = 0;
  double m_ar = 1.0, m_ri = 1.0, m_ro = 1.384;
  mesh_cmd->add_option("--kind", m_kind, "tri or quad");
  mesh_cmd->add_option("--kg", m_kg, "geometry order");
  mesh_cmd->add_option("--level", m_level, "refinement level");
  mesh_cmd->add_option("--ar", m_ar, "target aspect ratio");
  mesh_cmd->add_option("--domain", m_domain, "quarter or full");
  mesh_cmd->add_option("--ri", m_ri, "inner radius");
  mesh_cmd->add_option("--ro", m_ro, "outer radius");
  mesh_cmd->add_option("--out", m_out, "output mesh file");
  mesh_cmd->add_option("--svg", m_svg, "also write an SVG wireframe");

  // ------------------------------------------------------------------- run
  auto* run_cmd = app.add_subcommand("run", "single solve: one case, one mesh");
  std::string r_case = "euler_vortex", r_kind = "tri", r_init = "exact", r_report;
  int r_k = 2, r_kg = -1, r_level = 1;
  double r_ar = 1.0, r_mu = 1e-3;
  bool r_exact_normals = false;
  int r_over = 0;
  run_cmd->add_option("--case", r_case, "poisson | euler_vortex | ns_couette");
  run_cmd->add_option("--element", r_kind, "tri or quad");
  run_cmd->add_option("--k", r_k, "solution order");
  run_cmd->add_option("--kg", r_kg, "geometry order (default: k)");
  run_cmd->add_option("--level", r_level, "refinement level");
  run_cmd->add_option("--ar", r_ar, "target aspect ratio");
  run_cmd->add_option("--mu", r_mu, "viscosity (ns_couette)");
  run_cmd->add_option("--init", r_init, "exact or uniform");
  run_cmd->add_option("--over-integrate", r_over, "raise cubature strength to 2k+D");
  run_cmd->add_flag("--exact-normals", r_exact_normals, "analytic boundary normals");
  run_cmd->add_option("--report", r_report, "write the solve report JSON here");

  // ---------------------------------------------------------- verify-exact
  auto* verify = app.add_subcommand("verify-exact", "exact-solution residual oracles");
  std::string v_case = "ns_couette";
  verify->add_option("--case", v_case, "ns_couette | euler_vortex");

  // ----------------------------------------------------------------- refel
  auto* refel = app.add_subcommand("refel", "reference element inspection");
  auto* dump = refel->add_subcommand("dump", "dump nodes and cubature as CSV");
  std::string d_kind = "tri", d_out;
  int d_k = 3, d_strength = -1;
  dump->add_option("--kind", d_kind, "tri or quad");
  dump->add_option("--k", d_k, "order");
  dump->add_option("--strength", d_strength, "cubature strength (default 2k)");
  dump->add_option("--out", d_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*study) return run_study_cmd(config_path, output_dir);

    if (*mesh_cmd) {
      const auto mesh = generate_tobecurved_annulus(parse_kind(m_kind), m_kg, m_level, m_ar,
                                                    parse_domain(m_domain, m_ri, m_ro));
      save_mesh(mesh, m_out);
      if (!m_svg.empty()) write_mesh_svg(mesh, m_svg);
      std::cout << "elements " << mesh.n_elements() << "  h " << mesh_size_h(mesh)
                << "  realized AR " << mesh.ar_realized << "  -> " << m_out << "\n";
      return 0;
    }

    if (*run_cmd) {
      const CaseKind ck = parse_case(r_case);
      const GasModel gas = case_gas(ck, r_mu);
      const int kg = r_kg > 0 ? r_kg : r_k;
      const auto mesh = generate_tobecurved_annulus(parse_kind(r_kind), kg, r_level, r_ar,
                                                    case_domain(ck));
      const auto disc = build_discretization(
          mesh, r_k, 2 * r_k + r_over,
          r_exact_normals ? NormalMode::ExactAnnulus : NormalMode::FromGeometry);
      const BoundaryMap bc = case_boundary_conditions(ck, gas, r_mu);
      std::unique_ptr<DiscreteSystem> system;
      if (ck == CaseKind::Poisson)
        system = std::make_unique<PoissonSystem>(disc, bc, [](const Vec2& x) {
          return -2.0 * M_PI * M_PI * std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
        });
      else if (ck == CaseKind::EulerVortex)
        system = std::make_unique<EulerSystem>(disc, bc, gas);
      else
        system = std::make_unique<NavierStokesSystem>(disc, bc, gas);
      NewtonConfig ncfg;
      ncfg.preconditioner = PreconditionerKind::ILU0;
      ncfg.rel_tol = 1e-16;
      if (r_init == "uniform") ncfg.globalization = Globalization::PseudoTransient;
      const VectorXd u0 = initial_state(ck, disc, gas, r_init);
      auto [u, rep] = newton_solve(*system, u0, ncfg);
      std::cout << (rep.converged ? "converged" : "FAILED") << " in " << rep.newton_iterations
                << " Newton iterations, final residual "
                << (rep.residual_history.empty() ? 0.0 : rep.residual_history.back()) << "\n";
      const ErrorReport err = case_error_report(ck, disc, *system, u, gas);
      for (size_t i = 0; i < err.variables.size(); ++i)
        std::cout << "  L2 " << err.variables[i] << " = " << err.errors[i] << "\n";
      if (!r_report.empty()) {
        json j = solve_report_json(rep);
        j["h"] = err.h;
        j["n_elements"] = err.n_elements;
        j["errors"] = err.errors;
        j["variables"] = err.variables;
        std::ofstream(r_report) << j.dump(2) << "\n";
      }
      return rep.converged ? 0 : 1;
    }

    if (*verify) {
      std::cout.precision(3);
      std::cout << std::scientific;
      if (v_case == "ns_couette") {
        const GasModel gas = GasModel::viscous(1e-3);
        const CouetteParams cp;
        std::cout << "annular flow equation residuals (finite-difference oracle):\n";
        std::cout << "      r   dilation  azim.mom    energy  r^3 dw/dr  illingworth\n";
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
          const double r = 0.55 + 0.4 * i / 19.0;
          const auto res = cylindrical_equation_residuals(cp, gas, r);
          std::cout << "  " << r << "  " << res.dilation << "  " << res.azimuthal_momentum
                    << "  " << res.energy << "  " << res.angular_invariant << "  "
                    << res.illingworth << "\n";
          worst = std::max({worst, std::abs(res.azimuthal_momentum), std::abs(res.energy),
                            std::abs(res.angular_invariant), std::abs(res.illingworth)});
        }
        RadialPressureTable table(cp, gas);
        std::cout << "inner-wall pressure " << table.p_inner_wall() << ", outer pressure "
                  << table.pressure(cp.r_o) << "\n";
        std::cout << "worst residual " << worst << (worst <= 1e-8 ? "  (PASS)" : "  (FAIL)")
                  << "\n";
        return worst <= 1e-8 ? 0 : 1;
      }
      if (v_case == "euler_vortex") {
        const GasModel gas = GasModel::inviscid();
        const VortexParams vp;
        double worst = 0.0;
        std::cout << "steady Euler residual of the vortex (finite-difference divergence):\n";
        for (int i = 0; i < 10; ++i) {
          const double r = vp.r_i + 0.06 + (vp.r_o - vp.r_i - 0.12) * i / 9.0;
          const double th = 0.2 + 1.1 * i / 9.0;
          const Vec2 x(r * std::cos(th), r * std::sin(th));
          const double h = 1e-3;
          for (int c = 0; c < kNsVars; ++c) {
            auto flux = [&](double xx, double yy, int dim) {
              const auto pr = supersonic_vortex_exact(Vec2(xx, yy), vp, gas);
              const auto w = conservative_from_primitives(pr.rho, pr.u, pr.v, pr.p, gas);
              State<double> fx, fy;
              inviscid_flux(w, gas, fx, fy);
              return dim == 0 ? fx[c] : fy[c];
            };
            const double div =
                (-flux(x.x() + 2 * h, x.y(), 0) + 8 * flux(x.x() + h, x.y(), 0) -
                 8 * flux(x.x() - h, x.y(), 0) + flux(x.x() - 2 * h, x.y(), 0)) /
                    (12 * h) +
                (-flux(x.x(), x.y() + 2 * h, 1) + 8 * flux(x.x(), x.y() + h, 1) -
                 8 * flux(x.x(), x.y() - h, 1) + flux(x.x(), x.y() - 2 * h, 1)) /
                    (12 * h);
            worst = std::max(worst, std::abs(div));
          }
        }
        std::cout << "worst |div F| " << worst << (worst <= 1e-7 ? "  (PASS)" : "  (FAIL)")
                  << "\n";
        return worst <= 1e-7 ? 0 : 1;
      }
      fail("unknown verify case '", v_case, "'");
    }

    if (*refel && *dump) {
      const auto ref = build_reference_element(parse_kind(d_kind), d_k,
                                               d_strength > 0 ? d_strength : 2 * d_k);
      std::ostringstream os;
      os.precision(17);
      os << "section,index,r,s,w\n";
      for (int i = 0; i < ref.n_nodes(); ++i)
        os << "node," << i << "," << ref.nodes()(i, 0) << "," << ref.nodes()(i, 1) << ",\n";
      for (int q = 0; q < ref.vol_pts().rows(); ++q)
        os << "volume_cubature," << q << "," << ref.vol_pts()(q, 0) << "," << ref.vol_pts()(q, 1)
           << "," << ref.vol_w()[q] << "\n";
      for (int q = 0; q < ref.face_cub().x.size(); ++q)
        os << "face_cubature," << q << "," << ref.face_cub().x[q] << ",," << ref.face_cub().w[q]
           << "\n";
      if (d_out.empty())
        std::cout << os.str();
      else
        std::ofstream(d_out) << os.str();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
