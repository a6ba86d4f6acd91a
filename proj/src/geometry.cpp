#include "curveddg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cdg {

Vec2 annulus_map(double rho_hat, double theta_hat, const AnnulusDomain& domain) {
  const double r = domain.r_inner + rho_hat * (domain.r_outer - domain.r_inner);
  const double theta =
      domain.theta_start() + theta_hat * (domain.theta_end() - domain.theta_start());
  return {r * std::cos(theta), r * std::sin(theta)};
}

void CurvedMesh::rotate(double angle) {
  Mat2 rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  for (auto& x : elements) x = (rot * x.transpose()).transpose();
}

namespace {

struct BaseCounts {
  int n_rho, n_theta;
};

// Pick the parameter-grid base counts whose per-cell box ratio (arc width /
// radial height at mid radius) best matches the requested aspect ratio.
BaseCounts choose_base_counts(double ar_target, const AnnulusDomain& domain) {
  const double r_mid = 0.5 * (domain.r_inner + domain.r_outer);
  const double arc = (domain.theta_end() - domain.theta_start()) * r_mid;
  const double depth = domain.r_outer - domain.r_inner;
  const int min_theta = domain.kind == DomainKind::FullAnnulus ? 3 : 1;

  BaseCounts best{0, 0};
  double best_err = std::numeric_limits<double>::infinity();
  long best_cells = std::numeric_limits<long>::max();
  for (int nr = 1; nr <= 64; ++nr) {
    const double nt_ideal = nr * arc / (depth * ar_target);
    for (int nt : {static_cast<int>(std::floor(nt_ideal)), static_cast<int>(std::ceil(nt_ideal))}) {
      if (nt < min_theta) nt = min_theta;
      const double ratio = (arc / nt) / (depth / nr);
      const double err = std::abs(std::log(ratio / ar_target));
      const long cells = static_cast<long>(nr) * nt;
      const bool close = err < 0.12, best_close = best_err < 0.12;
      // prefer any close-enough grid with fewer cells; otherwise minimal error
      const bool better = close ? (!best_close || cells < best_cells ||
                                   (cells == best_cells && err < best_err))
                                : (!best_close && err < best_err);
      if (better) {
        best = {nr, nt};
        best_err = err;
        best_cells = cells;
      }
    }
  }
  require(best.n_rho > 0 && best_err < std::log(2.0),
          "aspect-ratio target ", ar_target, " unreachable on this domain");
  return best;
}

long lattice_key(int i, int j, int stride) { return static_cast<long>(i) * stride + j; }

}  // namespace

CurvedMesh generate_tobecurved_annulus(ElementKind kind, int k_g, int level, double ar_target,
                                       const AnnulusDomain& domain) {
  require(k_g >= 1, "geometry order must be >= 1, got ", k_g);
  require(level >= 0, "refinement level must be >= 0, got ", level);
  require(ar_target > 0, "aspect-ratio target must be positive");
  require(domain.r_outer > domain.r_inner && domain.r_inner > 0, "need 0 < r_inner < r_outer");

  const BaseCounts base = choose_base_counts(ar_target, domain);
  const int n_rho = base.n_rho << level;
  const int n_theta = base.n_theta << level;
  const bool wrap = domain.kind == DomainKind::FullAnnulus;

  CurvedMesh mesh;
  mesh.kind = kind;
  mesh.k_g = k_g;
  mesh.domain = domain;
  mesh.ar_nominal = ar_target;
  mesh.n_rho = n_rho;
  mesh.n_theta = n_theta;

  const MatrixXd ref_nodes = equispaced_nodes(kind, k_g);
  const int n_nodes = static_cast<int>(ref_nodes.rows());
  const int nf = n_faces_of(kind);

  // Directed face endpoint lattice keys per element for connectivity.
  std::vector<std::array<std::pair<long, long>, 4>> face_keys;
  const int key_stride = n_theta + 1;

  auto add_element = [&](const std::vector<Vec2>& corners_param,
                         const std::vector<std::pair<int, int>>& corners_lattice) {
    // Geometry nodes curve the straight element: the radius comes from the
    // parameter-space radial coordinate (arc nodes land exactly on the
    // circles) while the angle is taken from the straight element's chord,
    // as a curved-from-linear mesh pipeline produces.
    std::vector<Vec2> corners_phys(corners_param.size());
    for (size_t c = 0; c < corners_param.size(); ++c)
      corners_phys[c] = annulus_map(corners_param[c].x(), corners_param[c].y(), domain);
    const int nc = static_cast<int>(corners_param.size());
    std::vector<double> weights(nc);
    MatrixXd coords(n_nodes, 2);
    for (int i = 0; i < n_nodes; ++i) {
      const double r = ref_nodes(i, 0), s = ref_nodes(i, 1);
      if (kind == ElementKind::Triangle) {
        weights = {-0.5 * (r + s), 0.5 * (1 + r), 0.5 * (1 + s)};
      } else {
        weights = {0.25 * (1 - r) * (1 - s), 0.25 * (1 + r) * (1 - s),
                   0.25 * (1 + r) * (1 + s), 0.25 * (1 - r) * (1 + s)};
      }
      Vec2 p = Vec2::Zero(), xs = Vec2::Zero();
      for (int c = 0; c < nc; ++c) {
        p += weights[c] * corners_param[c];
        xs += weights[c] * corners_phys[c];
      }
      const double radius = domain.r_inner + p.x() * (domain.r_outer - domain.r_inner);
      const double theta = std::atan2(xs.y(), xs.x());
      coords(i, 0) = radius * std::cos(theta);
      coords(i, 1) = radius * std::sin(theta);
    }
    mesh.elements.push_back(std::move(coords));
    std::array<std::pair<long, long>, 4> keys{};
    for (int f = 0; f < nf; ++f) {
      const auto [i0, j0] = corners_lattice[f];
      const auto [i1, j1] = corners_lattice[(f + 1) % nf];
      const int j0w = wrap ? j0 % n_theta : j0;
      const int j1w = wrap ? j1 % n_theta : j1;
      keys[f] = {lattice_key(i0, j0w, key_stride), lattice_key(i1, j1w, key_stride)};
    }
    face_keys.push_back(keys);
  };

  // uniform parameter lattice; for the full annulus the periodic column is
  // one full period past the first so the seam nodes coincide
  std::vector<std::vector<Vec2>> lattice(n_rho + 1, std::vector<Vec2>(n_theta + 1));
  for (int i = 0; i <= n_rho; ++i)
    for (int j = 0; j <= n_theta; ++j)
      lattice[i][j] = {static_cast<double>(i) / n_rho, static_cast<double>(j) / n_theta};

  const auto build_elements = [&]() {
    mesh.elements.clear();
    face_keys.clear();
    for (int j = 0; j < n_theta; ++j) {
      for (int i = 0; i < n_rho; ++i) {
        const Vec2 p00 = lattice[i][j], p10 = lattice[i + 1][j], p11 = lattice[i + 1][j + 1],
                   p01 = lattice[i][j + 1];
        const std::pair<int, int> l00{i, j}, l10{i + 1, j}, l11{i + 1, j + 1}, l01{i, j + 1};
        if (kind == ElementKind::Quadrilateral) {
          add_element({p00, p10, p11, p01}, {l00, l10, l11, l01});
        } else {
          // fixed lower-left -> upper-right diagonal split
          add_element({p00, p10, p11}, {l00, l10, l11});
          add_element({p00, p11, p01}, {l00, l11, l01});
        }
      }
    }
  };

  {
    build_elements();
    const ReferenceElement probe(kind, k_g, std::max(4, 2 * k_g + 2), NodeFamily::Equispaced);
    for (const auto& xg : mesh.elements) {
      const MatrixXd dr = probe.Dr() * xg;
      const MatrixXd ds = probe.Ds() * xg;
      for (Eigen::Index q = 0; q < dr.rows(); ++q) {
        const double det = dr(q, 0) * ds(q, 1) - ds(q, 0) * dr(q, 1);
        require(det > 0.0, "mesh generation produced an inverted element");
      }
    }
  }

  // Match faces by directed endpoint keys.
  std::map<std::pair<long, long>, std::pair<int, int>> open;  // undirected key -> (elem, face)
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int f = 0; f < nf; ++f) {
      auto [a, b] = face_keys[e][f];
      const std::pair<long, long> key{std::min(a, b), std::max(a, b)};
      auto it = open.find(key);
      if (it == open.end()) {
        open.emplace(key, std::make_pair(e, f));
      } else {
        const auto [eo, fo] = it->second;
        const auto [ao, bo] = face_keys[eo][fo];
        const bool reversed = (a == bo && b == ao);
        require(reversed || (a == ao && b == bo), "face matching: inconsistent orientation");
        mesh.interior_faces.push_back({eo, fo, e, f, reversed});
        open.erase(it);
      }
    }
  }
  const int key_theta_end = wrap ? -1 : n_theta;
  for (const auto& [key, ef] : open) {
    const auto [e, f] = ef;
    const auto [a, b] = face_keys[e][f];
    const int i0 = static_cast<int>(a / key_stride), j0 = static_cast<int>(a % key_stride);
    const int i1 = static_cast<int>(b / key_stride), j1 = static_cast<int>(b % key_stride);
    std::string tag;
    if (i0 == 0 && i1 == 0)
      tag = "inner";
    else if (i0 == n_rho && i1 == n_rho)
      tag = "outer";
    else if (j0 == 0 && j1 == 0)
      tag = "theta0";
    else if (j0 == key_theta_end && j1 == key_theta_end)
      tag = "theta1";
    else
      fail("unmatched interior face in mesh generation (element ", e, ", face ", f, ")");
    mesh.boundary_faces.push_back({e, f, tag});
  }
  mesh.ar_realized = realized_aspect_ratio(mesh);
  return mesh;
}

namespace {

// Basis machinery of the geometry order; cubature strength is irrelevant
// here.  Geometry nodes are equispaced, the layout curved-mesh files use.
ReferenceElement geometry_basis(ElementKind kind, int k_g) {
  return ReferenceElement(kind, k_g, std::max(2, 2 * k_g), NodeFamily::Equispaced);
}

}  // namespace

GeometryMaps compute_geometry_maps(const CurvedMesh& mesh, const ReferenceElement& ref,
                                   NormalMode normal_mode) {
  require(ref.kind() == mesh.kind, "geometry maps: element kind mismatch");
  const ReferenceElement geo = geometry_basis(mesh.kind, mesh.k_g);

  GeometryMaps maps;
  maps.normal_mode = normal_mode;
  const int ne = mesh.n_elements();
  const auto& vq = ref.vol_pts();
  const auto nq = vq.rows();

  const MatrixXd eg = geo.basis_at(vq);
  MatrixXd dgr, dgs;
  geo.grad_at(vq, dgr, dgs);

  maps.det_j.resize(ne);
  maps.inv_j.resize(ne);
  maps.xq.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const MatrixXd& xg = mesh.elements[e];
    maps.xq[e] = eg * xg;
    const MatrixXd dr = dgr * xg;  // columns: x_r, y_r
    const MatrixXd ds = dgs * xg;
    maps.det_j[e].resize(nq);
    maps.inv_j[e].resize(nq, 4);
    for (Eigen::Index q = 0; q < nq; ++q) {
      const double xr = dr(q, 0), yr = dr(q, 1), xs = ds(q, 0), ys = ds(q, 1);
      const double det = xr * ys - xs * yr;
      if (!(det > 0.0))
        fail("inverted element ", e, ": Jacobian determinant ", det, " at cubature point ", q);
      maps.det_j[e][q] = det;
      maps.inv_j[e](q, 0) = ys / det;    // r_x
      maps.inv_j[e](q, 1) = -xs / det;   // r_y
      maps.inv_j[e](q, 2) = -yr / det;   // s_x
      maps.inv_j[e](q, 3) = xr / det;    // s_y
    }
  }

  const auto& fcub = ref.face_cub();
  const auto nfq = fcub.x.size();
  std::vector<MatrixXd> geo_ef(geo.n_faces()), geo_drf(geo.n_faces()), geo_dsf(geo.n_faces());
  for (int f = 0; f < geo.n_faces(); ++f) {
    const MatrixXd pts = ref.face_points(f);  // ref and geo share face layout
    geo_ef[f] = geo.basis_at(pts);
    geo.grad_at(pts, geo_drf[f], geo_dsf[f]);
  }

  auto face_geometry = [&](int e, int f, const std::string* tag) {
    const MatrixXd& xg = mesh.elements[e];
    FaceGeometry fg;
    fg.xy = geo_ef[f] * xg;
    const Vec2 dref = 0.5 * (ref.face_vertex(f, 1) - ref.face_vertex(f, 0));  // d(r,s)/dt
    const MatrixXd dxdr = geo_drf[f] * xg;
    const MatrixXd dxds = geo_dsf[f] * xg;
    fg.jw.resize(nfq);
    fg.normal.resize(nfq, 2);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const double tx = dref.x() * dxdr(q, 0) + dref.y() * dxds(q, 0);
      const double ty = dref.x() * dxdr(q, 1) + dref.y() * dxds(q, 1);
      const double jf = std::hypot(tx, ty);
      fg.jw[q] = jf * fcub.w[q];
      fg.normal(q, 0) = ty / jf;
      fg.normal(q, 1) = -tx / jf;
    }
    if (normal_mode == NormalMode::ExactAnnulus && tag && (*tag == "inner" || *tag == "outer")) {
      const double sign = (*tag == "inner") ? -1.0 : 1.0;
      for (Eigen::Index q = 0; q < nfq; ++q) {
        const double r = std::hypot(fg.xy(q, 0), fg.xy(q, 1));
        fg.normal(q, 0) = sign * fg.xy(q, 0) / r;
        fg.normal(q, 1) = sign * fg.xy(q, 1) / r;
      }
    }
    fg.length = fg.jw.sum();
    return fg;
  };

  maps.interior.reserve(mesh.interior_faces.size());
  maps.interior_perm.reserve(mesh.interior_faces.size());
  for (const auto& face : mesh.interior_faces) {
    maps.interior.push_back(face_geometry(face.elem_l, face.face_l, nullptr));
    // R-side physical points; build the L->R index permutation and check traces
    const FaceGeometry right = face_geometry(face.elem_r, face.face_r, nullptr);
    std::vector<int> perm(nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const int qr = face.reversed ? static_cast<int>(nfq) - 1 - static_cast<int>(q)
                                   : static_cast<int>(q);
      const double dist = (maps.interior.back().xy.row(q) - right.xy.row(qr)).norm();
      require(dist < 1e-12, "interior face trace mismatch: ", dist, " between elements ",
              face.elem_l, " and ", face.elem_r);
      perm[q] = qr;
    }
    maps.interior_perm.push_back(std::move(perm));
  }
  maps.boundary.reserve(mesh.boundary_faces.size());
  for (const auto& face : mesh.boundary_faces)
    maps.boundary.push_back(face_geometry(face.elem, face.face, &face.tag));
  return maps;
}

double mesh_area(const CurvedMesh& mesh) {
  const ReferenceElement ref(mesh.kind, mesh.k_g, std::max(2, 2 * mesh.k_g));
  const GeometryMaps maps = compute_geometry_maps(mesh, ref);
  double area = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) area += maps.det_j[e].dot(ref.vol_w());
  return area;
}

double mesh_size_h(const CurvedMesh& mesh) {
  require(mesh.n_elements() > 0, "mesh_size_h: empty mesh");
  // The analytic domain area keeps h exactly halving under refinement; the
  // cubature area of coarse curved meshes drifts with the level.
  return std::sqrt(mesh.domain.area() / mesh.n_elements());
}

double realized_aspect_ratio(const CurvedMesh& mesh) {
  const ReferenceElement geo = geometry_basis(mesh.kind, mesh.k_g);
  const GeometryMaps maps = compute_geometry_maps(mesh, geo);
  // vertex nodes: endpoints of each face's node list
  double ar = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const MatrixXd& xg = mesh.elements[e];
    std::vector<double> edge(geo.n_faces());
    for (int f = 0; f < geo.n_faces(); ++f) {
      const auto& fn = geo.face_nodes(f);
      edge[f] = (xg.row(fn.front()) - xg.row(fn.back())).norm();
    }
    if (mesh.kind == ElementKind::Triangle) {
      const double longest = *std::max_element(edge.begin(), edge.end());
      const double area = maps.det_j[e].dot(geo.vol_w());
      ar = std::max(ar, longest / (2.0 * area / longest));
    } else {
      const auto [lo, hi] = std::minmax_element(edge.begin(), edge.end());
      ar = std::max(ar, *hi / *lo);
    }
  }
  return ar;
}

// ----------------------------------------------------------------- mesh I/O

void save_mesh(const CurvedMesh& mesh, std::ostream& os) {
  os.precision(17);
  os << "curveddg-mesh 1\n";
  os << "kind " << (mesh.kind == ElementKind::Triangle ? "tri" : "quad") << "\n";
  os << "kg " << mesh.k_g << "\n";
  os << "domain " << (mesh.domain.kind == DomainKind::QuarterAnnulus ? "quarter" : "full") << " "
     << mesh.domain.r_inner << " " << mesh.domain.r_outer << "\n";
  os << "ar " << mesh.ar_nominal << " realized " << mesh.ar_realized << "\n";
  os << "grid " << mesh.n_rho << " " << mesh.n_theta << "\n";
  os << "elements " << mesh.n_elements() << " nodes_per_element " << mesh.nodes_per_element()
     << "\n";
  for (const auto& x : mesh.elements) {
    for (int i = 0; i < x.rows(); ++i) os << x(i, 0) << " " << x(i, 1) << (i + 1 < x.rows() ? " " : "");
    os << "\n";
  }
  os << "interior_faces " << mesh.interior_faces.size() << "\n";
  for (const auto& f : mesh.interior_faces)
    os << f.elem_l << " " << f.face_l << " " << f.elem_r << " " << f.face_r << " "
       << (f.reversed ? 1 : 0) << "\n";
  os << "boundary_faces " << mesh.boundary_faces.size() << "\n";
  for (const auto& f : mesh.boundary_faces) os << f.elem << " " << f.face << " " << f.tag << "\n";
}

void save_mesh(const CurvedMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), "cannot open mesh file for writing: ", path);
  save_mesh(mesh, os);
}

CurvedMesh load_mesh(std::istream& is) {
  CurvedMesh mesh;
  std::string word;
  int version;
  is >> word >> version;
  require(word == "curveddg-mesh" && version == 1, "not a curveddg mesh file");
  is >> word;
  std::string kind_s;
  is >> kind_s;
  mesh.kind = kind_s == "tri" ? ElementKind::Triangle : ElementKind::Quadrilateral;
  is >> word >> mesh.k_g;
  std::string dom;
  is >> word >> dom >> mesh.domain.r_inner >> mesh.domain.r_outer;
  mesh.domain.kind = dom == "quarter" ? DomainKind::QuarterAnnulus : DomainKind::FullAnnulus;
  is >> word >> mesh.ar_nominal >> word >> mesh.ar_realized;
  is >> word >> mesh.n_rho >> mesh.n_theta;
  int ne, npe;
  is >> word >> ne >> word >> npe;
  require(npe == mesh.nodes_per_element(), "mesh file node count ", npe,
          " does not match geometry order ", mesh.k_g);
  mesh.elements.resize(ne, MatrixXd(npe, 2));
  for (auto& x : mesh.elements)
    for (int i = 0; i < npe; ++i) is >> x(i, 0) >> x(i, 1);
  int nif;
  is >> word >> nif;
  mesh.interior_faces.resize(nif);
  for (auto& f : mesh.interior_faces) {
    int rev;
    is >> f.elem_l >> f.face_l >> f.elem_r >> f.face_r >> rev;
    f.reversed = rev != 0;
  }
  int nbf;
  is >> word >> nbf;
  mesh.boundary_faces.resize(nbf);
  for (auto& f : mesh.boundary_faces) is >> f.elem >> f.face >> f.tag;
  require(is.good() || is.eof(), "truncated mesh file");
  return mesh;
}

CurvedMesh load_mesh_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open mesh file: ", path);
  return load_mesh(is);
}

void write_mesh_svg(const CurvedMesh& mesh, const std::string& path) {
  const ReferenceElement geo = geometry_basis(mesh.kind, mesh.k_g);
  const int samples = std::max(8, 4 * mesh.k_g);
  // sample points along each reference face
  std::vector<MatrixXd> edge_eval(geo.n_faces());
  for (int f = 0; f < geo.n_faces(); ++f) {
    MatrixXd pts(samples + 1, 2);
    for (int i = 0; i <= samples; ++i) {
      const double lam = static_cast<double>(i) / samples;
      pts.row(i) =
          ((1.0 - lam) * geo.face_vertex(f, 0) + lam * geo.face_vertex(f, 1)).transpose();
    }
    edge_eval[f] = geo.basis_at(pts);
  }
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  std::ostringstream body;
  body.precision(6);
  for (const auto& xg : mesh.elements) {
    for (int f = 0; f < geo.n_faces(); ++f) {
      const MatrixXd xy = edge_eval[f] * xg;
      body << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.002\" points=\"";
      for (int i = 0; i <= samples; ++i) {
        body << xy(i, 0) << "," << -xy(i, 1) << " ";
        xmin = std::min(xmin, xy(i, 0));
        xmax = std::max(xmax, xy(i, 0));
        ymin = std::min(ymin, -xy(i, 1));
        ymax = std::max(ymax, -xy(i, 1));
      }
      body << "\"/>\n";
    }
  }
  const double pad = 0.02 * std::max(xmax - xmin, ymax - ymin);
  std::ofstream os(path);
  require(os.good(), "cannot open SVG file for writing: ", path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << xmin - pad << " " << ymin - pad
     << " " << xmax - xmin + 2 * pad << " " << ymax - ymin + 2 * pad << "\" width=\"800\">\n"
     << body.str() << "</svg>\n";
}

}  // namespace cdg
