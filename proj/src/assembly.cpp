#include "curveddg/assembly.hpp"

#include <algorithm>
#include <cmath>

namespace cdg {

BlockPattern Discretization::make_pattern(int n_vars) const {
  BlockPattern pat;
  pat.n_rows = mesh->n_elements();
  pat.block_size = n_vars * n;
  pat.cols = adjacency;
  return pat;
}

FieldState Discretization::make_state(int n_vars) const {
  FieldState s;
  s.n_elems = mesh->n_elements();
  s.n_vars = n_vars;
  s.nodes_per_elem = n;
  s.coeffs = VectorXd::Zero(s.dofs());
  return s;
}

namespace {

// physical derivative matrices from reference gradients and the inverse
// Jacobian rows [r_x r_y s_x s_y]
void physical_gradients(const MatrixXd& dr, const MatrixXd& ds, const MatrixXd& inv_j,
                        MatrixXd& dx, MatrixXd& dy) {
  const auto nq = dr.rows();
  dx.resize(nq, dr.cols());
  dy.resize(nq, dr.cols());
  for (Eigen::Index q = 0; q < nq; ++q) {
    dx.row(q) = inv_j(q, 0) * dr.row(q) + inv_j(q, 2) * ds.row(q);
    dy.row(q) = inv_j(q, 1) * dr.row(q) + inv_j(q, 3) * ds.row(q);
  }
}

}  // namespace

Discretization build_discretization(const CurvedMesh& mesh, int k, int strength,
                                    NormalMode normal_mode) {
  Discretization d;
  d.mesh = &mesh;
  d.ref = build_reference_element(mesh.kind, k, strength);
  d.maps = compute_geometry_maps(mesh, d.ref, normal_mode);
  d.n = d.ref.n_nodes();

  const int ne = mesh.n_elements();
  const ReferenceElement geo(mesh.kind, mesh.k_g, std::max(2, 2 * mesh.k_g),
                             NodeFamily::Equispaced);
  const MatrixXd geo_at_nodes = geo.basis_at(d.ref.nodes());

  d.dx.resize(ne);
  d.dy.resize(ne);
  d.wdet.resize(ne);
  d.mass.resize(ne);
  d.minv.resize(ne);
  d.node_xy.resize(ne);
  for (int e = 0; e < ne; ++e) {
    physical_gradients(d.ref.Dr(), d.ref.Ds(), d.maps.inv_j[e], d.dx[e], d.dy[e]);
    d.wdet[e] = d.ref.vol_w().cwiseProduct(d.maps.det_j[e]);
    d.mass[e] = d.ref.E().transpose() * d.wdet[e].asDiagonal() * d.ref.E();
    d.minv[e] = d.mass[e].partialPivLu().inverse();
    d.node_xy[e] = geo_at_nodes * mesh.elements[e];
  }

  // per-face geometry basis gradients (for the element-side inverse Jacobian
  // at face cubature points)
  std::vector<MatrixXd> geo_drf(geo.n_faces()), geo_dsf(geo.n_faces());
  for (int f = 0; f < geo.n_faces(); ++f)
    geo.grad_at(d.ref.face_points(f), geo_drf[f], geo_dsf[f]);

  const auto nfq = d.ref.face_cub().x.size();
  auto build_side = [&](int e, int f, const VectorXd& jw_own, const MatrixXd& n_own) {
    Discretization::FaceSide side;
    const MatrixXd& xg = mesh.elements[e];
    const MatrixXd dxdr = geo_drf[f] * xg;
    const MatrixXd dxds = geo_dsf[f] * xg;
    MatrixXd inv(nfq, 4);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const double xr = dxdr(q, 0), yr = dxdr(q, 1), xs = dxds(q, 0), ys = dxds(q, 1);
      const double det = xr * ys - xs * yr;
      require(det > 0.0, "inverted element ", e, " at a face cubature point");
      inv(q, 0) = ys / det;
      inv(q, 1) = -xs / det;
      inv(q, 2) = -yr / det;
      inv(q, 3) = xr / det;
    }
    physical_gradients(d.ref.Drf(f), d.ref.Dsf(f), inv, side.dxf, side.dyf);
    for (int dim = 0; dim < 2; ++dim) {
      const VectorXd scale = jw_own.cwiseProduct(n_own.col(dim));
      side.lift_coef[dim] = d.minv[e] * d.ref.Ef(f).transpose() * scale.asDiagonal();
      side.lift_pt[dim] = d.ref.Ef(f) * side.lift_coef[dim];
    }
    return side;
  };

  d.int_l.resize(mesh.interior_faces.size());
  d.int_r.resize(mesh.interior_faces.size());
  d.elem_faces.assign(ne, {});
  for (size_t i = 0; i < mesh.interior_faces.size(); ++i) {
    const auto& face = mesh.interior_faces[i];
    const auto& fg = d.maps.interior[i];
    d.int_l[i] = build_side(face.elem_l, face.face_l, fg.jw, fg.normal);
    // R side sees the same metric data at permuted points with flipped normals
    const auto& perm = d.maps.interior_perm[i];
    VectorXd jw_r(nfq);
    MatrixXd n_r(nfq, 2);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      jw_r[perm[q]] = fg.jw[q];
      n_r.row(perm[q]) = -fg.normal.row(q);
    }
    d.int_r[i] = build_side(face.elem_r, face.face_r, jw_r, n_r);
    d.elem_faces[face.elem_l].push_back({true, static_cast<int>(i), true});
    d.elem_faces[face.elem_r].push_back({true, static_cast<int>(i), false});
  }
  d.bnd.resize(mesh.boundary_faces.size());
  for (size_t i = 0; i < mesh.boundary_faces.size(); ++i) {
    const auto& face = mesh.boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    d.bnd[i] = build_side(face.elem, face.face, fg.jw, fg.normal);
    d.elem_faces[face.elem].push_back({false, static_cast<int>(i), true});
  }

  d.adjacency.assign(ne, {});
  for (int e = 0; e < ne; ++e) d.adjacency[e].push_back(e);
  for (const auto& face : mesh.interior_faces) {
    d.adjacency[face.elem_l].push_back(face.elem_r);
    d.adjacency[face.elem_r].push_back(face.elem_l);
  }
  for (auto& a : d.adjacency) std::sort(a.begin(), a.end());
  return d;
}

// -------------------------------------------------------- finite differences

namespace {

// distance-2 greedy coloring so simultaneous perturbations never touch the
// same residual row
std::vector<int> distance2_coloring(const std::vector<std::vector<int>>& adj) {
  const int ne = static_cast<int>(adj.size());
  std::vector<int> color(ne, -1);
  std::vector<char> used;
  for (int e = 0; e < ne; ++e) {
    used.assign(64, 0);
    for (int nb : adj[e])
      for (int nb2 : adj[nb])
        if (color[nb2] >= 0 && color[nb2] < static_cast<int>(used.size())) used[color[nb2]] = 1;
    int c = 0;
    while (c < static_cast<int>(used.size()) && used[c]) ++c;
    color[e] = c;
  }
  return color;
}

}  // namespace

BlockSparseMatrix assemble_jacobian(const DiscreteSystem& system, const VectorXd& u,
                                    JacobianMode mode) {
  BlockSparseMatrix jac(system.pattern());
  if (mode == JacobianMode::Analytic) {
    system.jacobian(u, jac);
    return jac;
  }
  const auto& disc = system.disc();
  const int bs = system.pattern().block_size;
  const int ne = disc.mesh->n_elements();
  VectorXd r0(u.size()), rp(u.size());
  require(system.residual(u, r0), "finite-difference Jacobian: base state not physical");

  const std::vector<int> color = distance2_coloring(disc.adjacency);
  const int n_colors = 1 + *std::max_element(color.begin(), color.end());
  VectorXd up = u;
  for (int c = 0; c < n_colors; ++c) {
    for (int j = 0; j < bs; ++j) {
      std::vector<std::pair<int, double>> touched;  // (element, step)
      for (int e = 0; e < ne; ++e) {
        if (color[e] != c) continue;
        const long idx = static_cast<long>(e) * bs + j;
        const double h = std::sqrt(1e-16) * (1.0 + std::abs(u[idx]));
        up[idx] += h;
        touched.emplace_back(e, h);
      }
      if (touched.empty()) continue;
      bool ok = system.residual(up, rp);
      if (!ok) {
        // back off the perturbation size
        for (auto& [e, h] : touched) {
          const long idx = static_cast<long>(e) * bs + j;
          up[idx] = u[idx] + 0.01 * h;
          h *= 0.01;
        }
        ok = system.residual(up, rp);
        require(ok, "finite-difference Jacobian: perturbed state not physical");
      }
      for (const auto& [e, h] : touched) {
        for (int row : disc.adjacency[e]) {
          const int bj = system.pattern().find(row, e);
          if (bj < 0) continue;
          jac.block_at(row, bj).col(j) =
              (rp.segment(static_cast<long>(row) * bs, bs) -
               r0.segment(static_cast<long>(row) * bs, bs)) /
              h;
        }
        up[static_cast<long>(e) * bs + j] = u[static_cast<long>(e) * bs + j];
      }
    }
  }
  return jac;
}

}  // namespace cdg
