#include <array>

#include "curveddg/assembly.hpp"

namespace cdg {

namespace {

using Mat4 = Eigen::Matrix4d;

State<double> state_row(const MatrixXd& vals, Eigen::Index q) {
  return {vals(q, 0), vals(q, 1), vals(q, 2), vals(q, 3)};
}

// accumulate  block(c*n+i, e*n+j) += sign * sum_q s(q) T(q,i) der[q](c,e) C(q,j)
void add_pointwise_jac(MatrixXd& block, const MatrixXd& t_test, const VectorXd& s,
                       const std::vector<Mat4>& der, const MatrixXd& chain, double sign) {
  const int n_rows = static_cast<int>(t_test.cols());
  const int n_cols = static_cast<int>(chain.cols());
  const auto nq = t_test.rows();
  VectorXd sv(nq);
  for (int c = 0; c < kNsVars; ++c)
    for (int e = 0; e < kNsVars; ++e) {
      for (Eigen::Index q = 0; q < nq; ++q) sv[q] = sign * s[q] * der[q](c, e);
      block.block(c * n_rows, e * n_cols, n_rows, n_cols).noalias() +=
          t_test.transpose() * sv.asDiagonal() * chain;
    }
}

}  // namespace

EulerSystem::EulerSystem(const Discretization& disc, const BoundaryMap& bc, const GasModel& gas)
    : disc_(&disc), bc_(bc), gas_(gas) {
  pattern_ = disc.make_pattern(kNsVars);
}

const BoundaryCondition& EulerSystem::bc_for(const std::string& tag) const {
  const auto it = bc_.find(tag);
  if (it == bc_.end()) fail("no boundary condition configured for tag '", tag, "'");
  return it->second;
}

bool EulerSystem::residual(const VectorXd& u, VectorXd& r) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const auto nfq = d.ref.face_cub().x.size();
  r.setZero(dofs());
  try {
    for (int e = 0; e < ne; ++e) {
      const auto w = d.elem_coeffs(u, e, kNsVars);
      const MatrixXd wq = d.ref.E() * w;
      const auto nq = wq.rows();
      MatrixXd fx(nq, kNsVars), fy(nq, kNsVars);
      for (Eigen::Index q = 0; q < nq; ++q) {
        State<double> sx, sy;
        inviscid_flux(state_row(wq, q), gas_, sx, sy);
        for (int c = 0; c < kNsVars; ++c) {
          fx(q, c) = sx[c];
          fy(q, c) = sy[c];
        }
      }
      auto rb = Eigen::Map<MatrixXd>(r.data() + static_cast<long>(e) * kNsVars * n, n, kNsVars);
      rb.noalias() -= d.dx[e].transpose() * d.wdet[e].asDiagonal() * fx;
      rb.noalias() -= d.dy[e].transpose() * d.wdet[e].asDiagonal() * fy;
    }
    for (size_t i = 0; i < d.mesh->interior_faces.size(); ++i) {
      const auto& face = d.mesh->interior_faces[i];
      const auto& fg = d.maps.interior[i];
      const auto& perm = d.maps.interior_perm[i];
      const auto wl_c = d.elem_coeffs(u, face.elem_l, kNsVars);
      const auto wr_c = d.elem_coeffs(u, face.elem_r, kNsVars);
      const MatrixXd wl = d.ref.Ef(face.face_l) * wl_c;
      const MatrixXd wr_own = d.ref.Ef(face.face_r) * wr_c;
      MatrixXd flux(nfq, kNsVars);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        const auto f = roe_pike_flux(state_row(wl, q), state_row(wr_own, perm[q]),
                                     fg.normal(q, 0), fg.normal(q, 1), gas_);
        for (int c = 0; c < kNsVars; ++c) flux(q, c) = f[c];
      }
      auto rl = Eigen::Map<MatrixXd>(r.data() + static_cast<long>(face.elem_l) * kNsVars * n, n,
                                     kNsVars);
      auto rr = Eigen::Map<MatrixXd>(r.data() + static_cast<long>(face.elem_r) * kNsVars * n, n,
                                     kNsVars);
      rl.noalias() += d.ref.Ef(face.face_l).transpose() * fg.jw.asDiagonal() * flux;
      MatrixXd flux_r(nfq, kNsVars);
      VectorXd jw_r(nfq);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        flux_r.row(perm[q]) = flux.row(q);
        jw_r[perm[q]] = fg.jw[q];
      }
      rr.noalias() -= d.ref.Ef(face.face_r).transpose() * jw_r.asDiagonal() * flux_r;
    }
    for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
      const auto& face = d.mesh->boundary_faces[i];
      const auto& fg = d.maps.boundary[i];
      const auto& bc = bc_for(face.tag);
      const auto w_c = d.elem_coeffs(u, face.elem, kNsVars);
      const MatrixXd wb = d.ref.Ef(face.face) * w_c;
      MatrixXd flux(nfq, kNsVars);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        const Vec2 x = fg.xy.row(q).transpose();
        const auto wi = state_row(wb, q);
        const auto wg = flow_ghost_state(bc, wi, fg.normal(q, 0), fg.normal(q, 1), x, gas_);
        const auto f = roe_pike_flux(wi, wg, fg.normal(q, 0), fg.normal(q, 1), gas_);
        for (int c = 0; c < kNsVars; ++c) flux(q, c) = f[c];
      }
      auto rb = Eigen::Map<MatrixXd>(r.data() + static_cast<long>(face.elem) * kNsVars * n, n,
                                     kNsVars);
      rb.noalias() += d.ref.Ef(face.face).transpose() * fg.jw.asDiagonal() * flux;
    }
  } catch (const NonphysicalState&) {
    return false;
  }
  return true;
}

void EulerSystem::jacobian(const VectorXd& u, BlockSparseMatrix& jac) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const auto nfq = d.ref.face_cub().x.size();
  jac.set_zero();

  // volume fluxes
  for (int e = 0; e < ne; ++e) {
    const auto w = d.elem_coeffs(u, e, kNsVars);
    const MatrixXd wq = d.ref.E() * w;
    const auto nq = wq.rows();
    MatrixXd& self = jac.block(e, e);
    VectorXd sv(nq);
    std::vector<Mat4> ax(nq), ay(nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
      State<Dual<4>> ws, fx, fy;
      for (int c = 0; c < kNsVars; ++c) ws[c] = Dual<4>::seed(wq(q, c), c);
      inviscid_flux(ws, gas_, fx, fy);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) {
          ax[q](c, e2) = fx[c].d[e2];
          ay[q](c, e2) = fy[c].d[e2];
        }
    }
    for (int c = 0; c < kNsVars; ++c)
      for (int e2 = 0; e2 < kNsVars; ++e2) {
        for (Eigen::Index q = 0; q < nq; ++q) sv[q] = d.wdet[e][q] * ax[q](c, e2);
        self.block(c * n, e2 * n, n, n).noalias() -=
            d.dx[e].transpose() * sv.asDiagonal() * d.ref.E();
        for (Eigen::Index q = 0; q < nq; ++q) sv[q] = d.wdet[e][q] * ay[q](c, e2);
        self.block(c * n, e2 * n, n, n).noalias() -=
            d.dy[e].transpose() * sv.asDiagonal() * d.ref.E();
      }
  }

  // interior faces
  for (size_t i = 0; i < d.mesh->interior_faces.size(); ++i) {
    const auto& face = d.mesh->interior_faces[i];
    const auto& fg = d.maps.interior[i];
    const auto& perm = d.maps.interior_perm[i];
    const auto wl_c = d.elem_coeffs(u, face.elem_l, kNsVars);
    const auto wr_c = d.elem_coeffs(u, face.elem_r, kNsVars);
    const MatrixXd wl = d.ref.Ef(face.face_l) * wl_c;
    const MatrixXd wr_own = d.ref.Ef(face.face_r) * wr_c;
    MatrixXd t_rl(nfq, n);  // R-side basis rows in L point order
    for (Eigen::Index q = 0; q < nfq; ++q) t_rl.row(q) = d.ref.Ef(face.face_r).row(perm[q]);
    const MatrixXd& t_l = d.ref.Ef(face.face_l);

    std::vector<Mat4> dl(nfq), dr(nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      State<Dual<8>> ws_l, ws_r;
      for (int c = 0; c < kNsVars; ++c) {
        ws_l[c] = Dual<8>::seed(wl(q, c), c);
        ws_r[c] = Dual<8>::seed(wr_own(perm[q], c), 4 + c);
      }
      const auto f = roe_pike_flux(ws_l, ws_r, fg.normal(q, 0), fg.normal(q, 1), gas_);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) {
          dl[q](c, e2) = f[c].d[e2];
          dr[q](c, e2) = f[c].d[4 + e2];
        }
    }
    add_pointwise_jac(jac.block(face.elem_l, face.elem_l), t_l, fg.jw, dl, t_l, 1.0);
    add_pointwise_jac(jac.block(face.elem_l, face.elem_r), t_l, fg.jw, dr, t_rl, 1.0);
    add_pointwise_jac(jac.block(face.elem_r, face.elem_l), t_rl, fg.jw, dl, t_l, -1.0);
    add_pointwise_jac(jac.block(face.elem_r, face.elem_r), t_rl, fg.jw, dr, t_rl, -1.0);
  }

  // boundary faces: the ghost chain composes automatically through the duals
  for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
    const auto& face = d.mesh->boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    const auto& bc = bc_for(face.tag);
    const auto w_c = d.elem_coeffs(u, face.elem, kNsVars);
    const MatrixXd wb = d.ref.Ef(face.face) * w_c;
    std::vector<Mat4> der(nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      State<Dual<4>> ws;
      for (int c = 0; c < kNsVars; ++c) ws[c] = Dual<4>::seed(wb(q, c), c);
      const Vec2 x = fg.xy.row(q).transpose();
      const auto wg = flow_ghost_state(bc, ws, fg.normal(q, 0), fg.normal(q, 1), x, gas_);
      const auto f = roe_pike_flux(ws, wg, fg.normal(q, 0), fg.normal(q, 1), gas_);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) der[q](c, e2) = f[c].d[e2];
    }
    add_pointwise_jac(jac.block(face.elem, face.elem), d.ref.Ef(face.face), fg.jw, der,
                      d.ref.Ef(face.face), 1.0);
  }
}

}  // namespace cdg
