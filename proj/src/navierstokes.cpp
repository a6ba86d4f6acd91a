#include <array>

#include "curveddg/assembly.hpp"

namespace cdg {

namespace {

using Mat4 = Eigen::Matrix4d;

State<double> state_row(const MatrixXd& vals, Eigen::Index q) {
  return {vals(q, 0), vals(q, 1), vals(q, 2), vals(q, 3)};
}

Gradient<double> grad_rows(const MatrixXd& gx, const MatrixXd& gy, Eigen::Index q) {
  Gradient<double> g;
  for (int c = 0; c < kNsVars; ++c) {
    g[0][c] = gx(q, c);
    g[1][c] = gy(q, c);
  }
  return g;
}

// block(c*nr+i, e*nc+j) += sign * sum_q s(q) T(q,i) der[q](c,e) C(q,j)
void add_pointwise_jac(MatrixXd& block, const MatrixXd& t_test, const VectorXd& s,
                       const std::vector<Mat4>& der, const MatrixXd& chain, double sign) {
  const int nr = static_cast<int>(t_test.cols());
  const int nc = static_cast<int>(chain.cols());
  const auto nq = t_test.rows();
  VectorXd sv(nq);
  for (int c = 0; c < kNsVars; ++c)
    for (int e = 0; e < kNsVars; ++e) {
      for (Eigen::Index q = 0; q < nq; ++q) sv[q] = sign * s[q] * der[q](c, e);
      block.block(c * nr, e * nc, nr, nc).noalias() +=
          t_test.transpose() * sv.asDiagonal() * chain;
    }
}

// block(c*nr+i, e*nc+j) += s * T(q,i) mix(c,e) chain_row(j)   (one face point)
void add_point_mixed_jac(MatrixXd& block, const MatrixXd& t_test, Eigen::Index q, double s,
                         const Mat4& mix, const Eigen::RowVectorXd& chain_row) {
  const int nr = static_cast<int>(t_test.cols());
  const int nc = static_cast<int>(chain_row.cols());
  for (int c = 0; c < kNsVars; ++c)
    for (int e = 0; e < kNsVars; ++e) {
      if (mix(c, e) == 0.0) continue;
      block.block(c * nr, e * nc, nr, nc).noalias() +=
          (s * mix(c, e)) * t_test.row(q).transpose() * chain_row;
    }
}

struct FvDerivs {
  Mat4 dw;
  std::array<Mat4, 2> dgrad;
};

State<double> fv_normal(const State<double>& w, const Gradient<double>& g, double nx, double ny,
                        const GasModel& gas, bool drop_heat, FvDerivs* derivs) {
  State<double> fn;
  if (!derivs) {
    State<double> fx, fy;
    viscous_flux(w, g, gas, fx, fy, drop_heat);
    for (int c = 0; c < kNsVars; ++c) fn[c] = fx[c] * nx + fy[c] * ny;
    return fn;
  }
  State<Dual<12>> ws, fx, fy;
  Gradient<Dual<12>> gs;
  for (int c = 0; c < kNsVars; ++c) {
    ws[c] = Dual<12>::seed(w[c], c);
    gs[0][c] = Dual<12>::seed(g[0][c], 4 + c);
    gs[1][c] = Dual<12>::seed(g[1][c], 8 + c);
  }
  viscous_flux(ws, gs, gas, fx, fy, drop_heat);
  for (int c = 0; c < kNsVars; ++c) {
    const Dual<12> v = fx[c] * nx + fy[c] * ny;
    fn[c] = v.v;
    for (int e = 0; e < kNsVars; ++e) {
      derivs->dw(c, e) = v.d[e];
      derivs->dgrad[0](c, e) = v.d[4 + e];
      derivs->dgrad[1](c, e) = v.d[8 + e];
    }
  }
  return fn;
}

}  // namespace

NavierStokesSystem::NavierStokesSystem(const Discretization& disc, const BoundaryMap& bc,
                                       const GasModel& gas)
    : EulerSystem(disc, bc, gas), eta_br2_(disc.ref.n_faces()) {}

bool NavierStokesSystem::face_traces(const VectorXd& u, std::vector<MatrixXd>& wl,
                                     std::vector<MatrixXd>& wr, std::vector<MatrixXd>& wb,
                                     std::vector<MatrixXd>& wg) const {
  const auto& d = *disc_;
  const auto nfq = d.ref.face_cub().x.size();
  wl.resize(d.mesh->interior_faces.size());
  wr.resize(d.mesh->interior_faces.size());
  wb.resize(d.mesh->boundary_faces.size());
  wg.resize(d.mesh->boundary_faces.size());
  for (size_t i = 0; i < d.mesh->interior_faces.size(); ++i) {
    const auto& face = d.mesh->interior_faces[i];
    wl[i] = d.ref.Ef(face.face_l) * d.elem_coeffs(u, face.elem_l, kNsVars);
    wr[i] = d.ref.Ef(face.face_r) * d.elem_coeffs(u, face.elem_r, kNsVars);  // own order
  }
  for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
    const auto& face = d.mesh->boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    const auto& bc = bc_for(face.tag);
    wb[i] = d.ref.Ef(face.face) * d.elem_coeffs(u, face.elem, kNsVars);
    wg[i].resize(nfq, kNsVars);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const Vec2 x = fg.xy.row(q).transpose();
      const auto g =
          flow_ghost_state(bc, state_row(wb[i], q), fg.normal(q, 0), fg.normal(q, 1), x, gas_);
      for (int c = 0; c < kNsVars; ++c) wg[i](q, c) = g[c];
    }
  }
  return true;
}

void NavierStokesSystem::gradients_from_traces(const VectorXd& u, const std::vector<MatrixXd>& wl,
                                               const std::vector<MatrixXd>& wr,
                                               const std::vector<MatrixXd>& wb,
                                               const std::vector<MatrixXd>& wg,
                                               std::array<VectorXd, 2>& qc) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const auto nfq = d.ref.face_cub().x.size();
  qc[0].setZero(dofs());
  qc[1].setZero(dofs());
  for (int e = 0; e < ne; ++e) {
    const auto w = d.elem_coeffs(u, e, kNsVars);
    auto qx = Eigen::Map<MatrixXd>(qc[0].data() + static_cast<long>(e) * kNsVars * n, n, kNsVars);
    auto qy = Eigen::Map<MatrixXd>(qc[1].data() + static_cast<long>(e) * kNsVars * n, n, kNsVars);
    const MatrixXd proj = d.minv[e] * d.ref.E().transpose() * d.wdet[e].asDiagonal();
    qx.noalias() = proj * (d.dx[e] * w);
    qy.noalias() = proj * (d.dy[e] * w);
    for (const auto& ef : d.elem_faces[e]) {
      MatrixXd jump(nfq, kNsVars);
      const Discretization::FaceSide* side;
      if (ef.interior) {
        const auto& perm = d.maps.interior_perm[ef.index];
        if (ef.left) {
          side = &d.int_l[ef.index];
          for (Eigen::Index q = 0; q < nfq; ++q)
            jump.row(q) = 0.5 * (wr[ef.index].row(perm[q]) - wl[ef.index].row(q));
        } else {
          side = &d.int_r[ef.index];
          for (Eigen::Index q = 0; q < nfq; ++q)
            jump.row(perm[q]) = 0.5 * (wl[ef.index].row(q) - wr[ef.index].row(perm[q]));
        }
      } else {
        side = &d.bnd[ef.index];
        jump = 0.5 * (wg[ef.index] - wb[ef.index]);
      }
      qx.noalias() += side->lift_coef[0] * jump;
      qy.noalias() += side->lift_coef[1] * jump;
    }
  }
}

std::array<VectorXd, 2> NavierStokesSystem::recover_gradients(const VectorXd& u) const {
  std::vector<MatrixXd> wl, wr, wb, wg;
  face_traces(u, wl, wr, wb, wg);
  std::array<VectorXd, 2> qc;
  gradients_from_traces(u, wl, wr, wb, wg, qc);
  return qc;
}

bool NavierStokesSystem::residual(const VectorXd& u, VectorXd& r) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const auto nfq = d.ref.face_cub().x.size();
  r.setZero(dofs());
  try {
    std::vector<MatrixXd> wl, wr, wb, wg;
    face_traces(u, wl, wr, wb, wg);
    std::array<VectorXd, 2> qc;
    gradients_from_traces(u, wl, wr, wb, wg, qc);

    for (int e = 0; e < ne; ++e) {
      const auto w = d.elem_coeffs(u, e, kNsVars);
      const MatrixXd wq = d.ref.E() * w;
      const MatrixXd qxv = d.ref.E() * d.elem_coeffs(qc[0], e, kNsVars);
      const MatrixXd qyv = d.ref.E() * d.elem_coeffs(qc[1], e, kNsVars);
      const auto nq = wq.rows();
      MatrixXd fx(nq, kNsVars), fy(nq, kNsVars);
      for (Eigen::Index q = 0; q < nq; ++q) {
        State<double> ix, iy, vx, vy;
        inviscid_flux(state_row(wq, q), gas_, ix, iy);
        viscous_flux(state_row(wq, q), grad_rows(qxv, qyv, q), gas_, vx, vy);
        for (int c = 0; c < kNsVars; ++c) {
          fx(q, c) = ix[c] - vx[c];
          fy(q, c) = iy[c] - vy[c];
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

      MatrixXd jump_l(nfq, kNsVars), jump_r(nfq, kNsVars);
      for (Eigen::Index q = 0; q < nfq; ++q)
        jump_l.row(q) = 0.5 * (wr[i].row(perm[q]) - wl[i].row(q));
      for (Eigen::Index q = 0; q < nfq; ++q) jump_r.row(perm[q]) = -jump_l.row(q);

      const MatrixXd gxl = d.int_l[i].dxf * wl_c + eta_br2_ * (d.int_l[i].lift_pt[0] * jump_l);
      const MatrixXd gyl = d.int_l[i].dyf * wl_c + eta_br2_ * (d.int_l[i].lift_pt[1] * jump_l);
      const MatrixXd gxr = d.int_r[i].dxf * wr_c + eta_br2_ * (d.int_r[i].lift_pt[0] * jump_r);
      const MatrixXd gyr = d.int_r[i].dyf * wr_c + eta_br2_ * (d.int_r[i].lift_pt[1] * jump_r);

      MatrixXd flux(nfq, kNsVars);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        const double nx = fg.normal(q, 0), ny = fg.normal(q, 1);
        const auto roe =
            roe_pike_flux(state_row(wl[i], q), state_row(wr[i], perm[q]), nx, ny, gas_);
        const auto fvl = fv_normal(state_row(wl[i], q), grad_rows(gxl, gyl, q), nx, ny, gas_,
                                   false, nullptr);
        const auto fvr = fv_normal(state_row(wr[i], perm[q]), grad_rows(gxr, gyr, perm[q]), nx,
                                   ny, gas_, false, nullptr);
        for (int c = 0; c < kNsVars; ++c) flux(q, c) = roe[c] - 0.5 * (fvl[c] + fvr[c]);
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
      const bool drop_heat = bc.kind == BCKind::NoSlipAdiabatic;
      const auto w_c = d.elem_coeffs(u, face.elem, kNsVars);
      const MatrixXd jump = 0.5 * (wg[i] - wb[i]);
      const MatrixXd gx = d.bnd[i].dxf * w_c + eta_br2_ * (d.bnd[i].lift_pt[0] * jump);
      const MatrixXd gy = d.bnd[i].dyf * w_c + eta_br2_ * (d.bnd[i].lift_pt[1] * jump);
      MatrixXd flux(nfq, kNsVars);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        const double nx = fg.normal(q, 0), ny = fg.normal(q, 1);
        const auto wi = state_row(wb[i], q);
        const auto wgq = state_row(wg[i], q);
        const auto roe = roe_pike_flux(wi, wgq, nx, ny, gas_);
        State<double> wstar;
        for (int c = 0; c < kNsVars; ++c) wstar[c] = 0.5 * (wi[c] + wgq[c]);
        const auto fv = fv_normal(wstar, grad_rows(gx, gy, q), nx, ny, gas_, drop_heat, nullptr);
        for (int c = 0; c < kNsVars; ++c) flux(q, c) = roe[c] - fv[c];
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

void NavierStokesSystem::jacobian(const VectorXd& u, BlockSparseMatrix& jac) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const int bs = kNsVars * n;
  const auto nfq = d.ref.face_cub().x.size();
  jac.set_zero();

  std::vector<MatrixXd> wl, wr, wb, wg;
  face_traces(u, wl, wr, wb, wg);
  std::array<VectorXd, 2> qc;
  gradients_from_traces(u, wl, wr, wb, wg, qc);

  std::vector<std::vector<Mat4>> ghost_jac(d.mesh->boundary_faces.size());
  for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
    const auto& face = d.mesh->boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    const auto& bc = bc_for(face.tag);
    ghost_jac[i].resize(nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      State<Dual<4>> ws;
      for (int c = 0; c < kNsVars; ++c) ws[c] = Dual<4>::seed(wb[i](q, c), c);
      const Vec2 x = fg.xy.row(q).transpose();
      const auto g = flow_ghost_state(bc, ws, fg.normal(q, 0), fg.normal(q, 1), x, gas_);
      for (int c = 0; c < kNsVars; ++c)
        for (int e = 0; e < kNsVars; ++e) ghost_jac[i][q](c, e) = g[c].d[e];
    }
  }

  // ---------------------------------------------------------------- volume
  for (int e = 0; e < ne; ++e) {
    const auto w = d.elem_coeffs(u, e, kNsVars);
    const MatrixXd wq = d.ref.E() * w;
    const MatrixXd qxv = d.ref.E() * d.elem_coeffs(qc[0], e, kNsVars);
    const MatrixXd qyv = d.ref.E() * d.elem_coeffs(qc[1], e, kNsVars);
    const auto nq = wq.rows();

    std::vector<Mat4> aw_x(nq), aw_y(nq);
    std::vector<std::array<Mat4, 2>> bqx(nq), bqy(nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
      State<Dual<12>> ws, ix, iy, vx, vy;
      Gradient<Dual<12>> gs;
      for (int c = 0; c < kNsVars; ++c) {
        ws[c] = Dual<12>::seed(wq(q, c), c);
        gs[0][c] = Dual<12>::seed(qxv(q, c), 4 + c);
        gs[1][c] = Dual<12>::seed(qyv(q, c), 8 + c);
      }
      inviscid_flux(ws, gas_, ix, iy);
      viscous_flux(ws, gs, gas_, vx, vy);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) {
          aw_x[q](c, e2) = ix[c].d[e2] - vx[c].d[e2];
          aw_y[q](c, e2) = iy[c].d[e2] - vy[c].d[e2];
          bqx[q][0](c, e2) = -vx[c].d[4 + e2];
          bqx[q][1](c, e2) = -vx[c].d[8 + e2];
          bqy[q][0](c, e2) = -vy[c].d[4 + e2];
          bqy[q][1](c, e2) = -vy[c].d[8 + e2];
        }
    }
    MatrixXd& self = jac.block(e, e);
    VectorXd sv(nq);
    for (int c = 0; c < kNsVars; ++c)
      for (int e2 = 0; e2 < kNsVars; ++e2) {
        for (Eigen::Index q = 0; q < nq; ++q) sv[q] = d.wdet[e][q] * aw_x[q](c, e2);
        self.block(c * n, e2 * n, n, n).noalias() -=
            d.dx[e].transpose() * sv.asDiagonal() * d.ref.E();
        for (Eigen::Index q = 0; q < nq; ++q) sv[q] = d.wdet[e][q] * aw_y[q](c, e2);
        self.block(c * n, e2 * n, n, n).noalias() -=
            d.dy[e].transpose() * sv.asDiagonal() * d.ref.E();
      }

    // P_d: residual sensitivity to the Q_d coefficients
    std::array<MatrixXd, 2> p_d;
    for (int dir = 0; dir < 2; ++dir) {
      p_d[dir] = MatrixXd::Zero(bs, bs);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) {
          for (Eigen::Index q = 0; q < nq; ++q)
            sv[q] = d.wdet[e][q] * (dir == 0 ? bqx[q][0](c, e2) : bqx[q][1](c, e2));
          p_d[dir].block(c * n, e2 * n, n, n).noalias() -=
              d.dx[e].transpose() * sv.asDiagonal() * d.ref.E();
          for (Eigen::Index q = 0; q < nq; ++q)
            sv[q] = d.wdet[e][q] * (dir == 0 ? bqy[q][0](c, e2) : bqy[q][1](c, e2));
          p_d[dir].block(c * n, e2 * n, n, n).noalias() -=
              d.dy[e].transpose() * sv.asDiagonal() * d.ref.E();
        }
    }

    // chains dQ_d/dW
    const MatrixXd proj = d.minv[e] * d.ref.E().transpose() * d.wdet[e].asDiagonal();
    std::array<MatrixXd, 2> dq_self_scalar = {proj * d.dx[e], proj * d.dy[e]};
    std::array<MatrixXd, 2> dq_self_mixed = {MatrixXd::Zero(bs, bs), MatrixXd::Zero(bs, bs)};
    bool has_mixed = false;
    struct NeighborChain {
      int elem;
      std::array<MatrixXd, 2> m;
    };
    std::vector<NeighborChain> nbr_chains;
    for (const auto& ef : d.elem_faces[e]) {
      if (ef.interior) {
        const auto& face = d.mesh->interior_faces[ef.index];
        const auto& perm = d.maps.interior_perm[ef.index];
        const auto& side = ef.left ? d.int_l[ef.index] : d.int_r[ef.index];
        const int other = ef.left ? face.elem_r : face.elem_l;
        const int f_own = ef.left ? face.face_l : face.face_r;
        const int f_other = ef.left ? face.face_r : face.face_l;
        MatrixXd t_other(nfq, n);
        for (Eigen::Index q = 0; q < nfq; ++q) {
          const int q_own = ef.left ? static_cast<int>(q) : perm[q];
          const int q_oth = ef.left ? perm[q] : static_cast<int>(q);
          t_other.row(q_own) = d.ref.Ef(f_other).row(q_oth);
        }
        NeighborChain nc;
        nc.elem = other;
        for (int dir = 0; dir < 2; ++dir) {
          dq_self_scalar[dir].noalias() -= 0.5 * side.lift_coef[dir] * d.ref.Ef(f_own);
          nc.m[dir] = 0.5 * side.lift_coef[dir] * t_other;
        }
        nbr_chains.push_back(std::move(nc));
      } else {
        has_mixed = true;
        const auto& side = d.bnd[ef.index];
        const auto& face = d.mesh->boundary_faces[ef.index];
        for (int dir = 0; dir < 2; ++dir)
          for (Eigen::Index q = 0; q < nfq; ++q) {
            const Mat4 mix = 0.5 * (ghost_jac[ef.index][q] - Mat4::Identity());
            for (int c = 0; c < kNsVars; ++c)
              for (int e2 = 0; e2 < kNsVars; ++e2) {
                if (mix(c, e2) == 0.0) continue;
                dq_self_mixed[dir].block(c * n, e2 * n, n, n).noalias() +=
                    mix(c, e2) * side.lift_coef[dir].col(q) * d.ref.Ef(face.face).row(q);
              }
          }
      }
    }
    for (int dir = 0; dir < 2; ++dir) {
      for (int v = 0; v < kNsVars; ++v)
        self.block(0, v * n, bs, n).noalias() +=
            p_d[dir].block(0, v * n, bs, n) * dq_self_scalar[dir];
      if (has_mixed) self.noalias() += p_d[dir] * dq_self_mixed[dir];
      for (const auto& nc : nbr_chains) {
        MatrixXd& nb = jac.block(e, nc.elem);
        for (int v = 0; v < kNsVars; ++v)
          nb.block(0, v * n, bs, n).noalias() += p_d[dir].block(0, v * n, bs, n) * nc.m[dir];
      }
    }
  }

  // ------------------------------------------------------- interior faces
  for (size_t i = 0; i < d.mesh->interior_faces.size(); ++i) {
    const auto& face = d.mesh->interior_faces[i];
    const auto& fg = d.maps.interior[i];
    const auto& perm = d.maps.interior_perm[i];
    const auto wl_c = d.elem_coeffs(u, face.elem_l, kNsVars);
    const auto wr_c = d.elem_coeffs(u, face.elem_r, kNsVars);
    const MatrixXd& t_l = d.ref.Ef(face.face_l);
    MatrixXd t_rl(nfq, n);
    for (Eigen::Index q = 0; q < nfq; ++q) t_rl.row(q) = d.ref.Ef(face.face_r).row(perm[q]);

    MatrixXd jump_l(nfq, kNsVars), jump_r(nfq, kNsVars);
    for (Eigen::Index q = 0; q < nfq; ++q)
      jump_l.row(q) = 0.5 * (wr[i].row(perm[q]) - wl[i].row(q));
    for (Eigen::Index q = 0; q < nfq; ++q) jump_r.row(perm[q]) = -jump_l.row(q);

    const MatrixXd gxl = d.int_l[i].dxf * wl_c + eta_br2_ * (d.int_l[i].lift_pt[0] * jump_l);
    const MatrixXd gyl = d.int_l[i].dyf * wl_c + eta_br2_ * (d.int_l[i].lift_pt[1] * jump_l);
    const MatrixXd gxr = d.int_r[i].dxf * wr_c + eta_br2_ * (d.int_r[i].lift_pt[0] * jump_r);
    const MatrixXd gyr = d.int_r[i].dyf * wr_c + eta_br2_ * (d.int_r[i].lift_pt[1] * jump_r);

    // gather R-side operators into L point order
    MatrixXd dxf_r(nfq, n), dyf_r(nfq, n);
    std::array<MatrixXd, 2> lift_r;
    lift_r[0].resize(nfq, nfq);
    lift_r[1].resize(nfq, nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      dxf_r.row(q) = d.int_r[i].dxf.row(perm[q]);
      dyf_r.row(q) = d.int_r[i].dyf.row(perm[q]);
      for (Eigen::Index q2 = 0; q2 < nfq; ++q2)
        for (int dir = 0; dir < 2; ++dir)
          lift_r[dir](q, q2) = d.int_r[i].lift_pt[dir](perm[q], perm[q2]);
    }
    std::array<MatrixXd, 2> cgl_self, cgl_nbr, cgr_self, cgr_nbr;
    for (int dir = 0; dir < 2; ++dir) {
      const MatrixXd& dfl = dir == 0 ? d.int_l[i].dxf : d.int_l[i].dyf;
      const MatrixXd& dfr = dir == 0 ? dxf_r : dyf_r;
      cgl_self[dir] = dfl - 0.5 * eta_br2_ * d.int_l[i].lift_pt[dir] * t_l;
      cgl_nbr[dir] = 0.5 * eta_br2_ * d.int_l[i].lift_pt[dir] * t_rl;
      cgr_self[dir] = dfr - 0.5 * eta_br2_ * lift_r[dir] * t_rl;
      cgr_nbr[dir] = 0.5 * eta_br2_ * lift_r[dir] * t_l;
    }

    std::vector<Mat4> roe_l(nfq), roe_r(nfq), fvl_w(nfq), fvr_w(nfq);
    std::array<std::vector<Mat4>, 2> fvl_g, fvr_g;
    for (int dir = 0; dir < 2; ++dir) {
      fvl_g[dir].resize(nfq);
      fvr_g[dir].resize(nfq);
    }
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const double nx = fg.normal(q, 0), ny = fg.normal(q, 1);
      State<Dual<8>> ws_l, ws_r;
      for (int c = 0; c < kNsVars; ++c) {
        ws_l[c] = Dual<8>::seed(wl[i](q, c), c);
        ws_r[c] = Dual<8>::seed(wr[i](perm[q], c), 4 + c);
      }
      const auto f = roe_pike_flux(ws_l, ws_r, nx, ny, gas_);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) {
          roe_l[q](c, e2) = f[c].d[e2];
          roe_r[q](c, e2) = f[c].d[4 + e2];
        }
      FvDerivs dl, dr;
      fv_normal(state_row(wl[i], q), grad_rows(gxl, gyl, q), nx, ny, gas_, false, &dl);
      fv_normal(state_row(wr[i], perm[q]), grad_rows(gxr, gyr, perm[q]), nx, ny, gas_, false,
                &dr);
      fvl_w[q] = -0.5 * dl.dw;
      fvr_w[q] = -0.5 * dr.dw;
      for (int dir = 0; dir < 2; ++dir) {
        fvl_g[dir][q] = -0.5 * dl.dgrad[dir];
        fvr_g[dir][q] = -0.5 * dr.dgrad[dir];
      }
    }

    auto to_l_cols = [&](const std::vector<Mat4>& der, const MatrixXd& chain) {
      add_pointwise_jac(jac.block(face.elem_l, face.elem_l), t_l, fg.jw, der, chain, 1.0);
      add_pointwise_jac(jac.block(face.elem_r, face.elem_l), t_rl, fg.jw, der, chain, -1.0);
    };
    auto to_r_cols = [&](const std::vector<Mat4>& der, const MatrixXd& chain) {
      add_pointwise_jac(jac.block(face.elem_l, face.elem_r), t_l, fg.jw, der, chain, 1.0);
      add_pointwise_jac(jac.block(face.elem_r, face.elem_r), t_rl, fg.jw, der, chain, -1.0);
    };
    to_l_cols(roe_l, t_l);
    to_r_cols(roe_r, t_rl);
    to_l_cols(fvl_w, t_l);
    to_r_cols(fvr_w, t_rl);
    for (int dir = 0; dir < 2; ++dir) {
      to_l_cols(fvl_g[dir], cgl_self[dir]);
      to_r_cols(fvl_g[dir], cgl_nbr[dir]);
      to_l_cols(fvr_g[dir], cgr_nbr[dir]);
      to_r_cols(fvr_g[dir], cgr_self[dir]);
    }
  }

  // --------------------------------------------------------- boundary faces
  for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
    const auto& face = d.mesh->boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    const auto& bc = bc_for(face.tag);
    const bool drop_heat = bc.kind == BCKind::NoSlipAdiabatic;
    const auto w_c = d.elem_coeffs(u, face.elem, kNsVars);
    const MatrixXd& t = d.ref.Ef(face.face);
    const MatrixXd jump = 0.5 * (wg[i] - wb[i]);
    const MatrixXd gx = d.bnd[i].dxf * w_c + eta_br2_ * (d.bnd[i].lift_pt[0] * jump);
    const MatrixXd gy = d.bnd[i].dyf * w_c + eta_br2_ * (d.bnd[i].lift_pt[1] * jump);
    MatrixXd& block = jac.block(face.elem, face.elem);

    std::vector<Mat4> roe_der(nfq);
    for (Eigen::Index q = 0; q < nfq; ++q) {
      const double nx = fg.normal(q, 0), ny = fg.normal(q, 1);
      // inviscid part with the ghost chain composed by the duals
      State<Dual<4>> ws;
      for (int c = 0; c < kNsVars; ++c) ws[c] = Dual<4>::seed(wb[i](q, c), c);
      const Vec2 x = fg.xy.row(q).transpose();
      const auto wgd = flow_ghost_state(bc, ws, nx, ny, x, gas_);
      const auto f = roe_pike_flux(ws, wgd, nx, ny, gas_);
      for (int c = 0; c < kNsVars; ++c)
        for (int e2 = 0; e2 < kNsVars; ++e2) roe_der[q](c, e2) = f[c].d[e2];

      // viscous part
      State<double> wstar;
      for (int c = 0; c < kNsVars; ++c) wstar[c] = 0.5 * (wb[i](q, c) + wg[i](q, c));
      FvDerivs dv;
      fv_normal(wstar, grad_rows(gx, gy, q), nx, ny, gas_, drop_heat, &dv);
      // direct W dependence through w* = (w + ghost(w))/2
      const Mat4 mix_w = -dv.dw * 0.5 * (Mat4::Identity() + ghost_jac[i][q]);
      add_point_mixed_jac(block, t, q, fg.jw[q], mix_w, t.row(q));
      for (int dir = 0; dir < 2; ++dir) {
        // broken-gradient part of G
        const Mat4 neg = -dv.dgrad[dir];
        const Eigen::RowVectorXd df_row =
            dir == 0 ? d.bnd[i].dxf.row(q) : d.bnd[i].dyf.row(q);
        add_point_mixed_jac(block, t, q, fg.jw[q], neg, df_row);
        // lifting of the ghost jump
        for (Eigen::Index q2 = 0; q2 < nfq; ++q2) {
          const Mat4 mix_lift = neg * (0.5 * eta_br2_ * d.bnd[i].lift_pt[dir](q, q2)) *
                                (ghost_jac[i][q2] - Mat4::Identity());
          add_point_mixed_jac(block, t, q, fg.jw[q], mix_lift, t.row(q2));
        }
      }
    }
    add_pointwise_jac(block, t, fg.jw, roe_der, t, 1.0);
  }
}

}  // namespace cdg
