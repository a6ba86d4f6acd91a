#include "curveddg/assembly.hpp"

namespace cdg {

PoissonSystem::PoissonSystem(const Discretization& disc, const BoundaryMap& bc,
                             std::function<double(const Vec2&)> source, double eta)
    : disc_(&disc), bc_(bc), source_(std::move(source)), eta_(eta) {
  pattern_ = disc.make_pattern(1);
  assemble();
}

void PoissonSystem::assemble() {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const int k = d.ref.order();
  const auto nfq = d.ref.face_cub().x.size();
  matrix_ = BlockSparseMatrix(pattern_);
  constant_ = VectorXd::Zero(dofs());

  // volume gradient-projection operators per element
  std::vector<std::array<MatrixXd, 2>> g_op(ne);
  for (int e = 0; e < ne; ++e) {
    g_op[e][0] = d.ref.E().transpose() * d.wdet[e].asDiagonal() * d.dx[e];
    g_op[e][1] = d.ref.E().transpose() * d.wdet[e].asDiagonal() * d.dy[e];
    // source moved to the residual's left side: R = ... - (phi, s)
    VectorXd src(d.wdet[e].size());
    for (Eigen::Index q = 0; q < d.wdet[e].size(); ++q) {
      const Vec2 x = d.maps.xq[e].row(q).transpose();
      src[q] = source_ ? source_(x) : 0.0;
    }
    constant_.segment(static_cast<long>(e) * n, n).noalias() -=
        d.ref.E().transpose() * d.wdet[e].cwiseProduct(src);
    // self part of q = grad u
    MatrixXd& self = matrix_.block(e, e);
    for (int dir = 0; dir < 2; ++dir)
      self.noalias() -= g_op[e][dir].transpose() * (d.minv[e] * g_op[e][dir]);
  }

  for (size_t i = 0; i < d.mesh->interior_faces.size(); ++i) {
    const auto& face = d.mesh->interior_faces[i];
    const auto& fg = d.maps.interior[i];
    const auto& perm = d.maps.interior_perm[i];
    const int el = face.elem_l, er = face.elem_r;
    const double tau = eta_ * k * k / fg.length;

    const MatrixXd& t_l = d.ref.Ef(face.face_l);
    MatrixXd t_rl(nfq, n);                     // R basis in L point order
    MatrixXd n_l(nfq, n), n_rl(nfq, n);        // normal derivatives (dot n_L)
    for (Eigen::Index q = 0; q < nfq; ++q) {
      t_rl.row(q) = d.ref.Ef(face.face_r).row(perm[q]);
      n_l.row(q) = fg.normal(q, 0) * d.int_l[i].dxf.row(q) +
                   fg.normal(q, 1) * d.int_l[i].dyf.row(q);
      n_rl.row(q) = fg.normal(q, 0) * d.int_r[i].dxf.row(perm[q]) +
                    fg.normal(q, 1) * d.int_r[i].dyf.row(perm[q]);
    }

    // face flux q*.n = {dn u} - tau [u]
    const MatrixXd flux_l = 0.5 * n_l - tau * t_l;
    const MatrixXd flux_r = 0.5 * n_rl + tau * t_rl;
    matrix_.block(el, el).noalias() += t_l.transpose() * fg.jw.asDiagonal() * flux_l;
    matrix_.block(el, er).noalias() += t_l.transpose() * fg.jw.asDiagonal() * flux_r;
    matrix_.block(er, el).noalias() -= t_rl.transpose() * fg.jw.asDiagonal() * flux_l;
    matrix_.block(er, er).noalias() -= t_rl.transpose() * fg.jw.asDiagonal() * flux_r;

    // lifting contributions to the volume term through q
    for (int dir = 0; dir < 2; ++dir) {
      // L side: jump = (u* - u)|_L = (t_rl u_R - t_l u_L)/2
      matrix_.block(el, el).noalias() +=
          0.5 * g_op[el][dir].transpose() * d.int_l[i].lift_coef[dir] * t_l;
      matrix_.block(el, er).noalias() -=
          0.5 * g_op[el][dir].transpose() * d.int_l[i].lift_coef[dir] * t_rl;
      // R side, own point order: jump = (t_lr u_L - Ef(face_r) u_R)/2
      MatrixXd t_lr(nfq, n);
      for (Eigen::Index q = 0; q < nfq; ++q) t_lr.row(perm[q]) = t_l.row(q);
      matrix_.block(er, er).noalias() +=
          0.5 * g_op[er][dir].transpose() * d.int_r[i].lift_coef[dir] * d.ref.Ef(face.face_r);
      matrix_.block(er, el).noalias() -=
          0.5 * g_op[er][dir].transpose() * d.int_r[i].lift_coef[dir] * t_lr;
    }
  }

  for (size_t i = 0; i < d.mesh->boundary_faces.size(); ++i) {
    const auto& face = d.mesh->boundary_faces[i];
    const auto& fg = d.maps.boundary[i];
    const auto it = bc_.find(face.tag);
    if (it == bc_.end()) fail("no boundary condition configured for tag '", face.tag, "'");
    const auto& bc = it->second;
    const int e = face.elem;
    const double tau = eta_ * k * k / fg.length;
    const MatrixXd& t = d.ref.Ef(face.face);

    if (bc.kind == BCKind::Dirichlet) {
      require(static_cast<bool>(bc.g), "Dirichlet condition on '", face.tag, "' without data");
      VectorXd gvals(nfq);
      MatrixXd n_d(nfq, n);
      for (Eigen::Index q = 0; q < nfq; ++q) {
        gvals[q] = bc.g(Vec2(fg.xy(q, 0), fg.xy(q, 1)));
        n_d.row(q) = fg.normal(q, 0) * d.bnd[i].dxf.row(q) +
                     fg.normal(q, 1) * d.bnd[i].dyf.row(q);
      }
      // q*.n = dn u - tau (u - g)
      matrix_.block(e, e).noalias() += t.transpose() * fg.jw.asDiagonal() * (n_d - tau * t);
      constant_.segment(static_cast<long>(e) * n, n).noalias() +=
          t.transpose() * (tau * fg.jw.cwiseProduct(gvals));
      // lifting with jump = g - u
      for (int dir = 0; dir < 2; ++dir) {
        matrix_.block(e, e).noalias() +=
            g_op[e][dir].transpose() * d.bnd[i].lift_coef[dir] * t;
        constant_.segment(static_cast<long>(e) * n, n).noalias() -=
            g_op[e][dir].transpose() * (d.bnd[i].lift_coef[dir] * gvals);
      }
    } else if (bc.kind == BCKind::Neumann) {
      require(static_cast<bool>(bc.g_n), "Neumann condition on '", face.tag, "' without data");
      VectorXd gn(nfq);
      for (Eigen::Index q = 0; q < nfq; ++q)
        gn[q] = bc.g_n(Vec2(fg.xy(q, 0), fg.xy(q, 1)), Vec2(fg.normal(q, 0), fg.normal(q, 1)));
      constant_.segment(static_cast<long>(e) * n, n).noalias() +=
          t.transpose() * fg.jw.cwiseProduct(gn);
      // u* = u: no trace correction in the gradient equation
    } else {
      fail("boundary condition on '", face.tag, "' is not a Poisson condition");
    }
  }
}

bool PoissonSystem::residual(const VectorXd& u, VectorXd& r) const {
  matrix_.multiply(u, r);
  r += constant_;
  return true;
}

void PoissonSystem::jacobian(const VectorXd&, BlockSparseMatrix& jac) const { jac = matrix_; }

std::array<VectorXd, 2> PoissonSystem::recover_gradients(const VectorXd& u) const {
  const auto& d = *disc_;
  const int ne = d.mesh->n_elements(), n = d.n;
  const auto nfq = d.ref.face_cub().x.size();
  std::array<VectorXd, 2> qc{VectorXd::Zero(dofs()), VectorXd::Zero(dofs())};
  for (int e = 0; e < ne; ++e) {
    const VectorXd ue = u.segment(static_cast<long>(e) * n, n);
    const MatrixXd proj = d.minv[e] * d.ref.E().transpose() * d.wdet[e].asDiagonal();
    qc[0].segment(static_cast<long>(e) * n, n) = proj * (d.dx[e] * ue);
    qc[1].segment(static_cast<long>(e) * n, n) = proj * (d.dy[e] * ue);
    for (const auto& ef : d.elem_faces[e]) {
      VectorXd jump(nfq);
      const Discretization::FaceSide* side;
      if (ef.interior) {
        const auto& face = d.mesh->interior_faces[ef.index];
        const auto& perm = d.maps.interior_perm[ef.index];
        const VectorXd ul = d.ref.Ef(face.face_l) *
                            u.segment(static_cast<long>(face.elem_l) * n, n);
        const VectorXd ur = d.ref.Ef(face.face_r) *
                            u.segment(static_cast<long>(face.elem_r) * n, n);
        if (ef.left) {
          side = &d.int_l[ef.index];
          for (Eigen::Index q = 0; q < nfq; ++q) jump[q] = 0.5 * (ur[perm[q]] - ul[q]);
        } else {
          side = &d.int_r[ef.index];
          for (Eigen::Index q = 0; q < nfq; ++q) jump[perm[q]] = 0.5 * (ul[q] - ur[perm[q]]);
        }
      } else {
        side = &d.bnd[ef.index];
        const auto& face = d.mesh->boundary_faces[ef.index];
        const auto& fg = d.maps.boundary[ef.index];
        const auto& bc = bc_.at(face.tag);
        const VectorXd ub = d.ref.Ef(face.face) * u.segment(static_cast<long>(e) * n, n);
        for (Eigen::Index q = 0; q < nfq; ++q) {
          if (bc.kind == BCKind::Dirichlet)
            jump[q] = bc.g(Vec2(fg.xy(q, 0), fg.xy(q, 1))) - ub[q];
          else
            jump[q] = 0.0;
        }
      }
      qc[0].segment(static_cast<long>(e) * n, n).noalias() += side->lift_coef[0] * jump;
      qc[1].segment(static_cast<long>(e) * n, n).noalias() += side->lift_coef[1] * jump;
    }
  }
  return qc;
}

}  // namespace cdg
