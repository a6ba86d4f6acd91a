#include "curveddg/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace cdg {

KrylovResult gmres(const MatVec& apply, const VectorXd& rhs, int restart, double tol,
                   const MatVec& precond, int max_iterations) {
  require(restart >= 1, "gmres: restart must be >= 1");
  const auto n = rhs.size();
  KrylovResult out;
  out.x = VectorXd::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }

  VectorXd r = rhs, w(n), z(n);
  double prev_restart_res = std::numeric_limits<double>::infinity();
  int stagnant = 0;

  while (out.iterations < max_iterations) {
    const double beta = r.norm();
    if (beta / bnorm <= tol) break;

    MatrixXd v(n, restart + 1);
    MatrixXd h = MatrixXd::Zero(restart + 1, restart);
    VectorXd cs = VectorXd::Zero(restart), sn = VectorXd::Zero(restart);
    VectorXd g = VectorXd::Zero(restart + 1);
    v.col(0) = r / beta;
    g[0] = beta;

    int m = 0;
    for (int j = 0; j < restart && out.iterations < max_iterations; ++j, ++out.iterations) {
      if (precond)
        precond(v.col(j), z);
      else
        z = v.col(j);
      apply(z, w);
      for (int i = 0; i <= j; ++i) {
        h(i, j) = w.dot(v.col(i));
        w.noalias() -= h(i, j) * v.col(i);
      }
      const double hsub = w.norm();  // subdiagonal entry before elimination
      h(j + 1, j) = hsub;
      if (hsub > 0.0) v.col(j + 1) = w / hsub;
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      cs[j] = h(j, j) / denom;
      sn[j] = h(j + 1, j) / denom;
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      m = j + 1;
      if (std::abs(g[j + 1]) / bnorm <= tol || hsub == 0.0) {
        ++out.iterations;
        break;
      }
    }
    // solve the small triangular system and update x
    VectorXd y = VectorXd::Zero(m);
    for (int i = m - 1; i >= 0; --i) {
      double s = g[i];
      for (int j2 = i + 1; j2 < m; ++j2) s -= h(i, j2) * y[j2];
      y[i] = s / h(i, i);
    }
    const VectorXd vy = v.leftCols(m) * y;
    if (precond) {
      precond(vy, z);
      out.x += z;
    } else {
      out.x += vy;
    }
    apply(out.x, w);
    r = rhs - w;
    const double res = r.norm() / bnorm;
    if (res <= tol) break;
    if (res >= prev_restart_res * (1.0 - 1e-9)) {
      if (++stagnant >= 3) fail("GMRES stagnation across 3 restarts (relative residual ", res, ")");
    } else {
      stagnant = 0;
    }
    prev_restart_res = res;
  }
  apply(out.x, w);
  out.true_residual = (rhs - w).norm() / bnorm;
  out.converged = out.true_residual <= tol * (1.0 + 1e-12);
  return out;
}

KrylovResult cg(const MatVec& apply, const VectorXd& rhs, double tol, const MatVec& precond,
                int max_iterations) {
  const auto n = rhs.size();
  KrylovResult out;
  out.x = VectorXd::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  VectorXd r = rhs, z(n), p(n), ap(n);
  if (precond)
    precond(r, z);
  else
    z = r;
  p = z;
  double rz = r.dot(z);
  for (; out.iterations < max_iterations; ++out.iterations) {
    if (r.norm() / bnorm <= tol) break;
    apply(p, ap);
    const double pap = p.dot(ap);
    if (pap <= 0.0)
      fail("operator not SPD: nonpositive curvature ", pap, " in CG iteration ", out.iterations);
    const double alpha = rz / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    if (precond)
      precond(r, z);
    else
      z = r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  apply(out.x, ap);
  out.true_residual = (rhs - ap).norm() / bnorm;
  out.converged = out.true_residual <= tol * (1.0 + 1e-12);
  return out;
}

namespace {

class BlockJacobi final : public Preconditioner {
 public:
  explicit BlockJacobi(const BlockSparseMatrix& m) : bs_(m.pattern().block_size) {
    const int ne = m.pattern().n_rows;
    lu_.reserve(ne);
    for (int e = 0; e < ne; ++e) {
      Eigen::FullPivLU<MatrixXd> lu(m.block(e, e));
      if (!lu.isInvertible()) fail("block Jacobi: singular diagonal block for element ", e);
      lu_.emplace_back(std::move(lu));
    }
  }
  void apply(const VectorXd& x, VectorXd& y) const override {
    y.resize(x.size());
    for (size_t e = 0; e < lu_.size(); ++e)
      y.segment(e * bs_, bs_) = lu_[e].solve(x.segment(e * bs_, bs_));
  }

 private:
  int bs_;
  std::vector<Eigen::FullPivLU<MatrixXd>> lu_;
};

class BlockIlu0 final : public Preconditioner {
 public:
  explicit BlockIlu0(const BlockSparseMatrix& m)
      : pat_(&m.pattern()), bs_(m.pattern().block_size) {
    const int ne = pat_->n_rows;
    blocks_.resize(ne);
    for (int r = 0; r < ne; ++r) {
      blocks_[r].reserve(pat_->cols[r].size());
      for (int c : pat_->cols[r]) blocks_[r].push_back(m.block(r, c));
    }
    diag_lu_.reserve(ne);
    for (int i = 0; i < ne; ++i) {
      const auto& cols = pat_->cols[i];
      for (size_t kk = 0; kk < cols.size() && cols[kk] < i; ++kk) {
        const int k = cols[kk];
        blocks_[i][kk] = blocks_[i][kk] * diag_lu_[k].inverse();
        const auto& kcols = pat_->cols[k];
        for (size_t jj = 0; jj < cols.size(); ++jj) {
          const int j = cols[jj];
          if (j <= k) continue;
          const auto it = std::lower_bound(kcols.begin(), kcols.end(), j);
          if (it == kcols.end() || *it != j) continue;
          blocks_[i][jj].noalias() -= blocks_[i][kk] * blocks_[k][it - kcols.begin()];
        }
      }
      const int di = pat_->find(i, i);
      Eigen::PartialPivLU<MatrixXd> lu(blocks_[i][di]);
      diag_lu_.emplace_back(std::move(lu));
    }
  }
  void apply(const VectorXd& x, VectorXd& y) const override {
    const int ne = pat_->n_rows;
    y = x;
    // forward: (I + L) z = x with strictly-lower unit-block L
    for (int i = 0; i < ne; ++i) {
      auto yi = y.segment(static_cast<long>(i) * bs_, bs_);
      const auto& cols = pat_->cols[i];
      for (size_t kk = 0; kk < cols.size() && cols[kk] < i; ++kk)
        yi.noalias() -= blocks_[i][kk] * y.segment(static_cast<long>(cols[kk]) * bs_, bs_);
    }
    // backward: U y = z
    for (int i = ne - 1; i >= 0; --i) {
      auto yi = y.segment(static_cast<long>(i) * bs_, bs_);
      const auto& cols = pat_->cols[i];
      for (size_t jj = cols.size(); jj-- > 0 && cols[jj] > i;)
        yi.noalias() -= blocks_[i][jj] * y.segment(static_cast<long>(cols[jj]) * bs_, bs_);
      yi = diag_lu_[i].solve(yi);
    }
  }

 private:
  const BlockPattern* pat_;
  int bs_;
  std::vector<std::vector<MatrixXd>> blocks_;
  std::vector<Eigen::PartialPivLU<MatrixXd>> diag_lu_;
};

}  // namespace

std::unique_ptr<Preconditioner> block_jacobi_preconditioner(const BlockSparseMatrix& matrix) {
  return std::make_unique<BlockJacobi>(matrix);
}
std::unique_ptr<Preconditioner> block_ilu0_preconditioner(const BlockSparseMatrix& matrix) {
  return std::make_unique<BlockIlu0>(matrix);
}
std::unique_ptr<Preconditioner> make_preconditioner(PreconditionerKind kind,
                                                    const BlockSparseMatrix& matrix) {
  switch (kind) {
    case PreconditionerKind::None:
      return nullptr;
    case PreconditionerKind::BlockJacobi:
      return block_jacobi_preconditioner(matrix);
    case PreconditionerKind::ILU0:
      return block_ilu0_preconditioner(matrix);
  }
  return nullptr;
}

namespace {

// pseudo-transient diagonal augmentation: J += (1/dtau_e) M_e per variable
void add_ptc_terms(const DiscreteSystem& system, const VectorXd& u, double cfl,
                   BlockSparseMatrix& jac) {
  const auto& d = system.disc();
  const int n = d.n, nv = system.pattern().block_size / d.n;
  const double h = mesh_size_h(*d.mesh);
  for (int e = 0; e < d.mesh->n_elements(); ++e) {
    double speed = 1.0;
    if (nv == kNsVars) {
      const auto w = d.elem_coeffs(u, e, kNsVars);
      for (int i = 0; i < n; ++i) {
        try {
          const auto pr =
              primitives(State<double>{w(i, 0), w(i, 1), w(i, 2), w(i, 3)}, GasModel::inviscid());
          speed = std::max(speed, std::hypot(value(pr.u), value(pr.v)) +
                                      std::sqrt(1.4 * value(pr.p) / value(pr.rho)));
        } catch (const NonphysicalState&) {
        }
      }
    }
    const double inv_dtau = speed / (cfl * h);
    MatrixXd& diag = jac.block(e, e);
    for (int v = 0; v < nv; ++v) diag.block(v * n, v * n, n, n).noalias() += inv_dtau * d.mass[e];
  }
}

}  // namespace

std::pair<VectorXd, SolveReport> newton_solve(const DiscreteSystem& system, const VectorXd& state0,
                                              const NewtonConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveReport report;
  VectorXd x = state0;
  VectorXd r(system.dofs()), rtrial(system.dofs());
  require(system.residual(x, r), "newton_solve: initial state is not physical");
  double rnorm = r.norm();
  report.residual_history.push_back(rnorm);
  const double target = std::max(config.abs_tol, config.rel_tol * rnorm);
  double cfl = config.ptc_cfl0;
  BlockSparseMatrix jac(system.pattern());

  auto finish = [&](bool ok, const std::string& why) {
    report.converged = ok;
    report.failure = why;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(std::move(x), std::move(report));
  };

  for (int it = 0; it < config.max_newton; ++it) {
    if (rnorm <= target) return finish(true, "");
    try {
      if (config.jacobian_mode == JacobianMode::Analytic)
        system.jacobian(x, jac);
      else
        jac = assemble_jacobian(system, x, JacobianMode::FiniteDifference);
      if (config.globalization == Globalization::PseudoTransient)
        add_ptc_terms(system, x, cfl, jac);
      const auto precond = make_preconditioner(config.preconditioner, jac);
      const MatVec apply = [&jac](const VectorXd& in, VectorXd& out) { jac.multiply(in, out); };
      // forcing term: loose while Newton contracts on its own, tightened on
      // the final steps so the linear error cannot spoil the target
      double eta = config.linear_tol;
      if (system.linear())
        eta = std::clamp(0.3 * target / rnorm, 1e-13, 1e-10);
      else if (rnorm <= 100.0 * std::sqrt(target))
        eta = std::clamp(0.3 * target / rnorm, 1e-10, config.linear_tol);
      KrylovResult lin;
      if (config.linear == LinearSolverKind::GMRES) {
        const MatVec prec_op = precond ? precond->op() : MatVec();
        const int big = std::min(4 * config.gmres_restart, static_cast<int>(r.size()));
        try {
          lin = gmres(apply, VectorXd(-r), config.gmres_restart, eta, prec_op,
                      200 * config.gmres_restart);
        } catch (const Error&) {
          try {
            // restart cycling: escalate the Krylov space before giving up
            lin = gmres(apply, VectorXd(-r), big, eta, prec_op, 400 * config.gmres_restart);
          } catch (const Error&) {
            // the tolerance may sit below the attainable floor; loosen once
            lin = gmres(apply, VectorXd(-r), big, std::min(1e-6, 1e3 * eta), prec_op,
                        400 * config.gmres_restart);
          }
        }
      } else {
        // the residual orientation makes the Poisson operator negative
        // definite; CG solves the SPD system (-J) d = r
        const MatVec apply_neg = [&jac](const VectorXd& in, VectorXd& out) {
          jac.multiply(in, out);
          out = -out;
        };
        const MatVec prec_neg = precond ? MatVec([&precond](const VectorXd& in, VectorXd& out) {
          precond->apply(in, out);
          out = -out;
        })
                                        : MatVec();
        lin = cg(apply_neg, r, eta, prec_neg);
      }
      report.linear_iterations.push_back(lin.iterations);

      // globalization
      const bool ptc = config.globalization == Globalization::PseudoTransient;
      double alpha = 1.0;
      bool accepted = false;
      if (ptc) {
        // take the full pseudo-transient step or shrink the CFL and re-solve;
        // scaling the step would lose the implicit stabilization
        const VectorXd trial = x + lin.x;
        if (system.residual(trial, rtrial) && rtrial.norm() <= 2.0 * rnorm) {
          const double ratio = rnorm / rtrial.norm();
          cfl *= std::max(config.ptc_growth, std::min(ratio, 100.0));
          x = trial;
          r = rtrial;
          rnorm = r.norm();
          accepted = true;
        }
      } else {
        for (int back = 0; back < 12; ++back) {
          const VectorXd trial = x + alpha * lin.x;
          if (system.residual(trial, rtrial)) {
            const double tnorm = rtrial.norm();
            const bool enough =
                config.globalization == Globalization::None ||
                (tnorm <= (1.0 - 1e-4 * alpha) * rnorm || tnorm <= target);
            if (enough) {
              x = trial;
              r = rtrial;
              rnorm = tnorm;
              accepted = true;
              break;
            }
          }
          if (config.globalization == Globalization::None) break;
          alpha *= 0.5;
        }
      }
      if (config.verbose) {
        std::fprintf(stderr,
                     "newton %3d: |R| %.3e lin %d its (true %.1e) accepted %d alpha %.2e cfl %.2e\n",
                     it, rnorm, lin.iterations, lin.true_residual, accepted ? 1 : 0, alpha, cfl);
      }
      if (!accepted) {
        if (ptc) {
          cfl = std::max(cfl / 4.0, 1e-6);
          report.residual_history.push_back(rnorm);
          ++report.newton_iterations;
          continue;
        }
        return finish(false, "line search failed to reduce the residual");
      }
    } catch (const Error& err) {
      return finish(false, err.what());
    }
    report.residual_history.push_back(rnorm);
    ++report.newton_iterations;
    if (system.linear() && rnorm <= target) return finish(true, "");
  }
  if (rnorm <= target) return finish(true, "");
  return finish(false, "maximum Newton iterations exceeded");
}

}  // namespace cdg
