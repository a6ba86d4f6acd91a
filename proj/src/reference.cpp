#include "curveddg/reference.hpp"

#include <cmath>
#include <limits>

#include "tri_cubature_tables.inc"

namespace cdg {

namespace {

// Legendre P_n and derivative at x via the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

Cubature1D gauss_legendre_1d(int n) {
  require(n >= 1, "gauss_legendre_1d: need n >= 1, got ", n);
  Cubature1D rule;
  rule.x.resize(n);
  rule.w.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, p, dp);
      const double dx = -p / dp;
      x += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, p, dp);
    rule.x[i] = -x;
    rule.x[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.w[i] = w;
    rule.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.0;
  return rule;
}

Cubature1D gauss_lobatto_1d(int n) {
  require(n >= 2, "gauss_lobatto_1d: need n >= 2, got ", n);
  Cubature1D rule;
  rule.x.resize(n);
  rule.w.resize(n);
  rule.x[0] = -1.0;
  rule.x[n - 1] = 1.0;
  const int N = n - 1;
  // Interior points: roots of P'_N, found by Newton on P'_N using the
  // Chebyshev-Gauss-Lobatto points as initial guesses.
  for (int i = 1; i < N; ++i) {
    double x = std::cos(M_PI * (N - i) / N);
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(N, x, p, dp);
      // d2p from Legendre ODE: (1-x^2) p'' - 2 x p' + N(N+1) p = 0
      const double d2p = (2.0 * x * dp - N * (N + 1.0) * p) / (1.0 - x * x);
      const double dx = -dp / d2p;
      x += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.x[i] = x;
  }
  for (int i = 0; i < n; ++i) {
    double p, dp;
    legendre(N, rule.x[i], p, dp);
    rule.w[i] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return rule;
}

Cubature2D triangle_volume_cubature(int strength) {
  require(strength >= 0, "triangle_volume_cubature: negative strength");
  const tri_rules::Entry* best = nullptr;
  for (const auto& e : tri_rules::table) {
    if (e.degree >= strength && (!best || e.n < best->n)) best = &e;
  }
  if (!best) {
    fail("triangle cubature rule unavailable: requested strength ", strength,
         " exceeds the maximum tabulated strength ", triangle_cubature_max_strength());
  }
  Cubature2D rule;
  rule.pts.resize(best->n, 2);
  rule.w.resize(best->n);
  for (int i = 0; i < best->n; ++i) {
    rule.pts(i, 0) = best->data[i][0];
    rule.pts(i, 1) = best->data[i][1];
    rule.w[i] = best->data[i][2];
  }
  return rule;
}

int triangle_cubature_max_strength() {
  int m = 0;
  for (const auto& e : tri_rules::table) m = std::max(m, e.degree);
  return m;
}

VectorXd jacobi_p(const VectorXd& x, double a, double b, int n) {
  const auto np = x.size();
  MatrixXd pl(np, n + 1);
  const double gamma0 = std::pow(2.0, a + b + 1.0) / (a + b + 1.0) * std::tgamma(a + 1.0) *
                        std::tgamma(b + 1.0) / std::tgamma(a + b + 1.0);
  pl.col(0).setConstant(1.0 / std::sqrt(gamma0));
  if (n == 0) return pl.col(0);
  const double gamma1 = (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
  pl.col(1) = ((a + b + 2.0) * x.array() / 2.0 + (a - b) / 2.0) / std::sqrt(gamma1);
  if (n == 1) return pl.col(1);
  double aold = 2.0 / (2.0 + a + b) * std::sqrt((a + 1.0) * (b + 1.0) / (a + b + 3.0));
  for (int i = 1; i < n; ++i) {
    const double h1 = 2.0 * i + a + b;
    const double anew = 2.0 / (h1 + 2.0) *
                        std::sqrt((i + 1.0) * (i + 1.0 + a + b) * (i + 1.0 + a) * (i + 1.0 + b) /
                                  ((h1 + 1.0) * (h1 + 3.0)));
    const double bnew = -(a * a - b * b) / (h1 * (h1 + 2.0));
    pl.col(i + 1) = ((x.array() - bnew) * pl.col(i).array() - aold * pl.col(i - 1).array()) / anew;
    aold = anew;
  }
  return pl.col(n);
}

VectorXd grad_jacobi_p(const VectorXd& x, double a, double b, int n) {
  if (n == 0) return VectorXd::Zero(x.size());
  return std::sqrt(n * (n + a + b + 1.0)) * jacobi_p(x, a + 1.0, b + 1.0, n - 1);
}

namespace {

// ------------------------------------------------------------------ triangle
// Collapsed coordinates (a,b) from reference (r,s); a = -1 at the singular
// top vertex by convention.
void collapsed(const MatrixXd& rs, VectorXd& a, VectorXd& b) {
  const auto m = rs.rows();
  a.resize(m);
  b.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double r = rs(i, 0), s = rs(i, 1);
    a[i] = std::abs(s - 1.0) > 1e-12 ? 2.0 * (1.0 + r) / (1.0 - s) - 1.0 : -1.0;
    b[i] = s;
  }
}

MatrixXd simplex_modal(const MatrixXd& rs, int k) {
  VectorXd a, b;
  collapsed(rs, a, b);
  const auto m = rs.rows();
  MatrixXd out(m, n_basis(ElementKind::Triangle, k));
  int col = 0;
  for (int i = 0; i <= k; ++i) {
    const VectorXd fa = jacobi_p(a, 0.0, 0.0, i);
    for (int j = 0; j <= k - i; ++j, ++col) {
      const VectorXd gb = jacobi_p(b, 2.0 * i + 1.0, 0.0, j);
      for (Eigen::Index q = 0; q < m; ++q)
        out(q, col) = std::sqrt(2.0) * fa[q] * gb[q] * std::pow(1.0 - b[q], i);
    }
  }
  return out;
}

void simplex_modal_grad(const MatrixXd& rs, int k, MatrixXd& dr, MatrixXd& ds) {
  VectorXd a, b;
  collapsed(rs, a, b);
  const auto m = rs.rows();
  const int n = n_basis(ElementKind::Triangle, k);
  dr.resize(m, n);
  ds.resize(m, n);
  int col = 0;
  for (int i = 0; i <= k; ++i) {
    const VectorXd fa = jacobi_p(a, 0.0, 0.0, i);
    const VectorXd dfa = grad_jacobi_p(a, 0.0, 0.0, i);
    for (int j = 0; j <= k - i; ++j, ++col) {
      const VectorXd gb = jacobi_p(b, 2.0 * i + 1.0, 0.0, j);
      const VectorXd dgb = grad_jacobi_p(b, 2.0 * i + 1.0, 0.0, j);
      for (Eigen::Index q = 0; q < m; ++q) {
        const double hb = 0.5 * (1.0 - b[q]);
        double vr = dfa[q] * gb[q];
        if (i > 0) vr *= std::pow(hb, i - 1);
        double vs = dfa[q] * gb[q] * 0.5 * (1.0 + a[q]);
        if (i > 0) vs *= std::pow(hb, i - 1);
        double tmp = dgb[q] * std::pow(hb, i);
        if (i > 0) tmp -= 0.5 * i * gb[q] * std::pow(hb, i - 1);
        vs += fa[q] * tmp;
        const double scale = std::pow(2.0, i + 0.5);
        dr(q, col) = scale * vr;
        ds(q, col) = scale * vs;
      }
    }
  }
}

// Warp function of the alpha-optimized node construction: 1D displacement
// from equidistant to Gauss-Lobatto, evaluated at the blend coordinate.
VectorXd warp_factor(int k, const VectorXd& rout) {
  const int np = k + 1;
  const Cubature1D gll = gauss_lobatto_1d(np);
  VectorXd req(np);
  for (int i = 0; i < np; ++i) req[i] = -1.0 + 2.0 * i / k;
  MatrixXd veq(np, np);
  for (int j = 0; j < np; ++j) veq.col(j) = jacobi_p(req, 0.0, 0.0, j);
  MatrixXd pmat(np, rout.size());
  for (int j = 0; j < np; ++j) pmat.row(j) = jacobi_p(rout, 0.0, 0.0, j).transpose();
  const MatrixXd lmat = veq.transpose().partialPivLu().solve(pmat);
  VectorXd warp = lmat.transpose() * (gll.x - req);
  for (Eigen::Index i = 0; i < rout.size(); ++i) {
    const bool interior = std::abs(rout[i]) < 1.0 - 1e-10;
    const double sf = 1.0 - (interior ? rout[i] * rout[i] : 0.0);
    warp[i] = interior ? warp[i] / sf : 0.0;
  }
  return warp;
}

MatrixXd triangle_nodes(int k) {
  static constexpr double alpha_table[] = {0.0000, 0.0000, 1.4152, 0.1001, 0.2751,
                                           0.9800, 1.0999, 1.2832, 1.3648, 1.4773,
                                           1.4959, 1.5743, 1.5770, 1.6223, 1.6258};
  const double alpha = k < 16 ? alpha_table[k - 1] : 5.0 / 3.0;
  const int np = (k + 1) * (k + 2) / 2;
  VectorXd l1(np), l3(np);
  int sk = 0;
  for (int n = 0; n <= k; ++n)
    for (int m = 0; m <= k - n; ++m, ++sk) {
      l1[sk] = static_cast<double>(n) / k;
      l3[sk] = static_cast<double>(m) / k;
    }
  const VectorXd l2 = VectorXd::Ones(np) - l1 - l3;
  VectorXd x = -l2 + l3;
  VectorXd y = (-l2 - l3 + 2.0 * l1) / std::sqrt(3.0);

  const VectorXd blend1 = 4.0 * l2.cwiseProduct(l3);
  const VectorXd blend2 = 4.0 * l1.cwiseProduct(l3);
  const VectorXd blend3 = 4.0 * l1.cwiseProduct(l2);
  const VectorXd wf1 = warp_factor(k, l3 - l2);
  const VectorXd wf2 = warp_factor(k, l1 - l3);
  const VectorXd wf3 = warp_factor(k, l2 - l1);
  for (int i = 0; i < np; ++i) {
    const double w1 = blend1[i] * wf1[i] * (1.0 + std::pow(alpha * l1[i], 2));
    const double w2 = blend2[i] * wf2[i] * (1.0 + std::pow(alpha * l2[i], 2));
    const double w3 = blend3[i] * wf3[i] * (1.0 + std::pow(alpha * l3[i], 2));
    x[i] += w1 + std::cos(2.0 * M_PI / 3.0) * w2 + std::cos(4.0 * M_PI / 3.0) * w3;
    y[i] += std::sin(2.0 * M_PI / 3.0) * w2 + std::sin(4.0 * M_PI / 3.0) * w3;
  }
  // Equilateral -> reference right triangle.
  MatrixXd rs(np, 2);
  for (int i = 0; i < np; ++i) {
    const double L1 = (std::sqrt(3.0) * y[i] + 1.0) / 3.0;
    const double L2 = (-3.0 * x[i] - std::sqrt(3.0) * y[i] + 2.0) / 6.0;
    const double L3 = (3.0 * x[i] - std::sqrt(3.0) * y[i] + 2.0) / 6.0;
    rs(i, 0) = -L2 + L3 - L1;
    rs(i, 1) = -L2 - L3 + L1;
  }
  return rs;
}

// ---------------------------------------------------------------------- quad
MatrixXd quad_nodes(int k) {
  const Cubature1D gll = gauss_lobatto_1d(k + 1);
  MatrixXd rs((k + 1) * (k + 1), 2);
  int id = 0;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i <= k; ++i, ++id) {
      rs(id, 0) = gll.x[i];
      rs(id, 1) = gll.x[j];
    }
  return rs;
}

MatrixXd quad_modal(const MatrixXd& rs, int k) {
  const auto m = rs.rows();
  MatrixXd out(m, (k + 1) * (k + 1));
  const VectorXd r = rs.col(0), s = rs.col(1);
  std::vector<VectorXd> pr(k + 1), ps(k + 1);
  for (int i = 0; i <= k; ++i) {
    pr[i] = jacobi_p(r, 0.0, 0.0, i);
    ps[i] = jacobi_p(s, 0.0, 0.0, i);
  }
  int col = 0;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i <= k; ++i, ++col) out.col(col) = pr[i].cwiseProduct(ps[j]);
  return out;
}

void quad_modal_grad(const MatrixXd& rs, int k, MatrixXd& dr, MatrixXd& ds) {
  const auto m = rs.rows();
  const int n = (k + 1) * (k + 1);
  dr.resize(m, n);
  ds.resize(m, n);
  const VectorXd r = rs.col(0), s = rs.col(1);
  std::vector<VectorXd> pr(k + 1), ps(k + 1), dpr(k + 1), dps(k + 1);
  for (int i = 0; i <= k; ++i) {
    pr[i] = jacobi_p(r, 0.0, 0.0, i);
    ps[i] = jacobi_p(s, 0.0, 0.0, i);
    dpr[i] = grad_jacobi_p(r, 0.0, 0.0, i);
    dps[i] = grad_jacobi_p(s, 0.0, 0.0, i);
  }
  int col = 0;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i <= k; ++i, ++col) {
      dr.col(col) = dpr[i].cwiseProduct(ps[j]);
      ds.col(col) = pr[i].cwiseProduct(dps[j]);
    }
}

}  // namespace

MatrixXd interpolation_nodes(ElementKind kind, int k) {
  require(k >= 1, "interpolation_nodes: need k >= 1, got ", k);
  return kind == ElementKind::Triangle ? triangle_nodes(k) : quad_nodes(k);
}

MatrixXd equispaced_nodes(ElementKind kind, int k) {
  require(k >= 1, "equispaced_nodes: need k >= 1, got ", k);
  if (kind == ElementKind::Triangle) {
    const int np = (k + 1) * (k + 2) / 2;
    MatrixXd rs(np, 2);
    int id = 0;
    for (int n = 0; n <= k; ++n)
      for (int m = 0; m <= k - n; ++m, ++id) {
        rs(id, 0) = -1.0 + 2.0 * m / k;
        rs(id, 1) = -1.0 + 2.0 * n / k;
      }
    return rs;
  }
  MatrixXd rs((k + 1) * (k + 1), 2);
  int id = 0;
  for (int j = 0; j <= k; ++j)
    for (int i = 0; i <= k; ++i, ++id) {
      rs(id, 0) = -1.0 + 2.0 * i / k;
      rs(id, 1) = -1.0 + 2.0 * j / k;
    }
  return rs;
}

MatrixXd ReferenceElement::modal_at(const MatrixXd& pts) const {
  return kind_ == ElementKind::Triangle ? simplex_modal(pts, k_) : quad_modal(pts, k_);
}

void ReferenceElement::modal_grad_at(const MatrixXd& pts, MatrixXd& dr, MatrixXd& ds) const {
  if (kind_ == ElementKind::Triangle)
    simplex_modal_grad(pts, k_, dr, ds);
  else
    quad_modal_grad(pts, k_, dr, ds);
}

MatrixXd ReferenceElement::basis_at(const MatrixXd& pts) const { return modal_at(pts) * Vinv_; }

void ReferenceElement::grad_at(const MatrixXd& pts, MatrixXd& dr, MatrixXd& ds) const {
  modal_grad_at(pts, dr, ds);
  dr = dr * Vinv_;
  ds = ds * Vinv_;
}

MatrixXd ReferenceElement::face_points(int f) const {
  const auto& t = face_cub_.x;
  MatrixXd pts(t.size(), 2);
  const Vec2 a = face_ends_[f][0], b = face_ends_[f][1];
  for (Eigen::Index q = 0; q < t.size(); ++q) {
    const double lam = 0.5 * (1.0 + t[q]);
    pts.row(q) = ((1.0 - lam) * a + lam * b).transpose();
  }
  return pts;
}

double ReferenceElement::face_ref_length(int f) const {
  return (face_ends_[f][1] - face_ends_[f][0]).norm();
}

ReferenceElement::ReferenceElement(ElementKind kind, int k, int strength, NodeFamily family)
    : kind_(kind), k_(k), strength_(strength) {
  require(k >= 1, "reference element: need k >= 1, got ", k);
  require(strength >= 1, "reference element: need strength >= 1, got ", strength);
  n_faces_ = n_faces_of(kind);
  nodes_ = family == NodeFamily::AlphaOptimized ? interpolation_nodes(kind, k)
                                                : equispaced_nodes(kind, k);

  if (kind == ElementKind::Triangle) {
    const Cubature2D rule = triangle_volume_cubature(strength);
    vol_pts_ = rule.pts;
    vol_w_ = rule.w;
    face_ends_[0] = {Vec2(-1, -1), Vec2(1, -1)};
    face_ends_[1] = {Vec2(1, -1), Vec2(-1, 1)};
    face_ends_[2] = {Vec2(-1, 1), Vec2(-1, -1)};
  } else {
    const int n1 = strength / 2 + 1;
    const Cubature1D gl = gauss_legendre_1d(n1);
    vol_pts_.resize(n1 * n1, 2);
    vol_w_.resize(n1 * n1);
    int id = 0;
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i, ++id) {
        vol_pts_(id, 0) = gl.x[i];
        vol_pts_(id, 1) = gl.x[j];
        vol_w_[id] = gl.w[i] * gl.w[j];
      }
    face_ends_[0] = {Vec2(-1, -1), Vec2(1, -1)};
    face_ends_[1] = {Vec2(1, -1), Vec2(1, 1)};
    face_ends_[2] = {Vec2(1, 1), Vec2(-1, 1)};
    face_ends_[3] = {Vec2(-1, 1), Vec2(-1, -1)};
  }
  face_cub_ = gauss_legendre_1d(strength / 2 + 1);

  // Modal Vandermonde at the nodes; the nodal basis is modal * V^{-1}.
  // (The orthonormal modal basis keeps V well conditioned.)
  V_ = modal_at(nodes_);
  Vinv_ = V_.partialPivLu().inverse();

  E_ = basis_at(vol_pts_);
  grad_at(vol_pts_, Dr_, Ds_);
  Ef_.resize(n_faces_);
  Drf_.resize(n_faces_);
  Dsf_.resize(n_faces_);
  face_nodes_.resize(n_faces_);
  for (int f = 0; f < n_faces_; ++f) {
    const MatrixXd pts = face_points(f);
    Ef_[f] = basis_at(pts);
    grad_at(pts, Drf_[f], Dsf_[f]);
    // collect volume nodes on this face, ordered by the face parameter
    const Vec2 a = face_ends_[f][0], d = face_ends_[f][1] - face_ends_[f][0];
    std::vector<std::pair<double, int>> on_face;
    for (int i = 0; i < n_nodes(); ++i) {
      const Vec2 p = nodes_.row(i).transpose();
      const double t = (p - a).dot(d) / d.squaredNorm();
      const Vec2 proj = a + t * d;
      if ((p - proj).norm() < 1e-10 && t > -1e-10 && t < 1.0 + 1e-10)
        on_face.emplace_back(t, i);
    }
    std::sort(on_face.begin(), on_face.end());
    for (auto& [t, i] : on_face) face_nodes_[f].push_back(i);
  }
}

ReferenceElement build_reference_element(ElementKind kind, int k, int strength) {
  if (strength < 0) strength = 2 * k;
  require(strength >= 2 * k, "reference element: cubature strength ", strength,
          " below the 2k requirement for k = ", k);
  return ReferenceElement(kind, k, strength);
}

}  // namespace cdg
