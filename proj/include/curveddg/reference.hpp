#pragma once

#include <array>
#include <vector>

#include "curveddg/types.hpp"

namespace cdg {

enum class ElementKind { Triangle, Quadrilateral };

inline int n_basis(ElementKind kind, int k) {
  return kind == ElementKind::Triangle ? (k + 1) * (k + 2) / 2 : (k + 1) * (k + 1);
}
inline int n_faces_of(ElementKind kind) { return kind == ElementKind::Triangle ? 3 : 4; }

struct Cubature1D {
  VectorXd x, w;
};

/// Gauss-Legendre rule on [-1,1]; n points, exact for degree 2n-1.
Cubature1D gauss_legendre_1d(int n);

/// Gauss-Lobatto rule on [-1,1]; n >= 2 points including the endpoints,
/// exact for degree 2n-3.
Cubature1D gauss_lobatto_1d(int n);

struct Cubature2D {
  MatrixXd pts;  // m x 2
  VectorXd w;
};

/// Symmetric positive-weight rule on the reference triangle
/// (-1,-1),(1,-1),(-1,1), exact to `strength`.  Tabulated; throws
/// "rule unavailable" beyond the stored maximum.
Cubature2D triangle_volume_cubature(int strength);
int triangle_cubature_max_strength();

/// Interpolation nodes: warp-and-blend (alpha-optimized) points on the
/// triangle, tensor Gauss-Lobatto on the quadrilateral.  Include all vertices
/// and respect the element symmetry group.
MatrixXd interpolation_nodes(ElementKind kind, int k);

/// Equispaced (barycentric-lattice / tensor) nodes: the layout mesh formats
/// use for high-order geometry.
MatrixXd equispaced_nodes(ElementKind kind, int k);

enum class NodeFamily { AlphaOptimized, Equispaced };

/// Nodal reference element: basis/derivative evaluation plus volume and face
/// cubature of the requested strength.  Immutable after construction.
///
/// Reference domains: triangle (-1,-1),(1,-1),(-1,1); quad [-1,1]^2.
/// Faces are traversed counterclockwise so outward normals are the tangent
/// rotated by -90 degrees.
class ReferenceElement {
 public:
  ReferenceElement() = default;
  ReferenceElement(ElementKind kind, int k, int strength,
                   NodeFamily nodes = NodeFamily::AlphaOptimized);

  ElementKind kind() const { return kind_; }
  int order() const { return k_; }
  int strength() const { return strength_; }
  int n_nodes() const { return static_cast<int>(nodes_.rows()); }
  int n_faces() const { return n_faces_; }

  const MatrixXd& nodes() const { return nodes_; }

  /// Nodal basis evaluation; rows = points, cols = basis functions.
  MatrixXd basis_at(const MatrixXd& pts) const;
  /// Reference-coordinate derivatives of the nodal basis at the given points.
  void grad_at(const MatrixXd& pts, MatrixXd& dr, MatrixXd& ds) const;

  const MatrixXd& vol_pts() const { return vol_pts_; }
  const VectorXd& vol_w() const { return vol_w_; }
  const Cubature1D& face_cub() const { return face_cub_; }

  /// Reference coordinates of face cubature points on local face f.
  MatrixXd face_points(int f) const;
  Vec2 face_vertex(int f, int end) const { return face_ends_[f][end]; }
  /// Length of face f in reference coordinates.
  double face_ref_length(int f) const;
  /// Volume-node indices lying on face f, ordered along the face.
  const std::vector<int>& face_nodes(int f) const { return face_nodes_[f]; }

  // Precomputed evaluations at the element's own cubature points.
  const MatrixXd& E() const { return E_; }
  const MatrixXd& Dr() const { return Dr_; }
  const MatrixXd& Ds() const { return Ds_; }
  const MatrixXd& Ef(int f) const { return Ef_[f]; }
  const MatrixXd& Drf(int f) const { return Drf_[f]; }
  const MatrixXd& Dsf(int f) const { return Dsf_[f]; }

  /// Vandermonde matrix of the orthonormal modal basis at the nodes.
  const MatrixXd& vandermonde() const { return V_; }

 private:
  ElementKind kind_ = ElementKind::Triangle;
  int k_ = 0, strength_ = 0, n_faces_ = 0;
  MatrixXd nodes_;
  MatrixXd vol_pts_;
  VectorXd vol_w_;
  Cubature1D face_cub_;
  std::array<std::array<Vec2, 2>, 4> face_ends_{};
  std::vector<std::vector<int>> face_nodes_;
  MatrixXd V_, Vinv_;
  MatrixXd E_, Dr_, Ds_;
  std::vector<MatrixXd> Ef_, Drf_, Dsf_;

  MatrixXd modal_at(const MatrixXd& pts) const;
  void modal_grad_at(const MatrixXd& pts, MatrixXd& dr, MatrixXd& ds) const;
};

ReferenceElement build_reference_element(ElementKind kind, int k, int strength = -1);

/// Normalized Jacobi polynomial values P_n^{(a,b)} at x (orthonormal on
/// [-1,1] with weight (1-x)^a (1+x)^b).
VectorXd jacobi_p(const VectorXd& x, double a, double b, int n);
VectorXd grad_jacobi_p(const VectorXd& x, double a, double b, int n);

}  // namespace cdg
