#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "curveddg/reference.hpp"
#include "curveddg/types.hpp"

namespace cdg {

enum class DomainKind { QuarterAnnulus, FullAnnulus };

struct AnnulusDomain {
  DomainKind kind = DomainKind::QuarterAnnulus;
  double r_inner = 1.0;
  double r_outer = 1.384;

  double theta_start() const { return 0.0; }
  double theta_end() const { return kind == DomainKind::QuarterAnnulus ? M_PI / 2.0 : 2.0 * M_PI; }
  /// Exact area (quarter or full ring).
  double area() const {
    const double full = M_PI * (r_outer * r_outer - r_inner * r_inner);
    return kind == DomainKind::QuarterAnnulus ? 0.25 * full : full;
  }
};

/// Analytic map from the parameter unit square (rho_hat, theta_hat) to the
/// annulus:  r = r_i + rho_hat (r_o - r_i),  theta spans the domain's arc.
Vec2 annulus_map(double rho_hat, double theta_hat, const AnnulusDomain& domain);

struct InteriorFace {
  int elem_l, face_l;
  int elem_r, face_r;
  bool reversed;  // R traverses the face opposite to L (the usual 2D case)
};

struct BoundaryFace {
  int elem, face;
  std::string tag;  // "inner", "outer", "theta0", "theta1"
};

/// Mesh with order-k_g polynomial geometry.  Every element stores its own
/// geometry-node coordinates (globally C^0 by construction: shared-face nodes
/// coincide).  Immutable after construction apart from the rigid-motion
/// helper used in tests.
struct CurvedMesh {
  ElementKind kind = ElementKind::Triangle;
  int k_g = 1;
  AnnulusDomain domain;
  double ar_nominal = 1.0;
  double ar_realized = 1.0;
  int n_rho = 0, n_theta = 0;
  // geometry node coordinates, one (n_geom_nodes x 2) block per element
  std::vector<MatrixXd> elements;
  std::vector<InteriorFace> interior_faces;
  std::vector<BoundaryFace> boundary_faces;

  int n_elements() const { return static_cast<int>(elements.size()); }
  int nodes_per_element() const { return n_basis(kind, k_g); }

  /// Rotate all geometry nodes about the origin (verification helper).
  void rotate(double angle);
};

/// Structured annular mesh with all elements curved through the analytic
/// mapping ("to-be-curved"): a parameter-square grid of n_rho x n_theta cells
/// (doubled per refinement level), quads used directly or split into triangle
/// pairs along a fixed diagonal.  Geometry nodes sit at the order-k_g
/// interpolation nodes of each cell mapped through annulus_map.
CurvedMesh generate_tobecurved_annulus(ElementKind kind, int k_g, int level, double ar_target,
                                       const AnnulusDomain& domain);

enum class NormalMode { FromGeometry, ExactAnnulus };

struct FaceGeometry {
  MatrixXd xy;      // physical coordinates at face cubature points (nfq x 2)
  VectorXd jw;      // area element times cubature weight
  MatrixXd normal;  // outward unit normal from the L side (nfq x 2)
  double length;    // physical arc length of the face
};

/// Metric data at the cubature points of `ref` for every element and face.
struct GeometryMaps {
  NormalMode normal_mode = NormalMode::FromGeometry;
  // volume data, per element, at ref.vol_pts()
  std::vector<VectorXd> det_j;
  std::vector<MatrixXd> inv_j;  // nq x 4, row-major [irx, iry, isx, isy]
  std::vector<MatrixXd> xq;     // physical coordinates, nq x 2
  // face data, aligned with mesh.interior_faces / mesh.boundary_faces
  std::vector<FaceGeometry> interior;
  std::vector<FaceGeometry> boundary;
  // map from the L-side face point index to the R-side index
  std::vector<std::vector<int>> interior_perm;
};

/// Compute Jacobians, area elements and outward normals of the order-k_g
/// geometry at the cubature points of `ref`.  With NormalMode::ExactAnnulus,
/// boundary normals on the circular arcs are replaced by the analytic radial
/// direction while the area element stays polynomial-derived.
GeometryMaps compute_geometry_maps(const CurvedMesh& mesh, const ReferenceElement& ref,
                                   NormalMode normal_mode = NormalMode::FromGeometry);

/// Mesh size h = sqrt(|Omega| / N) with |Omega| from cubature.
double mesh_size_h(const CurvedMesh& mesh);
/// Mesh area |Omega| by cubature of the geometry Jacobian.
double mesh_area(const CurvedMesh& mesh);

/// Longest-edge based element aspect ratio; maximum over the mesh.
double realized_aspect_ratio(const CurvedMesh& mesh);

// Self-describing text format (header, node coordinates, connectivity,
// boundary tags).
void save_mesh(const CurvedMesh& mesh, std::ostream& os);
void save_mesh(const CurvedMesh& mesh, const std::string& path);
CurvedMesh load_mesh(std::istream& is);
CurvedMesh load_mesh_file(const std::string& path);

/// SVG wireframe of the curved element edges.
void write_mesh_svg(const CurvedMesh& mesh, const std::string& path);

}  // namespace cdg
