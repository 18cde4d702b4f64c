#ifndef SPAG_GEOMETRY_HPP
#define SPAG_GEOMETRY_HPP

#include <array>
#include <string>
#include <vector>

#include "spag/model.hpp"

namespace spag {

// Convex value region in halfspace form (rows n·x <= b with unit normals)
// together with its extreme points.  Lower-dimensional sets are encoded by
// paired opposing rows: a 2D point gets four pinning rows, a segment two cap
// rows plus two side rows, and similarly one dimension up in 3D.
struct ValuePolytope {
  int dimension = 2;
  std::vector<std::vector<double>> vertices;
  std::vector<std::vector<double>> normals;
  std::vector<double> offsets;
  int owner_h = 0;
  StateActionKey owner;

  bool contains(const std::vector<double>& x, double tol) const;
};

// Counterclockwise hull starting from the lexicographic minimum.  Coincident
// points are merged and collinear chain points dropped (cross products below
// 1e-12 count as straight), so the result lists exactly the extreme points.
std::vector<std::array<double, 2>> convex_hull_2d(
    std::vector<std::array<double, 2>> points);

// Hull plus halfspace rows for a 2D point cloud.
ValuePolytope polytope_from_points_2d(const std::vector<std::array<double, 2>>& points);

// Hull plus halfspace rows for a 3D point cloud.  Affine rank is detected
// first (residual thresholds at 1e-10) and flat inputs are routed to the
// matching lower-dimensional construction; full-dimensional hulls merge
// coplanar triangles into single facet rows.
ValuePolytope polytope_from_points_3d(const std::vector<std::array<double, 3>>& points);

std::string polytope_to_json(const ValuePolytope& p);
ValuePolytope polytope_from_json(const std::string& text);

}  // namespace spag

#endif  // SPAG_GEOMETRY_HPP
