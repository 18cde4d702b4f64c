#include "spag/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include <nlohmann/json.hpp>

#include "spag/errors.hpp"

namespace spag {

namespace {

constexpr double kCollinearTol = 1e-12;
constexpr double kRankTol = 1e-10;
constexpr double kMergeTol = 1e-12;

using P2 = std::array<double, 2>;
using P3 = std::array<double, 3>;

double cross(const P2& o, const P2& a, const P2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

P3 sub(const P3& a, const P3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot3(const P3& a, const P3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
P3 cross3(const P3& a, const P3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
double norm3(const P3& a) { return std::sqrt(dot3(a, a)); }
P3 scale3(const P3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

void push_row(ValuePolytope& p, std::vector<double> n, double b) {
  p.normals.push_back(std::move(n));
  p.offsets.push_back(b);
}

}  // namespace

bool ValuePolytope::contains(const std::vector<double>& x, double tol) const {
  for (std::size_t i = 0; i < normals.size(); ++i) {
    double v = 0.0;
    for (std::size_t d = 0; d < normals[i].size(); ++d) v += normals[i][d] * x[d];
    if (v > offsets[i] + tol) return false;
  }
  return true;
}

std::vector<P2> convex_hull_2d(std::vector<P2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const P2& a, const P2& b) {
                          return std::fabs(a[0] - b[0]) <= kMergeTol &&
                                 std::fabs(a[1] - b[1]) <= kMergeTol;
                        }),
            pts.end());
  int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;

  std::vector<P2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= kCollinearTol) --k;
    hull[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {  // upper chain
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= kCollinearTol) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() == 2 && std::fabs(hull[0][0] - hull[1][0]) <= kMergeTol &&
      std::fabs(hull[0][1] - hull[1][1]) <= kMergeTol) {
    hull.resize(1);
  }
  return hull;
}

ValuePolytope polytope_from_points_2d(const std::vector<P2>& points) {
  if (points.empty()) throw NumericalError("hull of an empty point set");
  std::vector<P2> hull = convex_hull_2d(points);
  ValuePolytope p;
  p.dimension = 2;
  for (const auto& v : hull) p.vertices.push_back({v[0], v[1]});

  if (hull.size() == 1) {
    const P2& v = hull[0];
    push_row(p, {1, 0}, v[0]);
    push_row(p, {-1, 0}, -v[0]);
    push_row(p, {0, 1}, v[1]);
    push_row(p, {0, -1}, -v[1]);
    return p;
  }
  if (hull.size() == 2) {
    const P2 &a = hull[0], &b = hull[1];
    double dx = b[0] - a[0], dy = b[1] - a[1];
    double len = std::hypot(dx, dy);
    dx /= len;
    dy /= len;
    // Two side rows squeeze onto the carrier line, two caps bound the ends.
    push_row(p, {dy, -dx}, dy * a[0] - dx * a[1]);
    push_row(p, {-dy, dx}, -(dy * a[0] - dx * a[1]));
    push_row(p, {dx, dy}, dx * b[0] + dy * b[1]);
    push_row(p, {-dx, -dy}, -(dx * a[0] + dy * a[1]));
    return p;
  }
  int k = static_cast<int>(hull.size());
  for (int i = 0; i < k; ++i) {
    const P2 &a = hull[i], &b = hull[(i + 1) % k];
    double dx = b[0] - a[0], dy = b[1] - a[1];
    double len = std::hypot(dx, dy);
    // CCW boundary: outward normal is the edge direction rotated clockwise.
    double nx = dy / len, ny = -dx / len;
    push_row(p, {nx, ny}, nx * a[0] + ny * a[1]);
  }
  return p;
}

namespace {

struct Face {
  int a, b, c;
  P3 n;       // outward unit normal
  double off;
};

Face make_face(const std::vector<P3>& v, int a, int b, int c, const P3& inside) {
  Face f{a, b, c, {}, 0};
  P3 n = cross3(sub(v[b], v[a]), sub(v[c], v[a]));
  double len = norm3(n);
  if (len < 1e-300) throw NumericalError("degenerate hull face");
  n = scale3(n, 1.0 / len);
  double off = dot3(n, v[a]);
  if (dot3(n, inside) > off) {  // flip to keep the interior below the plane
    std::swap(f.b, f.c);
    n = scale3(n, -1.0);
    off = -off;
  }
  f.n = n;
  f.off = off;
  return f;
}

ValuePolytope hull_3d_full(const std::vector<P3>& v, int i0, int i1, int i2, int i3) {
  P3 inside = {0, 0, 0};
  for (int i : {i0, i1, i2, i3}) inside = {inside[0] + v[i][0] / 4,
                                           inside[1] + v[i][1] / 4,
                                           inside[2] + v[i][2] / 4};
  double scale = 0.0;
  for (const auto& p : v) scale = std::max(scale, norm3(sub(p, inside)));
  double eps = kRankTol * (1.0 + scale);

  std::vector<Face> faces = {make_face(v, i0, i1, i2, inside),
                             make_face(v, i0, i1, i3, inside),
                             make_face(v, i0, i2, i3, inside),
                             make_face(v, i1, i2, i3, inside)};
  for (int p = 0; p < static_cast<int>(v.size()); ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    std::vector<char> visible(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (dot3(faces[f].n, v[p]) - faces[f].off > eps) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    // Horizon: directed edges of visible faces whose opposite face is hidden.
    std::map<std::pair<int, int>, char> edge_visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const Face& fc = faces[f];
      for (auto [x, y] : {std::pair{fc.a, fc.b}, {fc.b, fc.c}, {fc.c, fc.a}}) {
        edge_visible[{x, y}] = 1;
      }
    }
    std::vector<std::pair<int, int>> horizon;
    for (const auto& [e, _] : edge_visible) {
      if (!edge_visible.count({e.second, e.first})) horizon.push_back(e);
    }
    std::vector<Face> next;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) next.push_back(faces[f]);
    }
    for (const auto& [x, y] : horizon) {
      next.push_back(make_face(v, x, y, p, inside));
    }
    faces = std::move(next);
  }

  ValuePolytope poly;
  poly.dimension = 3;
  std::vector<char> used(v.size(), 0);
  for (const Face& f : faces) used[f.a] = used[f.b] = used[f.c] = 1;
  std::vector<std::vector<double>> verts;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (used[i]) verts.push_back({v[i][0], v[i][1], v[i][2]});
  }
  std::sort(verts.begin(), verts.end());
  poly.vertices = std::move(verts);

  // Merge coplanar triangles into one facet row apiece.
  for (const Face& f : faces) {
    bool dup = false;
    for (std::size_t r = 0; r < poly.normals.size(); ++r) {
      double d = f.n[0] * poly.normals[r][0] + f.n[1] * poly.normals[r][1] +
                 f.n[2] * poly.normals[r][2];
      if (d > 1.0 - 1e-8 && std::fabs(f.off - poly.offsets[r]) <= 1e-8 * (1 + scale)) {
        dup = true;
        break;
      }
    }
    if (!dup) push_row(poly, {f.n[0], f.n[1], f.n[2]}, f.off);
  }

  // Exactly degenerate inputs can leave points that sit inside a facet or on
  // an edge: coplanar points are never visible to the faces they lie on, so
  // the insertion pass strands them in sliver triangles.  A true corner of a
  // full-dimensional polytope meets facets spanning all three directions; an
  // edge point meets two, a face point one.  Drop everything below rank 3.
  double on_tol = 1e-8 * (1.0 + scale);
  std::vector<std::vector<double>> corners;
  for (const auto& vert : poly.vertices) {
    std::vector<P3> basis;
    int rank = 0;
    for (std::size_t r = 0; r < poly.normals.size() && rank < 3; ++r) {
      double d = poly.normals[r][0] * vert[0] + poly.normals[r][1] * vert[1] +
                 poly.normals[r][2] * vert[2];
      if (std::fabs(d - poly.offsets[r]) > on_tol) continue;
      P3 w = {poly.normals[r][0], poly.normals[r][1], poly.normals[r][2]};
      for (const P3& b : basis) w = sub(w, scale3(b, dot3(w, b)));
      double len = norm3(w);
      if (len > 1e-7) {
        basis.push_back(scale3(w, 1.0 / len));
        ++rank;
      }
    }
    if (rank == 3) corners.push_back(vert);
  }
  poly.vertices = std::move(corners);
  return poly;
}

}  // namespace

ValuePolytope polytope_from_points_3d(const std::vector<P3>& points) {
  if (points.empty()) throw NumericalError("hull of an empty point set");
  std::vector<P3> v = points;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [](const P3& a, const P3& b) {
                        return std::fabs(a[0] - b[0]) <= kMergeTol &&
                               std::fabs(a[1] - b[1]) <= kMergeTol &&
                               std::fabs(a[2] - b[2]) <= kMergeTol;
                      }),
          v.end());

  // Affine rank probes: a farthest pair, then distance from their line, then
  // distance from the spanned plane.
  int n = static_cast<int>(v.size());
  int i1 = -1;
  double best = kRankTol;
  for (int i = 1; i < n; ++i) {
    double d = norm3(sub(v[i], v[0]));
    if (d > best) {
      best = d;
      i1 = i;
    }
  }
  if (i1 < 0) {  // a single point
    ValuePolytope p;
    p.dimension = 3;
    p.vertices.push_back({v[0][0], v[0][1], v[0][2]});
    for (int d = 0; d < 3; ++d) {
      std::vector<double> plus(3, 0.0), minus(3, 0.0);
      plus[d] = 1.0;
      minus[d] = -1.0;
      push_row(p, plus, v[0][d]);
      push_row(p, minus, -v[0][d]);
    }
    return p;
  }
  P3 d1 = scale3(sub(v[i1], v[0]), 1.0 / norm3(sub(v[i1], v[0])));
  int i2 = -1;
  best = kRankTol;
  for (int i = 0; i < n; ++i) {
    P3 r = sub(v[i], v[0]);
    P3 perp = sub(r, scale3(d1, dot3(r, d1)));
    if (norm3(perp) > best) {
      best = norm3(perp);
      i2 = i;
    }
  }
  if (i2 < 0) {  // collinear: a segment along d1
    double tmin = 0.0, tmax = 0.0;
    for (int i = 0; i < n; ++i) {
      double t = dot3(sub(v[i], v[0]), d1);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    P3 lo = {v[0][0] + tmin * d1[0], v[0][1] + tmin * d1[1], v[0][2] + tmin * d1[2]};
    P3 hi = {v[0][0] + tmax * d1[0], v[0][1] + tmax * d1[1], v[0][2] + tmax * d1[2]};
    ValuePolytope p;
    p.dimension = 3;
    p.vertices.push_back({lo[0], lo[1], lo[2]});
    if (norm3(sub(hi, lo)) > kMergeTol) p.vertices.push_back({hi[0], hi[1], hi[2]});
    // Two orthogonal side pairs pin the carrier line, two caps the ends.
    P3 any = std::fabs(d1[0]) < 0.9 ? P3{1, 0, 0} : P3{0, 1, 0};
    P3 n2 = cross3(d1, any);
    n2 = scale3(n2, 1.0 / norm3(n2));
    P3 n3 = cross3(d1, n2);
    for (const P3& nn : {n2, n3}) {
      push_row(p, {nn[0], nn[1], nn[2]}, dot3(nn, v[0]));
      push_row(p, {-nn[0], -nn[1], -nn[2]}, -dot3(nn, v[0]));
    }
    push_row(p, {d1[0], d1[1], d1[2]}, dot3(d1, hi));
    push_row(p, {-d1[0], -d1[1], -d1[2]}, -dot3(d1, lo));
    return p;
  }
  P3 r2 = sub(v[i2], v[0]);
  P3 d2 = sub(r2, scale3(d1, dot3(r2, d1)));
  d2 = scale3(d2, 1.0 / norm3(d2));
  P3 nz = cross3(d1, d2);
  int i3 = -1;
  best = kRankTol;
  for (int i = 0; i < n; ++i) {
    double d = std::fabs(dot3(sub(v[i], v[0]), nz));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (i3 < 0) {  // coplanar: 2D hull inside the carrier plane
    std::vector<P2> flat(n);
    for (int i = 0; i < n; ++i) {
      flat[i] = {dot3(sub(v[i], v[0]), d1), dot3(sub(v[i], v[0]), d2)};
    }
    ValuePolytope flat_poly = polytope_from_points_2d(flat);
    ValuePolytope p;
    p.dimension = 3;
    for (const auto& fv : flat_poly.vertices) {
      p.vertices.push_back({v[0][0] + fv[0] * d1[0] + fv[1] * d2[0],
                            v[0][1] + fv[0] * d1[1] + fv[1] * d2[1],
                            v[0][2] + fv[0] * d1[2] + fv[1] * d2[2]});
    }
    double po = dot3(nz, v[0]);
    push_row(p, {nz[0], nz[1], nz[2]}, po);
    push_row(p, {-nz[0], -nz[1], -nz[2]}, -po);
    for (std::size_t r = 0; r < flat_poly.normals.size(); ++r) {
      double nx = flat_poly.normals[r][0], ny = flat_poly.normals[r][1];
      P3 n3d = {nx * d1[0] + ny * d2[0], nx * d1[1] + ny * d2[1],
                nx * d1[2] + ny * d2[2]};
      push_row(p, {n3d[0], n3d[1], n3d[2]},
               flat_poly.offsets[r] + dot3(n3d, v[0]));
    }
    return p;
  }
  return hull_3d_full(v, 0, i1, i2, i3);
}

std::string polytope_to_json(const ValuePolytope& p) {
  nlohmann::json j;
  j["dimension"] = p.dimension;
  j["vertices"] = p.vertices;
  j["H"] = p.normals;
  j["b"] = p.offsets;
  j["owner"]["h"] = p.owner_h;
  j["owner"]["o"] = {p.owner.s, p.owner.ap, p.owner.aa};
  return j.dump();
}

ValuePolytope polytope_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    ValuePolytope p;
    p.dimension = j.at("dimension").get<int>();
    p.vertices = j.at("vertices").get<std::vector<std::vector<double>>>();
    p.normals = j.at("H").get<std::vector<std::vector<double>>>();
    p.offsets = j.at("b").get<std::vector<double>>();
    p.owner_h = j.at("owner").at("h").get<int>();
    auto o = j.at("owner").at("o").get<std::vector<int>>();
    p.owner = {o.at(0), o.at(1), o.at(2)};
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid polytope json: ") + e.what());
  }
}

}  // namespace spag
