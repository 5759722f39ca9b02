#include "bpsa/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bpsa/error.hpp"

namespace bpsa {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 closest_on_segment(const Vec2& a, const Vec2& b, const Vec2& x) {
  const Vec2 d = b - a;
  const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return a + t * d;
}

}  // namespace

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "task") return RegionKind::kTask;
  if (s == "obstacle") return RegionKind::kObstacle;
  if (s == "base") return RegionKind::kBase;
  throw Error(ErrorCode::kValidationError, "unknown region kind '" + s + "'");
}

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::kTask: return "task";
    case RegionKind::kObstacle: return "obstacle";
    case RegionKind::kBase: return "base";
  }
  return "task";
}

Region Region::make(std::string id, RegionKind kind, std::vector<Vec2> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) throw Error(ErrorCode::kValidationError, "region " + id + " needs >= 3 vertices");
  double area2 = 0.0;
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    const Vec2& c = vertices[(i + 2) % n];
    if (cross(b - a, c - b) <= 0.0) {
      throw Error(ErrorCode::kValidationError,
                  "region " + id + " is not strictly convex counter-clockwise");
    }
    const double w = cross(a, b);
    area2 += w;
    acc += w * (a + b);
  }
  Region r;
  r.id = std::move(id);
  r.kind = kind;
  r.vertices = std::move(vertices);
  r.center = acc / (3.0 * area2);
  return r;
}

Region Region::square(std::string id, RegionKind kind, const Vec2& center, double half_side) {
  const double h = half_side;
  return make(std::move(id), kind,
              {center + Vec2(-h, -h), center + Vec2(h, -h), center + Vec2(h, h),
               center + Vec2(-h, h)});
}

double Region::max_radius() const {
  double r = 0.0;
  for (const auto& v : vertices) r = std::max(r, (v - center).norm());
  return r;
}

void ConstraintSet::validate() const {
  auto positive = [](const Vec& v) { return v.size() > 0 && (v.array() > 0.0).all(); };
  if (!positive(x_bounds) || !positive(qd_bounds) || !positive(u_bounds) || !(w_bar > 0.0)) {
    throw Error(ErrorCode::kValidationError, "constraint bounds must be strictly positive");
  }
  for (const auto& s : slabs) {
    if (std::abs(s.normal.norm() - 1.0) > 1e-12 || !(s.half_width > 0.0)) {
      throw Error(ErrorCode::kValidationError, "slab normal must be unit and width positive");
    }
  }
}

bool contains(const Region& r, const Vec2& x) {
  const std::size_t n = r.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = r.vertices[i];
    const Vec2& b = r.vertices[(i + 1) % n];
    const Vec2 edge = b - a;
    // Scale-aware tolerance so that points on an edge count as inside.
    if (cross(edge, x - a) < -1e-12 * edge.norm()) return false;
  }
  return true;
}

Vec2 closest_point(const Region& r, const Vec2& x) {
  if (contains(r, x)) return x;
  const std::size_t n = r.vertices.size();
  Vec2 best = r.vertices.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = closest_on_segment(r.vertices[i], r.vertices[(i + 1) % n], x);
    const double d = (p - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

Slab build_slab(const Vec2& x_e, const Region& r) {
  if (contains(r, x_e)) {
    throw Error(ErrorCode::kEquilibriumInsideObstacle, "equilibrium inside region " + r.id);
  }
  const Vec2 p = closest_point(r, x_e);
  const Vec2 d = p - x_e;
  const double dist = d.norm();
  if (!(dist > 0.0)) {
    throw Error(ErrorCode::kEquilibriumInsideObstacle, "equilibrium on boundary of " + r.id);
  }
  return {d / dist, dist};
}

std::vector<Vec2> edge_samples(const Region& r, int per_edge) {
  if (per_edge < 2) throw Error(ErrorCode::kInvalidArgument, "per_edge must be >= 2");
  const std::size_t n = r.vertices.size();
  std::vector<Vec2> out;
  out.reserve(n * (per_edge - 1));
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = r.vertices[i];
    const Vec2& b = r.vertices[(i + 1) % n];
    // The far endpoint is emitted as the next edge's first point.
    for (int k = 0; k < per_edge - 1; ++k) {
      const double t = static_cast<double>(k) / (per_edge - 1);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

}  // namespace bpsa
