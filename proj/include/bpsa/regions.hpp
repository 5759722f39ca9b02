#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bpsa/arm.hpp"

namespace bpsa {

enum class RegionKind { kTask, kObstacle, kBase };

RegionKind region_kind_from_string(const std::string& s);
std::string to_string(RegionKind kind);

// Convex polygon in the workspace, vertices counter-clockwise.
struct Region {
  std::string id;
  RegionKind kind = RegionKind::kTask;
  std::vector<Vec2> vertices;
  Vec2 center = Vec2::Zero();  // area centroid

  // Validates the polygon and fills in the centroid.
  static Region make(std::string id, RegionKind kind, std::vector<Vec2> vertices);
  static Region square(std::string id, RegionKind kind, const Vec2& center, double half_side);

  double max_radius() const;
};

// |a x~| < a_bar about an equilibrium.
struct Slab {
  Vec2 normal;    // unit row vector a_i
  double half_width = 0.0;  // a_bar_i, m
};

struct ConstraintSet {
  std::vector<Slab> slabs;
  Vec x_bounds;   // workspace displacement box x_bar, m
  Vec qd_bounds;  // joint velocity box, rad/s
  Vec u_bounds;   // torque box, N*m
  double w_bar = 1.0;  // human force norm bound, N

  void validate() const;
};

bool contains(const Region& r, const Vec2& x);

Vec2 closest_point(const Region& r, const Vec2& x);

// Throws EquilibriumInsideObstacle when x_e is inside r.
Slab build_slab(const Vec2& x_e, const Region& r);

// per_edge equally spaced points per edge, each vertex once.
std::vector<Vec2> edge_samples(const Region& r, int per_edge);

}  // namespace bpsa
