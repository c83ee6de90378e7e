#pragma once

#include <string>
#include <vector>

#include "approxsense/rademacher.hpp"
#include "json.hpp"

namespace approxsense {

// Structured description of a sensitivity point set.
//
//   pball          nonnegative part of the l_p ball of radius R_p m^(1/p)
//   ellipse        one axis-aligned ellipse E_p(mu)
//   axis_union     union of axis-aligned ellipses
//   rotated_union  union of ellipses with principal directions V_i
//   clustered      union of rotated ellipses centred at c_i
//
// All variants except pball are stored as a list of components; axis-aligned
// components have V = I and c = 0.
struct GeometryModel {
  enum class Variant { kPBall, kEllipse, kAxisUnion, kRotatedUnion, kClustered };

  Variant variant = Variant::kEllipse;
  double p = 2.0;
  int m = 0;
  double radius = 0.0;  // pball only: R_p
  std::vector<ClusterComponent> components;

  static GeometryModel pball(double R_p, double p, int m);
  static GeometryModel ellipse(const Vector& mu, double p);
  static GeometryModel axis_union(const std::vector<Vector>& mus, double p);
  static GeometryModel rotated_union(const std::vector<RotatedEllipse>& parts, double p);
  static GeometryModel clustered(std::vector<ClusterComponent> parts, double p);
};

std::string to_string(GeometryModel::Variant variant);

GeometryModel geometry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeometryModel& g);

// Closed form or certified bound for the model's Rademacher complexity.
RadEstimate rademacher_of(const GeometryModel& g);

// Point of the component attaining sup <direction, x>, built from the Holder
// maximizer: x* = c + V diag(mu) z with z the unit-l_p maximizer of
// <diag(mu) V^T direction, z>.
Vector support_point(const ClusterComponent& part, double p, const Vector& direction);

// sup over the model's set of <direction, x>, evaluated at explicit maximizer
// points (pball uses the positive-orthant formula).
double support_function(const GeometryModel& g, const Vector& direction);

// Random point inside the component (boundary included).
Vector sample_inside(const ClusterComponent& part, double p, Rng& rng);

}  // namespace approxsense
