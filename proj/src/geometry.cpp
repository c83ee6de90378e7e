#include "approxsense/geometry.hpp"

#include <cmath>

#include "approxsense/error.hpp"

namespace approxsense {

namespace {

using nlohmann::json;

ClusterComponent axis_component(const Vector& mu) {
  const auto m = mu.size();
  return {Vector::Zero(m), Matrix::Identity(m, m), mu};
}

Vector vector_from_json(const json& j, const std::string& field) {
  require(j.is_array() && !j.empty(), ErrorCode::kConfig, "geometry: '" + field + "' must be a nonempty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    require(j[k].is_number(), ErrorCode::kConfig, "geometry: '" + field + "' must hold numbers");
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  require(j.is_array() && !j.empty(), ErrorCode::kConfig, "geometry: '" + field + "' must be a list of rows");
  Matrix out;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r], field);
    if (r == 0) out.resize(static_cast<Eigen::Index>(j.size()), row.size());
    require(row.size() == out.cols(), ErrorCode::kConfig, "geometry: '" + field + "' rows differ in length");
    out.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return out;
}

json to_json_vector(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json_matrix(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) rows.push_back(to_json_vector(a.row(r).transpose()));
  return rows;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, ErrorCode::kConfig, "geometry: unknown key '" + key + "'");
  }
}

const json& field(const json& j, const char* name) {
  require(j.contains(name), ErrorCode::kConfig, std::string("geometry: missing '") + name + "'");
  return j.at(name);
}

}  // namespace

std::string to_string(GeometryModel::Variant variant) {
  switch (variant) {
    case GeometryModel::Variant::kPBall: return "pball";
    case GeometryModel::Variant::kEllipse: return "ellipse";
    case GeometryModel::Variant::kAxisUnion: return "axis_union";
    case GeometryModel::Variant::kRotatedUnion: return "rotated_union";
    case GeometryModel::Variant::kClustered: return "clustered";
  }
  return "unknown";
}

GeometryModel GeometryModel::pball(double R_p, double p, int m) {
  require(m >= 1, ErrorCode::kInvalidArgument, "pball: m must be >= 1");
  crude_bounds(R_p, p);
  GeometryModel g;
  g.variant = Variant::kPBall;
  g.p = p;
  g.m = m;
  g.radius = R_p;
  return g;
}

GeometryModel GeometryModel::ellipse(const Vector& mu, double p) {
  GeometryModel g;
  g.variant = Variant::kEllipse;
  g.p = p;
  g.m = static_cast<int>(mu.size());
  ellipse_rademacher(mu, p, g.m);
  g.components.push_back(axis_component(mu));
  return g;
}

GeometryModel GeometryModel::axis_union(const std::vector<Vector>& mus, double p) {
  require(!mus.empty(), ErrorCode::kInvalidArgument, "axis_union: no ellipses");
  GeometryModel g;
  g.variant = Variant::kAxisUnion;
  g.p = p;
  g.m = static_cast<int>(mus.front().size());
  union_ellipse_bound(mus, p, g.m);
  for (const auto& mu : mus) g.components.push_back(axis_component(mu));
  return g;
}

GeometryModel GeometryModel::rotated_union(const std::vector<RotatedEllipse>& parts, double p) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "rotated_union: no ellipses");
  GeometryModel g;
  g.variant = Variant::kRotatedUnion;
  g.p = p;
  g.m = static_cast<int>(parts.front().mu.size());
  rotated_union_bound(parts, p, g.m);
  for (const auto& part : parts) g.components.push_back({Vector::Zero(g.m), part.V, part.mu});
  return g;
}

GeometryModel GeometryModel::clustered(std::vector<ClusterComponent> parts, double p) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "clustered: no components");
  GeometryModel g;
  g.variant = Variant::kClustered;
  g.p = p;
  g.m = static_cast<int>(parts.front().mu.size());
  cluster_bound(parts, p, g.m);
  g.components = std::move(parts);
  return g;
}

GeometryModel geometry_from_json(const json& j) {
  require(j.is_object(), ErrorCode::kConfig, "geometry: expected a JSON object");
  const std::string variant = field(j, "variant").get<std::string>();
  const json& pj = field(j, "p");
  require(pj.is_number(), ErrorCode::kConfig, "geometry: 'p' must be a number");
  const double p = pj.get<double>();
  if (variant == "pball") {
    check_keys(j, {"variant", "p", "m", "radius"});
    return GeometryModel::pball(field(j, "radius").get<double>(), p, field(j, "m").get<int>());
  }
  if (variant == "ellipse") {
    check_keys(j, {"variant", "p", "mu"});
    return GeometryModel::ellipse(vector_from_json(field(j, "mu"), "mu"), p);
  }
  if (variant == "axis_union") {
    check_keys(j, {"variant", "p", "mus"});
    std::vector<Vector> mus;
    for (const auto& mu : field(j, "mus")) mus.push_back(vector_from_json(mu, "mus"));
    return GeometryModel::axis_union(mus, p);
  }
  if (variant == "rotated_union" || variant == "clustered") {
    check_keys(j, {"variant", "p", "components"});
    std::vector<ClusterComponent> parts;
    for (const auto& c : field(j, "components")) {
      const Vector mu = vector_from_json(field(c, "mu"), "mu");
      const Matrix V = matrix_from_json(field(c, "V"), "V");
      if (variant == "clustered") {
        check_keys(c, {"center", "V", "mu"});
        parts.push_back({vector_from_json(field(c, "center"), "center"), V, mu});
      } else {
        check_keys(c, {"V", "mu"});
        parts.push_back({Vector::Zero(mu.size()), V, mu});
      }
    }
    if (variant == "clustered") return GeometryModel::clustered(std::move(parts), p);
    std::vector<RotatedEllipse> rotated;
    for (const auto& part : parts) rotated.push_back({part.V, part.mu});
    return GeometryModel::rotated_union(rotated, p);
  }
  throw Error(ErrorCode::kConfig, "geometry: unknown variant '" + variant + "'");
}

json to_json(const GeometryModel& g) {
  json j;
  j["variant"] = to_string(g.variant);
  j["p"] = g.p;
  switch (g.variant) {
    case GeometryModel::Variant::kPBall:
      j["m"] = g.m;
      j["radius"] = g.radius;
      break;
    case GeometryModel::Variant::kEllipse:
      j["mu"] = to_json_vector(g.components.front().mu);
      break;
    case GeometryModel::Variant::kAxisUnion:
      j["mus"] = json::array();
      for (const auto& c : g.components) j["mus"].push_back(to_json_vector(c.mu));
      break;
    case GeometryModel::Variant::kRotatedUnion:
    case GeometryModel::Variant::kClustered:
      j["components"] = json::array();
      for (const auto& c : g.components) {
        json cj;
        cj["V"] = to_json_matrix(c.V);
        cj["mu"] = to_json_vector(c.mu);
        if (g.variant == GeometryModel::Variant::kClustered) cj["center"] = to_json_vector(c.center);
        j["components"].push_back(cj);
      }
      break;
  }
  return j;
}

RadEstimate rademacher_of(const GeometryModel& g) {
  switch (g.variant) {
    case GeometryModel::Variant::kPBall: {
      RadEstimate est;
      est.m = g.m;
      est.value = crude_bounds(g.radius, g.p).second;
      est.method = RadEstimate::Method::kCertifiedUpper;
      est.notes.push_back("crude lower bound " + std::to_string(crude_bounds(g.radius, g.p).first));
      return est;
    }
    case GeometryModel::Variant::kEllipse:
      return ellipse_rademacher(g.components.front().mu, g.p, g.m);
    case GeometryModel::Variant::kAxisUnion: {
      std::vector<Vector> mus;
      for (const auto& c : g.components) mus.push_back(c.mu);
      return union_ellipse_bound(mus, g.p, g.m);
    }
    case GeometryModel::Variant::kRotatedUnion: {
      std::vector<RotatedEllipse> parts;
      for (const auto& c : g.components) parts.push_back({c.V, c.mu});
      return rotated_union_bound(parts, g.p, g.m);
    }
    case GeometryModel::Variant::kClustered:
      return cluster_bound(g.components, g.p, g.m);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown geometry variant");
}

Vector support_point(const ClusterComponent& part, double p, const Vector& direction) {
  const Vector g = part.mu.cwiseProduct(part.V.transpose() * direction);
  return part.center + part.V * part.mu.cwiseProduct(holder_maximizer(g, p));
}

double support_function(const GeometryModel& g, const Vector& direction) {
  require(direction.size() == g.m, ErrorCode::kDimensionMismatch, "direction length must equal m");
  if (g.variant == GeometryModel::Variant::kPBall) {
    return positive_orthant_ball_sup(direction, g.radius * std::pow(g.m, 1.0 / g.p), g.p);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& part : g.components) best = std::max(best, direction.dot(support_point(part, g.p, direction)));
  return best;
}

Vector sample_inside(const ClusterComponent& part, double p, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector z(part.mu.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = gauss(rng);
  const double norm = lp_norm(z, p);
  if (norm > 0.0) z *= std::pow(unit(rng), 1.0 / static_cast<double>(z.size())) / norm;
  return part.center + part.V * part.mu.cwiseProduct(z);
}

}  // namespace approxsense
