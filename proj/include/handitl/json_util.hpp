#pragma once

// JSON conversions shared by the file formats (model, streams, logs, config).

#include "handitl/spatial.hpp"

#include <Eigen/Core>
#include "json.hpp"

#include <string>

namespace handitl::jsonio {

using nlohmann::json;

inline json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("expected a 3-element array, got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array, got " + j.dump());
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

/// Quaternion as [w, x, y, z].
inline json rotation(const Rotation& r) {
  const auto& q = r.quaternion();
  return json::array({q.w(), q.x(), q.y(), q.z()});
}

inline Rotation rotation(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("expected quaternion [w, x, y, z], got " + j.dump());
  }
  return Rotation(Eigen::Quaterniond(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                                     j[3].get<double>()));
}

inline json pose(const Pose& p) {
  return json{{"position", vec3(p.position)}, {"quaternion", rotation(p.rotation)}};
}

inline Pose pose(const json& j) {
  return {vec3(j.at("position")), rotation(j.at("quaternion"))};
}

inline json twist(const Twist& t) {
  return json{{"linear", vec3(t.linear)}, {"angular", vec3(t.angular)}};
}

inline Twist twist(const json& j) { return {vec3(j.at("linear")), vec3(j.at("angular"))}; }

/// Reads `key` into `out` when present.
template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace handitl::jsonio
