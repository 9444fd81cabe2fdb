#pragma once

#include <json.hpp>

#include "axisforge/camera.hpp"

namespace axisforge::detail {

// R as three rows, T as a 3-array.
inline nlohmann::json pose_to_json(const Pose& p) {
  nlohmann::json R = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) R.push_back({p.R(i, 0), p.R(i, 1), p.R(i, 2)});
  return {{"R", R}, {"T", {p.T.x(), p.T.y(), p.T.z()}}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.R(i, k) = j.at("R").at(i).at(k).get<double>();
  for (int i = 0; i < 3; ++i) p.T[i] = j.at("T").at(i).get<double>();
  return p;
}

}  // namespace axisforge::detail
