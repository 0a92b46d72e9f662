#include "handitl/keyvec.hpp"

#include "handitl/json_util.hpp"

#include <istream>
#include <ostream>
#include <string>

namespace handitl {

KeyVectors KeyVectors::fromWristToTip(std::vector<Vec3> wrist_to_tip) {
  KeyVectors kv;
  kv.wrist_to_tip = std::move(wrist_to_tip);
  kv.opposition.resize(kv.wrist_to_tip.size());
  const Vec3 thumb = kv.wrist_to_tip.empty() ? Vec3::Zero() : kv.wrist_to_tip[HandModel::kThumb];
  for (std::size_t j = 0; j < kv.wrist_to_tip.size(); ++j) {
    kv.opposition[j] = kv.wrist_to_tip[j] - thumb;
  }
  return kv;
}

KeyVectors robot_keyvectors(const HandModel& model, const JointConfig& q) {
  return KeyVectors::fromWristToTip(fk_fingertips(model, q));
}

KeyVectors normalize_human(const HumanHandSample& sample, const NormalizationMap& map) {
  if (sample.tips.size() != map.scale.size()) {
    throw DimensionError("normalize_human: sample has " + std::to_string(sample.tips.size()) +
                         " tips, map has " + std::to_string(map.scale.size()) + " scales");
  }
  const Rotation to_robot = map.robot_from_human * sample.wrist.rotation.inverse();
  std::vector<Vec3> v(sample.tips.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = map.scale[i] * (to_robot * (sample.tips[i] - sample.wrist.position));
  }
  return KeyVectors::fromWristToTip(std::move(v));
}

RelativeDeltas relative_deltas(const KeyVectors& current, const KeyVectors& anchor) {
  if (current.wrist_to_tip.size() != anchor.wrist_to_tip.size() ||
      current.opposition.size() != anchor.opposition.size()) {
    throw DimensionError("relative_deltas: key vector shapes differ");
  }
  RelativeDeltas d;
  d.wrist_to_tip.resize(current.wrist_to_tip.size());
  d.opposition.resize(current.opposition.size());
  for (std::size_t i = 0; i < d.wrist_to_tip.size(); ++i) {
    d.wrist_to_tip[i] = current.wrist_to_tip[i] - anchor.wrist_to_tip[i];
  }
  for (std::size_t j = 0; j < d.opposition.size(); ++j) {
    d.opposition[j] = current.opposition[j] - anchor.opposition[j];
  }
  return d;
}

double thumb_distance(const KeyVectors& kv, int finger) {
  if (finger == HandModel::kThumb) {
    throw std::invalid_argument("thumb_distance: finger must not be the thumb");
  }
  if (finger < 0 || finger >= static_cast<int>(kv.opposition.size())) {
    throw std::out_of_range("thumb_distance: finger index " + std::to_string(finger));
  }
  return kv.opposition[static_cast<std::size_t>(finger)].norm();
}

NormalizationMap calibrate_normalization(const HandModel& model, const JointConfig& robot_reference,
                                         const HumanHandSample& calibration,
                                         const Rotation& robot_from_human) {
  const std::vector<Vec3> robot_tips = fk_fingertips(model, robot_reference);
  if (calibration.tips.size() != robot_tips.size()) {
    throw DimensionError("calibrate_normalization: finger count mismatch");
  }
  NormalizationMap map;
  map.robot_from_human = robot_from_human;
  map.scale.resize(robot_tips.size());
  for (std::size_t i = 0; i < robot_tips.size(); ++i) {
    const double human_len = (calibration.tips[i] - calibration.wrist.position).norm();
    if (!(human_len > 1e-6)) {
      throw std::invalid_argument("calibrate_normalization: degenerate human finger " +
                                  std::to_string(i));
    }
    map.scale[i] = robot_tips[i].norm() / human_len;
  }
  return map;
}

nlohmann::json human_sample_to_json(const HumanHandSample& s) {
  using namespace jsonio;
  json tips = json::array();
  for (const auto& t : s.tips) tips.push_back(vec3(t));
  return json{{"t", s.timestamp}, {"wrist", pose(s.wrist)}, {"tips", std::move(tips)}};
}

HumanHandSample human_sample_from_json(const nlohmann::json& j) {
  using namespace jsonio;
  HumanHandSample s;
  s.timestamp = j.at("t").get<double>();
  s.wrist = pose(j.at("wrist"));
  for (const auto& t : j.at("tips")) s.tips.push_back(vec3(t));
  return s;
}

void write_human_stream(std::ostream& out, const std::vector<HumanHandSample>& samples) {
  for (const auto& s : samples) out << human_sample_to_json(s).dump() << '\n';
}

std::vector<HumanHandSample> read_human_stream(std::istream& in) {
  std::vector<HumanHandSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(human_sample_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("human stream line " + std::to_string(lineno) + ": " + e.what());
    }
    if (out.size() > 1 && !(out.back().timestamp > out[out.size() - 2].timestamp)) {
      throw std::runtime_error("human stream line " + std::to_string(lineno) +
                               ": timestamps must increase");
    }
  }
  return out;
}

}  // namespace handitl
