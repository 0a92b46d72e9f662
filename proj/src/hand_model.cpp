#include "handitl/hand_model.hpp"

#include "handitl/json_util.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace handitl {

HandModel::HandModel(std::string name, Pose palm, std::vector<Chain> chains,
                     std::vector<CollisionSphere> spheres, std::vector<ProximityPair> pairs)
    : name_(std::move(name)),
      palm_(palm),
      chains_(std::move(chains)),
      spheres_(std::move(spheres)),
      pairs_(std::move(pairs)) {
  if (chains_.empty()) throw ModelError("hand model needs at least one chain");
  for (auto& chain : chains_) {
    if (chain.joints.empty()) throw ModelError("chain '" + chain.name + "' has no joints");
    for (auto& joint : chain.joints) {
      const double n = joint.axis.norm();
      if (!(n > 1e-12) || !joint.axis.allFinite()) {
        throw ModelError("joint '" + joint.name + "' has a degenerate axis");
      }
      joint.axis /= n;
      if (!(joint.lower < joint.upper)) {
        throw ModelError("joint '" + joint.name + "' needs lower < upper");
      }
      if (!joint.offset.allFinite()) throw ModelError("joint '" + joint.name + "' offset");
    }
  }
  chain_offsets_.reserve(chains_.size());
  for (const auto& chain : chains_) {
    chain_offsets_.push_back(dof_);
    dof_ += static_cast<int>(chain.joints.size());
  }
  lower_.resize(dof_);
  upper_.resize(dof_);
  int k = 0;
  for (const auto& chain : chains_) {
    for (const auto& joint : chain.joints) {
      lower_[k] = joint.lower;
      upper_[k] = joint.upper;
      ++k;
    }
  }
  for (const auto& s : spheres_) {
    if (s.chain < 0 || s.chain >= fingerCount()) throw ModelError("sphere chain out of range");
    const int nj = static_cast<int>(chains_[static_cast<std::size_t>(s.chain)].joints.size());
    if (s.joint < 0 || s.joint >= nj) throw ModelError("sphere joint out of range");
    if (!(s.radius >= 0.0)) throw ModelError("sphere radius must be non-negative");
  }
  const int ns = static_cast<int>(spheres_.size());
  for (const auto& p : pairs_) {
    if (p.a == p.b) throw ModelError("proximity pair must reference two distinct spheres");
    if (p.a < 0 || p.b < 0 || p.a >= ns || p.b >= ns) throw ModelError("proximity pair out of range");
  }
}

void HandModel::checkConfig(const JointConfig& q) const {
  if (q.size() != dof_) {
    throw DimensionError("joint config has " + std::to_string(q.size()) + " entries, model '" +
                         name_ + "' has " + std::to_string(dof_));
  }
}

HandKinematics compute_kinematics(const HandModel& model, const JointConfig& q) {
  model.checkConfig(q);
  HandKinematics kin;
  kin.chains.resize(model.chains().size());
  const Mat3 palm_rot = model.palm().rotation.matrix();
  int k = 0;
  for (std::size_t c = 0; c < model.chains().size(); ++c) {
    const Chain& chain = model.chains()[c];
    ChainState& st = kin.chains[c];
    const std::size_t n = chain.joints.size();
    st.origins.resize(n);
    st.axes.resize(n);
    st.rotations.resize(n);
    Vec3 p = model.palm().position;
    Mat3 r = palm_rot;
    for (std::size_t j = 0; j < n; ++j, ++k) {
      const Joint& joint = chain.joints[j];
      p += r * joint.offset;
      st.origins[j] = p;
      st.axes[j] = r * joint.axis;
      r = r * Eigen::AngleAxisd(q[k], joint.axis).toRotationMatrix();
      st.rotations[j] = r;
    }
    st.tip = p + r * chain.tip_offset;
  }
  return kin;
}

Vec3 HandKinematics::pointOn(const HandModel&, int chain, int joint, const Vec3& local) const {
  const ChainState& st = chains[static_cast<std::size_t>(chain)];
  return st.origins[static_cast<std::size_t>(joint)] +
         st.rotations[static_cast<std::size_t>(joint)] * local;
}

void HandKinematics::accumulatePointJacobian(const HandModel& model, int chain, int joint,
                                             const Vec3& point, double scale,
                                             Matrix3X& jac) const {
  const ChainState& st = chains[static_cast<std::size_t>(chain)];
  const int base = model.chainOffset(chain);
  for (int j = 0; j <= joint; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    jac.col(base + j) += scale * st.axes[ju].cross(point - st.origins[ju]);
  }
}

std::vector<Vec3> fk_fingertips(const HandModel& model, const JointConfig& q) {
  const HandKinematics kin = compute_kinematics(model, q);
  std::vector<Vec3> tips;
  tips.reserve(kin.chains.size());
  for (const auto& st : kin.chains) tips.push_back(st.tip);
  return tips;
}

Matrix3X fingertip_jacobian(const HandModel& model, const JointConfig& q, int finger) {
  if (finger < 0 || finger >= model.fingerCount()) {
    throw std::out_of_range("fingertip_jacobian: finger index " + std::to_string(finger));
  }
  const HandKinematics kin = compute_kinematics(model, q);
  Matrix3X jac = Matrix3X::Zero(3, model.dof());
  const int last = static_cast<int>(model.chains()[static_cast<std::size_t>(finger)].joints.size()) - 1;
  kin.accumulatePointJacobian(model, finger, last, kin.chains[static_cast<std::size_t>(finger)].tip,
                              1.0, jac);
  return jac;
}

std::vector<ProximityDistance> proximity_distances(const HandModel& model, const JointConfig& q) {
  const HandKinematics kin = compute_kinematics(model, q);
  std::vector<ProximityDistance> out;
  out.reserve(model.pairs().size());
  for (const auto& pair : model.pairs()) {
    const auto& a = model.spheres()[static_cast<std::size_t>(pair.a)];
    const auto& b = model.spheres()[static_cast<std::size_t>(pair.b)];
    const Vec3 ca = kin.pointOn(model, a.chain, a.joint, a.center);
    const Vec3 cb = kin.pointOn(model, b.chain, b.joint, b.center);
    out.push_back({pair, (ca - cb).norm() - a.radius - b.radius});
  }
  return out;
}

JointConfig project_limits(const HandModel& model, const JointConfig& q) {
  model.checkConfig(q);
  JointConfig out = q.cwiseMax(model.lower()).cwiseMin(model.upper());
  // NaN entries survive cwiseMax/Min; pin them to the lower limit.
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (std::isnan(out[i])) out[i] = model.lower()[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file format

namespace {

constexpr const char* kModelFormat = "handitl-hand-model";
constexpr int kModelVersion = 1;

}  // namespace

HandModel hand_model_from_json(const nlohmann::json& doc) {
  using namespace jsonio;
  try {
    if (doc.value("format", std::string{}) != kModelFormat) {
      throw ModelError("not a hand model document (format field)");
    }
    if (doc.at("version").get<int>() != kModelVersion) {
      throw ModelError("unsupported hand model version " + doc.at("version").dump());
    }
    Pose palm;
    if (doc.contains("palm")) palm = pose(doc.at("palm"));
    std::vector<Chain> chains;
    for (const auto& jc : doc.at("chains")) {
      Chain chain;
      chain.name = jc.value("name", std::string{});
      for (const auto& jj : jc.at("joints")) {
        Joint joint;
        joint.name = jj.value("name", std::string{});
        joint.axis = vec3(jj.at("axis"));
        joint.offset = vec3(jj.at("offset"));
        const auto& lim = jj.at("limits");
        if (!lim.is_array() || lim.size() != 2) throw ModelError("limits must be [lower, upper]");
        joint.lower = lim[0].get<double>();
        joint.upper = lim[1].get<double>();
        chain.joints.push_back(std::move(joint));
      }
      chain.tip_offset = vec3(jc.at("tip"));
      chains.push_back(std::move(chain));
    }
    std::vector<CollisionSphere> spheres;
    if (doc.contains("spheres")) {
      for (const auto& js : doc.at("spheres")) {
        CollisionSphere s;
        s.chain = js.at("chain").get<int>();
        s.joint = js.at("joint").get<int>();
        s.radius = js.at("radius").get<double>();
        if (js.contains("center")) s.center = vec3(js.at("center"));
        spheres.push_back(s);
      }
    }
    std::vector<ProximityPair> pairs;
    if (doc.contains("pairs")) {
      for (const auto& jp : doc.at("pairs")) {
        if (!jp.is_array() || jp.size() != 2) throw ModelError("pairs entries must be [a, b]");
        pairs.push_back({jp[0].get<int>(), jp[1].get<int>()});
      }
    }
    return HandModel(doc.value("name", std::string{"unnamed"}), palm, std::move(chains),
                     std::move(spheres), std::move(pairs));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed hand model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("malformed hand model: ") + e.what());
  }
}

nlohmann::json hand_model_to_json(const HandModel& model) {
  using namespace jsonio;
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["name"] = model.name();
  doc["palm"] = pose(model.palm());
  json chains = json::array();
  for (const auto& chain : model.chains()) {
    json jc;
    jc["name"] = chain.name;
    json joints = json::array();
    for (const auto& joint : chain.joints) {
      joints.push_back({{"name", joint.name},
                        {"axis", vec3(joint.axis)},
                        {"offset", vec3(joint.offset)},
                        {"limits", json::array({joint.lower, joint.upper})}});
    }
    jc["joints"] = std::move(joints);
    jc["tip"] = vec3(chain.tip_offset);
    chains.push_back(std::move(jc));
  }
  doc["chains"] = std::move(chains);
  json spheres = json::array();
  for (const auto& s : model.spheres()) {
    spheres.push_back(
        {{"chain", s.chain}, {"joint", s.joint}, {"radius", s.radius}, {"center", vec3(s.center)}});
  }
  doc["spheres"] = std::move(spheres);
  json pairs = json::array();
  for (const auto& p : model.pairs()) pairs.push_back(json::array({p.a, p.b}));
  doc["pairs"] = std::move(pairs);
  return doc;
}

HandModel load_hand_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open hand model file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("cannot parse " + path.string() + ": " + e.what());
  }
  return hand_model_from_json(doc);
}

void save_hand_model(const HandModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write hand model file " + path.string());
  out << hand_model_to_json(model).dump(2) << '\n';
  if (!out) throw ModelError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Built-in models

namespace {

// Wrist frame: +x distal along the fingers, +y toward the thumb, +z dorsal.
// Finger flexion is a positive rotation about +y, which curls tips toward -z.
Chain make_finger(const std::string& name, const Vec3& base, double proximal, double middle,
                  double distal) {
  Chain c;
  c.name = name;
  c.joints = {
      {name + "_abd", Vec3::UnitZ(), base, -0.35, 0.35},
      {name + "_mcp", Vec3::UnitY(), Vec3::Zero(), -0.30, 1.60},
      {name + "_pip", Vec3::UnitY(), Vec3(proximal, 0.0, 0.0), -0.10, 1.80},
      {name + "_dip", Vec3::UnitY(), Vec3(middle, 0.0, 0.0), -0.10, 1.40},
  };
  c.tip_offset = Vec3(distal, 0.0, 0.0);
  return c;
}

Chain make_thumb() {
  const Vec3 dir(0.5, std::sqrt(3.0) / 2.0, 0.0);        // thumb points distal-radial
  const Vec3 flex(-std::sqrt(3.0) / 2.0, 0.5, 0.0);      // dir x flex = +z, so +angle curls palmar
  Chain c;
  c.name = "thumb";
  c.joints = {
      {"thumb_cmc_roll", Vec3::UnitX(), Vec3(0.030, 0.028, -0.015), -1.40, 0.40},
      {"thumb_cmc_abd", Vec3::UnitZ(), Vec3::Zero(), -1.00, 0.60},
      {"thumb_mcp", flex, 0.046 * dir, -0.30, 1.20},
      {"thumb_mcp_abd", Vec3::UnitZ(), Vec3::Zero(), -0.40, 0.40},
      {"thumb_ip", flex, 0.034 * dir, -0.30, 1.40},
  };
  c.tip_offset = 0.030 * dir;
  return c;
}

}  // namespace

HandModel default_hand_model() {
  std::vector<Chain> chains;
  chains.push_back(make_thumb());
  chains.push_back(make_finger("index", Vec3(0.092, 0.036, 0.0), 0.046, 0.028, 0.022));
  chains.push_back(make_finger("middle", Vec3(0.096, 0.012, 0.0), 0.050, 0.031, 0.023));
  chains.push_back(make_finger("ring", Vec3(0.092, -0.012, 0.0), 0.047, 0.029, 0.022));
  chains.push_back(make_finger("little", Vec3(0.084, -0.034, 0.0), 0.038, 0.022, 0.020));

  const double radii[] = {0.0085, 0.0075, 0.0075, 0.0075, 0.0070};
  std::vector<CollisionSphere> spheres;
  for (int c = 0; c < 5; ++c) {
    const auto& chain = chains[static_cast<std::size_t>(c)];
    spheres.push_back({c, static_cast<int>(chain.joints.size()) - 1, radii[c], chain.tip_offset});
  }
  // Adjacent finger tips, then thumb tip against every finger tip.
  std::vector<ProximityPair> pairs = {{1, 2}, {2, 3}, {3, 4}, {0, 1}, {0, 2}, {0, 3}, {0, 4}};
  return HandModel("default-21dof", Pose{}, std::move(chains), std::move(spheres),
                   std::move(pairs));
}

HandModel toy_finger_model() {
  Chain c;
  c.name = "finger";
  c.joints = {
      {"base", Vec3::UnitZ(), Vec3::Zero(), -0.60, 1.70},
      {"mid", Vec3::UnitZ(), Vec3(0.04, 0.0, 0.0), 0.00, 1.80},
  };
  c.tip_offset = Vec3(0.03, 0.0, 0.0);
  return HandModel("toy-2dof", Pose{}, {c}, {}, {});
}

}  // namespace handitl
