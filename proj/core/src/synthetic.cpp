#include <cmath>
#include <complex>

#include "loom/model_io.hpp"

// Bundled synthetic model. The topology (joint/constraint counts, ROM tables,
// actuator ratings, total mass) follows the published system; all link
// geometry and inertia values are stand-ins chosen so that every loop closes
// across the full independent-joint range of motion.

namespace loom {

namespace {

// Overall layout (x forward, y left, z up; root body is the pelvis).
constexpr double kTotalMass = 34.68;

// Spine platform (6UPS).
constexpr double kSpineOriginZ = 0.35;        // nominal platform height over the pelvis
constexpr double kSpineBaseRingZ = 0.10;      // leg base ring height
constexpr double kSpineBaseRadius = 0.16;
constexpr double kSpinePlatformRadius = 0.11;
constexpr double kSpineAnchorDrop = -0.03;    // anchors sit below the platform origin
constexpr double kSpineRefExtension = 0.055;  // mid of the [0, 0.11] actuator range
constexpr double kScrewLead = 0.005;
constexpr double kRotorGear = 3.0;

// Hip / ankle (3R2US-style: six crank-universal-rod chains, three actuated).
constexpr double kHipCenterY = 0.11;
constexpr double kHipCenterZ = -0.10;
constexpr double kChainBaseRadius = 0.115;
constexpr double kChainPlatformRadius = 0.05;
constexpr double kChainPlatformDrop = -0.06;
constexpr double kChainElbowDrop = -0.08;  // elbow below the crank pivot at reference
constexpr double kHipGear = 80.0;

// Knee slider-crank and seat linkage, in the sagittal (x, z) plane.
constexpr double kThighLength = 0.40;
constexpr double kShankLength = 0.42;
constexpr double kRailX = 0.03;
constexpr double kRailZ = 0.22;  // rail origin above the knee, along the thigh
constexpr double kCrankRadius = 0.12;
constexpr double kSeatPivotX = 0.02, kSeatPivotZ = -0.12;      // on the shank
constexpr double kSupportPivotX = -0.05, kSupportPivotZ = 0.08;  // on the thigh
constexpr double kSeatRatio = 0.5;
constexpr double kKneeLead = 0.005;
constexpr double kKneeGear = 3.0;

// Foot geometry.
constexpr double kAnkleSoleDrop = -0.07;
constexpr double kFootHalfLength = 0.11;
constexpr double kFootHalfWidth = 0.05;

// Table ratings.
struct Rom {
  double lo, hi;
};
constexpr Rom kSpineRomX{-0.143, 0.122};
constexpr Rom kSpineRomY{-0.153, 0.153};
constexpr Rom kSpineRomZ{-0.056, 0.057};
constexpr Rom kSpineRomRoll{-0.576, 0.585};
constexpr Rom kSpineRomPitch{-0.576, 0.576};
constexpr Rom kSpineRomYaw{-1.518, 1.518};
constexpr Rom kKneeRom{-0.064, 0.09};
constexpr Rom kHipRomRoll{-0.349, 0.646};
constexpr Rom kHipRomPitch{-0.262, 0.611};
constexpr Rom kHipRomYaw{-0.349, 0.646};
constexpr Rom kActuatorRomSpine{0.0, 0.11};
constexpr Rom kActuatorRomMotor{-0.436, 0.436};

constexpr double kSpineForce = 570.0, kSpineVel = 0.34;
constexpr double kKneeForce = 662.0, kKneeVel = 0.34;
constexpr double kHipTorque = 176.0, kHipVel = 2.39;
constexpr double kAnkleTorque = 28.0, kAnkleVel = 7.17;

Vec3 rpy_of(const Mat3& R) {
  Vec3 ea = R.eulerAngles(2, 1, 0);
  return Vec3(ea[2], ea[1], ea[0]);
}

Mat3 aim_z(const Vec3& direction) {
  return Quat::FromTwoVectors(Vec3::UnitZ(), direction.normalized()).toRotationMatrix();
}

std::array<double, 6> box_inertia(double mass, const Vec3& extents) {
  double ixx = mass / 12.0 * (extents.y() * extents.y() + extents.z() * extents.z());
  double iyy = mass / 12.0 * (extents.x() * extents.x() + extents.z() * extents.z());
  double izz = mass / 12.0 * (extents.x() * extents.x() + extents.y() * extents.y());
  return {ixx, iyy, izz, 0.0, 0.0, 0.0};
}

struct DocBuilder {
  ModelDocument doc;

  DocBuilder() {
    // Joint references returned by joint() stay valid only while the vector
    // does not reallocate.
    doc.joints.reserve(1024);
    doc.bodies.reserve(1024);
  }

  void body(const std::string& name, double mass, const Vec3& com, const Vec3& extents) {
    BodyEntry b;
    b.name = name;
    b.mass = mass;
    b.com = com;
    b.inertia = box_inertia(std::max(mass, 1e-6), extents);
    if (mass <= 0.0) b.inertia = {0, 0, 0, 0, 0, 0};
    doc.bodies.push_back(b);
  }

  JointEntry& joint(const std::string& name, const std::string& kind, const std::string& parent,
                    const std::string& child, const Vec3& xyz, const Vec3& rpy, const Vec3& axis) {
    JointEntry e;
    e.name = name;
    e.kind = kind;
    e.parent = parent;
    e.child = child;
    e.origin_xyz = xyz;
    e.origin_rpy = rpy;
    e.axis = axis;
    doc.joints.push_back(e);
    return doc.joints.back();
  }

  void frame(const std::string& name, const std::string& body, const Vec3& xyz,
             const Vec3& rpy = Vec3::Zero()) {
    doc.frames.push_back(FrameEntry{name, body, xyz, rpy});
  }
};

void set_rom(JointEntry& j, const Rom& rom) {
  j.lower = rom.lo;
  j.upper = rom.hi;
}

void set_actuator(JointEntry& j, const Rom& rom, double vel, double effort) {
  set_rom(j, rom);
  j.velocity = vel;
  j.effort = effort;
  j.actuated = true;
}

// Knee drive-loop closed form, duplicated here to freeze the calibration
// reference into the document (the runtime resolver re-derives the same
// values from the geometry block).
struct KneeFit {
  double rod_length;
  double pin_x, pin_z;
  double seat_length, support_length;
  // reference posture at d = 0
  double theta0, phi0, psi_seat0, psi_support0;
};

KneeFit fit_knee() {
  using cplx = std::complex<double>;
  KneeFit fit;
  auto rs_at = [&](double d) { return std::hypot(kRailX, kRailZ - d); };
  double rs_min = rs_at(kKneeRom.hi);
  double rs_max = rs_at(kKneeRom.lo);
  double L_min = rs_max - kCrankRadius;
  double L_max = kCrankRadius + rs_min;
  fit.rod_length = 0.5 * (L_min + L_max);

  // Place the crank pin so the hinge angle is zero at d = 0.
  cplx S0(kRailX, kRailZ);
  double rs0 = std::abs(S0);
  double c0 = (kCrankRadius * kCrankRadius + rs0 * rs0 - fit.rod_length * fit.rod_length) /
              (2.0 * kCrankRadius * rs0);
  double arg_beta = std::arg(S0) - std::acos(c0);
  fit.pin_x = kCrankRadius * std::cos(arg_beta);
  fit.pin_z = kCrankRadius * std::sin(arg_beta);
  fit.theta0 = 0.0;

  cplx beta(fit.pin_x, fit.pin_z);
  fit.phi0 = -std::arg((beta - S0) / fit.rod_length);

  // Seat four-bar: equal link lengths sized against the pivot distance range.
  cplx P2(kSupportPivotX, kSupportPivotZ);
  double d_min = 1e9, d_max = 0.0;
  for (int k = 0; k <= 100; ++k) {
    // Sweep the hinge range induced by the slider range.
    double d = kKneeRom.lo + (kKneeRom.hi - kKneeRom.lo) * k / 100.0;
    cplx S(kRailX, kRailZ - d);
    double rs = std::abs(S);
    double cp = (kCrankRadius * kCrankRadius + rs * rs - fit.rod_length * fit.rod_length) /
                (2.0 * kCrankRadius * rs);
    double theta = arg_beta - std::arg(S) + std::acos(cp);
    cplx P1 = std::polar(1.0, -theta) * cplx(kSeatPivotX, kSeatPivotZ);
    double dist = std::abs(P2 - P1);
    d_min = std::min(d_min, dist);
    d_max = std::max(d_max, dist);
  }
  fit.seat_length = fit.support_length = 0.58 * d_max;

  // Reference seat angles at theta = 0.
  cplx P1 = cplx(kSeatPivotX, kSeatPivotZ);
  cplx delta = P2 - P1;
  double dist = std::abs(delta);
  double a = (fit.seat_length * fit.seat_length - fit.support_length * fit.support_length +
              dist * dist) /
             (2.0 * dist);
  double h = std::sqrt(fit.seat_length * fit.seat_length - a * a);
  cplx D = P1 + a * delta / dist + h * cplx(0, 1) * delta / dist;
  fit.psi_seat0 = -std::arg((D - P1) / fit.seat_length);
  fit.psi_support0 = -std::arg((D - P2) / fit.support_length);
  return fit;
}

void add_spine(DocBuilder& b, double torso_mass) {
  const std::string prefix = "s1";
  // Virtual pose chain: the six independent spine coordinates.
  const char* vnames[6] = {"x", "y", "z", "roll", "pitch", "yaw"};
  const char* vkinds[6] = {"prismatic", "prismatic", "prismatic", "revolute", "revolute", "revolute"};
  const Vec3 vaxes[6] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(),
                         Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Rom vroms[6] = {kSpineRomX, kSpineRomY, kSpineRomZ, kSpineRomRoll, kSpineRomPitch, kSpineRomYaw};
  std::string parent = "pelvis";
  SubmechanismEntry sub;
  sub.name = "s1_spine";
  sub.type = "stewart_6ups";
  sub.resolver = "analytical";
  for (int k = 0; k < 6; ++k) {
    std::string child = (k == 5) ? "torso" : prefix + "_v" + std::to_string(k);
    if (k < 5) b.body(child, 0.0, Vec3::Zero(), Vec3::Zero());
    Vec3 xyz = (k == 0) ? Vec3(0, 0, kSpineOriginZ) : Vec3::Zero();
    auto& j = b.joint(prefix + "_spine_" + vnames[k], vkinds[k], parent, child, xyz, Vec3::Zero(), vaxes[k]);
    set_rom(j, vroms[k]);
    j.independent = true;
    sub.joints.push_back(j.name);
    parent = child;
  }
  b.body("torso", torso_mass, Vec3(0, 0, 0.18), Vec3(0.30, 0.35, 0.45));

  sub.geometry["virtual_origin"] = {0.0, 0.0, kSpineOriginZ};
  sub.geometry["screw_lead"] = {kScrewLead};
  sub.geometry["rotor_gear"] = {kRotorGear};

  // Six UPS legs, cut at the platform anchors.
  for (int i = 0; i < 6; ++i) {
    int pair = i / 2;
    double spread = (i % 2 == 0) ? -0.30 : 0.30;
    double base_angle = 2.0 * M_PI / 3.0 * pair + spread;
    double anchor_angle = 2.0 * M_PI / 3.0 * pair + M_PI / 3.0 - spread;
    Vec3 base(kSpineBaseRadius * std::cos(base_angle), kSpineBaseRadius * std::sin(base_angle),
              kSpineBaseRingZ);
    Vec3 anchor_local(kSpinePlatformRadius * std::cos(anchor_angle),
                      kSpinePlatformRadius * std::sin(anchor_angle), kSpineAnchorDrop);
    Vec3 anchor_world = Vec3(0, 0, kSpineOriginZ) + anchor_local;
    Vec3 w = anchor_world - base;
    Mat3 orient = aim_z(w);
    double retracted = w.norm() - kSpineRefExtension;

    std::string leg = prefix + "_leg" + std::to_string(i);
    b.body(leg + "_yoke", 0.04, Vec3::Zero(), Vec3(0.03, 0.03, 0.03));
    b.body(leg + "_tube", 0.18, Vec3(0, 0, 0.08), Vec3(0.03, 0.03, 0.18));
    b.body(leg + "_piston", 0.12, Vec3(0, 0, -0.05), Vec3(0.02, 0.02, 0.16));
    auto& u1 = b.joint(leg + "_u1", "revolute", "pelvis", leg + "_yoke", base, rpy_of(orient), Vec3::UnitX());
    auto& u2 = b.joint(leg + "_u2", "revolute", leg + "_yoke", leg + "_tube", Vec3::Zero(), Vec3::Zero(), Vec3::UnitY());
    (void)u1;
    (void)u2;
    auto& ext = b.joint(leg + "_ext", "prismatic", leg + "_tube", leg + "_piston", Vec3::Zero(), Vec3::Zero(), Vec3::UnitZ());
    set_actuator(ext, kActuatorRomSpine, kSpineVel, kSpineForce);
    b.frame(leg + "_tip", leg + "_piston", Vec3(0, 0, retracted));
    b.frame(prefix + "_anchor" + std::to_string(i), "torso", anchor_local);
    sub.joints.push_back(u1.name);
    sub.joints.push_back(u2.name);
    sub.joints.push_back(ext.name);
    sub.cuts.push_back(CutEntry{prefix + "_cut" + std::to_string(i), leg + "_tip",
                                prefix + "_anchor" + std::to_string(i)});
    sub.reference[ext.name] = kSpineRefExtension;

    std::string idx = std::to_string(i);
    sub.geometry["leg" + idx + "_base_xyz"] = {base.x(), base.y(), base.z()};
    Vec3 rpy = rpy_of(orient);
    sub.geometry["leg" + idx + "_base_rpy"] = {rpy.x(), rpy.y(), rpy.z()};
    sub.geometry["leg" + idx + "_retracted_length"] = {retracted};
    sub.geometry["anchor" + idx] = {anchor_local.x(), anchor_local.y(), anchor_local.z()};
  }

  // Drive-train followers: ballscrew spin and motor rotor per leg.
  for (int i = 0; i < 6; ++i) {
    std::string leg = prefix + "_leg" + std::to_string(i);
    b.body(leg + "_screw", 0.04, Vec3::Zero(), Vec3(0.015, 0.015, 0.12));
    b.body(leg + "_rotor", 0.06, Vec3::Zero(), Vec3(0.03, 0.03, 0.04));
    auto& screw = b.joint(leg + "_screw_spin", "revolute", leg + "_tube", leg + "_screw",
                          Vec3(0, 0, 0.04), Vec3::Zero(), Vec3::UnitZ());
    screw.mimic = JointEntry::Mimic{leg + "_ext", 2.0 * M_PI / kScrewLead, 0.0};
    auto& rotor = b.joint(leg + "_rotor_spin", "revolute", leg + "_tube", leg + "_rotor",
                          Vec3(0, 0, -0.02), Vec3::Zero(), Vec3::UnitZ());
    rotor.mimic = JointEntry::Mimic{leg + "_ext", 2.0 * M_PI / kScrewLead * kRotorGear, 0.0};
    sub.joints.push_back(screw.name);
    sub.joints.push_back(rotor.name);
    sub.reference[screw.name] = kSpineRefExtension * 2.0 * M_PI / kScrewLead;
    sub.reference[rotor.name] = kSpineRefExtension * 2.0 * M_PI / kScrewLead * kRotorGear;
  }
  b.doc.submechanisms.push_back(sub);
}

/// 3R2US-style orientation block: three virtual rpy joints plus six
/// crank-universal-rod chains cut at the platform; cranks 0, 2, 4 actuated.
void add_orientation_block(DocBuilder& b, const std::string& prefix, const std::string& root,
                           const std::string& platform, double platform_mass,
                           const Vec3& platform_com, const Vec3& platform_extents,
                           const Vec3& center, double motor_torque, double motor_vel,
                           const std::string& type_tag) {
  SubmechanismEntry sub;
  sub.name = prefix;
  sub.type = type_tag;
  sub.resolver = "numerical";

  const char* vnames[3] = {"roll", "pitch", "yaw"};
  const Vec3 vaxes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  const Rom vroms[3] = {kHipRomRoll, kHipRomPitch, kHipRomYaw};
  std::string parent = root;
  for (int k = 0; k < 3; ++k) {
    std::string child = (k == 2) ? platform : prefix + "_v" + std::to_string(k);
    if (k < 2) b.body(child, 0.0, Vec3::Zero(), Vec3::Zero());
    Vec3 xyz = (k == 0) ? center : Vec3::Zero();
    auto& j = b.joint(prefix + "_" + vnames[k], "revolute", parent, child, xyz, Vec3::Zero(), vaxes[k]);
    set_rom(j, vroms[k]);
    j.independent = true;
    sub.joints.push_back(j.name);
    parent = child;
  }
  b.body(platform, platform_mass, platform_com, platform_extents);

  for (int i = 0; i < 6; ++i) {
    double crank_angle = 2.0 * M_PI / 6.0 * i + M_PI / 6.0;
    double anchor_angle = 2.0 * M_PI / 6.0 * i;
    Vec3 pivot = center + Vec3(kChainBaseRadius * std::cos(crank_angle),
                               kChainBaseRadius * std::sin(crank_angle), 0.0);
    Vec3 tangent(-std::sin(crank_angle), std::cos(crank_angle), 0.0);
    Vec3 anchor_local(kChainPlatformRadius * std::cos(anchor_angle),
                      kChainPlatformRadius * std::sin(anchor_angle), kChainPlatformDrop);
    Vec3 anchor_world = center + anchor_local;
    Vec3 elbow = pivot + Vec3(0, 0, kChainElbowDrop);
    Vec3 w = anchor_world - elbow;
    double rod = w.norm();
    Mat3 orient = aim_z(w);

    std::string ch = prefix + "_ch" + std::to_string(i);
    bool actuated = (i % 2 == 0);
    b.body(ch + "_crank", 0.08, Vec3(0, 0, kChainElbowDrop / 2), Vec3(0.02, 0.02, 0.07));
    b.body(ch + "_yoke", 0.02, Vec3::Zero(), Vec3(0.02, 0.02, 0.02));
    b.body(ch + "_rod", 0.06, Vec3(0, 0, rod / 2), Vec3(0.015, 0.015, rod));
    auto& crank = b.joint(ch + "_crank_spin", "revolute", root, ch + "_crank", pivot, Vec3::Zero(), tangent);
    if (actuated) set_actuator(crank, kActuatorRomMotor, motor_vel, motor_torque);
    auto& u1 = b.joint(ch + "_u1", "revolute", ch + "_crank", ch + "_yoke",
                       Vec3(0, 0, kChainElbowDrop), rpy_of(orient), Vec3::UnitX());
    auto& u2 = b.joint(ch + "_u2", "revolute", ch + "_yoke", ch + "_rod", Vec3::Zero(), Vec3::Zero(), Vec3::UnitY());
    (void)u1;
    (void)u2;
    b.frame(ch + "_tip", ch + "_rod", Vec3(0, 0, rod));
    b.frame(prefix + "_anchor" + std::to_string(i), platform, anchor_local);
    sub.joints.push_back(crank.name);
    sub.joints.push_back(u1.name);
    sub.joints.push_back(u2.name);
    sub.cuts.push_back(CutEntry{prefix + "_cut" + std::to_string(i), ch + "_tip",
                                prefix + "_anchor" + std::to_string(i)});
  }

  // Gearbox rotors on the three actuated cranks.
  for (int k = 0; k < 3; ++k) {
    int i = 2 * k;
    double crank_angle = 2.0 * M_PI / 6.0 * i + M_PI / 6.0;
    Vec3 pivot = center + Vec3(kChainBaseRadius * std::cos(crank_angle),
                               kChainBaseRadius * std::sin(crank_angle), 0.0);
    Vec3 tangent(-std::sin(crank_angle), std::cos(crank_angle), 0.0);
    std::string ch = prefix + "_ch" + std::to_string(i);
    b.body(ch + "_rotor", 0.04, Vec3::Zero(), Vec3(0.03, 0.03, 0.03));
    auto& rotor = b.joint(ch + "_rotor_spin", "revolute", root, ch + "_rotor",
                          pivot + Vec3(0, 0, 0.03), Vec3::Zero(), tangent);
    rotor.mimic = JointEntry::Mimic{ch + "_crank_spin", kHipGear, 0.0};
    sub.joints.push_back(rotor.name);
  }
  b.doc.submechanisms.push_back(sub);
}

void add_knee(DocBuilder& b, const std::string& prefix, const std::string& thigh,
              const std::string& shank, const KneeFit& fit) {
  Vec3 knee(0, 0, -kThighLength);
  SubmechanismEntry sub;
  sub.name = prefix;
  sub.type = "knee_slidercrank";
  sub.resolver = "analytical";

  b.body(prefix + "_carriage", 0.25, Vec3::Zero(), Vec3(0.04, 0.04, 0.06));
  b.body(prefix + "_rod", 0.12, Vec3(fit.rod_length / 2, 0, 0), Vec3(fit.rod_length, 0.02, 0.02));
  b.body(shank, 2.2, Vec3(0, 0, -0.20), Vec3(0.08, 0.08, kShankLength));
  b.body(prefix + "_seat_link", 0.15, Vec3(fit.seat_length / 2, 0, 0), Vec3(fit.seat_length, 0.02, 0.02));
  b.body(prefix + "_support_link", 0.12, Vec3(fit.support_length / 2, 0, 0),
         Vec3(fit.support_length, 0.02, 0.02));
  b.body(prefix + "_screw", 0.05, Vec3::Zero(), Vec3(0.015, 0.015, 0.10));
  b.body(prefix + "_rotor", 0.08, Vec3::Zero(), Vec3(0.03, 0.03, 0.04));
  b.body(prefix + "_seat_surface", 0.30, Vec3(0.05, 0, 0), Vec3(0.16, 0.20, 0.02));

  auto& slide = b.joint(prefix + "_knee_slide", "prismatic", thigh, prefix + "_carriage",
                        knee + Vec3(kRailX, 0, kRailZ), Vec3::Zero(), -Vec3::UnitZ());
  set_actuator(slide, kKneeRom, kKneeVel, kKneeForce);
  slide.independent = true;
  auto& pivot = b.joint(prefix + "_rod_pivot", "revolute", prefix + "_carriage", prefix + "_rod",
                        Vec3::Zero(), Vec3::Zero(), Vec3::UnitY());
  auto& hinge = b.joint(prefix + "_knee_hinge", "revolute", thigh, shank, knee, Vec3::Zero(), Vec3::UnitY());
  auto& seat = b.joint(prefix + "_seat_pivot", "revolute", shank, prefix + "_seat_link",
                       Vec3(kSeatPivotX, 0, kSeatPivotZ), Vec3::Zero(), Vec3::UnitY());
  auto& support = b.joint(prefix + "_support_pivot", "revolute", thigh, prefix + "_support_link",
                          knee + Vec3(kSupportPivotX, 0, kSupportPivotZ), Vec3::Zero(), Vec3::UnitY());
  auto& screw = b.joint(prefix + "_screw_spin", "revolute", prefix + "_carriage", prefix + "_screw",
                        Vec3::Zero(), Vec3::Zero(), Vec3::UnitZ());
  screw.mimic = JointEntry::Mimic{slide.name, 2.0 * M_PI / kKneeLead, 0.0};
  auto& rotor = b.joint(prefix + "_rotor_spin", "revolute", thigh, prefix + "_rotor",
                        knee + Vec3(kRailX, 0, kRailZ + 0.05), Vec3::Zero(), Vec3::UnitZ());
  rotor.mimic = JointEntry::Mimic{slide.name, 2.0 * M_PI / kKneeLead * kKneeGear, 0.0};
  auto& tilt = b.joint(prefix + "_seat_tilt", "revolute", prefix + "_seat_link",
                       prefix + "_seat_surface", Vec3(fit.seat_length / 2, 0, 0), Vec3::Zero(), Vec3::UnitY());
  tilt.mimic = JointEntry::Mimic{hinge.name, kSeatRatio, 0.0};

  b.frame(prefix + "_rod_tip", prefix + "_rod", Vec3(fit.rod_length, 0, 0));
  b.frame(prefix + "_crank_pin", shank, Vec3(fit.pin_x, 0, fit.pin_z));
  b.frame(prefix + "_seat_tip", prefix + "_seat_link", Vec3(fit.seat_length, 0, 0));
  b.frame(prefix + "_support_tip", prefix + "_support_link", Vec3(fit.support_length, 0, 0));

  sub.joints = {slide.name, pivot.name, hinge.name,  seat.name,
                support.name, screw.name, rotor.name, tilt.name};
  sub.cuts = {CutEntry{prefix + "_cutA", prefix + "_rod_tip", prefix + "_crank_pin"},
              CutEntry{prefix + "_cutB", prefix + "_seat_tip", prefix + "_support_tip"}};
  sub.reference = {{pivot.name, fit.phi0},
                   {hinge.name, fit.theta0},
                   {seat.name, fit.psi_seat0},
                   {support.name, fit.psi_support0},
                   {tilt.name, fit.theta0 * kSeatRatio}};

  sub.geometry["rail_origin"] = {kRailX, kRailZ};
  sub.geometry["rod_length"] = {fit.rod_length};
  sub.geometry["crank_pin"] = {fit.pin_x, fit.pin_z};
  sub.geometry["seat_pivot"] = {kSeatPivotX, kSeatPivotZ};
  sub.geometry["seat_length"] = {fit.seat_length};
  sub.geometry["support_pivot"] = {kSupportPivotX, kSupportPivotZ};
  sub.geometry["support_length"] = {fit.support_length};
  sub.geometry["branch"] = {1.0};
  sub.geometry["seat_branch"] = {1.0};
  sub.geometry["screw_lead"] = {kKneeLead};
  sub.geometry["rotor_gear"] = {kKneeGear};
  sub.geometry["seat_ratio"] = {kSeatRatio};
  b.doc.submechanisms.push_back(sub);
}

}  // namespace

ModelDocument synthetic_recupera_document() {
  DocBuilder b;
  b.doc.name = "recupera_synthetic";
  b.doc.gravity = Vec3(0, 0, -9.81);

  b.body("pelvis", 3.6, Vec3(-0.02, 0, 0), Vec3(0.22, 0.30, 0.14));

  // Torso mass is the ballast that pins the published total.
  double torso_mass = kTotalMass - 3.6                    // pelvis
                      - 6 * (0.04 + 0.18 + 0.12 + 0.04 + 0.06)  // spine legs
                      - 4 * (6 * (0.08 + 0.02 + 0.06) + 3 * 0.04)  // hip/ankle chains
                      - 2 * (3.2 + 0.9)                   // thighs and feet
                      - 2 * (0.25 + 0.12 + 2.2 + 0.15 + 0.12 + 0.05 + 0.08 + 0.30);  // knees

  add_spine(b, torso_mass);

  KneeFit fit = fit_knee();
  auto add_leg = [&](const std::string& side, double y_sign, int hip_id, int knee_id, int ankle_id) {
    std::string hip = "s" + std::to_string(hip_id);
    std::string knee = "s" + std::to_string(knee_id);
    std::string ankle = "s" + std::to_string(ankle_id);
    add_orientation_block(b, hip + "_hip_" + side, "pelvis", "thigh_" + side, 3.2,
                          Vec3(0, 0, -0.22), Vec3(0.09, 0.09, kThighLength),
                          Vec3(0, y_sign * kHipCenterY, kHipCenterZ), kHipTorque, kHipVel,
                          "hip_ankle_3r2us");
    add_knee(b, knee + "_knee_" + side, "thigh_" + side, "shank_" + side, fit);
    add_orientation_block(b, ankle + "_ankle_" + side, "shank_" + side, "foot_" + side, 0.9,
                          Vec3(0.02, 0, -0.04), Vec3(2 * kFootHalfLength, 2 * kFootHalfWidth, 0.06),
                          Vec3(0, 0, -kShankLength), kAnkleTorque, kAnkleVel, "hip_ankle_3r2us");
    b.frame("sole_" + side, "foot_" + side, Vec3(0.02, 0, kAnkleSoleDrop));
    b.doc.feet.push_back(FootEntry{"sole_" + side, kFootHalfLength, kFootHalfWidth});
  };
  add_leg("left", +1.0, 2, 3, 4);
  add_leg("right", -1.0, 5, 6, 7);

  // Actuation order: spine legs, then each leg proximal to distal.
  for (int i = 0; i < 6; ++i) b.doc.actuators.push_back("s1_leg" + std::to_string(i) + "_ext");
  auto leg_actuators = [&](const std::string& side, int hip_id, int knee_id, int ankle_id) {
    for (int k = 0; k < 3; ++k) {
      b.doc.actuators.push_back("s" + std::to_string(hip_id) + "_hip_" + side + "_ch" +
                                std::to_string(2 * k) + "_crank_spin");
    }
    b.doc.actuators.push_back("s" + std::to_string(knee_id) + "_knee_" + side + "_knee_slide");
    for (int k = 0; k < 3; ++k) {
      b.doc.actuators.push_back("s" + std::to_string(ankle_id) + "_ankle_" + side + "_ch" +
                                std::to_string(2 * k) + "_crank_spin");
    }
  };
  leg_actuators("left", 2, 3, 4);
  leg_actuators("right", 5, 6, 7);

  return b.doc;
}

}  // namespace loom
