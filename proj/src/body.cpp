#include "soma/body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "soma/rng.hpp"

namespace soma {

using nlohmann::json;

namespace {

constexpr double kCapAngle = 0.25 * M_PI;  // polar angle of the single cap ring
constexpr double kBlendZone = 0.3;         // axial fraction blended toward the adjacent joint

double length_scale(const Joint& j, const std::array<double, 10>& shape) {
    double s = 1.0;
    for (int k = 0; k < 10; ++k) s += shape[k] * j.length_coeffs[k];
    return std::clamp(s, 0.3, 3.0);
}

double radius_scale(const Capsule& c, const std::array<double, 10>& shape) {
    double s = 1.0;
    for (int k = 0; k < 10; ++k) s += shape[k] * c.radius_coeffs[k];
    return std::clamp(s, 0.3, 3.0);
}

// Orthonormal capsule frame; bind directions never change with shape, so the
// frame is stable across the shape space.
struct CapsuleFrame {
    Vec3 P, C;      // proximal/distal joint positions
    Vec3 axis;      // unit P->C
    Vec3 u, v;      // radial basis, (u, v, axis) right-handed
    double radius;
};

CapsuleFrame capsule_frame(const SurrogateBody& body, int ci, const std::vector<Vec3>& bind,
                           const std::array<double, 10>& shape) {
    const Capsule& c = body.capsules[ci];
    CapsuleFrame f;
    f.P = bind[c.joint];
    f.C = bind[c.child];
    Vec3 d = f.C - f.P;
    f.axis = d.normalized();
    Vec3 ref{1, 0, 0};
    if (std::abs(f.axis.dot(ref)) > 0.9) ref = Vec3{0, 1, 0};
    f.u = ref.cross(f.axis).normalized();
    f.v = f.axis.cross(f.u);
    f.radius = c.radius * radius_scale(c, shape);
    return f;
}

Vec3 realize_vertex(const CapsuleFrame& f, const VertexSpec& vs) {
    Vec3 anchor = f.P + (f.C - f.P) * vs.t;
    Vec3 dir = f.axis * vs.local_dir.x + f.u * vs.local_dir.y + f.v * vs.local_dir.z;
    return anchor + dir * f.radius;
}

std::array<double, 10> coeffs(std::initializer_list<std::pair<int, double>> entries) {
    std::array<double, 10> c{};
    for (auto [i, v] : entries) c[i] = v;
    return c;
}

}  // namespace

bool Pose::finite() const {
    for (const auto& r : rotations)
        if (!r.finite()) return false;
    if (!translation.finite()) return false;
    for (double b : shape)
        if (!std::isfinite(b)) return false;
    return true;
}

int SurrogateBody::find_joint(const std::string& name) const {
    for (int i = 0; i < int(joints.size()); ++i)
        if (joints[i].name == name) return i;
    return -1;
}

int SurrogateBody::find_capsule_by_child(const std::string& child_name) const {
    int j = find_joint(child_name);
    for (int i = 0; i < int(capsules.size()); ++i)
        if (capsules[i].child == j) return i;
    return -1;
}

Pose SurrogateBody::rest_pose() const {
    Pose p;
    p.rotations.assign(joints.size(), Vec3{});
    return p;
}

std::vector<Vec3> SurrogateBody::bind_positions(const std::array<double, 10>& shape) const {
    std::vector<Vec3> pos(joints.size());
    for (int i = 0; i < int(joints.size()); ++i) {
        Vec3 off = joints[i].offset * length_scale(joints[i], shape);
        pos[i] = joints[i].parent < 0 ? off : pos[joints[i].parent] + off;
    }
    return pos;
}

std::vector<Vec3> SurrogateBody::shaped_vertices(const std::array<double, 10>& shape) const {
    auto bind = bind_positions(shape);
    std::vector<Vec3> out(vertex_specs.size());
    for (int ci = 0; ci < int(capsules.size()); ++ci) {
        CapsuleFrame f = capsule_frame(*this, ci, bind, shape);
        int base = ci * verts_per_capsule();
        for (int k = 0; k < verts_per_capsule(); ++k)
            out[base + k] = realize_vertex(f, vertex_specs[base + k]);
    }
    return out;
}

SurrogateBody SurrogateBody::build_default() {
    SurrogateBody b;
    auto joint = [&](const std::string& name, int parent, Vec3 off, Vec3 lo, Vec3 hi,
                     std::array<double, 10> lc) {
        b.joints.push_back({name, parent, off, lo, hi, lc});
        return int(b.joints.size()) - 1;
    };

    const auto all = coeffs({{0, 0.08}});
    const auto torso = coeffs({{0, 0.08}, {4, 0.05}});
    const auto arm = coeffs({{0, 0.08}, {3, 0.06}});
    const auto leg = coeffs({{0, 0.08}, {2, 0.06}});
    const auto shoulder_w = coeffs({{0, 0.08}, {5, 0.08}});
    const auto hip_w = coeffs({{0, 0.08}, {6, 0.08}});
    const auto head_c = coeffs({{0, 0.08}, {7, 0.06}});

    const Vec3 spine_lim{0.25, 0.25, 0.25};
    const Vec3 neck_lim{0.4, 0.5, 0.3};
    const Vec3 collar_lim{0.15, 0.15, 0.15};
    const Vec3 shoulder_lim{0.9, 0.9, 0.9};
    const Vec3 wrist_lim{0.3, 0.3, 0.3};
    const Vec3 hip_lim{0.8, 0.5, 0.5};
    const Vec3 ankle_lim{0.5, 0.3, 0.3};
    const Vec3 foot_lim{0.3, 0.2, 0.2};

    int pelvis = joint("pelvis", -1, {0, 0, 0}, {-M_PI, -M_PI, -M_PI}, {M_PI, M_PI, M_PI}, all);
    int spine1 = joint("spine1", pelvis, {0, 0.12, 0}, spine_lim * -1.0, spine_lim, torso);
    int spine2 = joint("spine2", spine1, {0, 0.13, 0}, spine_lim * -1.0, spine_lim, torso);
    int spine3 = joint("spine3", spine2, {0, 0.13, 0}, spine_lim * -1.0, spine_lim, torso);
    int neck = joint("neck", spine3, {0, 0.12, 0}, neck_lim * -1.0, neck_lim, torso);
    joint("head", neck, {0, 0.11, 0}, neck_lim * -1.0, neck_lim, head_c);
    int l_collar = joint("l_collar", spine3, {0.05, 0.08, 0}, collar_lim * -1.0, collar_lim, shoulder_w);
    int l_shoulder =
        joint("l_shoulder", l_collar, {0.14, 0, 0}, shoulder_lim * -1.0, shoulder_lim, arm);
    int l_elbow =
        joint("l_elbow", l_shoulder, {0.27, 0, 0}, {-0.1, -2.0, -0.15}, {0.1, 0.1, 0.15}, arm);
    joint("l_wrist", l_elbow, {0.25, 0, 0}, wrist_lim * -1.0, wrist_lim, arm);
    int r_collar = joint("r_collar", spine3, {-0.05, 0.08, 0}, collar_lim * -1.0, collar_lim, shoulder_w);
    int r_shoulder =
        joint("r_shoulder", r_collar, {-0.14, 0, 0}, shoulder_lim * -1.0, shoulder_lim, arm);
    int r_elbow =
        joint("r_elbow", r_shoulder, {-0.27, 0, 0}, {-0.1, -0.1, -0.15}, {0.1, 2.0, 0.15}, arm);
    joint("r_wrist", r_elbow, {-0.25, 0, 0}, wrist_lim * -1.0, wrist_lim, arm);
    int l_hip = joint("l_hip", pelvis, {0.09, -0.06, 0}, hip_lim * -1.0, hip_lim, hip_w);
    int l_knee = joint("l_knee", l_hip, {0, -0.40, 0}, {-2.0, -0.1, -0.1}, {0.05, 0.1, 0.1}, leg);
    int l_ankle = joint("l_ankle", l_knee, {0, -0.40, 0}, ankle_lim * -1.0, ankle_lim, leg);
    joint("l_foot", l_ankle, {0, -0.06, 0.14}, foot_lim * -1.0, foot_lim, leg);
    int r_hip = joint("r_hip", pelvis, {-0.09, -0.06, 0}, hip_lim * -1.0, hip_lim, hip_w);
    int r_knee = joint("r_knee", r_hip, {0, -0.40, 0}, {-2.0, -0.1, -0.1}, {0.05, 0.1, 0.1}, leg);
    int r_ankle = joint("r_ankle", r_knee, {0, -0.40, 0}, ankle_lim * -1.0, ankle_lim, leg);
    joint("r_foot", r_ankle, {0, -0.06, 0.14}, foot_lim * -1.0, foot_lim, leg);

    auto capsule = [&](const std::string& child, double radius, std::array<double, 10> rc) {
        int c = b.find_joint(child);
        b.capsules.push_back({b.joints[c].parent, c, radius, rc});
    };
    const auto girth_torso = coeffs({{0, 0.08}, {1, 0.12}, {9, 0.08}});
    const auto girth_limb = coeffs({{0, 0.08}, {1, 0.12}, {8, 0.08}});
    const auto girth_head = coeffs({{0, 0.08}, {1, 0.06}, {7, 0.06}});

    capsule("spine1", 0.10, girth_torso);
    capsule("spine2", 0.11, girth_torso);
    capsule("spine3", 0.11, girth_torso);
    capsule("neck", 0.05, girth_head);
    capsule("head", 0.09, girth_head);
    capsule("l_collar", 0.045, girth_torso);
    capsule("l_shoulder", 0.05, girth_limb);
    capsule("l_elbow", 0.045, girth_limb);
    capsule("l_wrist", 0.038, girth_limb);
    capsule("r_collar", 0.045, girth_torso);
    capsule("r_shoulder", 0.05, girth_limb);
    capsule("r_elbow", 0.045, girth_limb);
    capsule("r_wrist", 0.038, girth_limb);
    capsule("l_hip", 0.07, girth_limb);
    capsule("l_knee", 0.07, girth_limb);
    capsule("l_ankle", 0.055, girth_limb);
    capsule("l_foot", 0.035, girth_limb);
    capsule("r_hip", 0.07, girth_limb);
    capsule("r_knee", 0.07, girth_limb);
    capsule("r_ankle", 0.055, girth_limb);
    capsule("r_foot", 0.035, girth_limb);

    b.build_tessellation();
    b.validate();
    return b;
}

void SurrogateBody::build_tessellation() {
    const int S = segments, R = cyl_rings;
    const int per = verts_per_capsule();
    const double ca = std::cos(kCapAngle), sa = std::sin(kCapAngle);

    vertex_specs.clear();
    weights.clear();
    adjacency.clear();
    vertex_specs.reserve(capsules.size() * per);

    for (int ci = 0; ci < int(capsules.size()); ++ci) {
        const int base = ci * per;
        const int pole_p = base;
        const int pole_d = base + 1 + (R + 2) * S;
        auto ring_id = [&](int row, int s) { return base + 1 + row * S + ((s % S) + S) % S; };

        // proximal pole
        vertex_specs.push_back({ci, 0.0, Vec3{-1, 0, 0}});
        // rows: 0 = proximal cap ring, 1..R = cylinder, R+1 = distal cap ring
        for (int row = 0; row <= R + 1; ++row) {
            for (int s = 0; s < S; ++s) {
                double phi = 2.0 * M_PI * s / S;
                VertexSpec vs;
                vs.capsule = ci;
                if (row == 0) {
                    vs.t = 0.0;
                    vs.local_dir = Vec3{-ca, sa * std::cos(phi), sa * std::sin(phi)};
                } else if (row == R + 1) {
                    vs.t = 1.0;
                    vs.local_dir = Vec3{ca, sa * std::cos(phi), sa * std::sin(phi)};
                } else {
                    vs.t = double(row - 1) / double(R - 1);
                    vs.local_dir = Vec3{0, std::cos(phi), std::sin(phi)};
                }
                vertex_specs.push_back(vs);
            }
        }
        // distal pole
        vertex_specs.push_back({ci, 1.0, Vec3{1, 0, 0}});

        // ordered 1-rings (counter-clockwise seen from outside)
        adjacency.resize(vertex_specs.size());
        std::vector<int>& adj_p = adjacency[pole_p];
        for (int s = S - 1; s >= 0; --s) adj_p.push_back(ring_id(0, s));
        for (int row = 0; row <= R + 1; ++row) {
            for (int s = 0; s < S; ++s) {
                std::vector<int>& adj = adjacency[ring_id(row, s)];
                adj.push_back(ring_id(row, s + 1));
                adj.push_back(row == R + 1 ? pole_d : ring_id(row + 1, s));
                adj.push_back(ring_id(row, s - 1));
                adj.push_back(row == 0 ? pole_p : ring_id(row - 1, s));
            }
        }
        std::vector<int>& adj_d = adjacency[pole_d];
        for (int s = 0; s < S; ++s) adj_d.push_back(ring_id(R + 1, s));
    }

    // Skinning: the capsule follows its proximal joint; vertices near either
    // end blend toward the neighboring joint's frame.
    weights.resize(vertex_specs.size());
    for (size_t i = 0; i < vertex_specs.size(); ++i) {
        const VertexSpec& vs = vertex_specs[i];
        const Capsule& c = capsules[vs.capsule];
        int primary = c.joint;
        int other = -1;
        double w_other = 0.0;
        if (vs.t < kBlendZone && joints[primary].parent >= 0) {
            other = joints[primary].parent;
            w_other = 0.5 * (1.0 - vs.t / kBlendZone);
        } else if (vs.t > 1.0 - kBlendZone) {
            other = c.child;
            w_other = 0.5 * (vs.t - (1.0 - kBlendZone)) / kBlendZone;
        }
        if (other >= 0 && w_other > 0.0)
            weights[i] = {SkinWeight{primary, 1.0 - w_other}, SkinWeight{other, w_other}};
        else
            weights[i] = {SkinWeight{primary, 1.0}, SkinWeight{-1, 0.0}};
    }

    std::array<double, 10> zero{};
    template_vertices = shaped_vertices(zero);
}

void SurrogateBody::validate() const {
    if (joints.empty() || joints[0].parent != -1)
        throw std::runtime_error("body: joint 0 must be the root");
    for (int i = 1; i < int(joints.size()); ++i)
        if (joints[i].parent < 0 || joints[i].parent >= i)
            throw std::runtime_error("body: joints must be topologically ordered");
    if (int(vertex_specs.size()) != int(capsules.size()) * verts_per_capsule())
        throw std::runtime_error("body: vertex count mismatch");
    for (size_t i = 0; i < weights.size(); ++i) {
        double sum = 0.0;
        bool any = false;
        for (const auto& w : weights[i]) {
            if (w.joint < 0) continue;
            if (w.w <= 0.0) throw std::runtime_error("body: non-positive skin weight");
            sum += w.w;
            any = true;
        }
        if (!any || std::abs(sum - 1.0) > 1e-9)
            throw std::runtime_error("body: skin weights must be positive and sum to 1");
    }
    for (const auto& adj : adjacency)
        if (adj.empty()) throw std::runtime_error("body: vertex without 1-ring");
}

MeshSurface skin(const SurrogateBody& body, const Pose& pose) {
    if (int(pose.rotations.size()) != body.joint_count())
        throw std::invalid_argument("pose joint count mismatch");
    if (!pose.finite()) throw std::invalid_argument("non-finite pose");

    auto bind = body.bind_positions(pose.shape);
    auto tverts = body.shaped_vertices(pose.shape);

    std::vector<Transform> global(body.joint_count());
    for (int j = 0; j < body.joint_count(); ++j) {
        Vec3 off = body.joints[j].offset * length_scale(body.joints[j], pose.shape);
        Transform local{Mat3::from_axis_angle(pose.rotations[j]), off};
        if (body.joints[j].parent < 0) {
            global[j] = Transform{Mat3::identity(), pose.translation} * local;
        } else {
            global[j] = global[body.joints[j].parent] * local;
        }
    }

    MeshSurface out;
    out.vertices.resize(tverts.size());
    for (size_t i = 0; i < tverts.size(); ++i) {
        Vec3 acc{};
        for (const auto& w : body.weights[i]) {
            if (w.joint < 0) continue;
            const Transform& g = global[w.joint];
            Vec3 moved = g.R.apply(tverts[i] - bind[w.joint]) + g.t;
            acc += moved * w.w;
        }
        out.vertices[i] = acc;
    }

    out.normals.resize(tverts.size());
    for (size_t i = 0; i < tverts.size(); ++i) {
        const auto& adj = body.adjacency[i];
        Vec3 n{};
        for (size_t k = 0; k < adj.size(); ++k) {
            Vec3 e1 = out.vertices[adj[k]] - out.vertices[i];
            Vec3 e2 = out.vertices[adj[(k + 1) % adj.size()]] - out.vertices[i];
            n += e1.cross(e2);
        }
        out.normals[i] = n.normalized();
    }
    return out;
}

std::vector<Vec3> place_virtual_markers(const MeshSurface& surface, const MarkerLayout& layout) {
    std::vector<Vec3> markers(layout.M());
    for (int m = 0; m < layout.M(); ++m) {
        int v = layout.vertex_ids[m];
        if (v < 0 || v >= int(surface.vertices.size()))
            throw std::out_of_range("marker vertex index out of range");
        markers[m] = surface.vertices[v] + surface.normals[v] * layout.offsets[m];
    }
    return markers;
}

namespace {

double axis_component(const Vec3& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

}  // namespace

std::vector<Pose> sample_motion(const SurrogateBody& body, double duration_s, double rate_hz,
                                uint64_t seed, const MotionParams& params) {
    if (duration_s <= 0 || rate_hz <= 0) throw std::invalid_argument("invalid motion duration/rate");
    int n = int(std::llround(duration_s * rate_hz));
    if (n < 1) n = 1;

    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> fjit(0.8, 1.2);

    struct Harmonic {
        double a, f, phi;
    };
    const int H = params.harmonics;
    int nj = body.joint_count();
    std::vector<std::array<std::vector<Harmonic>, 3>> per_joint(nj);
    for (int j = 0; j < nj; ++j) {
        for (int axis = 0; axis < 3; ++axis) {
            double lo = axis_component(body.joints[j].limit_lo, axis);
            double hi = axis_component(body.joints[j].limit_hi, axis);
            double half = 0.5 * (hi - lo);
            for (int h = 1; h <= H; ++h) {
                per_joint[j][axis].push_back({unit(rng) * params.amplitude * half / h,
                                              params.base_freq_hz * h * fjit(rng), phase(rng)});
            }
        }
    }
    std::array<std::vector<Harmonic>, 3> trans;
    for (int axis = 0; axis < 3; ++axis)
        for (int h = 1; h <= H; ++h)
            trans[axis].push_back({unit(rng) * params.amplitude * params.translation_scale / h,
                                   params.base_freq_hz * h * fjit(rng), phase(rng)});

    std::vector<Pose> poses(n);
    for (int i = 0; i < n; ++i) {
        double t = double(i) / rate_hz;
        Pose p = body.rest_pose();
        for (int j = 0; j < nj; ++j) {
            Vec3 r{};
            double* comps[3] = {&r.x, &r.y, &r.z};
            for (int axis = 0; axis < 3; ++axis) {
                double val = 0.0;
                for (const auto& hm : per_joint[j][axis])
                    val += hm.a * std::sin(2.0 * M_PI * hm.f * t + hm.phi);
                double lo = axis_component(body.joints[j].limit_lo, axis);
                double hi = axis_component(body.joints[j].limit_hi, axis);
                *comps[axis] = std::clamp(val, lo, hi);
            }
            p.rotations[j] = r;
        }
        double* tcomp[3] = {&p.translation.x, &p.translation.y, &p.translation.z};
        for (int axis = 0; axis < 3; ++axis) {
            double val = 0.0;
            for (const auto& hm : trans[axis]) val += hm.a * std::sin(2.0 * M_PI * hm.f * t + hm.phi);
            *tcomp[axis] = val;
        }
        poses[i] = std::move(p);
    }
    return poses;
}

std::array<double, 10> sample_shape(uint64_t seed, const ShapePrior& prior) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 10> beta{};
    for (int i = 0; i < 10; ++i) {
        double s = prior.sigma[i];
        if (s <= 0.0) {
            beta[i] = 0.0;
            // keep the stream aligned regardless of sigma
            normal(rng);
            continue;
        }
        beta[i] = std::clamp(normal(rng) * s, -3.0 * s, 3.0 * s);
    }
    return beta;
}

namespace {

struct Site {
    const char* label;
    const char* child_joint;
    double t;  // <= -0.5 proximal pole, >= 1.5 distal pole, else ring selector
    Vec3 hint; // preferred radial direction in world space (bind pose)
};

const std::vector<Site>& site_table(const std::string& preset) {
    static const std::vector<Site> m12 = {
        {"HEAD", "head", 2.0, {0, 1, 0}},    {"LSHO", "l_shoulder", 0.95, {0, 1, 0}},
        {"RSHO", "r_shoulder", 0.95, {0, 1, 0}}, {"LELB", "l_elbow", 0.9, {0, 0, -1}},
        {"RELB", "r_elbow", 0.9, {0, 0, -1}},  {"LWRI", "l_wrist", 0.9, {0, 1, 0}},
        {"RWRI", "r_wrist", 0.9, {0, 1, 0}},   {"SACR", "spine1", 0.2, {0, 0, -1}},
        {"LKNE", "l_knee", 0.9, {0, 0, 1}},    {"RKNE", "r_knee", 0.9, {0, 0, 1}},
        {"LANK", "l_ankle", 0.9, {1, 0, 0}},   {"RANK", "r_ankle", 0.9, {-1, 0, 0}},
    };
    static const std::vector<Site> extra16 = {
        {"STRN", "spine3", 0.5, {0, 0, 1}},
        {"T10", "spine2", 0.5, {0, 0, -1}},
        {"LTOE", "l_foot", 2.0, {0, 0, 1}},
        {"RTOE", "r_foot", 2.0, {0, 0, 1}},
    };
    static const std::vector<Site> extra20 = {
        {"LUPA", "l_elbow", 0.45, {0, 0, 1}},
        {"RUPA", "r_elbow", 0.45, {0, 0, 1}},
        {"LTHI", "l_knee", 0.45, {1, 0, 0}},
        {"RTHI", "r_knee", 0.45, {-1, 0, 0}},
    };
    static const std::vector<Site> m16 = [] {
        auto v = m12;
        v.insert(v.end(), extra16.begin(), extra16.end());
        return v;
    }();
    static const std::vector<Site> m20 = [] {
        auto v = m16;
        v.insert(v.end(), extra20.begin(), extra20.end());
        return v;
    }();
    if (preset == "m12") return m12;
    if (preset == "m16") return m16;
    if (preset == "m20") return m20;
    throw std::invalid_argument("unknown layout preset: " + preset);
}

}  // namespace

MarkerLayout make_layout(const SurrogateBody& body, const std::string& preset) {
    const auto& sites = site_table(preset);
    std::array<double, 10> zero{};
    auto bind = body.bind_positions(zero);
    const int S = body.segments, R = body.cyl_rings;

    MarkerLayout layout;
    std::vector<std::string> names;
    std::set<int> used;
    for (const auto& site : sites) {
        int ci = body.find_capsule_by_child(site.child_joint);
        if (ci < 0) throw std::runtime_error(std::string("no capsule for joint ") + site.child_joint);
        int base = ci * body.verts_per_capsule();
        int id;
        if (site.t <= -0.5) {
            id = base;
        } else if (site.t >= 1.5) {
            id = base + 1 + (R + 2) * S;
        } else {
            int row;
            if (site.t < 0.0) row = 0;
            else if (site.t > 1.0) row = R + 1;
            else row = 1 + int(std::lround(site.t * (R - 1)));
            CapsuleFrame f = capsule_frame(body, ci, bind, zero);
            int best_s = 0;
            double best = -2.0;
            for (int s = 0; s < S; ++s) {
                double phi = 2.0 * M_PI * s / S;
                Vec3 radial = f.u * std::cos(phi) + f.v * std::sin(phi);
                double d = radial.dot(site.hint);
                if (d > best) {
                    best = d;
                    best_s = s;
                }
            }
            id = base + 1 + row * S + best_s;
        }
        if (!used.insert(id).second)
            throw std::runtime_error(std::string("layout site collision at ") + site.label);
        names.push_back(site.label);
        layout.vertex_ids.push_back(id);
        layout.offsets.push_back(0.0095);
    }
    layout.label_set = LabelSet(names);
    return layout;
}

Pose canonical_a_pose(const SurrogateBody& body) {
    Pose p = body.rest_pose();
    int ls = body.find_joint("l_shoulder");
    int rs = body.find_joint("r_shoulder");
    // arms lowered ~40 degrees from the T-pose
    if (ls >= 0) p.rotations[ls] = {0, 0, -0.7};
    if (rs >= 0) p.rotations[rs] = {0, 0, 0.7};
    return p;
}

// --- JSON serialization -----------------------------------------------------

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec3_from_json(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

}  // namespace

void SurrogateBody::save(const std::string& path) const {
    json j;
    j["format"] = "soma-body/1";
    j["segments"] = segments;
    j["cyl_rings"] = cyl_rings;
    for (const auto& jt : joints) {
        json o;
        o["name"] = jt.name;
        o["parent"] = jt.parent;
        o["offset"] = vec3_to_json(jt.offset);
        o["limit_lo"] = vec3_to_json(jt.limit_lo);
        o["limit_hi"] = vec3_to_json(jt.limit_hi);
        o["length_coeffs"] = jt.length_coeffs;
        j["joints"].push_back(o);
    }
    for (const auto& c : capsules) {
        json o;
        o["joint"] = c.joint;
        o["child"] = c.child;
        o["radius"] = c.radius;
        o["radius_coeffs"] = c.radius_coeffs;
        j["capsules"].push_back(o);
    }
    for (const auto& v : template_vertices) j["template_vertices"].push_back(vec3_to_json(v));
    for (const auto& wpair : weights) {
        json o = json::array();
        for (const auto& w : wpair)
            if (w.joint >= 0) o.push_back(json::array({w.joint, w.w}));
        j["weights"].push_back(o);
    }
    j["adjacency"] = adjacency;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump() << "\n";
}

SurrogateBody SurrogateBody::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    json j;
    f >> j;
    if (j.value("format", "") != "soma-body/1")
        throw std::runtime_error("unsupported body format in " + path);
    SurrogateBody b;
    b.segments = j.at("segments");
    b.cyl_rings = j.at("cyl_rings");
    for (const auto& o : j.at("joints")) {
        Joint jt;
        jt.name = o.at("name");
        jt.parent = o.at("parent");
        jt.offset = vec3_from_json(o.at("offset"));
        jt.limit_lo = vec3_from_json(o.at("limit_lo"));
        jt.limit_hi = vec3_from_json(o.at("limit_hi"));
        jt.length_coeffs = o.at("length_coeffs");
        b.joints.push_back(jt);
    }
    for (const auto& o : j.at("capsules")) {
        Capsule c;
        c.joint = o.at("joint");
        c.child = o.at("child");
        c.radius = o.at("radius");
        c.radius_coeffs = o.at("radius_coeffs");
        b.capsules.push_back(c);
    }
    b.build_tessellation();
    b.validate();
    return b;
}

void save_layout(const MarkerLayout& layout, const std::string& path) {
    json j;
    j["format"] = "soma-layout/1";
    j["labels"] = json::array();
    for (int m = 0; m < layout.M(); ++m) j["labels"].push_back(layout.label_set.name(m));
    j["vertex_ids"] = layout.vertex_ids;
    j["offsets"] = layout.offsets;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump() << "\n";
}

MarkerLayout load_layout(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    json j;
    f >> j;
    if (j.value("format", "") != "soma-layout/1")
        throw std::runtime_error("unsupported layout format in " + path);
    MarkerLayout layout;
    layout.label_set = LabelSet(j.at("labels").get<std::vector<std::string>>());
    layout.vertex_ids = j.at("vertex_ids").get<std::vector<int>>();
    layout.offsets = j.at("offsets").get<std::vector<double>>();
    if (int(layout.vertex_ids.size()) != layout.M() || int(layout.offsets.size()) != layout.M())
        throw std::runtime_error("layout arrays inconsistent in " + path);
    for (double d : layout.offsets)
        if (d < 0) throw std::runtime_error("negative marker offset in " + path);
    return layout;
}

}  // namespace soma
