#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "soma/core.hpp"
#include "soma/math.hpp"

namespace soma {

// Articulated surrogate body: a capsule-tessellated skinned surface driven by
// a 22-joint kinematic tree (21 body joints + root). Shape is a 10-vector
// scaling bone lengths and capsule radii; vertices are parametric so the
// topology (and skinning) is identical across shapes.

struct Joint {
    std::string name;
    int parent = -1;
    Vec3 offset;  // bind offset from parent at shape = 0
    Vec3 limit_lo, limit_hi;
    std::array<double, 10> length_coeffs{};
};

struct Capsule {
    int joint = -1;  // proximal joint (the frame this capsule is attached to)
    int child = -1;  // distal joint; bind axis runs joint -> child
    double radius = 0.05;
    std::array<double, 10> radius_coeffs{};
};

// Parametric vertex: position(shape) = lerp(P, C, t) + r(shape) * local_dir
// expressed in the capsule frame (axial, u, v).
struct VertexSpec {
    int capsule = 0;
    double t = 0.0;
    Vec3 local_dir;  // unit, components (axial, u, v)
};

struct SkinWeight {
    int joint = -1;
    double w = 0.0;
};

struct MeshSurface {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;  // unit, recomputed from deformed topology
};

struct Pose {
    std::vector<Vec3> rotations;  // axis-angle per joint, root included
    Vec3 translation;
    std::array<double, 10> shape{};

    bool finite() const;
};

class SurrogateBody {
public:
    std::vector<Joint> joints;
    std::vector<Capsule> capsules;
    int segments = 8;   // vertices per ring
    int cyl_rings = 9;  // rings on the cylindrical part
    std::vector<VertexSpec> vertex_specs;
    std::vector<std::array<SkinWeight, 2>> weights;   // per vertex, w sums to 1
    std::vector<std::vector<int>> adjacency;          // ordered 1-ring per vertex
    std::vector<Vec3> template_vertices;              // shape = 0 realization

    int joint_count() const { return int(joints.size()); }        // J + 1
    int body_joint_count() const { return int(joints.size()) - 1; }  // J
    int vertex_count() const { return int(vertex_specs.size()); }
    int verts_per_capsule() const { return 2 + segments * (cyl_rings + 2); }

    // Humanoid default: 22 joints, 21 capsules, ~1.9k vertices.
    static SurrogateBody build_default();

    // Regenerates vertex_specs, weights, adjacency and the shape-0 template
    // from the joint/capsule data. Topology depends only on the ring counts.
    void build_tessellation();

    Pose rest_pose() const;

    // Joint bind positions for a shape vector (identity rotations).
    std::vector<Vec3> bind_positions(const std::array<double, 10>& shape) const;
    // Template vertices for a shape vector.
    std::vector<Vec3> shaped_vertices(const std::array<double, 10>& shape) const;

    int find_joint(const std::string& name) const;
    int find_capsule_by_child(const std::string& child_name) const;

    void save(const std::string& path) const;
    static SurrogateBody load(const std::string& path);

    // Validates tree/weight/topology invariants; throws on violation.
    void validate() const;
};

// Linear blend skinning of the posed body; normals are recomputed from the
// deformed surface and renormalized. Throws on a non-finite pose.
MeshSurface skin(const SurrogateBody& body, const Pose& pose);

// X_m = vertices[v_m] + d_m * normals[v_m]. Throws on out-of-range ids.
std::vector<Vec3> place_virtual_markers(const MeshSurface& surface, const MarkerLayout& layout);

struct MotionParams {
    double amplitude = 1.0;          // 0 -> constant rest pose
    double translation_scale = 0.1;  // meters, scaled by amplitude
    int harmonics = 3;
    double base_freq_hz = 0.35;
};

// Band-limited random joint trajectories clamped to the per-joint limits.
// Deterministic for a fixed seed. Shape is left at zero.
std::vector<Pose> sample_motion(const SurrogateBody& body, double duration_s, double rate_hz,
                                uint64_t seed, const MotionParams& params = {});

struct ShapePrior {
    std::array<double, 10> sigma;
    ShapePrior() { sigma.fill(1.0); }
};

// beta ~ N(0, diag(sigma^2)) clamped to +-3 sigma.
std::array<double, 10> sample_shape(uint64_t seed, const ShapePrior& prior = {});

// Named desk-scale layouts: "m12", "m16", "m20". All offsets 0.0095 m.
MarkerLayout make_layout(const SurrogateBody& body, const std::string& preset);

// Loose A-pose used as the canonical body for attention-span reports.
Pose canonical_a_pose(const SurrogateBody& body);

void save_layout(const MarkerLayout& layout, const std::string& path);
MarkerLayout load_layout(const std::string& path);

}  // namespace soma
