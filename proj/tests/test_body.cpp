#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "soma/body.hpp"
#include "soma/rng.hpp"

using namespace soma;

namespace {

const SurrogateBody& body() {
    static SurrogateBody b = SurrogateBody::build_default();
    return b;
}

bool close(const Vec3& a, const Vec3& b, double tol = 1e-9) {
    return std::abs(a.x - b.x) < tol && std::abs(a.y - b.y) < tol && std::abs(a.z - b.z) < tol;
}

}  // namespace

TEST_CASE("default body structure") {
    const auto& b = body();
    CHECK(b.body_joint_count() == 21);
    CHECK(b.joint_count() == 22);
    CHECK(b.capsules.size() == 21);
    CHECK(b.vertex_count() > 1500);
    CHECK(b.vertex_count() < 2500);
    CHECK_NOTHROW(b.validate());
}

TEST_CASE("template normals point outward and are unit length") {
    const auto& b = body();
    MeshSurface s = skin(b, b.rest_pose());
    std::array<double, 10> zero{};
    auto bind = b.bind_positions(zero);
    for (int i = 0; i < b.vertex_count(); ++i) {
        CHECK(std::abs(s.normals[i].norm() - 1.0) < 1e-6);
        // outwardness: positive dot with the parametric direction
        const VertexSpec& vs = b.vertex_specs[i];
        const Capsule& c = b.capsules[vs.capsule];
        Vec3 P = bind[c.joint], C = bind[c.child];
        Vec3 anchor = P + (C - P) * vs.t;
        Vec3 outward = (s.vertices[i] - anchor).normalized();
        CHECK(s.normals[i].dot(outward) > 0.1);
    }
}

TEST_CASE("identity pose reproduces template vertices") {
    const auto& b = body();
    MeshSurface s = skin(b, b.rest_pose());
    for (int i = 0; i < b.vertex_count(); ++i) CHECK(close(s.vertices[i], b.template_vertices[i]));
}

TEST_CASE("pure translation shifts vertices, normals unchanged") {
    const auto& b = body();
    MeshSurface s0 = skin(b, b.rest_pose());
    Pose p = b.rest_pose();
    p.translation = {0.4, -0.2, 1.5};
    MeshSurface s1 = skin(b, p);
    for (int i = 0; i < b.vertex_count(); ++i) {
        CHECK(close(s1.vertices[i], s0.vertices[i] + p.translation, 1e-9));
        CHECK(close(s1.normals[i], s0.normals[i], 1e-9));
    }
}

TEST_CASE("root rotation rotates all vertices about the root origin") {
    const auto& b = body();
    Vec3 aa{0.3, 1.1, -0.4};
    Pose p = b.rest_pose();
    p.rotations[0] = aa;
    MeshSurface s = skin(b, p);
    // independent check: rotate the template directly
    Mat3 R = Mat3::from_axis_angle(aa);
    for (int i = 0; i < b.vertex_count(); ++i) {
        Vec3 expect = R.apply(b.template_vertices[i]);
        CHECK(close(s.vertices[i], expect, 1e-9));
    }
}

TEST_CASE("non-finite pose is rejected") {
    const auto& b = body();
    Pose p = b.rest_pose();
    p.rotations[3].x = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(skin(b, p), std::invalid_argument);
}

TEST_CASE("marker placement: zero offset coincides with vertex") {
    const auto& b = body();
    MarkerLayout layout = make_layout(b, "m12");
    for (auto& d : layout.offsets) d = 0.0;
    MeshSurface s = skin(b, b.rest_pose());
    auto markers = place_virtual_markers(s, layout);
    for (int m = 0; m < layout.M(); ++m) CHECK(close(markers[m], s.vertices[layout.vertex_ids[m]]));
}

TEST_CASE("marker placement arithmetic") {
    MeshSurface s;
    s.vertices = {{0, 0, 0}};
    s.normals = {{0, 0, 1}};
    MarkerLayout layout;
    layout.label_set = LabelSet({"A"});
    layout.vertex_ids = {0};
    layout.offsets = {0.0095};
    auto markers = place_virtual_markers(s, layout);
    CHECK(markers[0].z == doctest::Approx(0.0095));
    layout.vertex_ids = {5};
    CHECK_THROWS_AS(place_virtual_markers(s, layout), std::out_of_range);
}

TEST_CASE("marker placement matches brute-force loop on full layout") {
    const auto& b = body();
    MarkerLayout layout = make_layout(b, "m20");
    MeshSurface s = skin(b, b.rest_pose());
    auto markers = place_virtual_markers(s, layout);
    REQUIRE(int(markers.size()) == layout.M());
    for (int m = 0; m < layout.M(); ++m) {
        int v = layout.vertex_ids[m];
        Vec3 expect{s.vertices[v].x + s.normals[v].x * layout.offsets[m],
                    s.vertices[v].y + s.normals[v].y * layout.offsets[m],
                    s.vertices[v].z + s.normals[v].z * layout.offsets[m]};
        CHECK(markers[m].x == expect.x);
        CHECK(markers[m].y == expect.y);
        CHECK(markers[m].z == expect.z);
    }
}

TEST_CASE("marker-to-surface distance equals the offset") {
    const auto& b = body();
    MarkerLayout layout = make_layout(b, "m16");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-0.4, 0.4);
    Pose p = b.rest_pose();
    for (auto& r : p.rotations) r = {d(rng) * 0.3, d(rng) * 0.3, d(rng) * 0.3};
    MeshSurface s = skin(b, p);
    auto markers = place_virtual_markers(s, layout);
    for (int m = 0; m < layout.M(); ++m) {
        double dist = (markers[m] - s.vertices[layout.vertex_ids[m]]).norm();
        CHECK(dist == doctest::Approx(layout.offsets[m]).epsilon(1e-12));
    }
}

TEST_CASE("rigid invariance of skinned markers") {
    const auto& b = body();
    MarkerLayout layout = make_layout(b, "m12");
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-0.3, 0.3);

    Pose p = b.rest_pose();
    for (size_t j = 1; j < p.rotations.size(); ++j) p.rotations[j] = {d(rng), d(rng), d(rng)};
    auto m0 = place_virtual_markers(skin(b, p), layout);

    Vec3 aa{0.2, 0.9, -0.1};
    Vec3 t{1.0, 0.5, -2.0};
    Pose p2 = p;
    // compose the rigid motion onto the root
    Mat3 R = Mat3::from_axis_angle(aa);
    p2.rotations[0] = (R * Mat3::from_axis_angle(p.rotations[0])).to_axis_angle();
    p2.translation = R.apply(p.translation) + t;
    auto m1 = place_virtual_markers(skin(b, p2), layout);

    for (int m = 0; m < layout.M(); ++m) {
        Vec3 expect = R.apply(m0[m]) + t;
        CHECK(close(m1[m], expect, 1e-9));
    }
}

TEST_CASE("skin continuity under small pose perturbation") {
    const auto& b = body();
    Pose p = b.rest_pose();
    int elbow = b.find_joint("l_elbow");
    const double eps = 1e-6;
    MeshSurface s0 = skin(b, p);
    Pose p1 = p;
    p1.rotations[elbow].y += eps;
    MeshSurface s1 = skin(b, p1);
    // chain length from the elbow is well under 1 m
    for (int i = 0; i < b.vertex_count(); ++i) {
        double delta = (s1.vertices[i] - s0.vertices[i]).norm();
        CHECK(delta <= 1.0 * eps + 1e-12);
    }
}

TEST_CASE("sample_motion: frame count and determinism") {
    const auto& b = body();
    auto m1 = sample_motion(b, 1.0, 30.0, 77);
    CHECK(m1.size() == 30);
    auto m2 = sample_motion(b, 1.0, 30.0, 77);
    for (size_t i = 0; i < m1.size(); ++i) {
        CHECK(m1[i].rotations[5].x == m2[i].rotations[5].x);
        CHECK(m1[i].translation.z == m2[i].translation.z);
    }
    auto m3 = sample_motion(b, 1.0, 30.0, 78);
    bool differs = false;
    for (size_t i = 0; i < m1.size() && !differs; ++i)
        differs = m1[i].rotations[5].x != m3[i].rotations[5].x;
    CHECK(differs);
}

TEST_CASE("sample_motion: zero amplitude gives rest pose") {
    const auto& b = body();
    MotionParams params;
    params.amplitude = 0.0;
    auto m = sample_motion(b, 0.5, 30.0, 4, params);
    for (const auto& p : m) {
        for (const auto& r : p.rotations) {
            CHECK(r.x == 0.0);
            CHECK(r.y == 0.0);
            CHECK(r.z == 0.0);
        }
        CHECK(p.translation.norm() == 0.0);
    }
}

TEST_CASE("sample_motion respects joint limits") {
    const auto& b = body();
    MotionParams params;
    params.amplitude = 5.0;  // deliberately excessive, relies on clamping
    auto m = sample_motion(b, 2.0, 30.0, 9, params);
    for (const auto& p : m) {
        for (size_t j = 0; j < p.rotations.size(); ++j) {
            CHECK(p.rotations[j].x >= b.joints[j].limit_lo.x - 1e-12);
            CHECK(p.rotations[j].x <= b.joints[j].limit_hi.x + 1e-12);
        }
    }
}

TEST_CASE("sample_shape: determinism, zero sigma, statistics") {
    ShapePrior zero;
    zero.sigma.fill(0.0);
    auto s = sample_shape(1, zero);
    for (double v : s) CHECK(v == 0.0);

    auto a = sample_shape(123);
    auto b2 = sample_shape(123);
    CHECK(a == b2);

    // law of large numbers: mean of 10k draws within 3*sigma/sqrt(n)
    const int n = 10000;
    std::array<double, 10> mean{};
    for (int i = 0; i < n; ++i) {
        auto v = sample_shape(derive_seed(99, i));
        for (int k = 0; k < 10; ++k) mean[k] += v[k];
    }
    for (int k = 0; k < 10; ++k) {
        mean[k] /= n;
        CHECK(std::abs(mean[k]) < 3.0 / std::sqrt(double(n)));
    }
    // clamping at 3 sigma
    for (int i = 0; i < 1000; ++i) {
        auto v = sample_shape(derive_seed(7, i));
        for (double x : v) CHECK(std::abs(x) <= 3.0);
    }
}

TEST_CASE("layout presets have expected sizes and valid ids") {
    const auto& b = body();
    for (auto [preset, m] : {std::pair{"m12", 12}, {"m16", 16}, {"m20", 20}}) {
        MarkerLayout layout = make_layout(b, preset);
        CHECK(layout.M() == m);
        CHECK(layout.label_set.size() == m + 1);
        for (int id : layout.vertex_ids) {
            CHECK(id >= 0);
            CHECK(id < b.vertex_count());
        }
    }
    CHECK_THROWS_AS(make_layout(b, "m7"), std::invalid_argument);
}

TEST_CASE("body and layout json round-trip") {
    const auto& b = body();
    std::string body_path = "test_body_roundtrip.json";
    std::string layout_path = "test_layout_roundtrip.json";
    b.save(body_path);
    SurrogateBody b2 = SurrogateBody::load(body_path);
    CHECK(b2.joint_count() == b.joint_count());
    CHECK(b2.vertex_count() == b.vertex_count());
    for (int i = 0; i < b.vertex_count(); i += 97)
        CHECK(close(b2.template_vertices[i], b.template_vertices[i]));

    MarkerLayout layout = make_layout(b, "m12");
    save_layout(layout, layout_path);
    MarkerLayout l2 = load_layout(layout_path);
    CHECK(l2.label_set == layout.label_set);
    CHECK(l2.vertex_ids == layout.vertex_ids);
    std::remove(body_path.c_str());
    std::remove(layout_path.c_str());
}
