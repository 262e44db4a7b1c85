#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "soma/noise.hpp"

using namespace soma;

namespace {

const SurrogateBody& body() {
    static SurrogateBody b = SurrogateBody::build_default();
    return b;
}

const MarkerLayout& layout12() {
    static MarkerLayout l = make_layout(body(), "m12");
    return l;
}

Frame simple_frame(int n, int null_id, bool tracklets = false) {
    Frame f;
    for (int i = 0; i < n; ++i) {
        f.points.push_back({double(i), double(i) * 0.5, -double(i)});
        f.labels.push_back(i);
        if (tracklets) f.tracklet_ids.push_back(i);
    }
    (void)null_id;
    return f;
}

}  // namespace

TEST_CASE("jitter_layout: determinism and candidate distribution") {
    Rng r1 = make_rng(10), r2 = make_rng(10);
    auto a = jitter_layout(layout12(), body(), r1);
    auto b = jitter_layout(layout12(), body(), r2);
    CHECK(a.vertex_ids == b.vertex_ids);

    // multinomial check on the first marker: itself + ring, each 1/(1+deg)
    int v = layout12().vertex_ids[0];
    const auto& ring = body().adjacency[v];
    const int deg = int(ring.size());
    std::map<int, int> counts;
    Rng rng = make_rng(77);
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        auto jl = jitter_layout(layout12(), body(), rng);
        counts[jl.vertex_ids[0]]++;
    }
    const double p = 1.0 / (1 + deg);
    const double sigma = std::sqrt(p * (1 - p) * trials);
    CHECK(int(counts.size()) == deg + 1);
    for (auto [id, c] : counts) {
        bool valid = id == v;
        for (int rv : ring) valid = valid || rv == id;
        CHECK(valid);
        CHECK(std::abs(c - p * trials) < 3.0 * sigma);
    }
}

TEST_CASE("compose_global_yaw: zero is identity, pi twice returns to start") {
    Pose p = body().rest_pose();
    p.rotations[0] = {0.1, 0.4, -0.2};
    Pose q = compose_global_yaw(p, 0.0);
    CHECK(q.rotations[0].x == doctest::Approx(p.rotations[0].x));
    CHECK(q.rotations[0].y == doctest::Approx(p.rotations[0].y));
    CHECK(q.rotations[0].z == doctest::Approx(p.rotations[0].z));

    Pose r = compose_global_yaw(compose_global_yaw(p, M_PI), M_PI);
    Mat3 orig = Mat3::from_axis_angle(p.rotations[0]);
    Mat3 back = Mat3::from_axis_angle(r.rotations[0]);
    for (int i = 0; i < 9; ++i) CHECK(back.m[i] == doctest::Approx(orig.m[i]).epsilon(1e-9));
}

TEST_CASE("global rotation rotates the marker cloud rigidly") {
    Pose p = body().rest_pose();
    double angle = 1.234;
    Pose rotated = compose_global_yaw(p, angle);
    auto m0 = place_virtual_markers(skin(body(), p), layout12());
    auto m1 = place_virtual_markers(skin(body(), rotated), layout12());
    Mat3 R = Mat3::rotation_y(angle);
    for (size_t i = 0; i < m0.size(); ++i) {
        Vec3 expect = R.apply(m0[i]);
        CHECK(std::abs(m1[i].x - expect.x) < 1e-9);
        CHECK(std::abs(m1[i].y - expect.y) < 1e-9);
        CHECK(std::abs(m1[i].z - expect.z) < 1e-9);
    }
}

TEST_CASE("positional noise: zero sigma identity, determinism, empirical sigma") {
    std::vector<Vec3> markers{{0, 0, 0}, {1, 1, 1}, {2, 0, -1}};
    std::vector<double> zero(3, 0.0);
    Rng rng = make_rng(5);
    auto out = positional_noise(markers, zero, rng);
    for (size_t i = 0; i < markers.size(); ++i) CHECK(out[i].x == markers[i].x);

    std::vector<double> sig(3, 0.007);
    Rng a = make_rng(9), b = make_rng(9);
    auto oa = positional_noise(markers, sig, a);
    auto ob = positional_noise(markers, sig, b);
    for (size_t i = 0; i < markers.size(); ++i) CHECK(oa[i].x == ob[i].x);

    // empirical sigma within 5% over 10k draws
    Rng rng2 = make_rng(123);
    double acc = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        auto o = positional_noise(markers, sig, rng2);
        for (size_t m = 0; m < markers.size(); ++m) {
            Vec3 d = o[m] - markers[m];
            acc += d.dot(d);
        }
    }
    double emp = std::sqrt(acc / (trials * 3 * 3.0));
    CHECK(std::abs(emp - 0.007) / 0.007 < 0.05);

    std::vector<double> short_sig(2, 0.0);
    Rng rng3 = make_rng(1);
    CHECK_THROWS_AS(positional_noise(markers, short_sig, rng3), std::invalid_argument);
}

TEST_CASE("ghost points: counts, labels, sample mean near median") {
    const int null_id = 40;
    Frame f = simple_frame(40, null_id);
    Rng rng = make_rng(3);
    Frame same = add_ghost_points(f, 0, null_id, rng);
    CHECK(same.size() == 40);

    Frame g = add_ghost_points(f, 3, null_id, rng);
    CHECK(g.size() == 43);
    for (int i = 40; i < 43; ++i) CHECK(g.labels[i] == null_id);

    Frame empty;
    CHECK_THROWS_AS(add_ghost_points(empty, 1, null_id, rng), std::invalid_argument);

    // ghost sample mean approaches the coordinate-wise median
    auto [centered, median] = median_center(f);
    Rng rng2 = make_rng(21);
    Vec3 mean{};
    const int trials = 10000;
    double stddev = 0.0;
    {
        Vec3 m{};
        for (const auto& p : f.points) m += p;
        m = m * (1.0 / f.size());
        double var = 0.0;
        for (const auto& p : f.points) {
            Vec3 d = p - m;
            var += d.dot(d);
        }
        stddev = std::sqrt(var / (3.0 * f.size()));
    }
    for (int i = 0; i < trials; ++i) {
        Frame gi = add_ghost_points(f, 1, null_id, rng2);
        mean += gi.points.back();
    }
    mean = mean * (1.0 / trials);
    double tol = 3.0 * stddev / std::sqrt(double(trials));
    CHECK(std::abs(mean.x - median.x) < tol);
    CHECK(std::abs(mean.y - median.y) < tol);
    CHECK(std::abs(mean.z - median.z) < tol);
}

TEST_CASE("occlusion: boundaries and label bookkeeping") {
    const int null_id = 6;
    Frame f = simple_frame(6, null_id);
    Rng rng = make_rng(8);
    auto r0 = occlude_markers(f, 0, null_id, rng);
    CHECK(r0.frame.size() == 6);
    CHECK(r0.occluded_labels.empty());

    auto rall = occlude_markers(f, 6, null_id, rng);
    CHECK(rall.frame.size() == 0);
    CHECK(rall.occluded_labels.size() == 6);

    CHECK_THROWS_AS(occlude_markers(f, 7, null_id, rng), std::invalid_argument);

    // occluding a specific label removes exactly that point
    for (int trial = 0; trial < 50; ++trial) {
        Rng r = make_rng(100 + trial);
        auto res = occlude_markers(f, 1, null_id, r);
        REQUIRE(res.occluded_labels.size() == 1);
        int gone = res.occluded_labels[0];
        std::set<int> left(res.frame.labels.begin(), res.frame.labels.end());
        CHECK(left.count(gone) == 0);
        CHECK(int(left.size()) == 5);
    }
}

TEST_CASE("permutation: identity on singleton, inverse restores, uniform") {
    const int null_id = 3;
    Frame one = simple_frame(1, null_id);
    Rng rng = make_rng(4);
    auto r1 = permute_points(one, rng);
    CHECK(r1.frame.points[0].x == one.points[0].x);

    Frame f = simple_frame(5, null_id, true);
    auto rp = permute_points(f, rng);
    // applying the recorded inverse restores the frame
    for (int i = 0; i < 5; ++i) {
        CHECK(rp.frame.points[i].x == f.points[rp.perm[i]].x);
        CHECK(rp.frame.labels[i] == f.labels[rp.perm[i]]);
        CHECK(rp.frame.tracklet_ids[i] == f.tracklet_ids[rp.perm[i]]);
    }

    // all 3! permutations of a 3-point frame appear uniformly
    Frame f3 = simple_frame(3, null_id);
    std::map<std::vector<int>, int> counts;
    Rng rng2 = make_rng(31);
    const int trials = 6000;
    for (int i = 0; i < trials; ++i) counts[permute_points(f3, rng2).perm]++;
    CHECK(counts.size() == 6);
    const double p = 1.0 / 6.0;
    const double sigma = std::sqrt(p * (1 - p) * trials);
    for (auto& [perm, c] : counts) CHECK(std::abs(c - p * trials) < 3.0 * sigma);
}

TEST_CASE("break_tracklets: partition and position invariance") {
    NoiseConfig noise = NoiseConfig::preset("b");
    SynthSettings settings;
    auto gen = generate_sequence(body(), layout12(), noise, settings, 2.0, 30.0, 42);
    REQUIRE(gen.seq.size() == 60);

    Rng rng = make_rng(5);
    auto same = break_tracklets(gen.seq, 0, rng);
    for (int t = 0; t < same.size(); ++t)
        CHECK(same.frames[t].tracklet_ids == gen.seq.frames[t].tracklet_ids);

    auto broken = break_tracklets(gen.seq, 1, rng);
    // exactly one tracklet is split at one time: find the new id
    std::set<int> before, after;
    for (const auto& fr : gen.seq.frames)
        for (int id : fr.tracklet_ids) before.insert(id);
    for (const auto& fr : broken.frames)
        for (int id : fr.tracklet_ids) after.insert(id);
    REQUIRE(after.size() == before.size() + 1);
    int fresh = *after.rbegin();

    int old_id = -1;
    int t_break = -1;
    for (int t = 0; t < broken.size(); ++t) {
        for (size_t i = 0; i < broken.frames[t].tracklet_ids.size(); ++i) {
            if (broken.frames[t].tracklet_ids[i] == fresh && t_break < 0) {
                t_break = t;
                old_id = gen.seq.frames[t].tracklet_ids[i];
            }
            // positions never modified
            CHECK(broken.frames[t].points[i].x == gen.seq.frames[t].points[i].x);
        }
    }
    REQUIRE(t_break >= 0);
    for (int t = 0; t < broken.size(); ++t) {
        for (size_t i = 0; i < broken.frames[t].tracklet_ids.size(); ++i) {
            int id_new = broken.frames[t].tracklet_ids[i];
            int id_old = gen.seq.frames[t].tracklet_ids[i];
            if (id_old == old_id) {
                if (t < t_break) CHECK(id_new == old_id);
                else CHECK(id_new == fresh);
            } else {
                CHECK(id_new == id_old);
            }
        }
    }
}

TEST_CASE("corpus: noise-off config gives exact markers with identity GT") {
    NoiseConfig noise;
    noise.jitter_layout = false;
    noise.rotation_augment = false;
    noise.positional_noise_m = 0.0;
    SynthSettings settings;
    settings.pose_range = 0.0;
    settings.shape_prior.sigma.fill(0.0);

    Corpus c = generate_training_corpus(body(), layout12(), noise, settings, 4, 7);
    auto expect = place_virtual_markers(skin(body(), body().rest_pose()), layout12());
    for (const auto& cf : c.frames) {
        REQUIRE(cf.frame.size() == 12);
        CHECK(cf.occluded_labels.empty());
        // points are the exact clean markers, in some permuted order
        std::set<int> seen;
        for (int i = 0; i < 12; ++i) {
            int lbl = cf.frame.labels[i];
            CHECK(seen.insert(lbl).second);
            CHECK(cf.frame.points[i].x == expect[lbl].x);
            CHECK(cf.frame.points[i].y == expect[lbl].y);
            CHECK(cf.frame.points[i].z == expect[lbl].z);
        }
    }
}

TEST_CASE("corpus: determinism and occlusion histogram") {
    NoiseConfig noise = NoiseConfig::preset("bcg");
    noise.max_occlusions = 5;
    SynthSettings settings;
    Corpus a = generate_training_corpus(body(), layout12(), noise, settings, 50, 99);
    Corpus b = generate_training_corpus(body(), layout12(), noise, settings, 50, 99);
    for (int i = 0; i < 50; ++i) {
        REQUIRE(a.frames[i].frame.size() == b.frames[i].frame.size());
        for (int k = 0; k < a.frames[i].frame.size(); ++k) {
            CHECK(a.frames[i].frame.points[k].x == b.frames[i].frame.points[k].x);
            CHECK(a.frames[i].frame.labels[k] == b.frames[i].frame.labels[k]);
        }
        CHECK(a.frames[i].occluded_labels == b.frames[i].occluded_labels);
    }

    // occlusion counts uniform on {0..5} within 3 sigma
    Corpus big = generate_training_corpus(body(), layout12(), noise, settings, 6000, 6);
    std::map<int, int> hist;
    for (const auto& cf : big.frames) hist[int(cf.occluded_labels.size())]++;
    CHECK(hist.size() == 6);
    const double p = 1.0 / 6.0, n = 6000;
    const double sigma = std::sqrt(p * (1 - p) * n);
    for (auto [k, c2] : hist) CHECK(std::abs(c2 - p * n) < 3.0 * sigma);

    // frame size bookkeeping: n_t = M - occluded + ghosts
    for (const auto& cf : big.frames) {
        int ghosts = 0;
        for (int lbl : cf.frame.labels) ghosts += (lbl == big.labels.null_id());
        CHECK(cf.frame.size() == 12 - int(cf.occluded_labels.size()) + ghosts);
        // C_i: non-null labels unique
        std::set<int> seen;
        for (int lbl : cf.frame.labels)
            if (lbl != big.labels.null_id()) CHECK(seen.insert(lbl).second);
        // occluded labels disjoint from visible ones
        for (int occ : cf.occluded_labels) CHECK(seen.count(occ) == 0);
    }
}

TEST_CASE("sequence generation: tracklets stable, ghosts fresh") {
    NoiseConfig noise = NoiseConfig::preset("bg");
    SynthSettings settings;
    auto gen = generate_sequence(body(), layout12(), noise, settings, 1.0, 30.0, 11);
    CHECK(gen.seq.size() == 30);
    for (const auto& fr : gen.seq.frames) {
        REQUIRE(fr.has_tracklets());
        REQUIRE(fr.has_labels());
        for (int i = 0; i < fr.size(); ++i) {
            if (fr.labels[i] != gen.labels.null_id()) {
                // marker tracklet id == label id in unbroken sequences
                CHECK(fr.tracklet_ids[i] == fr.labels[i]);
            } else {
                CHECK(fr.tracklet_ids[i] >= gen.labels.M());
            }
        }
    }
}
