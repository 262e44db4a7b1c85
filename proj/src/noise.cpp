#include "soma/noise.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "soma/parallel.hpp"

namespace soma {

using nlohmann::json;

NoiseConfig NoiseConfig::preset(const std::string& name) {
    NoiseConfig c;
    if (name == "b") {
        // base: placement jitter, rotation augmentation and positional noise only
    } else if (name == "bc") {
        c.max_occlusions = 5;
    } else if (name == "bg") {
        c.max_ghosts = 3;
    } else if (name == "bcg") {
        c.max_occlusions = 5;
        c.max_ghosts = 3;
    } else if (name == "extreme") {
        c.max_occlusions = 5;
        c.max_ghosts = 60;
        c.extreme_ghosts = true;
    } else {
        throw std::invalid_argument("unknown noise preset: " + name);
    }
    return c;
}

json NoiseConfig::to_json() const {
    json j;
    j["max_occlusions"] = max_occlusions;
    j["max_ghosts"] = max_ghosts;
    j["jitter_layout"] = jitter_layout;
    j["rotation_augment"] = rotation_augment;
    j["positional_noise_m"] = positional_noise_m;
    j["extreme_ghosts"] = extreme_ghosts;
    if (!per_label_noise.empty()) j["per_label_noise"] = per_label_noise;
    return j;
}

NoiseConfig NoiseConfig::from_json(const json& j) {
    NoiseConfig c;
    if (j.contains("preset")) c = preset(j["preset"].get<std::string>());
    c.max_occlusions = j.value("max_occlusions", c.max_occlusions);
    c.max_ghosts = j.value("max_ghosts", c.max_ghosts);
    c.jitter_layout = j.value("jitter_layout", c.jitter_layout);
    c.rotation_augment = j.value("rotation_augment", c.rotation_augment);
    c.positional_noise_m = j.value("positional_noise_m", c.positional_noise_m);
    c.extreme_ghosts = j.value("extreme_ghosts", c.extreme_ghosts);
    if (j.contains("per_label_noise"))
        c.per_label_noise = j["per_label_noise"].get<std::map<std::string, double>>();
    if (c.max_occlusions < 0 || c.max_ghosts < 0 || c.positional_noise_m < 0)
        throw std::invalid_argument("noise config values must be non-negative");
    return c;
}

std::vector<double> NoiseConfig::sigma_table(const LabelSet& labels) const {
    std::vector<double> table(labels.M(), positional_noise_m);
    for (const auto& [name, sigma] : per_label_noise) {
        int id = labels.find(name);
        if (id < 0 || id >= labels.M())
            throw std::invalid_argument("per-label noise for unknown label: " + name);
        table[id] = sigma;
    }
    return table;
}

MarkerLayout jitter_layout(const MarkerLayout& layout, const SurrogateBody& topology, Rng& rng) {
    MarkerLayout out = layout;
    for (int m = 0; m < layout.M(); ++m) {
        int v = layout.vertex_ids[m];
        const auto& ring = topology.adjacency.at(v);
        if (ring.empty()) continue;
        std::uniform_int_distribution<int> pick(0, int(ring.size()));
        int r = pick(rng);
        out.vertex_ids[m] = (r == 0) ? v : ring[r - 1];
    }
    return out;
}

Pose compose_global_yaw(const Pose& pose, double angle) {
    Pose out = pose;
    Mat3 yaw = Mat3::rotation_y(angle);
    out.rotations[0] = (yaw * Mat3::from_axis_angle(pose.rotations[0])).to_axis_angle();
    out.translation = yaw.apply(pose.translation);
    return out;
}

Pose rotate_globally(const Pose& pose, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    return compose_global_yaw(pose, u(rng));
}

std::vector<Vec3> positional_noise(const std::vector<Vec3>& markers,
                                   const std::vector<double>& sigma, Rng& rng) {
    if (sigma.size() != markers.size())
        throw std::invalid_argument("sigma table does not cover all labels");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec3> out(markers.size());
    for (size_t m = 0; m < markers.size(); ++m) {
        Vec3 eps{normal(rng), normal(rng), normal(rng)};
        out[m] = markers[m] + eps * sigma[m];
    }
    return out;
}

Frame add_ghost_points(const Frame& frame, int count, int null_id, Rng& rng, bool extreme) {
    if (frame.points.empty()) throw std::invalid_argument("empty frame");
    Frame out = frame;
    if (count == 0) return out;

    // center: coordinate-wise median; spread: scalar std of the coordinates
    auto [centered, median] = median_center(frame);
    Vec3 mean{};
    for (const auto& p : frame.points) mean += p;
    mean = mean * (1.0 / frame.size());
    double var = 0.0;
    for (const auto& p : frame.points) {
        Vec3 d = p - mean;
        var += d.dot(d);
    }
    double stddev = std::sqrt(var / (3.0 * frame.size()));

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> cube(-2.0, 2.0);
    std::uniform_real_distribution<double> spread(0.1, 0.8);
    std::uniform_int_distribution<int> kind_pick(0, 2);
    for (int g = 0; g < count; ++g) {
        int kind = extreme ? kind_pick(rng) : 0;
        Vec3 p;
        if (kind == 0) {
            p = median + Vec3{normal(rng), normal(rng), normal(rng)} * stddev;
        } else if (kind == 1) {
            p = {cube(rng), cube(rng), cube(rng)};
        } else {
            // skewed: random center in the cube, anisotropic per-axis sigma
            Vec3 c{cube(rng), cube(rng), cube(rng)};
            Vec3 s{spread(rng), spread(rng), spread(rng)};
            p = c + Vec3{normal(rng) * s.x, normal(rng) * s.y, normal(rng) * s.z};
        }
        out.points.push_back(p);
        if (out.has_labels()) out.labels.push_back(null_id);
        if (out.has_tracklets()) out.tracklet_ids.push_back(-1);
    }
    return out;
}

OcclusionResult occlude_markers(const Frame& frame, int count, int null_id, Rng& rng) {
    if (count > frame.size()) throw std::invalid_argument("occlusion count exceeds point count");
    std::vector<int> idx(frame.size());
    std::iota(idx.begin(), idx.end(), 0);
    // uniformly chosen distinct indices
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, int(idx.size()) - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<bool> drop(frame.size(), false);
    OcclusionResult res;
    for (int i = 0; i < count; ++i) {
        drop[idx[i]] = true;
        if (frame.has_labels() && frame.labels[idx[i]] != null_id)
            res.occluded_labels.push_back(frame.labels[idx[i]]);
    }
    std::sort(res.occluded_labels.begin(), res.occluded_labels.end());
    for (int i = 0; i < frame.size(); ++i) {
        if (drop[i]) continue;
        res.frame.points.push_back(frame.points[i]);
        if (frame.has_labels()) res.frame.labels.push_back(frame.labels[i]);
        if (frame.has_tracklets()) res.frame.tracklet_ids.push_back(frame.tracklet_ids[i]);
    }
    return res;
}

PermutationResult permute_points(const Frame& frame, Rng& rng) {
    PermutationResult res;
    res.perm.resize(frame.size());
    std::iota(res.perm.begin(), res.perm.end(), 0);
    std::shuffle(res.perm.begin(), res.perm.end(), rng);
    res.frame.points.resize(frame.size());
    if (frame.has_labels()) res.frame.labels.resize(frame.size());
    if (frame.has_tracklets()) res.frame.tracklet_ids.resize(frame.size());
    for (int i = 0; i < frame.size(); ++i) {
        res.frame.points[i] = frame.points[res.perm[i]];
        if (frame.has_labels()) res.frame.labels[i] = frame.labels[res.perm[i]];
        if (frame.has_tracklets()) res.frame.tracklet_ids[i] = frame.tracklet_ids[res.perm[i]];
    }
    return res;
}

MoCapSequence break_tracklets(const MoCapSequence& seq, int n_breaks, Rng& rng) {
    MoCapSequence out = seq;
    if (n_breaks == 0 || seq.frames.empty()) return out;

    int max_id = -1;
    std::vector<int> ids;
    {
        std::set<int> seen;
        for (const auto& fr : seq.frames)
            for (int id : fr.tracklet_ids)
                if (id >= 0 && seen.insert(id).second) ids.push_back(id);
    }
    if (ids.empty()) return out;
    std::sort(ids.begin(), ids.end());
    max_id = ids.back();

    for (int b = 0; b < n_breaks; ++b) {
        std::uniform_int_distribution<int> pick_id(0, int(ids.size()) - 1);
        std::uniform_int_distribution<int> pick_t(1, int(out.frames.size()) - 1);
        int tid = ids[pick_id(rng)];
        int t0 = out.frames.size() > 1 ? pick_t(rng) : 0;
        int fresh = ++max_id;
        for (int t = t0; t < out.size(); ++t)
            for (auto& id : out.frames[t].tracklet_ids)
                if (id == tid) id = fresh;
        ids.push_back(fresh);
    }
    return out;
}

namespace {

std::array<double, 10> draw_shape(Rng& rng, const ShapePrior& prior) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 10> beta{};
    for (int i = 0; i < 10; ++i) {
        double s = prior.sigma[i];
        double draw = normal(rng);
        beta[i] = s > 0.0 ? std::clamp(draw * s, -3.0 * s, 3.0 * s) : 0.0;
    }
    return beta;
}

Pose draw_iid_pose(const SurrogateBody& body, const SynthSettings& settings, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Pose p = body.rest_pose();
    for (int j = 1; j < body.joint_count(); ++j) {
        const Joint& jt = body.joints[j];
        // uniform inside the limit box scaled toward the rest pose, so
        // pose_range = 0 degenerates to the rest pose exactly
        auto sample_axis = [&](double lo, double hi) {
            double u = unit(rng);
            return (lo + u * (hi - lo)) * settings.pose_range;
        };
        p.rotations[j] = {sample_axis(jt.limit_lo.x, jt.limit_hi.x),
                          sample_axis(jt.limit_lo.y, jt.limit_hi.y),
                          sample_axis(jt.limit_lo.z, jt.limit_hi.z)};
    }
    return p;
}

// Shared tail of the per-frame pipeline: positional noise, occlusion, ghosts,
// permutation. Returns the final frame plus the occluded labels.
CorpusFrame corrupt_frame(Frame frame, const NoiseConfig& noise,
                          const std::vector<double>& sigma, int null_id, Rng& rng) {
    std::vector<Vec3> noisy = positional_noise(frame.points, sigma, rng);
    frame.points = noisy;

    int max_occl = std::min(noise.max_occlusions, frame.size());
    std::uniform_int_distribution<int> occl_pick(0, max_occl);
    int n_occl = max_occl > 0 ? occl_pick(rng) : 0;
    OcclusionResult occl = occlude_markers(frame, n_occl, null_id, rng);

    std::uniform_int_distribution<int> ghost_pick(0, noise.max_ghosts);
    int n_ghosts = noise.max_ghosts > 0 ? ghost_pick(rng) : 0;
    Frame with_ghosts = occl.frame;
    if (n_ghosts > 0 && !occl.frame.points.empty())
        with_ghosts = add_ghost_points(occl.frame, n_ghosts, null_id, rng, noise.extreme_ghosts);

    CorpusFrame out;
    out.frame = permute_points(with_ghosts, rng).frame;
    out.occluded_labels = std::move(occl.occluded_labels);
    return out;
}

}  // namespace

Corpus generate_training_corpus(const SurrogateBody& body, const MarkerLayout& layout,
                                const NoiseConfig& noise, const SynthSettings& settings,
                                int n_frames, uint64_t seed) {
    Corpus corpus;
    corpus.labels = layout.label_set;
    corpus.frames.resize(n_frames);
    const int null_id = layout.label_set.null_id();
    const std::vector<double> sigma = noise.sigma_table(layout.label_set);

    parallel_for(n_frames, [&](int i) {
        Rng rng = make_rng(derive_seed(seed, uint64_t(i)));
        Pose pose = draw_iid_pose(body, settings, rng);
        pose.shape = draw_shape(rng, settings.shape_prior);

        MarkerLayout frame_layout = layout;
        if (noise.jitter_layout) frame_layout = jitter_layout(layout, body, rng);
        if (noise.rotation_augment) pose = rotate_globally(pose, rng);

        MeshSurface surface = skin(body, pose);
        std::vector<Vec3> markers = place_virtual_markers(surface, frame_layout);

        Frame frame;
        frame.points = markers;
        frame.labels.resize(markers.size());
        std::iota(frame.labels.begin(), frame.labels.end(), 0);

        corpus.frames[i] = corrupt_frame(std::move(frame), noise, sigma, null_id, rng);
    });
    return corpus;
}

SequenceWithGt generate_sequence(const SurrogateBody& body, const MarkerLayout& layout,
                                 const NoiseConfig& noise, const SynthSettings& settings,
                                 double duration_s, double rate_hz, uint64_t seed) {
    SequenceWithGt out;
    out.labels = layout.label_set;
    out.seq.rate_hz = rate_hz;
    const int null_id = layout.label_set.null_id();
    const std::vector<double> sigma = noise.sigma_table(layout.label_set);

    Rng seq_rng = make_rng(derive_seed(seed, 0x5e4));
    std::array<double, 10> shape = draw_shape(seq_rng, settings.shape_prior);
    MarkerLayout seq_layout = layout;
    if (noise.jitter_layout) seq_layout = jitter_layout(layout, body, seq_rng);
    double yaw = 0.0;
    if (noise.rotation_augment) {
        std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
        yaw = u(seq_rng);
    }

    std::vector<Pose> motion =
        sample_motion(body, duration_s, rate_hz, derive_seed(seed, 1), settings.motion);

    int n = int(motion.size());
    out.seq.frames.resize(n);
    out.occluded.resize(n);
    std::vector<int> ghost_base(n, 0);
    // fresh ghost ids must be globally unique; reserve a block per frame
    for (int i = 0; i < n; ++i) ghost_base[i] = layout.M() + i * std::max(1, noise.max_ghosts);

    parallel_for(n, [&](int i) {
        Rng rng = make_rng(derive_seed(seed, 0x1000 + uint64_t(i)));
        Pose pose = motion[i];
        pose.shape = shape;
        pose = compose_global_yaw(pose, yaw);

        MeshSurface surface = skin(body, pose);
        std::vector<Vec3> markers = place_virtual_markers(surface, seq_layout);

        Frame frame;
        frame.points = markers;
        frame.labels.resize(markers.size());
        std::iota(frame.labels.begin(), frame.labels.end(), 0);
        frame.tracklet_ids.resize(markers.size());
        std::iota(frame.tracklet_ids.begin(), frame.tracklet_ids.end(), 0);

        CorpusFrame cf = corrupt_frame(std::move(frame), noise, sigma, null_id, rng);
        // assign fresh tracklet ids to ghosts (they arrive with id -1)
        int next = ghost_base[i];
        for (auto& id : cf.frame.tracklet_ids)
            if (id < 0) id = next++;
        out.seq.frames[i] = std::move(cf.frame);
        out.occluded[i] = std::move(cf.occluded_labels);
    });

    if (settings.tracklet_breaks > 0) {
        Rng rng = make_rng(derive_seed(seed, 0xb4ea));
        out.seq = break_tracklets(out.seq, settings.tracklet_breaks, rng);
    }
    return out;
}

}  // namespace soma
