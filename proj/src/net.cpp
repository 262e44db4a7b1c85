#include "soma/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "soma/rng.hpp"

namespace soma {

using nlohmann::json;

void NetConfig::validate() const {
    if (d_model <= 0 || heads <= 0 || layers <= 0 || feature_width <= 0 || sinkhorn_iters <= 0)
        throw std::invalid_argument("net config: all dimensions must be positive");
    if (d_model % heads != 0)
        throw std::invalid_argument("net config: d_model must be divisible by heads");
}

json NetConfig::to_json() const {
    return json{{"d_model", d_model},
                {"heads", heads},
                {"layers", layers},
                {"feature_width", feature_width},
                {"sinkhorn_iters", sinkhorn_iters}};
}

NetConfig NetConfig::from_json(const json& j) {
    NetConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.layers = j.value("layers", c.layers);
    c.feature_width = j.value("feature_width", c.feature_width);
    c.sinkhorn_iters = j.value("sinkhorn_iters", c.sinkhorn_iters);
    c.validate();
    return c;
}

NetParams NetParams::init(const NetConfig& config, int n_labels, uint64_t seed) {
    config.validate();
    if (n_labels <= 0) throw std::invalid_argument("net init: n_labels must be positive");
    const int d = config.d_model, dh = config.head_dim(), fw = config.feature_width;

    NetParams p;
    p.config = config;
    p.n_labels = n_labels;
    p.t.embed_w = Mat(3, d);
    p.t.embed_b = Mat(1, d);
    p.t.blocks.resize(config.layers);
    for (auto& blk : p.t.blocks) {
        blk.wq.assign(config.heads, Mat(d, dh));
        blk.bq.assign(config.heads, Mat(1, dh));
        blk.wk.assign(config.heads, Mat(d, dh));
        blk.bk.assign(config.heads, Mat(1, dh));
        blk.wv.assign(config.heads, Mat(d, dh));
        blk.bv.assign(config.heads, Mat(1, dh));
        blk.wo = Mat(d, d);
        blk.bo = Mat(1, d);
        blk.ln1_g = Mat(1, d);
        blk.ln1_b = Mat(1, d);
        blk.ff_w1 = Mat(d, d);
        blk.ff_b1 = Mat(1, d);
        blk.ff_w2 = Mat(d, d);
        blk.ff_b2 = Mat(1, d);
        blk.ln2_g = Mat(1, d);
        blk.ln2_b = Mat(1, d);
    }
    p.t.head_w1 = Mat(d, fw);
    p.t.head_b1 = Mat(1, fw);
    p.t.head_w2 = Mat(fw, n_labels);
    p.t.head_b2 = Mat(1, n_labels);
    p.t.alpha = Mat(1, 1);

    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    p.t.for_each([&](const std::string& name, Mat& m) {
        bool is_weight = m.rows() > 1;  // biases and gains are 1 x n
        if (name == "alpha") {
            m(0, 0) = 1.0;
        } else if (name.find("ln") != std::string::npos) {
            bool is_gain = name.back() == 'g';
            m.fill(is_gain ? 1.0 : 0.0);
        } else if (is_weight) {
            double bound = std::sqrt(3.0 / double(m.rows()));
            for (size_t i = 0; i < m.size(); ++i) m.data()[i] = unit(rng) * bound;
        } else {
            m.fill(0.0);
        }
    });
    return p;
}

size_t NetParams::param_count() const {
    size_t n = 0;
    t.for_each([&](const std::string&, const Mat& m) { n += m.size(); });
    return n;
}

std::vector<double> NetParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    t.for_each([&](const std::string&, const Mat& m) {
        flat.insert(flat.end(), m.data(), m.data() + m.size());
    });
    return flat;
}

void NetParams::unflatten(const std::vector<double>& flat) {
    size_t off = 0;
    t.for_each([&](const std::string&, Mat& m) {
        if (off + m.size() > flat.size()) throw std::invalid_argument("unflatten: size mismatch");
        std::memcpy(m.data(), flat.data() + off, m.size() * sizeof(double));
        off += m.size();
    });
    if (off != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
}

bool NetParams::all_finite() const {
    bool ok = true;
    t.for_each([&](const std::string&, const Mat& m) { ok = ok && m.all_finite(); });
    return ok;
}

Mat ForwardResult::scores_in_input_order(const Tape& tape) const {
    const Mat& S = tape.val(score_node);
    Mat out(S.rows(), S.cols());
    for (int i = 0; i < S.rows(); ++i) {
        int orig = order[i];
        for (int j = 0; j < S.cols(); ++j) out(orig, j) = S(i, j);
    }
    return out;
}

ForwardResult net_forward(Tape& tape, const NetParams& params, const Frame& frame,
                          const ForwardOptions& options) {
    if (frame.size() == 0) throw std::invalid_argument("empty frame");
    const NetConfig& cfg = params.config;
    const int n = frame.size();

    ForwardResult res;
    auto [centered, offset] = median_center(frame);
    res.median_offset = offset;

    res.order.resize(n);
    std::iota(res.order.begin(), res.order.end(), 0);
    if (options.canonical_order) {
        std::sort(res.order.begin(), res.order.end(), [&](int a, int b) {
            const Vec3& p = centered.points[a];
            const Vec3& q = centered.points[b];
            if (p.x != q.x) return p.x < q.x;
            if (p.y != q.y) return p.y < q.y;
            return p.z < q.z;
        });
    }

    Mat X(n, 3);
    for (int i = 0; i < n; ++i) {
        const Vec3& p = centered.points[res.order[i]];
        X(i, 0) = p.x;
        X(i, 1) = p.y;
        X(i, 2) = p.z;
    }

    // parameter leaves, one per tensor
    res.ids.blocks.resize(cfg.layers);
    for (auto& blk : res.ids.blocks) {
        blk.wq.resize(cfg.heads);
        blk.bq.resize(cfg.heads);
        blk.wk.resize(cfg.heads);
        blk.bk.resize(cfg.heads);
        blk.wv.resize(cfg.heads);
        blk.bv.resize(cfg.heads);
    }
    {
        // walk both structures in the identical declared order
        std::vector<const Mat*> mats;
        params.t.for_each([&](const std::string&, const Mat& m) { mats.push_back(&m); });
        size_t idx = 0;
        res.ids.for_each([&](const std::string&, int& id) { id = tape.leaf(mats[idx++]); });
    }

    int x = tape.add_rowvec(tape.matmul(tape.constant(std::move(X)), res.ids.embed_w),
                            res.ids.embed_b);
    const double att_scale = 1.0 / std::sqrt(double(cfg.d_model));

    if (options.want_attention) res.attention.resize(cfg.layers);
    for (int b = 0; b < cfg.layers; ++b) {
        const auto& blk = res.ids.blocks[b];
        std::vector<int> head_out(cfg.heads);
        for (int h = 0; h < cfg.heads; ++h) {
            int q = tape.add_rowvec(tape.matmul(x, blk.wq[h]), blk.bq[h]);
            int k = tape.add_rowvec(tape.matmul(x, blk.wk[h]), blk.bk[h]);
            int v = tape.add_rowvec(tape.matmul(x, blk.wv[h]), blk.bv[h]);
            int w = tape.row_softmax(tape.scale(tape.matmul_nt(q, k), att_scale));
            if (options.want_attention) res.attention[b].push_back(tape.val(w));
            head_out[h] = tape.matmul(w, v);
        }
        int cat = cfg.heads == 1 ? head_out[0] : tape.concat_cols(head_out);
        int proj = tape.add_rowvec(tape.matmul(cat, blk.wo), blk.bo);
        x = tape.layernorm_rows(tape.add(x, proj), blk.ln1_g, blk.ln1_b);
        int ff = tape.add_rowvec(
            tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(x, blk.ff_w1), blk.ff_b1)),
                        blk.ff_w2),
            blk.ff_b2);
        x = tape.layernorm_rows(tape.add(x, ff), blk.ln2_g, blk.ln2_b);
    }

    int h1 = tape.relu(tape.add_rowvec(tape.matmul(x, res.ids.head_w1), res.ids.head_b1));
    res.score_node = tape.add_rowvec(tape.matmul(h1, res.ids.head_w2), res.ids.head_b2);
    return res;
}

double span_scalar(const Mat& label_attention, const Mat& marker_distances) {
    if (!label_attention.same_shape(marker_distances))
        throw std::invalid_argument("span: shape mismatch");
    const int M = label_attention.rows();
    double acc = 0.0;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) acc += label_attention(i, j) * marker_distances(i, j);
    return acc / double(M);
}

AttentionSpanResult attention_span(const NetParams& params, const std::vector<Frame>& frames,
                                   int n_labels, const Mat& marker_distances) {
    if (frames.empty()) throw std::invalid_argument("attention_span: no frames");
    if (marker_distances.rows() != n_labels || marker_distances.cols() != n_labels)
        throw std::invalid_argument("attention_span: distance matrix shape mismatch");

    const int L = params.config.layers;
    AttentionSpanResult res;
    res.mean_attention.assign(L, Mat(n_labels, n_labels));
    int counted = 0;

    for (const Frame& frame : frames) {
        if (!frame.has_labels()) throw std::invalid_argument("attention_span: unlabeled input");
        if (frame.size() != n_labels) continue;  // needs every marker visible
        bool clean = true;
        for (int lbl : frame.labels) clean = clean && lbl >= 0 && lbl < n_labels;
        if (!clean) continue;  // ghosts present

        Tape tape;
        ForwardOptions opts;
        opts.want_attention = true;
        ForwardResult fwd = net_forward(tape, params, frame, opts);

        for (int l = 0; l < L; ++l) {
            Mat& acc = res.mean_attention[l];
            const auto& heads = fwd.attention[l];
            for (int i = 0; i < n_labels; ++i) {
                int li = frame.labels[fwd.order[i]];
                for (int j = 0; j < n_labels; ++j) {
                    int lj = frame.labels[fwd.order[j]];
                    double mx = heads[0](i, j);
                    for (size_t h = 1; h < heads.size(); ++h) mx = std::max(mx, heads[h](i, j));
                    acc(li, lj) += mx;
                }
            }
        }
        ++counted;
    }
    if (counted == 0)
        throw std::invalid_argument("attention_span: no clean fully-visible frames in input");

    res.per_layer_m.resize(L);
    for (int l = 0; l < L; ++l) {
        Mat& acc = res.mean_attention[l];
        for (size_t i = 0; i < acc.size(); ++i) acc.data()[i] /= double(counted);
        res.per_layer_m[l] = span_scalar(acc, marker_distances);
    }
    return res;
}

// --- Checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'O', 'M', 'A', 'C', 'K', 'P', '1'};

void put_u64_le(std::ostream& os, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t get_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(buf[i]) << (8 * i);
    return v;
}

void put_f32_le(std::ostream& os, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = (u >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(buf), 4);
}

float get_f32_le(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= uint32_t(buf[i]) << (8 * i);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetParams& params, const LabelSet& labels,
                     const json& metadata) {
    if (labels.M() != params.n_labels)
        throw std::invalid_argument("checkpoint: label set does not match score head");
    json header;
    header["format"] = "soma-ckpt/1";
    header["net_config"] = params.config.to_json();
    json names = json::array();
    for (int m = 0; m < labels.M(); ++m) names.push_back(labels.name(m));
    header["label_set"] = names;
    header["head_activation"] = "relu";
    header["dtype"] = "f32le";
    json tensors = json::array();
    params.t.for_each([&](const std::string& name, const Mat& m) {
        tensors.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    });
    header["tensors"] = tensors;
    header["training"] = metadata;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    std::string head = header.dump();
    f.write(kMagic, 8);
    put_u64_le(f, head.size());
    f.write(head.data(), std::streamsize(head.size()));
    params.t.for_each([&](const std::string&, const Mat& m) {
        for (size_t i = 0; i < m.size(); ++i) put_f32_le(f, float(m.data()[i]));
    });
    if (!f) throw std::runtime_error("write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a soma checkpoint: " + path);
    uint64_t head_len = get_u64_le(f);
    std::string head(head_len, '\0');
    f.read(head.data(), std::streamsize(head_len));
    json header = json::parse(head);
    if (header.value("format", "") != "soma-ckpt/1")
        throw std::runtime_error("unsupported checkpoint format in " + path);

    Model model;
    model.labels = LabelSet(header.at("label_set").get<std::vector<std::string>>());
    NetConfig cfg = NetConfig::from_json(header.at("net_config"));
    model.params = NetParams::init(cfg, model.labels.M(), 0);
    model.meta = header.value("training", json::object());

    size_t ti = 0;
    const json& tensors = header.at("tensors");
    model.params.t.for_each([&](const std::string& name, Mat& m) {
        const json& spec = tensors.at(ti++);
        if (spec.at("name") != name || spec.at("rows") != m.rows() || spec.at("cols") != m.cols())
            throw std::runtime_error("checkpoint tensor table mismatch at " + name);
        for (size_t i = 0; i < m.size(); ++i) m.data()[i] = double(get_f32_le(f));
    });
    if (!f) throw std::runtime_error("truncated checkpoint " + path);
    return model;
}

}  // namespace soma
