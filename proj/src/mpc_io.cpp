#include "soma/mpc_io.hpp"

#include <cstdint>
#include <fstream>

namespace soma {

using nlohmann::json;

void write_mpc(const std::string& path, const MoCapSequence& seq, const LabelSet& labels,
               const json& extra_header) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    json header;
    header["format"] = "mpc-jsonl/1";
    header["rate_hz"] = seq.rate_hz;
    json names = json::array();
    for (int m = 0; m < labels.M(); ++m) names.push_back(labels.name(m));
    header["label_set"] = names;
    if (extra_header.is_object())
        for (auto& [k, v] : extra_header.items()) header[k] = v;
    f << header.dump() << "\n";

    for (int t = 0; t < seq.size(); ++t) {
        const Frame& fr = seq.frames[t];
        json line;
        line["t"] = t;
        json pts = json::array();
        for (const auto& p : fr.points) pts.push_back(json::array({p.x, p.y, p.z}));
        line["points"] = pts;
        json tr = json::array();
        for (int i = 0; i < fr.size(); ++i) {
            if (fr.has_tracklets() && fr.tracklet_ids[i] >= 0) tr.push_back(fr.tracklet_ids[i]);
            else tr.push_back(nullptr);
        }
        line["tracklets"] = tr;
        if (fr.has_labels()) {
            json lb = json::array();
            for (int id : fr.labels) {
                if (id == labels.null_id()) lb.push_back(nullptr);
                else lb.push_back(labels.name(id));
            }
            line["labels"] = lb;
        }
        f << line.dump() << "\n";
    }
}

MpcFile read_mpc(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty mpc file " + path);
    json header = json::parse(line);
    if (header.value("format", "") != "mpc-jsonl/1")
        throw std::runtime_error("unsupported mpc format in " + path);

    MpcFile out;
    out.header = header;
    out.labels = LabelSet(header.at("label_set").get<std::vector<std::string>>());
    out.seq.rate_hz = header.value("rate_hz", 30.0);

    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Frame fr;
        for (const auto& p : j.at("points")) {
            Vec3 v{p.at(0), p.at(1), p.at(2)};
            if (!v.finite()) throw std::runtime_error("non-finite point in " + path);
            fr.points.push_back(v);
        }
        if (j.contains("tracklets")) {
            bool any = false;
            for (const auto& t : j["tracklets"]) {
                fr.tracklet_ids.push_back(t.is_null() ? -1 : int(t));
                any = any || !t.is_null();
            }
            if (!any) fr.tracklet_ids.clear();
            else if (fr.tracklet_ids.size() != fr.points.size())
                throw std::runtime_error("tracklet/point count mismatch in " + path);
        }
        if (j.contains("labels")) {
            for (const auto& l : j["labels"]) {
                if (l.is_null()) {
                    fr.labels.push_back(out.labels.null_id());
                } else {
                    int id = out.labels.find(l.get<std::string>());
                    if (id < 0) throw std::runtime_error("unknown label in " + path);
                    fr.labels.push_back(id);
                }
            }
            if (fr.labels.size() != fr.points.size())
                throw std::runtime_error("label/point count mismatch in " + path);
        }
        out.seq.frames.push_back(std::move(fr));
    }
    return out;
}

void write_gt(const std::string& path, const LabelSet& labels,
              const std::vector<GtSparseFrame>& frames, const json& extra_header) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    json header;
    header["format"] = "mpc-gt-jsonl/1";
    json names = json::array();
    for (int m = 0; m < labels.M(); ++m) names.push_back(labels.name(m));
    header["label_set"] = names;
    if (extra_header.is_object())
        for (auto& [k, v] : extra_header.items()) header[k] = v;
    f << header.dump() << "\n";
    for (const auto& fr : frames) {
        json line;
        line["t"] = fr.t;
        line["n"] = fr.n_points;
        json triplets = json::array();
        for (auto [r, c] : fr.entries) triplets.push_back(json::array({r, c, 1.0}));
        line["triplets"] = triplets;
        f << line.dump() << "\n";
    }
}

std::vector<GtSparseFrame> read_gt(const std::string& path, LabelSet* labels_out) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty gt file " + path);
    json header = json::parse(line);
    if (header.value("format", "") != "mpc-gt-jsonl/1")
        throw std::runtime_error("unsupported gt format in " + path);
    if (labels_out) *labels_out = LabelSet(header.at("label_set").get<std::vector<std::string>>());

    std::vector<GtSparseFrame> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        GtSparseFrame fr;
        fr.t = j.at("t");
        fr.n_points = j.at("n");
        for (const auto& tr : j.at("triplets")) fr.entries.emplace_back(int(tr.at(0)), int(tr.at(1)));
        out.push_back(std::move(fr));
    }
    return out;
}

std::string config_hash(const json& config) {
    std::string s = config.dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

}  // namespace soma
