#include "greit/io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace greit {

namespace {

constexpr std::uint16_t kWeightVersion = 1;

void wr_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void wr_u16(std::ostream& os, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    wr_bytes(os, b, 2);
}

void wr_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    wr_bytes(os, b, 4);
}

void wr_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    wr_u32(os, bits);
}

void rd_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw IoError(std::string("weight file truncated while reading ") + what);
    }
}

std::uint16_t rd_u16(std::istream& is, const char* what) {
    unsigned char b[2];
    rd_bytes(is, b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t rd_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    rd_bytes(is, b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float rd_f32(std::istream& is, const char* what) {
    const std::uint32_t bits = rd_u32(is, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string join_names(const std::vector<std::string>& names, std::size_t limit = 6) {
    std::string s;
    for (std::size_t i = 0; i < names.size() && i < limit; ++i) {
        if (i) s += ", ";
        s += names[i];
    }
    if (names.size() > limit) s += ", ... (" + std::to_string(names.size()) + " total)";
    return s;
}

}  // namespace

void save_weights(const Network& net, const std::string& path) {
    const auto params = net.named_parameters();  // sorted by name
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("GRWT", 4);
    wr_u16(os, kWeightVersion);
    wr_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        if (name.size() > 0xffff) throw IoError("parameter name too long: " + name);
        wr_u16(os, static_cast<std::uint16_t>(name.size()));
        wr_bytes(os, name.data(), name.size());
        os.put(0);  // dtype f32
        os.put(static_cast<char>(t->rank()));
        for (int d = 0; d < t->rank(); ++d) wr_u32(os, static_cast<std::uint32_t>(t->dim(d)));
        for (std::int64_t i = 0; i < t->size(); ++i) wr_f32(os, (*t)[i]);
    }
    if (!os) throw IoError("write failed: " + path);
}

void load_weights(const std::string& path, Network& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    char magic[4];
    rd_bytes(is, magic, 4, "magic");
    if (std::memcmp(magic, "GRWT", 4) != 0) throw IoError("bad magic in " + path);
    const std::uint16_t version = rd_u16(is, "version");
    if (version != kWeightVersion) {
        throw IoError("unsupported weight file version " + std::to_string(version));
    }
    const std::uint32_t count = rd_u32(is, "entry count");

    std::map<std::string, std::pair<Shape, std::vector<float>>> entries;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = rd_u16(is, "name length");
        std::string name(name_len, '\0');
        rd_bytes(is, name.data(), name_len, "name");
        unsigned char dtype, rank;
        rd_bytes(is, &dtype, 1, "dtype");
        rd_bytes(is, &rank, 1, "rank");
        if (dtype != 0) throw IoError("unsupported dtype for " + name);
        Shape shape;
        std::int64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            const std::uint32_t dim = rd_u32(is, "dims");
            shape.push_back(static_cast<int>(dim));
            n *= dim;
        }
        std::vector<float> data(static_cast<std::size_t>(n));
        for (auto& v : data) v = rd_f32(is, name.c_str());
        if (!entries.emplace(std::move(name), std::make_pair(std::move(shape), std::move(data))).second) {
            throw IoError("duplicate entry in weight file");
        }
    }

    std::map<std::string, Tensor<float>*> targets;
    net.visit_params([&](const std::string& name, Tensor<float>& t, bool) { targets[name] = &t; });

    std::vector<std::string> missing, extra;
    for (const auto& [name, _] : targets) {
        if (!entries.count(name)) missing.push_back(name);
    }
    for (const auto& [name, _] : entries) {
        if (!targets.count(name)) extra.push_back(name);
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "weight file does not match network parameters;";
        if (!missing.empty()) msg += " missing from file: " + join_names(missing) + ";";
        if (!extra.empty()) msg += " not in network: " + join_names(extra);
        throw IoError(msg);
    }

    for (auto& [name, entry] : entries) {
        Tensor<float>* t = targets.at(name);
        if (entry.first != t->shape()) {
            throw IoError("shape mismatch for " + name + ": file " + shape_str(entry.first) +
                          " vs network " + shape_str(t->shape()));
        }
        for (std::int64_t i = 0; i < t->size(); ++i) (*t)[i] = entry.second[static_cast<std::size_t>(i)];
    }
}

namespace {

int ppm_token(std::istream& is) {
    // Skips whitespace and '#' comments, then reads one decimal integer.
    for (;;) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v;
    if (!(is >> v)) throw IoError("malformed PPM header");
    return v;
}

Tensor<float> load_ppm(std::istream& is, const ImageNorm& norm) {
    const int w = ppm_token(is), h = ppm_token(is), maxval = ppm_token(is);
    if (w < 1 || h < 1 || w > 1 << 16 || h > 1 << 16) throw IoError("PPM dimensions out of range");
    if (maxval != 255) throw IoError("PPM maxval must be 255");
    is.get();  // single whitespace before binary data
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    rd_bytes(is, raw.data(), raw.size(), "PPM pixels");
    Tensor<float> out({1, 3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = raw[(static_cast<std::size_t>(y) * w + x) * 3 +
                                     static_cast<std::size_t>(c)] / 255.0;
                out.at4(0, c, y, x) = static_cast<float>((v - norm.mean[static_cast<std::size_t>(c)]) /
                                                         norm.std[static_cast<std::size_t>(c)]);
            }
        }
    }
    return out;
}

Tensor<float> load_grim(std::istream& is) {
    const int c = static_cast<int>(rd_u32(is, "channels"));
    const int h = static_cast<int>(rd_u32(is, "height"));
    const int w = static_cast<int>(rd_u32(is, "width"));
    if (c < 1 || h < 1 || w < 1 || c > 4096 || h > 1 << 16 || w > 1 << 16) {
        throw IoError("raw image dimensions out of range");
    }
    Tensor<float> out({1, c, h, w});
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = rd_f32(is, "raw image payload");
    return out;
}

}  // namespace

Tensor<float> load_image(const std::string& path, const ImageNorm& norm) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    char magic[2];
    rd_bytes(is, magic, 2, "image magic");
    if (magic[0] == 'P' && magic[1] == '6') return load_ppm(is, norm);
    char rest[2];
    rd_bytes(is, rest, 2, "image magic");
    if (magic[0] == 'G' && magic[1] == 'R' && rest[0] == 'I' && rest[1] == 'M') return load_grim(is);
    throw IoError("unrecognized image format (want PPM P6 or GRIM raw): " + path);
}

void save_raw_image(const Tensor<float>& img, const std::string& path) {
    if (img.rank() != 4 || img.dim(0) != 1) throw ShapeError("save_raw_image: expected (1,C,H,W)");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("GRIM", 4);
    wr_u32(os, static_cast<std::uint32_t>(img.dim(1)));
    wr_u32(os, static_cast<std::uint32_t>(img.dim(2)));
    wr_u32(os, static_cast<std::uint32_t>(img.dim(3)));
    for (std::int64_t i = 0; i < img.size(); ++i) wr_f32(os, img[i]);
    if (!os) throw IoError("write failed: " + path);
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("config parse error: " + std::string(e.what()));
    }
    if (!j.is_object()) throw IoError("config root must be an object");

    static const char* known[] = {"arch",      "widths",       "input_size", "num_keypoints",
                                  "stem_width", "lka_kernels", "se_ratio",   "ccw_ratio",
                                  "cprime_div", "cprime_min",  "lks_expansion", "flip_pairs",
                                  "k_constants", "mean",       "std"};
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw IoError("config: unknown key '" + key + "'");
    }
    if (!j.contains("arch")) throw IoError("config: missing 'arch'");

    RunConfig cfg;
    try {
        cfg.arch = ArchConfig::for_variant(j.at("arch").get<std::string>());
        if (j.contains("widths")) cfg.arch.widths = j.at("widths").get<std::vector<int>>();
        if (j.contains("num_keypoints")) cfg.arch.num_keypoints = j.at("num_keypoints").get<int>();
        if (j.contains("stem_width")) cfg.arch.stem_width = j.at("stem_width").get<int>();
        if (j.contains("lka_kernels")) {
            const auto v = j.at("lka_kernels").get<std::vector<int>>();
            if (v.size() != 3) throw IoError("config: lka_kernels wants [dw, dwd, dilation]");
            cfg.arch.lka_dw_kernel = v[0];
            cfg.arch.lka_dwd_kernel = v[1];
            cfg.arch.lka_dwd_dilation = v[2];
        }
        if (j.contains("se_ratio")) cfg.arch.se_ratio = j.at("se_ratio").get<int>();
        if (j.contains("ccw_ratio")) cfg.arch.ccw_ratio = j.at("ccw_ratio").get<int>();
        if (j.contains("cprime_div")) cfg.arch.gsw_cprime_div = j.at("cprime_div").get<int>();
        if (j.contains("cprime_min")) cfg.arch.gsw_cprime_min = j.at("cprime_min").get<int>();
        if (j.contains("lks_expansion")) cfg.arch.lks_expansion = j.at("lks_expansion").get<int>();
        if (j.contains("flip_pairs")) {
            cfg.arch.flip_pairs.clear();
            for (const auto& p : j.at("flip_pairs")) {
                const auto v = p.get<std::vector<int>>();
                if (v.size() != 2) throw IoError("config: flip pair wants [a, b]");
                cfg.arch.flip_pairs.emplace_back(v[0], v[1]);
            }
        }
        if (j.contains("k_constants")) cfg.arch.oks_k = j.at("k_constants").get<std::vector<double>>();
        if (j.contains("input_size")) {
            const auto v = j.at("input_size").get<std::vector<int>>();
            if (v.size() != 2) throw IoError("config: input_size wants [h, w]");
            cfg.input_h = v[0];
            cfg.input_w = v[1];
        }
        if (j.contains("mean")) {
            const auto v = j.at("mean").get<std::vector<double>>();
            if (v.size() != 3) throw IoError("config: mean wants 3 values");
            std::copy(v.begin(), v.end(), cfg.norm.mean.begin());
        }
        if (j.contains("std")) {
            const auto v = j.at("std").get<std::vector<double>>();
            if (v.size() != 3) throw IoError("config: std wants 3 values");
            std::copy(v.begin(), v.end(), cfg.norm.std.begin());
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("config type error: " + std::string(e.what()));
    }
    try {
        cfg.arch.validate();
    } catch (const ValueError& e) {
        throw IoError(std::string("config invalid: ") + e.what());
    }
    return cfg;
}

Dataset load_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open annotations: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("annotation parse error: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("annotations") || !j.at("annotations").is_array()) {
        throw IoError("annotation file wants {\"annotations\": [...]}");
    }
    Dataset ds;
    bool any_head = false;
    try {
        for (const auto& a : j.at("annotations")) {
            Annotation ann;
            ann.image_id = a.at("image_id").get<std::int64_t>();
            if (a.contains("instance_id")) ann.instance_id = a.at("instance_id").get<std::int64_t>();
            if (a.contains("area")) ann.area = a.at("area").get<double>();
            if (a.contains("score")) ann.score = a.at("score").get<double>();
            for (const auto& kp : a.at("keypoints")) {
                const auto v = kp.get<std::vector<double>>();
                if (v.size() != 3) throw IoError("keypoint wants [x, y, v-or-score]");
                ann.keypoints.push_back({v[0], v[1], v[2]});
            }
            double head = 0;
            if (a.contains("head_size")) {
                head = a.at("head_size").get<double>();
                any_head = true;
            }
            ds.annotations.push_back(std::move(ann));
            ds.head_sizes.push_back(head);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("annotation type error: " + std::string(e.what()));
    }
    if (!any_head) ds.head_sizes.clear();
    return ds;
}

void save_pose_results(const std::vector<PoseResult>& results, const std::string& path) {
    nlohmann::json j;
    j["annotations"] = nlohmann::json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        nlohmann::json a;
        a["image_id"] = r.image_id;
        a["instance_id"] = static_cast<std::int64_t>(i);
        double score = 0;
        a["keypoints"] = nlohmann::json::array();
        for (const auto& kp : r.keypoints) {
            a["keypoints"].push_back({kp.x, kp.y, kp.score});
            score += kp.score;
        }
        a["score"] = r.keypoints.empty() ? 0.0 : score / static_cast<double>(r.keypoints.size());
        a["box"] = {r.box.x, r.box.y, r.box.w, r.box.h};
        j["annotations"].push_back(std::move(a));
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace greit
