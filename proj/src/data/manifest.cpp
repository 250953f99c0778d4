#include "mfpt/data/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mfpt/core/error.hpp"
#include "mfpt/core/image.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mfpt::data {

const char* role_name(Role role) {
    return role == Role::Authentic ? "authentic" : "edited";
}

const char* split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
        case Split::Unassigned: return "unassigned";
    }
    return "?";
}

Role parse_role(const std::string& s) {
    if (s == "authentic") return Role::Authentic;
    if (s == "edited") return Role::Edited;
    throw DataError("manifest: unknown role '" + s + "'");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    if (s == "unassigned") return Split::Unassigned;
    throw DataError("manifest: unknown split '" + s + "'");
}

const ImageSample* DatasetManifest::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

std::string DatasetManifest::resolve(const std::string& relative_path) const {
    if (base_dir.empty()) return relative_path;
    return (fs::path(base_dir) / relative_path).string();
}

PixelMask DatasetManifest::ground_truth(const ImageSample& sample) const {
    if (sample.role == Role::Authentic || !sample.mask_path) {
        return PixelMask(sample.width, sample.height, 0);
    }
    return load_mask(resolve(*sample.mask_path));
}

namespace {

ImageSample parse_record(const json& j, size_t line_no, bool allow_unlabeled_edited) {
    auto required_string = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) {
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": missing or non-string field '" + key + "'");
        }
        return j[key].get<std::string>();
    };
    auto required_int = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_number_integer()) {
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": missing or non-integer field '" + key + "'");
        }
        return j[key].get<int>();
    };

    static const std::set<std::string> known_keys = {
        "id", "source_id", "role", "width", "height",
        "image_path", "mask_path", "instruction", "split", "subset"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known_keys.count(it.key())) {
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": unknown field '" + it.key() + "'");
        }
    }

    ImageSample s;
    s.id = required_string("id");
    s.source_id = required_string("source_id");
    s.role = parse_role(required_string("role"));
    s.width = required_int("width");
    s.height = required_int("height");
    s.image_path = required_string("image_path");
    if (j.contains("mask_path")) s.mask_path = required_string("mask_path");
    if (j.contains("instruction")) s.instruction = required_string("instruction");
    s.split = parse_split(required_string("split"));
    if (j.contains("subset")) s.subset = required_string("subset");

    if (s.id.empty()) {
        throw DataError("manifest line " + std::to_string(line_no) + ": empty id");
    }
    if (s.width <= 0 || s.height <= 0) {
        throw DataError("manifest line " + std::to_string(line_no) + ": sample '" + s.id +
                        "' has non-positive dimensions");
    }
    if (s.role == Role::Edited && !s.mask_path && !allow_unlabeled_edited) {
        throw DataError("manifest line " + std::to_string(line_no) + ": edited sample '" +
                        s.id + "' has no mask_path");
    }
    return s;
}

void verify_sample_files(const DatasetManifest& manifest, const ImageSample& s) {
    const std::string image_path = manifest.resolve(s.image_path);
    if (!fs::exists(image_path)) {
        throw DataError("manifest: sample '" + s.id + "' references missing image '" +
                        image_path + "'");
    }
    int iw = 0, ih = 0;
    if (!imageio::probe_dimensions(image_path, iw, ih)) {
        throw DataError("manifest: sample '" + s.id + "' image '" + image_path +
                        "' is not a readable PNG/JPEG");
    }
    if (!s.mask_path) return;
    const std::string mask_path = manifest.resolve(*s.mask_path);
    if (!fs::exists(mask_path)) {
        throw DataError("manifest: sample '" + s.id + "' references missing mask '" +
                        mask_path + "'");
    }
    int mw = 0, mh = 0;
    if (!imageio::probe_dimensions(mask_path, mw, mh)) {
        throw DataError("manifest: sample '" + s.id + "' mask '" + mask_path +
                        "' is not a readable image");
    }
    if (mw != iw || mh != ih) {
        throw DataError("manifest: sample '" + s.id + "' mask is " + std::to_string(mw) +
                        "x" + std::to_string(mh) + " but image is " + std::to_string(iw) +
                        "x" + std::to_string(ih));
    }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path, VerifyFiles verify) {
    LoadOptions options;
    options.verify = verify;
    return load_manifest(path, options);
}

DatasetManifest load_manifest(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest: cannot open '" + path + "'");

    DatasetManifest manifest;
    manifest.base_dir = fs::path(path).parent_path().string();

    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Tolerate blank lines and CR line endings.
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": JSON parse error: " + e.what());
        }
        if (!j.is_object()) {
            throw DataError("manifest line " + std::to_string(line_no) + ": not a JSON object");
        }
        ImageSample s = parse_record(j, line_no, options.allow_unlabeled_edited);
        if (!seen_ids.insert(s.id).second) {
            throw DataError("manifest line " + std::to_string(line_no) + ": duplicate id '" +
                            s.id + "'");
        }
        if (s.subset) manifest.subset_tags[s.id] = *s.subset;
        manifest.samples.push_back(std::move(s));
    }

    if (options.verify == VerifyFiles::Strict) {
        for (const auto& s : manifest.samples) verify_sample_files(manifest, s);
    }
    return manifest;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("manifest: cannot write '" + path + "'");
    for (const auto& s : manifest.samples) {
        json j;
        j["id"] = s.id;
        j["source_id"] = s.source_id;
        j["role"] = role_name(s.role);
        j["width"] = s.width;
        j["height"] = s.height;
        j["image_path"] = s.image_path;
        if (s.mask_path) j["mask_path"] = *s.mask_path;
        if (s.instruction) j["instruction"] = *s.instruction;
        j["split"] = split_name(s.split);
        if (s.subset) j["subset"] = *s.subset;
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("manifest: write failed for '" + path + "'");
}

std::vector<LeakageViolation> check_split_leakage(const DatasetManifest& manifest) {
    std::map<std::string, std::set<Split>> by_source;
    for (const auto& s : manifest.samples) {
        if (s.split == Split::Unassigned) continue;
        by_source[s.source_id].insert(s.split);
    }
    std::vector<LeakageViolation> violations;
    for (const auto& [source_id, splits] : by_source) {
        if (splits.size() <= 1) continue;
        LeakageViolation v;
        v.source_id = source_id;
        v.splits.assign(splits.begin(), splits.end());
        violations.push_back(std::move(v));
    }
    return violations;  // std::map iteration is already sorted by source_id
}

std::vector<HistogramBin> area_histogram(const DatasetManifest& manifest, int bin_count) {
    if (bin_count <= 0) throw UsageError("histogram: bin count must be positive");
    std::vector<HistogramBin> bins(bin_count);
    for (int b = 0; b < bin_count; ++b) {
        bins[b].lo = static_cast<double>(b) / bin_count;
        bins[b].hi = static_cast<double>(b + 1) / bin_count;
    }
    for (const auto& s : manifest.samples) {
        if (s.role != Role::Edited) continue;
        PixelMask mask;
        try {
            mask = manifest.ground_truth(s);
        } catch (const Error& e) {
            throw DataError("histogram: cannot load mask for sample '" + s.id +
                            "': " + e.what());
        }
        const double ratio = edited_area_ratio(mask);
        int idx = static_cast<int>(ratio * bin_count);
        if (idx >= bin_count) idx = bin_count - 1;  // ratio == 1.0 lands in the last bin
        bins[idx].count += 1;
    }
    return bins;
}

}  // namespace mfpt::data
