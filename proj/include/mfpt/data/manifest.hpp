#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfpt/data/mask.hpp"

namespace mfpt::data {

enum class Role { Authentic, Edited };
enum class Split { Train, Val, Test, Unassigned };

const char* role_name(Role role);
const char* split_name(Split split);
Role parse_role(const std::string& s);
Split parse_split(const std::string& s);

// One dataset record. Paths are relative to the manifest's directory.
struct ImageSample {
    std::string id;
    std::string source_id;
    Role role = Role::Authentic;
    int width = 0;
    int height = 0;
    std::string image_path;
    std::optional<std::string> mask_path;
    std::optional<std::string> instruction;
    Split split = Split::Unassigned;
    std::optional<std::string> subset;
};

struct DatasetManifest {
    std::string base_dir;  // directory the manifest was loaded from
    std::vector<ImageSample> samples;
    std::map<std::string, std::string> subset_tags;  // sample id -> subset label

    const ImageSample* find(const std::string& id) const;
    std::string resolve(const std::string& relative_path) const;

    // Ground-truth mask for a sample: loaded from file for edited samples,
    // synthesized all-zero for authentic ones.
    PixelMask ground_truth(const ImageSample& sample) const;
};

// When Metadata, referenced files are neither required to exist nor checked
// for consistent dimensions (used by read-only statistics over stubs).
enum class VerifyFiles { Strict, Metadata };

struct LoadOptions {
    VerifyFiles verify = VerifyFiles::Strict;
    // Labeling-pipeline inputs list edited samples whose masks do not exist
    // yet; set this to accept them.
    bool allow_unlabeled_edited = false;
};

// Line-delimited JSON, one sample per line, UTF-8.
DatasetManifest load_manifest(const std::string& path,
                              VerifyFiles verify = VerifyFiles::Strict);
DatasetManifest load_manifest(const std::string& path, const LoadOptions& options);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

struct LeakageViolation {
    std::string source_id;
    std::vector<Split> splits;  // sorted, deduplicated
};

// Empty result iff every source_id maps to exactly one split. Unassigned
// samples are ignored. Violations sorted by source_id.
std::vector<LeakageViolation> check_split_leakage(const DatasetManifest& manifest);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    size_t count = 0;
};

// Uniform bins over [0, 1], right-open except the last (closed) bin. Counts
// edited samples only, by their mask's edited-area ratio.
std::vector<HistogramBin> area_histogram(const DatasetManifest& manifest, int bin_count);

}  // namespace mfpt::data
