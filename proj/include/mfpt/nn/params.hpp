#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mfpt/core/tensor.hpp"

namespace mfpt::nn {

// Trainable-parameter grouping used for gradient-contract checks and
// parameter accounting. Backbone parameters are the frozen set.
enum class ParamGroup {
    Backbone,
    FInP,
    FFrP,
    Tokens,
    Adapter,
    Decoder,
};

const char* group_name(ParamGroup group);

struct Param {
    std::string name;
    ParamGroup group = ParamGroup::Backbone;
    bool trainable = false;
    Tensor value;
    Tensor grad;  // accumulated across a batch; same shape as value
};

// Ordered, name-indexed parameter registry. Order is creation order and is
// part of the checkpoint format.
class ParamStore {
public:
    int add(const std::string& name, ParamGroup group, bool trainable, Tensor value);

    Param& at(int id) { return params_[id]; }
    const Param& at(int id) const { return params_[id]; }
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;
    // Index in creation order, or -1 when absent.
    int index_of(const std::string& name) const;

    size_t count() const { return params_.size(); }
    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }

    void zero_grad();

    size_t total_elements() const;
    size_t trainable_elements() const;

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, int> index_;
};

// Checkpoint container: magic, format version, a JSON config blob, then the
// named float64 arrays in store order. Everything little-endian.
void save_archive(const std::string& path, const std::string& config_json,
                  const ParamStore& store);

struct LoadedArchive {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> arrays;
};

LoadedArchive load_archive(const std::string& path);

}  // namespace mfpt::nn
