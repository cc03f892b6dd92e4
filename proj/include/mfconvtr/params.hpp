#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfconvtr/tensor.hpp"

namespace mfconvtr {

enum class InitKind { uniform_fan_in, zeros, ones };

// Ordered registry of learnable tensors. Registration order is the
// canonical order for initialization draws, checkpoint manifests and
// parameter counting.
class ParamRegistry {
public:
    struct Entry {
        std::string name;
        TensorPtr tensor;
        InitKind init = InitKind::zeros;
        int fan_in = 0;
    };

    TensorPtr create(const std::string& name, std::vector<int> shape, InitKind init,
                     int fan_in = 0);

    const std::vector<Entry>& entries() const { return entries_; }
    TensorPtr find(const std::string& name) const;

    long long total_count() const;
    void initialize(std::uint64_t seed);
    void zero_grads();

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mfconvtr
