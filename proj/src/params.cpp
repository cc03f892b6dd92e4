#include "mfconvtr/params.hpp"

#include <cmath>

#include "mfconvtr/errors.hpp"
#include "mfconvtr/rng.hpp"

namespace mfconvtr {

TensorPtr ParamRegistry::create(const std::string& name, std::vector<int> shape,
                                InitKind init, int fan_in) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    if (init == InitKind::uniform_fan_in && fan_in <= 0)
        throw ConfigError("fan-in initialization needs a positive fan-in for " + name);
    auto tensor = Tensor::zeros(std::move(shape), true);
    index_[name] = entries_.size();
    entries_.push_back({name, tensor, init, fan_in});
    return tensor;
}

TensorPtr ParamRegistry::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : entries_[it->second].tensor;
}

long long ParamRegistry::total_count() const {
    long long total = 0;
    for (const auto& e : entries_) total += static_cast<long long>(e.tensor->size());
    return total;
}

void ParamRegistry::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& e : entries_) {
        switch (e.init) {
            case InitKind::zeros:
                std::fill(e.tensor->data.begin(), e.tensor->data.end(), 0.0);
                break;
            case InitKind::ones:
                std::fill(e.tensor->data.begin(), e.tensor->data.end(), 1.0);
                break;
            case InitKind::uniform_fan_in: {
                // He-scaled uniform: variance 2/fan_in keeps activation scale
                // roughly constant through the relu stack.
                const double bound = std::sqrt(6.0 / static_cast<double>(e.fan_in));
                for (double& v : e.tensor->data) v = rng.uniform(-bound, bound);
                break;
            }
        }
        e.tensor->zero_grad();
    }
}

void ParamRegistry::zero_grads() {
    for (auto& e : entries_) e.tensor->zero_grad();
}

}  // namespace mfconvtr
