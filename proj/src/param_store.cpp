#include "neq/param_store.hpp"

#include <stdexcept>

namespace neq {

std::size_t ParamStore::add(std::string name, int rows, int cols, bool weight, bool prunable,
                            int group) {
    TensorInfo info;
    info.name = std::move(name);
    info.offset = total_;
    info.rows = rows;
    info.cols = cols;
    info.weight = weight;
    info.prunable = prunable;
    info.group = group;
    total_ += info.size();
    tensors_.push_back(std::move(info));
    return tensors_.size() - 1;
}

void ParamStore::allocate() {
    values.assign(total_, 0.0);
    mask.assign(total_, 1);
}

std::size_t ParamStore::prunable_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_)
        if (t.prunable) n += t.size();
    return n;
}

std::size_t ParamStore::masked_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_)
        if (t.prunable)
            for (std::size_t i = 0; i < t.size(); ++i) n += mask[t.offset + i] ? 0 : 1;
    return n;
}

double ParamStore::global_sparsity() const {
    const std::size_t p = prunable_count();
    return p == 0 ? 0.0 : static_cast<double>(masked_count()) / static_cast<double>(p);
}

void ParamStore::apply_mask() {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!mask[i]) values[i] = 0.0;
}

const TensorInfo& ParamStore::tensor_at(std::size_t flat_index) const {
    for (const auto& t : tensors_)
        if (flat_index >= t.offset && flat_index < t.offset + t.size()) return t;
    throw std::out_of_range("ParamStore::tensor_at: index beyond parameter buffer");
}

}  // namespace neq
