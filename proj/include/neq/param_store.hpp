#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neq {

struct TensorInfo {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    bool weight = false;    // drawn at init; false means zero-initialized
    bool prunable = false;  // participates in global magnitude pruning
    int group = -1;         // layer index for sparsity reporting

    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// All parameters of a network in one flat buffer plus a congruent binary mask.
// Tensor registry order is also the serialization order.
class ParamStore {
  public:
    std::size_t add(std::string name, int rows, int cols, bool weight, bool prunable, int group);
    void allocate();

    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    std::size_t total() const { return total_; }

    double* data(std::size_t tensor_idx) { return values.data() + tensors_[tensor_idx].offset; }
    const double* data(std::size_t tensor_idx) const { return values.data() + tensors_[tensor_idx].offset; }

    std::size_t prunable_count() const;
    std::size_t masked_count() const;
    // Masked fraction of the prunable weights.
    double global_sparsity() const;
    void apply_mask();

    // Name of the tensor containing flat index i.
    const TensorInfo& tensor_at(std::size_t flat_index) const;

    std::vector<double> values;
    std::vector<std::uint8_t> mask;  // 1 = active, 0 = pruned

  private:
    std::vector<TensorInfo> tensors_;
    std::size_t total_ = 0;
};

}  // namespace neq
