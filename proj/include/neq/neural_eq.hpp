#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "neq/param_store.hpp"
#include "neq/signal_model.hpp"

namespace neq {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NeuralEqConfig {
    int T = 12;         // window length
    int D = 4;          // 1-based target position within the window
    int N = 32;         // neurons per layer
    int mod_order = 4;

    void validate() const;
};

struct MlpBaselineConfig {
    int hidden1 = 216;
    int hidden2 = 376;
    int T = 12;
    int mod_order = 4;

    void validate() const;
};

// Scratch space for one batch; reused across steps.
struct Cache {
    std::vector<RMat> fwd_in, fwd_hid, bwd_in, bwd_hid;
    std::vector<Eigen::ArrayXd> fwd_m0, bwd_m0;
    RMat a_final, b_final, cat;
    RMat h1, h2;
    RMat g, logits, probs;
    mutable RMat state, scratch1, scratch2;  // reused scratch buffers
};

// Shared surface of NeuralEQ and the MLP baseline so training, evaluation and
// stream prediction run the same code path for both.
class Model {
  public:
    virtual ~Model() = default;
    virtual int window_len() const = 0;
    virtual int target_pos() const = 0;
    virtual int n_classes() const = 0;
    virtual void forward_batch(const RMat& x, Cache& cache) const = 0;
    virtual void backward_batch(const RMat& x, const Cache& cache, const RMat& dlogits,
                                std::vector<double>& grad) const = 0;

    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }

    // Xavier-uniform weights, zero biases and init vectors; deterministic.
    void init_params(std::uint64_t seed);
    std::vector<double> forward_infer(const std::vector<double>& window) const;

  protected:
    ParamStore store_;
};

struct StageOffsets {
    std::size_t wp = 0, bp = 0, u = 0, w1 = 0, v = 0, c1 = 0, w2 = 0, c2 = 0;
};

class NeuralEqModel : public Model {
  public:
    explicit NeuralEqModel(NeuralEqConfig cfg);

    const NeuralEqConfig& config() const { return cfg_; }
    int window_len() const override { return cfg_.T; }
    int target_pos() const override { return cfg_.D; }
    int n_classes() const override { return cfg_.mod_order; }
    void forward_batch(const RMat& x, Cache& cache) const override;
    void backward_batch(const RMat& x, const Cache& cache, const RMat& dlogits,
                        std::vector<double>& grad) const override;

    // Stages in serialization order: forward chain consuming x_1..x_D, then
    // the backward chain consuming x_T..x_{D+1}.
    const std::vector<StageOffsets>& fwd_stages() const { return fwd_; }
    const std::vector<StageOffsets>& bwd_stages() const { return bwd_; }

  private:
    NeuralEqConfig cfg_;
    std::vector<StageOffsets> fwd_, bwd_;
    std::size_t a0_ = 0, b0_ = 0, wg1_ = 0, cg1_ = 0, wg2_ = 0, cg2_ = 0;
};

class MlpModel : public Model {
  public:
    // D is the label position shared with the experiment the MLP baselines.
    MlpModel(MlpBaselineConfig cfg, int D);

    const MlpBaselineConfig& config() const { return cfg_; }
    int window_len() const override { return cfg_.T; }
    int target_pos() const override { return d_; }
    int n_classes() const override { return cfg_.mod_order; }
    void forward_batch(const RMat& x, Cache& cache) const override;
    void backward_batch(const RMat& x, const Cache& cache, const RMat& dlogits,
                        std::vector<double>& grad) const override;

  private:
    MlpBaselineConfig cfg_;
    int d_ = 1;
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, wo_ = 0, bo_ = 0;
};

std::uint64_t param_count(const NeuralEqConfig& cfg);
std::uint64_t mlp_param_count(const MlpBaselineConfig& cfg);

struct OpCount {
    std::uint64_t multiplies = 0;  // per two-layer stage
    std::uint64_t adds = 0;
    std::uint64_t tanhs = 0;
    std::uint64_t perceptron_multiplies = 2;  // reported separately
};

OpCount op_count(const NeuralEqConfig& cfg);

// Sliding one-symbol windows; window k decides symbol k + D - 1 - pre. Edge
// symbols without a full window fall back to a plain slicer.
SymbolStream predict_stream(const Model& model, const ObservedStream& x, int pre);

// Positions of predict_stream decisions backed by a full window.
std::pair<std::size_t, std::size_t> predict_valid_range(const Model& model, int pre, std::size_t n);

}  // namespace neq
