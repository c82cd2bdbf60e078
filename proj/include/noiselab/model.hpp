#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noiselab/matrix.hpp"

namespace noiselab {

enum class ModelKind { Mlp, CnnS };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

// cnn-s is a fixed compact architecture: two (conv 3x3 same, ReLU,
// maxpool 2x2) blocks, one dense ReLU hidden layer, a dense C-way head.
inline constexpr std::size_t kCnnConv1Filters = 8;
inline constexpr std::size_t kCnnConv2Filters = 16;
inline constexpr std::size_t kCnnHidden = 32;

struct ModelSpec {
    ModelKind kind = ModelKind::Mlp;
    std::size_t input_dim = 0; // mlp
    std::size_t input_h = 0;   // cnn-s
    std::size_t input_w = 0;
    std::size_t input_c = 0;
    std::vector<std::size_t> hidden; // mlp widths; may be empty (linear model)
    std::size_t classes = 0;
    std::uint64_t init_seed = 1;

    void validate() const;
    std::size_t flat_input_dim() const;
};

// Fixed-architecture network over a flat parameter vector. Parameters,
// activations and gradients are all double precision; given the same spec
// and seed the parameter trajectory is bit-identical run to run.
class Model {
public:
    // He-style scaled uniform weight init per layer, biases zero, drawn
    // deterministically from spec.init_seed.
    static Model init(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }
    std::size_t param_count() const { return params_.size(); }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    struct Cache {
        Matrix input;
        std::vector<Matrix> acts; // mlp: post-activation output per layer
        struct CnnStage {
            std::vector<double> relu1, pool1, relu2, pool2, hidden;
            std::vector<std::size_t> argmax1, argmax2;
        };
        std::vector<CnnStage> cnn;
    };

    Matrix forward(const Matrix& batch) const;
    Matrix forward_cached(const Matrix& batch, Cache& cache) const;

    // Gradient of the loss w.r.t. every parameter given dLoss/dlogits for
    // the batch that produced `cache`. Overwrites `grads`.
    void backward(const Cache& cache, const Matrix& dlogits,
                  std::span<double> grads) const;

    // Row-wise argmax, ties to the lowest class index.
    std::vector<int> predict(const Matrix& batch) const;

private:
    Model() = default;

    ModelSpec spec_;
    std::vector<double> params_;
    // Offsets into params_: weight/bias pairs per layer in forward order.
    std::vector<std::size_t> offsets_;
};

// Max relative error between analytic backprop and central finite
// differences of the mean cross-entropy loss, over a strided sample of at
// least min(100, param_count) parameters.
double gradient_check(const Model& model, const Matrix& batch,
                      std::span<const int> labels, double epsilon);

} // namespace noiselab
