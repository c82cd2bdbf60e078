#include "noiselab/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "noiselab/errors.hpp"
#include "noiselab/loss.hpp"
#include "noiselab/rng.hpp"

namespace noiselab {

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "mlp") return ModelKind::Mlp;
    if (name == "cnn-s") return ModelKind::CnnS;
    throw ConfigError("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
    return kind == ModelKind::Mlp ? "mlp" : "cnn-s";
}

void ModelSpec::validate() const {
    if (classes < 2) {
        throw ConfigError("model requires at least 2 classes");
    }
    if (kind == ModelKind::Mlp) {
        if (input_dim < 1) {
            throw ConfigError("mlp input_dim must be >= 1");
        }
        for (std::size_t width : hidden) {
            if (width < 1) {
                throw ConfigError("mlp hidden widths must be >= 1");
            }
        }
    } else {
        if (input_h < 4 || input_w < 4 || input_c < 1) {
            throw ConfigError("cnn-s input must be at least 4x4 with >= 1 channel");
        }
    }
}

std::size_t ModelSpec::flat_input_dim() const {
    return kind == ModelKind::Mlp ? input_dim : input_h * input_w * input_c;
}

namespace {

struct CnnDims {
    std::size_t h, w, c;
    std::size_t ph1, pw1; // after first pool
    std::size_t ph2, pw2; // after second pool
    std::size_t flat2;    // dense input size

    explicit CnnDims(const ModelSpec& spec)
        : h(spec.input_h), w(spec.input_w), c(spec.input_c) {
        ph1 = h / 2;
        pw1 = w / 2;
        ph2 = ph1 / 2;
        pw2 = pw1 / 2;
        flat2 = ph2 * pw2 * kCnnConv2Filters;
    }
};

// Layer dimensions for the mlp: [input, hidden..., classes].
std::vector<std::size_t> mlp_dims(const ModelSpec& spec) {
    std::vector<std::size_t> dims;
    dims.push_back(spec.input_dim);
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(spec.classes);
    return dims;
}

// Z (B x out) = A (B x in) * W^T + b, with W stored row-major (out x in).
void linear_forward(const Matrix& a, const double* w, const double* b,
                    std::size_t out_dim, Matrix& z) {
    const std::size_t in_dim = a.cols();
    z = Matrix(a.rows(), out_dim);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        auto zrow = z.row(i);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* wrow = w + o * in_dim;
            double acc = b[o];
            for (std::size_t k = 0; k < in_dim; ++k) {
                acc += arow[k] * wrow[k];
            }
            zrow[o] = acc;
        }
    }
}

void relu_inplace(Matrix& z) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z.data()[i] < 0.0) z.data()[i] = 0.0;
    }
}

void relu_inplace(std::vector<double>& z) {
    for (double& v : z) {
        if (v < 0.0) v = 0.0;
    }
}

// Same-padded 3x3 convolution over channel-last activations:
// out[(y*w + x)*filters + f].
void conv3x3_forward(const double* in, std::size_t h, std::size_t w,
                     std::size_t in_c, const double* weights, const double* bias,
                     std::size_t filters, double* out) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t f = 0; f < filters; ++f) {
                double acc = bias[f];
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(x + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const double* px =
                            in + (static_cast<std::size_t>(iy) * w +
                                  static_cast<std::size_t>(ix)) * in_c;
                        const double* wk = weights + ((f * 3 + ky) * 3 + kx) * in_c;
                        for (std::size_t ch = 0; ch < in_c; ++ch) {
                            acc += px[ch] * wk[ch];
                        }
                    }
                }
                out[(y * w + x) * filters + f] = acc;
            }
        }
    }
}

void conv3x3_backward(const double* in, std::size_t h, std::size_t w,
                      std::size_t in_c, const double* weights, std::size_t filters,
                      const double* dout, double* dweights, double* dbias,
                      double* din) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t f = 0; f < filters; ++f) {
                const double g = dout[(y * w + x) * filters + f];
                if (g == 0.0) continue;
                dbias[f] += g;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(y + ky) - 1;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(x + kx) - 1;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t pix =
                            (static_cast<std::size_t>(iy) * w +
                             static_cast<std::size_t>(ix)) * in_c;
                        const std::size_t wix = ((f * 3 + ky) * 3 + kx) * in_c;
                        for (std::size_t ch = 0; ch < in_c; ++ch) {
                            dweights[wix + ch] += in[pix + ch] * g;
                            if (din != nullptr) {
                                din[pix + ch] += weights[wix + ch] * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

// 2x2 stride-2 max pool, channel-last; records the argmax source index.
void maxpool2_forward(const double* in, std::size_t h, std::size_t w,
                      std::size_t channels, double* out,
                      std::size_t* argmax) {
    const std::size_t ph = h / 2;
    const std::size_t pw = w / 2;
    for (std::size_t py = 0; py < ph; ++py) {
        for (std::size_t px = 0; px < pw; ++px) {
            for (std::size_t ch = 0; ch < channels; ++ch) {
                std::size_t best_idx = ((2 * py) * w + (2 * px)) * channels + ch;
                double best = in[best_idx];
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx =
                            ((2 * py + dy) * w + (2 * px + dx)) * channels + ch;
                        if (in[idx] > best) {
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t oidx = (py * pw + px) * channels + ch;
                out[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
}

} // namespace

Model Model::init(const ModelSpec& spec) {
    spec.validate();
    Model model;
    model.spec_ = spec;

    // (fan_in, weight_count, bias_count) per layer in forward order
    std::vector<std::array<std::size_t, 3>> layers;
    if (spec.kind == ModelKind::Mlp) {
        const auto dims = mlp_dims(spec);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            layers.push_back({dims[l], dims[l + 1] * dims[l], dims[l + 1]});
        }
    } else {
        const CnnDims d(spec);
        if (d.ph2 == 0 || d.pw2 == 0) {
            throw ConfigError("cnn-s input too small for two pooling stages");
        }
        layers.push_back({9 * d.c, kCnnConv1Filters * 9 * d.c, kCnnConv1Filters});
        layers.push_back({9 * kCnnConv1Filters,
                          kCnnConv2Filters * 9 * kCnnConv1Filters,
                          kCnnConv2Filters});
        layers.push_back({d.flat2, kCnnHidden * d.flat2, kCnnHidden});
        layers.push_back({kCnnHidden, spec.classes * kCnnHidden, spec.classes});
    }

    std::size_t total = 0;
    for (const auto& [fan_in, wcount, bcount] : layers) {
        model.offsets_.push_back(total);
        total += wcount;
        model.offsets_.push_back(total);
        total += bcount;
    }
    model.params_.assign(total, 0.0);

    Rng rng(spec.init_seed);
    std::size_t layer_idx = 0;
    for (const auto& [fan_in, wcount, bcount] : layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        double* w = model.params_.data() + model.offsets_[2 * layer_idx];
        for (std::size_t i = 0; i < wcount; ++i) {
            w[i] = rng.uniform(-limit, limit);
        }
        // biases stay zero
        ++layer_idx;
    }
    return model;
}

Matrix Model::forward(const Matrix& batch) const {
    Cache cache;
    return forward_cached(batch, cache);
}

Matrix Model::forward_cached(const Matrix& batch, Cache& cache) const {
    if (batch.cols() != spec_.flat_input_dim()) {
        throw ConfigError("forward: batch feature width does not match model input");
    }
    cache = Cache{};
    cache.input = batch;

    if (spec_.kind == ModelKind::Mlp) {
        const auto dims = mlp_dims(spec_);
        const std::size_t layer_count = dims.size() - 1;
        cache.acts.resize(layer_count);
        const Matrix* current = &batch;
        for (std::size_t l = 0; l < layer_count; ++l) {
            const double* w = params_.data() + offsets_[2 * l];
            const double* b = params_.data() + offsets_[2 * l + 1];
            linear_forward(*current, w, b, dims[l + 1], cache.acts[l]);
            if (l + 1 < layer_count) {
                relu_inplace(cache.acts[l]);
            }
            current = &cache.acts[l];
        }
        return cache.acts.back();
    }

    const CnnDims d(spec_);
    const std::size_t n = batch.rows();
    cache.cnn.resize(n);
    Matrix logits(n, spec_.classes);
    const double* w1 = params_.data() + offsets_[0];
    const double* b1 = params_.data() + offsets_[1];
    const double* w2 = params_.data() + offsets_[2];
    const double* b2 = params_.data() + offsets_[3];
    const double* wd = params_.data() + offsets_[4];
    const double* bd = params_.data() + offsets_[5];
    const double* wh = params_.data() + offsets_[6];
    const double* bh = params_.data() + offsets_[7];

    for (std::size_t e = 0; e < n; ++e) {
        auto& st = cache.cnn[e];
        const double* img = batch.row(e).data();

        st.relu1.assign(d.h * d.w * kCnnConv1Filters, 0.0);
        conv3x3_forward(img, d.h, d.w, d.c, w1, b1, kCnnConv1Filters,
                        st.relu1.data());
        relu_inplace(st.relu1);

        st.pool1.assign(d.ph1 * d.pw1 * kCnnConv1Filters, 0.0);
        st.argmax1.assign(st.pool1.size(), 0);
        maxpool2_forward(st.relu1.data(), d.h, d.w, kCnnConv1Filters,
                         st.pool1.data(), st.argmax1.data());

        st.relu2.assign(d.ph1 * d.pw1 * kCnnConv2Filters, 0.0);
        conv3x3_forward(st.pool1.data(), d.ph1, d.pw1, kCnnConv1Filters, w2, b2,
                        kCnnConv2Filters, st.relu2.data());
        relu_inplace(st.relu2);

        st.pool2.assign(d.ph2 * d.pw2 * kCnnConv2Filters, 0.0);
        st.argmax2.assign(st.pool2.size(), 0);
        maxpool2_forward(st.relu2.data(), d.ph1, d.pw1, kCnnConv2Filters,
                         st.pool2.data(), st.argmax2.data());

        st.hidden.assign(kCnnHidden, 0.0);
        for (std::size_t j = 0; j < kCnnHidden; ++j) {
            double acc = bd[j];
            const double* wrow = wd + j * d.flat2;
            for (std::size_t i = 0; i < d.flat2; ++i) {
                acc += wrow[i] * st.pool2[i];
            }
            st.hidden[j] = acc;
        }
        relu_inplace(st.hidden);

        auto lrow = logits.row(e);
        for (std::size_t k = 0; k < spec_.classes; ++k) {
            double acc = bh[k];
            const double* wrow = wh + k * kCnnHidden;
            for (std::size_t j = 0; j < kCnnHidden; ++j) {
                acc += wrow[j] * st.hidden[j];
            }
            lrow[k] = acc;
        }
    }
    return logits;
}

void Model::backward(const Cache& cache, const Matrix& dlogits,
                     std::span<double> grads) const {
    if (grads.size() != params_.size()) {
        throw ConfigError("backward: gradient buffer size mismatch");
    }
    std::fill(grads.begin(), grads.end(), 0.0);

    if (spec_.kind == ModelKind::Mlp) {
        const auto dims = mlp_dims(spec_);
        const std::size_t layer_count = dims.size() - 1;
        Matrix dz = dlogits;
        for (std::size_t l = layer_count; l-- > 0;) {
            const Matrix& a_in = (l == 0) ? cache.input : cache.acts[l - 1];
            const std::size_t in_dim = dims[l];
            const std::size_t out_dim = dims[l + 1];
            double* dw = grads.data() + offsets_[2 * l];
            double* db = grads.data() + offsets_[2 * l + 1];
            const double* w = params_.data() + offsets_[2 * l];
            for (std::size_t i = 0; i < dz.rows(); ++i) {
                auto dzrow = dz.row(i);
                auto arow = a_in.row(i);
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double g = dzrow[o];
                    if (g == 0.0) continue;
                    db[o] += g;
                    double* dwrow = dw + o * in_dim;
                    for (std::size_t k = 0; k < in_dim; ++k) {
                        dwrow[k] += g * arow[k];
                    }
                }
            }
            if (l == 0) break;
            Matrix da(dz.rows(), in_dim);
            for (std::size_t i = 0; i < dz.rows(); ++i) {
                auto dzrow = dz.row(i);
                auto darow = da.row(i);
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double g = dzrow[o];
                    if (g == 0.0) continue;
                    const double* wrow = w + o * in_dim;
                    for (std::size_t k = 0; k < in_dim; ++k) {
                        darow[k] += g * wrow[k];
                    }
                }
            }
            // ReLU mask from the post-activation values
            const Matrix& a_prev = cache.acts[l - 1];
            for (std::size_t i = 0; i < da.size(); ++i) {
                if (a_prev.data()[i] <= 0.0) da.data()[i] = 0.0;
            }
            dz = std::move(da);
        }
        return;
    }

    const CnnDims d(spec_);
    const double* w2 = params_.data() + offsets_[2];
    const double* wd = params_.data() + offsets_[4];
    const double* wh = params_.data() + offsets_[6];
    double* dw1 = grads.data() + offsets_[0];
    double* db1 = grads.data() + offsets_[1];
    double* dw2 = grads.data() + offsets_[2];
    double* db2 = grads.data() + offsets_[3];
    double* dwd = grads.data() + offsets_[4];
    double* dbd = grads.data() + offsets_[5];
    double* dwh = grads.data() + offsets_[6];
    double* dbh = grads.data() + offsets_[7];

    std::vector<double> dhidden(kCnnHidden);
    std::vector<double> dpool2(d.flat2);
    std::vector<double> drelu2(d.ph1 * d.pw1 * kCnnConv2Filters);
    std::vector<double> dpool1(d.ph1 * d.pw1 * kCnnConv1Filters);
    std::vector<double> drelu1(d.h * d.w * kCnnConv1Filters);

    for (std::size_t e = 0; e < cache.cnn.size(); ++e) {
        const auto& st = cache.cnn[e];
        auto dlrow = dlogits.row(e);
        const double* img = cache.input.row(e).data();

        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        for (std::size_t k = 0; k < spec_.classes; ++k) {
            const double g = dlrow[k];
            if (g == 0.0) continue;
            dbh[k] += g;
            double* dwrow = dwh + k * kCnnHidden;
            const double* wrow = wh + k * kCnnHidden;
            for (std::size_t j = 0; j < kCnnHidden; ++j) {
                dwrow[j] += g * st.hidden[j];
                dhidden[j] += g * wrow[j];
            }
        }
        for (std::size_t j = 0; j < kCnnHidden; ++j) {
            if (st.hidden[j] <= 0.0) dhidden[j] = 0.0;
        }

        std::fill(dpool2.begin(), dpool2.end(), 0.0);
        for (std::size_t j = 0; j < kCnnHidden; ++j) {
            const double g = dhidden[j];
            if (g == 0.0) continue;
            dbd[j] += g;
            double* dwrow = dwd + j * d.flat2;
            const double* wrow = wd + j * d.flat2;
            for (std::size_t i = 0; i < d.flat2; ++i) {
                dwrow[i] += g * st.pool2[i];
                dpool2[i] += g * wrow[i];
            }
        }

        std::fill(drelu2.begin(), drelu2.end(), 0.0);
        for (std::size_t i = 0; i < dpool2.size(); ++i) {
            drelu2[st.argmax2[i]] += dpool2[i];
        }
        for (std::size_t i = 0; i < drelu2.size(); ++i) {
            if (st.relu2[i] <= 0.0) drelu2[i] = 0.0;
        }

        std::fill(dpool1.begin(), dpool1.end(), 0.0);
        conv3x3_backward(st.pool1.data(), d.ph1, d.pw1, kCnnConv1Filters, w2,
                         kCnnConv2Filters, drelu2.data(), dw2, db2,
                         dpool1.data());

        std::fill(drelu1.begin(), drelu1.end(), 0.0);
        for (std::size_t i = 0; i < dpool1.size(); ++i) {
            drelu1[st.argmax1[i]] += dpool1[i];
        }
        for (std::size_t i = 0; i < drelu1.size(); ++i) {
            if (st.relu1[i] <= 0.0) drelu1[i] = 0.0;
        }

        conv3x3_backward(img, d.h, d.w, d.c, nullptr, kCnnConv1Filters,
                         drelu1.data(), dw1, db1, nullptr);
    }
}

std::vector<int> Model::predict(const Matrix& batch) const {
    const Matrix logits = forward(batch);
    std::vector<int> preds(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        std::size_t best = 0;
        for (std::size_t k = 1; k < row.size(); ++k) {
            if (row[k] > row[best]) best = k;
        }
        preds[r] = static_cast<int>(best);
    }
    return preds;
}

double gradient_check(const Model& model, const Matrix& batch,
                      std::span<const int> labels, double epsilon) {
    if (epsilon <= 0.0) {
        throw ConfigError("gradient_check: epsilon must be positive");
    }
    Model::Cache cache;
    const Matrix logits = model.forward_cached(batch, cache);
    const LossGrad lg = softmax_cross_entropy(logits, labels);
    std::vector<double> analytic(model.param_count());
    model.backward(cache, lg.dlogits, analytic);

    const std::size_t total = model.param_count();
    const std::size_t sample = std::min<std::size_t>(total, 128);

    Model probe = model;
    double max_rel_err = 0.0;
    for (std::size_t s = 0; s < sample; ++s) {
        const std::size_t idx = s * total / sample;
        const double saved = probe.params()[idx];
        probe.params()[idx] = saved + epsilon;
        const double loss_plus =
            softmax_cross_entropy(probe.forward(batch), labels).loss;
        probe.params()[idx] = saved - epsilon;
        const double loss_minus =
            softmax_cross_entropy(probe.forward(batch), labels).loss;
        probe.params()[idx] = saved;
        const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        const double denom =
            std::max({1.0, std::abs(numeric), std::abs(analytic[idx])});
        max_rel_err = std::max(max_rel_err,
                               std::abs(numeric - analytic[idx]) / denom);
    }
    return max_rel_err;
}

} // namespace noiselab
