#include "noiselab/loss.hpp"

#include <cmath>

#include "noiselab/errors.hpp"

namespace noiselab {

namespace {

void check_finite(const Matrix& logits) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits.data()[i])) {
            throw NumericError("non-finite logits");
        }
    }
}

void check_target(int target, std::size_t classes) {
    if (target < 0 || static_cast<std::size_t>(target) >= classes) {
        throw ConfigError("target class out of range");
    }
}

} // namespace

void softmax_row(std::span<const double> logits, std::span<double> probs) {
    double max = logits[0];
    for (double z : logits) {
        if (z > max) max = z;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(logits[k] - max);
        sum += probs[k];
    }
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] /= sum;
    }
}

Matrix softmax(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        softmax_row(logits.row(r), probs.row(r));
    }
    return probs;
}

double log_prob_of(std::span<const double> logits, int target) {
    double max = logits[0];
    for (double z : logits) {
        if (z > max) max = z;
    }
    double sum = 0.0;
    for (double z : logits) {
        sum += std::exp(z - max);
    }
    return logits[static_cast<std::size_t>(target)] - max - std::log(sum);
}

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> targets) {
    if (logits.rows() != targets.size()) {
        throw ConfigError("softmax_cross_entropy: row/target count mismatch");
    }
    check_finite(logits);
    const std::size_t n = logits.rows();
    LossGrad out;
    out.dlogits = Matrix(n, logits.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        check_target(targets[r], logits.cols());
        auto grad = out.dlogits.row(r);
        softmax_row(logits.row(r), grad);
        total -= log_prob_of(logits.row(r), targets[r]);
        grad[static_cast<std::size_t>(targets[r])] -= 1.0;
        for (double& g : grad) {
            g /= static_cast<double>(n);
        }
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

LossGrad softmax_cross_entropy(const Matrix& logits, const Matrix& target_probs) {
    if (logits.rows() != target_probs.rows() || logits.cols() != target_probs.cols()) {
        throw ConfigError("softmax_cross_entropy: logits/target shape mismatch");
    }
    check_finite(logits);
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    LossGrad out;
    out.dlogits = Matrix(n, c);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto t = target_probs.row(r);
        double tsum = 0.0;
        for (double tk : t) tsum += tk;
        if (std::abs(tsum - 1.0) > 1e-9) {
            throw ConfigError("softmax_cross_entropy: target row does not sum to 1");
        }
        auto grad = out.dlogits.row(r);
        softmax_row(logits.row(r), grad);
        // -sum_k t_k log p_k, via max-shifted log-sum-exp
        auto z = logits.row(r);
        double max = z[0];
        for (double v : z) {
            if (v > max) max = v;
        }
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - max);
        lse = std::log(lse) + max;
        for (std::size_t k = 0; k < c; ++k) {
            total -= t[k] * (z[k] - lse);
            grad[k] = (grad[k] - t[k]) / static_cast<double>(n);
        }
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

std::vector<double> per_row_cross_entropy(const Matrix& logits,
                                          std::span<const int> targets) {
    if (logits.rows() != targets.size()) {
        throw ConfigError("per_row_cross_entropy: row/target count mismatch");
    }
    check_finite(logits);
    std::vector<double> losses(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        check_target(targets[r], logits.cols());
        losses[r] = -log_prob_of(logits.row(r), targets[r]);
    }
    return losses;
}

Matrix cross_entropy_grad_subset(const Matrix& logits, std::span<const int> targets,
                                 std::span<const std::size_t> selected) {
    if (logits.rows() != targets.size()) {
        throw ConfigError("cross_entropy_grad_subset: row/target count mismatch");
    }
    Matrix dlogits(logits.rows(), logits.cols());
    if (selected.empty()) {
        return dlogits;
    }
    const double denom = static_cast<double>(selected.size());
    for (std::size_t r : selected) {
        check_target(targets[r], logits.cols());
        auto grad = dlogits.row(r);
        softmax_row(logits.row(r), grad);
        grad[static_cast<std::size_t>(targets[r])] -= 1.0;
        for (double& g : grad) {
            g /= denom;
        }
    }
    return dlogits;
}

} // namespace noiselab
