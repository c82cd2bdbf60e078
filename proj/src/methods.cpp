#include "noiselab/methods.hpp"

#include <algorithm>
#include <cmath>

#include "noiselab/errors.hpp"
#include "noiselab/loss.hpp"

namespace noiselab {

Method method_from_string(const std::string& name) {
    if (name == "standard") return Method::Standard;
    if (name == "coteaching") return Method::Coteaching;
    if (name == "sce") return Method::Sce;
    if (name == "gce") return Method::Gce;
    if (name == "bootsoft") return Method::Bootsoft;
    throw ConfigError("unknown method: " + name);
}

std::string to_string(Method method) {
    switch (method) {
    case Method::Standard: return "standard";
    case Method::Coteaching: return "coteaching";
    case Method::Sce: return "sce";
    case Method::Gce: return "gce";
    case Method::Bootsoft: return "bootsoft";
    }
    throw ConfigError("invalid method value");
}

namespace {

double prob_of_target(std::span<const double> logits, int target,
                      std::vector<double>& scratch) {
    scratch.resize(logits.size());
    softmax_row(logits, scratch);
    return scratch[static_cast<std::size_t>(target)];
}

} // namespace

double sce_loss(std::span<const double> logits, int target, double a_s,
                double b_s, double clamp_a) {
    if (a_s < 0.0 || b_s < 0.0) {
        throw ConfigError("sce_loss: weights must be >= 0");
    }
    std::vector<double> probs;
    const double p_y = prob_of_target(logits, target, probs);
    const double ce = -log_prob_of(logits, target);
    const double rce = -clamp_a * (1.0 - p_y);
    return a_s * ce + b_s * rce;
}

double gce_loss(std::span<const double> logits, int target, double q) {
    if (q <= 0.0 || q > 1.0) {
        throw ConfigError("gce_loss: q must lie in (0, 1]");
    }
    std::vector<double> probs;
    const double p_y = prob_of_target(logits, target, probs);
    return (1.0 - std::pow(p_y, q)) / q;
}

double bootsoft_loss(std::span<const double> logits, int target, double b_b) {
    if (b_b < 0.0 || b_b > 1.0) {
        throw ConfigError("bootsoft_loss: weight must lie in [0, 1]");
    }
    // log p via max-shifted log-sum-exp
    double max = logits[0];
    for (double z : logits) {
        if (z > max) max = z;
    }
    double lse = 0.0;
    for (double z : logits) lse += std::exp(z - max);
    lse = std::log(lse) + max;

    std::vector<double> probs;
    prob_of_target(logits, target, probs);
    double loss = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double target_k =
            b_b * (static_cast<int>(k) == target ? 1.0 : 0.0) +
            (1.0 - b_b) * probs[k];
        loss -= target_k * (logits[k] - lse);
    }
    return loss;
}

BatchLoss method_batch_loss(Method method, const Matrix& logits,
                            std::span<const int> targets,
                            const MethodParams& params) {
    if (method == Method::Standard) {
        auto lg = softmax_cross_entropy(logits, targets);
        return {lg.loss, std::move(lg.dlogits)};
    }
    if (method == Method::Coteaching) {
        throw ConfigError("coteaching batches are selected by the harness");
    }

    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    BatchLoss out;
    out.dlogits = Matrix(n, c);
    std::vector<double> probs(c);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto row = logits.row(r);
        const int y = targets[r];
        softmax_row(row, probs);
        const double p_y = probs[static_cast<std::size_t>(y)];

        // Every method's row gradient is scale * (p - onehot(y)).
        double scale = 0.0;
        switch (method) {
        case Method::Sce:
            total += sce_loss(row, y, params.sce_a, params.sce_b, params.sce_clamp);
            scale = params.sce_a - params.sce_b * params.sce_clamp * p_y;
            break;
        case Method::Gce:
            total += gce_loss(row, y, params.gce_q);
            scale = std::pow(p_y, params.gce_q);
            break;
        case Method::Bootsoft:
            total += bootsoft_loss(row, y, params.boot_b);
            scale = params.boot_b;
            break;
        default:
            throw ConfigError("unhandled method");
        }

        auto grad = out.dlogits.row(r);
        for (std::size_t k = 0; k < c; ++k) {
            const double onehot = (static_cast<int>(k) == y) ? 1.0 : 0.0;
            grad[k] = scale * (probs[k] - onehot) / static_cast<double>(n);
        }
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> coteach_select(
    std::span<const double> losses_a, std::span<const double> losses_b,
    double keep_fraction) {
    if (losses_a.size() != losses_b.size()) {
        throw ConfigError("coteach_select: loss vector length mismatch");
    }
    if (keep_fraction <= 0.0 || keep_fraction > 1.0) {
        throw ConfigError("coteach_select: keep fraction must lie in (0, 1]");
    }
    const std::size_t m = losses_a.size();
    const std::size_t kept = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(m)));

    auto smallest = [kept, m](std::span<const double> losses) {
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&losses](std::size_t a, std::size_t b) {
                      if (losses[a] != losses[b]) return losses[a] < losses[b];
                      return a < b;
                  });
        order.resize(kept);
        std::sort(order.begin(), order.end());
        return order;
    };
    // A trains on B's small-loss picks and vice versa.
    return {smallest(losses_b), smallest(losses_a)};
}

double keep_fraction_schedule(std::uint64_t epoch, double tau,
                              std::uint64_t warmup) {
    if (warmup < 1) {
        throw ConfigError("keep_fraction_schedule: warmup must be >= 1");
    }
    const double progress =
        std::min(static_cast<double>(epoch) / static_cast<double>(warmup), 1.0);
    return 1.0 - tau * progress;
}

} // namespace noiselab
