#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "noiselab/errors.hpp"
#include "noiselab/loss.hpp"
#include "noiselab/model.hpp"
#include "noiselab/optim.hpp"
#include "noiselab/rng.hpp"

using namespace noiselab;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, double lo, double hi,
                     std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform(lo, hi);
    }
    return m;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> labels(n);
    for (auto& label : labels) {
        label = static_cast<int>(rng.index(classes));
    }
    return labels;
}

} // namespace

TEST_CASE("forward: zero-weight mlp produces all-zero logits") {
    ModelSpec spec;
    spec.input_dim = 5;
    spec.hidden = {7};
    spec.classes = 3;
    Model model = Model::init(spec);
    for (double& p : model.params()) p = 0.0;

    const Matrix batch = random_matrix(4, 5, -2.0, 2.0, 11);
    const Matrix logits = model.forward(batch);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        CHECK(logits.data()[i] == 0.0);
    }
}

TEST_CASE("forward: output row count equals batch row count") {
    ModelSpec spec;
    spec.input_dim = 3;
    spec.hidden = {4};
    spec.classes = 2;
    const Model model = Model::init(spec);
    for (std::size_t n : {1, 2, 9}) {
        const Matrix logits = model.forward(random_matrix(n, 3, -1, 1, n));
        CHECK(logits.rows() == n);
        CHECK(logits.cols() == 2);
    }
}

TEST_CASE("forward: matches a straight-line matmul oracle") {
    ModelSpec spec;
    spec.input_dim = 4;
    spec.hidden = {6};
    spec.classes = 3;
    spec.init_seed = 42;
    const Model model = Model::init(spec);
    const Matrix x = random_matrix(5, 4, -1.5, 1.5, 7);
    const Matrix logits = model.forward(x);

    // parameter layout is W0 (6x4), b0 (6), W1 (3x6), b1 (3) in init order
    auto p = model.params();
    const double* w0 = p.data();
    const double* b0 = p.data() + 6 * 4;
    const double* w1 = b0 + 6;
    const double* b1 = w1 + 3 * 6;

    for (std::size_t i = 0; i < 5; ++i) {
        double hidden[6];
        for (std::size_t h = 0; h < 6; ++h) {
            double acc = b0[h];
            for (std::size_t k = 0; k < 4; ++k) {
                acc += x(i, k) * w0[h * 4 + k];
            }
            hidden[h] = acc > 0.0 ? acc : 0.0;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            double acc = b1[c];
            for (std::size_t h = 0; h < 6; ++h) {
                acc += hidden[h] * w1[c * 6 + h];
            }
            CHECK(std::abs(acc - logits(i, c)) <= 1e-12);
        }
    }
}

TEST_CASE("forward: shape mismatch raises ConfigError") {
    ModelSpec spec;
    spec.input_dim = 4;
    spec.classes = 2;
    const Model model = Model::init(spec);
    CHECK_THROWS_AS(model.forward(Matrix(3, 5)), ConfigError);
}

TEST_CASE("softmax_cross_entropy: uniform logits give ln C") {
    const Matrix logits(2, 4, 0.25);
    const std::vector<int> targets{1, 3};
    const auto lg = softmax_cross_entropy(logits, targets);
    CHECK(std::abs(lg.loss - std::log(4.0)) <= 1e-9);
}

TEST_CASE("softmax_cross_entropy: saturated logit gives ~zero loss") {
    Matrix logits(1, 3, 0.0);
    logits(0, 2) = 50.0;
    const std::vector<int> targets{2};
    const auto lg = softmax_cross_entropy(logits, targets);
    CHECK(lg.loss >= 0.0);
    CHECK(lg.loss < 1e-9);
}

TEST_CASE("softmax_cross_entropy: gradient matches central differences") {
    Matrix logits = random_matrix(5, 4, -1.0, 1.0, 21);
    const auto targets = random_labels(5, 4, 22);
    const auto lg = softmax_cross_entropy(logits, targets);

    const double eps = 1e-6;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            const double saved = logits(r, c);
            logits(r, c) = saved + eps;
            const double plus = softmax_cross_entropy(logits, targets).loss;
            logits(r, c) = saved - eps;
            const double minus = softmax_cross_entropy(logits, targets).loss;
            logits(r, c) = saved;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double analytic = lg.dlogits(r, c);
            const double denom =
                std::max({1.0, std::abs(numeric), std::abs(analytic)});
            CHECK(std::abs(numeric - analytic) / denom <= 1e-8);
        }
    }
}

TEST_CASE("softmax_cross_entropy: gradient rows sum to zero") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix logits = random_matrix(6, 5, -3.0, 3.0, seed);
        const auto targets = random_labels(6, 5, seed + 100);
        const auto lg = softmax_cross_entropy(logits, targets);
        for (std::size_t r = 0; r < 6; ++r) {
            double sum = 0.0;
            for (double g : lg.dlogits.row(r)) sum += g;
            CHECK(std::abs(sum) <= 1e-10);
        }
    }
}

TEST_CASE("softmax_cross_entropy: probability targets must sum to one") {
    const Matrix logits(1, 3, 0.0);
    Matrix bad(1, 3, 0.4); // sums to 1.2
    CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), ConfigError);

    Matrix onehot(1, 3, 0.0);
    onehot(0, 1) = 1.0;
    const std::vector<int> idx{1};
    const auto a = softmax_cross_entropy(logits, onehot);
    const auto b = softmax_cross_entropy(logits, idx);
    CHECK(std::abs(a.loss - b.loss) <= 1e-12);
}

TEST_CASE("softmax_cross_entropy: non-finite logits raise NumericError") {
    Matrix logits(1, 2, 0.0);
    logits(0, 0) = std::numeric_limits<double>::infinity();
    const std::vector<int> targets{0};
    CHECK_THROWS_AS(softmax_cross_entropy(logits, targets), NumericError);
}

TEST_CASE("adam_step: first step has magnitude ~= lr per coordinate") {
    std::vector<double> params{1.0, -2.0, 0.5};
    const std::vector<double> grads{0.3, -0.7, 1.9};
    AdamState state = AdamState::init(3, {0.01, 0.9, 0.999, 1e-8});
    const std::vector<double> before = params;
    adam_step(params, grads, state, 1.0);
    CHECK(state.t == 1);
    for (std::size_t i = 0; i < 3; ++i) {
        const double step = params[i] - before[i];
        const double sign = grads[i] > 0.0 ? 1.0 : -1.0;
        CHECK(std::abs(step + 0.01 * sign) <= 1e-6);
    }
}

TEST_CASE("adam_step: zero gradients never move parameters") {
    std::vector<double> params{0.25, -1.5};
    const std::vector<double> before = params;
    const std::vector<double> grads{0.0, 0.0};
    AdamState state = AdamState::init(2, {});
    for (int step = 0; step < 25; ++step) {
        adam_step(params, grads, state, 1.0);
    }
    CHECK(params == before);
}

TEST_CASE("adam_step: three steps match a hand-computed trace") {
    const double lr = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> params{0.7};
    AdamState state = AdamState::init(1, {lr, beta1, beta2, eps});
    const double gs[3] = {0.5, -0.2, 0.1};

    // independent recurrence, straight-line arithmetic
    double expect = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const double g = gs[t - 1];
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double m_hat = m / (1.0 - std::pow(beta1, t));
        const double v_hat = v / (1.0 - std::pow(beta2, t));
        expect -= lr * m_hat / (std::sqrt(v_hat) + eps);

        const std::vector<double> grads{g};
        adam_step(params, grads, state, 1.0);
    }
    CHECK(std::abs(params[0] - expect) <= 1e-12);
    CHECK(state.t == 3);
}

TEST_CASE("adam_step: beta1 = beta2 = 0 degenerates to sign descent") {
    Rng rng(5);
    std::vector<double> params(16, 0.0);
    std::vector<double> grads(16);
    for (auto& g : grads) g = rng.uniform(-2.0, 2.0);
    AdamState state = AdamState::init(16, {0.05, 0.0, 0.0, 1e-300});
    adam_step(params, grads, state, 1.0);
    for (std::size_t i = 0; i < 16; ++i) {
        const double sign = grads[i] > 0.0 ? 1.0 : (grads[i] < 0.0 ? -1.0 : 0.0);
        CHECK(std::abs(params[i] + 0.05 * sign) <= 1e-12);
    }
}

TEST_CASE("adam_step: shape mismatch raises ConfigError") {
    std::vector<double> params{1.0, 2.0};
    const std::vector<double> grads{1.0};
    AdamState state = AdamState::init(2, {});
    CHECK_THROWS_AS(adam_step(params, grads, state, 1.0), ConfigError);
}

TEST_CASE("lr_multiplier: named schedule breakpoints") {
    const auto decay1 = ScheduleSpec::decay1();
    CHECK(lr_multiplier(decay1, 10) == 1.0);
    CHECK(lr_multiplier(decay1, 20) == 0.5);
    CHECK(lr_multiplier(decay1, 35) == 0.25);
    CHECK(lr_multiplier(decay1, 40) == 0.1);
    CHECK(lr_multiplier(decay1, 400) == 0.1);

    const auto decay2 = ScheduleSpec::decay2();
    CHECK(lr_multiplier(decay2, 79) == 1.0);
    CHECK(lr_multiplier(decay2, 120) == 0.1);
    CHECK(lr_multiplier(decay2, 185) == 0.5);

    CHECK(lr_multiplier(ScheduleSpec::constant(), 500) == 1.0);
}

TEST_CASE("lr_multiplier: piecewise-constant step function") {
    const auto schedule = ScheduleSpec::decay1();
    // linear-scan oracle over the breakpoint list
    for (std::uint64_t epoch = 0; epoch <= 60; ++epoch) {
        double expect = 1.0;
        for (const auto& [bp, mult] : schedule.breakpoints) {
            if (bp <= epoch) expect = mult;
        }
        CHECK(lr_multiplier(schedule, epoch) == expect);
    }
}

TEST_CASE("ScheduleSpec: validation rejects bad breakpoints") {
    ScheduleSpec bad_order{"x", {{30, 0.5}, {20, 0.25}}};
    CHECK_THROWS_AS(bad_order.validate(), ConfigError);
    ScheduleSpec bad_mult{"x", {{10, 1.5}}};
    CHECK_THROWS_AS(bad_mult.validate(), ConfigError);
    CHECK_THROWS_AS(ScheduleSpec::named("decay9"), ConfigError);
}

TEST_CASE("gradient_check: random mlp within 1e-6") {
    ModelSpec spec;
    spec.input_dim = 6;
    spec.hidden = {8, 5};
    spec.classes = 3;
    spec.init_seed = 1234;
    const Model model = Model::init(spec);
    const Matrix batch = random_matrix(12, 6, -1.0, 1.0, 99);
    const auto labels = random_labels(12, 3, 100);
    CHECK(gradient_check(model, batch, labels, 1e-5) <= 1e-6);
}

TEST_CASE("gradient_check: random cnn-s within 1e-6") {
    ModelSpec spec;
    spec.kind = ModelKind::CnnS;
    spec.input_h = 8;
    spec.input_w = 8;
    spec.input_c = 2;
    spec.classes = 3;
    spec.init_seed = 77;
    const Model model = Model::init(spec);
    const Matrix batch = random_matrix(4, 8 * 8 * 2, 0.0, 1.0, 101);
    const auto labels = random_labels(4, 3, 102);
    CHECK(gradient_check(model, batch, labels, 1e-5) <= 1e-6);
}

TEST_CASE("gradient_check: epsilon must be positive") {
    ModelSpec spec;
    spec.input_dim = 2;
    spec.classes = 2;
    const Model model = Model::init(spec);
    const Matrix batch(1, 2, 0.5);
    const std::vector<int> labels{0};
    CHECK_THROWS_AS(gradient_check(model, batch, labels, 0.0), ConfigError);
}

TEST_CASE("backward: linear model gradient is (softmax - onehot)^T x") {
    ModelSpec spec;
    spec.input_dim = 5;
    spec.hidden = {}; // no hidden layer
    spec.classes = 3;
    spec.init_seed = 9;
    const Model model = Model::init(spec);
    const Matrix x = random_matrix(4, 5, -1.0, 1.0, 10);
    const auto labels = random_labels(4, 3, 11);

    Model::Cache cache;
    const Matrix logits = model.forward_cached(x, cache);
    const auto lg = softmax_cross_entropy(logits, labels);
    std::vector<double> grads(model.param_count());
    model.backward(cache, lg.dlogits, grads);

    // closed form: dW[c][k] = sum_i (p - onehot)(i,c)/B * x(i,k); db = colsum
    const Matrix probs = softmax(logits);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < 5; ++k) {
            double expect = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const double delta =
                    (static_cast<int>(c) == labels[i]) ? 1.0 : 0.0;
                expect += (probs(i, c) - delta) / 4.0 * x(i, k);
            }
            CHECK(std::abs(grads[c * 5 + k] - expect) <= 1e-12);
        }
        double expect_b = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const double delta = (static_cast<int>(c) == labels[i]) ? 1.0 : 0.0;
            expect_b += (probs(i, c) - delta) / 4.0;
        }
        CHECK(std::abs(grads[3 * 5 + c] - expect_b) <= 1e-12);
    }
}

TEST_CASE("determinism: identical spec and seed give identical parameters") {
    ModelSpec spec;
    spec.input_dim = 7;
    spec.hidden = {9};
    spec.classes = 4;
    spec.init_seed = 2024;
    Model a = Model::init(spec);
    Model b = Model::init(spec);
    REQUIRE(a.param_count() == b.param_count());
    for (std::size_t i = 0; i < a.param_count(); ++i) {
        CHECK(a.params()[i] == b.params()[i]);
    }

    // same gradient sequence -> bit-identical trajectories
    AdamState sa = AdamState::init(a.param_count(), {});
    AdamState sb = AdamState::init(b.param_count(), {});
    Rng rng(3);
    std::vector<double> grads(a.param_count());
    for (int step = 0; step < 5; ++step) {
        for (auto& g : grads) g = rng.uniform(-1.0, 1.0);
        adam_step(a.params(), grads, sa, 0.5);
        adam_step(b.params(), grads, sb, 0.5);
    }
    for (std::size_t i = 0; i < a.param_count(); ++i) {
        CHECK(a.params()[i] == b.params()[i]);
    }
}

TEST_CASE("ModelSpec: validation rejects degenerate shapes") {
    ModelSpec spec;
    spec.input_dim = 3;
    spec.classes = 1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.classes = 2;
    spec.hidden = {0};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    ModelSpec cnn;
    cnn.kind = ModelKind::CnnS;
    cnn.classes = 2;
    cnn.input_h = 3;
    cnn.input_w = 8;
    cnn.input_c = 1;
    CHECK_THROWS_AS(cnn.validate(), ConfigError);
}
