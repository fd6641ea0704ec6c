#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "fednam/error.hpp"
#include "fednam/mlp.hpp"
#include "fednam/nam.hpp"
#include "fednam/numkit.hpp"
#include "fednam/param_vector.hpp"
#include "fednam/rng.hpp"

using namespace fednam;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal() * scale;
    return m;
}

std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
    std::vector<int> labels(n);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
    return labels;
}

// Straight-line re-evaluation of the MLP recurrence with plain loops;
// kept deliberately independent of the Matrix helpers.
std::vector<double> naive_mlp_forward(const MlpModel& model, std::span<const double> sample) {
    std::vector<double> h(sample.begin(), sample.end());
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const Matrix& w = model.layer_weights(l);
        const auto& b = model.layer_bias(l);
        std::vector<double> next(b.begin(), b.end());
        for (std::size_t j = 0; j < next.size(); ++j) {
            for (std::size_t k = 0; k < h.size(); ++k) {
                next[j] += h[k] * w(k, j);
            }
        }
        if (l + 1 < model.layer_count()) {
            for (double& v : next) v = std::max(v, 0.0);
        }
        h = std::move(next);
    }
    return h;
}

// 100 random coordinates for a gradient spot-check.
std::vector<std::size_t> sample_coords(std::size_t total, std::size_t want, Rng& rng) {
    std::vector<std::size_t> coords;
    coords.reserve(want);
    for (std::size_t i = 0; i < want; ++i) {
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(total)));
    }
    return coords;
}

}  // namespace

TEST_CASE("mlp_forward: all-zero parameters give zero logits and uniform softmax") {
    MlpModel model({4, 8, 3});
    Rng rng(1);
    const Matrix batch = random_matrix(5, 4, rng);
    const Matrix logits = model.logits(batch);
    for (double v : logits.data) CHECK(v == 0.0);
    const Matrix probs = softmax(logits);
    for (double v : probs.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mlp_forward: a single linear layer reduces to affine_forward") {
    Rng rng(2);
    MlpModel model = MlpModel::he_init({6, 4}, rng);
    const Matrix batch = random_matrix(7, 6, rng);
    const Matrix expected =
        affine_forward(batch, model.layer_weights(0), model.layer_bias(0));
    CHECK(model.logits(batch) == expected);
}

TEST_CASE("mlp_forward: seed-0 two-layer net matches the recorded golden logits") {
    Rng rng(0);
    MlpModel model = MlpModel::he_init({3, 5, 2}, rng);
    const Matrix batch = Matrix::from_rows({{0.1, 0.7, 0.4}, {0.9, 0.0, 0.2}});
    const Matrix logits = model.logits(batch);

    // Frozen from the straight-line recurrence below at seed 0.
    const double golden[2][2] = {{0.44372652254472678, 0.12306359162157832},
                                 {-0.12485952563581953, -0.28755732875616818}};
    for (std::size_t i = 0; i < 2; ++i) {
        const std::vector<double> naive = naive_mlp_forward(model, batch.row(i));
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(logits(i, j) == doctest::Approx(naive[j]).epsilon(1e-12));
            CHECK(logits(i, j) == doctest::Approx(golden[i][j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("mlp_backward: zero-parameter net has zero input gradients") {
    MlpModel model({4, 6, 3});
    Rng rng(3);
    const Matrix batch = random_matrix(5, 4, rng);
    const std::vector<int> labels{0, 1, 2, 0, 1};
    const BackwardResult result = model.backward(batch, labels);
    for (double v : result.input_grads.data) CHECK(v == 0.0);
    CHECK(result.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("mlp_backward: parameter gradients pass the central-difference check") {
    Rng rng(4);
    MlpModel model = MlpModel::he_init({5, 8, 6, 3}, rng);
    const Matrix batch = random_matrix(7, 5, rng, 0.5);
    const std::vector<int> labels = random_labels(7, 3, rng);

    const BackwardResult result = model.backward(batch, labels);
    const ParamVector at = model.to_params();

    const auto loss_of_params = [&](std::span<const double> values) {
        MlpModel probe({5, 8, 6, 3});
        ParamVector pv{std::vector<double>(values.begin(), values.end()), probe.layout_hash()};
        probe.from_params(pv);
        return cross_entropy(softmax(probe.logits(batch)), labels);
    };
    const auto coords = sample_coords(at.values.size(), 100, rng);
    const double err = grad_check(loss_of_params, at.values, result.param_grads.values,
                                  1e-5, coords);
    CHECK(err <= 1e-4);
}

TEST_CASE("mlp_backward: input gradients pass the central-difference check") {
    Rng rng(5);
    MlpModel model = MlpModel::he_init({6, 10, 4}, rng);
    const Matrix batch = random_matrix(4, 6, rng, 0.5);
    const std::vector<int> labels = random_labels(4, 4, rng);

    const BackwardResult result = model.backward(batch, labels);

    const auto loss_of_inputs = [&](std::span<const double> values) {
        Matrix probe(batch.rows, batch.cols);
        probe.data.assign(values.begin(), values.end());
        return cross_entropy(softmax(model.logits(probe)), labels);
    };
    const double err = grad_check(loss_of_inputs, batch.data, result.input_grads.data, 1e-5);
    CHECK(err <= 1e-4);
}

TEST_CASE("parameter flatten/unflatten round-trips bit-exactly") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        MlpModel model = MlpModel::he_init({4, 7, 5, 3}, rng);
        const ParamVector params = model.to_params();
        MlpModel copy({4, 7, 5, 3});
        copy.from_params(params);
        CHECK(copy.to_params().values == params.values);

        NamModel nam = NamModel::he_init(5, 3, {8}, rng);
        const ParamVector nam_params = nam.to_params();
        NamModel nam_copy(5, 3, {8});
        nam_copy.from_params(nam_params);
        CHECK(nam_copy.to_params().values == nam_params.values);
    }
}

TEST_CASE("checkpoint files round-trip bit-exactly and validate the layout") {
    Rng rng(7);
    MlpModel model = MlpModel::he_init({4, 5, 2}, rng);
    const ParamVector params = model.to_params();
    const std::string path = "mlp_roundtrip.fnpv";
    save_params(params, path);
    const ParamVector loaded = load_params(path);
    CHECK(loaded.layout_hash == params.layout_hash);
    CHECK(loaded.values == params.values);
    std::remove(path.c_str());

    MlpModel other({4, 5, 3});
    CHECK_THROWS_AS(other.from_params(loaded), DataError);
}

TEST_CASE("nam_forward: zeroed subnets leave only the bias") {
    NamModel model(4, 3, {6});
    auto bias = model.mutable_bias();
    bias[0] = 0.3;
    bias[1] = -1.0;
    bias[2] = 0.25;
    Rng rng(8);
    const Matrix batch = random_matrix(5, 4, rng);
    const Matrix logits = model.logits(batch);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        CHECK(logits(i, 0) == 0.3);
        CHECK(logits(i, 1) == -1.0);
        CHECK(logits(i, 2) == 0.25);
    }
}

TEST_CASE("nam_forward: with one feature the model is its subnet plus bias") {
    Rng rng(9);
    NamModel model = NamModel::he_init(1, 3, {5}, rng);
    auto bias = model.mutable_bias();
    bias[0] = 0.1;
    bias[1] = 0.2;
    bias[2] = -0.3;
    const Matrix batch = random_matrix(6, 1, rng);
    const Matrix logits = model.logits(batch);
    const Matrix sub = model.subnet(0).logits(batch);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(logits(i, k) == doctest::Approx(sub(i, k) + bias[k]).epsilon(1e-15));
        }
    }
}

TEST_CASE("nam additivity: forward equals bias plus the brute-force subnet sum") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        NamModel model = NamModel::he_init(6, 4, {7, 5}, rng);
        const Matrix batch = random_matrix(3, 6, rng);
        const Matrix logits = model.logits(batch);
        for (std::size_t i = 0; i < batch.rows; ++i) {
            for (std::size_t k = 0; k < 4; ++k) {
                double expected = model.bias()[k];
                for (std::size_t j = 0; j < 6; ++j) {
                    Matrix column(1, 1);
                    column(0, 0) = batch(i, j);
                    expected += model.subnet(j).logits(column)(0, k);
                }
                CHECK(std::abs(logits(i, k) - expected) <= 1e-9);
            }
        }
    }
}

TEST_CASE("nam_backward: subnet parameter gradients pass the central-difference check") {
    Rng rng(11);
    NamModel model = NamModel::he_init(4, 3, {6}, rng);
    const Matrix batch = random_matrix(5, 4, rng, 0.5);
    const std::vector<int> labels = random_labels(5, 3, rng);

    const BackwardResult result = model.backward(batch, labels);
    const ParamVector at = model.to_params();

    const auto loss_of_params = [&](std::span<const double> values) {
        NamModel probe(4, 3, {6});
        ParamVector pv{std::vector<double>(values.begin(), values.end()), probe.layout_hash()};
        probe.from_params(pv);
        return cross_entropy(softmax(probe.logits(batch)), labels);
    };
    const auto coords = sample_coords(at.values.size(), 100, rng);
    const double err = grad_check(loss_of_params, at.values, result.param_grads.values,
                                  1e-5, coords);
    CHECK(err <= 1e-4);
}

TEST_CASE("nam_backward: input gradient column j comes only from subnet j") {
    Rng rng(12);
    NamModel model = NamModel::he_init(5, 3, {6}, rng);
    const Matrix batch = random_matrix(4, 5, rng);
    const std::vector<int> labels = random_labels(4, 3, rng);

    // Zero subnet 2 and its input-gradient column must vanish while the
    // other columns change only through the softmax coupling.
    NamModel zeroed = model;
    ParamVector sub_params = zeroed.mutable_subnet(2).to_params();
    std::fill(sub_params.values.begin(), sub_params.values.end(), 0.0);
    zeroed.mutable_subnet(2).from_params(sub_params);

    const Matrix grads = zeroed.backward(batch, labels).input_grads;
    for (std::size_t i = 0; i < grads.rows; ++i) {
        CHECK(grads(i, 2) == 0.0);
    }
}

TEST_CASE("nam_backward: all-zero subnets give zero input gradients") {
    NamModel model(4, 3, {6});
    Rng rng(13);
    const Matrix batch = random_matrix(5, 4, rng);
    const std::vector<int> labels = random_labels(5, 3, rng);
    const Matrix grads = model.backward(batch, labels).input_grads;
    for (double v : grads.data) CHECK(v == 0.0);
}

TEST_CASE("nam_contributions: value mode reconstructs the predicted-class logit") {
    Rng rng(14);
    NamModel model = NamModel::he_init(6, 4, {6}, rng);
    const Matrix batch = random_matrix(5, 6, rng);
    const Matrix contrib = model.contributions(batch, ContributionMode::value);
    const Matrix logits = model.logits(batch);
    const std::vector<int> preds = argmax_rows(logits);
    for (std::size_t i = 0; i < batch.rows; ++i) {
        double sum = model.bias()[static_cast<std::size_t>(preds[i])];
        for (std::size_t j = 0; j < 6; ++j) sum += contrib(i, j);
        CHECK(std::abs(sum - logits(i, static_cast<std::size_t>(preds[i]))) <= 1e-9);
    }
}

TEST_CASE("nam_contributions: value mode of a zeroed subnet is a zero column") {
    Rng rng(15);
    NamModel model = NamModel::he_init(4, 3, {5}, rng);
    ParamVector sub = model.mutable_subnet(1).to_params();
    std::fill(sub.values.begin(), sub.values.end(), 0.0);
    model.mutable_subnet(1).from_params(sub);
    const Matrix batch = random_matrix(6, 4, rng);
    const Matrix contrib = model.contributions(batch, ContributionMode::value);
    for (std::size_t i = 0; i < contrib.rows; ++i) CHECK(contrib(i, 1) == 0.0);
}

TEST_CASE("nam_contributions: gradient mode matches the central-difference check") {
    Rng rng(16);
    NamModel model = NamModel::he_init(5, 3, {6}, rng);
    const Matrix batch = random_matrix(3, 5, rng);
    const Matrix contrib = model.contributions(batch, ContributionMode::gradient);
    const std::vector<int> preds = predict_labels(model, batch);

    for (std::size_t i = 0; i < batch.rows; ++i) {
        const std::size_t pred = static_cast<std::size_t>(preds[i]);
        const auto logit_of_inputs = [&](std::span<const double> values) {
            Matrix probe(1, batch.cols);
            probe.data.assign(values.begin(), values.end());
            return model.logits(probe)(0, pred);
        };
        const std::vector<double> x(batch.row(i).begin(), batch.row(i).end());
        const std::vector<double> analytic(contrib.row(i).begin(), contrib.row(i).end());
        const double err = grad_check(logit_of_inputs, x, analytic, 1e-5);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("mc_dropout: rate 0 is the deterministic model with zero spread") {
    Rng init_rng(17);
    MlpModel model = MlpModel::he_init({4, 8, 3}, init_rng);
    const Matrix batch = random_matrix(5, 4, init_rng);
    Rng rng(99);
    const McDropoutResult result = mc_dropout_predict(model, batch, 6, 0.0, rng);
    const Matrix expected = softmax(model.logits(batch));
    for (std::size_t i = 0; i < expected.data.size(); ++i) {
        CHECK(result.mean_probs.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-15));
        CHECK(result.std_probs.data[i] == 0.0);
    }
}

TEST_CASE("mc_dropout: a single pass has zero standard deviation") {
    Rng init_rng(18);
    MlpModel model = MlpModel::he_init({4, 8, 3}, init_rng);
    const Matrix batch = random_matrix(3, 4, init_rng);
    Rng rng(5);
    const McDropoutResult result = mc_dropout_predict(model, batch, 1, 0.5, rng);
    for (double v : result.std_probs.data) CHECK(v == 0.0);
}

TEST_CASE("mc_dropout: fixed seed matches the explicit pass enumeration") {
    Rng init_rng(19);
    MlpModel model = MlpModel::he_init({4, 6, 5, 3}, init_rng);
    const Matrix batch = random_matrix(4, 4, init_rng);
    const int passes = 8;
    const double rate = 0.5;

    Rng rng(123);
    const McDropoutResult result = mc_dropout_predict(model, batch, passes, rate, rng);

    // Materialize the same 8 masked passes by re-drawing the masks from
    // an equally seeded generator, then take moments the slow way.
    Rng oracle_rng(123);
    std::vector<Matrix> pass_probs;
    for (int m = 0; m < passes; ++m) {
        std::vector<Matrix> masks;
        masks.push_back(dropout_mask(batch.rows, 6, rate, oracle_rng));
        masks.push_back(dropout_mask(batch.rows, 5, rate, oracle_rng));
        pass_probs.push_back(softmax(model.logits_masked(batch, masks)));
    }
    for (std::size_t i = 0; i < pass_probs.front().data.size(); ++i) {
        double mean = 0.0;
        for (const Matrix& p : pass_probs) mean += p.data[i];
        mean /= passes;
        double var = 0.0;
        for (const Matrix& p : pass_probs) var += (p.data[i] - mean) * (p.data[i] - mean);
        var /= passes;
        CHECK(result.mean_probs.data[i] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(result.std_probs.data[i] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }
}

TEST_CASE("mc_dropout: rate >= 1 is a config error") {
    MlpModel model({4, 6, 3});
    Matrix batch(2, 4);
    Rng rng(1);
    CHECK_THROWS_AS((void)mc_dropout_predict(model, batch, 4, 1.0, rng), ConfigError);
    CHECK_THROWS_AS((void)mc_dropout_predict(model, batch, 0, 0.5, rng), ConfigError);
}

TEST_CASE("one SGD step decreases a full-batch convex logistic loss for small lr") {
    Rng rng(20);
    for (int trial = 0; trial < 5; ++trial) {
        // No hidden layers: softmax regression, a convex problem.
        MlpModel model = MlpModel::he_init({6, 3}, rng);
        const Matrix batch = random_matrix(40, 6, rng);
        const std::vector<int> labels = random_labels(40, 3, rng);
        const BackwardResult before = model.backward(batch, labels);
        model.apply_gradient_step(before.param_grads, 0.01);
        const double after = cross_entropy(softmax(model.logits(batch)), labels);
        CHECK(after < before.loss);
    }
}

TEST_CASE("nam training decreases the epoch loss on a separable toy") {
    Rng data_rng(21);
    const std::size_t n = 60;
    Matrix features(n, 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        labels[i] = y;
        features(i, 0) = (y == 0 ? 0.25 : 0.75) + 0.05 * data_rng.normal();
        features(i, 1) = data_rng.uniform();
    }
    Rng rng(22);
    NamModel model = NamModel::he_init(2, 2, {8}, rng);
    const std::vector<double> trace = train_nam(model, features, labels, 5, 0.1, 16, rng);
    CHECK(trace.size() == 5);
    CHECK(trace.back() < trace.front());
}

TEST_CASE("nam backward is identical across thread counts") {
    Rng rng(23);
    NamModel model = NamModel::he_init(8, 3, {6}, rng);
    const Matrix batch = random_matrix(5, 8, rng);
    const std::vector<int> labels = random_labels(5, 3, rng);
    const BackwardResult serial = model.backward(batch, labels, 1);
    const BackwardResult parallel = model.backward(batch, labels, 4);
    CHECK(serial.param_grads.values == parallel.param_grads.values);
    CHECK(serial.input_grads == parallel.input_grads);
}
