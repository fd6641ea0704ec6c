#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fednam/error.hpp"
#include "fednam/idx.hpp"
#include "fednam/interpret.hpp"
#include "fednam/mlp.hpp"
#include "fednam/nam.hpp"
#include "fednam/numkit.hpp"
#include "fednam/pnm.hpp"
#include "fednam/rng.hpp"

using namespace fednam;

namespace {

struct OverlayCleanup {
    std::string base;
    explicit OverlayCleanup(std::string b) : base(std::move(b)) {}
    ~OverlayCleanup() {
        std::remove((base + ".pgm").c_str());
        std::remove((base + ".ppm").c_str());
        std::remove((base + ".mask.csv").c_str());
    }
};

}  // namespace

TEST_CASE("top_fraction_mask: worked ranking [5,1,3,2] at one half") {
    const std::vector<double> c{5.0, 1.0, 3.0, 2.0};
    const PixelMask mask = top_fraction_mask(c, 0.5);
    CHECK(mask.indices() == std::vector<std::size_t>{0, 2});
    CHECK(mask.popcount() == 2);
}

TEST_CASE("top_fraction_mask: fraction one selects everything") {
    const std::vector<double> c{0.1, -0.5, 0.0};
    const PixelMask mask = top_fraction_mask(c, 1.0);
    CHECK(mask.popcount() == 3);
}

TEST_CASE("top_fraction_mask: ties resolve to ascending indices") {
    const std::vector<double> c(10, 4.2);
    const PixelMask mask = top_fraction_mask(c, 0.3);
    CHECK(mask.indices() == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("top_fraction_mask: popcount is always ceil(fraction * d)") {
    Rng rng(3);
    for (const std::size_t d : {1, 2, 7, 28, 784}) {
        std::vector<double> c(d);
        for (double& v : c) v = rng.normal();
        for (const double fraction : {0.01, 0.3, 0.5, 0.999, 1.0}) {
            const PixelMask mask = top_fraction_mask(c, fraction);
            const std::size_t expected = static_cast<std::size_t>(
                std::ceil(fraction * static_cast<double>(d)));
            CHECK(mask.popcount() == expected);
        }
    }
}

TEST_CASE("top_fraction_mask: invariant under positive rescaling") {
    Rng rng(5);
    std::vector<double> c(40);
    for (double& v : c) v = rng.normal();
    const PixelMask base = top_fraction_mask(c, 0.25);
    for (const double scale : {0.001, 2.5, 1e6}) {
        std::vector<double> scaled = c;
        for (double& v : scaled) v *= scale;
        CHECK(top_fraction_mask(scaled, 0.25).selected == base.selected);
    }
}

TEST_CASE("top_fraction_mask: signed ranking ignores magnitudes of negatives") {
    const std::vector<double> c{-5.0, 1.0, 3.0, 2.0};
    CHECK(top_fraction_mask(c, 0.5).indices() == std::vector<std::size_t>{0, 2});
    CHECK(top_fraction_mask(c, 0.5, true).indices() == std::vector<std::size_t>{2, 3});
}

TEST_CASE("top_fraction_mask: empty input and bad fractions are rejected") {
    CHECK_THROWS_AS((void)top_fraction_mask(std::vector<double>{}, 0.5), DataError);
    const std::vector<double> c{1.0};
    CHECK_THROWS_AS((void)top_fraction_mask(c, 0.0), ConfigError);
    CHECK_THROWS_AS((void)top_fraction_mask(c, 1.5), ConfigError);
}

TEST_CASE("sensitivity_map: zero-parameter backbone maps to all zeros") {
    const MlpModel model({4, 6, 3});
    const std::vector<double> sample{0.2, 0.4, 0.6, 0.8};
    const ContributionMap map = sensitivity_map(model, sample, 1);
    CHECK(map.source == ContributionSource::backbone_gradient);
    REQUIRE(map.scores.size() == 4);
    for (const double s : map.scores) CHECK(s == 0.0);
}

TEST_CASE("sensitivity_map: matches central-difference gradient magnitudes") {
    Rng rng(7);
    const MlpModel model = MlpModel::he_init({3, 8, 2}, rng);
    std::vector<double> sample{0.3, 0.7, 0.1};
    const int label = 1;
    const ContributionMap map = sensitivity_map(model, sample, label);

    const double h = 1e-5;
    for (std::size_t j = 0; j < sample.size(); ++j) {
        const double keep = sample[j];
        Matrix probe(1, sample.size());
        sample[j] = keep + h;
        probe.data.assign(sample.begin(), sample.end());
        const double up = cross_entropy(softmax(model.logits(probe)), std::vector<int>{label});
        sample[j] = keep - h;
        probe.data.assign(sample.begin(), sample.end());
        const double down = cross_entropy(softmax(model.logits(probe)), std::vector<int>{label});
        sample[j] = keep;
        const double numeric = std::abs((up - down) / (2.0 * h));
        CHECK(map.scores[j] ==
              doctest::Approx(numeric).epsilon(1e-4).scale(numeric + 1e-8));
    }
}

TEST_CASE("sensitivity_map: non-finite gradients raise a divergence error") {
    MlpModel model({2, 2});
    model.mutable_layer_weights(0)(0, 0) = std::numeric_limits<double>::infinity();
    const std::vector<double> sample{0.5, 0.5};
    CHECK_THROWS_AS((void)sensitivity_map(model, sample, 0), DivergenceError);
}

TEST_CASE("nam map: feature j's gradient score only depends on subnet j") {
    Rng rng(11);
    NamModel model = NamModel::he_init(5, 3, {6}, rng);
    const std::vector<double> sample{0.1, 0.3, 0.5, 0.7, 0.9};

    Matrix batch(1, 5);
    batch.data.assign(sample.begin(), sample.end());
    const int pred_before = predict_labels(model, batch)[0];
    const ContributionMap before = nam_contribution_map(model, sample,
                                                        ContributionMode::gradient);

    // Nudge subnet 2 slightly — small enough to keep the argmax class.
    model.mutable_subnet(2).mutable_layer_weights(0)(0, 0) += 1e-3;
    REQUIRE(predict_labels(model, batch)[0] == pred_before);
    const ContributionMap after = nam_contribution_map(model, sample,
                                                       ContributionMode::gradient);

    for (std::size_t j = 0; j < 5; ++j) {
        if (j == 2) continue;
        CHECK(after.scores[j] == before.scores[j]);  // bit-identical
    }
    CHECK(after.scores[2] != before.scores[2]);
}

TEST_CASE("nam map: value mode plus bias reconstructs the predicted logit") {
    Rng rng(13);
    const NamModel model = NamModel::he_init(4, 3, {5}, rng);
    const std::vector<double> sample{0.2, 0.4, 0.6, 0.8};
    const ContributionMap map = nam_contribution_map(model, sample, ContributionMode::value);
    CHECK(map.source == ContributionSource::nam_value);

    Matrix batch(1, 4);
    batch.data.assign(sample.begin(), sample.end());
    const Matrix logits = model.logits(batch);
    const int pred = predict_labels(model, batch)[0];
    double sum = model.bias()[static_cast<std::size_t>(pred)];
    for (const double s : map.scores) sum += s;
    CHECK(std::abs(sum - logits(0, static_cast<std::size_t>(pred))) <= 1e-9);
}

TEST_CASE("pgm: write-then-read reproduces quantized pixels exactly") {
    Rng rng(17);
    std::vector<double> image(6 * 4);
    // Start from the byte grid so quantization is the identity.
    for (double& v : image) {
        v = static_cast<double>(rng.uniform_int(256)) / 255.0;
    }
    write_pgm("roundtrip-test.pgm", image, 6, 4);
    const PgmImage back = read_pgm("roundtrip-test.pgm");
    std::remove("roundtrip-test.pgm");
    CHECK(back.height == 6);
    CHECK(back.width == 4);
    CHECK(back.pixels == image);
}

TEST_CASE("export_overlay: an empty mask leaves the overlay identical to the image") {
    const std::vector<double> image{0.0, 0.25, 0.5, 1.0};
    PixelMask mask;
    mask.selected.assign(4, false);
    const OverlayCleanup cleanup("overlay-empty");
    export_overlay(image, 2, 2, mask, "overlay-empty");

    const PgmImage original = read_pgm("overlay-empty.pgm");
    const PpmOverlay overlay = read_ppm("overlay-empty.ppm");
    CHECK(overlay.gray == original.pixels);
    for (const bool f : overlay.flagged) CHECK_FALSE(f);
}

TEST_CASE("export_overlay: a full mask flags every pixel") {
    const std::vector<double> image{0.1, 0.9, 0.4, 0.6};
    const PixelMask mask = top_fraction_mask(image, 1.0);
    const OverlayCleanup cleanup("overlay-full");
    export_overlay(image, 2, 2, mask, "overlay-full");
    const PpmOverlay overlay = read_ppm("overlay-full.ppm");
    for (const bool f : overlay.flagged) CHECK(f);
}

TEST_CASE("export_overlay: a digit's mask round-trips through the pixmap") {
    const Dataset train = read_idx(std::string(FEDNAM_DATA_DIR) + "/train-images-idx3-ubyte",
                                   std::string(FEDNAM_DATA_DIR) + "/train-labels-idx1-ubyte");
    const auto sample = train.features.row(0);
    const PixelMask mask = top_fraction_mask(sample, 0.3);
    CHECK(mask.popcount() == 236);  // ceil(0.3 * 784)

    const OverlayCleanup cleanup("overlay-digit");
    export_overlay(sample, 28, 28, mask, "overlay-digit");
    const PpmOverlay overlay = read_ppm("overlay-digit.ppm");
    REQUIRE(overlay.flagged.size() == 784);
    for (std::size_t j = 0; j < 784; ++j) {
        CHECK(overlay.flagged[j] == mask.selected[j]);
    }

    // The sidecar lists exactly the selected indices.
    std::ifstream csv("overlay-digit.mask.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "index");
    std::vector<std::size_t> listed;
    while (std::getline(csv, line)) {
        if (!line.empty()) listed.push_back(std::stoul(line));
    }
    CHECK(listed == mask.indices());
}

TEST_CASE("export_overlay: unwritable paths raise an I/O error naming the path") {
    const std::vector<double> image{0.5};
    PixelMask mask;
    mask.selected.assign(1, true);
    CHECK_THROWS_WITH_AS(export_overlay(image, 1, 1, mask, "no-such-dir/overlay"),
                         doctest::Contains("no-such-dir/overlay.pgm"), IoError);
}

TEST_CASE("export_overlay: mask and image sizes must agree") {
    const std::vector<double> image{0.5, 0.5};
    PixelMask mask;
    mask.selected.assign(3, false);
    CHECK_THROWS_AS(export_overlay(image, 1, 2, mask, "overlay-bad"), DimensionError);
}
