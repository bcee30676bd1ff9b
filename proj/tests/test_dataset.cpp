#include "anne/dataset.hpp"

#include "helpers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

using namespace anne;
using testing::make_dataset;
using testing::TempDir;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

Dataset sample_dataset(bool with_truth) {
    auto ds = make_dataset({{1.0, 2.0}, {-0.5, 0.25}, {3.0, -4.0}, {1e-3, 7.5}}, {0, 1, 1, 0}, 2);
    if (with_truth) ds.true_labels = std::vector<Label>{0, 1, 0, 0};
    ds.sample_ids = {10, 11, 12, 99};
    return ds;
}

}  // namespace

TEST_SUITE("dataset") {
    TEST_CASE("save then load returns the same dataset") {
        TempDir dir("roundtrip");
        const auto ds = sample_dataset(true);
        save_dataset(ds, dir / "a.anne1");
        const auto back = load_dataset(dir / "a.anne1");
        CHECK(back.size() == 4);
        CHECK(back.dim == 2);
        CHECK(back.class_count == 2);
        CHECK(back == ds);
    }

    TEST_CASE("datasets without true labels round-trip without them") {
        TempDir dir("notruth");
        const auto ds = sample_dataset(false);
        save_dataset(ds, dir / "a.anne1");
        const auto back = load_dataset(dir / "a.anne1");
        CHECK_FALSE(back.true_labels.has_value());
        CHECK(back == ds);
        // The label section for true labels is absent: payload is N*d*4 + N*4 + N*8 bytes.
        const auto bytes = read_bytes(dir / "a.anne1");
        const auto payload = bytes.size() - bytes.find('\n') - 1;
        CHECK(payload == 4 * 2 * 4 + 4 * 4 + 4 * 8);
    }

    TEST_CASE("features round-trip bit-exactly, including denormals and signed zero") {
        TempDir dir("bits");
        auto ds = sample_dataset(true);
        ds.features[0] = std::numeric_limits<float>::denorm_min();
        ds.features[1] = -0.0f;
        ds.features[2] = std::nextafter(1.0f, 2.0f);
        save_dataset(ds, dir / "a.anne1");
        const auto back = load_dataset(dir / "a.anne1");
        CHECK(std::memcmp(back.features.data(), ds.features.data(), ds.features.size() * sizeof(float)) == 0);
    }

    TEST_CASE("a truncated payload is a size mismatch") {
        TempDir dir("trunc");
        save_dataset(sample_dataset(true), dir / "a.anne1");
        auto bytes = read_bytes(dir / "a.anne1");
        bytes.pop_back();
        write_bytes(dir / "b.anne1", bytes);
        CHECK_ANNE_ERROR(load_dataset(dir / "b.anne1"), ErrorKind::SizeMismatch);
        write_bytes(dir / "c.anne1", read_bytes(dir / "a.anne1") + "x");
        CHECK_ANNE_ERROR(load_dataset(dir / "c.anne1"), ErrorKind::SizeMismatch);
    }

    TEST_CASE("a NaN feature is reported with its row") {
        TempDir dir("nan");
        save_dataset(sample_dataset(true), dir / "a.anne1");
        auto bytes = read_bytes(dir / "a.anne1");
        const auto offset = bytes.find('\n') + 1;
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(bytes.data() + offset + (2 * 2 + 1) * sizeof(float), &nan, sizeof nan);  // row 2, column 1
        write_bytes(dir / "b.anne1", bytes);
        try {
            (void)load_dataset(dir / "b.anne1");
            FAIL("expected NonFiniteFeature");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NonFiniteFeature);
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }

    TEST_CASE("malformed headers are rejected") {
        TempDir dir("header");
        write_bytes(dir / "nojson.anne1", "not json\n");
        CHECK_ANNE_ERROR(load_dataset(dir / "nojson.anne1"), ErrorKind::MalformedHeader);
        write_bytes(dir / "magic.anne1", R"({"magic":"ANNE2","n":0,"d":1,"c":2,"has_true_labels":false})" "\n");
        CHECK_ANNE_ERROR(load_dataset(dir / "magic.anne1"), ErrorKind::MalformedHeader);
        write_bytes(dir / "missing.anne1", R"({"magic":"ANNE1","n":0,"c":2,"has_true_labels":false})" "\n");
        CHECK_ANNE_ERROR(load_dataset(dir / "missing.anne1"), ErrorKind::MalformedHeader);
        write_bytes(dir / "noterm.anne1", R"({"magic":"ANNE1")");
        CHECK_ANNE_ERROR(load_dataset(dir / "noterm.anne1"), ErrorKind::MalformedHeader);
    }

    TEST_CASE("labels outside the class range are rejected on load") {
        TempDir dir("labels");
        auto ds = sample_dataset(false);
        save_dataset(ds, dir / "a.anne1");
        auto bytes = read_bytes(dir / "a.anne1");
        const auto offset = bytes.find('\n') + 1 + 4 * 2 * 4;
        const std::int32_t bad = 7;
        std::memcpy(bytes.data() + offset, &bad, sizeof bad);
        write_bytes(dir / "b.anne1", bytes);
        CHECK_THROWS_AS(load_dataset(dir / "b.anne1"), Error);
    }

    TEST_CASE("saving to a directory path is an IO failure") {
        TempDir dir("dirtarget");
        CHECK_ANNE_ERROR(save_dataset(sample_dataset(true), dir.path()), ErrorKind::IoFailure);
        CHECK_ANNE_ERROR(load_dataset(dir / "does-not-exist.anne1"), ErrorKind::IoFailure);
    }

    TEST_CASE("normalize_features scales rows to unit length") {
        const auto ds = make_dataset({{3.0, 4.0}, {0.0, -2.0}}, {0, 1}, 2);
        const auto n = normalize_features(ds);
        CHECK(n.features[0] == doctest::Approx(0.6).epsilon(1e-7));
        CHECK(n.features[1] == doctest::Approx(0.8).epsilon(1e-7));
        CHECK(n.features[3] == doctest::Approx(-1.0));
        CHECK(n.noisy_labels == ds.noisy_labels);
    }

    TEST_CASE("normalize_features is idempotent and preserves cosine similarity") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g(0.0, 3.0);
        std::vector<std::vector<double>> rows(50, std::vector<double>(7));
        for (auto& r : rows)
            for (double& v : r) v = g(rng);
        const auto ds = make_dataset(rows, std::vector<Label>(50, 0), 2);
        const auto once = normalize_features(ds);
        const auto twice = normalize_features(once);
        const auto a = ds.feature_matrix(), b = once.feature_matrix(), c = twice.feature_matrix();
        CHECK((b - c).cwiseAbs().maxCoeff() < 1e-6);
        for (Eigen::Index i = 0; i < 50; ++i) {
            CHECK(std::abs(b.row(i).norm() - 1.0) < 1e-6);
            for (Eigen::Index j = 0; j < 50; j += 7) {
                const double before = a.row(i).dot(a.row(j)) / (a.row(i).norm() * a.row(j).norm());
                CHECK(b.row(i).dot(b.row(j)) == doctest::Approx(before).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("a zero row cannot be normalized") {
        const auto ds = make_dataset({{1.0, 0.0}, {0.0, 0.0}}, {0, 1}, 2);
        CHECK_ANNE_ERROR(normalize_features(ds), ErrorKind::ZeroVector);
    }

    TEST_CASE("predictions round-trip and validate the simplex") {
        TempDir dir("preds");
        Predictions p;
        p.probs.resize(2, 3);
        p.probs << 0.2, 0.3, 0.5, 1.0, 0.0, 0.0;
        p.epoch = 7;
        save_predictions(p, dir / "p.anne1p");
        const auto back = load_predictions(dir / "p.anne1p");
        CHECK(back.epoch == 7);
        CHECK(back.probs == p.probs);

        Predictions bad = p;
        bad.probs(0, 0) = 0.5;
        CHECK_THROWS_AS(bad.validate(), Error);
    }

    TEST_CASE("subset keeps ids and labels of the chosen rows") {
        const auto ds = sample_dataset(true);
        const std::vector<Index> rows{3, 1};
        const auto s = subset(ds, rows);
        CHECK(s.size() == 2);
        CHECK(s.sample_ids == std::vector<std::uint64_t>{99, 11});
        CHECK(s.noisy_labels == std::vector<Label>{0, 1});
        CHECK(*s.true_labels == std::vector<Label>{0, 1});
    }
}
