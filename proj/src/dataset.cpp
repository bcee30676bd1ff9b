#include "anne/dataset.hpp"

#include "anne/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace anne {

static_assert(std::endian::native == std::endian::little, "ANNE1 payloads are little-endian; big-endian hosts unsupported");

namespace {

constexpr const char* kDatasetMagic = "ANNE1";
constexpr const char* kPredictionsMagic = "ANNE1P";

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoFailure, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::IoFailure, "read error on " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) fail(ErrorKind::IoFailure, path.string() + " is a directory");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorKind::IoFailure, "write error on " + path.string());
}

template <class T>
void append_pod(std::string& out, std::span<const T> values) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    out.append(p, values.size_bytes());
}

template <class T>
std::vector<T> take_pod(const std::string& bytes, std::size_t& offset, std::size_t count) {
    std::vector<T> values(count);
    std::memcpy(values.data(), bytes.data() + offset, count * sizeof(T));
    offset += count * sizeof(T);
    return values;
}

/// Splits "<json>\n<payload>" and parses the header.
json split_header(const std::string& bytes, std::size_t& payload_offset, const char* magic) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) fail(ErrorKind::MalformedHeader, "no header terminator");
    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedHeader, std::string("header is not JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("magic") || header["magic"] != magic) {
        fail(ErrorKind::MalformedHeader, std::string("magic: expected ") + magic);
    }
    payload_offset = nl + 1;
    return header;
}

template <class T>
T header_field(const json& header, const char* name) {
    if (!header.contains(name)) fail(ErrorKind::MalformedHeader, std::string("missing field ") + name);
    try {
        return header.at(name).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::MalformedHeader, std::string("bad type for field ") + name);
    }
}

}  // namespace

RowMatrix Dataset::feature_matrix() const {
    RowMatrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim));
    for (Index i = 0; i < size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) m(i, k) = features[i * dim + k];
    return m;
}

RowMatrix Dataset::feature_matrix(std::span<const Index> rows) const {
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t k = 0; k < dim; ++k) m(r, k) = features[rows[r] * dim + k];
    return m;
}

void Dataset::validate() const {
    require(class_count >= 2, ErrorKind::InvalidArgument, "class_count must be >= 2");
    require(dim >= 1, ErrorKind::InvalidArgument, "dim must be >= 1");
    const auto n = size();
    require(features.size() == n * dim, ErrorKind::SizeMismatch,
            "features: expected " + std::to_string(n * dim) + " values, got " + std::to_string(features.size()));
    require(sample_ids.size() == n, ErrorKind::SizeMismatch, "sample_ids length differs from labels");
    for (Index i = 0; i < n; ++i) {
        for (float v : row(i))
            if (!std::isfinite(v)) fail(ErrorKind::NonFiniteFeature, "row " + std::to_string(i));
        require(noisy_labels[i] >= 0 && noisy_labels[i] < class_count, ErrorKind::InvalidArgument,
                "noisy_labels: row " + std::to_string(i) + " out of range");
    }
    if (true_labels) {
        require(true_labels->size() == n, ErrorKind::SizeMismatch, "true_labels length differs from noisy_labels");
        for (Index i = 0; i < n; ++i)
            require((*true_labels)[i] >= 0 && (*true_labels)[i] <= class_count, ErrorKind::InvalidArgument,
                    "true_labels: row " + std::to_string(i) + " out of range");
    }
}

void Predictions::validate() const {
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            const double p = probs(i, c);
            require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::InvalidArgument,
                    "predictions: row " + std::to_string(i) + " has an entry outside [0,1]");
            sum += p;
        }
        require(std::abs(sum - 1.0) <= 1e-5, ErrorKind::InvalidArgument,
                "predictions: row " + std::to_string(i) + " does not sum to 1");
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json header = split_header(bytes, offset, kDatasetMagic);

    Dataset ds;
    const auto n = header_field<std::uint64_t>(header, "n");
    ds.dim = header_field<std::uint64_t>(header, "d");
    ds.class_count = header_field<int>(header, "c");
    const bool has_true = header_field<bool>(header, "has_true_labels");
    if (ds.class_count < 2) fail(ErrorKind::MalformedHeader, "c must be >= 2");
    if (ds.dim < 1) fail(ErrorKind::MalformedHeader, "d must be >= 1");

    const std::size_t expected = n * ds.dim * sizeof(float) + n * sizeof(Label) * (has_true ? 2 : 1) +
                                 n * sizeof(std::uint64_t);
    if (bytes.size() - offset != expected) {
        fail(ErrorKind::SizeMismatch, "payload is " + std::to_string(bytes.size() - offset) + " bytes, header implies " +
                                          std::to_string(expected));
    }
    ds.features = take_pod<float>(bytes, offset, n * ds.dim);
    ds.noisy_labels = take_pod<Label>(bytes, offset, n);
    if (has_true) ds.true_labels = take_pod<Label>(bytes, offset, n);
    ds.sample_ids = take_pod<std::uint64_t>(bytes, offset, n);
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    const json header = {{"magic", kDatasetMagic},
                         {"n", dataset.size()},
                         {"d", dataset.dim},
                         {"c", dataset.class_count},
                         {"has_true_labels", dataset.has_true_labels()}};
    std::string bytes = header.dump();
    bytes.push_back('\n');
    append_pod<float>(bytes, dataset.features);
    append_pod<Label>(bytes, dataset.noisy_labels);
    if (dataset.true_labels) append_pod<Label>(bytes, *dataset.true_labels);
    append_pod<std::uint64_t>(bytes, dataset.sample_ids);
    write_file(path, bytes);
}

Predictions load_predictions(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t offset = 0;
    const json header = split_header(bytes, offset, kPredictionsMagic);
    const auto n = header_field<std::uint64_t>(header, "n");
    const auto c = header_field<std::uint64_t>(header, "c");
    Predictions preds;
    preds.epoch = header_field<int>(header, "epoch");
    if (bytes.size() - offset != n * c * sizeof(double)) fail(ErrorKind::SizeMismatch, "prediction payload size");
    const auto values = take_pod<double>(bytes, offset, n * c);
    preds.probs = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
    preds.validate();
    return preds;
}

void save_predictions(const Predictions& preds, const std::filesystem::path& path) {
    const json header = {{"magic", kPredictionsMagic}, {"n", preds.size()}, {"c", preds.class_count()}, {"epoch", preds.epoch}};
    std::string bytes = header.dump();
    bytes.push_back('\n');
    append_pod<double>(bytes, std::span<const double>(preds.probs.data(), static_cast<std::size_t>(preds.probs.size())));
    write_file(path, bytes);
}

Dataset normalize_features(const Dataset& dataset) {
    Dataset out = dataset;
    for (Index i = 0; i < out.size(); ++i) {
        auto r = out.row(i);
        double sq = 0.0;
        for (float v : r) sq += static_cast<double>(v) * v;
        if (sq == 0.0) fail(ErrorKind::ZeroVector, "row " + std::to_string(i));
        const double inv = 1.0 / std::sqrt(sq);
        for (float& v : r) v = static_cast<float>(v * inv);
    }
    return out;
}

Dataset subset(const Dataset& dataset, std::span<const Index> rows) {
    Dataset out;
    out.dim = dataset.dim;
    out.class_count = dataset.class_count;
    out.features.reserve(rows.size() * dataset.dim);
    if (dataset.true_labels) out.true_labels.emplace();
    for (Index i : rows) {
        require(i < dataset.size(), ErrorKind::InvalidArgument, "subset index out of range");
        auto r = dataset.row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.noisy_labels.push_back(dataset.noisy_labels[i]);
        if (dataset.true_labels) out.true_labels->push_back((*dataset.true_labels)[i]);
        out.sample_ids.push_back(dataset.sample_ids[i]);
    }
    return out;
}

}  // namespace anne
