#include "pcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "pcnn/error.hpp"

namespace pcnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("data: missing file " + path.string());
    return in;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("data: cannot write " + path.string());
    return out;
}

json read_json(const fs::path& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("data: malformed " + path.filename().string() + ": " + e.what());
    }
}

std::size_t meta_count(const json& meta, const char* key) {
    if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
        throw FormatError(std::string("data: meta.json field '") + key +
                          "' missing or not a nonnegative integer");
    }
    return meta[key].get<std::size_t>();
}

void expect_count(std::size_t got, std::size_t want, const std::string& what) {
    if (got != want) {
        throw FormatError("data: " + what + " count " + std::to_string(got) +
                          " does not match meta.json (" + std::to_string(want) + ")");
    }
}

std::vector<std::uint32_t> read_mask(const json& masks, const char* key) {
    if (!masks.contains(key) || !masks[key].is_array()) {
        throw FormatError(std::string("data: masks.json field '") + key + "' missing");
    }
    std::vector<std::uint32_t> out;
    out.reserve(masks[key].size());
    for (const auto& v : masks[key]) {
        if (!v.is_number_unsigned()) {
            throw FormatError(std::string("data: masks.json '") + key +
                              "' holds a non-index value");
        }
        out.push_back(v.get<std::uint32_t>());
    }
    return out;
}

}  // namespace

void PreprocessConfig::validate() const {
    if (!(b > 1.0) || !std::isfinite(b)) {
        throw DomainError("data: preprocessing base b must be > 1, got " + std::to_string(b));
    }
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
        throw DomainError("data: preprocessing epsilon must lie in (0, 1), got " +
                          std::to_string(epsilon));
    }
}

DenseMatrix preprocess_features(const DenseMatrix& features, const PreprocessConfig& config) {
    config.validate();
    DenseMatrix out(features.rows(), features.cols());
    auto o = out.data();
    auto in = features.data();
    for (std::size_t k = 0; k < o.size(); ++k) {
        const double v = in[k];
        if (v < 0.0) {
            throw DomainError("data: negative feature entry " + std::to_string(v) + " at index " +
                              std::to_string(k));
        }
        if (v == 0.0) {
            o[k] = config.epsilon;
            continue;
        }
        const double mapped = std::pow(config.b, v);
        if (!(mapped <= kPreprocessOverflowGuard)) {
            throw DomainError("data: b^x exceeds the overflow guard for entry " +
                              std::to_string(v));
        }
        o[k] = mapped;
    }
    return out;
}

std::vector<Violation> validate_dataset(const GraphDataset& ds) {
    std::vector<Violation> violations;
    const std::size_t n = ds.num_nodes();

    if (ds.labels.size() != n) {
        violations.push_back({"label_count", ds.labels.size(),
                              "labels cover " + std::to_string(ds.labels.size()) + " of " +
                                  std::to_string(n) + " nodes"});
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] >= ds.num_classes) {
            violations.push_back({"label_range", i,
                                  "label " + std::to_string(ds.labels[i]) + " >= num_classes " +
                                      std::to_string(ds.num_classes)});
        }
    }
    for (std::size_t e = 0; e < ds.edges.size(); ++e) {
        const auto [u, v] = ds.edges[e];
        if (u >= n || v >= n) {
            violations.push_back({"edge_range", e,
                                  "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                      ") has an endpoint >= " + std::to_string(n)});
        }
    }
    const auto data = ds.features.data();
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (!std::isfinite(data[k])) {
            violations.push_back({"feature_finite", k, "non-finite feature entry"});
        }
    }

    const std::pair<const char*, const std::vector<std::uint32_t>*> masks[] = {
        {"train", &ds.train_mask}, {"val", &ds.val_mask}, {"test", &ds.test_mask}};
    std::map<std::uint32_t, const char*> owner;
    for (const auto& [name, mask] : masks) {
        for (std::uint32_t idx : *mask) {
            if (idx >= n) {
                violations.push_back({"mask_range", idx,
                                      std::string(name) + " mask index " + std::to_string(idx) +
                                          " >= " + std::to_string(n)});
                continue;
            }
            const auto [it, inserted] = owner.emplace(idx, name);
            if (!inserted) {
                violations.push_back({"mask_disjoint", idx,
                                      "node " + std::to_string(idx) + " is in both " +
                                          it->second + " and " + name});
            }
        }
    }
    return violations;
}

GraphDataset load_dataset(const fs::path& dir) {
    const json meta = read_json(dir / "meta.json");
    GraphDataset ds;
    ds.name = meta.value("name", dir.filename().string());
    const std::size_t num_nodes = meta_count(meta, "num_nodes");
    const std::size_t num_edges = meta_count(meta, "num_edges");
    const std::size_t num_features = meta_count(meta, "num_features");
    ds.num_classes = meta_count(meta, "num_classes");

    {
        auto in = open_input(dir / "features.bin");
        constexpr std::string_view what = "data: features.bin";
        detail::expect_magic(in, "PCNF", what);
        const auto rows = detail::read_le<std::uint32_t>(in, what);
        const auto cols = detail::read_le<std::uint32_t>(in, what);
        expect_count(rows, num_nodes, "features.bin row");
        expect_count(cols, num_features, "features.bin column");
        std::vector<float> raw(static_cast<std::size_t>(rows) * cols);
        if (!in.read(reinterpret_cast<char*>(raw.data()),
                     static_cast<std::streamsize>(raw.size() * sizeof(float)))) {
            throw FormatError("data: features.bin: truncated file");
        }
        std::vector<double> values(raw.begin(), raw.end());
        ds.features = DenseMatrix(rows, cols, std::move(values));
    }
    {
        auto in = open_input(dir / "labels.bin");
        constexpr std::string_view what = "data: labels.bin";
        detail::expect_magic(in, "PCNL", what);
        const auto n = detail::read_le<std::uint32_t>(in, what);
        expect_count(n, num_nodes, "labels.bin");
        ds.labels.resize(n);
        for (auto& label : ds.labels) label = detail::read_le<std::uint16_t>(in, what);
    }
    {
        auto in = open_input(dir / "edges.bin");
        constexpr std::string_view what = "data: edges.bin";
        detail::expect_magic(in, "PCNE", what);
        const auto m = detail::read_le<std::uint32_t>(in, what);
        expect_count(m, num_edges, "edges.bin");
        ds.edges.resize(m);
        for (auto& [u, v] : ds.edges) {
            u = detail::read_le<std::uint32_t>(in, what);
            v = detail::read_le<std::uint32_t>(in, what);
        }
    }
    {
        const json masks = read_json(dir / "masks.json");
        ds.train_mask = read_mask(masks, "train");
        ds.val_mask = read_mask(masks, "val");
        ds.test_mask = read_mask(masks, "test");
    }

    const auto violations = validate_dataset(ds);
    if (!violations.empty()) {
        std::string msg = "data: " + dir.string() + " failed validation:";
        for (const auto& v : violations) msg += "\n  [" + v.invariant + "] " + v.message;
        throw FormatError(msg);
    }
    return ds;
}

void write_dataset(const GraphDataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    {
        json meta = {{"name", ds.name},
                     {"num_nodes", ds.num_nodes()},
                     {"num_edges", ds.edges.size()},
                     {"num_features", ds.num_features()},
                     {"num_classes", ds.num_classes}};
        auto out = open_output(dir / "meta.json");
        out << meta.dump(2) << "\n";
    }
    {
        auto out = open_output(dir / "features.bin");
        detail::write_magic(out, "PCNF");
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_nodes()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_features()));
        for (double v : ds.features.data()) detail::write_le<float>(out, static_cast<float>(v));
    }
    {
        auto out = open_output(dir / "labels.bin");
        detail::write_magic(out, "PCNL");
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.labels.size()));
        for (auto label : ds.labels) detail::write_le<std::uint16_t>(out, label);
    }
    {
        auto out = open_output(dir / "edges.bin");
        detail::write_magic(out, "PCNE");
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.edges.size()));
        for (const auto& [u, v] : ds.edges) {
            detail::write_le<std::uint32_t>(out, std::min(u, v));
            detail::write_le<std::uint32_t>(out, std::max(u, v));
        }
    }
    {
        json masks = {{"train", ds.train_mask}, {"val", ds.val_mask}, {"test", ds.test_mask}};
        auto out = open_output(dir / "masks.json");
        out << masks.dump() << "\n";
    }
}

}  // namespace pcnn
