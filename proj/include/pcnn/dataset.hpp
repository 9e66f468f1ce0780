#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcnn/models.hpp"
#include "pcnn/tensor.hpp"

namespace pcnn {

// A single-graph node classification dataset with a fixed transductive split.
struct GraphDataset {
    std::string name;
    DenseMatrix features;  // nodes x features
    std::vector<Edge> edges;  // undirected, each stored once with src <= dst
    std::vector<std::uint16_t> labels;
    std::vector<std::uint32_t> train_mask;
    std::vector<std::uint32_t> val_mask;
    std::vector<std::uint32_t> test_mask;
    std::size_t num_classes = 0;

    std::size_t num_nodes() const { return features.rows(); }
    std::size_t num_features() const { return features.cols(); }
};

// Zero entries become epsilon, positive entries become b^entry.
struct PreprocessConfig {
    double b = 2.0;
    double epsilon = 0.1;

    void validate() const;
};

// Any b^entry above this is rejected rather than silently overflowing later.
inline constexpr double kPreprocessOverflowGuard = 1e12;

DenseMatrix preprocess_features(const DenseMatrix& features, const PreprocessConfig& config);

struct Violation {
    std::string invariant;
    std::size_t index;
    std::string message;
};

// Empty iff every GraphDataset invariant holds. Does not throw.
std::vector<Violation> validate_dataset(const GraphDataset& dataset);

// Directory layout: meta.json, features.bin ("PCNF"), labels.bin ("PCNL"),
// edges.bin ("PCNE"), masks.json. Preprocessing is not applied.
GraphDataset load_dataset(const std::filesystem::path& directory);
void write_dataset(const GraphDataset& dataset, const std::filesystem::path& directory);

}  // namespace pcnn
