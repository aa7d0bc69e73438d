#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "talkhead/types.hpp"

namespace talkhead {

// Dense row-major f32 tensor.
struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::uint32_t> shape_, std::vector<float> data_);

    static Tensor zeros(std::vector<std::uint32_t> shape_);
    static Tensor from_matrix(const Eigen::Ref<const MatrixXf>& m);
    static Tensor from_vector(const Eigen::Ref<const VectorXf>& v);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    // Views a rank-2 tensor as a matrix / a rank-1 tensor as a vector.
    // Throw DimensionError on rank mismatch.
    MatrixXf to_matrix() const;
    VectorXf to_vector() const;

    bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(const std::vector<std::uint32_t>& shape);

// Named tensors in insertion order; names are unique.
class WeightStore {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    void add(const std::string& name, Tensor tensor);       // DataError on duplicates
    void set(const std::string& name, Tensor tensor);       // insert or replace
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;       // DataError if missing

    // Fetches a tensor and checks its shape.
    MatrixXf matrix(const std::string& name, int rows, int cols) const;
    VectorXf vector(const std::string& name, int size) const;

    std::size_t size() const { return entries_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    bool operator==(const WeightStore& other) const { return entries_ == other.entries_; }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::map<std::string, std::size_t> index_;
};

// Binary weight file, little-endian:
//   "LSPW" | u32 version | u32 tensor_count | u32 reserved (0)
//   per tensor: u16 name_len | name | u8 dtype (0 = f32) | u8 rank | rank x u32 dims | f32 data
std::string serialize_weights(const WeightStore& store);
WeightStore deserialize_weights(const std::string& bytes);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace talkhead
