#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "talkhead/tensor.hpp"
#include "talkhead/types.hpp"

namespace talkhead {

struct Neighbors;

// Immutable bank of the target speaker's speech representations, one per row.
class ReprDatabase {
public:
    ReprDatabase() = default;
    explicit ReprDatabase(RowMatrix<float> features);

    const RowMatrix<float>& features() const { return features_; }
    const Eigen::VectorXd& squared_norms() const { return sq_norms_; }
    int rows() const { return static_cast<int>(features_.rows()); }
    int dim() const { return static_cast<int>(features_.cols()); }

    // Weight-file tensor "manifold.db", shape [N_s, dim].
    static ReprDatabase from_store(const WeightStore& store);
    void to_store(WeightStore& store) const;

    // Raw little-endian f32 matrix plus a JSON sidecar at `<path>.json`
    // holding {"rows": N_s, "dim": 512}.
    static ReprDatabase load_raw(const std::filesystem::path& path);
    void save_raw(const std::filesystem::path& path) const;

    // Dispatches on the file magic: weight file or raw matrix with sidecar.
    static ReprDatabase load(const std::filesystem::path& path);

private:
    friend Neighbors knn(const ReprDatabase&, const Eigen::Ref<const VectorXf>&, int);

    RowMatrix<float> features_;
    Eigen::VectorXd sq_norms_;
    // Screening copy: row i is approximately code_scale_[i] * codes_.row(i).
    RowMatrix<std::int8_t> codes_;
    Eigen::VectorXd code_scale_;
    Eigen::VectorXd code_l1_;
};

ReprDatabase build_database(std::span<const VectorXf> features);

struct Neighbors {
    std::vector<int> indices;
    std::vector<double> distances;  // Euclidean, ascending
};

struct ProjectionResult {
    std::vector<int> neighbor_indices;
    Vector<double> weights;
    VectorXf reconstructed;
    double residual = 0.0;  // ||h - reconstructed||
};

inline constexpr int kDefaultNeighbors = 10;

// Exhaustive scan; ties in distance go to the lower row index.
Neighbors knn(const ReprDatabase& db, const Eigen::Ref<const VectorXf>& query, int k);

// Affine (sum-to-one) weights of the k nearest rows that best reconstruct the
// query in the least-squares sense, and the reconstruction itself.
ProjectionResult lle_project(const ReprDatabase& db, const Eigen::Ref<const VectorXf>& query,
                             int k = kDefaultNeighbors);

// Least-squares affine weights of `neighbors` (one per row) for `query`.
// Rank-deficient neighbourhoods get the minimum-norm solution.
Vector<double> affine_weights(const Matrix<double>& neighbors, const Vector<double>& query);

}  // namespace talkhead
