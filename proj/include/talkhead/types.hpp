#pragma once

#include <string>

#include <Eigen/Core>

#include "talkhead/errors.hpp"

namespace talkhead {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXf = Vector<float>;
using MatrixXf = Matrix<float>;

// N x 3 point sets (one point per row) and N x 2 image coordinates.
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline constexpr int kReprDim = 512;
inline constexpr int kPoseDim = 6;
inline constexpr int kPoseFeatureDim = 12;
inline constexpr int kMouthPoints = 25;
inline constexpr int kFaceLandmarks = 73;

inline void check_size(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected size " + std::to_string(want) + ", got " +
                             std::to_string(got));
}

}  // namespace talkhead
