#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bitsel {

// Dense pixel grids. Row-major so that raw buffers (BMP rows, patch dumps)
// map directly onto the matrix storage.
using Image8 = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A patch is a 64x64 Image8. Intensity at pixel coordinates (x, y) is
// patch(y, x): x indexes columns, y indexes rows.
using Patch = Image8;

inline constexpr int kPatchSize = 64;
inline constexpr int kPatchPixels = kPatchSize * kPatchSize;

// LBP histogram vectors are kept in double precision so unit-norm
// guarantees hold to 1e-9.
using LbpVector = Eigen::VectorXd;

// Caller passed inconsistent arguments (variant mismatch, length mismatch).
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

// A parameter is outside its documented domain.
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Filesystem-level failure; message names the offending file.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A file exists but its contents do not parse.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool is_patch_shaped(const Image8& img) {
  return img.rows() == kPatchSize && img.cols() == kPatchSize;
}

inline void require_patch(const Image8& img, const std::string& what) {
  if (!is_patch_shaped(img))
    throw UsageError(what + ": expected a 64x64 patch, got " + std::to_string(img.rows()) +
                     "x" + std::to_string(img.cols()));
}

}  // namespace bitsel
