#pragma once

#include <vector>

#include "curveddg/types.hpp"

namespace cdg {

/// Sparsity of a block matrix with one square block per (element, element)
/// adjacency pair; rows own a sorted column list that always includes the
/// diagonal.
struct BlockPattern {
  int n_rows = 0;
  int block_size = 0;
  std::vector<std::vector<int>> cols;  // sorted, self included

  int find(int row, int col) const {
    const auto& c = cols[row];
    const auto it = std::lower_bound(c.begin(), c.end(), col);
    return (it != c.end() && *it == col) ? static_cast<int>(it - c.begin()) : -1;
  }
  long n_blocks() const {
    long n = 0;
    for (const auto& c : cols) n += static_cast<long>(c.size());
    return n;
  }
};

/// Block compressed-row matrix over a fixed pattern.
class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;
  explicit BlockSparseMatrix(const BlockPattern& pattern) : pattern_(&pattern) {
    offsets_.resize(pattern.n_rows + 1, 0);
    for (int r = 0; r < pattern.n_rows; ++r)
      offsets_[r + 1] = offsets_[r] + static_cast<int>(pattern.cols[r].size());
    blocks_.assign(offsets_.back(), MatrixXd::Zero(pattern.block_size, pattern.block_size));
  }

  const BlockPattern& pattern() const { return *pattern_; }
  int rows() const { return pattern_->n_rows * pattern_->block_size; }

  void set_zero() {
    for (auto& b : blocks_) b.setZero();
  }

  MatrixXd& block(int row, int col) {
    const int j = pattern_->find(row, col);
    require(j >= 0, "block (", row, ",", col, ") outside the sparsity pattern");
    return blocks_[offsets_[row] + j];
  }
  const MatrixXd& block(int row, int col) const {
    return const_cast<BlockSparseMatrix*>(this)->block(row, col);
  }
  MatrixXd& block_at(int row, int idx) { return blocks_[offsets_[row] + idx]; }
  const MatrixXd& block_at(int row, int idx) const { return blocks_[offsets_[row] + idx]; }

  void multiply(const VectorXd& x, VectorXd& y) const {
    const int bs = pattern_->block_size;
    y.setZero(rows());
    for (int r = 0; r < pattern_->n_rows; ++r) {
      auto yr = y.segment(static_cast<long>(r) * bs, bs);
      const auto& cols = pattern_->cols[r];
      for (size_t j = 0; j < cols.size(); ++j)
        yr.noalias() += blocks_[offsets_[r] + j] * x.segment(static_cast<long>(cols[j]) * bs, bs);
    }
  }

  VectorXd operator*(const VectorXd& x) const {
    VectorXd y;
    multiply(x, y);
    return y;
  }

  /// Dense copy (small test systems only).
  MatrixXd dense() const {
    const int bs = pattern_->block_size;
    MatrixXd a = MatrixXd::Zero(rows(), rows());
    for (int r = 0; r < pattern_->n_rows; ++r) {
      const auto& cols = pattern_->cols[r];
      for (size_t j = 0; j < cols.size(); ++j)
        a.block(static_cast<long>(r) * bs, static_cast<long>(cols[j]) * bs, bs, bs) =
            blocks_[offsets_[r] + j];
    }
    return a;
  }

 private:
  const BlockPattern* pattern_ = nullptr;
  std::vector<int> offsets_;
  std::vector<MatrixXd> blocks_;
};

}  // namespace cdg
