#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace r2d2 {

// One grouping factor: level[i] in [0, levels) for every observation.
struct GroupIndex {
  std::vector<int> level;
  int levels = 0;

  bool empty() const { return levels == 0; }
  Eigen::MatrixXd indicator() const;  // n x levels, rows sum to one
  std::vector<int> counts() const;
};

inline Eigen::MatrixXd GroupIndex::indicator() const {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(level.size()), levels);
  for (std::size_t i = 0; i < level.size(); ++i) z(static_cast<Eigen::Index>(i), level[i]) = 1.0;
  return z;
}

inline std::vector<int> GroupIndex::counts() const {
  std::vector<int> c(static_cast<std::size_t>(levels), 0);
  for (int l : level) ++c[static_cast<std::size_t>(l)];
  return c;
}

// Center each column and scale it so its sum of squares equals n.
// Returns false (leaving x untouched) if some column has zero variance;
// `bad_column` then holds its index.
struct Standardization {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

inline bool standardize_columns(Eigen::MatrixXd& x, Standardization& out, Eigen::Index& bad_column) {
  const Eigen::Index n = x.rows();
  out.center = x.colwise().mean().transpose();
  out.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - out.center[j]).square().sum();
    if (!(ss > 1e-24 * std::max(1.0, x.col(j).squaredNorm()))) {
      bad_column = j;
      return false;
    }
    out.scale[j] = std::sqrt(ss / static_cast<double>(n));
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    x.col(j) = (x.col(j).array() - out.center[j]) / out.scale[j];
  return true;
}

}  // namespace r2d2
