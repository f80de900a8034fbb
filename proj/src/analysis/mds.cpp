#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "sparselab/error.hpp"
#include "sparselab/landscape.hpp"

namespace sparselab {

MatrixRM pairwise_distances(const std::vector<ParamPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  MatrixRM d = MatrixRM::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = l2_distance(points[i], points[j]);
  return d;
}

MdsResult mds_embed(const MatrixRM& distances, std::size_t dim) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw ShapeError("distance matrix is not square");
  if (dim == 0 || static_cast<std::size_t>(n) < dim + 1) {
    throw ShapeError(fmt::format("MDS into {} dimensions needs at least {} points, got {}", dim, dim + 1, n));
  }
  const Eigen::MatrixXd d2 = distances.array().square().matrix();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw NumericError("MDS eigensolver did not converge");

  MdsResult r;
  r.coords = MatrixRM::Zero(n, static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) {
    const Eigen::Index col = n - 1 - static_cast<Eigen::Index>(k);  // eigenvalues ascending
    const double lambda = std::max(0.0, solver.eigenvalues()(col));
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    // Fix the sign so the embedding is deterministic: largest-|entry| positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    r.coords.col(static_cast<Eigen::Index>(k)) = std::sqrt(lambda) * v;
  }
  const Eigen::RowVectorXd mean = r.coords.colwise().mean();
  r.coords.rowwise() -= mean;

  r.embedded = MatrixRM::Zero(n, n);
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double e = (r.coords.row(i) - r.coords.row(k)).norm();
      r.embedded(i, k) = r.embedded(k, i) = e;
      num += (e - distances(i, k)) * (e - distances(i, k));
      den += distances(i, k) * distances(i, k);
    }
  }
  r.stress = den > 0.0 ? std::sqrt(num / den) : 0.0;
  return r;
}

MdsResult mds_embed(const std::vector<ParamPoint>& points, std::size_t dim) {
  return mds_embed(pairwise_distances(points), dim);
}

}  // namespace sparselab
