#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sparselab/error.hpp"
#include "sparselab/landscape.hpp"

namespace sparselab {

double disagreement(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError(fmt::format("prediction lengths differ ({} vs {})", a.size(), b.size()));
  if (a.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i] ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

namespace {

void check_distribution(const MatrixRM& p, const char* what) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double s = p.row(r).sum();
    if (std::abs(s - 1.0) > 1e-6 || (p.row(r).array() < 0.0).any()) {
      throw ShapeError(fmt::format("{} row {} is not a probability distribution (sum {})", what, r, s));
    }
  }
}

double entropy(const double* p, Eigen::Index n) {
  double h = 0.0;
  for (Eigen::Index c = 0; c < n; ++c)
    if (p[c] > 0.0) h -= p[c] * std::log(p[c]);
  return h;
}

}  // namespace

Divergence kl_divergence(const MatrixRM& p, const MatrixRM& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw ShapeError("KL inputs have different shapes");
  check_distribution(p, "p");
  check_distribution(q, "q");
  Divergence d;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double pv = p(r, c);
      if (pv <= 0.0) continue;
      double qv = q(r, c);
      if (qv < kProbabilityFloor) {
        qv = kProbabilityFloor;
        ++d.floored;
      }
      d.total += pv * std::log(pv / qv);
    }
  }
  d.per_example = p.rows() ? d.total / static_cast<double>(p.rows()) : 0.0;
  return d;
}

Divergence jensen_shannon(const std::vector<const MatrixRM*>& models) {
  if (models.empty()) throw ShapeError("JSD of an empty model set");
  const Eigen::Index rows = models[0]->rows(), cols = models[0]->cols();
  for (const MatrixRM* m : models) {
    if (m->rows() != rows || m->cols() != cols) throw ShapeError("JSD inputs have different shapes");
    check_distribution(*m, "model");
  }
  Divergence d;
  const double k = static_cast<double>(models.size());
  std::vector<double> mean(static_cast<std::size_t>(cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::fill(mean.begin(), mean.end(), 0.0);
    double mean_h = 0.0;
    for (const MatrixRM* m : models) {
      const double* row = m->data() + r * cols;
      for (Eigen::Index c = 0; c < cols; ++c) mean[static_cast<std::size_t>(c)] += row[c] / k;
      mean_h += entropy(row, cols) / k;
    }
    d.total += std::max(0.0, entropy(mean.data(), cols) - mean_h);
  }
  d.per_example = rows ? d.total / static_cast<double>(rows) : 0.0;
  return d;
}

double ensemble_accuracy(const std::vector<const MatrixRM*>& models, std::span<const int> labels) {
  if (models.empty()) throw ShapeError("ensemble of no models");
  const Eigen::Index rows = models[0]->rows(), cols = models[0]->cols();
  if (static_cast<std::size_t>(rows) != labels.size()) throw ShapeError("ensemble outputs and labels differ in length");
  if (rows == 0) return 0.0;
  MatrixRM sum = MatrixRM::Zero(rows, cols);
  for (const MatrixRM* m : models) {
    if (m->rows() != rows || m->cols() != cols) throw ShapeError("ensemble members have different shapes");
    sum += *m;
  }
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double* row = sum.data() + r * cols;
    const auto best = static_cast<int>(std::max_element(row, row + cols) - row);
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows);
}

ModelOutputs model_outputs(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels) {
  EvalResult r = evaluate(net, inputs, labels, true);
  return {std::move(r.predictions), std::move(r.probabilities), r.accuracy};
}

SimilarityReport compare_models(const std::vector<ModelOutputs>& models, const ModelOutputs* pruned,
                                std::span<const int> labels) {
  const auto n = static_cast<Eigen::Index>(models.size());
  if (n == 0) throw ShapeError("similarity of an empty model set");
  SimilarityReport r;
  r.disagreement = MatrixRM::Zero(n, n);
  r.kl = MatrixRM::Zero(n, n);
  std::vector<const MatrixRM*> probs;
  for (const auto& m : models) {
    probs.push_back(&m.probabilities);
    r.accuracy.push_back(m.accuracy);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      r.disagreement(i, j) = disagreement(models[i].predictions, models[j].predictions);
      const Divergence kl = kl_divergence(models[i].probabilities, models[j].probabilities);
      r.kl(i, j) = kl.total;
      r.floored += kl.floored;
    }
  }
  r.jsd = jensen_shannon(probs).total;
  r.ensemble_accuracy = ensemble_accuracy(probs, labels);
  if (pruned) {
    for (const auto& m : models) {
      r.disagreement_with_pruned.push_back(disagreement(m.predictions, pruned->predictions));
      const Divergence kl = kl_divergence(m.probabilities, pruned->probabilities);
      r.kl_with_pruned.push_back(kl.total);
      r.floored += kl.floored;
      r.jsd_with_pruned.push_back(jensen_shannon({&m.probabilities, &pruned->probabilities}).total);
    }
  }
  return r;
}

}  // namespace sparselab
