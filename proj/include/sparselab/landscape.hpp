#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparselab/model.hpp"
#include "sparselab/network.hpp"

namespace sparselab {

/// Parameters on a network's active coordinates, tagged with the mask they
/// were taken under.
struct ParamPoint {
  std::vector<double> values;
  std::uint32_t mask_fingerprint = 0;
  std::string label;  // lt-init | lt-soln | scratch-init | scratch-soln | pruned-soln
  std::uint64_t seed = 0;
};

/// crc32 over the architecture description and every mask bit.
std::uint32_t mask_fingerprint(const MaskedNetwork& net);
ParamPoint make_point(const MaskedNetwork& net, std::string label, std::uint64_t seed);

/// Euclidean distance over active coordinates. Throws ShapeError on a mask mismatch.
double l2_distance(const ParamPoint& a, const ParamPoint& b);

struct InterpolationPoint {
  double alpha;
  double loss;
  double accuracy;
};

/// n uniform points in [0, 1], endpoints exact.
std::vector<double> alpha_grid(std::size_t n = 21);

/// Loss and accuracy of (1 - alpha) a + alpha b for each alpha. alpha = 0 and
/// alpha = 1 evaluate a and b themselves.
std::vector<InterpolationPoint> interpolate_loss(const MaskedNetwork& a, const MaskedNetwork& b,
                                                 std::span<const double> grid, const Tensor& inputs,
                                                 std::span<const int> labels);

struct MdsResult {
  MatrixRM coords;     // n x dim, centered
  MatrixRM embedded;   // pairwise distances of the embedding
  double stress = 0.0; // sqrt(sum (d_hat - d)^2 / sum d^2)
};

/// Classical (Torgerson) MDS of a symmetric distance matrix. Negative
/// eigenvalues of the centered Gram matrix are treated as 0.
MdsResult mds_embed(const MatrixRM& distances, std::size_t dim = 2);
MatrixRM pairwise_distances(const std::vector<ParamPoint>& points);
MdsResult mds_embed(const std::vector<ParamPoint>& points, std::size_t dim = 2);

// ---- function similarity ---------------------------------------------------

/// Fraction of positions where the two label sequences differ.
double disagreement(std::span<const int> a, std::span<const int> b);

struct Divergence {
  double total = 0.0;         // summed over examples
  double per_example = 0.0;   // mean over examples
  std::size_t floored = 0;    // entries of q raised to the floor
};

inline constexpr double kProbabilityFloor = 1e-12;

/// KL(p || q) with rows as examples; q entries below the floor are raised to it
/// where p > 0.
Divergence kl_divergence(const MatrixRM& p, const MatrixRM& q);
/// H(mean of models) - mean of H(model), nats.
Divergence jensen_shannon(const std::vector<const MatrixRM*>& models);

/// Accuracy of the argmax of the mean probabilities (ties to the lowest class).
double ensemble_accuracy(const std::vector<const MatrixRM*>& models, std::span<const int> labels);

struct ModelOutputs {
  std::vector<int> predictions;
  MatrixRM probabilities;
  double accuracy = 0.0;
};

ModelOutputs model_outputs(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels);

struct SimilarityReport {
  MatrixRM disagreement;                       // pairwise
  MatrixRM kl;                                 // pairwise, KL(row || col), summed
  std::vector<double> disagreement_with_pruned;
  std::vector<double> kl_with_pruned;          // KL(model || pruned)
  std::vector<double> jsd_with_pruned;         // 2-model JSD with the pruned solution
  double jsd = 0.0;                            // n-model JSD, summed
  double ensemble_accuracy = 0.0;
  std::vector<double> accuracy;
  std::size_t floored = 0;
};

/// Similarity of a model set, optionally against a reference (pruned) model.
SimilarityReport compare_models(const std::vector<ModelOutputs>& models, const ModelOutputs* pruned,
                                std::span<const int> labels);

}  // namespace sparselab
