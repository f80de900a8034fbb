#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparselab/dst.hpp"
#include "sparselab/model.hpp"
#include "sparselab/network.hpp"

namespace sparselab {

// ---- gradient flow -------------------------------------------------------

/// Squared Euclidean norm of the masked gradient (weights and biases).
double gradient_flow(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels);

/// Gradient over every coordinate, masked-out weights included.
GradientVector dense_gradient(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels);

struct GradFlowRecord {
  std::uint64_t step = 0;
  double grad_flow = 0.0;
  double per_parameter = 0.0;  // grad_flow / active coordinate count
  std::string tag;             // periodic | pre-mask-update | post-mask-update
  std::string batch_id;
};

struct FlowDelta {
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;
  UpdateReport report;
};

/// Gradient flow on the same batch before and after running `update` on net.
FlowDelta mask_update_delta(MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                            const std::function<UpdateReport(MaskedNetwork&)>& update);

// ---- Hessian ---------------------------------------------------------------

struct HessianOptions {
  std::size_t cap = 5000;    // maximum active coordinates
  std::size_t chunk = 1000;  // examples per hvp pass
  unsigned threads = 1;
};

/// Hessian of the mean loss over the whole dataset, restricted to active
/// coordinates (MaskedNetwork::active_coordinates), one hvp per column.
MatrixRM full_hessian(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels,
                      const HessianOptions& options = {});

struct SpectrumEstimate {
  std::vector<double> eigenvalues;  // ascending
  double sigma = 0.0;
  std::vector<double> grid;
  std::vector<double> density;

  /// Trapezoid integral of the density over the grid.
  double integral() const;
};

/// Largest absolute asymmetry max|H - H^T|.
double symmetry_defect(const MatrixRM& h);

/// Eigenvalues of a symmetric matrix (ascending). Throws ShapeError when the
/// matrix is not square or not symmetric within `tolerance` (relative to max|H|).
std::vector<double> symmetric_eigenvalues(const MatrixRM& h, double tolerance = 1e-7);

/// Eigenvalues plus a Gaussian-kernel density on a uniform grid spanning
/// [lambda_min - 3 sigma, lambda_max + 3 sigma]. sigma <= 0 selects
/// 0.01 * (lambda_max - lambda_min).
SpectrumEstimate spectrum(const MatrixRM& h, double sigma = 0.0);
SpectrumEstimate spectrum_from_eigenvalues(std::vector<double> eigenvalues, double sigma = 0.0);

/// |min(lambda)| when min(lambda) < 0, else 0.
double largest_negative_magnitude(std::span<const double> eigenvalues);

struct EigenTrackPoint {
  std::uint64_t step;
  double magnitude;
};

std::vector<EigenTrackPoint> largest_negative_eigenvalue_track(
    const std::vector<std::pair<std::uint64_t, SpectrumEstimate>>& spectra);

}  // namespace sparselab
