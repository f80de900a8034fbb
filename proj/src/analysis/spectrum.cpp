#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "sparselab/analysis.hpp"
#include "sparselab/error.hpp"

namespace sparselab {

double SpectrumEstimate::integral() const {
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  return s;
}

double symmetry_defect(const MatrixRM& h) {
  if (h.rows() != h.cols()) throw ShapeError("symmetry defect of a non-square matrix");
  return h.rows() == 0 ? 0.0 : (h - h.transpose()).cwiseAbs().maxCoeff();
}

std::vector<double> symmetric_eigenvalues(const MatrixRM& h, double tolerance) {
  if (h.rows() != h.cols()) throw ShapeError(fmt::format("matrix is {}x{}, not square", h.rows(), h.cols()));
  if (h.rows() == 0) return {};
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double defect = symmetry_defect(h);
  if (defect > tolerance * scale) throw ShapeError(fmt::format("matrix is not symmetric (defect {:.3e})", defect));
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
  const Eigen::VectorXd ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

SpectrumEstimate spectrum_from_eigenvalues(std::vector<double> eigenvalues, double sigma) {
  if (eigenvalues.empty()) throw ShapeError("spectrum of an empty matrix");
  std::sort(eigenvalues.begin(), eigenvalues.end());
  SpectrumEstimate s;
  const double lo = eigenvalues.front(), hi = eigenvalues.back();
  if (sigma <= 0.0) sigma = 0.01 * (hi - lo);
  if (sigma <= 0.0) sigma = 0.01 * std::max(1.0, std::abs(hi));
  s.sigma = sigma;

  const double a = lo - 3.0 * sigma, b = hi + 3.0 * sigma;
  const auto points = static_cast<std::size_t>(std::clamp(std::ceil((b - a) / (sigma / 8.0)), 200.0, 200000.0)) + 1;
  const double norm = 1.0 / (static_cast<double>(eigenvalues.size()) * sigma * std::sqrt(2.0 * std::numbers::pi));
  s.grid.resize(points);
  s.density.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    double acc = 0.0;
    for (double l : eigenvalues) {
      const double u = (x - l) / sigma;
      acc += std::exp(-0.5 * u * u);
    }
    s.grid[i] = x;
    s.density[i] = norm * acc;
  }
  s.eigenvalues = std::move(eigenvalues);
  return s;
}

SpectrumEstimate spectrum(const MatrixRM& h, double sigma) {
  return spectrum_from_eigenvalues(symmetric_eigenvalues(h), sigma);
}

double largest_negative_magnitude(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) return 0.0;
  const double m = *std::min_element(eigenvalues.begin(), eigenvalues.end());
  return m < 0.0 ? -m : 0.0;
}

std::vector<EigenTrackPoint> largest_negative_eigenvalue_track(
    const std::vector<std::pair<std::uint64_t, SpectrumEstimate>>& spectra) {
  std::vector<EigenTrackPoint> out;
  out.reserve(spectra.size());
  for (const auto& [step, s] : spectra) out.push_back({step, largest_negative_magnitude(s.eigenvalues)});
  return out;
}

}  // namespace sparselab
