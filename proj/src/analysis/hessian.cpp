#include <algorithm>
#include <thread>

#include <fmt/format.h>

#include "sparselab/analysis.hpp"
#include "sparselab/error.hpp"

namespace sparselab {

MatrixRM full_hessian(const MaskedNetwork& net, const Tensor& inputs, std::span<const int> labels,
                      const HessianOptions& options) {
  const std::vector<std::size_t> coords = net.active_coordinates();
  const std::size_t d = coords.size();
  if (d > options.cap) {
    throw ConfigError(fmt::format("network has {} active coordinates, Hessian cap is {}", d, options.cap));
  }
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw ShapeError(fmt::format("{} labels for {} inputs", labels.size(), n));
  if (n == 0) throw ShapeError("Hessian over an empty dataset");

  struct Chunk {
    Tensor x;
    std::span<const int> y;
    double weight;
  };
  std::vector<Chunk> chunks;
  const std::size_t step = std::max<std::size_t>(options.chunk, 1);
  for (std::size_t b = 0; b < n; b += step) {
    const std::size_t e = std::min(n, b + step);
    chunks.push_back({slice_rows(inputs, b, e), labels.subspan(b, e - b),
                      static_cast<double>(e - b) / static_cast<double>(n)});
  }

  MatrixRM h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const std::size_t total = net.layout().total;
  auto columns = [&](std::size_t begin, std::size_t end) {
    std::vector<double> v(total, 0.0), col(total);
    for (std::size_t c = begin; c < end; ++c) {
      v[coords[c]] = 1.0;
      std::fill(col.begin(), col.end(), 0.0);
      for (const Chunk& ch : chunks) {
        const std::vector<double> hv = hvp_full(net, ch.x, ch.y, v, ch.weight);
        for (std::size_t i = 0; i < total; ++i) col[i] += hv[i];
      }
      v[coords[c]] = 0.0;
      for (std::size_t r = 0; r < d; ++r) h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[coords[r]];
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(std::max<std::size_t>(d, 1))));
  if (threads == 1) {
    columns(0, d);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = d * t / threads, e = d * (t + 1) / threads;
      pool.emplace_back(columns, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return h;
}

}  // namespace sparselab
