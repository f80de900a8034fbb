#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparselab/tensor.hpp"

namespace sparselab {

inline constexpr double kMnistMean = 0.1307;
inline constexpr double kMnistStd = 0.3081;

/// Train/test splits with flattened inputs [N, dim].
struct Dataset {
  std::string name;
  Tensor train_x;
  std::vector<int> train_y;
  Tensor test_x;
  std::vector<int> test_y;
  std::size_t classes = 0;
  Shape input_shape;  // per example, e.g. {1, 28, 28}
  double mean = 0.0;  // normalization applied to raw pixels in [0, 1]
  double std = 1.0;

  std::size_t train_size() const { return train_y.size(); }
  std::size_t test_size() const { return test_y.size(); }
};

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// IDX readers; gzip-compressed files are accepted too. Throw DataError on a
/// bad magic number, truncated payload, or unreadable file.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<int> read_idx_labels(const std::filesystem::path& path);

/// Loads the four standard MNIST files from `dir` (plain or .gz), scales pixels
/// to [0, 1] and standardizes with the usual mean/std.
Dataset load_mnist(const std::filesystem::path& dir);

/// Data directory: explicit value, else $SPARSELAB_DATA, else nullopt.
std::optional<std::filesystem::path> data_dir(const std::string& explicit_dir = "");

/// Gaussian blobs: class centres ~ N(0, separation^2 I), points = centre + N(0, I).
/// Class counts differ by at most one. Throws ConfigError for classes < 2.
Dataset make_synthetic(std::size_t n, std::size_t classes, std::size_t dim, std::uint64_t seed,
                       double separation = 3.0, std::size_t n_test = 0);

/// First `n_train` / `n_test` examples (0 keeps the split whole).
Dataset subset(const Dataset& data, std::size_t n_train, std::size_t n_test);

/// Averages non-overlapping factor x factor pixel blocks of a 1xHxW dataset.
Dataset downsample(const Dataset& data, std::size_t factor);

}  // namespace sparselab
