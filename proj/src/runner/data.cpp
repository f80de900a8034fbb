#include "sparselab/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <zlib.h>

#include "sparselab/error.hpp"
#include "sparselab/rng.hpp"

namespace sparselab {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

class GzFile {
 public:
  explicit GzFile(const std::filesystem::path& path) : path_(path.string()) {
    f_ = gzopen(path_.c_str(), "rb");
    if (!f_) throw DataError(fmt::format("cannot open {}", path_));
  }
  ~GzFile() { gzclose(f_); }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* dst, std::size_t n) {
    auto* p = static_cast<char*>(dst);
    while (n > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(f_, p, chunk);
      if (got <= 0) throw DataError(fmt::format("{}: truncated file", path_));
      p += got;
      n -= static_cast<std::size_t>(got);
    }
  }
  std::uint32_t be32() {
    unsigned char b[4];
    read(b, 4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  gzFile f_ = nullptr;
};

std::filesystem::path find_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const std::string& name : {stem, stem + ".gz", [&] {
         std::string dotted = stem;
         std::replace(dotted.begin(), dotted.end(), '-', '.');
         return dotted;
       }()}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  throw DataError(fmt::format("{} not found in {}", stem, dir.string()));
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  GzFile f(path);
  const std::uint32_t magic = f.be32();
  if (magic != kImageMagic) throw DataError(fmt::format("{}: bad magic 0x{:08x} for an image file", f.path(), magic));
  IdxImages img;
  img.count = f.be32();
  img.rows = f.be32();
  img.cols = f.be32();
  img.pixels.resize(img.count * img.rows * img.cols);
  f.read(img.pixels.data(), img.pixels.size());
  return img;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  GzFile f(path);
  const std::uint32_t magic = f.be32();
  if (magic != kLabelMagic) throw DataError(fmt::format("{}: bad magic 0x{:08x} for a label file", f.path(), magic));
  const std::uint32_t n = f.be32();
  std::vector<std::uint8_t> raw(n);
  f.read(raw.data(), raw.size());
  std::vector<int> labels(raw.begin(), raw.end());
  for (int l : labels)
    if (l > 9) throw DataError(fmt::format("{}: label {} outside [0, 10)", f.path(), l));
  return labels;
}

Dataset load_mnist(const std::filesystem::path& dir) {
  auto split = [&](const std::string& images, const std::string& labels, Tensor& x, std::vector<int>& y,
                   std::size_t expected) {
    const IdxImages img = read_idx_images(find_file(dir, images));
    y = read_idx_labels(find_file(dir, labels));
    if (img.count != y.size()) {
      throw DataError(fmt::format("{}: {} images but {} labels", images, img.count, y.size()));
    }
    if (img.count != expected || img.rows != 28 || img.cols != 28) {
      throw DataError(fmt::format("{}: expected {} 28x28 images, found {} {}x{}", images, expected, img.count, img.rows,
                                  img.cols));
    }
    x = Tensor({img.count, img.rows * img.cols});
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      x[i] = (static_cast<double>(img.pixels[i]) / 255.0 - kMnistMean) / kMnistStd;
  };
  Dataset d;
  d.name = "mnist";
  d.classes = 10;
  d.input_shape = {1, 28, 28};
  d.mean = kMnistMean;
  d.std = kMnistStd;
  split("train-images-idx3-ubyte", "train-labels-idx1-ubyte", d.train_x, d.train_y, 60000);
  split("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", d.test_x, d.test_y, 10000);
  return d;
}

std::optional<std::filesystem::path> data_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return std::filesystem::path(explicit_dir);
  if (const char* env = std::getenv("SPARSELAB_DATA"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

Dataset make_synthetic(std::size_t n, std::size_t classes, std::size_t dim, std::uint64_t seed, double separation,
                       std::size_t n_test) {
  if (classes < 2) throw ConfigError(fmt::format("synthetic data needs at least 2 classes, got {}", classes));
  if (n == 0 || dim == 0) throw ConfigError("synthetic data needs n >= 1 and dim >= 1");
  if (n_test == 0) n_test = std::max<std::size_t>(n / 4, classes);
  Rng rng = make_rng(seed, {kStreamSynthetic});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centres(classes * dim);
  for (double& c : centres) c = separation * normal(rng);

  auto draw = [&](std::size_t count, Tensor& x, std::vector<int>& y) {
    y.resize(count);
    for (std::size_t i = 0; i < count; ++i) y[i] = static_cast<int>(i % classes);
    std::shuffle(y.begin(), y.end(), rng);
    x = Tensor({count, dim});
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        x[i * dim + j] = centres[static_cast<std::size_t>(y[i]) * dim + j] + normal(rng);
  };
  Dataset d;
  d.name = fmt::format("synthetic-{}-{}-{}", n, classes, dim);
  d.classes = classes;
  d.input_shape = {dim};
  draw(n, d.train_x, d.train_y);
  draw(n_test, d.test_x, d.test_y);
  return d;
}

Dataset subset(const Dataset& data, std::size_t n_train, std::size_t n_test) {
  auto take = [](const Tensor& x, const std::vector<int>& y, std::size_t n, Tensor& ox, std::vector<int>& oy) {
    if (n == 0 || n >= y.size()) {
      ox = x;
      oy = y;
      return;
    }
    const std::size_t stride = x.size() / y.size();
    ox = Tensor({n, stride}, std::vector<double>(x.storage().begin(),
                                                 x.storage().begin() + static_cast<std::ptrdiff_t>(n * stride)));
    oy.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  };
  Dataset d;
  d.name = data.name;
  d.classes = data.classes;
  d.input_shape = data.input_shape;
  d.mean = data.mean;
  d.std = data.std;
  take(data.train_x, data.train_y, n_train, d.train_x, d.train_y);
  take(data.test_x, data.test_y, n_test, d.test_x, d.test_y);
  if (n_train || n_test) d.name += fmt::format("[{}/{}]", d.train_size(), d.test_size());
  return d;
}

Dataset downsample(const Dataset& data, std::size_t factor) {
  if (factor <= 1) return data;
  if (data.input_shape.size() != 3 || data.input_shape[0] != 1) throw ConfigError("downsampling needs 1xHxW images");
  const std::size_t h = data.input_shape[1], w = data.input_shape[2];
  if (h % factor || w % factor) throw ConfigError(fmt::format("image size {}x{} not divisible by {}", h, w, factor));
  const std::size_t oh = h / factor, ow = w / factor;
  auto pool = [&](const Tensor& x) {
    const std::size_t n = x.dim(0);
    Tensor out({n, oh * ow});
    const double area = static_cast<double>(factor * factor);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t a = 0; a < factor; ++a)
            for (std::size_t b = 0; b < factor; ++b) acc += x[s * h * w + (i * factor + a) * w + j * factor + b];
          out[s * oh * ow + i * ow + j] = acc / area;
        }
    return out;
  };
  Dataset d = data;
  d.name += fmt::format("/{}", factor);
  d.input_shape = {1, oh, ow};
  d.train_x = pool(data.train_x);
  d.test_x = pool(data.test_x);
  return d;
}

}  // namespace sparselab
