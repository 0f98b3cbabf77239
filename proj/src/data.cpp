#include "carl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace carl {

namespace {

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError(std::string(name) + " must lie in [0, 1]");
}

bool coin(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bilinear resample of the h×w window at (top, left) back to the full image size.
std::vector<float> resized_crop(std::span<const float> img, const ImageShape& s, std::size_t top, std::size_t left,
                                std::size_t h, std::size_t w) {
  std::vector<float> out(img.size());
  const double sy = static_cast<double>(h) / static_cast<double>(s.height);
  const double sx = static_cast<double>(w) / static_cast<double>(s.width);
  for (std::size_t y = 0; y < s.height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const auto y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < s.width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const auto x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < s.channels; ++c) {
        const float* plane = img.data() + c * s.height * s.width;
        auto px = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(plane[(top + yy) * s.width + left + xx]);
        };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                         wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out[c * s.height * s.width + y * s.width + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

std::vector<float> random_resized_crop(std::span<const float> img, const ImageShape& s, double scale_min,
                                       double scale_max, Rng& rng) {
  const double area = static_cast<double>(s.height * s.width);
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * uniform(rng, scale_min, scale_max);
    const double aspect = std::exp(uniform(rng, log_lo, log_hi));
    const auto w = static_cast<long>(std::lround(std::sqrt(target * aspect)));
    const auto h = static_cast<long>(std::lround(std::sqrt(target / aspect)));
    if (w > 0 && h > 0 && w <= static_cast<long>(s.width) && h <= static_cast<long>(s.height)) {
      const auto top = std::uniform_int_distribution<long>(0, static_cast<long>(s.height) - h)(rng);
      const auto left = std::uniform_int_distribution<long>(0, static_cast<long>(s.width) - w)(rng);
      return resized_crop(img, s, static_cast<std::size_t>(top), static_cast<std::size_t>(left),
                          static_cast<std::size_t>(h), static_cast<std::size_t>(w));
    }
  }
  return {img.begin(), img.end()};
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double hi = std::max({r, g, b}), lo = std::min({r, g, b});
  const double delta = hi - lo;
  v = hi;
  s = hi > 0.0 ? delta / hi : 0.0;
  if (delta <= 0.0) {
    h = 0.0;
    return;
  }
  if (hi == r) {
    h = (g - b) / delta;
  } else if (hi == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h = std::fmod(h / 6.0 + 1.0, 1.0);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double sector = h * 6.0;
  const int i = static_cast<int>(std::floor(sector)) % 6;
  const double f = sector - std::floor(sector);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void color_jitter(std::vector<float>& img, const ImageShape& s, const AugmentationConfig& cfg, Rng& rng) {
  const std::size_t plane = s.height * s.width;
  auto clamp01 = [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); };
  auto luma = [&](std::size_t i) { return 0.299 * img[i] + 0.587 * img[plane + i] + 0.114 * img[2 * plane + i]; };

  const double brightness = uniform(rng, std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  const double contrast = uniform(rng, std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  const double saturation = uniform(rng, std::max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation);
  const double hue = uniform(rng, -cfg.hue, cfg.hue);

  for (auto& v : img) v = clamp01(v * brightness);

  double mean_luma = 0.0;
  for (std::size_t i = 0; i < plane; ++i) mean_luma += luma(i);
  mean_luma /= static_cast<double>(plane);
  for (auto& v : img) v = clamp01((v - mean_luma) * contrast + mean_luma);

  for (std::size_t i = 0; i < plane; ++i) {
    const double gray = luma(i);
    for (std::size_t c = 0; c < 3; ++c) img[c * plane + i] = clamp01((img[c * plane + i] - gray) * saturation + gray);
  }

  if (hue != 0.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      double h, sat, val, r, g, b;
      rgb_to_hsv(img[i], img[plane + i], img[2 * plane + i], h, sat, val);
      h = std::fmod(h + hue + 1.0, 1.0);
      hsv_to_rgb(h, sat, val, r, g, b);
      img[i] = clamp01(r);
      img[plane + i] = clamp01(g);
      img[2 * plane + i] = clamp01(b);
    }
  }
}

std::size_t reflect(long i, long n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

void gaussian_blur(std::vector<float>& img, const ImageShape& s, double sigma) {
  auto ksize = static_cast<long>(std::ceil(6.0 * sigma));
  if (ksize % 2 == 0) ++ksize;
  const long radius = ksize / 2;
  std::vector<double> kernel(static_cast<std::size_t>(ksize));
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * double(k * k) / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (auto& k : kernel) k /= total;

  const long H = static_cast<long>(s.height), W = static_cast<long>(s.width);
  std::vector<float> tmp(img.size());
  for (std::size_t c = 0; c < s.channels; ++c) {
    float* p = img.data() + c * s.height * s.width;
    float* t = tmp.data() + c * s.height * s.width;
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * p[y * W + static_cast<long>(reflect(x + k, W))];
        t[y * W + x] = static_cast<float>(acc);
      }
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * t[static_cast<long>(reflect(y + k, H)) * W + x];
        p[y * W + x] = static_cast<float>(acc);
      }
  }
}

}  // namespace

Tensor<float> LabeledDataset::rows(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * sample_dim);
  for (auto i : indices) {
    if (i >= size()) throw DimensionError("sample index " + std::to_string(i) + " out of range");
    auto s = sample(i);
    out.insert(out.end(), s.begin(), s.end());
  }
  return Tensor<float>(Shape{indices.size(), sample_dim}, std::move(out));
}

Tensor<float> LabeledDataset::all_rows() const {
  return Tensor<float>(Shape{size(), sample_dim}, samples);
}

void LabeledDataset::validate() const {
  if (sample_dim == 0) throw ContractError("dataset sample_dim must be positive");
  if (samples.size() != labels.size() * sample_dim) throw DimensionError("dataset samples and labels disagree");
  for (int l : labels)
    if (l < 0 || l >= num_classes) throw ContractError("label " + std::to_string(l) + " outside [0, num_classes)");
  if (image && image->numel() != sample_dim) throw DimensionError("image shape does not match sample_dim");
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig cfg;
  cfg.crop_scale_min = cfg.crop_scale_max = 1.0;
  cfg.flip_prob = cfg.jitter_prob = cfg.grayscale_prob = cfg.blur_prob = 0.0;
  cfg.noise_std = 0.0;
  cfg.scale_min = cfg.scale_max = 1.0;
  cfg.mask_prob = 0.0;
  return cfg;
}

void AugmentationConfig::validate() const {
  require_probability(flip_prob, "flip_prob");
  require_probability(jitter_prob, "jitter_prob");
  require_probability(grayscale_prob, "grayscale_prob");
  require_probability(blur_prob, "blur_prob");
  require_probability(mask_prob, "mask_prob");
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0)) {
    throw ContractError("crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max)) throw ContractError("bad blur sigma range");
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0 || hue > 0.5) {
    throw ContractError("jitter strengths must be nonnegative and hue at most 0.5");
  }
  for (double s : channel_std)
    if (!(s > 0.0)) throw ContractError("channel std must be positive");
  if (noise_std < 0.0) throw ContractError("noise_std must be nonnegative");
  if (scale_min > scale_max) throw ContractError("scale range must satisfy min <= max");
}

LabeledDataset generate_gaussian_mixture(int num_classes, std::size_t per_class, std::size_t dim, double separation,
                                         std::uint64_t seed) {
  if (num_classes < 1 || per_class == 0 || dim == 0) throw ContractError("mixture sizes must be positive");
  if (separation < 0.0) throw ContractError("separation must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> centers(static_cast<std::size_t>(num_classes) * dim);
  for (int c = 0; c < num_classes; ++c) {
    double* center = centers.data() + static_cast<std::size_t>(c) * dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      center[j] = normal(rng);
      sq += center[j] * center[j];
    }
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < dim; ++j) center[j] = norm > 0 ? separation * center[j] / norm : 0.0;
  }

  LabeledDataset ds;
  ds.name = "gaussian_mixture";
  ds.sample_dim = dim;
  ds.num_classes = num_classes;
  ds.samples.reserve(static_cast<std::size_t>(num_classes) * per_class * dim);
  for (int c = 0; c < num_classes; ++c) {
    const double* center = centers.data() + static_cast<std::size_t>(c) * dim;
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t j = 0; j < dim; ++j) ds.samples.push_back(static_cast<float>(center[j] + normal(rng)));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

LabeledDataset read_cifar10_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(file.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                      std::to_string(kCifarRecordBytes));
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  LabeledDataset ds;
  ds.name = "cifar10";
  ds.image = ImageShape{32, 32, 3};
  ds.sample_dim = kCifarRecordBytes - 1;
  ds.num_classes = 10;
  ds.samples.resize(records * ds.sample_dim);
  ds.labels.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError(file.string() + ": record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
    }
    ds.labels[r] = rec[0];
    for (std::size_t j = 0; j < ds.sample_dim; ++j)
      ds.samples[r * ds.sample_dim + j] = static_cast<float>(rec[1 + j]) / 255.0f;
  }
  return ds;
}

namespace {

void append(LabeledDataset& into, LabeledDataset&& part) {
  if (into.labels.empty()) {
    into = std::move(part);
    return;
  }
  into.samples.insert(into.samples.end(), part.samples.begin(), part.samples.end());
  into.labels.insert(into.labels.end(), part.labels.begin(), part.labels.end());
}

}  // namespace

LabeledDataset load_cifar10_binary(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) return read_cifar10_file(path);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path))
    if (entry.is_regular_file() && entry.path().extension() == ".bin") files.push_back(entry.path());
  if (files.empty()) throw FormatError("no .bin files in " + path.string());
  std::sort(files.begin(), files.end());
  LabeledDataset ds;
  for (const auto& f : files) append(ds, read_cifar10_file(f));
  return ds;
}

LabeledDataset load_cifar10_split(const std::filesystem::path& dir, CifarSplit split) {
  LabeledDataset ds;
  if (split == CifarSplit::kTest) return read_cifar10_file(dir / "test_batch.bin");
  for (int i = 1; i <= 5; ++i) append(ds, read_cifar10_file(dir / ("data_batch_" + std::to_string(i) + ".bin")));
  return ds;
}

void write_cifar10_file(const std::filesystem::path& file, const LabeledDataset& ds) {
  if (ds.sample_dim != kCifarRecordBytes - 1) throw DimensionError("CIFAR records hold 3072 pixel values");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file.string());
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds.labels[r] < 0 || ds.labels[r] > 9) throw ContractError("CIFAR labels must lie in 0..9");
    rec[0] = static_cast<unsigned char>(ds.labels[r]);
    auto s = ds.sample(r);
    for (std::size_t j = 0; j < s.size(); ++j)
      rec[1 + j] = static_cast<unsigned char>(std::lround(std::clamp(s[j], 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
}

void write_dataset_csv(const std::filesystem::path& file, const LabeledDataset& ds) {
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write " + file.string());
  out << "label";
  for (std::size_t j = 0; j < ds.sample_dim; ++j) out << ",x" << j;
  out << '\n';
  out.precision(9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (float v : ds.sample(i)) out << ',' << v;
    out << '\n';
  }
}

LabeledDataset read_dataset_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw FormatError(file.string() + ": missing header");
  LabeledDataset ds;
  ds.name = file.stem().string();
  ds.sample_dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (ds.sample_dim == 0) throw FormatError(file.string() + ": no feature columns");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<float> values;
    int label = -1;
    bool first = true;
    while (std::getline(row, cell, ',')) {
      try {
        if (first) {
          label = std::stoi(cell);
          first = false;
        } else {
          values.push_back(std::stof(cell));
        }
      } catch (const std::exception&) {
        throw FormatError(file.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (values.size() != ds.sample_dim || label < 0) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(ds.sample_dim) + " features");
    }
    ds.labels.push_back(label);
    ds.samples.insert(ds.samples.end(), values.begin(), values.end());
    ds.num_classes = std::max(ds.num_classes, label + 1);
  }
  return ds;
}

std::pair<std::array<double, 3>, std::array<double, 3>> channel_statistics(const LabeledDataset& ds) {
  if (!ds.image || ds.image->channels != 3) throw ContractError("channel statistics need a 3-channel image dataset");
  const std::size_t plane = ds.image->height * ds.image->width;
  std::array<double, 3> sum{}, sq{};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto s = ds.sample(i);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = s[c * plane + p];
        sum[c] += v;
        sq[c] += v * v;
      }
  }
  const double count = static_cast<double>(ds.size() * plane);
  std::array<double, 3> mean{}, stddev{};
  for (std::size_t c = 0; c < 3; ++c) {
    mean[c] = sum[c] / count;
    stddev[c] = std::sqrt(std::max(sq[c] / count - mean[c] * mean[c], 1e-12));
  }
  return {mean, stddev};
}

std::vector<float> flip_horizontal(std::span<const float> image, const ImageShape& shape) {
  if (image.size() != shape.numel()) throw DimensionError("image has the wrong number of values");
  std::vector<float> out(image.size());
  for (std::size_t c = 0; c < shape.channels; ++c)
    for (std::size_t y = 0; y < shape.height; ++y)
      for (std::size_t x = 0; x < shape.width; ++x) {
        const auto base = (c * shape.height + y) * shape.width;
        out[base + x] = image[base + shape.width - 1 - x];
      }
  return out;
}

std::vector<float> to_grayscale(std::span<const float> image, const ImageShape& shape) {
  if (image.size() != shape.numel() || shape.channels != 3) throw DimensionError("grayscale needs an RGB image");
  const std::size_t plane = shape.height * shape.width;
  std::vector<float> out(image.size());
  for (std::size_t i = 0; i < plane; ++i) {
    const auto gray = static_cast<float>(0.299 * image[i] + 0.587 * image[plane + i] + 0.114 * image[2 * plane + i]);
    out[i] = out[plane + i] = out[2 * plane + i] = gray;
  }
  return out;
}

std::vector<float> augment_image(std::span<const float> image, const ImageShape& shape,
                                 const AugmentationConfig& cfg, Rng& rng) {
  if (image.size() != shape.numel()) {
    throw DimensionError("augment_image: " + std::to_string(image.size()) + " values do not form a " +
                         std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
                         std::to_string(shape.channels) + " image");
  }
  std::vector<float> img = random_resized_crop(image, shape, cfg.crop_scale_min, cfg.crop_scale_max, rng);
  if (coin(rng, cfg.flip_prob)) img = flip_horizontal(img, shape);
  if (shape.channels == 3 && coin(rng, cfg.jitter_prob)) color_jitter(img, shape, cfg, rng);
  if (shape.channels == 3 && coin(rng, cfg.grayscale_prob)) img = to_grayscale(img, shape);
  if (coin(rng, cfg.blur_prob)) gaussian_blur(img, shape, uniform(rng, cfg.blur_sigma_min, cfg.blur_sigma_max));
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const double m = cfg.channel_mean[std::min<std::size_t>(c, 2)];
    const double s = cfg.channel_std[std::min<std::size_t>(c, 2)];
    for (std::size_t p = 0; p < plane; ++p) img[c * plane + p] = static_cast<float>((img[c * plane + p] - m) / s);
  }
  return img;
}

std::vector<float> augment_vector(std::span<const float> x, const AugmentationConfig& cfg, Rng& rng) {
  const double s = uniform(rng, cfg.scale_min, cfg.scale_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] * s + cfg.noise_std * noise(rng));
  if (cfg.mask_prob > 0.0) {
    for (auto& v : out)
      if (coin(rng, cfg.mask_prob)) v = 0.0f;
  }
  return out;
}

ViewBatch make_view_batch(const LabeledDataset& ds, std::span<const std::size_t> indices,
                          const AugmentationConfig& cfg, Rng& rng) {
  const std::size_t b = indices.size();
  if (b == 0) throw ContractError("make_view_batch: empty index list");
  std::vector<float> va, vb;
  va.reserve(b * ds.sample_dim);
  vb.reserve(b * ds.sample_dim);
  for (auto idx : indices) {
    if (idx >= ds.size()) throw DimensionError("make_view_batch: index " + std::to_string(idx) + " out of range");
    auto x = ds.sample(idx);
    auto a = ds.image ? augment_image(x, *ds.image, cfg, rng) : augment_vector(x, cfg, rng);
    auto p = ds.image ? augment_image(x, *ds.image, cfg, rng) : augment_vector(x, cfg, rng);
    va.insert(va.end(), a.begin(), a.end());
    vb.insert(vb.end(), p.begin(), p.end());
  }
  return {Tensor<float>(Shape{b, ds.sample_dim}, std::move(va)), Tensor<float>(Shape{b, ds.sample_dim}, std::move(vb)),
          std::vector<std::size_t>(indices.begin(), indices.end())};
}

Rng batch_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(batch_index), 0x76696577u};
  return Rng(seq);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0) throw ContractError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x73687566u};
  Rng rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start + batch_size <= n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(start + batch_size));
  return batches;
}

}  // namespace carl
