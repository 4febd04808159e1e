#include "sfnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::string& what) {
  if (buf.size() < offset + 4) throw IoError(what + ": truncated header");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw IoError(where + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void validate_dataset(const Dataset& d) {
  if (d.inputs.rows() != d.targets.rows()) throw ValidationError("dataset: input and target row counts differ");
  if (!d.inputs.all_finite() || !d.targets.all_finite()) throw ValidationError("dataset: non-finite value");
  if (d.task == TaskKind::Classification) {
    if (d.targets.cols() != 1) throw ValidationError("dataset: class targets must be a single column");
    for (double v : d.targets.values()) {
      if (v < 0 || v >= static_cast<double>(d.classes) || v != std::floor(v)) {
        throw ValidationError("dataset: class label out of range");
      }
    }
  }
}

void check_compatible(const Dataset& d, const NetworkSpec& spec) {
  validate_dataset(d);
  if (d.inputs.cols() != spec.input_dim) {
    throw ValidationError("dataset has " + std::to_string(d.inputs.cols()) + " input columns, network expects " +
                          std::to_string(spec.input_dim));
  }
  if (const auto* sm = std::get_if<SoftmaxHead>(&spec.output)) {
    if (d.task != TaskKind::Classification || d.classes > sm->classes) {
      throw ValidationError("dataset does not match the softmax head");
    }
  } else if (d.task != TaskKind::Regression || d.targets.cols() != output_dim(spec.output)) {
    throw ValidationError("dataset does not match the gaussian head");
  }
}

Dataset take_rows(const Dataset& d, std::size_t first, std::size_t count) {
  return {d.inputs.slice_rows(first, count), d.targets.slice_rows(first, count), d.task, d.classes};
}

Dataset gen_synthetic(std::size_t n, double noise, RngStream rng) {
  if (n == 0) throw ValidationError("synthetic dataset needs n >= 1");
  if (!(noise >= 0.0)) throw ValidationError("synthetic noise must be non-negative");
  Dataset d{Matrix(n, 1), Matrix(n, 1), TaskKind::Regression, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.uniform();
    const double eps = rng.uniform(-noise, noise);
    d.inputs(i, 0) = t + 0.3 * std::sin(2.0 * std::numbers::pi * t) + eps;
    d.targets(i, 0) = t;
  }
  return d;
}

SyntheticSplits gen_synthetic(const SyntheticConfig& config) {
  const RngStream base(config.seed);
  return {gen_synthetic(config.n_train, config.noise, base.split(0)),
          gen_synthetic(config.n_test, config.noise, base.split(1))};
}

void write_csv(const Dataset& d, const std::filesystem::path& path, const std::string& comment) {
  if (d.inputs.cols() != 1 || d.targets.cols() != 1) throw ValidationError("CSV export needs 1-d inputs and targets");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,t\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << format_double(d.inputs(i, 0)) << ',' << format_double(d.targets(i, 0)) << '\n';
  }
  if (!comment.empty()) out << "# " << comment << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  bool header = false;
  std::vector<double> xs, ts;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "x,t") throw IoError(path.string() + ": expected header 'x,t'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    xs.push_back(parse_double(std::string_view(line).substr(0, comma), where));
    ts.push_back(parse_double(std::string_view(line).substr(comma + 1), where));
  }
  if (!header) throw IoError(path.string() + ": missing header 'x,t'");
  const std::size_t n = xs.size();
  return {Matrix(n, 1, std::move(xs)), Matrix(n, 1, std::move(ts)), TaskKind::Regression, 0};
}

Matrix load_idx_images(const std::filesystem::path& images) {
  const auto buf = read_file(images);
  const std::string what = images.string();
  const std::uint32_t magic = read_be32(buf, 0, what);
  if (magic != kImageMagic) {
    throw IoError(what + ": bad image magic " + std::to_string(magic) + " (expected 2051)");
  }
  const std::size_t n = read_be32(buf, 4, what);
  const std::size_t rows = read_be32(buf, 8, what);
  const std::size_t cols = read_be32(buf, 12, what);
  const std::size_t dim = rows * cols;
  if (buf.size() != 16 + n * dim) {
    throw IoError(what + ": payload is " + std::to_string(buf.size() - 16) + " bytes, expected " +
                  std::to_string(n * dim));
  }
  Matrix out(n, dim);
  for (std::size_t i = 0; i < n * dim; ++i) out.values()[i] = static_cast<double>(buf[16 + i]) / 255.0;
  return out;
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& labels) {
  const auto buf = read_file(labels);
  const std::string what = labels.string();
  const std::uint32_t magic = read_be32(buf, 0, what);
  if (magic != kLabelMagic) {
    throw IoError(what + ": bad label magic " + std::to_string(magic) + " (expected 2049)");
  }
  const std::size_t n = read_be32(buf, 4, what);
  if (buf.size() != 8 + n) throw IoError(what + ": truncated or oversized label payload");
  return {buf.begin() + 8, buf.end()};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Matrix x = load_idx_images(images);
  const auto y = load_idx_labels(labels);
  if (y.size() != x.rows()) {
    throw IoError("IDX count mismatch: " + std::to_string(x.rows()) + " images, " + std::to_string(y.size()) +
                  " labels");
  }
  Matrix t(y.size(), 1);
  std::size_t classes = 10;
  for (std::size_t i = 0; i < y.size(); ++i) {
    t(i, 0) = y[i];
    classes = std::max<std::size_t>(classes, std::size_t{y[i]} + 1);
  }
  return {std::move(x), std::move(t), TaskKind::Classification, classes};
}

void save_idx(const Dataset& d, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (d.task != TaskKind::Classification || d.inputs.cols() != 784) {
    throw ValidationError("IDX export needs a 784-pixel classification dataset");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write IDX files");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(d.size()));
  put_be32(img, 28);
  put_be32(img, 28);
  for (double v : d.inputs.values()) img.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (double v : d.targets.values()) lab.put(static_cast<char>(static_cast<std::uint8_t>(v)));
  if (!img || !lab) throw IoError("IDX write failed");
}

Dataset binarize(const Dataset& d, double threshold) {
  Dataset out = d;
  for (double& v : out.inputs.values()) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

Dataset split_half_digit(const Dataset& d) {
  if (d.inputs.cols() != 784) throw ValidationError("half-digit split needs 784-pixel rows");
  const std::size_t n = d.size();
  Dataset out{Matrix(n, 392), Matrix(n, 392), TaskKind::Regression, 0};
  for (std::size_t i = 0; i < n; ++i) {
    auto src = d.inputs.row(i);
    std::copy(src.begin(), src.begin() + 392, out.inputs.row(i).begin());
    std::copy(src.begin() + 392, src.end(), out.targets.row(i).begin());
  }
  return out;
}

std::pair<Dataset, Dataset> train_val_split(const Dataset& d, std::size_t n_val) {
  if (n_val >= d.size()) throw ValidationError("validation split must be smaller than the dataset");
  const std::size_t n_train = d.size() - n_val;
  return {take_rows(d, 0, n_train), take_rows(d, n_train, n_val)};
}

}  // namespace sfnn
