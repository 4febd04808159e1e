#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "sfnn/matrix.hpp"
#include "sfnn/network.hpp"
#include "sfnn/rng.hpp"

namespace sfnn {

enum class TaskKind { Classification, Regression };

// Inputs and targets, one example per row. Classification targets are an
// n x 1 matrix of class indices in [0, classes).
struct Dataset {
  Matrix inputs;
  Matrix targets;
  TaskKind task = TaskKind::Regression;
  std::size_t classes = 0;

  std::size_t size() const { return inputs.rows(); }
};

// Throws ValidationError when rows disagree or labels are out of range.
void validate_dataset(const Dataset& d);
// Throws ValidationError unless `d` fits the network's input and output.
void check_compatible(const Dataset& d, const NetworkSpec& spec);

// Rows [first, first + count).
Dataset take_rows(const Dataset& d, std::size_t first, std::size_t count);

struct SyntheticConfig {
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double noise = 0.1;  // half-width of the uniform input noise
  std::uint64_t seed = 1;
};

// t ~ U(0, 1), x = t + 0.3 sin(2 pi t) + U(-noise, noise); input x, target t.
Dataset gen_synthetic(std::size_t n, double noise, RngStream rng);

struct SyntheticSplits {
  Dataset train;
  Dataset test;
};

// Train and test draw from disjoint child streams of the seed.
SyntheticSplits gen_synthetic(const SyntheticConfig& config);

// CSV with header `x,t`. Lines starting with '#' are comments; `comment`
// (if non-empty) is written as a trailing comment line.
void write_csv(const Dataset& d, const std::filesystem::path& path, const std::string& comment = {});
Dataset read_csv(const std::filesystem::path& path);

// Big-endian IDX: images magic 2051 (n x rows x cols bytes), labels magic 2049.
// Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Matrix load_idx_images(const std::filesystem::path& images);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& labels);
// Writes a classification dataset with 784-pixel rows; pixels become round(255 v).
void save_idx(const Dataset& d, const std::filesystem::path& images, const std::filesystem::path& labels);

// pixel >= threshold -> 1, else 0.
Dataset binarize(const Dataset& d, double threshold = 0.5);

// Upper 14 rows of a 28 x 28 image as input, lower 14 rows as a regression target.
Dataset split_half_digit(const Dataset& d);

// Tail split without shuffling: the last n_val rows become validation.
std::pair<Dataset, Dataset> train_val_split(const Dataset& d, std::size_t n_val);

}  // namespace sfnn
