#pragma once

// Deterministic non-stationary data streams.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kanol/model.hpp"
#include "kanol/rng.hpp"

namespace kanol {

struct StreamSample {
  std::size_t t = 0;
  std::vector<double> x;
  std::vector<double> target;  // regression value or +-1; empty for class labels
  int label = 0;               // class label (+-1 for binary, 0..9 for digits)
  std::vector<double> latent;  // generator state for diagnostics
};

class Stream {
 public:
  virtual ~Stream() = default;
  // nullopt once a finite stream is exhausted.
  virtual std::optional<StreamSample> next() = 0;
  // nullopt for unbounded streams.
  virtual std::optional<std::size_t> length() const = 0;
  virtual Task task() const noexcept = 0;
  virtual int input_dim() const noexcept = 0;
};

// Three-regime drifting regression on x ~ U[-1, 1], regimes switch at t = 500
// and t = 1000.
class RegressionStream final : public Stream {
 public:
  static constexpr std::size_t kLength = 1500;

  explicit RegressionStream(std::uint64_t seed) : rng_(seed) {}

  static double target(std::size_t t, double x) noexcept;
  static int regime(std::size_t t) noexcept { return t < 500 ? 0 : (t < 1000 ? 1 : 2); }

  std::optional<StreamSample> next() override;
  std::optional<std::size_t> length() const override { return kLength; }
  Task task() const noexcept override { return Task::regression; }
  int input_dim() const noexcept override { return 1; }

 private:
  Rng rng_;
  std::size_t t_ = 0;
};

struct XorStreamConfig {
  double spread = 1.5;
  double noise_scale = 0.4;
  double kerr_strength = 0.4;
  double drift_speed = 0.05;  // degrees per step
  double breathing_amplitude = 0.2;
  double breathing_frequency = 0.01;
  std::uint64_t seed = 0;

  void validate() const;  // all parameters must be finite and nonnegative
};

// Label of blob s: -1 for s in {0, 1}, +1 for s in {2, 3}.
int xor_label(int blob) noexcept;
// Blob centers (+,+), (-,-), (-,+), (+,-) scaled by spread.
std::array<double, 2> xor_center(int blob, double spread) noexcept;
// One generator step for a given blob and standard-normal noise pair:
// noise -> Kerr twist -> breathing -> rotation.
std::array<double, 2> xor_point(const XorStreamConfig& cfg, std::size_t t, int blob,
                                std::pair<double, double> unit_noise) noexcept;

// Rotating XOR constellation with Kerr phase distortion; unbounded.
class RotatingXorStream final : public Stream {
 public:
  explicit RotatingXorStream(const XorStreamConfig& cfg);

  std::optional<StreamSample> next() override;
  std::optional<std::size_t> length() const override { return std::nullopt; }
  Task task() const noexcept override { return Task::binary; }
  int input_dim() const noexcept override { return 2; }

 private:
  XorStreamConfig cfg_;
  Rng rng_;
  std::size_t t_ = 0;
};

inline constexpr int kDigitSide = 8;
inline constexpr int kDigitPixels = kDigitSide * kDigitSide;
using DigitImage = std::array<double, kDigitPixels>;

// Rows of 64 integer features in [0, 16] followed by a label in [0, 9].
// Features are stored divided by 16.
struct DigitsDataset {
  std::vector<DigitImage> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return images.size(); }
  // Throws std::runtime_error naming the file and row on any defect.
  static DigitsDataset load(const std::filesystem::path& path);
};

// Inverse-mapped bilinear rotation about the image center (3.5, 3.5) by
// `degrees` counter-clockwise with x = column and y = row. Pixels sampled
// outside the image read as 0; the result is clipped to the input's range.
DigitImage rotate_image(const DigitImage& pixels, double degrees) noexcept;

struct DigitsStreamConfig {
  std::string path;
  int stationary_epochs = 2;
  int rotating_epochs = 8;
  double rotation_rate = 0.005;  // degrees per step
  std::uint64_t seed = 0;

  void validate() const;
};

// Shuffled epochs, unrotated first; during the rotating epochs the image at
// step t is rotated by rotation_rate * (t - first rotating step) degrees.
class DigitsStream final : public Stream {
 public:
  DigitsStream(std::shared_ptr<const DigitsDataset> data, const DigitsStreamConfig& cfg);

  std::optional<StreamSample> next() override;
  std::optional<std::size_t> length() const override;
  Task task() const noexcept override { return Task::multiclass; }
  int input_dim() const noexcept override { return kDigitPixels; }

  std::size_t stationary_steps() const noexcept;
  double angle_at(std::size_t t) const noexcept;

 private:
  void reshuffle();

  std::shared_ptr<const DigitsDataset> data_;
  DigitsStreamConfig cfg_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t t_ = 0;
};

}  // namespace kanol
