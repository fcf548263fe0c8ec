#include "kanol/streams.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kanol {

namespace {

double radians(double degrees) noexcept { return degrees * std::numbers::pi / 180.0; }

}  // namespace

double RegressionStream::target(std::size_t t, double x) noexcept {
  switch (regime(t)) {
    case 0: return std::sin(x) + 0.3 * x * x;
    case 1: return -std::cos(2.0 * x) + 0.1 * x * x * x + 1.0;
    default: return std::exp(-0.5 * (x - 1.0) * (x - 1.0)) + 0.05 * x * x * x;
  }
}

std::optional<StreamSample> RegressionStream::next() {
  if (t_ >= kLength) return std::nullopt;
  StreamSample s;
  s.t = t_;
  const double x = rng_.uniform(-1.0, 1.0);
  s.x = {x};
  s.target = {target(t_, x)};
  s.latent = {static_cast<double>(regime(t_))};
  ++t_;
  return s;
}

void XorStreamConfig::validate() const {
  for (const double v : {spread, noise_scale, kerr_strength, drift_speed, breathing_amplitude,
                         breathing_frequency}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("rotating_xor parameters must be finite and nonnegative");
    }
  }
}

int xor_label(int blob) noexcept { return blob <= 1 ? -1 : 1; }

std::array<double, 2> xor_center(int blob, double spread) noexcept {
  switch (blob) {
    case 0: return {spread, spread};
    case 1: return {-spread, -spread};
    case 2: return {-spread, spread};
    default: return {spread, -spread};
  }
}

std::array<double, 2> xor_point(const XorStreamConfig& cfg, std::size_t t, int blob,
                                std::pair<double, double> unit_noise) noexcept {
  const auto mu = xor_center(blob, cfg.spread);
  double i = mu[0] + cfg.noise_scale * unit_noise.first;
  double q = mu[1] + cfg.noise_scale * unit_noise.second;

  const double r = std::hypot(i, q);
  const double phi = std::atan2(q, i) + cfg.kerr_strength * r * r;
  i = r * std::cos(phi);
  q = r * std::sin(phi);

  const double td = static_cast<double>(t);
  const double breathe = 1.0 + cfg.breathing_amplitude * std::sin(cfg.breathing_frequency * td);
  i *= breathe;
  q *= breathe;

  const double theta = radians(td * cfg.drift_speed);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * i - s * q, s * i + c * q};
}

RotatingXorStream::RotatingXorStream(const XorStreamConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
}

std::optional<StreamSample> RotatingXorStream::next() {
  const int blob = static_cast<int>(rng_.next() >> 62);
  const auto noise = rng_.gaussian_pair();
  const auto p = xor_point(cfg_, t_, blob, noise);
  StreamSample s;
  s.t = t_;
  s.x = {p[0], p[1]};
  s.label = xor_label(blob);
  s.target = {static_cast<double>(s.label)};
  s.latent = {static_cast<double>(blob), static_cast<double>(t_) * cfg_.drift_speed,
              1.0 + cfg_.breathing_amplitude *
                        std::sin(cfg_.breathing_frequency * static_cast<double>(t_))};
  ++t_;
  return s;
}

DigitsDataset DigitsDataset::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open digits file '" + path.string() + "'");
  DigitsDataset data;
  std::string line;
  std::size_t row = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("digits file '" + path.string() + "' row " + std::to_string(row) +
                             ": " + what);
  };
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<int> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const char* first = line.data() + pos;
      const char* last = line.data() + comma;
      while (first < last && *first == ' ') ++first;
      while (last > first && last[-1] == ' ') --last;
      int v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || ptr != last || first == last) {
        fail("field " + std::to_string(fields.size() + 1) + " is not an integer");
      }
      fields.push_back(v);
      pos = comma + 1;
    }
    if (fields.size() != kDigitPixels + 1) {
      fail("expected 65 columns, found " + std::to_string(fields.size()));
    }
    DigitImage img{};
    for (int k = 0; k < kDigitPixels; ++k) {
      if (fields[k] < 0 || fields[k] > 16) {
        fail("pixel " + std::to_string(k + 1) + " outside [0, 16]");
      }
      img[k] = fields[k] / 16.0;
    }
    const int label = fields.back();
    if (label < 0 || label > 9) fail("label outside [0, 9]");
    data.images.push_back(img);
    data.labels.push_back(label);
  }
  if (data.images.empty()) throw std::runtime_error("digits file '" + path.string() + "' is empty");
  return data;
}

DigitImage rotate_image(const DigitImage& pixels, double degrees) noexcept {
  const auto [lo_it, hi_it] = std::minmax_element(pixels.begin(), pixels.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double th = radians(degrees);
  const double c = std::cos(th);
  const double s = std::sin(th);
  constexpr double center = (kDigitSide - 1) / 2.0;

  auto at = [&](int row, int col) {
    if (row < 0 || row >= kDigitSide || col < 0 || col >= kDigitSide) return 0.0;
    return pixels[static_cast<std::size_t>(row * kDigitSide + col)];
  };

  DigitImage out{};
  for (int row = 0; row < kDigitSide; ++row) {
    for (int col = 0; col < kDigitSide; ++col) {
      const double dx = col - center;
      const double dy = row - center;
      // Inverse rotation maps the output pixel back into the source image.
      const double sx = c * dx + s * dy + center;
      const double sy = -s * dx + c * dy + center;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      double v = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                 ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
      out[static_cast<std::size_t>(row * kDigitSide + col)] = std::clamp(v, lo, hi);
    }
  }
  return out;
}

void DigitsStreamConfig::validate() const {
  if (stationary_epochs < 0 || rotating_epochs < 0) {
    throw std::invalid_argument("digits epochs must be >= 0");
  }
  if (!std::isfinite(rotation_rate)) throw std::invalid_argument("rotation_rate must be finite");
}

DigitsStream::DigitsStream(std::shared_ptr<const DigitsDataset> data,
                           const DigitsStreamConfig& cfg)
    : data_(std::move(data)), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  if (!data_ || data_->size() == 0) throw std::invalid_argument("digits stream needs data");
  order_.resize(data_->size());
}

std::optional<std::size_t> DigitsStream::length() const {
  return data_->size() * static_cast<std::size_t>(cfg_.stationary_epochs + cfg_.rotating_epochs);
}

std::size_t DigitsStream::stationary_steps() const noexcept {
  return data_->size() * static_cast<std::size_t>(cfg_.stationary_epochs);
}

double DigitsStream::angle_at(std::size_t t) const noexcept {
  const std::size_t start = stationary_steps();
  return t < start ? 0.0 : cfg_.rotation_rate * static_cast<double>(t - start);
}

void DigitsStream::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_.below(i)]);
  }
}

std::optional<StreamSample> DigitsStream::next() {
  if (t_ >= *length()) return std::nullopt;
  const std::size_t n = data_->size();
  if (t_ % n == 0) reshuffle();
  const std::size_t row = order_[t_ % n];
  const double angle = angle_at(t_);
  const DigitImage& src = data_->images[row];
  const DigitImage img = angle == 0.0 ? src : rotate_image(src, angle);
  StreamSample s;
  s.t = t_;
  s.x.assign(img.begin(), img.end());
  s.label = data_->labels[row];
  s.latent = {angle, static_cast<double>(row)};
  ++t_;
  return s;
}

}  // namespace kanol
