#pragma once

// Experiment configuration: JSON documents (comments allowed) validated into
// typed blocks. Unknown keys anywhere are an error.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kanol/model.hpp"
#include "kanol/numerics.hpp"
#include "kanol/streams.hpp"

namespace kanol {

using Json = nlohmann::ordered_json;

// Anything wrong with a config document: syntax, schema, or values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StreamKind { regression, rotating_xor, digits };

struct StreamBlock {
  StreamKind kind = StreamKind::regression;
  std::optional<std::uint64_t> seed;  // default: derive_seed(seed, "stream")
  XorStreamConfig xor_params;
  DigitsStreamConfig digits;  // digits.path empty -> resolved from the environment
};

struct ModelBlock {
  ModelKind type = ModelKind::kan;
  std::vector<int> dims;
  std::string input_format = "float";
  std::string weight_format = "float";
  std::string output_format = "float";
  std::optional<std::uint64_t> init_seed;  // default: derive_seed(seed, "init")
  KanSpec kan;
  MlpSpec mlp;

  Numerics numerics() const;
};

struct TrainerBlock {
  std::optional<std::size_t> steps;  // default: the stream length
  double lr = 0.01;
  LossKind loss = LossKind::squared_error;
  std::size_t window = 0;
  // Absolute step, or the end of the stationary digits epochs.
  std::optional<std::size_t> freeze_after;
  bool freeze_after_stationary = false;
};

struct BoundaryBlock {
  int resolution = 101;
  double lo = -4.0;
  double hi = 4.0;
  std::vector<std::size_t> at;  // snapshot before these steps; the end of the run is always dumped
};

struct OutputBlock {
  std::string dir;  // default: runs/<name>
  bool step_csv = true;
  std::optional<BoundaryBlock> boundary;
};

enum class SweepMode { cartesian, zip };

struct SweepBlock {
  SweepMode mode = SweepMode::cartesian;
  std::vector<std::pair<std::string, std::vector<Json>>> axes;  // dotted path -> values
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  StreamBlock stream;
  ModelBlock model;
  TrainerBlock trainer;
  OutputBlock output;
  std::optional<SweepBlock> sweep;

  std::uint64_t stream_seed() const;
  std::uint64_t init_seed() const;
};

// Reads and parses a file; throws ConfigError naming the file.
Json read_config_file(const std::filesystem::path& path);
Json parse_config_text(std::string_view text);

// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
// as a string otherwise. Intermediate objects are created as needed.
void apply_override(Json& doc, std::string_view assignment);
void set_path(Json& doc, std::string_view dotted, Json value);

// Validates a document. Throws ConfigError with the offending key path.
ExperimentConfig parse_config(const Json& doc);

// Fully resolved document: every default filled in, no sweep block. Parsing it
// yields the same experiment.
Json to_json(const ExperimentConfig& cfg);

// One document per sweep cell (the input itself when there is no sweep).
// Each cell gets name "<name>_<index>" and is validated.
std::vector<ExperimentConfig> expand_sweep(const Json& doc);

// 16 hex digits of FNV-1a over the resolved document's compact dump.
std::string config_hash(const ExperimentConfig& cfg);

// Digits file: stream.path if set, else $KANOL_DATA_DIR/optdigits.csv, else
// data/optdigits.csv.
std::filesystem::path resolve_digits_path(const std::string& configured);

std::string_view to_string(StreamKind kind) noexcept;

}  // namespace kanol
