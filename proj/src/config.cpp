#include "kanol/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "kanol/rng.hpp"

namespace kanol {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path.empty() ? what : path + ": " + what);
}

std::string join(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

// Typed reads from one JSON object; remembers which keys were consumed so the
// leftovers can be reported.
class Section {
 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string where(const char* key) const { return join(path_, key); }

  template <typename F>
  void read(const char* key, F&& fn) {
    if (has(key)) fn(obj_.at(key), where(key));
  }

  void str(const char* key, std::string& out) {
    read(key, [&](const Json& v, const std::string& p) {
      if (!v.is_string()) fail(p, "expected a string");
      out = v.get<std::string>();
    });
  }

  void num(const char* key, double& out) {
    read(key, [&](const Json& v, const std::string& p) {
      if (!v.is_number()) fail(p, "expected a number");
      out = v.get<double>();
    });
  }

  template <typename Int>
  void integer(const char* key, Int& out, long long lo = 0) {
    read(key, [&](const Json& v, const std::string& p) { out = as_int<Int>(v, p, lo); });
  }

  template <typename Int>
  static Int as_int(const Json& v, const std::string& p, long long lo = 0) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (lo > 0 && u < static_cast<std::uint64_t>(lo)) fail(p, "must be >= " + std::to_string(lo));
      if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) fail(p, "too large");
      return static_cast<Int>(u);
    }
    const auto x = v.get<long long>();
    if (x < lo) fail(p, "must be >= " + std::to_string(lo));
    return static_cast<Int>(x);
  }

  void boolean(const char* key, bool& out) {
    read(key, [&](const Json& v, const std::string& p) {
      if (!v.is_boolean()) fail(p, "expected true or false");
      out = v.get<bool>();
    });
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) fail(join(path_, key), "unknown key");
    }
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string check_format(const Json& v, const std::string& p) {
  if (!v.is_string()) fail(p, "expected \"float\" or \"W,I\"");
  const auto text = v.get<std::string>();
  try {
    (void)Numerics::parse(text);
  } catch (const std::exception& e) {
    fail(p, e.what());
  }
  return text;
}

StreamBlock parse_stream(const Json& obj) {
  Section s(obj, "stream");
  StreamBlock out;
  std::string kind = "regression";
  s.str("kind", kind);
  if (kind == "regression") {
    out.kind = StreamKind::regression;
  } else if (kind == "rotating_xor") {
    out.kind = StreamKind::rotating_xor;
  } else if (kind == "digits") {
    out.kind = StreamKind::digits;
  } else {
    fail(s.where("kind"), "unknown stream kind '" + kind + "'");
  }
  if (s.has("seed")) out.seed = Section::as_int<std::uint64_t>(s.raw("seed"), s.where("seed"));

  if (out.kind == StreamKind::rotating_xor) {
    auto& x = out.xor_params;
    s.num("spread", x.spread);
    s.num("noise_scale", x.noise_scale);
    s.num("kerr_strength", x.kerr_strength);
    s.num("drift_speed", x.drift_speed);
    s.num("breathing_amplitude", x.breathing_amplitude);
    s.num("breathing_frequency", x.breathing_frequency);
    try {
      x.validate();
    } catch (const std::invalid_argument& e) {
      fail("stream", e.what());
    }
  } else if (out.kind == StreamKind::digits) {
    auto& d = out.digits;
    s.str("path", d.path);
    s.integer("stationary_epochs", d.stationary_epochs);
    s.integer("rotating_epochs", d.rotating_epochs);
    s.num("rotation_rate", d.rotation_rate);
    try {
      d.validate();
    } catch (const std::invalid_argument& e) {
      fail("stream", e.what());
    }
  }
  s.finish();
  return out;
}

std::vector<std::pair<double, double>> parse_ranges(const Json& v, const std::string& p) {
  auto pair_of = [&](const Json& a) {
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      fail(p, "expected [lo, hi] or a list of them");
    }
    return std::pair{a[0].get<double>(), a[1].get<double>()};
  };
  if (v.is_array() && !v.empty() && v[0].is_array()) {
    std::vector<std::pair<double, double>> out;
    for (const auto& a : v) out.push_back(pair_of(a));
    return out;
  }
  return {pair_of(v)};
}

ModelBlock parse_model(const Json& obj) {
  Section s(obj, "model");
  ModelBlock out;
  std::string type;
  if (!s.has("type")) fail("model", "missing 'type'");
  s.str("type", type);
  if (type == "kan") {
    out.type = ModelKind::kan;
  } else if (type == "mlp") {
    out.type = ModelKind::mlp;
  } else {
    fail(s.where("type"), "expected \"kan\" or \"mlp\"");
  }

  if (!s.has("dims")) fail("model", "missing 'dims'");
  const Json& dims = s.raw("dims");
  if (!dims.is_array() || dims.size() < 2) fail(s.where("dims"), "need at least two dims");
  for (const auto& d : dims) out.dims.push_back(Section::as_int<int>(d, s.where("dims"), 1));

  s.read("format", [&](const Json& v, const std::string& p) {
    out.input_format = out.weight_format = out.output_format = check_format(v, p);
  });
  s.read("input_format", [&](const Json& v, const std::string& p) { out.input_format = check_format(v, p); });
  s.read("weight_format", [&](const Json& v, const std::string& p) { out.weight_format = check_format(v, p); });
  s.read("output_format", [&](const Json& v, const std::string& p) { out.output_format = check_format(v, p); });
  try {
    (void)out.numerics();
  } catch (const std::exception& e) {
    fail("model", e.what());
  }

  if (s.has("init_seed")) {
    out.init_seed = Section::as_int<std::uint64_t>(s.raw("init_seed"), s.where("init_seed"));
  }

  auto& k = out.kan;
  k.dims = out.dims;
  s.integer("grid_size", k.grid_size, 1);
  s.integer("spline_order", k.spline_order);
  s.integer("lut_bits", k.lut_bits);
  s.read("grid_range", [&](const Json& v, const std::string& p) { k.grid_ranges = parse_ranges(v, p); });
  s.num("init_scale", k.init_scale);
  s.read("basis", [&](const Json& v, const std::string& p) {
    const auto b = v.is_string() ? v.get<std::string>() : "";
    if (b == "lut") {
      k.sampling = BasisSampling::lut;
    } else if (b == "exact") {
      k.sampling = BasisSampling::exact;
    } else {
      fail(p, "expected \"lut\" or \"exact\"");
    }
  });

  auto& m = out.mlp;
  m.dims = out.dims;
  s.read("activation", [&](const Json& v, const std::string& p) {
    if (!v.is_string()) fail(p, "expected a string");
    try {
      m.hidden = parse_activation(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      fail(p, e.what());
    }
  });
  s.boolean("bias", m.bias);
  s.finish();

  // Build once so grid/order/range errors surface as config errors.
  try {
    if (out.type == ModelKind::kan) {
      const std::size_t layers = out.dims.size() - 1;
      if (k.grid_ranges.size() != 1 && k.grid_ranges.size() != layers) {
        fail("model.grid_range", "give one range or one per layer (" + std::to_string(layers) + ")");
      }
      (void)Model::kan(k, out.numerics(), 0);
    } else {
      (void)Model::mlp(m, out.numerics(), 0);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail("model", e.what());
  }
  return out;
}

TrainerBlock parse_trainer(const Json& obj) {
  Section s(obj, "trainer");
  TrainerBlock out;
  if (s.has("steps")) out.steps = Section::as_int<std::size_t>(s.raw("steps"), s.where("steps"), 1);
  s.num("lr", out.lr);
  if (!std::isfinite(out.lr) || out.lr < 0) fail(s.where("lr"), "must be finite and >= 0");
  s.read("loss", [&](const Json& v, const std::string& p) {
    try {
      out.loss = parse_loss(v.is_string() ? v.get<std::string>() : "");
    } catch (const std::invalid_argument& e) {
      fail(p, e.what());
    }
  });
  s.integer("window", out.window);
  s.read("freeze_after", [&](const Json& v, const std::string& p) {
    if (v.is_string() && v.get<std::string>() == "stationary") {
      out.freeze_after_stationary = true;
    } else if (!v.is_null()) {
      out.freeze_after = Section::as_int<std::size_t>(v, p);
    }
  });
  s.finish();
  return out;
}

OutputBlock parse_output(const Json& obj) {
  Section s(obj, "output");
  OutputBlock out;
  s.str("dir", out.dir);
  s.boolean("step_csv", out.step_csv);
  s.read("boundary", [&](const Json& v, const std::string& p) {
    Section b(v, p);
    BoundaryBlock bb;
    b.integer("resolution", bb.resolution, 2);
    b.read("range", [&](const Json& r, const std::string& rp) {
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
          !(r[0].get<double>() < r[1].get<double>())) {
        fail(rp, "expected [lo, hi] with lo < hi");
      }
      bb.lo = r[0].get<double>();
      bb.hi = r[1].get<double>();
    });
    b.read("at", [&](const Json& a, const std::string& ap) {
      if (!a.is_array()) fail(ap, "expected a list of steps");
      for (const auto& t : a) bb.at.push_back(Section::as_int<std::size_t>(t, ap));
    });
    b.finish();
    out.boundary = bb;
  });
  s.finish();
  return out;
}

SweepBlock parse_sweep(const Json& obj) {
  Section s(obj, "sweep");
  SweepBlock out;
  s.read("mode", [&](const Json& v, const std::string& p) {
    const auto m = v.is_string() ? v.get<std::string>() : "";
    if (m == "cartesian") {
      out.mode = SweepMode::cartesian;
    } else if (m == "zip") {
      out.mode = SweepMode::zip;
    } else {
      fail(p, "expected \"cartesian\" or \"zip\"");
    }
  });
  if (!s.has("axes")) fail("sweep", "missing 'axes'");
  const Json& axes = s.raw("axes");
  if (!axes.is_object() || axes.empty()) fail("sweep.axes", "expected a non-empty object");
  for (const auto& [path, values] : axes.items()) {
    if (path.rfind("sweep", 0) == 0) fail("sweep.axes." + path, "cannot sweep the sweep block");
    if (!values.is_array() || values.empty()) {
      fail("sweep.axes." + path, "expected a non-empty list");
    }
    out.axes.emplace_back(path, std::vector<Json>(values.begin(), values.end()));
  }
  if (out.mode == SweepMode::zip) {
    for (const auto& [path, values] : out.axes) {
      if (values.size() != out.axes.front().second.size()) {
        fail("sweep.axes." + path, "zip axes must have equal lengths");
      }
    }
  }
  s.finish();
  return out;
}

Json format_json(const std::string& f) { return f; }

}  // namespace

Numerics ModelBlock::numerics() const {
  const bool any_float =
      input_format == "float" || weight_format == "float" || output_format == "float";
  if (any_float) {
    if (input_format != weight_format || weight_format != output_format) {
      throw std::invalid_argument("float mode must apply to all three roles");
    }
    return Numerics::floating();
  }
  return Numerics::fixed(FixedFormat::parse(input_format), FixedFormat::parse(weight_format),
                         FixedFormat::parse(output_format));
}

std::uint64_t ExperimentConfig::stream_seed() const {
  return stream.seed ? *stream.seed : derive_seed(seed, "stream");
}

std::uint64_t ExperimentConfig::init_seed() const {
  return model.init_seed ? *model.init_seed : derive_seed(seed, "init");
}

Json parse_config_text(std::string_view text) {
  try {
    return Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(e.what());
  }
}

Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void set_path(Json& doc, std::string_view dotted, Json value) {
  if (dotted.empty()) throw ConfigError("empty override path");
  Json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key(dotted.substr(pos, dot == std::string_view::npos ? dotted.npos : dot - pos));
    if (key.empty()) throw ConfigError("bad override path '" + std::string(dotted) + "'");
    if (!node->is_object()) {
      throw ConfigError("override path '" + std::string(dotted) + "' runs through a non-object");
    }
    if (dot == std::string_view::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    pos = dot + 1;
  }
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form path=value");
  }
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  set_path(doc, assignment.substr(0, eq), std::move(value));
}

ExperimentConfig parse_config(const Json& doc) {
  Section s(doc, "");
  ExperimentConfig cfg;
  if (!s.has("name")) fail("", "missing 'name'");
  s.str("name", cfg.name);
  if (cfg.name.empty() || cfg.name.find_first_of("/\\ ") != std::string::npos) {
    fail("name", "must be non-empty without spaces or slashes");
  }
  s.integer("seed", cfg.seed);
  if (!s.has("stream")) fail("", "missing 'stream'");
  cfg.stream = parse_stream(s.raw("stream"));
  if (!s.has("model")) fail("", "missing 'model'");
  cfg.model = parse_model(s.raw("model"));
  cfg.trainer = s.has("trainer") ? parse_trainer(s.raw("trainer")) : TrainerBlock{};
  if (s.has("output")) cfg.output = parse_output(s.raw("output"));
  if (cfg.output.dir.empty()) cfg.output.dir = "runs/" + cfg.name;
  if (s.has("sweep")) cfg.sweep = parse_sweep(s.raw("sweep"));
  s.finish();

  if (cfg.stream.kind != StreamKind::digits && cfg.trainer.freeze_after_stationary) {
    fail("trainer.freeze_after", "\"stationary\" only applies to the digits stream");
  }
  if (cfg.stream.kind == StreamKind::rotating_xor && !cfg.trainer.steps) {
    fail("trainer.steps", "required for the unbounded rotating_xor stream");
  }
  if (cfg.stream.kind == StreamKind::regression && cfg.trainer.steps &&
      *cfg.trainer.steps > RegressionStream::kLength) {
    fail("trainer.steps", "regression stream has only 1500 samples");
  }
  const int want_in = cfg.stream.kind == StreamKind::regression     ? 1
                      : cfg.stream.kind == StreamKind::rotating_xor ? 2
                                                                    : kDigitPixels;
  if (cfg.model.dims.front() != want_in) {
    fail("model.dims", "stream '" + std::string(to_string(cfg.stream.kind)) + "' needs " +
                           std::to_string(want_in) + " inputs");
  }
  const int want_out = cfg.stream.kind == StreamKind::digits ? 10 : 1;
  if (cfg.model.dims.back() != want_out) {
    fail("model.dims", "stream '" + std::string(to_string(cfg.stream.kind)) + "' needs " +
                           std::to_string(want_out) + " outputs");
  }
  return cfg;
}

Json to_json(const ExperimentConfig& cfg) {
  Json doc;
  doc["name"] = cfg.name;
  doc["seed"] = cfg.seed;

  Json stream;
  stream["kind"] = std::string(to_string(cfg.stream.kind));
  stream["seed"] = cfg.stream_seed();
  if (cfg.stream.kind == StreamKind::rotating_xor) {
    const auto& x = cfg.stream.xor_params;
    stream["spread"] = x.spread;
    stream["noise_scale"] = x.noise_scale;
    stream["kerr_strength"] = x.kerr_strength;
    stream["drift_speed"] = x.drift_speed;
    stream["breathing_amplitude"] = x.breathing_amplitude;
    stream["breathing_frequency"] = x.breathing_frequency;
  } else if (cfg.stream.kind == StreamKind::digits) {
    const auto& d = cfg.stream.digits;
    stream["path"] = d.path;
    stream["stationary_epochs"] = d.stationary_epochs;
    stream["rotating_epochs"] = d.rotating_epochs;
    stream["rotation_rate"] = d.rotation_rate;
  }
  doc["stream"] = stream;

  const auto& m = cfg.model;
  Json model;
  model["type"] = m.type == ModelKind::kan ? "kan" : "mlp";
  model["dims"] = m.dims;
  model["input_format"] = format_json(m.input_format);
  model["weight_format"] = format_json(m.weight_format);
  model["output_format"] = format_json(m.output_format);
  model["init_seed"] = cfg.init_seed();
  if (m.type == ModelKind::kan) {
    model["grid_size"] = m.kan.grid_size;
    model["spline_order"] = m.kan.spline_order;
    model["lut_bits"] = m.kan.lut_bits;
    Json ranges = Json::array();
    for (const auto& [lo, hi] : m.kan.grid_ranges) ranges.push_back({lo, hi});
    model["grid_range"] = ranges;
    model["init_scale"] = m.kan.init_scale;
    model["basis"] = m.kan.sampling == BasisSampling::lut ? "lut" : "exact";
  } else {
    model["activation"] = std::string(to_string(m.mlp.hidden));
    model["bias"] = m.mlp.bias;
  }
  doc["model"] = model;

  const auto& t = cfg.trainer;
  Json trainer;
  trainer["steps"] = t.steps ? Json(*t.steps) : Json(nullptr);
  trainer["lr"] = t.lr;
  trainer["loss"] = std::string(to_string(t.loss));
  trainer["window"] = t.window;
  if (t.freeze_after_stationary) {
    trainer["freeze_after"] = "stationary";
  } else {
    trainer["freeze_after"] = t.freeze_after ? Json(*t.freeze_after) : Json(nullptr);
  }
  if (!t.steps) trainer.erase("steps");
  doc["trainer"] = trainer;

  Json output;
  output["dir"] = cfg.output.dir;
  output["step_csv"] = cfg.output.step_csv;
  if (const auto& b = cfg.output.boundary) {
    output["boundary"] = {{"resolution", b->resolution}, {"range", {b->lo, b->hi}}, {"at", b->at}};
  }
  doc["output"] = output;
  return doc;
}

std::vector<ExperimentConfig> expand_sweep(const Json& doc) {
  const ExperimentConfig base = parse_config(doc);
  if (!base.sweep) return {base};

  Json body = doc;
  body.erase("sweep");
  const auto& axes = base.sweep->axes;

  std::vector<std::vector<std::size_t>> picks;
  if (base.sweep->mode == SweepMode::zip) {
    for (std::size_t i = 0; i < axes.front().second.size(); ++i) {
      picks.emplace_back(axes.size(), i);
    }
  } else {
    std::vector<std::size_t> idx(axes.size(), 0);
    // Odometer order: the last axis varies fastest.
    for (;;) {
      picks.push_back(idx);
      std::size_t a = axes.size();
      while (a > 0 && ++idx[a - 1] == axes[a - 1].second.size()) idx[--a] = 0;
      if (a == 0) break;
    }
  }

  std::vector<ExperimentConfig> cells;
  const int width = picks.size() > 999 ? 4 : 3;
  for (std::size_t c = 0; c < picks.size(); ++c) {
    Json cell = body;
    for (std::size_t a = 0; a < axes.size(); ++a) set_path(cell, axes[a].first, axes[a].second[picks[c][a]]);
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%0*zu", width, c);
    cell["name"] = base.name + suffix;
    if (!doc.contains("output") || !doc["output"].contains("dir")) {
      set_path(cell, "output.dir", "runs/" + base.name);
    }
    try {
      cells.push_back(parse_config(cell));
    } catch (const ConfigError& e) {
      throw ConfigError("sweep cell " + std::to_string(c) + ": " + e.what());
    }
  }
  return cells;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

std::filesystem::path resolve_digits_path(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* dir = std::getenv("KANOL_DATA_DIR"); dir && *dir) {
    return std::filesystem::path(dir) / "optdigits.csv";
  }
  return std::filesystem::path("data") / "optdigits.csv";
}

std::string_view to_string(StreamKind kind) noexcept {
  switch (kind) {
    case StreamKind::regression: return "regression";
    case StreamKind::rotating_xor: return "rotating_xor";
    case StreamKind::digits: return "digits";
  }
  return "?";
}

}  // namespace kanol
