#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pfe/errors.hpp"

namespace pfe {
namespace cli {

namespace {

std::string Trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return std::string();
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double ParseDouble(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("bad numeric value for '" + key + "': " + value);
  return v;
}

std::size_t ParseSize(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("bad integer value for '" + key + "': " + value);
  return static_cast<std::size_t>(v);
}

// "0:0.001,2000:0.0001"
std::vector<std::pair<std::size_t, double>> ParseSchedule(
    const std::string& value) {
  std::vector<std::pair<std::size_t, double>> sched;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("bad lr_schedule entry '" + item +
                        "' (expected step:rate)");
    sched.emplace_back(ParseSize("lr_schedule", Trim(item.substr(0, colon))),
                       ParseDouble("lr_schedule", Trim(item.substr(colon + 1))));
  }
  if (sched.empty()) throw ConfigError("empty lr_schedule");
  return sched;
}

}  // namespace

ScoreKind score_kind_from_name(const std::string& name) {
  if (name == "mls") return ScoreKind::kMls;
  if (name == "cosine") return ScoreKind::kCosine;
  if (name == "neg-sq-euclid") return ScoreKind::kNegSqEuclid;
  throw ConfigError("unknown scorer '" + name +
                    "' (expected mls|cosine|neg-sq-euclid)");
}

const char* score_kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kMls:
      return "mls";
    case ScoreKind::kNegSqEuclid:
      return "neg-sq-euclid";
    case ScoreKind::kCosine:
      break;
  }
  return "cosine";
}

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "precision-sum") return FusionMode::kPrecisionSum;
  if (name == "min-variance") return FusionMode::kMinVariance;
  throw ConfigError("unknown fusion mode '" + name +
                    "' (expected precision-sum|min-variance)");
}

const char* fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::kPrecisionSum ? "precision-sum" : "min-variance";
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));

    if (key == "identities")
      config.synth.identities = ParseSize(key, value);
    else if (key == "samples_per_identity")
      config.synth.samples_per_identity = ParseSize(key, value);
    else if (key == "dim")
      config.synth.dim = ParseSize(key, value);
    else if (key == "aux_channels")
      config.synth.aux_channels = ParseSize(key, value);
    else if (key == "quality_min")
      config.synth.quality_min = ParseDouble(key, value);
    else if (key == "quality_max")
      config.synth.quality_max = ParseDouble(key, value);
    else if (key == "noise_floor")
      config.synth.noise_floor = ParseDouble(key, value);
    else if (key == "noise_ceil")
      config.synth.noise_ceil = ParseDouble(key, value);
    else if (key == "dark_norm")
      config.synth.dark_norm = ParseDouble(key, value);
    else if (key == "aux_noise")
      config.synth.aux_noise = ParseDouble(key, value);
    else if (key == "mode")
      config.synth.mode = degradation_mode_from_name(value);
    else if (key == "subjects_per_batch")
      config.train.subjects_per_batch = ParseSize(key, value);
    else if (key == "images_per_subject")
      config.train.images_per_subject = ParseSize(key, value);
    else if (key == "steps")
      config.train.steps = ParseSize(key, value);
    else if (key == "momentum")
      config.train.momentum = ParseDouble(key, value);
    else if (key == "weight_decay")
      config.train.weight_decay = ParseDouble(key, value);
    else if (key == "lr_schedule")
      config.train.lr_schedule = ParseSchedule(value);
    else if (key == "hidden_dim")
      config.train.hidden_dim = ParseSize(key, value);
    else if (key == "seed")
      config.train.seed = ParseSize(key, value);
    else if (key == "scorer")
      config.scorer = score_kind_from_name(value);
    else if (key == "fusion_mode")
      config.fusion_mode = fusion_mode_from_name(value);
    else if (key == "genuine_per_subject")
      config.genuine_per_subject = ParseSize(key, value);
    else if (key == "impostor_pairs")
      config.impostor_pairs = ParseSize(key, value);
    else
      throw ConfigError("unknown configuration key '" + key + "'");
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_run_config_text(buf.str());
}

}  // namespace cli
}  // namespace pfe
