#ifndef PFE_TOOLS_RUN_CONFIG_HPP
#define PFE_TOOLS_RUN_CONFIG_HPP

#include <string>

#include "pfe/embedding.hpp"
#include "pfe/fusion.hpp"
#include "pfe/synth.hpp"
#include "pfe/trainer.hpp"

namespace pfe {
namespace cli {

// Everything a run can configure, with the documented defaults baked in.
// Files are "key = value" lines; '#' starts a comment; unknown keys are
// rejected (ConfigError) rather than ignored.
struct RunConfig {
  SynthParams synth;
  TrainConfig train;
  ScoreKind scorer = ScoreKind::kMls;
  FusionMode fusion_mode = FusionMode::kMinVariance;
  std::size_t genuine_per_subject = 10;
  std::size_t impostor_pairs = 20000;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

ScoreKind score_kind_from_name(const std::string& name);
const char* score_kind_name(ScoreKind kind);
FusionMode fusion_mode_from_name(const std::string& name);
const char* fusion_mode_name(FusionMode mode);

}  // namespace cli
}  // namespace pfe

#endif  // PFE_TOOLS_RUN_CONFIG_HPP
