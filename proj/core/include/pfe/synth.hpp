#ifndef PFE_SYNTH_HPP
#define PFE_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/rng.hpp"
#include "pfe/uncertainty_head.hpp"

namespace pfe {

// A degraded observation is a blend of the subject's intrinsic code z with a
// shared low-quality attractor ("dark point" d), plus isotropic noise:
//
//   observed = (1 - w(q)) * z + w(q) * d + eps,   eps ~ N(0, nv(q) * I).
//
// w and nv are the mode profiles below: w(1) = 0 (pristine), w(0) = 1 (fully
// collapsed onto the attractor), both monotone; nv strictly decreases in q.
// Because every identity collapses onto the same attractor, impostor pairs
// of badly degraded observations become near-duplicates — high cosine — while
// their genuine pairs against clean references fall apart. That is the
// texture the scorers are evaluated against.
enum class DegradationMode { kBlurLike, kOcclusionLike, kNoiseLike };

const char* degradation_mode_name(DegradationMode mode);
DegradationMode degradation_mode_from_name(const std::string& name);

struct SynthParams {
  std::size_t identities = 200;
  std::size_t samples_per_identity = 20;
  std::size_t dim = 16;           // embedding dimension D
  std::size_t aux_channels = 4;   // quality side channels A fed to the head
  double quality_min = 0.2;
  double quality_max = 1.0;
  double noise_floor = 0.01;      // noise variance at quality 1
  double noise_ceil = 0.25;       // noise variance scale at quality 0
  double dark_norm = 10.0;        // length of the shared attractor
  double aux_noise = 0.02;        // stddev of the aux replicas around quality
  DegradationMode mode = DegradationMode::kBlurLike;
};

// Blend weight w(q): (1-q)^e with e = 1 / 2 / 3 for blur / occlusion /
// noise-like degradation.
double blend_weight(DegradationMode mode, double quality);

// Noise variance nv(q): noise_floor at q = 1, rising monotonically to a
// mode-dependent fraction of noise_ceil at q = 0.
double noise_variance(DegradationMode mode, double quality,
                      const SynthParams& params);

struct SynthSample {
  std::size_t identity = 0;         // index into the corpus identity tables
  double quality = 1.0;
  double true_noise_var = 0.0;      // actual isotropic noise variance used
  std::vector<double> observed_mu;  // D
  std::vector<double> aux;          // A noisy replicas of quality
};

// Ground truth plus observations. Samples are grouped by identity
// (samples_per_identity consecutive rows each); the first sample of every
// identity is pinned at quality_max and serves as that subject's reference
// image. Regenerating with the same (params, seed) reproduces every byte.
struct SynthCorpus {
  SynthParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> subject_ids;        // K
  std::vector<std::vector<double>> intrinsic;  // K x D
  std::vector<double> dark_point;              // D
  std::vector<SynthSample> samples;            // K * samples_per_identity

  std::size_t sample_index(std::size_t identity, std::size_t j) const {
    return identity * params.samples_per_identity + j;
  }
  const SynthSample& reference_sample(std::size_t identity) const {
    return samples[sample_index(identity, 0)];
  }
};

SynthCorpus gen_corpus(const SynthParams& params, std::uint64_t seed);

// Re-degrades `sample` down to target_quality < sample.quality in one step,
// reusing the blend and noise already present (fresh noise only tops up the
// variance). target_quality == sample.quality returns the sample unchanged;
// target_quality above it throws ValidationError. true_noise_var records the
// actual total noise variance, which can exceed the mode curve when the
// carried-over noise already overshoots it.
SynthSample degrade(const SynthCorpus& corpus, const SynthSample& sample,
                    double target_quality, DegradationMode mode, Rng& rng);

// Head input rows are the observed mean concatenated with the aux channels.
std::vector<double> head_input(const SynthSample& sample);

// One embedding per corpus sample, labeled by subject. Variances come from
// the head in inference mode, or default to 1.0 when head is null.
std::vector<GaussianEmbedding> corpus_embeddings(const SynthCorpus& corpus,
                                                 const UncertaintyHead* head);

// Quality levels must be strictly decreasing, each within (0, quality of the
// reference samples].
struct DegradationSpec {
  DegradationMode mode = DegradationMode::kBlurLike;
  std::vector<double> levels;
};

struct SweepRow {
  double level = 0.0;
  ScoreKind scorer = ScoreKind::kCosine;
  double genuine_mean = 0.0;
  double genuine_std = 0.0;
  double impostor_mean = 0.0;
  double impostor_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::vector<double>> genuine_scores;   // per level
  std::vector<std::vector<double>> impostor_scores;  // per level
};

// For each level: every subject's reference image is degraded to that level;
// genuine pairs are (reference, its degraded copy), impostor pairs are
// random cross-subject pairs of degraded images. kMls needs a head for the
// variances (ConfigError otherwise); kCosine ignores it.
SweepResult dilemma_sweep(const SynthCorpus& corpus,
                          const DegradationSpec& spec, ScoreKind scorer,
                          const UncertaintyHead* head, std::uint64_t seed,
                          std::size_t impostor_pairs = 1000);

// "level,scorer,genuine_mean,genuine_std,impostor_mean,impostor_std"
std::string sweep_csv(const SweepResult& result);

// A verification protocol over corpus sample indices: same-subject pairs
// (capped per subject) and random cross-subject pairs.
struct PairProtocol {
  std::vector<std::pair<std::size_t, std::size_t>> genuine;
  std::vector<std::pair<std::size_t, std::size_t>> impostor;
};

PairProtocol build_pair_protocol(const SynthCorpus& corpus, std::uint64_t seed,
                                 std::size_t genuine_per_subject,
                                 std::size_t impostor_pairs);

}  // namespace pfe

#endif  // PFE_SYNTH_HPP
