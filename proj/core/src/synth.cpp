#include "pfe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "pfe/errors.hpp"
#include "pfe/log.hpp"

namespace pfe {

const char* degradation_mode_name(DegradationMode mode) {
  switch (mode) {
    case DegradationMode::kBlurLike:
      return "blur";
    case DegradationMode::kOcclusionLike:
      return "occlusion";
    case DegradationMode::kNoiseLike:
      return "noise";
  }
  return "?";
}

DegradationMode degradation_mode_from_name(const std::string& name) {
  if (name == "blur") return DegradationMode::kBlurLike;
  if (name == "occlusion") return DegradationMode::kOcclusionLike;
  if (name == "noise") return DegradationMode::kNoiseLike;
  throw ConfigError("unknown degradation mode '" + name +
                    "' (expected blur|occlusion|noise)");
}

double blend_weight(DegradationMode mode, double quality) {
  const double u = 1.0 - quality;
  switch (mode) {
    case DegradationMode::kBlurLike:
      return u;
    case DegradationMode::kOcclusionLike:
      return u * u;
    case DegradationMode::kNoiseLike:
      return u * u * u;
  }
  return u;
}

// Fraction of noise_ceil reached at quality 0. The noise-like mode is
// noise-dominant (full ceiling), the blend-dominant modes stay milder.
static double NoiseScale(DegradationMode mode) {
  switch (mode) {
    case DegradationMode::kBlurLike:
      return 0.3;
    case DegradationMode::kOcclusionLike:
      return 0.6;
    case DegradationMode::kNoiseLike:
      return 1.0;
  }
  return 1.0;
}

// Share of the blended-away signal energy that re-enters each sample as
// idiosyncratic noise. Degrading does not just move the mean toward the
// attractor, it destroys per-sample detail; without this term two samples
// of one subject at equal quality would agree almost exactly and carry no
// information about their own reliability.
static constexpr double kLostDetailShare = 1.0;

double noise_variance(DegradationMode mode, double quality,
                      const SynthParams& params) {
  const double top = params.noise_ceil * NoiseScale(mode);
  // Sensor part: linear in (1 - q) between the floor and the mode's ceiling.
  const double sensor =
      params.noise_floor + (top - params.noise_floor) * (1.0 - quality);
  // Lost-detail part: the blend removes w of the intrinsic code and pulls
  // toward the attractor; its per-dimension energy is w^2 (1 + |d|^2 / D)
  // for unit-variance codes, and that much variance comes back as noise.
  const double w = blend_weight(mode, quality);
  const double lost = kLostDetailShare * w * w *
                      (1.0 + params.dark_norm * params.dark_norm /
                                 static_cast<double>(params.dim));
  return sensor + lost;
}

static void CheckParams(const SynthParams& p) {
  if (p.identities == 0 || p.samples_per_identity == 0)
    throw ValidationError("corpus needs identities and samples >= 1");
  if (p.dim < 2)
    throw ValidationError("corpus dimension must be at least 2");
  if (!(p.quality_min > 0.0 && p.quality_min <= p.quality_max &&
        p.quality_max <= 1.0))
    throw ValidationError("need 0 < quality_min <= quality_max <= 1");
  if (!(p.noise_floor > 0.0))
    throw ValidationError("noise_floor must be positive");
  if (!(p.noise_ceil >= p.noise_floor))
    throw ValidationError("noise_ceil must be >= noise_floor");
  if (!(p.dark_norm > 0.0)) throw ValidationError("dark_norm must be positive");
  if (!(p.aux_noise >= 0.0))
    throw ValidationError("aux_noise must be non-negative");
}

static std::string SubjectId(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id%04zu", k);
  return std::string(buf);
}

static SynthSample MakeSample(const SynthParams& params,
                              const std::vector<double>& intrinsic,
                              const std::vector<double>& dark,
                              std::size_t identity, double quality, Rng& rng) {
  SynthSample s;
  s.identity = identity;
  s.quality = quality;
  const double w = blend_weight(params.mode, quality);
  const double nv = noise_variance(params.mode, quality, params);
  s.true_noise_var = nv;
  const double sd = std::sqrt(nv);
  s.observed_mu.resize(params.dim);
  for (std::size_t l = 0; l < params.dim; ++l)
    s.observed_mu[l] =
        (1.0 - w) * intrinsic[l] + w * dark[l] + sd * rng.normal();
  s.aux.resize(params.aux_channels);
  for (std::size_t a = 0; a < params.aux_channels; ++a)
    s.aux[a] = quality + params.aux_noise * rng.normal();
  return s;
}

SynthCorpus gen_corpus(const SynthParams& params, std::uint64_t seed) {
  CheckParams(params);
  SynthCorpus corpus;
  corpus.params = params;
  corpus.seed = seed;
  Rng rng(seed);

  // Shared attractor: random direction scaled to dark_norm.
  corpus.dark_point.resize(params.dim);
  double norm_sq = 0.0;
  for (double& d : corpus.dark_point) {
    d = rng.normal();
    norm_sq += d * d;
  }
  const double scale = params.dark_norm / std::sqrt(norm_sq);
  for (double& d : corpus.dark_point) d *= scale;

  corpus.subject_ids.resize(params.identities);
  corpus.intrinsic.resize(params.identities);
  corpus.samples.reserve(params.identities * params.samples_per_identity);
  for (std::size_t k = 0; k < params.identities; ++k) {
    corpus.subject_ids[k] = SubjectId(k);
    corpus.intrinsic[k].resize(params.dim);
    for (double& z : corpus.intrinsic[k]) z = rng.normal();
    for (std::size_t j = 0; j < params.samples_per_identity; ++j) {
      const double quality =
          j == 0 ? params.quality_max
                 : rng.uniform(params.quality_min, params.quality_max);
      corpus.samples.push_back(MakeSample(params, corpus.intrinsic[k],
                                          corpus.dark_point, k, quality, rng));
    }
  }

  // Identities must be distinguishable at all.
  double min_dist_sq = -1.0;
  for (std::size_t a = 0; a < params.identities; ++a)
    for (std::size_t b = a + 1; b < params.identities; ++b) {
      double d = 0.0;
      for (std::size_t l = 0; l < params.dim; ++l) {
        const double t = corpus.intrinsic[a][l] - corpus.intrinsic[b][l];
        d += t * t;
      }
      if (min_dist_sq < 0.0 || d < min_dist_sq) min_dist_sq = d;
    }
  if (params.identities > 1 && !(min_dist_sq > 0.0))
    throw ValidationError("degenerate corpus: coincident intrinsic codes");
  return corpus;
}

SynthSample degrade(const SynthCorpus& corpus, const SynthSample& sample,
                    double target_quality, DegradationMode mode, Rng& rng) {
  if (!(target_quality > 0.0))
    throw ValidationError("target quality must be positive");
  if (target_quality > sample.quality)
    throw ValidationError("cannot degrade upward: target quality above the sample's");
  if (target_quality == sample.quality) return sample;

  const SynthParams& p = corpus.params;
  const double w_old = blend_weight(mode, sample.quality);
  const double w_new = blend_weight(mode, target_quality);
  // Rewrite observed = (1-w_old) z + w_old d + eps as
  // lam * observed + (w_new - lam*w_old) d  =  (1-w_new) z + w_new d + lam*eps
  // with lam = (1-w_new)/(1-w_old); w_old < 1 because sample.quality > 0.
  const double lam = (1.0 - w_new) / (1.0 - w_old);
  const double carried = lam * lam * sample.true_noise_var;
  const double target_nv = noise_variance(mode, target_quality, p);
  const double fresh = std::max(0.0, target_nv - carried);
  const double sd = std::sqrt(fresh);

  SynthSample out;
  out.identity = sample.identity;
  out.quality = target_quality;
  out.true_noise_var = std::max(target_nv, carried);
  out.observed_mu.resize(p.dim);
  for (std::size_t l = 0; l < p.dim; ++l)
    out.observed_mu[l] = lam * sample.observed_mu[l] +
                         (w_new - lam * w_old) * corpus.dark_point[l] +
                         sd * rng.normal();
  out.aux.resize(p.aux_channels);
  for (std::size_t a = 0; a < p.aux_channels; ++a)
    out.aux[a] = target_quality + p.aux_noise * rng.normal();
  return out;
}

std::vector<double> head_input(const SynthSample& sample) {
  std::vector<double> row;
  row.reserve(sample.observed_mu.size() + sample.aux.size());
  row.insert(row.end(), sample.observed_mu.begin(), sample.observed_mu.end());
  row.insert(row.end(), sample.aux.begin(), sample.aux.end());
  return row;
}

static std::vector<std::vector<double>> HeadVariances(
    const std::vector<const SynthSample*>& samples, const UncertaintyHead* head,
    std::size_t dim) {
  std::vector<std::vector<double>> out(samples.size());
  if (head == nullptr) {
    for (auto& v : out) v.assign(dim, 1.0);
    return out;
  }
  const std::size_t din = head->config().input_dim;
  std::vector<double> rows;
  rows.reserve(samples.size() * din);
  for (const SynthSample* s : samples) {
    const std::vector<double> row = head_input(*s);
    if (row.size() != din)
      throw DimensionError("head input width does not match the corpus");
    rows.insert(rows.end(), row.begin(), row.end());
  }
  const std::vector<double> var =
      head->forward_inference(rows, samples.size());
  const std::size_t dout = head->config().output_dim;
  if (dout != dim)
    throw DimensionError("head output width does not match the corpus");
  for (std::size_t i = 0; i < samples.size(); ++i)
    out[i].assign(var.begin() + i * dout, var.begin() + (i + 1) * dout);
  return out;
}

std::vector<GaussianEmbedding> corpus_embeddings(const SynthCorpus& corpus,
                                                 const UncertaintyHead* head) {
  std::vector<const SynthSample*> ptrs;
  ptrs.reserve(corpus.samples.size());
  for (const SynthSample& s : corpus.samples) ptrs.push_back(&s);
  const std::vector<std::vector<double>> vars =
      HeadVariances(ptrs, head, corpus.params.dim);
  std::vector<GaussianEmbedding> out;
  out.reserve(corpus.samples.size());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i)
    out.push_back(make_embedding(corpus.samples[i].observed_mu, vars[i],
                                 corpus.subject_ids[corpus.samples[i].identity]));
  return out;
}

static void Moments(const std::vector<double>& v, double* mean, double* std) {
  double m = 0.0;
  for (const double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  *mean = m;
  *std = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

SweepResult dilemma_sweep(const SynthCorpus& corpus,
                          const DegradationSpec& spec, ScoreKind scorer,
                          const UncertaintyHead* head, std::uint64_t seed,
                          std::size_t impostor_pairs) {
  if (spec.levels.empty()) throw EmptySetError("sweep needs at least one level");
  for (std::size_t i = 1; i < spec.levels.size(); ++i)
    if (!(spec.levels[i] < spec.levels[i - 1]))
      throw ValidationError("sweep levels must be strictly decreasing");
  if (scorer == ScoreKind::kMls && head == nullptr)
    throw ConfigError("mls sweep needs an uncertainty head");
  const std::size_t k = corpus.params.identities;
  if (k < 2) throw ValidationError("sweep needs at least two identities");

  // Reference embeddings (variances once, they do not change per level).
  std::vector<const SynthSample*> refs;
  for (std::size_t i = 0; i < k; ++i)
    refs.push_back(&corpus.reference_sample(i));
  const std::vector<std::vector<double>> ref_vars =
      HeadVariances(refs, scorer == ScoreKind::kMls ? head : nullptr,
                    corpus.params.dim);

  SweepResult result;
  for (std::size_t li = 0; li < spec.levels.size(); ++li) {
    const double level = spec.levels[li];
    Rng rng(Rng::derive(seed, li));
    std::vector<SynthSample> degraded;
    degraded.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      degraded.push_back(
          degrade(corpus, corpus.reference_sample(i), level, spec.mode, rng));

    std::vector<const SynthSample*> deg_ptrs;
    for (const SynthSample& s : degraded) deg_ptrs.push_back(&s);
    const std::vector<std::vector<double>> deg_vars =
        HeadVariances(deg_ptrs, scorer == ScoreKind::kMls ? head : nullptr,
                      corpus.params.dim);

    auto score = [&](const std::vector<double>& mu_a,
                     const std::vector<double>& var_a,
                     const std::vector<double>& mu_b,
                     const std::vector<double>& var_b) {
      const GaussianEmbedding a = make_embedding(mu_a, var_a);
      const GaussianEmbedding b = make_embedding(mu_b, var_b);
      switch (scorer) {
        case ScoreKind::kMls:
          return mls_score(a, b).value;
        case ScoreKind::kNegSqEuclid:
          return neg_sq_euclid_score(a, b).value;
        case ScoreKind::kCosine:
          break;
      }
      return cosine_score(a, b).value;
    };

    std::vector<double> genuine;
    genuine.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
      genuine.push_back(score(refs[i]->observed_mu, ref_vars[i],
                              degraded[i].observed_mu, deg_vars[i]));

    std::vector<double> impostor;
    impostor.reserve(impostor_pairs);
    for (std::size_t t = 0; t < impostor_pairs; ++t) {
      const std::size_t a = static_cast<std::size_t>(rng.below(k));
      std::size_t b = static_cast<std::size_t>(rng.below(k - 1));
      if (b >= a) ++b;
      impostor.push_back(score(degraded[a].observed_mu, deg_vars[a],
                               degraded[b].observed_mu, deg_vars[b]));
    }

    SweepRow row;
    row.level = level;
    row.scorer = scorer;
    Moments(genuine, &row.genuine_mean, &row.genuine_std);
    Moments(impostor, &row.impostor_mean, &row.impostor_std);
    result.rows.push_back(row);
    result.genuine_scores.push_back(std::move(genuine));
    result.impostor_scores.push_back(std::move(impostor));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "level,scorer,genuine_mean,genuine_std,impostor_mean,impostor_std\n";
  char buf[256];
  for (const SweepRow& r : result.rows) {
    const char* name = r.scorer == ScoreKind::kMls ? "mls"
                       : r.scorer == ScoreKind::kNegSqEuclid ? "neg-sq-euclid"
                                                             : "cosine";
    std::snprintf(buf, sizeof buf, "%.6f,%s,%.6f,%.6f,%.6f,%.6f\n", r.level,
                  name, r.genuine_mean, r.genuine_std, r.impostor_mean,
                  r.impostor_std);
    os << buf;
  }
  return os.str();
}

PairProtocol build_pair_protocol(const SynthCorpus& corpus, std::uint64_t seed,
                                 std::size_t genuine_per_subject,
                                 std::size_t impostor_pairs) {
  const std::size_t k = corpus.params.identities;
  const std::size_t s = corpus.params.samples_per_identity;
  if (k < 2 || s < 2)
    throw ValidationError("pair protocol needs >= 2 identities and >= 2 samples each");
  PairProtocol proto;
  Rng rng(Rng::derive(seed, 0x70726f746f));

  // All unordered same-subject pairs, subsampled per subject if over the cap.
  std::vector<std::pair<std::size_t, std::size_t>> local;
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = a + 1; b < s; ++b) local.emplace_back(a, b);
  for (std::size_t id = 0; id < k; ++id) {
    std::vector<std::size_t> pick;
    if (genuine_per_subject >= local.size()) {
      pick.resize(local.size());
      for (std::size_t i = 0; i < local.size(); ++i) pick[i] = i;
    } else {
      pick = rng.sample_without_replacement(local.size(), genuine_per_subject);
    }
    for (const std::size_t i : pick)
      proto.genuine.emplace_back(corpus.sample_index(id, local[i].first),
                                 corpus.sample_index(id, local[i].second));
  }

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = impostor_pairs * 20 + 1000;
  while (proto.impostor.size() < impostor_pairs && attempts++ < max_attempts) {
    const std::size_t ia = static_cast<std::size_t>(rng.below(k));
    std::size_t ib = static_cast<std::size_t>(rng.below(k - 1));
    if (ib >= ia) ++ib;
    const std::size_t a =
        corpus.sample_index(ia, static_cast<std::size_t>(rng.below(s)));
    const std::size_t b =
        corpus.sample_index(ib, static_cast<std::size_t>(rng.below(s)));
    const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (seen.insert(key).second) proto.impostor.push_back(key);
  }
  if (proto.impostor.size() < impostor_pairs)
    log::info("pair protocol saturated at " +
              std::to_string(proto.impostor.size()) + " impostor pairs");
  return proto;
}

}  // namespace pfe
