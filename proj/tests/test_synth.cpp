#include "pfe/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/errors.hpp"
#include "pfe/rng.hpp"
#include "test_util.hpp"

using namespace pfe;

namespace {

SynthParams SmallParams() {
  SynthParams p;
  p.identities = 24;
  p.samples_per_identity = 8;
  p.dim = 16;
  return p;
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    dot += a[l] * b[l];
    na += a[l] * a[l];
    nb += b[l] * b[l];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST(DegradationModes, NamesRoundTrip) {
  for (const auto mode : {DegradationMode::kBlurLike,
                          DegradationMode::kOcclusionLike,
                          DegradationMode::kNoiseLike}) {
    EXPECT_EQ(degradation_mode_from_name(degradation_mode_name(mode)), mode);
  }
  EXPECT_THROW(degradation_mode_from_name("sepia"), ConfigError);
}

TEST(BlendWeight, ModeProfiles) {
  // Powers 1 / 2 / 3 of (1 - q): pristine input stays put under every mode,
  // quality 0 collapses fully onto the attractor.
  for (const auto mode : {DegradationMode::kBlurLike,
                          DegradationMode::kOcclusionLike,
                          DegradationMode::kNoiseLike}) {
    EXPECT_EQ(blend_weight(mode, 1.0), 0.0);
    EXPECT_EQ(blend_weight(mode, 0.0), 1.0);
  }
  EXPECT_NEAR(blend_weight(DegradationMode::kBlurLike, 0.5), 0.5, 1e-15);
  EXPECT_NEAR(blend_weight(DegradationMode::kOcclusionLike, 0.5), 0.25, 1e-15);
  EXPECT_NEAR(blend_weight(DegradationMode::kNoiseLike, 0.5), 0.125, 1e-15);
}

TEST(NoiseVariance, StrictlyDecreasingInQuality) {
  const SynthParams params;
  for (const auto mode : {DegradationMode::kBlurLike,
                          DegradationMode::kOcclusionLike,
                          DegradationMode::kNoiseLike}) {
    EXPECT_NEAR(noise_variance(mode, 1.0, params), params.noise_floor, 1e-15);
    double prev = noise_variance(mode, 1.0, params);
    for (double q = 0.95; q >= -1e-9; q -= 0.05) {
      const double cur = noise_variance(mode, q, params);
      EXPECT_GT(cur, prev);
      prev = cur;
    }
  }
  // At quality 0 every mode has blend weight 1, so the lost-detail part is
  // the full blend energy 1 + |d|^2 / D for all three; the sensor ceilings
  // stay ordered blur < occlusion < noise.
  const double lost_at_zero =
      1.0 + params.dark_norm * params.dark_norm / static_cast<double>(params.dim);
  const double b = noise_variance(DegradationMode::kBlurLike, 0.0, params);
  const double o = noise_variance(DegradationMode::kOcclusionLike, 0.0, params);
  const double n = noise_variance(DegradationMode::kNoiseLike, 0.0, params);
  EXPECT_LT(b, o);
  EXPECT_LT(o, n);
  EXPECT_NEAR(n, params.noise_ceil + lost_at_zero, 1e-12);
  EXPECT_NEAR(o - b, (0.6 - 0.3) * params.noise_ceil, 1e-12);
}

TEST(GenCorpus, SeedDeterminism) {
  const auto a = gen_corpus(SmallParams(), 91);
  const auto b = gen_corpus(SmallParams(), 91);
  EXPECT_EQ(a.dark_point, b.dark_point);
  EXPECT_EQ(a.subject_ids, b.subject_ids);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].observed_mu, b.samples[i].observed_mu);
    EXPECT_EQ(a.samples[i].aux, b.samples[i].aux);
    EXPECT_EQ(a.samples[i].quality, b.samples[i].quality);
    EXPECT_EQ(a.samples[i].true_noise_var, b.samples[i].true_noise_var);
  }

  const auto c = gen_corpus(SmallParams(), 92);
  EXPECT_NE(a.dark_point, c.dark_point);
}

TEST(GenCorpus, ShapeAndGroundTruth) {
  const auto params = SmallParams();
  const auto corpus = gen_corpus(params, 93);
  EXPECT_EQ(corpus.samples.size(), 24u * 8u);
  EXPECT_EQ(corpus.subject_ids.size(), 24u);
  EXPECT_EQ(corpus.subject_ids[0], "id0000");
  EXPECT_EQ(corpus.subject_ids[23], "id0023");

  double dark_norm_sq = 0.0;
  for (const double d : corpus.dark_point) dark_norm_sq += d * d;
  EXPECT_NEAR(std::sqrt(dark_norm_sq), params.dark_norm, 1e-9);

  for (std::size_t k = 0; k < params.identities; ++k) {
    // First sample per identity is the pristine reference.
    EXPECT_EQ(corpus.reference_sample(k).quality, params.quality_max);
    for (std::size_t j = 0; j < params.samples_per_identity; ++j) {
      const auto& s = corpus.samples[corpus.sample_index(k, j)];
      EXPECT_EQ(s.identity, k);
      EXPECT_GE(s.quality, params.quality_min);
      EXPECT_LE(s.quality, params.quality_max);
      EXPECT_EQ(s.true_noise_var,
                noise_variance(params.mode, s.quality, params));
      EXPECT_EQ(s.observed_mu.size(), params.dim);
      EXPECT_EQ(s.aux.size(), params.aux_channels);
    }
  }
}

TEST(GenCorpus, PristineSamplesHugTheIntrinsicCode) {
  const auto params = SmallParams();
  const auto corpus = gen_corpus(params, 97);
  const double sigma = std::sqrt(params.noise_floor);
  const double bound = 3.0 * sigma * std::sqrt(static_cast<double>(params.dim));
  for (std::size_t k = 0; k < params.identities; ++k) {
    const auto& ref = corpus.reference_sample(k);
    double dist_sq = 0.0;
    for (std::size_t l = 0; l < params.dim; ++l) {
      const double gap = ref.observed_mu[l] - corpus.intrinsic[k][l];
      dist_sq += gap * gap;
    }
    EXPECT_LT(std::sqrt(dist_sq), bound);
  }
}

TEST(GenCorpus, AuxChannelsTrackQuality) {
  const auto params = SmallParams();
  const auto corpus = gen_corpus(params, 101);
  for (const auto& s : corpus.samples)
    for (const double a : s.aux)
      EXPECT_LT(std::abs(a - s.quality), 6.0 * params.aux_noise);
}

TEST(GenCorpus, MinimalCorpus) {
  SynthParams p;
  p.identities = 2;
  p.samples_per_identity = 2;
  p.dim = 2;
  p.aux_channels = 1;
  const auto corpus = gen_corpus(p, 103);
  EXPECT_EQ(corpus.samples.size(), 4u);
  EXPECT_EQ(corpus.intrinsic.size(), 2u);
  EXPECT_NE(corpus.intrinsic[0], corpus.intrinsic[1]);
}

TEST(GenCorpus, RejectsBadParams) {
  SynthParams p;
  p.identities = 0;
  EXPECT_THROW(gen_corpus(p, 1), ValidationError);
  p = SynthParams{};
  p.dim = 1;
  EXPECT_THROW(gen_corpus(p, 1), ValidationError);
  p = SynthParams{};
  p.quality_min = 0.9;
  p.quality_max = 0.5;
  EXPECT_THROW(gen_corpus(p, 1), ValidationError);
  p = SynthParams{};
  p.noise_floor = 0.0;
  EXPECT_THROW(gen_corpus(p, 1), ValidationError);
  p = SynthParams{};
  p.noise_ceil = 1e-3;  // below the floor
  EXPECT_THROW(gen_corpus(p, 1), ValidationError);
}

TEST(Degrade, SameQualityIsIdentity) {
  const auto corpus = gen_corpus(SmallParams(), 107);
  Rng rng(1);
  const auto& ref = corpus.reference_sample(0);
  const auto same = degrade(corpus, ref, ref.quality,
                            corpus.params.mode, rng);
  EXPECT_EQ(same.observed_mu, ref.observed_mu);
  EXPECT_EQ(same.aux, ref.aux);
  EXPECT_EQ(same.true_noise_var, ref.true_noise_var);
}

TEST(Degrade, UpwardRefused) {
  const auto corpus = gen_corpus(SmallParams(), 109);
  Rng rng(2);
  // References sit at quality_max already; degrade one down first.
  const auto low =
      degrade(corpus, corpus.reference_sample(0), 0.5, corpus.params.mode, rng);
  EXPECT_THROW(degrade(corpus, low, 0.9, corpus.params.mode, rng),
               ValidationError);
  EXPECT_THROW(degrade(corpus, low, 0.0, corpus.params.mode, rng),
               ValidationError);
}

TEST(Degrade, PullsTowardTheSharedAttractor) {
  const auto corpus = gen_corpus(SmallParams(), 113);
  Rng rng(3);
  const auto& ref = corpus.reference_sample(0);

  // The deterministic part of the pull: the blend's alignment with the
  // attractor increases strictly with degradation and all but collapses.
  double prev = Cosine(corpus.intrinsic[0], corpus.dark_point);
  for (const double target : {0.7, 0.4, 0.1, 0.02}) {
    const double w = blend_weight(corpus.params.mode, target);
    std::vector<double> blend(corpus.params.dim);
    for (std::size_t l = 0; l < blend.size(); ++l)
      blend[l] =
          (1.0 - w) * corpus.intrinsic[0][l] + w * corpus.dark_point[l];
    const double cur = Cosine(blend, corpus.dark_point);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
  EXPECT_GT(prev, 0.97);

  // A degraded observation keeps a strong attractor alignment even though
  // the lost detail re-enters as noise and caps the cosine well below 1.
  const auto deg = degrade(corpus, ref, 0.02, corpus.params.mode, rng);
  const double observed = Cosine(deg.observed_mu, corpus.dark_point);
  EXPECT_GT(observed, 0.4);
  EXPECT_GT(observed, Cosine(ref.observed_mu, corpus.dark_point) + 0.2);
}

TEST(Degrade, NoiseBookkeepingIsConsistent) {
  const auto corpus = gen_corpus(SmallParams(), 127);
  Rng rng(4);
  const auto& ref = corpus.reference_sample(3);
  const auto deg = degrade(corpus, ref, 0.3, corpus.params.mode, rng);
  EXPECT_EQ(deg.quality, 0.3);
  EXPECT_EQ(deg.identity, ref.identity);
  // Fresh noise tops the total up to the mode curve when possible.
  EXPECT_GE(deg.true_noise_var,
            noise_variance(corpus.params.mode, 0.3, corpus.params) - 1e-12);
  // Degrading further never reduces the recorded noise.
  const auto deeper = degrade(corpus, deg, 0.1, corpus.params.mode, rng);
  EXPECT_GE(deeper.true_noise_var, deg.true_noise_var - 1e-12);
}

TEST(Degrade, ImpostorObservationsAlignUnderHeavyDegradation) {
  // The Monte Carlo reproduction of the dilemma's impostor side: heavily
  // degraded samples of different subjects share the attractor direction,
  // while pristine impostors are uncorrelated. Re-injected detail noise
  // keeps single pairs well below cos = 1, so the claim is about averages.
  SynthParams params;
  params.identities = 50;
  params.samples_per_identity = 2;
  params.dim = 16;
  const auto corpus = gen_corpus(params, 131);
  Rng rng(5);

  std::vector<SynthSample> degraded;
  for (std::size_t k = 0; k < params.identities; ++k)
    degraded.push_back(degrade(corpus, corpus.reference_sample(k), 0.02,
                               corpus.params.mode, rng));

  double degraded_total = 0.0, pristine_total = 0.0;
  const std::size_t trials = 1000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t a = static_cast<std::size_t>(rng.below(50));
    std::size_t b = static_cast<std::size_t>(rng.below(49));
    if (b >= a) ++b;
    degraded_total +=
        Cosine(degraded[a].observed_mu, degraded[b].observed_mu);
    pristine_total += Cosine(corpus.reference_sample(a).observed_mu,
                             corpus.reference_sample(b).observed_mu);
  }
  const double degraded_mean = degraded_total / static_cast<double>(trials);
  const double pristine_mean = pristine_total / static_cast<double>(trials);
  EXPECT_GT(degraded_mean, 0.35);
  EXPECT_LT(std::abs(pristine_mean), 0.15);
  EXPECT_GT(degraded_mean, pristine_mean + 0.25);
}

TEST(Degrade, GenuineCosineMatchesTheNoisyBlendPrediction) {
  // Degrading a reference is blend plus fresh noise, so the genuine cosine
  // is predictable: numerator from the blend of the observation itself,
  // denominator inflated by the injected per-dimension variance. An error
  // in either the blend or the noise bookkeeping would bias this.
  const auto params = SmallParams();
  const auto corpus = gen_corpus(params, 137);
  Rng rng(6);
  const double target = 0.02;
  const double w = blend_weight(params.mode, target);
  double signed_gap = 0.0, abs_gap = 0.0;
  for (std::size_t k = 0; k < params.identities; ++k) {
    const auto& ref = corpus.reference_sample(k);
    const auto deg = degrade(corpus, ref, target, corpus.params.mode, rng);
    const double got = Cosine(ref.observed_mu, deg.observed_mu);

    std::vector<double> blend(params.dim);
    for (std::size_t l = 0; l < params.dim; ++l)
      blend[l] =
          (1.0 - w) * ref.observed_mu[l] + w * corpus.dark_point[l];
    const double fresh = noise_variance(params.mode, target, params) -
                         (1.0 - w) * (1.0 - w) * ref.true_noise_var;
    double dot = 0.0, ref_sq = 0.0, blend_sq = 0.0;
    for (std::size_t l = 0; l < params.dim; ++l) {
      dot += ref.observed_mu[l] * blend[l];
      ref_sq += ref.observed_mu[l] * ref.observed_mu[l];
      blend_sq += blend[l] * blend[l];
    }
    const double predicted =
        dot / (std::sqrt(ref_sq) *
               std::sqrt(blend_sq + static_cast<double>(params.dim) * fresh));

    signed_gap += got - predicted;
    abs_gap += std::abs(got - predicted);
  }
  const double n = static_cast<double>(params.identities);
  EXPECT_LT(std::abs(signed_gap / n), 0.08);  // unbiased prediction
  EXPECT_LT(abs_gap / n, 0.2);                // per-subject scatter is noise-sized
}

TEST(HeadInput, ConcatenatesMeanAndAux) {
  const auto corpus = gen_corpus(SmallParams(), 139);
  const auto& s = corpus.samples[5];
  const auto row = head_input(s);
  ASSERT_EQ(row.size(), s.observed_mu.size() + s.aux.size());
  for (std::size_t l = 0; l < s.observed_mu.size(); ++l)
    EXPECT_EQ(row[l], s.observed_mu[l]);
  for (std::size_t a = 0; a < s.aux.size(); ++a)
    EXPECT_EQ(row[s.observed_mu.size() + a], s.aux[a]);
}

TEST(CorpusEmbeddings, NullHeadGivesUnitVariance) {
  const auto corpus = gen_corpus(SmallParams(), 149);
  const auto embeddings = corpus_embeddings(corpus, nullptr);
  ASSERT_EQ(embeddings.size(), corpus.samples.size());
  EXPECT_EQ(embeddings[0].label, "id0000");
  EXPECT_EQ(embeddings.back().label, "id0023");
  for (const auto& e : embeddings) {
    EXPECT_EQ(e.mu, corpus.samples[&e - embeddings.data()].observed_mu);
    for (const double v : e.sigma_sq) EXPECT_EQ(v, 1.0);
  }
}

TEST(CorpusEmbeddings, HeadSizeMismatchRejected) {
  const auto corpus = gen_corpus(SmallParams(), 151);
  HeadConfig hc;
  hc.input_dim = 7;  // corpus rows are dim + aux = 20 wide
  hc.hidden_dim = 7;
  hc.output_dim = 16;
  const UncertaintyHead head(hc);
  EXPECT_THROW(corpus_embeddings(corpus, &head), DimensionError);
}

TEST(DilemmaSweep, ValidatesItsInputs) {
  const auto corpus = gen_corpus(SmallParams(), 157);
  DegradationSpec spec;
  spec.levels = {};
  EXPECT_THROW(dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr, 1),
               EmptySetError);
  spec.levels = {0.5, 0.5};
  EXPECT_THROW(dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr, 1),
               ValidationError);
  spec.levels = {0.8, 0.5};
  EXPECT_THROW(dilemma_sweep(corpus, spec, ScoreKind::kMls, nullptr, 1),
               ConfigError);
}

TEST(DilemmaSweep, PristineLevelSeparatesCleanly) {
  const auto corpus = gen_corpus(SmallParams(), 163);
  DegradationSpec spec;
  spec.levels = {corpus.params.quality_max};

  const auto cos = dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr,
                                 11, 500);
  ASSERT_EQ(cos.rows.size(), 1u);
  EXPECT_NEAR(cos.rows[0].genuine_mean, 1.0, 1e-12);  // self-pairs
  // Impostor cosines at D=16 have std about 1/4; a 3-sigma margin below the
  // genuine mean of 1 is a wide gap here.
  EXPECT_GT(cos.rows[0].genuine_mean,
            cos.rows[0].impostor_mean + 3.0 * cos.rows[0].impostor_std);

  // Identity-configured head: every variance 1, MLS degenerates to the
  // scaled-shifted Euclidean and still separates pristine data.
  HeadConfig hc;
  hc.input_dim = 20;
  hc.hidden_dim = 4;
  hc.output_dim = 16;
  const UncertaintyHead head(hc);
  const auto mls = dilemma_sweep(corpus, spec, ScoreKind::kMls, &head, 11, 500);
  EXPECT_GT(mls.rows[0].genuine_mean, mls.rows[0].impostor_mean);
}

TEST(DilemmaSweep, SeedDeterminism) {
  const auto corpus = gen_corpus(SmallParams(), 167);
  DegradationSpec spec;
  spec.levels = {1.0, 0.5, 0.2};
  const auto a = dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr, 7, 200);
  const auto b = dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr, 7, 200);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].genuine_mean, b.rows[i].genuine_mean);
    EXPECT_EQ(a.rows[i].impostor_std, b.rows[i].impostor_std);
  }
  EXPECT_EQ(a.genuine_scores, b.genuine_scores);
  EXPECT_EQ(a.impostor_scores, b.impostor_scores);
}

TEST(SweepCsv, HeaderAndRowShape) {
  const auto corpus = gen_corpus(SmallParams(), 173);
  DegradationSpec spec;
  spec.levels = {1.0, 0.4};
  const auto result =
      dilemma_sweep(corpus, spec, ScoreKind::kCosine, nullptr, 13, 100);
  const std::string csv = sweep_csv(result);

  std::istringstream lines(csv);
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line, "level,scorer,genuine_mean,genuine_std,impostor_mean,impostor_std");
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line.rfind("1.000000,cosine,", 0), 0u);
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line.rfind("0.400000,cosine,", 0), 0u);
  EXPECT_FALSE(std::getline(lines, line));
}

TEST(BuildPairProtocol, ShapeAndDisjointness) {
  const auto params = SmallParams();
  const auto corpus = gen_corpus(params, 179);
  const auto protocol = build_pair_protocol(corpus, 21, 5, 300);

  EXPECT_EQ(protocol.genuine.size(), params.identities * 5u);
  EXPECT_EQ(protocol.impostor.size(), 300u);
  for (const auto& [i, j] : protocol.genuine) {
    EXPECT_NE(i, j);
    EXPECT_EQ(corpus.samples[i].identity, corpus.samples[j].identity);
  }
  for (const auto& [i, j] : protocol.impostor)
    EXPECT_NE(corpus.samples[i].identity, corpus.samples[j].identity);

  // Deterministic in the seed.
  const auto again = build_pair_protocol(corpus, 21, 5, 300);
  EXPECT_EQ(protocol.genuine, again.genuine);
  EXPECT_EQ(protocol.impostor, again.impostor);
}
