#include "pfe/fusion.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pfe/errors.hpp"
#include "pfe/rng.hpp"
#include "test_util.hpp"

using namespace pfe;

namespace {

GaussianEmbedding Emb1(double mu, double var, std::string label = "") {
  return make_embedding({mu}, {var}, std::move(label));
}

std::vector<GaussianEmbedding> RandomMembers(Rng& rng, std::size_t n,
                                             std::size_t dim) {
  std::vector<GaussianEmbedding> members;
  for (std::size_t i = 0; i < n; ++i)
    members.push_back(testutil::random_embedding(rng, dim, 5.0, 0.1, 10.0));
  return members;
}

// Folds the members through fuse_sequential in the order given by `order`.
GaussianEmbedding FoldInOrder(const std::vector<GaussianEmbedding>& members,
                              const std::vector<std::size_t>& order) {
  GaussianEmbedding state = members[order[0]];
  for (std::size_t i = 1; i < order.size(); ++i)
    state = fuse_sequential(state, members[order[i]]);
  return state;
}

}  // namespace

TEST(FuseBatch, SymmetricEqualVariancePair) {
  const auto fused = fuse_batch({Emb1(0.0, 1.0), Emb1(2.0, 1.0)});
  EXPECT_NEAR(fused.mu[0], 1.0, 1e-15);
  EXPECT_NEAR(fused.sigma_sq[0], 0.5, 1e-15);
}

TEST(FuseBatch, UnequalVariancePair) {
  // Precision sum 1 + 1/3 = 4/3, so variance 3/4; mean pulled toward the
  // sharper member.
  const auto fused = fuse_batch({Emb1(0.0, 1.0), Emb1(2.0, 3.0)});
  EXPECT_NEAR(fused.sigma_sq[0], 0.75, 1e-15);
  EXPECT_NEAR(fused.mu[0], 0.5, 1e-15);
}

TEST(FuseBatch, SingleMemberUnchanged) {
  const auto only = make_embedding({1.0, -2.0}, {0.3, 0.7}, "s01");
  const auto fused = fuse_batch({only});
  EXPECT_EQ(fused.mu, only.mu);
  EXPECT_EQ(fused.sigma_sq, only.sigma_sq);
  EXPECT_EQ(fused.label, "s01");
}

TEST(FuseBatch, ThreeEqualVariances) {
  const auto fused =
      fuse_batch({Emb1(0.0, 1.0), Emb1(1.0, 1.0), Emb1(2.0, 1.0)});
  EXPECT_NEAR(fused.mu[0], 1.0, 1e-15);
  EXPECT_NEAR(fused.sigma_sq[0], 1.0 / 3.0, 1e-15);
}

TEST(FuseBatch, ContractsBelowEveryMember) {
  Rng rng(41);
  for (std::size_t n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto members = RandomMembers(rng, n, 4);
      const auto fused = fuse_batch(members);
      for (std::size_t l = 0; l < 4; ++l) {
        double min_var = members[0].sigma_sq[l];
        for (const auto& m : members)
          min_var = std::min(min_var, m.sigma_sq[l]);
        EXPECT_LT(fused.sigma_sq[l], min_var);
      }
      EXPECT_TRUE(validate_embedding(fused).empty());
    }
  }
}

TEST(FuseBatch, ErrorPaths) {
  EXPECT_THROW(fuse_batch({}), EmptySetError);
  EXPECT_THROW(fuse_batch({Emb1(0.0, 1.0),
                           make_embedding({0.0, 0.0}, {1.0, 1.0})}),
               DimensionError);
}

TEST(FuseBatch, LabelKeptOnlyWhenShared) {
  const auto same = fuse_batch({Emb1(0.0, 1.0, "a"), Emb1(1.0, 1.0, "a")});
  EXPECT_EQ(same.label, "a");
  const auto mixed = fuse_batch({Emb1(0.0, 1.0, "a"), Emb1(1.0, 1.0, "b")});
  EXPECT_EQ(mixed.label, "");
}

TEST(FuseSequential, WorkedExamples) {
  const auto symmetric = fuse_sequential(Emb1(0.0, 1.0), Emb1(2.0, 1.0));
  EXPECT_NEAR(symmetric.mu[0], 1.0, 1e-15);
  EXPECT_NEAR(symmetric.sigma_sq[0], 0.5, 1e-15);

  const auto uneven = fuse_sequential(Emb1(0.0, 1.0), Emb1(2.0, 3.0));
  EXPECT_NEAR(uneven.mu[0], 0.5, 1e-15);
  EXPECT_NEAR(uneven.sigma_sq[0], 0.75, 1e-15);
  // Must agree with the batch rule on the same pair.
  const auto batch = fuse_batch({Emb1(0.0, 1.0), Emb1(2.0, 3.0)});
  EXPECT_NEAR(uneven.mu[0], batch.mu[0], 1e-15);
  EXPECT_NEAR(uneven.sigma_sq[0], batch.sigma_sq[0], 1e-15);
}

TEST(FuseSequential, AllInsertionOrdersOfThree) {
  const std::vector<GaussianEmbedding> members = {
      Emb1(0.0, 1.0), Emb1(1.0, 1.0), Emb1(2.0, 1.0)};
  std::vector<std::size_t> order = {0, 1, 2};
  do {
    const auto folded = FoldInOrder(members, order);
    EXPECT_NEAR(folded.mu[0], 1.0, 1e-12);
    EXPECT_NEAR(folded.sigma_sq[0], 1.0 / 3.0, 1e-12);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(FuseSequential, FoldEqualsBatchOverAllPermutations) {
  Rng rng(43);
  for (std::size_t n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto members = RandomMembers(rng, n, 3);
      const auto batch = fuse_batch(members);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      do {
        const auto folded = FoldInOrder(members, order);
        for (std::size_t l = 0; l < 3; ++l) {
          EXPECT_LT(testutil::mixed_error(folded.mu[l], batch.mu[l]), 1e-12);
          EXPECT_LT(
              testutil::mixed_error(folded.sigma_sq[l], batch.sigma_sq[l]),
              1e-12);
        }
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }
}

TEST(FuseBatch, FinitePriorPosteriorConvergesToIt) {
  // Posterior under an explicit zero-mean prior of variance sigma0^2; the
  // batch rule is its sigma0 -> infinity limit. At sigma0 = 1e6 the two must
  // agree to 1e-6, and widening the prior from 1e3 to 1e6 must tighten the
  // agreement.
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(4));
    const auto members = RandomMembers(rng, n, 4);
    const auto batch = fuse_batch(members);
    const auto wide = testutil::fuse_with_prior(members, 1e6 * 1e6);
    const auto narrow = testutil::fuse_with_prior(members, 1e3 * 1e3);

    double wide_err = 0.0, narrow_err = 0.0;
    for (std::size_t l = 0; l < 4; ++l) {
      wide_err = std::max(wide_err,
                          testutil::mixed_error(wide.mu[l], batch.mu[l]));
      wide_err = std::max(
          wide_err, testutil::mixed_error(wide.sigma_sq[l], batch.sigma_sq[l]));
      narrow_err = std::max(narrow_err,
                            testutil::mixed_error(narrow.mu[l], batch.mu[l]));
      narrow_err = std::max(
          narrow_err,
          testutil::mixed_error(narrow.sigma_sq[l], batch.sigma_sq[l]));
    }
    EXPECT_LT(wide_err, 1e-6);
    EXPECT_GT(narrow_err, wide_err);
  }
}

TEST(FuseSequential, FinitePriorStepwiseConvergesToIt) {
  // Stepwise variant of the same check: each fold subtracts one unit of
  // prior precision, so after n members the state matches the batch posterior
  // under that prior.
  Rng rng(53);
  const auto members = RandomMembers(rng, 4, 3);
  const double prior_var = 1e6 * 1e6;

  GaussianEmbedding state = members[0];
  for (std::size_t i = 1; i < members.size(); ++i) {
    GaussianEmbedding next_state;
    next_state.mu.resize(3);
    next_state.sigma_sq.resize(3);
    for (std::size_t l = 0; l < 3; ++l) {
      const double precision = 1.0 / members[i].sigma_sq[l] +
                               1.0 / state.sigma_sq[l] - 1.0 / prior_var;
      next_state.sigma_sq[l] = 1.0 / precision;
      next_state.mu[l] = next_state.sigma_sq[l] *
                         (members[i].mu[l] / members[i].sigma_sq[l] +
                          state.mu[l] / state.sigma_sq[l]);
    }
    state = next_state;
  }

  const auto batch = fuse_batch(members);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_LT(testutil::mixed_error(state.mu[l], batch.mu[l]), 1e-6);
    EXPECT_LT(testutil::mixed_error(state.sigma_sq[l], batch.sigma_sq[l]),
              1e-6);
  }
}

TEST(FuseMinVariance, WorkedExamples) {
  const auto equal = fuse_min_variance({Emb1(0.0, 1.0), Emb1(2.0, 1.0)});
  EXPECT_NEAR(equal.mu[0], 1.0, 1e-15);
  EXPECT_NEAR(equal.sigma_sq[0], 1.0, 1e-15);

  // Mean still uses precision weights; variance is the plain minimum.
  const auto uneven = fuse_min_variance({Emb1(0.0, 1.0), Emb1(2.0, 3.0)});
  EXPECT_NEAR(uneven.mu[0], 0.5, 1e-15);
  EXPECT_NEAR(uneven.sigma_sq[0], 1.0, 1e-15);
}

TEST(FuseMinVariance, DuplicationInvariant) {
  const auto e = make_embedding({1.0, -1.0}, {0.5, 2.0}, "dup");
  const auto fused = fuse_min_variance({e, e, e});
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_NEAR(fused.mu[l], e.mu[l], 1e-12);
    EXPECT_NEAR(fused.sigma_sq[l], e.sigma_sq[l], 1e-15);
  }
  // The precision-sum rule is not duplication-invariant; that is the whole
  // reason this variant exists.
  const auto sharpened = fuse_batch({e, e, e});
  EXPECT_LT(sharpened.sigma_sq[0], e.sigma_sq[0]);
}

TEST(FuseMinVariance, PicksMinimumPerDimension) {
  const auto a = make_embedding({0.0, 0.0}, {1.0, 4.0});
  const auto b = make_embedding({1.0, 1.0}, {3.0, 2.0});
  const auto fused = fuse_min_variance({a, b});
  EXPECT_NEAR(fused.sigma_sq[0], 1.0, 1e-15);
  EXPECT_NEAR(fused.sigma_sq[1], 2.0, 1e-15);
}

TEST(QualityPool, WorkedExamples) {
  EXPECT_NEAR(quality_pool({{0.0}, {2.0}}, {1.0, 1.0})[0], 1.0, 1e-15);
  EXPECT_NEAR(quality_pool({{0.0}, {2.0}}, {1.0, 3.0})[0], 1.5, 1e-15);
  const auto single = quality_pool({{3.5, -1.0}}, {0.7});
  EXPECT_NEAR(single[0], 3.5, 1e-15);
  EXPECT_NEAR(single[1], -1.0, 1e-15);
}

TEST(QualityPool, ReducesToFuseBatchMeanForIsotropicMembers) {
  Rng rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(4));
    const std::size_t dim = 1 + static_cast<std::size_t>(rng.below(6));
    std::vector<GaussianEmbedding> members;
    std::vector<std::vector<double>> means;
    std::vector<double> qualities;
    for (std::size_t i = 0; i < n; ++i) {
      const double var = rng.uniform(0.1, 5.0);
      std::vector<double> mu(dim);
      for (double& x : mu) x = rng.uniform(-3.0, 3.0);
      members.push_back(make_embedding(mu, std::vector<double>(dim, var)));
      means.push_back(mu);
      qualities.push_back(1.0 / var);
    }
    const auto fused = fuse_batch(members);
    const auto pooled = quality_pool(means, qualities);
    for (std::size_t l = 0; l < dim; ++l)
      EXPECT_LT(testutil::mixed_error(fused.mu[l], pooled[l]), 1e-12);
  }
}

TEST(QualityPool, ErrorPaths) {
  EXPECT_THROW(quality_pool({}, {}), ValidationError);
  EXPECT_THROW(quality_pool({{1.0}}, {1.0, 2.0}), ValidationError);
  EXPECT_THROW(quality_pool({{1.0}, {2.0}}, {1.0, 0.0}), ValidationError);
  EXPECT_THROW(quality_pool({{1.0}, {2.0}}, {1.0, -3.0}), ValidationError);
  EXPECT_THROW(quality_pool({{1.0}, {2.0, 3.0}}, {1.0, 1.0}),
               ValidationError);
}

TEST(FusionModes, PermutationInvariant) {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(4));
    auto members = RandomMembers(rng, n, 3);
    const auto batch = fuse_batch(members);
    const auto min_var = fuse_min_variance(members);

    auto shuffled = members;
    rng.shuffle(shuffled);
    const auto batch_s = fuse_batch(shuffled);
    const auto min_var_s = fuse_min_variance(shuffled);
    for (std::size_t l = 0; l < 3; ++l) {
      EXPECT_LT(testutil::mixed_error(batch.mu[l], batch_s.mu[l]), 1e-12);
      EXPECT_LT(testutil::mixed_error(batch.sigma_sq[l], batch_s.sigma_sq[l]),
                1e-12);
      EXPECT_LT(testutil::mixed_error(min_var.mu[l], min_var_s.mu[l]), 1e-12);
      EXPECT_EQ(min_var.sigma_sq[l], min_var_s.sigma_sq[l]);
    }
  }
}

TEST(FuseBatch, ResultVarianceNeverBelowFloor) {
  // Conflating many already-minimal variances would dip below the floor;
  // the result is clamped back to it and stays valid.
  std::vector<GaussianEmbedding> members(
      8, make_embedding({0.0}, {kVarianceFloor}));
  const auto fused = fuse_batch(members);
  EXPECT_GE(fused.sigma_sq[0], kVarianceFloor);
  EXPECT_TRUE(validate_embedding(fused).empty());
}

TEST(TemplateType, CachesFusionAtConstruction) {
  Rng rng(67);
  const auto members = RandomMembers(rng, 4, 3);
  const Template tpl("subj7", members, FusionMode::kPrecisionSum);
  EXPECT_EQ(tpl.subject_id(), "subj7");
  EXPECT_EQ(tpl.members().size(), 4u);

  const auto direct = fuse_batch(members);
  EXPECT_EQ(tpl.fused().mu, direct.mu);
  EXPECT_EQ(tpl.fused().sigma_sq, direct.sigma_sq);

  // Recomputation is deterministic down to the bit.
  const auto again = tpl.recompute();
  EXPECT_EQ(again.mu, tpl.fused().mu);
  EXPECT_EQ(again.sigma_sq, tpl.fused().sigma_sq);
}

TEST(TemplateType, MinVarianceMode) {
  Rng rng(71);
  const auto members = RandomMembers(rng, 3, 2);
  const Template tpl("s", members, FusionMode::kMinVariance);
  const auto direct = fuse_min_variance(members);
  EXPECT_EQ(tpl.fused().mu, direct.mu);
  EXPECT_EQ(tpl.fused().sigma_sq, direct.sigma_sq);
  EXPECT_EQ(tpl.mode(), FusionMode::kMinVariance);
}
