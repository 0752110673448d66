#ifndef PFE_FUSION_HPP
#define PFE_FUSION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "pfe/embedding.hpp"

namespace pfe {

// How a template aggregates its member embeddings.
//  kPrecisionSum: conflation of the member Gaussians — precisions add,
//    mean is the precision-weighted average. Variance shrinks with every
//    member, so near-duplicate frames sharpen the posterior.
//  kMinVariance: same mean, but the fused variance is the dimension-wise
//    minimum over members; immune to that duplicate-frame overconfidence.
enum class FusionMode { kPrecisionSum, kMinVariance };

// Conflation of all members:
//   1/fused_sigma_sq(l) = sum_i 1/sigma_sq_i(l)
//   fused_mu(l) = fused_sigma_sq(l) * sum_i mu_i(l)/sigma_sq_i(l)
// A single member is returned unchanged. Order-invariant up to rounding.
// Throws EmptySetError / DimensionError.
GaussianEmbedding fuse_batch(const std::vector<GaussianEmbedding>& members);

// One conflation step: folds `next` into running estimate `state`.
//   mu' = (state_var * next_mu + next_var * state_mu) / (next_var + state_var)
//   var' = next_var * state_var / (next_var + state_var)
// Folding a batch in any order agrees with fuse_batch.
GaussianEmbedding fuse_sequential(const GaussianEmbedding& state,
                                  const GaussianEmbedding& next);

// Precision-weighted mean, dimension-wise minimum variance.
GaussianEmbedding fuse_min_variance(const std::vector<GaussianEmbedding>& members);

// Quality-weighted mean pooling: sum_i q_i * mu_i / sum_j q_j. With
// q_i = 1/sigma_sq_i (isotropic members) this is exactly the fuse_batch mean.
// Throws ValidationError on empty or mismatched lists or q <= 0.
std::vector<double> quality_pool(const std::vector<std::vector<double>>& means,
                                 const std::vector<double>& qualities);

// A subject's enrolled set of embeddings plus the fused representative,
// computed once at construction and recomputable on demand.
class Template {
 public:
  Template(std::string subject_id, std::vector<GaussianEmbedding> members,
           FusionMode mode);

  const std::string& subject_id() const { return subject_id_; }
  const std::vector<GaussianEmbedding>& members() const { return members_; }
  FusionMode mode() const { return mode_; }
  const GaussianEmbedding& fused() const { return fused_; }

  // Re-runs fusion over the stored members; the result always matches the
  // cached value bit for bit.
  GaussianEmbedding recompute() const;

 private:
  std::string subject_id_;
  std::vector<GaussianEmbedding> members_;
  FusionMode mode_;
  GaussianEmbedding fused_;
};

}  // namespace pfe

#endif  // PFE_FUSION_HPP
