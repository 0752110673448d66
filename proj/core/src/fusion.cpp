#include "pfe/fusion.hpp"

#include <algorithm>
#include <sstream>

#include "pfe/errors.hpp"

namespace pfe {

static void RequireUniformDim(const std::vector<GaussianEmbedding>& members) {
  if (members.empty()) throw EmptySetError("fusion over an empty member set");
  const std::size_t dim = members.front().dim();
  for (const GaussianEmbedding& m : members) {
    if (m.dim() != dim || m.sigma_sq.size() != dim) {
      std::ostringstream os;
      os << "fusion members disagree on dimension (" << dim << " vs "
         << m.dim() << ")";
      throw DimensionError(os.str());
    }
  }
}

// All members carry the same label -> keep it; otherwise the fused embedding
// is unlabeled.
static std::string CommonLabel(const std::vector<GaussianEmbedding>& members) {
  const std::string& first = members.front().label;
  for (const GaussianEmbedding& m : members)
    if (m.label != first) return std::string();
  return first;
}

GaussianEmbedding fuse_batch(const std::vector<GaussianEmbedding>& members) {
  RequireUniformDim(members);
  if (members.size() == 1) return members.front();
  const std::size_t dim = members.front().dim();
  GaussianEmbedding fused;
  fused.mu.assign(dim, 0.0);
  fused.sigma_sq.assign(dim, 0.0);
  fused.label = CommonLabel(members);
  for (std::size_t l = 0; l < dim; ++l) {
    double precision = 0.0;
    double weighted_mu = 0.0;
    for (const GaussianEmbedding& m : members) {
      precision += 1.0 / m.sigma_sq[l];
      weighted_mu += m.mu[l] / m.sigma_sq[l];
    }
    fused.sigma_sq[l] = std::max(1.0 / precision, kVarianceFloor);
    fused.mu[l] = weighted_mu / precision;
  }
  return fused;
}

GaussianEmbedding fuse_sequential(const GaussianEmbedding& state,
                                  const GaussianEmbedding& next) {
  if (state.dim() != next.dim()) {
    std::ostringstream os;
    os << "fusion members disagree on dimension (" << state.dim() << " vs "
       << next.dim() << ")";
    throw DimensionError(os.str());
  }
  const std::size_t dim = state.dim();
  GaussianEmbedding fused;
  fused.mu.assign(dim, 0.0);
  fused.sigma_sq.assign(dim, 0.0);
  fused.label = state.label == next.label ? state.label : std::string();
  for (std::size_t l = 0; l < dim; ++l) {
    const double vs = state.sigma_sq[l];
    const double vn = next.sigma_sq[l];
    fused.mu[l] = (vs * next.mu[l] + vn * state.mu[l]) / (vn + vs);
    fused.sigma_sq[l] = std::max(vn * vs / (vn + vs), kVarianceFloor);
  }
  return fused;
}

GaussianEmbedding fuse_min_variance(
    const std::vector<GaussianEmbedding>& members) {
  RequireUniformDim(members);
  if (members.size() == 1) return members.front();
  GaussianEmbedding fused = fuse_batch(members);
  for (std::size_t l = 0; l < fused.dim(); ++l) {
    double lo = members.front().sigma_sq[l];
    for (const GaussianEmbedding& m : members)
      lo = std::min(lo, m.sigma_sq[l]);
    fused.sigma_sq[l] = lo;
  }
  return fused;
}

std::vector<double> quality_pool(const std::vector<std::vector<double>>& means,
                                 const std::vector<double>& qualities) {
  if (means.empty() || qualities.empty())
    throw ValidationError("quality pooling over an empty list");
  if (means.size() != qualities.size()) {
    std::ostringstream os;
    os << "quality pooling needs one quality per mean (" << means.size()
       << " means, " << qualities.size() << " qualities)";
    throw ValidationError(os.str());
  }
  const std::size_t dim = means.front().size();
  double total = 0.0;
  for (const double q : qualities) {
    if (!(q > 0.0)) throw ValidationError("quality weights must be positive");
    total += q;
  }
  std::vector<double> pooled(dim, 0.0);
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].size() != dim)
      throw ValidationError("quality pooling members disagree on dimension");
    for (std::size_t l = 0; l < dim; ++l) pooled[l] += qualities[i] * means[i][l];
  }
  for (std::size_t l = 0; l < dim; ++l) pooled[l] /= total;
  return pooled;
}

Template::Template(std::string subject_id,
                   std::vector<GaussianEmbedding> members, FusionMode mode)
    : subject_id_(std::move(subject_id)),
      members_(std::move(members)),
      mode_(mode) {
  fused_ = recompute();
}

GaussianEmbedding Template::recompute() const {
  return mode_ == FusionMode::kPrecisionSum ? fuse_batch(members_)
                                            : fuse_min_variance(members_);
}

}  // namespace pfe
