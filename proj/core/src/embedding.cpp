#include "pfe/embedding.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pfe/errors.hpp"
#include "pfe/log.hpp"

namespace pfe {

GaussianEmbedding make_embedding(std::vector<double> mu,
                                 std::vector<double> sigma_sq,
                                 std::string label) {
  GaussianEmbedding e;
  e.mu = std::move(mu);
  e.sigma_sq = std::move(sigma_sq);
  e.label = std::move(label);
  return e;
}

std::vector<std::string> validate_embedding(const GaussianEmbedding& e) {
  std::vector<std::string> violations;
  if (e.mu.empty())
    violations.push_back("dimension must be at least 1");
  if (e.mu.size() != e.sigma_sq.size()) {
    std::ostringstream os;
    os << "mu and sigma_sq lengths differ (" << e.mu.size() << " vs "
       << e.sigma_sq.size() << ")";
    violations.push_back(os.str());
  }
  for (std::size_t l = 0; l < e.mu.size(); ++l) {
    if (!std::isfinite(e.mu[l])) {
      std::ostringstream os;
      os << "non-finite mean at dimension " << l;
      violations.push_back(os.str());
    }
  }
  for (std::size_t l = 0; l < e.sigma_sq.size(); ++l) {
    if (!std::isfinite(e.sigma_sq[l])) {
      std::ostringstream os;
      os << "non-finite variance at dimension " << l;
      violations.push_back(os.str());
    } else if (e.sigma_sq[l] < kVarianceFloor) {
      std::ostringstream os;
      os << "variance below variance floor at dimension " << l << " ("
         << e.sigma_sq[l] << " < " << kVarianceFloor << ")";
      violations.push_back(os.str());
    }
  }
  return violations;
}

void require_valid(const GaussianEmbedding& e) {
  const std::vector<std::string> violations = validate_embedding(e);
  if (violations.empty()) return;
  std::string what = "invalid embedding";
  if (!e.label.empty()) what += " '" + e.label + "'";
  what += ":";
  for (const std::string& v : violations) what += " [" + v + "]";
  throw ValidationError(what);
}

std::size_t clamp_variances(GaussianEmbedding& e) {
  std::size_t clamped = 0;
  for (double& v : e.sigma_sq) {
    if (!(v >= kVarianceFloor)) {  // catches NaN as well
      v = kVarianceFloor;
      ++clamped;
    }
  }
  if (clamped > 0) {
    std::ostringstream os;
    os << "clamped " << clamped << " variance(s) to the floor "
       << kVarianceFloor;
    if (!e.label.empty()) os << " in '" << e.label << "'";
    log::info(os.str());
  }
  return clamped;
}

double mls_dimension_term(double gap_sq, double variance_sum) {
  return -0.5 * (gap_sq / variance_sum + std::log(variance_sum));
}

static void RequireSameDim(const GaussianEmbedding& a,
                           const GaussianEmbedding& b) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << "embedding dimensions differ (" << a.dim() << " vs " << b.dim()
       << ")";
    throw DimensionError(os.str());
  }
}

MatchScore mls_score(const GaussianEmbedding& a, const GaussianEmbedding& b) {
  RequireSameDim(a, b);
  if (a.mu.empty()) throw DimensionError("embeddings must have dimension >= 1");
  const std::size_t dim = a.dim();
  double acc = 0.0;
  for (std::size_t l = 0; l < dim; ++l) {
    const double gap = a.mu[l] - b.mu[l];
    const double v = a.sigma_sq[l] + b.sigma_sq[l];
    acc += mls_dimension_term(gap * gap, v);
  }
  const double value =
      acc - 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(value)) {
    // Valid inputs always yield a finite score, so take the slow path and
    // report which input was broken.
    require_valid(a);
    require_valid(b);
    throw ValidationError("mutual likelihood score is not finite");
  }
  return MatchScore{value, ScoreKind::kMls};
}

MatchScore cosine_score(const GaussianEmbedding& a, const GaussianEmbedding& b) {
  RequireSameDim(a, b);
  if (a.mu.empty()) throw DimensionError("embeddings must have dimension >= 1");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t l = 0; l < a.mu.size(); ++l) {
    dot += a.mu[l] * b.mu[l];
    na += a.mu[l] * a.mu[l];
    nb += b.mu[l] * b.mu[l];
  }
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine similarity of a zero-norm mean vector");
  const double value = dot / (std::sqrt(na) * std::sqrt(nb));
  if (!std::isfinite(value)) {
    require_valid(a);
    require_valid(b);
    throw ValidationError("cosine similarity is not finite");
  }
  return MatchScore{value, ScoreKind::kCosine};
}

MatchScore neg_sq_euclid_score(const GaussianEmbedding& a,
                               const GaussianEmbedding& b) {
  RequireSameDim(a, b);
  if (a.mu.empty()) throw DimensionError("embeddings must have dimension >= 1");
  double acc = 0.0;
  for (std::size_t l = 0; l < a.mu.size(); ++l) {
    const double gap = a.mu[l] - b.mu[l];
    acc += gap * gap;
  }
  if (!std::isfinite(acc)) {
    require_valid(a);
    require_valid(b);
    throw ValidationError("squared distance is not finite");
  }
  return MatchScore{-acc, ScoreKind::kNegSqEuclid};
}

double confidence(const GaussianEmbedding& e, ConfidenceBasis basis) {
  require_valid(e);
  double acc = 0.0;
  for (const double v : e.sigma_sq)
    acc += 1.0 / (basis == ConfidenceBasis::kStdDev ? std::sqrt(v) : v);
  return acc / static_cast<double>(e.dim());
}

}  // namespace pfe
