#ifndef PFE_EMBEDDING_HPP
#define PFE_EMBEDDING_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace pfe {

// Variances below this are clamped on ingestion / prediction (clamps are
// logged). validate_embedding reports anything below it as a violation.
inline constexpr double kVarianceFloor = 1e-8;

// An embedding as an axis-aligned Gaussian in feature space: a mean vector
// and a per-dimension variance. label is the subject id when known, ""
// otherwise. All arithmetic is double; storage formats narrow to float32.
struct GaussianEmbedding {
  std::vector<double> mu;
  std::vector<double> sigma_sq;
  std::string label;

  std::size_t dim() const { return mu.size(); }
};

GaussianEmbedding make_embedding(std::vector<double> mu,
                                 std::vector<double> sigma_sq,
                                 std::string label = std::string());

enum class ScoreKind { kMls, kCosine, kNegSqEuclid };

struct MatchScore {
  double value;
  ScoreKind kind;
};

// Returns a human-readable message per violated invariant (empty means
// valid): length mismatch or zero dimension, non-finite mean, non-finite
// variance, variance below the floor.
std::vector<std::string> validate_embedding(const GaussianEmbedding& e);

// Throws ValidationError listing every violation.
void require_valid(const GaussianEmbedding& e);

// Raises each variance to kVarianceFloor; returns how many were clamped.
std::size_t clamp_variances(GaussianEmbedding& e);

// One dimension's contribution to the mutual likelihood score, excluding the
// -log(2*pi)/2 constant: -(gap_sq / variance_sum + log(variance_sum)) / 2,
// where gap_sq = (mu_a - mu_b)^2 and variance_sum = sigma_sq_a + sigma_sq_b.
// As a function of variance_sum with gap_sq > 0 fixed, it has a unique
// maximum at variance_sum == gap_sq and falls to -inf at both 0+ and +inf.
double mls_dimension_term(double gap_sq, double variance_sum);

// Mutual likelihood: the log density at zero of the difference of the two
// Gaussians,
//
//   s(a, b) = -1/2 sum_l [ (mu_a(l) - mu_b(l))^2 / v(l) + log v(l) ]
//             - D/2 log(2 pi),      v(l) = sigma_sq_a(l) + sigma_sq_b(l).
//
// Symmetric in its arguments, including in floating point. With every
// variance equal to a constant c this reduces to
// -|mu_a - mu_b|^2 / (4 c) - D/2 log(4 pi c), a scaled-shifted negative
// squared Euclidean distance. Throws DimensionError on a length mismatch and
// ValidationError if either input holds non-finite values.
MatchScore mls_score(const GaussianEmbedding& a, const GaussianEmbedding& b);

// Cosine similarity of the mean vectors (variances ignored). Throws
// ValidationError on a zero-norm mean, DimensionError on a length mismatch.
MatchScore cosine_score(const GaussianEmbedding& a, const GaussianEmbedding& b);

// -|mu_a - mu_b|^2, the deterministic baseline the uniform-variance case of
// mls_score is a scaled and shifted version of. Variances ignored.
MatchScore neg_sq_euclid_score(const GaussianEmbedding& a,
                               const GaussianEmbedding& b);

// What the confidence scalar reads: the standard deviations (default) or the
// variances.
enum class ConfidenceBasis { kStdDev, kVariance };

// Inverse harmonic mean of the per-dimension uncertainty: with the kStdDev
// basis, (1/D) sum_l 1/sigma(l). Permutation-invariant, strictly decreasing
// in every sigma(l); equals 1/sqrt(c) when every variance is c.
double confidence(const GaussianEmbedding& e,
                  ConfidenceBasis basis = ConfidenceBasis::kStdDev);

}  // namespace pfe

#endif  // PFE_EMBEDDING_HPP
