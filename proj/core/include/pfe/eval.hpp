#ifndef PFE_EVAL_HPP
#define PFE_EVAL_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pfe/embedding.hpp"
#include "pfe/fusion.hpp"

namespace pfe {

// Score conventions: a pair is accepted at threshold t iff score >= t.
// Candidate thresholds are drawn from the impostor empirical distribution
// (every distinct impostor score, plus a sentinel just above the maximum for
// the FAR = 0 operating point); TAR@FAR picks the smallest threshold whose
// FAR does not exceed the target, i.e. the maximal TAR subject to FAR <=
// target under this convention. A target below 1/|impostors| is served at
// the FAR = 0 point and flagged unsupported instead of extrapolated.

struct RocCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> far;         // non-increasing along thresholds
  std::vector<double> tar;         // non-increasing along thresholds
};

struct TarFarEntry {
  double far_target = 0.0;
  bool supported = true;
  double threshold = 0.0;
  double achieved_far = 0.0;
  double tar = 0.0;
};

struct VerifyReport {
  RocCurve roc;
  std::vector<TarFarEntry> tar_at_far;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

VerifyReport verify_roc(const std::vector<double>& genuine_scores,
                        const std::vector<double>& impostor_scores,
                        const std::vector<double>& far_targets);

struct TpirEntry {
  double fpir_target = 0.0;
  bool supported = true;
  double threshold = 0.0;
  double tpir = 0.0;
};

struct OpenSetReport {
  std::vector<double> cmc;  // cmc[k-1] = fraction of in-gallery probes at rank <= k
  std::vector<TpirEntry> tpir_at_fpir;
  std::size_t n_in_gallery = 0;
  std::size_t n_out_gallery = 0;
};

// Open-set identification over fused templates. Rank counts strictly larger
// scores only, so ties resolve optimistically. Acceptance thresholds for
// TPIR@FPIR come from the top scores of out-of-gallery probes; with no such
// probes every target is reported unsupported at the rank-1 rate. Duplicate
// gallery subjects raise ValidationError.
OpenSetReport identify(const std::vector<Template>& gallery,
                       const std::vector<Template>& probes, ScoreKind scorer,
                       const std::vector<double>& fpir_targets);

// A scored verification pair between image indices a and b.
struct ScoredPair {
  std::size_t a = 0;
  std::size_t b = 0;
  double score = 0.0;
  bool genuine = false;
};

enum class PairConfidence { kMin, kMean };

struct FilterCurvePoint {
  double filter_out_rate = 0.0;
  std::optional<double> tar;  // empty when a class empties or FAR unsupported
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

struct FilterCurve {
  double fixed_far = 0.0;
  std::vector<FilterCurvePoint> points;
};

// Risk-controlled comparison count: at rate r the floor(r*N) lowest-
// confidence images are removed (ties broken by index) and TAR at the fixed
// FAR is recomputed over the surviving pairs. kMin drops a pair when either
// endpoint is dropped — exactly the image-set semantics; kMean instead drops
// a pair when the mean of its endpoint confidences is at most the confidence
// of the last image removed. Rates must be strictly increasing within
// [0, 1); rate 0 always reproduces the unfiltered verify_roc value.
FilterCurve filter_curve(const std::vector<double>& image_confidences,
                         const std::vector<ScoredPair>& pairs, double fixed_far,
                         const std::vector<double>& rates,
                         PairConfidence combiner = PairConfidence::kMin);

// CSV emitters (schemas documented in the README).
std::string roc_csv(const RocCurve& roc);
std::string verify_csv(const VerifyReport& report);
std::string identify_csv(const OpenSetReport& report);
std::string filter_curve_csv(const FilterCurve& curve);

// Plain-text tables for terminals.
std::string verify_text(const VerifyReport& report);
std::string identify_text(const OpenSetReport& report);
std::string filter_curve_text(const FilterCurve& curve);

}  // namespace pfe

#endif  // PFE_EVAL_HPP
