#include "pfe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "pfe/errors.hpp"
#include "pfe/log.hpp"

namespace pfe {

namespace {

void RequireFinite(const std::vector<double>& scores, const char* what) {
  for (const double s : scores)
    if (!std::isfinite(s))
      throw ValidationError(std::string("non-finite ") + what + " score");
}

// Fraction of `sorted_asc` at or above t.
double FractionAtOrAbove(const std::vector<double>& sorted_asc, double t) {
  const auto it = std::lower_bound(sorted_asc.begin(), sorted_asc.end(), t);
  return static_cast<double>(sorted_asc.end() - it) /
         static_cast<double>(sorted_asc.size());
}

// Distinct values ascending plus a sentinel just above the maximum, so the
// last threshold always realizes FAR = 0.
std::vector<double> ThresholdLadder(const std::vector<double>& sorted_asc) {
  std::vector<double> t;
  t.reserve(sorted_asc.size() + 1);
  for (const double v : sorted_asc)
    if (t.empty() || v != t.back()) t.push_back(v);
  t.push_back(std::nextafter(sorted_asc.back(),
                             std::numeric_limits<double>::infinity()));
  return t;
}

}  // namespace

VerifyReport verify_roc(const std::vector<double>& genuine_scores,
                        const std::vector<double>& impostor_scores,
                        const std::vector<double>& far_targets) {
  if (genuine_scores.empty() || impostor_scores.empty())
    throw EmptySetError("verification needs genuine and impostor scores");
  RequireFinite(genuine_scores, "genuine");
  RequireFinite(impostor_scores, "impostor");

  std::vector<double> gen = genuine_scores;
  std::vector<double> imp = impostor_scores;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  VerifyReport report;
  report.n_genuine = gen.size();
  report.n_impostor = imp.size();
  report.roc.thresholds = ThresholdLadder(imp);
  report.roc.far.reserve(report.roc.thresholds.size());
  report.roc.tar.reserve(report.roc.thresholds.size());
  for (const double t : report.roc.thresholds) {
    report.roc.far.push_back(FractionAtOrAbove(imp, t));
    report.roc.tar.push_back(FractionAtOrAbove(gen, t));
  }

  for (const double target : far_targets) {
    if (!(target >= 0.0 && target <= 1.0))
      throw ValidationError("FAR targets must lie in [0, 1]");
    TarFarEntry entry;
    entry.far_target = target;
    entry.supported =
        target >= 1.0 / static_cast<double>(imp.size());
    // far is non-increasing along the ascending threshold ladder; take the
    // smallest threshold with FAR <= target (maximal TAR).
    std::size_t lo = 0, hi = report.roc.thresholds.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (report.roc.far[mid] <= target)
        hi = mid;
      else
        lo = mid + 1;
    }
    entry.threshold = report.roc.thresholds[lo];
    entry.achieved_far = report.roc.far[lo];
    entry.tar = report.roc.tar[lo];
    report.tar_at_far.push_back(entry);
  }
  return report;
}

namespace {

double TemplateScore(const Template& probe, const Template& g,
                     ScoreKind scorer) {
  switch (scorer) {
    case ScoreKind::kMls:
      return mls_score(probe.fused(), g.fused()).value;
    case ScoreKind::kNegSqEuclid:
      return neg_sq_euclid_score(probe.fused(), g.fused()).value;
    case ScoreKind::kCosine:
      break;
  }
  return cosine_score(probe.fused(), g.fused()).value;
}

}  // namespace

OpenSetReport identify(const std::vector<Template>& gallery,
                       const std::vector<Template>& probes, ScoreKind scorer,
                       const std::vector<double>& fpir_targets) {
  if (gallery.empty() || probes.empty())
    throw EmptySetError("identification needs a gallery and probes");
  std::map<std::string, std::size_t> gallery_index;
  for (std::size_t g = 0; g < gallery.size(); ++g)
    if (!gallery_index.emplace(gallery[g].subject_id(), g).second)
      throw ValidationError("duplicate gallery subject '" +
                            gallery[g].subject_id() + "'");

  std::vector<std::size_t> ranks;  // in-gallery probes only
  std::vector<double> true_scores;
  std::vector<double> out_top_scores;
  for (const Template& probe : probes) {
    std::vector<double> scores(gallery.size());
    for (std::size_t g = 0; g < gallery.size(); ++g)
      scores[g] = TemplateScore(probe, gallery[g], scorer);
    const auto it = gallery_index.find(probe.subject_id());
    if (it == gallery_index.end()) {
      out_top_scores.push_back(*std::max_element(scores.begin(), scores.end()));
      continue;
    }
    const double s_true = scores[it->second];
    std::size_t rank = 1;
    for (const double s : scores)
      if (s > s_true) ++rank;  // strictly-larger only: optimistic ties
    ranks.push_back(rank);
    true_scores.push_back(s_true);
  }

  OpenSetReport report;
  report.n_in_gallery = ranks.size();
  report.n_out_gallery = out_top_scores.size();
  report.cmc.assign(gallery.size(), 0.0);
  if (!ranks.empty()) {
    for (const std::size_t r : ranks)
      if (r <= report.cmc.size()) report.cmc[r - 1] += 1.0;
    double acc = 0.0;
    for (double& c : report.cmc) {
      acc += c;
      c = acc / static_cast<double>(ranks.size());
    }
  }

  const double rank1 = report.cmc.empty() ? 0.0 : report.cmc.front();
  if (out_top_scores.empty()) {
    log::info("no out-of-gallery probes: FPIR undefined, reporting rank-1 rate");
    for (const double target : fpir_targets)
      report.tpir_at_fpir.push_back(
          TpirEntry{target, false,
                    -std::numeric_limits<double>::infinity(), rank1});
    return report;
  }

  std::sort(out_top_scores.begin(), out_top_scores.end());
  const std::vector<double> ladder = ThresholdLadder(out_top_scores);
  auto tpir_at = [&](double t) {
    if (ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
      if (ranks[i] == 1 && true_scores[i] >= t) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
  };
  for (const double target : fpir_targets) {
    if (!(target >= 0.0 && target <= 1.0))
      throw ValidationError("FPIR targets must lie in [0, 1]");
    TpirEntry entry;
    entry.fpir_target = target;
    entry.supported =
        target >= 1.0 / static_cast<double>(out_top_scores.size());
    std::size_t chosen = ladder.size() - 1;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      if (FractionAtOrAbove(out_top_scores, ladder[i]) <= target) {
        chosen = i;
        break;
      }
    }
    entry.threshold = ladder[chosen];
    entry.tpir = tpir_at(entry.threshold);
    report.tpir_at_fpir.push_back(entry);
  }
  return report;
}

FilterCurve filter_curve(const std::vector<double>& image_confidences,
                         const std::vector<ScoredPair>& pairs, double fixed_far,
                         const std::vector<double>& rates,
                         PairConfidence combiner) {
  if (image_confidences.empty()) throw EmptySetError("no image confidences");
  if (pairs.empty()) throw EmptySetError("no scored pairs");
  if (rates.empty()) throw EmptySetError("no filter-out rates");
  if (!(fixed_far > 0.0 && fixed_far <= 1.0))
    throw ValidationError("fixed FAR must lie in (0, 1]");
  RequireFinite(image_confidences, "confidence");
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (!(rates[i] > rates[i - 1]))
      throw ValidationError("filter-out rates must be strictly increasing");
  for (const double r : rates)
    if (!(r >= 0.0 && r < 1.0))
      throw ValidationError("filter-out rates must lie in [0, 1)");
  const std::size_t n = image_confidences.size();
  for (const ScoredPair& p : pairs) {
    if (p.a >= n || p.b >= n)
      throw ValidationError("pair references an unknown image index");
    if (!std::isfinite(p.score))
      throw ValidationError("non-finite pair score");
  }

  // Ascending confidence, ties by index: the drop order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (image_confidences[a] != image_confidences[b])
      return image_confidences[a] < image_confidences[b];
    return a < b;
  });

  FilterCurve curve;
  curve.fixed_far = fixed_far;
  std::vector<char> dropped(n, 0);
  std::size_t k_done = 0;
  for (const double rate : rates) {
    const std::size_t k = static_cast<std::size_t>(
        std::floor(rate * static_cast<double>(n)));
    for (; k_done < k; ++k_done) dropped[order[k_done]] = 1;
    const double cut = k == 0 ? -std::numeric_limits<double>::infinity()
                              : image_confidences[order[k - 1]];

    std::vector<double> genuine, impostor;
    for (const ScoredPair& p : pairs) {
      bool keep;
      if (combiner == PairConfidence::kMin) {
        keep = !dropped[p.a] && !dropped[p.b];
      } else {
        const double mean =
            0.5 * (image_confidences[p.a] + image_confidences[p.b]);
        keep = mean > cut;
      }
      if (!keep) continue;
      (p.genuine ? genuine : impostor).push_back(p.score);
    }

    FilterCurvePoint point;
    point.filter_out_rate = rate;
    point.n_genuine = genuine.size();
    point.n_impostor = impostor.size();
    if (!genuine.empty() && !impostor.empty()) {
      const VerifyReport r = verify_roc(genuine, impostor, {fixed_far});
      if (r.tar_at_far.front().supported)
        point.tar = r.tar_at_far.front().tar;
    }
    curve.points.push_back(point);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Emitters.

std::string roc_csv(const RocCurve& roc) {
  std::ostringstream os;
  os << "threshold,far,tar\n";
  char buf[128];
  for (std::size_t i = 0; i < roc.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", roc.thresholds[i],
                  roc.far[i], roc.tar[i]);
    os << buf;
  }
  return os.str();
}

std::string verify_csv(const VerifyReport& report) {
  std::ostringstream os;
  os << "far_target,supported,threshold,achieved_far,tar\n";
  char buf[160];
  for (const TarFarEntry& e : report.tar_at_far) {
    std::snprintf(buf, sizeof buf, "%.9g,%d,%.9g,%.9g,%.9g\n", e.far_target,
                  e.supported ? 1 : 0, e.threshold, e.achieved_far, e.tar);
    os << buf;
  }
  return os.str();
}

std::string identify_csv(const OpenSetReport& report) {
  std::ostringstream os;
  os << "kind,key,value\n";
  char buf[128];
  for (std::size_t k = 0; k < report.cmc.size(); ++k) {
    std::snprintf(buf, sizeof buf, "cmc,%zu,%.9g\n", k + 1, report.cmc[k]);
    os << buf;
  }
  for (const TpirEntry& e : report.tpir_at_fpir) {
    std::snprintf(buf, sizeof buf, "tpir,%.9g,%.9g\n", e.fpir_target, e.tpir);
    os << buf;
    std::snprintf(buf, sizeof buf, "tpir_threshold,%.9g,%.9g\n", e.fpir_target,
                  e.threshold);
    os << buf;
    std::snprintf(buf, sizeof buf, "tpir_supported,%.9g,%d\n", e.fpir_target,
                  e.supported ? 1 : 0);
    os << buf;
  }
  return os.str();
}

std::string filter_curve_csv(const FilterCurve& curve) {
  std::ostringstream os;
  os << "filter_out_rate,tar_at_fixed_far,n_genuine,n_impostor\n";
  char buf[160];
  for (const FilterCurvePoint& p : curve.points) {
    if (p.tar.has_value())
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu,%zu\n", p.filter_out_rate,
                    *p.tar, p.n_genuine, p.n_impostor);
    else
      std::snprintf(buf, sizeof buf, "%.6f,,%zu,%zu\n", p.filter_out_rate,
                    p.n_genuine, p.n_impostor);
    os << buf;
  }
  return os.str();
}

std::string verify_text(const VerifyReport& report) {
  std::ostringstream os;
  os << "verification: " << report.n_genuine << " genuine, "
     << report.n_impostor << " impostor pairs\n";
  os << "  FAR target    threshold   achieved FAR        TAR\n";
  char buf[160];
  for (const TarFarEntry& e : report.tar_at_far) {
    std::snprintf(buf, sizeof buf, "  %10.6f %12.6f %14.6f %10.6f%s\n",
                  e.far_target, e.threshold, e.achieved_far, e.tar,
                  e.supported ? "" : "  (unsupported target)");
    os << buf;
  }
  return os.str();
}

std::string identify_text(const OpenSetReport& report) {
  std::ostringstream os;
  os << "identification: " << report.n_in_gallery << " in-gallery, "
     << report.n_out_gallery << " out-of-gallery probes\n";
  char buf[160];
  const std::size_t max_rank = report.cmc.size();
  for (const std::size_t r : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
    if (r <= max_rank) {
      std::snprintf(buf, sizeof buf, "  rank-%zu rate %10.6f\n", r,
                    report.cmc[r - 1]);
      os << buf;
    }
  }
  for (const TpirEntry& e : report.tpir_at_fpir) {
    std::snprintf(buf, sizeof buf, "  TPIR @ FPIR=%g: %10.6f%s\n",
                  e.fpir_target, e.tpir,
                  e.supported ? "" : "  (unsupported target)");
    os << buf;
  }
  return os.str();
}

std::string filter_curve_text(const FilterCurve& curve) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "TAR at FAR=%g vs filter-out rate\n",
                curve.fixed_far);
  os << buf;
  os << "  rate        TAR   genuine  impostor\n";
  for (const FilterCurvePoint& p : curve.points) {
    if (p.tar.has_value())
      std::snprintf(buf, sizeof buf, "  %4.2f %10.6f %9zu %9zu\n",
                    p.filter_out_rate, *p.tar, p.n_genuine, p.n_impostor);
    else
      std::snprintf(buf, sizeof buf, "  %4.2f  undefined %9zu %9zu\n",
                    p.filter_out_rate, p.n_genuine, p.n_impostor);
    os << buf;
  }
  return os.str();
}

}  // namespace pfe
