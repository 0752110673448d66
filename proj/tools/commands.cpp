#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "pfe/embedding.hpp"
#include "pfe/embedding_io.hpp"
#include "pfe/errors.hpp"
#include "pfe/eval.hpp"
#include "pfe/fusion.hpp"
#include "pfe/log.hpp"
#include "pfe/synth.hpp"
#include "pfe/trainer.hpp"
#include "pfe/uncertainty_head.hpp"
#include "run_config.hpp"

namespace pfe {
namespace cli {

namespace {

std::string FormatScore(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return std::string(buf);
}

void WriteTextFile(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<double> ParseDoubleList(const std::string& text,
                                    const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      throw ConfigError(std::string("bad ") + what + " entry: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

RunConfig LoadConfigOrDefaults(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

double ScorePair(const GaussianEmbedding& a, const GaussianEmbedding& b,
                 ScoreKind scorer) {
  switch (scorer) {
    case ScoreKind::kMls:
      return mls_score(a, b).value;
    case ScoreKind::kNegSqEuclid:
      return neg_sq_euclid_score(a, b).value;
    case ScoreKind::kCosine:
      break;
  }
  return cosine_score(a, b).value;
}

// Same-subject pairs (capped per subject) and sampled cross-subject pairs
// over a labeled embedding list.
void BuildFileProtocol(const std::vector<GaussianEmbedding>& embeddings,
                       std::uint64_t seed, std::size_t genuine_per_subject,
                       std::size_t impostor_pairs,
                       std::vector<std::pair<std::size_t, std::size_t>>* genuine,
                       std::vector<std::pair<std::size_t, std::size_t>>* impostor) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].label.empty())
      throw ValidationError("verification protocol needs labeled embeddings");
    by_label[embeddings[i].label].push_back(i);
  }
  if (by_label.size() < 2)
    throw ValidationError("verification protocol needs at least two subjects");

  Rng rng(Rng::derive(seed, 0x66696c65));
  for (const auto& [label, members] : by_label) {
    std::vector<std::pair<std::size_t, std::size_t>> local;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        local.emplace_back(members[a], members[b]);
    if (local.size() <= genuine_per_subject) {
      genuine->insert(genuine->end(), local.begin(), local.end());
    } else {
      for (const std::size_t i :
           rng.sample_without_replacement(local.size(), genuine_per_subject))
        genuine->push_back(local[i]);
    }
  }
  if (genuine->empty())
    throw ValidationError("no subject has two or more embeddings");

  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = impostor_pairs * 20 + 1000;
  const std::size_t n = embeddings.size();
  while (impostor->size() < impostor_pairs && attempts++ < max_attempts) {
    const std::size_t a = static_cast<std::size_t>(rng.below(n));
    const std::size_t b = static_cast<std::size_t>(rng.below(n));
    if (a == b || embeddings[a].label == embeddings[b].label) continue;
    const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (seen.insert(key).second) impostor->push_back(key);
  }
  if (impostor->empty())
    throw ValidationError("could not sample any impostor pairs");
}

struct ScoredProtocol {
  std::vector<double> genuine;
  std::vector<double> impostor;
  std::vector<ScoredPair> pairs;  // flat view for filter curves
};

ScoredProtocol ScoreProtocol(
    const std::vector<GaussianEmbedding>& embeddings,
    const std::vector<std::pair<std::size_t, std::size_t>>& genuine,
    const std::vector<std::pair<std::size_t, std::size_t>>& impostor,
    ScoreKind scorer) {
  ScoredProtocol sp;
  sp.genuine.reserve(genuine.size());
  sp.impostor.reserve(impostor.size());
  for (const auto& [a, b] : genuine) {
    const double s = ScorePair(embeddings[a], embeddings[b], scorer);
    sp.genuine.push_back(s);
    sp.pairs.push_back(ScoredPair{a, b, s, true});
  }
  for (const auto& [a, b] : impostor) {
    const double s = ScorePair(embeddings[a], embeddings[b], scorer);
    sp.impostor.push_back(s);
    sp.pairs.push_back(ScoredPair{a, b, s, false});
  }
  return sp;
}

std::optional<UncertaintyHead> MaybeLoadHead(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_head(path);
}

// Synthetic embeddings for evaluation commands: corpus + optional head.
std::vector<GaussianEmbedding> SynthEmbeddings(const SynthCorpus& corpus,
                                               const std::string& head_path,
                                               ScoreKind scorer,
                                               bool head_mandatory) {
  std::optional<UncertaintyHead> head = MaybeLoadHead(head_path);
  if (!head.has_value() && (head_mandatory || scorer == ScoreKind::kMls))
    throw ConfigError("this evaluation needs --head for predicted variances");
  return corpus_embeddings(corpus, head.has_value() ? &*head : nullptr);
}

// --- subcommand option blocks -------------------------------------------

struct ScoreOpts {
  std::string path_a, path_b;
  std::string metric = "mls";
};

struct FuseOpts {
  std::string input;
  std::string mode = "min-variance";
  bool by_subject = false;
  std::string output;
};

struct SynthOpts {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_embeddings;
  std::string out_samples;
};

struct TrainOpts {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string loss_log;
};

struct SweepOpts {
  std::string config;
  std::uint64_t seed = 0;
  std::string scorer = "cosine";
  std::string head;
  std::string levels = "1.0,0.8,0.6,0.4,0.2,0.05";
  std::string mode;
  std::size_t impostor_pairs = 1000;
  std::string out;
};

struct VerifyOpts {
  std::string embeddings;
  std::string config;
  std::uint64_t seed = 0;
  std::string scorer = "mls";
  std::string head;
  std::string far = "0.1,0.01,0.001";
  std::string out;
  std::string roc_out;
};

struct IdentifyOpts {
  std::string gallery, probes;
  std::string config;
  std::uint64_t seed = 0;
  std::string scorer = "mls";
  std::string head;
  std::string fusion_mode;
  std::string fpir = "0.1,0.01";
  std::string out;
};

struct FilterOpts {
  std::string embeddings;
  std::string config;
  std::uint64_t seed = 0;
  std::string scorer = "cosine";
  std::string head;
  double far = 0.01;
  std::string rates = "0,0.1,0.2,0.3";
  std::string combiner = "min";
  std::string criterion = "confidence";
  std::string out;
};

// --- handlers -------------------------------------------------------------

void RunScore(const ScoreOpts& o, std::ostream& out) {
  const ScoreKind kind = score_kind_from_name(o.metric);
  const std::vector<GaussianEmbedding> a = read_embeddings(o.path_a);
  const std::vector<GaussianEmbedding> b = read_embeddings(o.path_b);
  if (a.empty() || b.empty())
    throw EmptySetError("both embedding files must be non-empty");
  for (const GaussianEmbedding& ea : a)
    for (const GaussianEmbedding& eb : b)
      out << FormatScore(ScorePair(ea, eb, kind)) << "\n";
}

void PrintFused(const GaussianEmbedding& e, std::ostream& out) {
  out << "mu";
  for (const double v : e.mu) out << " " << FormatScore(v);
  out << "\nsigma_sq";
  for (const double v : e.sigma_sq) out << " " << FormatScore(v);
  out << "\n";
}

void RunFuse(const FuseOpts& o, std::ostream& out) {
  const FusionMode mode = fusion_mode_from_name(o.mode);
  const std::vector<GaussianEmbedding> members = read_embeddings(o.input);
  if (members.empty()) throw EmptySetError("no embeddings to fuse");

  std::vector<GaussianEmbedding> fused;
  if (o.by_subject) {
    std::map<std::string, std::vector<GaussianEmbedding>> groups;
    for (const GaussianEmbedding& e : members) groups[e.label].push_back(e);
    for (auto& [label, group] : groups) {
      Template t(label, std::move(group), mode);
      out << "subject " << (label.empty() ? "(unlabeled)" : label) << "\n";
      PrintFused(t.fused(), out);
      fused.push_back(t.fused());
    }
  } else {
    Template t(members.front().label, members, mode);
    PrintFused(t.fused(), out);
    fused.push_back(t.fused());
  }
  if (!o.output.empty()) write_embeddings(o.output, fused, true);
}

void RunSynth(const SynthOpts& o, std::ostream& out) {
  if (o.out_embeddings.empty() && o.out_samples.empty())
    throw ConfigError("synth needs --out-embeddings and/or --out-samples");
  const RunConfig cfg = LoadConfigOrDefaults(o.config);
  const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
  if (!o.out_embeddings.empty()) {
    // The generator produces means only; variances come from a trained head.
    write_embeddings(o.out_embeddings, corpus_embeddings(corpus, nullptr),
                     false);
  }
  if (!o.out_samples.empty()) {
    std::ostringstream csv;
    csv << "subject_id,quality,true_noise_var";
    for (std::size_t a = 0; a < corpus.params.aux_channels; ++a)
      csv << ",aux_" << a;
    for (std::size_t l = 0; l < corpus.params.dim; ++l) csv << ",mu_" << l;
    csv << "\n";
    char buf[64];
    for (const SynthSample& s : corpus.samples) {
      csv << corpus.subject_ids[s.identity];
      std::snprintf(buf, sizeof buf, ",%.9g,%.9g", s.quality, s.true_noise_var);
      csv << buf;
      for (const double v : s.aux) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        csv << buf;
      }
      for (const double v : s.observed_mu) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        csv << buf;
      }
      csv << "\n";
    }
    WriteTextFile(o.out_samples, csv.str());
  }
  out << "generated " << corpus.samples.size() << " samples over "
      << corpus.params.identities << " identities (dim " << corpus.params.dim
      << ")\n";
}

void RunTrainHead(const TrainOpts& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("train-head needs --out");
  RunConfig cfg = LoadConfigOrDefaults(o.config);
  cfg.train.seed = o.seed;
  const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
  const TrainResult result =
      train(make_head_for_corpus(corpus, cfg.train), corpus, cfg.train);
  save_head(o.out, result.head);
  if (!o.loss_log.empty()) {
    std::ostringstream csv;
    csv << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < result.loss_log.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, result.loss_log[i]);
      csv << buf;
    }
    WriteTextFile(o.loss_log, csv.str());
  }
  out << "trained " << result.loss_log.size() << " steps, final loss "
      << (result.loss_log.empty() ? std::string("n/a")
                                  : FormatScore(result.loss_log.back()))
      << "\n";
}

void RunSweep(const SweepOpts& o, std::ostream& out) {
  const RunConfig cfg = LoadConfigOrDefaults(o.config);
  const ScoreKind scorer = score_kind_from_name(o.scorer);
  const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
  DegradationSpec spec;
  spec.mode = o.mode.empty() ? cfg.synth.mode : degradation_mode_from_name(o.mode);
  spec.levels = ParseDoubleList(o.levels, "level");
  const std::optional<UncertaintyHead> head = MaybeLoadHead(o.head);
  const SweepResult result =
      dilemma_sweep(corpus, spec, scorer, head.has_value() ? &*head : nullptr,
                    o.seed, o.impostor_pairs);
  const std::string csv = sweep_csv(result);
  if (o.out.empty())
    out << csv;
  else
    WriteTextFile(o.out, csv);
}

void RunVerify(const VerifyOpts& o, std::ostream& out) {
  const RunConfig cfg = LoadConfigOrDefaults(o.config);
  const ScoreKind scorer = score_kind_from_name(o.scorer);
  const std::vector<double> far_targets = ParseDoubleList(o.far, "FAR");

  std::vector<GaussianEmbedding> embeddings;
  std::vector<std::pair<std::size_t, std::size_t>> genuine, impostor;
  if (!o.embeddings.empty()) {
    embeddings = read_embeddings(o.embeddings);
    BuildFileProtocol(embeddings, o.seed, cfg.genuine_per_subject,
                      cfg.impostor_pairs, &genuine, &impostor);
  } else {
    const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
    embeddings = SynthEmbeddings(corpus, o.head, scorer, false);
    const PairProtocol proto = build_pair_protocol(
        corpus, o.seed, cfg.genuine_per_subject, cfg.impostor_pairs);
    genuine = proto.genuine;
    impostor = proto.impostor;
  }

  const ScoredProtocol sp = ScoreProtocol(embeddings, genuine, impostor, scorer);
  const VerifyReport report = verify_roc(sp.genuine, sp.impostor, far_targets);
  out << verify_text(report);
  if (!o.out.empty()) WriteTextFile(o.out, verify_csv(report));
  if (!o.roc_out.empty()) WriteTextFile(o.roc_out, roc_csv(report.roc));
}

void RunIdentify(const IdentifyOpts& o, std::ostream& out) {
  const RunConfig cfg = LoadConfigOrDefaults(o.config);
  const ScoreKind scorer = score_kind_from_name(o.scorer);
  const FusionMode fusion = o.fusion_mode.empty()
                                ? cfg.fusion_mode
                                : fusion_mode_from_name(o.fusion_mode);
  const std::vector<double> fpir_targets = ParseDoubleList(o.fpir, "FPIR");

  std::vector<Template> gallery, probes;
  if (!o.gallery.empty() || !o.probes.empty()) {
    if (o.gallery.empty() || o.probes.empty())
      throw ConfigError("file mode needs both --gallery and --probes");
    std::map<std::string, std::vector<GaussianEmbedding>> groups;
    for (GaussianEmbedding& e : read_embeddings(o.gallery)) {
      if (e.label.empty())
        throw ValidationError("gallery embeddings must be labeled");
      groups[e.label].push_back(std::move(e));
    }
    for (auto& [label, members] : groups)
      gallery.emplace_back(label, std::move(members), fusion);
    for (GaussianEmbedding& e : read_embeddings(o.probes)) {
      const std::string label = e.label;
      probes.emplace_back(label, std::vector<GaussianEmbedding>{std::move(e)},
                          fusion);
    }
  } else {
    const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
    const std::vector<GaussianEmbedding> embeddings =
        SynthEmbeddings(corpus, o.head, scorer, false);
    const std::size_t k = corpus.params.identities;
    const std::size_t s = corpus.params.samples_per_identity;
    if (k < 2 || s < 2)
      throw ValidationError("identification needs >= 2 identities and >= 2 samples");
    Rng rng(Rng::derive(o.seed, 0x67616c));
    std::vector<std::size_t> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = i;
    rng.shuffle(ids);
    const std::size_t in_gallery = (k + 1) / 2;
    const std::size_t enroll = (s + 1) / 2;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t id = ids[i];
      const std::string& label = corpus.subject_ids[id];
      if (i < in_gallery) {
        std::vector<GaussianEmbedding> members(
            embeddings.begin() + corpus.sample_index(id, 0),
            embeddings.begin() + corpus.sample_index(id, enroll));
        gallery.emplace_back(label, std::move(members), fusion);
        for (std::size_t j = enroll; j < s; ++j)
          probes.emplace_back(label,
                              std::vector<GaussianEmbedding>{
                                  embeddings[corpus.sample_index(id, j)]},
                              fusion);
      } else {
        for (std::size_t j = 0; j < s; ++j)
          probes.emplace_back(label,
                              std::vector<GaussianEmbedding>{
                                  embeddings[corpus.sample_index(id, j)]},
                              fusion);
      }
    }
  }

  const OpenSetReport report = identify(gallery, probes, scorer, fpir_targets);
  out << identify_text(report);
  if (!o.out.empty()) WriteTextFile(o.out, identify_csv(report));
}

void RunFilterCurve(const FilterOpts& o, std::ostream& out) {
  const RunConfig cfg = LoadConfigOrDefaults(o.config);
  const ScoreKind scorer = score_kind_from_name(o.scorer);
  const std::vector<double> rates = ParseDoubleList(o.rates, "rate");
  const PairConfidence combiner =
      o.combiner == "mean" ? PairConfidence::kMean : PairConfidence::kMin;
  if (o.combiner != "mean" && o.combiner != "min")
    throw ConfigError("unknown combiner '" + o.combiner +
                      "' (expected min|mean)");

  std::vector<GaussianEmbedding> embeddings;
  std::vector<std::pair<std::size_t, std::size_t>> genuine, impostor;
  if (!o.embeddings.empty()) {
    EmbeddingFileInfo info;
    embeddings = read_embeddings(o.embeddings, &info);
    if (!info.has_variances && o.criterion == "confidence")
      throw ConfigError(
          "confidence filtering needs variances in the embedding store");
    BuildFileProtocol(embeddings, o.seed, cfg.genuine_per_subject,
                      cfg.impostor_pairs, &genuine, &impostor);
  } else {
    const SynthCorpus corpus = gen_corpus(cfg.synth, o.seed);
    const bool needs_head = o.criterion == "confidence";
    embeddings = SynthEmbeddings(corpus, o.head, scorer, needs_head);
    const PairProtocol proto = build_pair_protocol(
        corpus, o.seed, cfg.genuine_per_subject, cfg.impostor_pairs);
    genuine = proto.genuine;
    impostor = proto.impostor;
  }

  std::vector<double> confidences(embeddings.size());
  if (o.criterion == "confidence") {
    for (std::size_t i = 0; i < embeddings.size(); ++i)
      confidences[i] = confidence(embeddings[i]);
  } else if (o.criterion == "random") {
    Rng rng(Rng::derive(o.seed, 0x72616e64));
    for (double& c : confidences) c = rng.uniform01();
  } else {
    throw ConfigError("unknown criterion '" + o.criterion +
                      "' (expected confidence|random)");
  }

  const ScoredProtocol sp = ScoreProtocol(embeddings, genuine, impostor, scorer);
  const FilterCurve curve =
      filter_curve(confidences, sp.pairs, o.far, rates, combiner);
  out << filter_curve_text(curve);
  if (!o.out.empty()) WriteTextFile(o.out, filter_curve_csv(curve));
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"probabilistic embedding toolkit"};
  app.require_subcommand(1);

  ScoreOpts score_opts;
  CLI::App* score_cmd =
      app.add_subcommand("score", "score pairs across two embedding files");
  score_cmd->add_option("a", score_opts.path_a, "first embedding file")
      ->required();
  score_cmd->add_option("b", score_opts.path_b, "second embedding file")
      ->required();
  score_cmd->add_option("--metric", score_opts.metric, "mls|cosine|neg-sq-euclid");

  FuseOpts fuse_opts;
  CLI::App* fuse_cmd =
      app.add_subcommand("fuse", "fuse embeddings into templates");
  fuse_cmd->add_option("input", fuse_opts.input, "embedding file")->required();
  fuse_cmd->add_option("--mode", fuse_opts.mode, "precision-sum|min-variance");
  fuse_cmd->add_flag("--by-subject", fuse_opts.by_subject,
                     "one template per label");
  fuse_cmd->add_option("-o,--out", fuse_opts.output, "write fused embeddings");

  SynthOpts synth_opts;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--config", synth_opts.config, "run configuration");
  synth_cmd->add_option("--seed", synth_opts.seed, "rng seed");
  synth_cmd->add_option("--out-embeddings", synth_opts.out_embeddings,
                        "embedding store output");
  synth_cmd->add_option("--out-samples", synth_opts.out_samples,
                        "sample table csv output");

  TrainOpts train_opts;
  CLI::App* train_cmd =
      app.add_subcommand("train-head", "train the uncertainty head");
  train_cmd->add_option("--config", train_opts.config, "run configuration");
  train_cmd->add_option("--seed", train_opts.seed, "rng seed");
  train_cmd->add_option("--out", train_opts.out, "head checkpoint output")
      ->required();
  train_cmd->add_option("--loss-log", train_opts.loss_log, "loss csv output");

  SweepOpts sweep_opts;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "degradation sweep of genuine/impostor score statistics");
  sweep_cmd->add_option("--config", sweep_opts.config, "run configuration");
  sweep_cmd->add_option("--seed", sweep_opts.seed, "rng seed");
  sweep_cmd->add_option("--scorer", sweep_opts.scorer, "cosine|mls|neg-sq-euclid");
  sweep_cmd->add_option("--head", sweep_opts.head, "head checkpoint (mls)");
  sweep_cmd->add_option("--levels", sweep_opts.levels,
                        "comma list, strictly decreasing");
  sweep_cmd->add_option("--mode", sweep_opts.mode, "blur|occlusion|noise");
  sweep_cmd->add_option("--impostor-pairs", sweep_opts.impostor_pairs,
                        "impostor pairs per level");
  sweep_cmd->add_option("--out", sweep_opts.out, "csv output (default stdout)");

  VerifyOpts verify_opts;
  CLI::App* verify_cmd =
      app.add_subcommand("eval-verify", "verification TAR@FAR report");
  verify_cmd->add_option("--embeddings", verify_opts.embeddings,
                         "labeled embedding store");
  verify_cmd->add_option("--config", verify_opts.config,
                         "run configuration (synthetic protocol)");
  verify_cmd->add_option("--seed", verify_opts.seed, "rng seed");
  verify_cmd->add_option("--scorer", verify_opts.scorer, "mls|cosine|neg-sq-euclid");
  verify_cmd->add_option("--head", verify_opts.head, "head checkpoint");
  verify_cmd->add_option("--far", verify_opts.far, "comma list of FAR targets");
  verify_cmd->add_option("--out", verify_opts.out, "csv output");
  verify_cmd->add_option("--roc-out", verify_opts.roc_out, "ROC curve csv");

  IdentifyOpts identify_opts;
  CLI::App* identify_cmd =
      app.add_subcommand("eval-identify", "open-set identification report");
  identify_cmd->add_option("--gallery", identify_opts.gallery,
                           "gallery embedding store");
  identify_cmd->add_option("--probes", identify_opts.probes,
                           "probe embedding store");
  identify_cmd->add_option("--config", identify_opts.config,
                           "run configuration (synthetic protocol)");
  identify_cmd->add_option("--seed", identify_opts.seed, "rng seed");
  identify_cmd->add_option("--scorer", identify_opts.scorer, "mls|cosine|neg-sq-euclid");
  identify_cmd->add_option("--head", identify_opts.head, "head checkpoint");
  identify_cmd->add_option("--fusion-mode", identify_opts.fusion_mode,
                           "precision-sum|min-variance");
  identify_cmd->add_option("--fpir", identify_opts.fpir,
                           "comma list of FPIR targets");
  identify_cmd->add_option("--out", identify_opts.out, "csv output");

  FilterOpts filter_opts;
  CLI::App* filter_cmd = app.add_subcommand(
      "filter-curve", "TAR at fixed FAR vs confidence filter-out rate");
  filter_cmd->add_option("--embeddings", filter_opts.embeddings,
                         "labeled embedding store with variances");
  filter_cmd->add_option("--config", filter_opts.config,
                         "run configuration (synthetic protocol)");
  filter_cmd->add_option("--seed", filter_opts.seed, "rng seed");
  filter_cmd->add_option("--scorer", filter_opts.scorer, "cosine|mls|neg-sq-euclid");
  filter_cmd->add_option("--head", filter_opts.head, "head checkpoint");
  filter_cmd->add_option("--far", filter_opts.far, "fixed FAR");
  filter_cmd->add_option("--rates", filter_opts.rates,
                         "comma list of filter-out rates");
  filter_cmd->add_option("--combiner", filter_opts.combiner, "min|mean");
  filter_cmd->add_option("--criterion", filter_opts.criterion,
                         "confidence|random");
  filter_cmd->add_option("--out", filter_opts.out, "csv output");

  std::vector<std::string> own = args;
  std::vector<char*> argv;
  std::string prog = "pfe";
  argv.push_back(prog.data());
  for (std::string& a : own) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "pfe: usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (score_cmd->parsed()) RunScore(score_opts, out);
    if (fuse_cmd->parsed()) RunFuse(fuse_opts, out);
    if (synth_cmd->parsed()) RunSynth(synth_opts, out);
    if (train_cmd->parsed()) RunTrainHead(train_opts, out);
    if (sweep_cmd->parsed()) RunSweep(sweep_opts, out);
    if (verify_cmd->parsed()) RunVerify(verify_opts, out);
    if (identify_cmd->parsed()) RunIdentify(identify_opts, out);
    if (filter_cmd->parsed()) RunFilterCurve(filter_opts, out);
  } catch (const std::exception& e) {
    err << "pfe: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cli
}  // namespace pfe
