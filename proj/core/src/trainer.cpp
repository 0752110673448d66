#include "pfe/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pfe/embedding.hpp"
#include "pfe/errors.hpp"
#include "pfe/log.hpp"

namespace pfe {

double learning_rate_at(const TrainConfig& config, std::size_t step) {
  const auto& sched = config.lr_schedule;
  if (sched.empty() || sched.front().first != 0)
    throw ConfigError("lr_schedule must start at step 0");
  double lr = sched.front().second;
  for (std::size_t i = 0; i < sched.size(); ++i) {
    if (i > 0 && sched[i].first <= sched[i - 1].first)
      throw ConfigError("lr_schedule steps must be strictly increasing");
    if (!(sched[i].second > 0.0))
      throw ConfigError("learning rates must be positive");
    if (sched[i].first <= step) lr = sched[i].second;
  }
  return lr;
}

Minibatch sample_minibatch(const SynthCorpus& corpus, const TrainConfig& config,
                           Rng& rng) {
  if (config.subjects_per_batch == 0 || config.images_per_subject < 2)
    throw ConfigError("need subjects_per_batch >= 1 and images_per_subject >= 2");
  const std::size_t per_identity = corpus.params.samples_per_identity;
  std::vector<std::size_t> eligible;
  for (std::size_t k = 0; k < corpus.params.identities; ++k)
    if (per_identity >= config.images_per_subject) eligible.push_back(k);
  if (eligible.size() < config.subjects_per_batch) {
    std::ostringstream os;
    os << "corpus has " << eligible.size() << " identities with >= "
       << config.images_per_subject << " samples, need "
       << config.subjects_per_batch;
    throw CorpusTooSmallError(os.str());
  }

  const std::size_t dim = corpus.params.dim;
  const std::size_t din = dim + corpus.params.aux_channels;
  Minibatch batch;
  batch.dim = dim;
  batch.count = config.subjects_per_batch * config.images_per_subject;
  batch.inputs.reserve(batch.count * din);
  batch.mus.reserve(batch.count * dim);

  const std::vector<std::size_t> chosen =
      rng.sample_without_replacement(eligible.size(), config.subjects_per_batch);
  std::size_t row = 0;
  for (const std::size_t ei : chosen) {
    const std::size_t identity = eligible[ei];
    const std::vector<std::size_t> picks = rng.sample_without_replacement(
        per_identity, config.images_per_subject);
    const std::size_t first_row = row;
    for (const std::size_t j : picks) {
      const SynthSample& s = corpus.samples[corpus.sample_index(identity, j)];
      const std::vector<double> in = head_input(s);
      batch.inputs.insert(batch.inputs.end(), in.begin(), in.end());
      batch.mus.insert(batch.mus.end(), s.observed_mu.begin(),
                       s.observed_mu.end());
      ++row;
    }
    for (std::size_t a = first_row; a < row; ++a)
      for (std::size_t b = a + 1; b < row; ++b) batch.pairs.emplace_back(a, b);
  }
  return batch;
}

double mls_variance_grad(double gap_sq, double variance_sum) {
  return (variance_sum - gap_sq) / (2.0 * variance_sum * variance_sum);
}

double mls_loss(const std::vector<double>& mus,
                const std::vector<double>& variances, std::size_t count,
                std::size_t dim, const GenuinePairSet& pairs) {
  if (pairs.empty()) throw EmptySetError("loss over an empty pair set");
  if (mus.size() != count * dim || variances.size() != count * dim)
    throw DimensionError("loss rows do not match count x dim");
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    if (i >= count || j >= count)
      throw ValidationError("pair index outside the batch");
    const double* mu_i = mus.data() + i * dim;
    const double* mu_j = mus.data() + j * dim;
    const double* var_i = variances.data() + i * dim;
    const double* var_j = variances.data() + j * dim;
    double s = 0.0;
    for (std::size_t l = 0; l < dim; ++l) {
      const double gap = mu_i[l] - mu_j[l];
      const double v = var_i[l] + var_j[l];
      s += mls_dimension_term(gap * gap, v);
    }
    s -= 0.5 * static_cast<double>(dim) * log_two_pi;
    total += -s;
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<double> loss_variance_gradients(
    const std::vector<double>& mus, const std::vector<double>& variances,
    std::size_t count, std::size_t dim, const GenuinePairSet& pairs) {
  if (pairs.empty()) throw EmptySetError("loss over an empty pair set");
  std::vector<double> grad(count * dim, 0.0);
  const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [i, j] : pairs) {
    const double* mu_i = mus.data() + i * dim;
    const double* mu_j = mus.data() + j * dim;
    const double* var_i = variances.data() + i * dim;
    const double* var_j = variances.data() + j * dim;
    for (std::size_t l = 0; l < dim; ++l) {
      const double gap = mu_i[l] - mu_j[l];
      const double g =
          mls_variance_grad(gap * gap, var_i[l] + var_j[l]) * inv_pairs;
      grad[i * dim + l] += g;
      grad[j * dim + l] += g;
    }
  }
  return grad;
}

HeadGradientsAndLoss head_gradients(const UncertaintyHead& head,
                                    const Minibatch& batch,
                                    double weight_decay) {
  if (!head.training())
    throw std::logic_error("head_gradients needs the head in training mode");
  const HeadForwardCache cache = head.forward_train(batch.inputs, batch.count);
  HeadGradientsAndLoss out;
  out.loss = mls_loss(batch.mus, cache.variances, batch.count, batch.dim,
                      batch.pairs);
  const std::vector<double> dvar = loss_variance_gradients(
      batch.mus, cache.variances, batch.count, batch.dim, batch.pairs);
  out.grads = head.backward(cache, dvar);
  if (weight_decay != 0.0) {
    const HeadParams& p = head.params();
    for (std::size_t i = 0; i < p.w1.size(); ++i)
      out.grads.w1[i] += weight_decay * p.w1[i];
    for (std::size_t i = 0; i < p.w2.size(); ++i)
      out.grads.w2[i] += weight_decay * p.w2[i];
  }
  return out;
}

namespace {

// Uniform walk over every parameter coordinate.
struct Coordinate {
  std::string name;
  double* value;
  const double* grad;
};

std::vector<Coordinate> EnumerateCoordinates(HeadParams& p,
                                             const HeadGradients& g) {
  std::vector<Coordinate> coords;
  auto add_block = [&coords](const char* base, std::vector<double>& values,
                             const std::vector<double>& grads) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::ostringstream os;
      os << base << "[" << i << "]";
      coords.push_back(Coordinate{os.str(), &values[i], &grads[i]});
    }
  };
  add_block("w1", p.w1, g.w1);
  add_block("b1", p.b1, g.b1);
  add_block("gamma1", p.gamma1, g.gamma1);
  add_block("beta1", p.beta1, g.beta1);
  add_block("w2", p.w2, g.w2);
  add_block("b2", p.b2, g.b2);
  coords.push_back(Coordinate{"gamma2", &p.gamma2, &g.gamma2});
  coords.push_back(Coordinate{"beta2", &p.beta2, &g.beta2});
  return coords;
}

double Objective(const UncertaintyHead& head, const Minibatch& batch,
                 double weight_decay) {
  const HeadForwardCache cache = head.forward_train(batch.inputs, batch.count);
  double obj = mls_loss(batch.mus, cache.variances, batch.count, batch.dim,
                        batch.pairs);
  if (weight_decay != 0.0) {
    double ssq = 0.0;
    for (const double w : head.params().w1) ssq += w * w;
    for (const double w : head.params().w2) ssq += w * w;
    obj += 0.5 * weight_decay * ssq;
  }
  return obj;
}

}  // namespace

GradientCheckReport gradient_check_against(UncertaintyHead& head,
                                           const Minibatch& batch,
                                           double epsilon, double weight_decay,
                                           const HeadGradients& candidate) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  GradientCheckReport report;
  std::vector<Coordinate> coords =
      EnumerateCoordinates(head.params(), candidate);
  for (Coordinate& c : coords) {
    const double saved = *c.value;
    *c.value = saved + epsilon;
    const double up = Objective(head, batch, weight_decay);
    *c.value = saved - epsilon;
    const double down = Objective(head, batch, weight_decay);
    *c.value = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = *c.grad;
    const double abs_err = std::abs(analytic - numeric);
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    const double err = abs_err / denom;
    if (err > report.max_error) {
      report.max_error = err;
      report.worst_coordinate = c.name;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
  }
  return report;
}

GradientCheckReport gradient_check(UncertaintyHead& head,
                                   const Minibatch& batch, double epsilon,
                                   double weight_decay) {
  const HeadGradientsAndLoss gl = head_gradients(head, batch, weight_decay);
  return gradient_check_against(head, batch, epsilon, weight_decay, gl.grads);
}

namespace {

void AxpyBlocks(HeadParams& vel, const HeadGradients& g, double momentum) {
  auto fold = [momentum](std::vector<double>& v, const std::vector<double>& gg) {
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = momentum * v[i] + gg[i];
  };
  fold(vel.w1, g.w1);
  fold(vel.b1, g.b1);
  fold(vel.gamma1, g.gamma1);
  fold(vel.beta1, g.beta1);
  fold(vel.w2, g.w2);
  fold(vel.b2, g.b2);
  vel.gamma2 = momentum * vel.gamma2 + g.gamma2;
  vel.beta2 = momentum * vel.beta2 + g.beta2;
}

void Step(HeadParams& p, const HeadParams& vel, double lr) {
  auto sub = [lr](std::vector<double>& v, const std::vector<double>& d) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * d[i];
  };
  sub(p.w1, vel.w1);
  sub(p.b1, vel.b1);
  sub(p.gamma1, vel.gamma1);
  sub(p.beta1, vel.beta1);
  sub(p.w2, vel.w2);
  sub(p.b2, vel.b2);
  p.gamma2 -= lr * vel.gamma2;
  p.beta2 -= lr * vel.beta2;
}

bool AllFinite(const HeadParams& p) {
  auto ok = [](const std::vector<double>& v) {
    for (const double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return ok(p.w1) && ok(p.b1) && ok(p.gamma1) && ok(p.beta1) && ok(p.w2) &&
         ok(p.b2) && std::isfinite(p.gamma2) && std::isfinite(p.beta2);
}

}  // namespace

TrainResult train(UncertaintyHead head, const SynthCorpus& corpus,
                  const TrainConfig& config) {
  if (!(config.momentum >= 0.0 && config.momentum < 1.0))
    throw ConfigError("momentum must lie in [0, 1)");
  if (!(config.weight_decay >= 0.0))
    throw ConfigError("weight_decay must be non-negative");
  (void)learning_rate_at(config, 0);  // validates the schedule shape

  TrainResult result{std::move(head), {}};
  result.loss_log.reserve(config.steps);
  result.head.set_training(true);
  Rng rng(config.seed);
  HeadParams vel = result.head.params();
  vel = HeadParams{std::vector<double>(vel.w1.size(), 0.0),
                   std::vector<double>(vel.b1.size(), 0.0),
                   std::vector<double>(vel.gamma1.size(), 0.0),
                   std::vector<double>(vel.beta1.size(), 0.0),
                   std::vector<double>(vel.w2.size(), 0.0),
                   std::vector<double>(vel.b2.size(), 0.0),
                   0.0,
                   0.0};

  for (std::size_t step = 0; step < config.steps; ++step) {
    const double lr = learning_rate_at(config, step);
    const Minibatch batch = sample_minibatch(corpus, config, rng);
    const HeadForwardCache cache =
        result.head.forward_train(batch.inputs, batch.count);
    const double loss = mls_loss(batch.mus, cache.variances, batch.count,
                                 batch.dim, batch.pairs);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged: non-finite loss at step " << step;
      throw DivergenceError(step, os.str());
    }
    result.loss_log.push_back(loss);
    const std::vector<double> dvar = loss_variance_gradients(
        batch.mus, cache.variances, batch.count, batch.dim, batch.pairs);
    HeadGradients grads = result.head.backward(cache, dvar);
    if (config.weight_decay != 0.0) {
      const HeadParams& p = result.head.params();
      for (std::size_t i = 0; i < p.w1.size(); ++i)
        grads.w1[i] += config.weight_decay * p.w1[i];
      for (std::size_t i = 0; i < p.w2.size(); ++i)
        grads.w2[i] += config.weight_decay * p.w2[i];
    }
    result.head.update_running_stats(cache);
    AxpyBlocks(vel, grads, config.momentum);
    Step(result.head.params(), vel, lr);
    if ((step + 1) % 500 == 0) {
      std::ostringstream os;
      os << "step " << (step + 1) << "/" << config.steps << " loss " << loss;
      log::info(os.str());
    }
  }
  if (!AllFinite(result.head.params()))
    throw DivergenceError(config.steps == 0 ? 0 : config.steps - 1,
                          "training diverged: non-finite parameters");
  result.head.set_training(false);
  return result;
}

UncertaintyHead make_head_for_corpus(const SynthCorpus& corpus,
                                     const TrainConfig& config) {
  HeadConfig hc;
  hc.input_dim = corpus.params.dim + corpus.params.aux_channels;
  hc.hidden_dim = config.hidden_dim == 0 ? hc.input_dim : config.hidden_dim;
  hc.output_dim = corpus.params.dim;
  Rng rng(Rng::derive(config.seed, 0x68656164));
  return UncertaintyHead::random_init(hc, rng);
}

}  // namespace pfe
