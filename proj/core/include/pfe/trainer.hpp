#ifndef PFE_TRAINER_HPP
#define PFE_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pfe/synth.hpp"
#include "pfe/uncertainty_head.hpp"

namespace pfe {

// Index pairs (i, j) of same-subject rows within a batch.
using GenuinePairSet = std::vector<std::pair<std::size_t, std::size_t>>;

struct TrainConfig {
  std::size_t subjects_per_batch = 64;
  std::size_t images_per_subject = 4;
  std::size_t steps = 3000;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // on w1 and w2 only
  // (first step, learning rate), first entry at step 0, steps increasing.
  std::vector<std::pair<std::size_t, double>> lr_schedule{{0, 1e-3},
                                                          {2000, 1e-4}};
  std::size_t hidden_dim = 0;  // 0 -> same width as the head input
  std::uint64_t seed = 0;
};

double learning_rate_at(const TrainConfig& config, std::size_t step);

// One optimizer batch. inputs is count x (dim + aux) row-major head input;
// mus is count x dim observed means (frozen: the loss only trains variances).
struct Minibatch {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<double> mus;
  GenuinePairSet pairs;
};

// subjects_per_batch identities without replacement (only identities holding
// at least images_per_subject samples are eligible; CorpusTooSmallError when
// fewer than subjects_per_batch qualify), then images_per_subject distinct
// samples per identity. pairs holds all within-subject combinations:
// subjects_per_batch * C(images_per_subject, 2) of them.
Minibatch sample_minibatch(const SynthCorpus& corpus, const TrainConfig& config,
                           Rng& rng);

// Average negated mutual likelihood over the genuine pairs:
//   (1/|P|) sum_{(i,j) in P} -s(row_i, row_j)
// with rows read from mus/variances (count x dim). EmptySetError on no pairs.
double mls_loss(const std::vector<double>& mus,
                const std::vector<double>& variances, std::size_t count,
                std::size_t dim, const GenuinePairSet& pairs);

// d(-s)/d sigma_sq for one dimension of one pair member:
// (v - d) / (2 v^2) with v the pair's summed variance and d the squared mean
// gap. Zero exactly at v == d.
double mls_variance_grad(double gap_sq, double variance_sum);

// dLoss/dVariance per batch element (count x dim) for mls_loss.
std::vector<double> loss_variance_gradients(const std::vector<double>& mus,
                                            const std::vector<double>& variances,
                                            std::size_t count, std::size_t dim,
                                            const GenuinePairSet& pairs);

struct HeadGradientsAndLoss {
  HeadGradients grads;
  double loss = 0.0;
};

// Forward (training-mode statistics, running stats untouched) + loss +
// backward + weight decay on w1/w2. Means receive no gradient by
// construction. Requires head.training().
HeadGradientsAndLoss head_gradients(const UncertaintyHead& head,
                                    const Minibatch& batch,
                                    double weight_decay);

struct GradientCheckReport {
  double max_error = 0.0;      // per-coordinate |analytic - numeric| /
                               // max(|analytic|, |numeric|, 1e-3)
  double max_abs_error = 0.0;  // plain |analytic - numeric|
  std::string worst_coordinate;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central finite differences of (mls_loss + decay penalty) against the
// analytic gradients, every parameter coordinate perturbed. The numeric side
// only ever calls forward_train and mls_loss, so it cannot inherit a bug in
// backward. Parameters are restored on exit.
GradientCheckReport gradient_check(UncertaintyHead& head, const Minibatch& batch,
                                   double epsilon, double weight_decay = 0.0);

// Same comparison against caller-supplied gradients.
GradientCheckReport gradient_check_against(UncertaintyHead& head,
                                           const Minibatch& batch,
                                           double epsilon, double weight_decay,
                                           const HeadGradients& candidate);

struct TrainResult {
  UncertaintyHead head;
  std::vector<double> loss_log;  // one entry per step, before the update
};

// SGD with momentum (velocity = m*velocity + gradient; param -= lr*velocity)
// over minibatches drawn from the corpus. Only the head trains; the corpus
// (and so every mean) is read-only. Throws DivergenceError with the step
// index if the loss leaves the finite range. The returned head is in
// inference mode with its running statistics folded in.
TrainResult train(UncertaintyHead head, const SynthCorpus& corpus,
                  const TrainConfig& config);

// Head sized for the corpus (input = dim + aux_channels, output = dim,
// hidden per config), randomly initialized from the config seed.
UncertaintyHead make_head_for_corpus(const SynthCorpus& corpus,
                                     const TrainConfig& config);

}  // namespace pfe

#endif  // PFE_TRAINER_HPP
