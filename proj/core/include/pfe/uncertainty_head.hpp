#ifndef PFE_UNCERTAINTY_HEAD_HPP
#define PFE_UNCERTAINTY_HEAD_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pfe/rng.hpp"

namespace pfe {

struct HeadConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;  // running = momentum*running + (1-momentum)*batch
};

// Learnable tensors. The same shape doubles as a gradient / velocity record.
// gamma2 and beta2 are genuinely scalar — the output normalization shares one
// scale and one shift across all output dimensions, so no optimizer step can
// ever de-share them.
struct HeadParams {
  std::vector<double> w1;      // hidden_dim x input_dim, row-major
  std::vector<double> b1;      // hidden_dim
  std::vector<double> gamma1;  // hidden_dim
  std::vector<double> beta1;   // hidden_dim
  std::vector<double> w2;      // output_dim x hidden_dim, row-major
  std::vector<double> b2;      // output_dim
  double gamma2 = 0.0;
  double beta2 = 0.0;
};

using HeadGradients = HeadParams;

// Normalization statistics. The hidden layer keeps one (mean, var) per unit;
// the output layer keeps a single scalar pair computed over all rows and
// output dimensions together.
struct HeadStats {
  std::vector<double> mean1;
  std::vector<double> var1;
  double mean2 = 0.0;
  double var2 = 1.0;
};

// Everything backward and the running-stats update need from one training
// forward pass. Activations are row-major [row * width + col].
struct HeadForwardCache {
  std::size_t count = 0;
  std::vector<double> inputs;      // count x input_dim
  std::vector<double> relu;        // count x hidden_dim, post-ReLU
  std::vector<double> xhat1;       // count x hidden_dim
  std::vector<double> xhat2;       // count x output_dim
  std::vector<double> inv_std1;    // hidden_dim
  double inv_std2 = 0.0;
  HeadStats batch_stats;
  std::vector<double> variances;   // count x output_dim, clamped exp output
  std::vector<char> clamped;       // count x output_dim
};

// Per-image uncertainty module: FC -> per-unit batchnorm -> ReLU -> FC ->
// shared-scalar batchnorm -> exp. The exp keeps every predicted variance
// positive; predictions are additionally floored at kVarianceFloor.
//
// Training mode normalizes with the current minibatch statistics (>= 2 rows
// required); inference mode uses the running statistics and is deterministic
// per input. forward_train never touches the running statistics — the
// training loop applies update_running_stats explicitly, which keeps
// finite-difference probing of the loss surface side-effect free.
class UncertaintyHead {
 public:
  // All-zero parameters: the identity configuration, predicting variance
  // exactly 1 everywhere in both modes.
  explicit UncertaintyHead(const HeadConfig& config);

  // Gaussian fan-in init for weights, unit scales, zero shifts.
  static UncertaintyHead random_init(const HeadConfig& config, Rng& rng);

  const HeadConfig& config() const { return config_; }
  HeadParams& params() { return params_; }
  const HeadParams& params() const { return params_; }
  HeadStats& running_stats() { return stats_; }
  const HeadStats& running_stats() const { return stats_; }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

  // inputs: count x input_dim, row-major. Returns count x output_dim
  // variances. Dispatches on the mode; training mode also folds the batch
  // statistics into the running statistics.
  std::vector<double> forward(const std::vector<double>& inputs,
                              std::size_t count);

  HeadForwardCache forward_train(const std::vector<double>& inputs,
                                 std::size_t count) const;
  std::vector<double> forward_inference(const std::vector<double>& inputs,
                                        std::size_t count) const;
  void update_running_stats(const HeadForwardCache& cache);

  // Backpropagates dLoss/dVariance (count x output_dim) through exp, both
  // normalizations and both affine layers. Weight decay is not included —
  // the optimizer owns that term. Clamped outputs contribute zero gradient.
  HeadGradients backward(const HeadForwardCache& cache,
                         const std::vector<double>& dloss_dvariance) const;

 private:
  void CheckInputs(const std::vector<double>& inputs, std::size_t count) const;

  HeadConfig config_;
  HeadParams params_;
  HeadStats stats_;
  bool training_ = false;
};

// Checkpoint, little-endian:
//   magic "PFEH" | u16 version (=1) | u16 reserved | u32 input_dim |
//   u32 hidden_dim | u32 output_dim | float64 tensors: w1 b1 gamma1 beta1
//   w2 b2 gamma2 beta2 | running mean1 var1 mean2 var2 | bn_epsilon |
//   bn_momentum
// Doubles are stored bit-exactly, so save/load round-trips bitwise.
void save_head(const std::string& path, const UncertaintyHead& head);
UncertaintyHead load_head(const std::string& path);
std::string serialize_head(const UncertaintyHead& head);
UncertaintyHead parse_head(const std::string& bytes);

}  // namespace pfe

#endif  // PFE_UNCERTAINTY_HEAD_HPP
