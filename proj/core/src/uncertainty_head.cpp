#include "pfe/uncertainty_head.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pfe/embedding.hpp"
#include "pfe/errors.hpp"

namespace pfe {

namespace {

void CheckConfig(const HeadConfig& c) {
  if (c.input_dim == 0 || c.hidden_dim == 0 || c.output_dim == 0)
    throw DimensionError("head dimensions must all be at least 1");
  if (!(c.bn_epsilon > 0.0))
    throw ValidationError("bn_epsilon must be positive");
  if (!(c.bn_momentum >= 0.0 && c.bn_momentum < 1.0))
    throw ValidationError("bn_momentum must lie in [0, 1)");
}

}  // namespace

UncertaintyHead::UncertaintyHead(const HeadConfig& config) : config_(config) {
  CheckConfig(config_);
  params_.w1.assign(config_.hidden_dim * config_.input_dim, 0.0);
  params_.b1.assign(config_.hidden_dim, 0.0);
  params_.gamma1.assign(config_.hidden_dim, 0.0);
  params_.beta1.assign(config_.hidden_dim, 0.0);
  params_.w2.assign(config_.output_dim * config_.hidden_dim, 0.0);
  params_.b2.assign(config_.output_dim, 0.0);
  params_.gamma2 = 0.0;
  params_.beta2 = 0.0;
  stats_.mean1.assign(config_.hidden_dim, 0.0);
  stats_.var1.assign(config_.hidden_dim, 1.0);
  stats_.mean2 = 0.0;
  stats_.var2 = 1.0;
}

UncertaintyHead UncertaintyHead::random_init(const HeadConfig& config,
                                             Rng& rng) {
  UncertaintyHead head(config);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
  for (double& w : head.params_.w1) w = rng.normal(0.0, s1);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  for (double& w : head.params_.w2) w = rng.normal(0.0, s2);
  for (double& g : head.params_.gamma1) g = 1.0;
  head.params_.gamma2 = 1.0;
  return head;
}

void UncertaintyHead::CheckInputs(const std::vector<double>& inputs,
                                  std::size_t count) const {
  if (count == 0) throw EmptySetError("head forward over an empty batch");
  if (inputs.size() != count * config_.input_dim) {
    std::ostringstream os;
    os << "head input size " << inputs.size() << " does not match " << count
       << " x " << config_.input_dim;
    throw DimensionError(os.str());
  }
}

std::vector<double> UncertaintyHead::forward(const std::vector<double>& inputs,
                                             std::size_t count) {
  if (!training_) return forward_inference(inputs, count);
  HeadForwardCache cache = forward_train(inputs, count);
  update_running_stats(cache);
  return cache.variances;
}

HeadForwardCache UncertaintyHead::forward_train(
    const std::vector<double>& inputs, std::size_t count) const {
  CheckInputs(inputs, count);
  if (count < 2)
    throw BatchTooSmallError(
        "training-mode normalization needs a batch of at least 2");
  const std::size_t din = config_.input_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t dout = config_.output_dim;
  const double eps = config_.bn_epsilon;
  const double n = static_cast<double>(count);

  HeadForwardCache cache;
  cache.count = count;
  cache.inputs = inputs;

  // FC1.
  std::vector<double> a1(count * h);
  for (std::size_t r = 0; r < count; ++r) {
    const double* x = inputs.data() + r * din;
    for (std::size_t j = 0; j < h; ++j) {
      const double* w = params_.w1.data() + j * din;
      double acc = params_.b1[j];
      for (std::size_t i = 0; i < din; ++i) acc += w[i] * x[i];
      a1[r * h + j] = acc;
    }
  }

  // Per-unit batch statistics (biased variance).
  cache.batch_stats.mean1.assign(h, 0.0);
  cache.batch_stats.var1.assign(h, 0.0);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t j = 0; j < h; ++j)
      cache.batch_stats.mean1[j] += a1[r * h + j];
  for (std::size_t j = 0; j < h; ++j) cache.batch_stats.mean1[j] /= n;
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t j = 0; j < h; ++j) {
      const double d = a1[r * h + j] - cache.batch_stats.mean1[j];
      cache.batch_stats.var1[j] += d * d;
    }
  for (std::size_t j = 0; j < h; ++j) cache.batch_stats.var1[j] /= n;

  cache.inv_std1.resize(h);
  for (std::size_t j = 0; j < h; ++j)
    cache.inv_std1[j] = 1.0 / std::sqrt(cache.batch_stats.var1[j] + eps);

  cache.xhat1.resize(count * h);
  cache.relu.resize(count * h);
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t j = 0; j < h; ++j) {
      const double xh =
          (a1[r * h + j] - cache.batch_stats.mean1[j]) * cache.inv_std1[j];
      cache.xhat1[r * h + j] = xh;
      const double y = params_.gamma1[j] * xh + params_.beta1[j];
      cache.relu[r * h + j] = y > 0.0 ? y : 0.0;
    }

  // FC2.
  std::vector<double> a2(count * dout);
  for (std::size_t r = 0; r < count; ++r) {
    const double* rrow = cache.relu.data() + r * h;
    for (std::size_t o = 0; o < dout; ++o) {
      const double* w = params_.w2.data() + o * h;
      double acc = params_.b2[o];
      for (std::size_t j = 0; j < h; ++j) acc += w[j] * rrow[j];
      a2[r * dout + o] = acc;
    }
  }

  // Scalar statistics over every element of a2.
  const double m = static_cast<double>(count * dout);
  double mean2 = 0.0;
  for (const double v : a2) mean2 += v;
  mean2 /= m;
  double var2 = 0.0;
  for (const double v : a2) var2 += (v - mean2) * (v - mean2);
  var2 /= m;
  cache.batch_stats.mean2 = mean2;
  cache.batch_stats.var2 = var2;
  cache.inv_std2 = 1.0 / std::sqrt(var2 + eps);

  cache.xhat2.resize(count * dout);
  cache.variances.resize(count * dout);
  cache.clamped.assign(count * dout, 0);
  for (std::size_t k = 0; k < count * dout; ++k) {
    const double xh = (a2[k] - mean2) * cache.inv_std2;
    cache.xhat2[k] = xh;
    const double v = std::exp(params_.gamma2 * xh + params_.beta2);
    if (v < kVarianceFloor) {
      cache.variances[k] = kVarianceFloor;
      cache.clamped[k] = 1;
    } else {
      cache.variances[k] = v;
    }
  }
  return cache;
}

std::vector<double> UncertaintyHead::forward_inference(
    const std::vector<double>& inputs, std::size_t count) const {
  CheckInputs(inputs, count);
  const std::size_t din = config_.input_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t dout = config_.output_dim;
  const double eps = config_.bn_epsilon;

  std::vector<double> relu(h);
  std::vector<double> out(count * dout);
  const double inv_std2 = 1.0 / std::sqrt(stats_.var2 + eps);
  for (std::size_t r = 0; r < count; ++r) {
    const double* x = inputs.data() + r * din;
    for (std::size_t j = 0; j < h; ++j) {
      const double* w = params_.w1.data() + j * din;
      double acc = params_.b1[j];
      for (std::size_t i = 0; i < din; ++i) acc += w[i] * x[i];
      const double xh =
          (acc - stats_.mean1[j]) / std::sqrt(stats_.var1[j] + eps);
      const double y = params_.gamma1[j] * xh + params_.beta1[j];
      relu[j] = y > 0.0 ? y : 0.0;
    }
    for (std::size_t o = 0; o < dout; ++o) {
      const double* w = params_.w2.data() + o * h;
      double acc = params_.b2[o];
      for (std::size_t j = 0; j < h; ++j) acc += w[j] * relu[j];
      const double xh = (acc - stats_.mean2) * inv_std2;
      const double v = std::exp(params_.gamma2 * xh + params_.beta2);
      out[r * dout + o] = v < kVarianceFloor ? kVarianceFloor : v;
    }
  }
  return out;
}

void UncertaintyHead::update_running_stats(const HeadForwardCache& cache) {
  const double mom = config_.bn_momentum;
  for (std::size_t j = 0; j < config_.hidden_dim; ++j) {
    stats_.mean1[j] =
        mom * stats_.mean1[j] + (1.0 - mom) * cache.batch_stats.mean1[j];
    stats_.var1[j] =
        mom * stats_.var1[j] + (1.0 - mom) * cache.batch_stats.var1[j];
  }
  stats_.mean2 = mom * stats_.mean2 + (1.0 - mom) * cache.batch_stats.mean2;
  stats_.var2 = mom * stats_.var2 + (1.0 - mom) * cache.batch_stats.var2;
}

HeadGradients UncertaintyHead::backward(
    const HeadForwardCache& cache,
    const std::vector<double>& dloss_dvariance) const {
  const std::size_t count = cache.count;
  const std::size_t din = config_.input_dim;
  const std::size_t h = config_.hidden_dim;
  const std::size_t dout = config_.output_dim;
  if (dloss_dvariance.size() != count * dout)
    throw DimensionError("gradient size does not match the forward batch");

  HeadGradients g;
  g.w1.assign(h * din, 0.0);
  g.b1.assign(h, 0.0);
  g.gamma1.assign(h, 0.0);
  g.beta1.assign(h, 0.0);
  g.w2.assign(dout * h, 0.0);
  g.b2.assign(dout, 0.0);
  g.gamma2 = 0.0;
  g.beta2 = 0.0;

  // Through the exp (d variance / d pre-activation = variance itself);
  // clamped outputs sit on the flat part of the floor and pass nothing back.
  const std::size_t m = count * dout;
  std::vector<double> gy2(m);
  for (std::size_t k = 0; k < m; ++k)
    gy2[k] = cache.clamped[k] ? 0.0 : dloss_dvariance[k] * cache.variances[k];

  // Shared-scalar normalization: statistics were taken over all m elements,
  // so the whole tensor backpropagates as one normalization group.
  double sum_gy2 = 0.0, sum_gy2_xhat = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sum_gy2 += gy2[k];
    sum_gy2_xhat += gy2[k] * cache.xhat2[k];
  }
  g.gamma2 = sum_gy2_xhat;
  g.beta2 = sum_gy2;
  const double mean_gx = params_.gamma2 * sum_gy2 / static_cast<double>(m);
  const double mean_gxx = params_.gamma2 * sum_gy2_xhat / static_cast<double>(m);
  std::vector<double> da2(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double dxhat = params_.gamma2 * gy2[k];
    da2[k] = (dxhat - mean_gx - cache.xhat2[k] * mean_gxx) * cache.inv_std2;
  }

  // FC2.
  std::vector<double> drelu(count * h, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    const double* rrow = cache.relu.data() + r * h;
    for (std::size_t o = 0; o < dout; ++o) {
      const double d = da2[r * dout + o];
      g.b2[o] += d;
      double* wg = g.w2.data() + o * h;
      const double* w = params_.w2.data() + o * h;
      for (std::size_t j = 0; j < h; ++j) {
        wg[j] += d * rrow[j];
        drelu[r * h + j] += d * w[j];
      }
    }
  }

  // ReLU gate, then the per-unit normalization.
  std::vector<double> dy1(count * h);
  for (std::size_t k = 0; k < count * h; ++k)
    dy1[k] = cache.relu[k] > 0.0 ? drelu[k] : 0.0;

  const double n = static_cast<double>(count);
  std::vector<double> da1(count * h);
  for (std::size_t j = 0; j < h; ++j) {
    double sum_d = 0.0, sum_dx = 0.0;
    for (std::size_t r = 0; r < count; ++r) {
      const double d = dy1[r * h + j];
      sum_d += d;
      sum_dx += d * cache.xhat1[r * h + j];
    }
    g.gamma1[j] = sum_dx;
    g.beta1[j] = sum_d;
    const double mean_d = params_.gamma1[j] * sum_d / n;
    const double mean_dx = params_.gamma1[j] * sum_dx / n;
    for (std::size_t r = 0; r < count; ++r) {
      const double dxhat = params_.gamma1[j] * dy1[r * h + j];
      da1[r * h + j] =
          (dxhat - mean_d - cache.xhat1[r * h + j] * mean_dx) *
          cache.inv_std1[j];
    }
  }

  // FC1.
  for (std::size_t r = 0; r < count; ++r) {
    const double* x = cache.inputs.data() + r * din;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = da1[r * h + j];
      g.b1[j] += d;
      double* wg = g.w1.data() + j * din;
      for (std::size_t i = 0; i < din; ++i) wg[i] += d * x[i];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization.

namespace {

constexpr char kHeadMagic[4] = {'P', 'F', 'E', 'H'};
constexpr std::uint16_t kHeadVersion = 1;

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF64(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void PutF64s(std::string& out, const std::vector<double>& v) {
  for (const double x : v) PutF64(out, x);
}

class HeadReader {
 public:
  explicit HeadReader(const std::string& bytes) : bytes_(bytes) {}
  std::uint64_t offset() const { return offset_; }
  bool exhausted() const { return offset_ == bytes_.size(); }

  void Need(std::uint64_t nbytes, const char* what) {
    if (offset_ + nbytes > bytes_.size())
      throw ParseError(offset_, std::string("truncated checkpoint: ") + what);
  }

  std::uint16_t GetU16(const char* what) {
    Need(2, what);
    const auto* p =
        reinterpret_cast<const unsigned char*>(bytes_.data() + offset_);
    offset_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t GetU32(const char* what) {
    Need(4, what);
    std::uint32_t v = 0;
    const auto* p =
        reinterpret_cast<const unsigned char*>(bytes_.data() + offset_);
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    offset_ += 4;
    return v;
  }

  double GetF64(const char* what) {
    Need(8, what);
    std::uint64_t v = 0;
    const auto* p =
        reinterpret_cast<const unsigned char*>(bytes_.data() + offset_);
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    offset_ += 8;
    return std::bit_cast<double>(v);
  }

  std::vector<double> GetF64s(std::size_t n, const char* what) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = GetF64(what);
    return v;
  }

 private:
  const std::string& bytes_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::string serialize_head(const UncertaintyHead& head) {
  const HeadConfig& c = head.config();
  const HeadParams& p = head.params();
  const HeadStats& s = head.running_stats();
  std::string out;
  out.append(kHeadMagic, 4);
  PutU16(out, kHeadVersion);
  PutU16(out, 0);  // reserved
  PutU32(out, static_cast<std::uint32_t>(c.input_dim));
  PutU32(out, static_cast<std::uint32_t>(c.hidden_dim));
  PutU32(out, static_cast<std::uint32_t>(c.output_dim));
  PutF64s(out, p.w1);
  PutF64s(out, p.b1);
  PutF64s(out, p.gamma1);
  PutF64s(out, p.beta1);
  PutF64s(out, p.w2);
  PutF64s(out, p.b2);
  PutF64(out, p.gamma2);
  PutF64(out, p.beta2);
  PutF64s(out, s.mean1);
  PutF64s(out, s.var1);
  PutF64(out, s.mean2);
  PutF64(out, s.var2);
  PutF64(out, c.bn_epsilon);
  PutF64(out, c.bn_momentum);
  return out;
}

UncertaintyHead parse_head(const std::string& bytes) {
  HeadReader r(bytes);
  r.Need(4, "magic");
  if (std::memcmp(bytes.data(), kHeadMagic, 4) != 0)
    throw ParseError(0, "bad magic, not a head checkpoint");
  (void)r.GetU32("magic");
  const std::uint16_t version = r.GetU16("version");
  if (version != kHeadVersion)
    throw ParseError(4, "unsupported checkpoint version " +
                            std::to_string(version));
  (void)r.GetU16("reserved");
  HeadConfig c;
  c.input_dim = r.GetU32("input_dim");
  c.hidden_dim = r.GetU32("hidden_dim");
  c.output_dim = r.GetU32("output_dim");
  if (c.input_dim == 0 || c.hidden_dim == 0 || c.output_dim == 0)
    throw ParseError(8, "checkpoint dimensions must all be at least 1");

  HeadParams p;
  p.w1 = r.GetF64s(c.hidden_dim * c.input_dim, "w1");
  p.b1 = r.GetF64s(c.hidden_dim, "b1");
  p.gamma1 = r.GetF64s(c.hidden_dim, "gamma1");
  p.beta1 = r.GetF64s(c.hidden_dim, "beta1");
  p.w2 = r.GetF64s(c.output_dim * c.hidden_dim, "w2");
  p.b2 = r.GetF64s(c.output_dim, "b2");
  p.gamma2 = r.GetF64("gamma2");
  p.beta2 = r.GetF64("beta2");
  HeadStats s;
  s.mean1 = r.GetF64s(c.hidden_dim, "running mean1");
  s.var1 = r.GetF64s(c.hidden_dim, "running var1");
  s.mean2 = r.GetF64("running mean2");
  s.var2 = r.GetF64("running var2");
  c.bn_epsilon = r.GetF64("bn_epsilon");
  c.bn_momentum = r.GetF64("bn_momentum");
  if (!r.exhausted())
    throw ParseError(r.offset(), "trailing bytes after the checkpoint");

  UncertaintyHead head(c);
  head.params() = std::move(p);
  head.running_stats() = std::move(s);
  return head;
}

void save_head(const std::string& path, const UncertaintyHead& head) {
  const std::string bytes = serialize_head(head);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

UncertaintyHead load_head(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_head(buf.str());
}

}  // namespace pfe
