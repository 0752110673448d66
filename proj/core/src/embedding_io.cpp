#include "pfe/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pfe/errors.hpp"
#include "pfe/log.hpp"

namespace pfe {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'E', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagHasVariances = 0x0001;

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF32(std::string& out, double v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  PutU32(out, bits);
}

// Cursor over an in-memory file image; every read checks remaining length
// and reports the failing byte offset.
class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return offset_; }
  bool exhausted() const { return offset_ == bytes_.size(); }

  void Need(std::uint64_t n, const char* what) {
    if (offset_ + n > bytes_.size()) {
      std::ostringstream os;
      os << "truncated input: expected " << n << " byte(s) of " << what;
      throw ParseError(offset_, os.str());
    }
  }

  std::uint16_t GetU16(const char* what) {
    Need(2, what);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + offset_);
    offset_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t GetU32(const char* what) {
    Need(4, what);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + offset_);
    offset_ += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float GetF32(const char* what) {
    const std::uint32_t bits = GetU32(what);
    return std::bit_cast<float>(bits);
  }

  std::string GetBytes(std::uint64_t n, const char* what) {
    Need(n, what);
    std::string s = bytes_.substr(offset_, n);
    offset_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::string serialize_embeddings(const std::vector<GaussianEmbedding>& embeddings,
                                 bool with_variances) {
  const std::size_t dim = embeddings.empty() ? 0 : embeddings.front().dim();
  for (const GaussianEmbedding& e : embeddings) {
    if (e.dim() != dim || e.sigma_sq.size() != dim)
      throw DimensionError("embedding store requires a uniform dimension");
    if (e.label.size() > 0xffff)
      throw ValidationError("embedding label longer than 65535 bytes");
  }
  std::string out;
  out.append(kMagic, 4);
  PutU16(out, kVersion);
  PutU16(out, with_variances ? kFlagHasVariances : 0);
  PutU32(out, static_cast<std::uint32_t>(dim));
  PutU32(out, static_cast<std::uint32_t>(embeddings.size()));
  for (const GaussianEmbedding& e : embeddings) {
    PutU16(out, static_cast<std::uint16_t>(e.label.size()));
    out.append(e.label);
    for (const double m : e.mu) PutF32(out, m);
    if (with_variances)
      for (const double v : e.sigma_sq) PutF32(out, v);
  }
  return out;
}

std::vector<GaussianEmbedding> parse_embeddings(const std::string& bytes,
                                                EmbeddingFileInfo* info) {
  Reader r(bytes);
  r.Need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ParseError(0, "bad magic, not an embedding store");
  r.GetBytes(4, "magic");
  const std::uint16_t version = r.GetU16("version");
  if (version != kVersion) {
    std::ostringstream os;
    os << "unsupported version " << version;
    throw ParseError(4, os.str());
  }
  const std::uint16_t flags = r.GetU16("flags");
  const bool has_variances = (flags & kFlagHasVariances) != 0;
  const std::uint32_t dim = r.GetU32("dimension");
  const std::uint32_t count = r.GetU32("count");
  if (dim == 0 && count > 0)
    throw ParseError(8, "dimension must be at least 1");

  if (!has_variances && count > 0)
    log::warn("embedding store has no variances; defaulting sigma_sq = 1.0");

  std::vector<GaussianEmbedding> embeddings;
  embeddings.reserve(count);
  std::size_t clamped_total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    GaussianEmbedding e;
    const std::uint16_t id_len = r.GetU16("record id length");
    e.label = r.GetBytes(id_len, "record id");
    e.mu.resize(dim);
    for (std::uint32_t l = 0; l < dim; ++l) {
      const std::uint64_t at = r.offset();
      const float v = r.GetF32("mean value");
      if (!std::isfinite(v)) throw ParseError(at, "non-finite mean value");
      e.mu[l] = static_cast<double>(v);
    }
    if (has_variances) {
      e.sigma_sq.resize(dim);
      for (std::uint32_t l = 0; l < dim; ++l) {
        const std::uint64_t at = r.offset();
        const float v = r.GetF32("variance value");
        if (!std::isfinite(v)) throw ParseError(at, "non-finite variance value");
        e.sigma_sq[l] = static_cast<double>(v);
      }
      for (double& v : e.sigma_sq) {
        if (v < kVarianceFloor) {
          v = kVarianceFloor;
          ++clamped_total;
        }
      }
    } else {
      e.sigma_sq.assign(dim, 1.0);
    }
    embeddings.push_back(std::move(e));
  }
  if (!r.exhausted())
    throw ParseError(r.offset(), "trailing bytes after the last record");

  if (clamped_total > 0) {
    std::ostringstream os;
    os << "clamped " << clamped_total
       << " stored variance(s) to the floor " << kVarianceFloor;
    log::info(os.str());
  }
  if (info != nullptr) {
    info->version = version;
    info->has_variances = has_variances;
    info->dim = dim;
    info->count = count;
  }
  return embeddings;
}

void write_embeddings(const std::string& path,
                      const std::vector<GaussianEmbedding>& embeddings,
                      bool with_variances) {
  const std::string bytes = serialize_embeddings(embeddings, with_variances);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<GaussianEmbedding> read_embeddings(const std::string& path,
                                               EmbeddingFileInfo* info) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_embeddings(buf.str(), info);
}

}  // namespace pfe
