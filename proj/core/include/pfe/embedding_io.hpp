#ifndef PFE_EMBEDDING_IO_HPP
#define PFE_EMBEDDING_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pfe/embedding.hpp"

namespace pfe {

// Binary embedding store, little-endian:
//
//   magic "PFE1" | u16 version (=1) | u16 flags | u32 dim | u32 count
//   then `count` records:
//     u16 id_len | id bytes (UTF-8) | dim x float32 mu | [dim x float32 sigma_sq]
//
// flags bit 0 set => records carry variances. When clear, loading fills
// sigma_sq with 1.0 and emits a warning. Values are stored as float32;
// in-memory arithmetic stays double. Loading clamps variances to the floor
// (logged) and rejects non-finite stored values. Malformed input raises
// ParseError carrying the byte offset.

struct EmbeddingFileInfo {
  std::uint16_t version = 1;
  bool has_variances = true;
  std::uint32_t dim = 0;
  std::uint32_t count = 0;
};

std::string serialize_embeddings(const std::vector<GaussianEmbedding>& embeddings,
                                 bool with_variances = true);

std::vector<GaussianEmbedding> parse_embeddings(const std::string& bytes,
                                                EmbeddingFileInfo* info = nullptr);

void write_embeddings(const std::string& path,
                      const std::vector<GaussianEmbedding>& embeddings,
                      bool with_variances = true);

std::vector<GaussianEmbedding> read_embeddings(const std::string& path,
                                               EmbeddingFileInfo* info = nullptr);

}  // namespace pfe

#endif  // PFE_EMBEDDING_IO_HPP
