#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctxmlc/embeddings.hpp"
#include "ctxmlc/model.hpp"

namespace ctxmlc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  LabelEmbeddings embeddings;
  std::vector<std::string> label_names;  // may be empty
};

// Little-endian binary container:
//   magic "CTXMLCKP", u32 version, model config,
//   u32 array count, then per array: u32 name length, name, u64 rows,
//   u64 cols, rows*cols f64 in column-major order,
//   u32 label-name count, then per name: u32 length, bytes.
// The label embeddings are stored as arrays "label_embeddings" (current) and
// "label_anchors".
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxmlc
