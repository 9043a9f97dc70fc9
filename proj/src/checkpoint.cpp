#include "ctxmlc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "ctxmlc/errors.hpp"

namespace ctxmlc {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'T', 'X', 'M', 'L', 'C', 'K', 'P'};
constexpr std::uint64_t kMaxArrayElements = std::uint64_t{1} << 34;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  put_string(out, name);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw ParseError("truncated checkpoint", 0);
  }
  return value;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw ParseError("checkpoint string too long", 0);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw ParseError("truncated checkpoint", 0);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& cfg = ck.params.config;
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const std::size_t v : {cfg.num_features, cfg.num_labels, cfg.label_dim, cfg.num_layers,
                              cfg.num_heads, cfg.encoder_hidden, cfg.feedforward_hidden}) {
    put<std::uint64_t>(out, v);
  }
  put<std::uint8_t>(out, cfg.latent_every_block ? 1 : 0);

  std::uint32_t count = 2;
  for_each_array(ck.params, [&](const std::string&, const Eigen::MatrixXd&, bool) { ++count; });
  put<std::uint32_t>(out, count);
  for_each_array(ck.params, [&](const std::string& name, const Eigen::MatrixXd& m, bool) {
    put_matrix(out, name, m);
  });
  put_matrix(out, kLabelEmbeddingArray, ck.embeddings.current);
  put_matrix(out, "label_anchors", ck.embeddings.anchors());

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.label_names.size()));
  for (const auto& n : ck.label_names) put_string(out, n);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError("not a checkpoint file (bad magic)", 0);
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  ModelConfig cfg;
  cfg.num_features = get<std::uint64_t>(in);
  cfg.num_labels = get<std::uint64_t>(in);
  cfg.label_dim = get<std::uint64_t>(in);
  cfg.num_layers = get<std::uint64_t>(in);
  cfg.num_heads = get<std::uint64_t>(in);
  cfg.encoder_hidden = get<std::uint64_t>(in);
  cfg.feedforward_hidden = get<std::uint64_t>(in);
  cfg.latent_every_block = get<std::uint8_t>(in) != 0;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint holds an invalid config: ") + e.what(), 0);
  }

  std::map<std::string, Eigen::MatrixXd> arrays;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = get_string(in);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != 0 && cols > kMaxArrayElements / rows) throw ParseError("checkpoint array too large", 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() > 0 &&
        !in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())))) {
      throw ParseError("truncated checkpoint", 0);
    }
    if (!arrays.emplace(std::move(name), std::move(m)).second) {
      throw ParseError("duplicate array in checkpoint", 0);
    }
  }

  // Shapes come from a fresh init; values from the file.
  Checkpoint ck;
  ck.params = init_params(cfg, 0);
  for_each_array(ck.params, [&](const std::string& name, Eigen::MatrixXd& m, bool) {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw ParseError("checkpoint is missing array " + name, 0);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw ParseError("checkpoint array " + name + " has the wrong shape", 0);
    }
    m = std::move(it->second);
    arrays.erase(it);
  });
  const auto cur = arrays.find(kLabelEmbeddingArray);
  const auto anc = arrays.find("label_anchors");
  if (cur == arrays.end() || anc == arrays.end()) {
    throw ParseError("checkpoint is missing label embeddings", 0);
  }
  if (cur->second.rows() != static_cast<Eigen::Index>(cfg.num_labels) ||
      cur->second.cols() != static_cast<Eigen::Index>(cfg.label_dim)) {
    throw ParseError("checkpoint label embeddings have the wrong shape", 0);
  }
  try {
    ck.embeddings = LabelEmbeddings(std::move(cur->second), std::move(anc->second));
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), 0);
  }
  if (arrays.size() != 2) throw ParseError("checkpoint holds unknown arrays", 0);

  const auto names = get<std::uint32_t>(in);
  if (names != 0 && names != cfg.num_labels) throw ParseError("checkpoint label-name count mismatch", 0);
  for (std::uint32_t i = 0; i < names; ++i) ck.label_names.push_back(get_string(in));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(out, checkpoint);
  if (!out) throw Error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace ctxmlc
