#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ctxmlc/checkpoint.hpp"
#include "ctxmlc/errors.hpp"

using namespace ctxmlc;

namespace {

Checkpoint sample() {
  ModelConfig c;
  c.num_features = 5;
  c.num_labels = 3;
  c.label_dim = 4;
  c.num_layers = 2;
  c.num_heads = 2;
  c.encoder_hidden = 6;
  c.feedforward_hidden = 7;
  c.latent_every_block = false;
  auto emb = init_random_label_embeddings(3, 4, 1);
  emb.current(1, 2) += 0.25;
  return Checkpoint{init_params(c, 2), emb, {"sea lion", "car", "dog"}};
}

std::string bytes(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, c);
  return out.str();
}

Checkpoint from_bytes(const std::string& s) {
  std::istringstream in(s, std::ios::binary);
  return read_checkpoint(in);
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  const auto c = sample();
  const auto back = from_bytes(bytes(c));
  CHECK(back.params.config == c.params.config);
  std::vector<Eigen::MatrixXd> left;
  for_each_array(c.params, [&](const std::string&, const Eigen::MatrixXd& m, bool) { left.push_back(m); });
  std::size_t i = 0;
  for_each_array(back.params, [&](const std::string& name, const Eigen::MatrixXd& m, bool) {
    INFO(name);
    CHECK(m == left[i++]);
  });
  CHECK(back.embeddings.current == c.embeddings.current);
  CHECK(back.embeddings.anchors() == c.embeddings.anchors());
  CHECK(back.label_names == c.label_names);
  CHECK(bytes(back) == bytes(c));
}

TEST_CASE("file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "ctxmlc_checkpoint_test.bin";
  save_checkpoint(path, sample());
  CHECK(load_checkpoint(path).label_names.size() == 3);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string good = bytes(sample());
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(from_bytes(bad_magic), Error);
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS_WITH_AS(from_bytes(bad_version), doctest::Contains("version"), Error);
  CHECK_THROWS_AS(from_bytes(good.substr(0, good.size() / 2)), Error);
  CHECK_THROWS_AS(from_bytes(""), Error);
}
