#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "dvlr/checkpoint.hpp"
#include "dvlr/common.hpp"
#include "dvlr/config.hpp"
#include "support/oracles.hpp"

using namespace dvlr;
using dvlr::oracle::kind;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dvlr_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Checkpoint sample_checkpoint() {
  const Vocabulary vocab = Vocabulary::geometry();
  Checkpoint c;
  c.params = init_policy(vocab, 3, 2, 4, 77, Role::reasoner);
  c.optimizer = init_optimizer(c.params, 2.5e-4);
  c.optimizer.step = 12;
  Rng rng(1);
  for (auto& v : c.optimizer.m.output_b) v = rng.uniform01() - 0.5;
  for (auto& v : c.optimizer.v.embedding) v = rng.uniform01();
  c.provenance = "stage = sft\nseed = 3\n";
  return c;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("presets") {
    const auto paper = preset_config("paper");
    CHECK(paper.stage2.G == 5);
    CHECK(paper.stage2.clip_epsilon == 0.2);
    CHECK(paper.stage2.kl_beta == 0.01);
    CHECK(paper.stage2.learning_rate == 1e-6);
    CHECK(paper.stage2.epochs == 5);
    CHECK(paper.stage2.batch_size == 64);
    CHECK(paper.sft.epochs == 1);
    CHECK(paper.sft.batch_size == 128);
    CHECK(paper.sft.learning_rate == 1e-4);
    const auto toy = preset_config("toy");
    CHECK(toy.sft.batch_size == 32);
    CHECK(toy.sft.learning_rate == 3e-3);
    CHECK(toy.n_train == 3000);
    CHECK(toy.n_heldout == 300);
    CHECK(oracle::error_kind_of([] { preset_config("huge"); }) == kind(ErrorKind::config));
  }

  TEST_CASE("overrides, validation and serialization round trip") {
    RunConfig c = preset_config("toy");
    set_option(c, "stage2.kl_beta", "0.05");
    set_option(c, "reasoner.H", "64");
    set_option(c, "stage3.ratio", "sequence");
    CHECK(c.stage2.kl_beta == 0.05);
    CHECK(c.reasoner.H == 64);
    CHECK(c.stage3.ratio_mode == RatioMode::sequence);
    CHECK(oracle::error_kind_of([&] { set_option(c, "stage2.nope", "1"); }) == kind(ErrorKind::config));
    CHECK(oracle::error_kind_of([&] { set_option(c, "stage2.G", "five"); }) == kind(ErrorKind::config));

    RunConfig bad = c;
    set_option(bad, "stage2.G", "1");
    CHECK(oracle::error_kind_of([&] { finalize(bad); }) == kind(ErrorKind::config));
    bad = c;
    set_option(bad, "stage3.clip_epsilon", "1.5");
    CHECK(oracle::error_kind_of([&] { finalize(bad); }) == kind(ErrorKind::config));

    finalize(c);
    RunConfig back = preset_config("paper");
    for (const auto& [k, v] : to_pairs(c)) set_option(back, k, v);
    finalize(back);
    CHECK(serialize(back) == serialize(c));
  }

  TEST_CASE("config files apply the preset first") {
    const auto dir = scratch_dir("config");
    const auto path = (dir / "run.cfg").string();
    std::ofstream(path) << "# comment\nstage2.epochs = 7\npreset = paper\n\nseed=9  # trailing\n";
    RunConfig c = preset_config("toy");
    const auto kv = read_config_file(path);
    REQUIRE(kv.size() == 3);
    CHECK(kv[0].first == "preset");
    for (const auto& [k, v] : kv) set_option(c, k, v);
    CHECK(c.preset == "paper");
    CHECK(c.stage2.epochs == 7);
    CHECK(c.stage2.learning_rate == 1e-6);
    CHECK(c.seed == 9);
    std::ofstream(path) << "no equals sign\n";
    CHECK(oracle::error_kind_of([&] { read_config_file(path); }) == kind(ErrorKind::config));
    CHECK(oracle::error_kind_of([&] { read_config_file((dir / "missing").string()); }) == kind(ErrorKind::io));
  }

  TEST_CASE("stage seeds derive from the run seed") {
    RunConfig a = preset_config("toy"), b = preset_config("toy");
    b.seed = a.seed + 1;
    finalize(a);
    finalize(b);
    CHECK(a.sft.seed != b.sft.seed);
    CHECK(a.stage2.seed != a.stage3.seed);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("byte round trip") {
    const Vocabulary vocab = Vocabulary::geometry();
    const Checkpoint c = sample_checkpoint();
    const std::string bytes = encode_checkpoint(c, vocab);
    const Checkpoint back = decode_checkpoint(bytes, vocab);
    CHECK(back.params == c.params);
    CHECK(back.optimizer == c.optimizer);
    CHECK(back.provenance == c.provenance);
    CHECK(encode_checkpoint(back, vocab) == bytes);
    CHECK(bytes.rfind("DVLRCKPT", 0) == 0);
  }

  TEST_CASE("file round trip") {
    const Vocabulary vocab = Vocabulary::geometry();
    const auto path = (scratch_dir("ckpt") / "a.ckpt").string();
    const Checkpoint c = sample_checkpoint();
    save_checkpoint(path, c, vocab);
    CHECK(load_checkpoint(path, vocab).params == c.params);
    CHECK(oracle::error_kind_of([&] { load_checkpoint(path + ".missing", vocab); }) == kind(ErrorKind::io));
  }

  TEST_CASE("corrupt or foreign checkpoints are format errors") {
    const Vocabulary vocab = Vocabulary::geometry();
    const std::string bytes = encode_checkpoint(sample_checkpoint(), vocab);
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK(oracle::error_kind_of([&] { decode_checkpoint(magic, vocab); }) == kind(ErrorKind::format));
    CHECK(oracle::error_kind_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() / 2), vocab); }) ==
          kind(ErrorKind::format));
    std::string extra = bytes + "z";
    CHECK(oracle::error_kind_of([&] { decode_checkpoint(extra, vocab); }) == kind(ErrorKind::format));
    // A checkpoint written against one vocabulary is refused by another.
    const Vocabulary other({"<pad>", "<eos>", "a"});
    CHECK(oracle::error_kind_of([&] { decode_checkpoint(bytes, other); }) == kind(ErrorKind::format));
  }

  TEST_CASE("parameter hash tracks every parameter") {
    Checkpoint c = sample_checkpoint();
    const std::string h = parameter_hash(c.params);
    CHECK(h.size() == 64);
    CHECK(parameter_hash(c.params) == h);
    c.params.w.hidden_w[5] += 1e-12;
    CHECK(parameter_hash(c.params) != h);
  }

  TEST_CASE("sha256 known answer") {
    CHECK(to_hex(sha256("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
