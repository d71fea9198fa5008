#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "leaf/checkpoint.hpp"
#include "support.hpp"

using namespace leaf;
using leaf::test::make_rng;
using leaf::test::random_tensor;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("leaf_ckpt_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("tensor container round-trips names, shapes, and payloads") {
  TempDir dir;
  auto rng = make_rng(131);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({2, 2, 2}, rng);
  Tensor c = random_tensor({7}, rng);
  save_tensors(dir.file("t.bin"), {{"alpha", &a}, {"beta", &b}, {"gamma", &c}});

  auto loaded = load_tensors(dir.file("t.bin"));
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].first == "alpha");
  CHECK(loaded[1].first == "beta");
  CHECK(loaded[2].first == "gamma");
  CHECK(loaded[0].second.shape() == a.shape());
  CHECK(loaded[0].second.storage() == a.storage());
  CHECK(loaded[1].second.storage() == b.storage());
  CHECK(loaded[2].second.storage() == c.storage());
}

TEST_CASE("loader rejects files without the magic header") {
  TempDir dir;
  std::ofstream(dir.file("junk.bin")) << "not a checkpoint";
  CHECK_THROWS_WITH_AS(load_tensors(dir.file("junk.bin")),
                       doctest::Contains("LEAF1"), std::runtime_error);
}

TEST_CASE("parameter checkpoints restore both branches exactly") {
  TempDir dir;
  BranchConfig cfg;
  cfg.hidden = 4;
  cfg.layers = 2;
  cfg.hyperedges = 3;
  cfg.t_in = 3;
  cfg.t_out = 4;
  PredictorParams saved = PredictorParams::init(cfg, 17);
  nlohmann::json meta{{"note", "test"}};
  save_checkpoint(dir.file("p.leaf"), saved, meta);

  CHECK(fs::exists(dir.file("p.leaf.json")));

  PredictorParams loaded = PredictorParams::init(cfg, 99);  // different values
  load_checkpoint(dir.file("p.leaf"), loaded);
  auto a = saved.parameters();
  auto b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value.storage() == b[i]->value.storage());
  }
}

TEST_CASE("checkpoint shape or name mismatches are hard errors") {
  TempDir dir;
  BranchConfig cfg;
  cfg.hidden = 4;
  cfg.layers = 2;
  cfg.hyperedges = 3;
  cfg.t_in = 3;
  cfg.t_out = 4;
  PredictorParams saved = PredictorParams::init(cfg, 18);
  save_checkpoint(dir.file("p.leaf"), saved, {});

  BranchConfig other = cfg;
  other.hidden = 5;
  PredictorParams wrong_shape = PredictorParams::init(other, 18);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("p.leaf"), wrong_shape),
                       doctest::Contains("shape mismatch"), std::runtime_error);

  BranchConfig deeper = cfg;
  deeper.layers = 3;
  PredictorParams missing = PredictorParams::init(deeper, 18);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("p.leaf"), missing),
                       doctest::Contains("missing parameter"), std::runtime_error);
}
