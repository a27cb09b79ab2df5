#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "test_nets.hpp"
#include "udg/checkpoint.hpp"
#include "udg/optimizer.hpp"

using namespace udg;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("udg_test_" + name);
}

Checkpoint sample_checkpoint() {
  Rng rng(21);
  Checkpoint c;
  c.config = {{"seed", "7"}, {"hidden", "4,4"}};
  c.params = {{"w", testing::random_tensor({3, 2}, rng, 1e3)},
              {"b", Tensor::vector({std::numeric_limits<double>::denorm_min(), -0.0, 1.0 / 3.0})},
              {"s", Tensor::scalar(std::numeric_limits<double>::max())}};
  c.rng_seed = 0xDEADBEEFCAFEull;
  c.rng_counter = 42;
  c.iteration = 50;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const Checkpoint c = sample_checkpoint();
  const auto path = temp_path("roundtrip.json");
  save_checkpoint(c, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.version == kCheckpointVersion);
  CHECK(back.config == c.config);
  CHECK(back.rng_seed == c.rng_seed);
  CHECK(back.rng_counter == c.rng_counter);
  CHECK(back.iteration == c.iteration);
  REQUIRE(back.params.size() == c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    CHECK(back.params[i].name == c.params[i].name);
    CHECK(back.params[i].value.shape() == c.params[i].value.shape());
    for (Index k = 0; k < c.params[i].value.size(); ++k) {
      const double a = c.params[i].value.value().data()[k];
      const double b = back.params[i].value.value().data()[k];
      CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    }
  }
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));
  std::filesystem::remove(path);
}

TEST_CASE("serialization is byte stable") {
  CHECK(serialize_checkpoint(sample_checkpoint()) == serialize_checkpoint(sample_checkpoint()));
}

TEST_CASE("corrupted checkpoints are rejected") {
  const std::string text = serialize_checkpoint(sample_checkpoint());
  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), CheckpointError);

  std::string wrong_version = text;
  const auto pos = wrong_version.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  wrong_version.replace(pos, 12, "\"version\": 9");
  CHECK_THROWS_AS(parse_checkpoint(wrong_version), CheckpointError);

  // Drop one value from the 3x2 weight: length no longer matches the shape.
  Checkpoint c = sample_checkpoint();
  c.params = {{"w", Tensor::matrix(Matrix::Ones(2, 2))}};
  std::string short_data = serialize_checkpoint(c);
  const auto data = short_data.find("1 1 1 1");
  REQUIRE(data != std::string::npos);
  short_data.replace(data, 7, "1 1 1");
  CHECK_THROWS_AS(parse_checkpoint(short_data), CheckpointError);

  const auto path = temp_path("truncated.json");
  {
    std::ofstream os(path);
    os << text.substr(0, 40);
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(temp_path("does_not_exist.json")), CheckpointError);
}

TEST_CASE("a failed save leaves the previous file intact") {
  const auto dir = temp_path("ro_dir");
  std::filesystem::create_directories(dir);
  const auto path = dir / "ckpt.json";
  save_checkpoint(sample_checkpoint(), path);
  const Checkpoint before = load_checkpoint(path);
  CHECK_THROWS(save_checkpoint(sample_checkpoint(), dir / "missing" / "ckpt.json"));
  CHECK(serialize_checkpoint(load_checkpoint(path)) == serialize_checkpoint(before));
  std::filesystem::remove_all(dir);
}

TEST_CASE("optimizer state survives a checkpoint") {
  Rng rng(22);
  std::vector<Tensor> params = {testing::random_tensor({2, 2}, rng), testing::random_tensor({3}, rng)};
  const std::vector<std::string> names = {"p0", "p1"};
  Optimizer a(OptimizerKind::kAdam, 0.01);
  for (int i = 0; i < 3; ++i) {
    std::vector<Tensor> grads = {testing::random_tensor({2, 2}, rng), testing::random_tensor({3}, rng)};
    params = a.step(params, grads);
  }
  Optimizer b(OptimizerKind::kAdam, 0.01);
  b.restore(names, a.state(names));
  const std::vector<Tensor> grads = {testing::random_tensor({2, 2}, rng), testing::random_tensor({3}, rng)};
  const std::vector<Tensor> ua = a.step(params, grads);
  const std::vector<Tensor> ub = b.step(params, grads);
  for (std::size_t i = 0; i < ua.size(); ++i) CHECK(ua[i].value() == ub[i].value());
}
