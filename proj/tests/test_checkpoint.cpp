#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "fkmad/checkpoint.hpp"
#include "fkmad/errors.hpp"
#include "fkmad/model.hpp"

using namespace fkmad;

namespace {

Checkpoint sample() {
  ModelConfig mc;
  mc.D = 3;
  mc.d_inner = 2;
  Checkpoint ck;
  ck.step = 123;
  ck.config = "[model]\nD = 3\n";
  ck.tensors = init_model(mc, 11).tensors;
  ck.tensors["norm.mean"] = Tensor({3}, {0.1, -0.0, 1e-300});
  ck.tensors["norm.std"] = Tensor({3}, {std::numeric_limits<double>::denorm_min(), 1.0 / 3.0, 7.0});
  return ck;
}

}  // namespace

TEST_CASE("round-trip is bit-exact") {
  const Checkpoint ck = sample();
  const std::string bytes = serialize_checkpoint(ck);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.version == kCheckpointVersion);
  CHECK(back.step == 123);
  CHECK(back.config == ck.config);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    const Tensor& u = back.tensors.at(name);
    CHECK(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(u[i]) == std::bit_cast<std::uint64_t>(t[i]));
  }
  CHECK(std::signbit(back.tensors.at("norm.mean")[1]));
  CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("file round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "fkmad_test_checkpoint.bin";
  save_checkpoint(path.string(), sample());
  CHECK(serialize_checkpoint(load_checkpoint(path.string())) == serialize_checkpoint(sample()));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
}

TEST_CASE("corrupt input is rejected") {
  const std::string bytes = serialize_checkpoint(sample());
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), DataError);

  bad = bytes;
  bad[8] = 99;  // version field follows the 8-byte magic
  CHECK_THROWS_AS(deserialize_checkpoint(bad), DataError);

  for (std::size_t n : {std::size_t(0), std::size_t(5), std::size_t(12), bytes.size() / 2, bytes.size() - 1}) {
    INFO(n);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, n)), DataError);
  }
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
}
