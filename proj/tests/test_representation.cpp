#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pelab/representation.hpp"

using namespace pelab;

namespace {

BiasSpec t5_spec(std::vector<long> boundaries, std::vector<double> values) {
  BiasSpec spec;
  spec.variant = BiasVariant::T5Bucketed;
  spec.boundaries = std::move(boundaries);
  spec.values = std::move(values);
  return spec;
}

}  // namespace

TEST_CASE("t5 construction reproduces the bucketed function") {
  const auto target = t5_spec({0, 4, 16}, {1.0, 2.0, 5.0});
  const auto cons = construct_t5(target, 32);
  CHECK(cons.provenance == ConstructionCase::T5);
  // b(10, 2): distance 8 lies in bucket [4, 16) -> r_1 = 2
  CHECK(fire_bias(10 - 1, 2 - 1, cons.fire)[0] == 2.0);
  // exhaustive grid: exact zero error (integer-exact step inputs)
  CHECK(verify_representation(cons, target, 32) == 0.0);
}

TEST_CASE("single-bucket t5 folds to a constant") {
  const auto target = t5_spec({0}, {3.0});
  const auto cons = construct_t5(target, 16);
  for (long i = 1; i <= 16; ++i)
    for (long j = 1; j <= i; ++j)
      REQUIRE(fire_bias(i - 1, j - 1, cons.fire)[0] == 3.0);
  CHECK(verify_representation(cons, target, 16) == 0.0);
}

TEST_CASE("t5 construction rejects boundaries beyond the grid") {
  const auto target = t5_spec({0, 4, 40}, {1.0, 2.0, 5.0});
  CHECK_THROWS_AS(construct_t5(target, 32), ConstructionOutOfRange);
}

TEST_CASE("alibi construction is exact on the grid") {
  const auto cons = construct_alibi(0.5, 8);
  CHECK(fire_bias(5 - 1, 3 - 1, cons.fire)[0] == -1.0);
  CHECK(fire_bias(6 - 1, 6 - 1, cons.fire)[0] == 0.0);

  BiasSpec target;
  target.variant = BiasVariant::Alibi;
  target.r = 0.7;
  const auto big = construct_alibi(0.7, 128);
  CHECK(verify_representation(big, target, 128) <= 1e-12);
}

TEST_CASE("kerple log construction cancels the normalizer") {
  const auto cons = construct_kerple_log(1.0, 1.0, 8);
  CHECK(fire_bias(5 - 1, 5 - 1, cons.fire)[0] == 0.0);
  CHECK(fire_bias(5 - 1, 3 - 1, cons.fire)[0] ==
        Catch::Approx(-std::log(3.0)).epsilon(1e-14));

  BiasSpec target;
  target.variant = BiasVariant::KerpleLog;
  target.r1 = 2.0;
  target.r2 = 0.3;
  const auto big = construct_kerple_log(2.0, 0.3, 128);
  CHECK(verify_representation(big, target, 128) <= 1e-12);
}

TEST_CASE("kerple power construction") {
  const auto cons = construct_kerple_power(1.0, 2.0, 8);
  CHECK(fire_bias(5 - 1, 2 - 1, cons.fire)[0] == Catch::Approx(-9.0).epsilon(1e-13));
  CHECK(fire_bias(4 - 1, 4 - 1, cons.fire)[0] == 0.0);

  BiasSpec target;
  target.variant = BiasVariant::KerplePower;
  target.r1 = 0.5;
  target.r2 = 1.5;
  const auto big = construct_kerple_power(0.5, 1.5, 128);
  CHECK(verify_representation(big, target, 128) <= 1e-10);
}

TEST_CASE("sandwich construction") {
  const auto cons = construct_sandwich(1.0, 1, 8);
  CHECK(fire_bias(5 - 1, 3 - 1, cons.fire)[0] ==
        Catch::Approx(std::cos(2.0 / 10000.0)).epsilon(1e-14));
  // zero distance: cos(0) summed d' times, scaled by r1
  const auto wide = construct_sandwich(0.75, 6, 8);
  CHECK(fire_bias(3 - 1, 3 - 1, wide.fire)[0] ==
        Catch::Approx(0.75 * 6.0).epsilon(1e-14));

  BiasSpec target;
  target.variant = BiasVariant::Sandwich;
  target.r1 = 1.0;
  target.d_prime = 8;
  const auto big = construct_sandwich(1.0, 8, 128);
  CHECK(verify_representation(big, target, 128) <= 1e-12);
}

TEST_CASE("verifier detects corruption") {
  BiasSpec target;
  target.variant = BiasVariant::Alibi;
  target.r = 1.0;
  auto cons = construct_alibi(1.0, 64);
  CHECK(verify_representation(cons, target, 64) <= 1e-12);
  cons.fire.mlp.layers[0].weight(0, 0) += 1e-3;
  CHECK(verify_representation(cons, target, 64) > 0.0);
}

TEST_CASE("five seeded draws per case verify at both grid sizes") {
  for (const auto c : kAllConstructionCases) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      {
        const auto target = draw_target_spec(c, seed, 128);
        const auto cons = construct_for_spec(target, 128);
        const double err = verify_representation(cons, target, 128);
        INFO(construction_name(c) << " seed " << seed << " err " << err);
        REQUIRE(err <= 1e-10);
        if (c == ConstructionCase::T5) REQUIRE(err == 0.0);
      }
      {
        const auto target = draw_target_spec(c, seed, 1024);
        const auto cons = construct_for_spec(target, 1024);
        const double err = verify_representation(cons, target, 1024);
        INFO(construction_name(c) << " seed " << seed << " @1024 err " << err);
        REQUIRE(err <= 1e-6);
      }
    }
  }
}

TEST_CASE("constructions serialize deterministically") {
  const auto target = t5_spec({0, 2, 5, 9}, {0.5, -1.0, 2.0, 0.0});
  const auto a = construct_t5(target, 16);
  const auto b = construct_t5(target, 16);
  CHECK(fire_params_to_json(a.fire).dump() ==
        fire_params_to_json(b.fire).dump());

  const auto s1 = construct_sandwich(1.25, 5, 64);
  const auto s2 = construct_sandwich(1.25, 5, 64);
  CHECK(fire_params_to_json(s1.fire).dump() ==
        fire_params_to_json(s2.fire).dump());
}

TEST_CASE("reduction identities: linear-MLP FIRE collapses to the baselines") {
  // psi = identity, linear MLP, L = L0 -> Alibi exactly
  BiasSpec alibi;
  alibi.variant = BiasVariant::Alibi;
  alibi.r = 1.3;
  CHECK(verify_representation(construct_alibi(1.3, 128), alibi, 128) <= 1e-12);

  // psi = log with c = r2, linear MLP, L = L0 -> Kerple-log exactly
  BiasSpec klog;
  klog.variant = BiasVariant::KerpleLog;
  klog.r1 = 0.8;
  klog.r2 = 1.9;
  CHECK(verify_representation(construct_kerple_log(0.8, 1.9, 128), klog, 128) <=
        1e-12);
}
