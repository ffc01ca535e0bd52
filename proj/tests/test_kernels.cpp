#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "pelab/bias_spec.hpp"
#include "pelab/kernels.hpp"
#include "pelab/rng.hpp"
#include "pelab/rope.hpp"

using namespace pelab;

TEST_CASE("alibi bias is -r times the distance") {
  CHECK(bias_alibi(7, 3, 0.5) == -2.0);
  CHECK(bias_alibi(4, 4, 1.0) == 0.0);
  CHECK(bias_alibi(10, 1, 1.0) == -9.0);
  CHECK_THROWS_AS(bias_alibi(3, 1, 0.0), InvalidParameter);
  CHECK_THROWS_AS(bias_alibi(3, 1, -1.0), InvalidParameter);
  CHECK_THROWS_AS(bias_alibi(3, 5, 1.0), InvalidParameter);
}

TEST_CASE("kerple log and power variants") {
  CHECK(bias_kerple(5, 5, 2.0, 1.0, KerpleVariant::Log) == 0.0);
  CHECK(bias_kerple(6, 3, 1.0, 2.0, KerpleVariant::Power) == -9.0);
  // -ln(1 + 3*1) = -ln 4, hand-evaluated
  CHECK(bias_kerple(4, 3, 1.0, 3.0, KerpleVariant::Log) ==
        Catch::Approx(-1.3862943611198906).epsilon(1e-14));
  CHECK_THROWS_AS(bias_kerple(3, 1, 0.0, 1.0, KerpleVariant::Log),
                  InvalidParameter);
  CHECK_THROWS_AS(bias_kerple(3, 1, 1.0, -2.0, KerpleVariant::Power),
                  InvalidParameter);
}

TEST_CASE("sandwich cosine sum") {
  CHECK(bias_sandwich(9, 9, 2.0, 4) == 8.0);  // cos(0) summed 4 times, x2
  // cos(pi) through the distance form
  CHECK(sandwich_from_distance(10000.0 * M_PI, 1.0, 1) ==
        Catch::Approx(-1.0).margin(1e-12));
  // cos(1) + cos(0.01), hand-evaluated
  CHECK(sandwich_from_distance(100.0, 1.0, 2) ==
        Catch::Approx(1.540252306284805).epsilon(1e-14));
  CHECK_THROWS_AS(bias_sandwich(3, 1, 1.0, 0), InvalidParameter);
}

TEST_CASE("general bucket lookup scans boundaries") {
  const std::vector<long> s{0, 4, 16};
  CHECK(t5_bucket_general(0, s) == 0);
  CHECK(t5_bucket_general(5, s) == 1);
  CHECK(t5_bucket_general(16, s) == 2);  // overflow bucket
  CHECK(t5_bucket_general(400, s) == 2);
  CHECK_THROWS_AS(t5_bucket_general(1, {1, 2}), InvalidParameter);
  CHECK_THROWS_AS(t5_bucket_general(1, {0, 4, 4}), InvalidParameter);
  CHECK_THROWS_AS(t5_bucket_general(-1, s), InvalidParameter);
}

TEST_CASE("log-binned buckets match the closed form spot values") {
  CHECK(t5_bucket_logbin(5, 32, 128) == 5);
  CHECK(t5_bucket_logbin(128, 32, 128) == 31);
  CHECK(t5_bucket_logbin(64, 32, 128) == 26);  // 16 + floor(16*ln4/ln8)
  CHECK_THROWS_AS(t5_bucket_logbin(1, 31, 128), InvalidParameter);
  CHECK_THROWS_AS(t5_bucket_logbin(1, 32, 16), InvalidParameter);
}

TEST_CASE("log-binned buckets equal the linear-scan oracle on [0, 4096]") {
  const auto boundaries = t5_logbin_boundaries(32, 128);
  // frozen from an independent evaluation of the closed form
  const std::vector<long> expected{0,  1,  2,  3,  4,  5,  6,  7,
                                   8,  9,  10, 11, 12, 13, 14, 15,
                                   16, 19, 21, 24, 27, 31, 35, 40,
                                   46, 52, 59, 67, 77, 87, 99, 113};
  REQUIRE(boundaries == expected);
  for (long d = 0; d <= 4096; ++d)
    REQUIRE(t5_bucket_logbin(d, 32, 128) == t5_bucket_general(d, boundaries));
}

TEST_CASE("bias_from_spec dispatches every variant") {
  BiasSpec nope;
  CHECK(bias_from_spec(nope, 12, 3) == 0.0);

  BiasSpec t5;
  t5.variant = BiasVariant::T5Simplified;
  t5.values = {0, 1, 2, 3, 9};
  CHECK(bias_from_spec(t5, 10, 2) == 9.0);  // min{8, K=4} -> r_4
  CHECK(bias_from_spec(t5, 3, 1) == 2.0);

  BiasSpec alibi;
  alibi.variant = BiasVariant::Alibi;
  alibi.r = 1.0;
  CHECK(bias_from_spec(alibi, 3, 1) == -2.0);
}

TEST_CASE("translation invariance: bias depends only on the distance") {
  std::vector<BiasSpec> specs;
  specs.push_back({});  // NoPE
  {
    BiasSpec s;
    s.variant = BiasVariant::T5Bucketed;
    s.boundaries = {0, 2, 8, 20};
    s.values = {0.5, -1.0, 2.0, 0.25};
    specs.push_back(s);
  }
  {
    BiasSpec s;
    s.variant = BiasVariant::T5LogBin;
    s.num_buckets = 32;
    s.max_distance = 128;
    s.values.resize(32);
    for (int k = 0; k < 32; ++k) s.values[static_cast<std::size_t>(k)] = 0.1 * k;
    specs.push_back(s);
  }
  {
    BiasSpec s;
    s.variant = BiasVariant::Alibi;
    s.r = 0.7;
    specs.push_back(s);
  }
  {
    BiasSpec s;
    s.variant = BiasVariant::KerpleLog;
    s.r1 = 1.3;
    s.r2 = 0.4;
    specs.push_back(s);
  }
  {
    BiasSpec s;
    s.variant = BiasVariant::KerplePower;
    s.r1 = 0.8;
    s.r2 = 1.5;
    specs.push_back(s);
  }
  {
    BiasSpec s;
    s.variant = BiasVariant::Sandwich;
    s.r1 = 1.1;
    s.d_prime = 4;
    specs.push_back(s);
  }

  Rng rng = make_rng(2024);
  for (const auto& spec : specs) {
    for (int trial = 0; trial < 200; ++trial) {
      const long i = uniform_int(rng, 0, 300);
      const long j = uniform_int(rng, 0, i);
      REQUIRE(bias_from_spec(spec, i + 1, j + 1) ==
              bias_from_spec(spec, i, j));
    }
  }
}

TEST_CASE("alibi and kerple decay monotonically from an exact zero") {
  BiasSpec alibi;
  alibi.variant = BiasVariant::Alibi;
  alibi.r = 0.3;
  BiasSpec klog;
  klog.variant = BiasVariant::KerpleLog;
  klog.r1 = 0.9;
  klog.r2 = 1.7;
  BiasSpec kpow;
  kpow.variant = BiasVariant::KerplePower;
  kpow.r1 = 0.6;
  kpow.r2 = 1.2;
  for (const auto& spec : {alibi, klog, kpow}) {
    CHECK(bias_from_spec(spec, 5, 5) == 0.0);
    double prev = 0.0;
    for (long d = 1; d <= 256; ++d) {
      const double b = bias_from_spec(spec, d, 0);
      REQUIRE(b <= prev);
      prev = b;
    }
  }
}

TEST_CASE("build_bias_matrix fills the lower triangle and is reproducible") {
  BiasSpec nope;
  const auto zero = build_bias_matrix(nope, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j <= i; ++j) CHECK(zero.at(0, i, j) == 0.0);

  BiasSpec alibi;
  alibi.variant = BiasVariant::Alibi;
  alibi.r = 1.0;
  const auto m = build_bias_matrix(alibi, 3);
  CHECK(m.at(0, 2, 0) == -2.0);
  CHECK(m.at(0, 2, 1) == -1.0);
  CHECK(m.at(0, 2, 2) == 0.0);

  BiasSpec klog;
  klog.variant = BiasVariant::KerpleLog;
  klog.r1 = 1.0;
  klog.r2 = 1.0;
  const auto k = build_bias_matrix(klog, 2);
  CHECK(k.at(0, 1, 0) == Catch::Approx(-0.6931471805599453).epsilon(1e-15));
  CHECK(k.at(0, 1, 1) == 0.0);

  // bit-for-bit reproducibility of the lower triangle
  BiasSpec sand;
  sand.variant = BiasVariant::Sandwich;
  sand.r1 = 0.9;
  sand.d_prime = 6;
  const auto a = build_bias_matrix(sand, 64);
  const auto b = build_bias_matrix(sand, 64);
  REQUIRE(std::memcmp(a.values.data(), b.values.data(),
                      a.values.size() * sizeof(double)) == 0);

  CHECK_THROWS_AS(build_bias_matrix(nope, 0), EmptyInput);
}

TEST_CASE("bias matrix masks exactly the upper triangle") {
  CHECK_FALSE(BiasMatrix<double>::masked(3, 3));
  CHECK_FALSE(BiasMatrix<double>::masked(3, 0));
  CHECK(BiasMatrix<double>::masked(3, 4));
}

TEST_CASE("rope rotates planes and preserves norms") {
  RopeConfig cfg;
  cfg.head_dim = 2;
  {
    std::vector<double> v{1.0, 0.0};
    const auto out = rope_apply(std::span<const double>(v), 0, cfg);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.0);
  }

  RopeConfig cfg8;
  cfg8.head_dim = 8;
  Rng rng = make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(8), k(8);
    for (auto& x : q) x = uniform_real(rng, -1, 1);
    for (auto& x : k) x = uniform_real(rng, -1, 1);
    const long i = uniform_int(rng, 0, 100);
    const long j = uniform_int(rng, 0, i);
    const long t = 5;
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0;
      for (std::size_t e = 0; e < a.size(); ++e) s += a[e] * b[e];
      return s;
    };
    const auto qi = rope_apply(std::span<const double>(q), i, cfg8);
    const auto kj = rope_apply(std::span<const double>(k), j, cfg8);
    const auto qit = rope_apply(std::span<const double>(q), i + t, cfg8);
    const auto kjt = rope_apply(std::span<const double>(k), j + t, cfg8);
    REQUIRE(dot(qi, kj) == Catch::Approx(dot(qit, kjt)).margin(1e-12));

    // norm preservation
    REQUIRE(std::sqrt(dot(qi, qi)) ==
            Catch::Approx(std::sqrt(dot(q, q))).margin(1e-12));
  }

  // position interpolation: scaled position 8 behaves as unscaled 4
  RopeConfig pi_cfg = cfg8;
  pi_cfg.pi_scale = 0.5;
  std::vector<double> v(8);
  for (std::size_t e = 0; e < 8; ++e) v[e] = 0.25 * static_cast<double>(e) - 1.0;
  const auto scaled = rope_apply(std::span<const double>(v), 8, pi_cfg);
  const auto plain = rope_apply(std::span<const double>(v), 4, cfg8);
  for (std::size_t e = 0; e < 8; ++e)
    REQUIRE(scaled[e] == Catch::Approx(plain[e]).margin(1e-12));

  RopeConfig odd;
  odd.head_dim = 3;
  std::vector<double> w{1, 2, 3};
  CHECK_THROWS_AS(rope_apply_inplace(std::span<double>(w), 1, odd),
                  InvalidParameter);
}

TEST_CASE("bias spec validation rejects malformed parameters") {
  BiasSpec bad;
  bad.variant = BiasVariant::T5Bucketed;
  bad.boundaries = {0, 4, 4};
  bad.values = {1, 2, 3};
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);

  bad.variant = BiasVariant::T5LogBin;
  bad.num_buckets = 31;
  bad.max_distance = 128;
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);
  bad.num_buckets = 32;
  bad.max_distance = 16;  // must exceed num_buckets/2
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);

  BiasSpec sandwich;
  sandwich.variant = BiasVariant::Sandwich;
  sandwich.r1 = 1.0;
  sandwich.d_prime = 0;
  CHECK_THROWS_AS(sandwich.validate(), InvalidParameter);
}
