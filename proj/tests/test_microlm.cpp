#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "pelab/copy_task.hpp"
#include "pelab/microlm.hpp"
#include "pelab/rng.hpp"

using namespace pelab;

namespace {

ModelConfig tiny_config(PeKind kind = PeKind::NoPe) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.d_model = 16;
  cfg.d_head = 8;
  cfg.ffn_mult = 2;
  cfg.vocab_size = 16;
  cfg.train_len = 16;
  cfg.pe.kind = kind;
  if (kind == PeKind::Additive) {
    BiasSpec alibi;
    alibi.variant = BiasVariant::Alibi;
    alibi.r = 0.5;
    cfg.pe.additive = {alibi};
  }
  return cfg;
}

}  // namespace

TEST_CASE("softmax_causal") {
  {
    std::vector<double> row{0.0, 0.0, 0.0};
    softmax_causal(std::span<double>(row), 2);
    for (double p : row) CHECK(p == Catch::Approx(1.0 / 3).epsilon(1e-15));
  }
  {
    std::vector<double> row{std::log(2.0), 0.0};
    softmax_causal(std::span<double>(row), 1);
    CHECK(row[0] == Catch::Approx(2.0 / 3).epsilon(1e-14));
    CHECK(row[1] == Catch::Approx(1.0 / 3).epsilon(1e-14));
  }
  {
    std::vector<double> row{5.0, 99.0, -3.0};
    softmax_causal(std::span<double>(row), 0);
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 0.0);
    CHECK(row[2] == 0.0);
  }
  {
    std::vector<double> row{1.0};
    CHECK_THROWS_AS(softmax_causal(std::span<double>(row), 3),
                    InvalidParameter);
  }
  {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> row{-inf, -inf};
    CHECK_THROWS_AS(softmax_causal(std::span<double>(row), 1), DegenerateRow);
  }
}

TEST_CASE("softmax rows sum to one and respect the causal mask") {
  const auto cfg = tiny_config(PeKind::Additive);
  const auto params = init_model_params<double>(cfg, 3);
  ForwardCache<double> cache;
  std::vector<int> tokens{3, 1, 4, 1, 5, 9, 2, 6};
  forward_lm(tokens, params, cache);
  for (const auto& layer : cache.layers)
    for (const auto& probs : layer.attn.probs)
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < tokens.size(); ++j) {
          if (j > i) REQUIRE(probs(i, j) == 0.0);  // no mass above diagonal
          else {
            REQUIRE(probs(i, j) > 0.0);
            sum += probs(i, j);
          }
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
      }
}

TEST_CASE("single token attends only to itself regardless of PE") {
  for (PeKind kind : {PeKind::NoPe, PeKind::Rope, PeKind::Additive}) {
    const auto cfg = tiny_config(kind);
    const auto params = init_model_params<double>(cfg, 5);
    const auto& layer = params.layers[0];

    Matrix<double> x(1, cfg.d_model);
    Rng rng = make_rng(8);
    for (auto& v : x.flat()) v = uniform_real(rng, -1, 1);

    RopeConfig rope = cfg.rope_config();
    const BiasSet<double> bias = build_bias_set(params, 1);
    const auto out = causal_attention(x, layer, cfg.num_heads,
                                      bias.per_layer[0],
                                      kind == PeKind::Rope ? &rope : nullptr);

    // expected: (x Wv) Wo  (weight-1 self attention)
    Matrix<double> v(1, cfg.d_model), expect(1, cfg.d_model);
    matmul(x, layer.wv, v);
    matmul(v, layer.wo, expect);
    for (std::size_t k = 0; k < cfg.d_model; ++k)
      REQUIRE(out(0, k) == Catch::Approx(expect(0, k)).margin(1e-12));
  }
}

TEST_CASE("zero projections give uniform attention rows") {
  auto cfg = tiny_config(PeKind::NoPe);
  auto params = init_model_params<double>(cfg, 5);
  params.layers[0].wq.fill(0.0);
  params.layers[0].wk.fill(0.0);
  ForwardCache<double> cache;
  std::vector<int> tokens{1, 2, 3, 4, 5};
  forward_lm(tokens, params, cache);
  const auto& probs = cache.layers[0].attn.probs[0];
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j)
      REQUIRE(probs(i, j) ==
              Catch::Approx(1.0 / static_cast<double>(i + 1)).epsilon(1e-12));
}

TEST_CASE("zero unembedding gives exactly uniform loss ln(vocab)") {
  auto cfg = tiny_config();
  auto params = init_model_params<double>(cfg, 3);
  params.unembedding.fill(0.0);
  ForwardCache<double> cache;
  std::vector<int> tokens{0, 1, 2, 3};
  std::vector<std::uint8_t> mask{0, 1, 1, 1};
  forward_lm(tokens, params, cache);
  const auto stats = masked_loss(cache.logits, tokens, mask);
  CHECK(stats.loss == Catch::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("random init starts near the uniform loss") {
  const auto cfg = tiny_config();
  const auto params = init_model_params<double>(cfg, 12);
  CopyTaskGenerator gen({TaskKind::Copy, 1, 6, 16}, 5);
  double loss_sum = 0.0;
  int count = 0;
  ForwardCache<double> cache;
  for (int s = 0; s < 8; ++s) {
    const auto sample = gen.next();
    forward_lm(sample.tokens, params, cache);
    loss_sum += masked_loss(cache.logits, sample.tokens, sample.loss_mask).loss;
    ++count;
  }
  const double mean = loss_sum / count;
  CHECK(mean > std::log(16.0) - 0.5);
  CHECK(mean < std::log(16.0) + 0.5);
}

TEST_CASE("forward is deterministic and rejects bad tokens") {
  const auto cfg = tiny_config(PeKind::Rope);
  const auto params = init_model_params<double>(cfg, 9);
  std::vector<int> tokens{1, 2, 3, 4};
  ForwardCache<double> a, b;
  forward_lm(tokens, params, a);
  forward_lm(tokens, params, b);
  REQUIRE(std::memcmp(a.logits.data(), b.logits.data(),
                      a.logits.size() * sizeof(double)) == 0);

  ForwardCache<double> c;
  CHECK_THROWS_AS(forward_lm({1, 16}, params, c), InvalidInput);
  CHECK_THROWS_AS(forward_lm({}, params, c), EmptyInput);
}

TEST_CASE("all-zero additive bias is bit-identical to NoPE") {
  auto cfg_zero = tiny_config(PeKind::Additive);
  cfg_zero.pe.additive = {BiasSpec{}};  // NoPE spec: all-zero bias matrix
  auto cfg_nope = tiny_config(PeKind::NoPe);
  const auto params_zero = init_model_params<double>(cfg_zero, 44);
  auto params_nope = init_model_params<double>(cfg_nope, 44);
  std::vector<int> tokens{7, 3, 7, 0, 11, 2};
  ForwardCache<double> a, b;
  forward_lm(tokens, params_zero, a);
  forward_lm(tokens, params_nope, b);
  REQUIRE(std::memcmp(a.logits.data(), b.logits.data(),
                      a.logits.size() * sizeof(double)) == 0);
}

TEST_CASE("FIRE-S with tied weights matches unshared FIRE to the bit") {
  ModelConfig shared_cfg = tiny_config(PeKind::Fire);
  shared_cfg.num_layers = 4;
  shared_cfg.share_pe_across_layers = true;
  const auto shared_params = init_model_params<double>(shared_cfg, 31);

  ModelConfig unshared_cfg = shared_cfg;
  unshared_cfg.share_pe_across_layers = false;
  auto unshared_params = init_model_params<double>(unshared_cfg, 31);
  // tie: copy the shared PE into every layer, and mirror the rest
  unshared_params.embedding = shared_params.embedding;
  unshared_params.layers = shared_params.layers;
  unshared_params.final_gain = shared_params.final_gain;
  unshared_params.unembedding = shared_params.unembedding;
  unshared_params.fire.assign(unshared_cfg.num_layers, shared_params.fire[0]);

  std::vector<int> tokens(32);
  Rng rng = make_rng(3);
  for (auto& t : tokens) t = static_cast<int>(uniform_int(rng, 0, 15));

  ForwardCache<double> a, b;
  forward_lm(tokens, shared_params, a);
  forward_lm(tokens, unshared_params, b);
  REQUIRE(std::memcmp(a.logits.data(), b.logits.data(),
                      a.logits.size() * sizeof(double)) == 0);  // 0 ulp
}

TEST_CASE("copy task generator") {
  CopyTaskConfig cfg{TaskKind::Copy, 1, 1, 16};
  CopyTaskGenerator gen(cfg, 42);
  const auto s = gen.next();
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[0] == s.tokens[2]);
  CHECK(s.tokens[1] == cfg.sep_token());
  CHECK(s.loss_mask == std::vector<std::uint8_t>{0, 0, 1});

  // seeded reproducibility
  CopyTaskGenerator g1({TaskKind::Copy, 1, 8, 16}, 7);
  CopyTaskGenerator g2({TaskKind::Copy, 1, 8, 16}, 7);
  for (int k = 0; k < 5; ++k) {
    const auto a = g1.next();
    const auto b = g2.next();
    REQUIRE(a.tokens == b.tokens);
    REQUIRE(a.loss_mask == b.loss_mask);
  }

  CopyTaskConfig bad;
  bad.vocab = 2;
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("shifted recall repeats the payload without a separator") {
  CopyTaskConfig cfg{TaskKind::ShiftedRecall, 3, 3, 16};
  CopyTaskGenerator gen(cfg, 9);
  const auto s = gen.next();
  REQUIRE(s.tokens.size() == 7);
  for (std::size_t t = 3; t < 7; ++t) {
    CHECK(s.tokens[t] == s.tokens[t - 3]);
    CHECK(s.loss_mask[t] == 1);
  }
  for (std::size_t t = 0; t < 3; ++t) CHECK(s.loss_mask[t] == 0);
}

TEST_CASE("copy payload histogram is near uniform") {
  CopyTaskConfig cfg{TaskKind::Copy, 4, 12, 16};
  CopyTaskGenerator gen(cfg, 1);
  std::vector<long> counts(static_cast<std::size_t>(cfg.data_symbols()), 0);
  long total = 0;
  for (int s = 0; s < 10000; ++s) {
    const auto sample = gen.next();
    const long k = (static_cast<long>(sample.tokens.size()) - 1) / 2;
    for (long t = 0; t < k; ++t) {
      ++counts[static_cast<std::size_t>(sample.tokens[static_cast<std::size_t>(t)])];
      ++total;
    }
  }
  const double expected =
      static_cast<double>(total) / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (long c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value at p = 0.001, dof = 13
  CHECK(chi2 < 34.52817897487089);
}

TEST_CASE("eval report is sorted by length with one row per length") {
  const auto cfg = tiny_config(PeKind::NoPe);
  const auto params = init_model_params<double>(cfg, 2);
  CopyTaskConfig task{TaskKind::Copy, 1, 8, 16};
  const auto report =
      eval_lengths(params, task, {8, 2, 4}, 4, 123, "NoPE");
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].length == 2);
  CHECK(report.rows[1].length == 4);
  CHECK(report.rows[2].length == 8);
  CHECK(report.variant == "NoPE");
  CHECK_THROWS_AS(eval_lengths(params, task, {0}, 4, 1), InvalidParameter);
}
