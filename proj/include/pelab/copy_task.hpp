#pragma once

#include <cstdint>
#include <vector>

#include "pelab/errors.hpp"
#include "pelab/rng.hpp"

namespace pelab {

// One supervised sequence. loss_mask marks the positions whose token the
// model must predict (from the logits one step earlier).
struct TaskSample {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
};

enum class TaskKind {
  Copy,           // [payload, SEP, payload], supervise the echoed half
  ShiftedRecall,  // payload repeated in place (no separator), supervise the
                  // repetition: position t >= k must recall token t - k
};

// Token layout: data symbols 0..vocab-3, SEP = vocab-2, vocab-1 reserved
// as padding headroom.
struct CopyTaskConfig {
  TaskKind kind = TaskKind::Copy;
  long k_min = 1;
  long k_max = 32;
  int vocab = 16;

  void validate() const {
    if (vocab < 3)
      throw InvalidParameter(
          "copy task: vocab must be >= 3 (separator + padding headroom)");
    if (k_min < 1 || k_min > k_max)
      throw InvalidParameter("copy task: need 1 <= k_min <= k_max");
  }

  int sep_token() const { return vocab - 2; }
  int data_symbols() const { return vocab - 2; }
  long max_sample_len() const { return 2 * k_max + 1; }
};

class CopyTaskGenerator {
 public:
  CopyTaskGenerator(const CopyTaskConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(make_rng(seed)) {
    cfg.validate();
  }

  TaskSample next() {
    const long k = uniform_int(rng_, cfg_.k_min, cfg_.k_max);
    return sample_with_payload(k);
  }

  // Fixed payload length; used by the length-sweep evaluator.
  TaskSample next_fixed(long k) {
    if (k < 1) throw InvalidParameter("copy task: payload length must be >= 1");
    return sample_with_payload(k);
  }

 private:
  TaskSample sample_with_payload(long k) {
    TaskSample s;
    const std::size_t n = static_cast<std::size_t>(2 * k + 1);
    s.tokens.reserve(n);
    s.loss_mask.assign(n, 0);
    for (long t = 0; t < k; ++t)
      s.tokens.push_back(static_cast<int>(
          uniform_int(rng_, 0, cfg_.data_symbols() - 1)));
    if (cfg_.kind == TaskKind::Copy) {
      s.tokens.push_back(cfg_.sep_token());
      for (long t = 0; t < k; ++t) {
        s.tokens.push_back(s.tokens[static_cast<std::size_t>(t)]);
        s.loss_mask[static_cast<std::size_t>(k + 1 + t)] = 1;
      }
    } else {
      while (s.tokens.size() < n) {
        const std::size_t t = s.tokens.size();
        s.tokens.push_back(s.tokens[t - static_cast<std::size_t>(k)]);
        s.loss_mask[t] = 1;
      }
    }
    return s;
  }

  CopyTaskConfig cfg_;
  Rng rng_;
};

}  // namespace pelab
