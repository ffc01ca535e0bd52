// pelab command line: bias export, representation verification, toy
// training, length sweeps, and timing benchmarks. One subcommand per
// invocation; every output file is a pure function of (config, seed),
// except measured wall times in bench results.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pelab/bench.hpp"
#include "pelab/bias_spec.hpp"
#include "pelab/checkpoint.hpp"
#include "pelab/config_json.hpp"
#include "pelab/csv.hpp"
#include "pelab/errors.hpp"
#include "pelab/fire.hpp"
#include "pelab/kernels.hpp"
#include "pelab/microlm.hpp"
#include "pelab/representation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfigError = 2;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Schema validation: unknown keys are rejected everywhere, before any
// computation runs.

enum class FieldType { Object, Array, String, Bool, Integer, Number };

struct Field {
  const char* name;
  FieldType type;
  bool required;
};

bool type_matches(const json& v, FieldType t) {
  switch (t) {
    case FieldType::Object: return v.is_object();
    case FieldType::Array: return v.is_array();
    case FieldType::String: return v.is_string();
    case FieldType::Bool: return v.is_boolean();
    case FieldType::Integer: return v.is_number_integer();
    case FieldType::Number: return v.is_number();
  }
  return false;
}

const char* type_name(FieldType t) {
  switch (t) {
    case FieldType::Object: return "object";
    case FieldType::Array: return "array";
    case FieldType::String: return "string";
    case FieldType::Bool: return "bool";
    case FieldType::Integer: return "integer";
    case FieldType::Number: return "number";
  }
  return "?";
}

void check_object(const json& j, const std::vector<Field>& fields,
                  const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const Field* match = nullptr;
    for (const auto& f : fields)
      if (key == f.name) {
        match = &f;
        break;
      }
    if (!match) throw ConfigError("unknown key '" + key + "' in " + ctx);
    if (!type_matches(value, match->type))
      throw ConfigError(ctx + "." + key + " must be a " +
                        type_name(match->type));
  }
  for (const auto& f : fields)
    if (f.required && !j.contains(f.name))
      throw ConfigError(ctx + " is missing required key '" +
                        std::string(f.name) + "'");
}

void check_bias_spec_object(const json& j, const std::string& ctx) {
  check_object(j,
               {{"variant", FieldType::String, true},
                {"params", FieldType::Object, false}},
               ctx);
  const std::string variant = j.at("variant").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pctx = ctx + ".params";
  if (variant == "NoPE") {
    check_object(params, {}, pctx);
  } else if (variant == "T5Simplified") {
    check_object(params, {{"values", FieldType::Array, true}}, pctx);
  } else if (variant == "T5Bucketed") {
    check_object(params,
                 {{"boundaries", FieldType::Array, true},
                  {"values", FieldType::Array, true}},
                 pctx);
  } else if (variant == "T5LogBin") {
    check_object(params,
                 {{"num_buckets", FieldType::Integer, true},
                  {"max_distance", FieldType::Integer, true},
                  {"values", FieldType::Array, true}},
                 pctx);
  } else if (variant == "Alibi") {
    check_object(params, {{"r", FieldType::Number, true}}, pctx);
  } else if (variant == "KerpleLog" || variant == "KerplePower") {
    check_object(params,
                 {{"r1", FieldType::Number, true},
                  {"r2", FieldType::Number, true}},
                 pctx);
  } else if (variant == "Sandwich") {
    check_object(params,
                 {{"r1", FieldType::Number, true},
                  {"d_prime", FieldType::Integer, true}},
                 pctx);
  } else {
    throw ConfigError(ctx + ": unknown bias variant '" + variant + "'");
  }
}

void check_pe_object(const json& j, const std::string& ctx) {
  check_object(j,
               {{"variant", FieldType::String, true},
                {"params", FieldType::Object, false}},
               ctx);
  const std::string variant = j.at("variant").get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string pctx = ctx + ".params";
  if (variant == "NoPE") {
    check_object(params, {}, pctx);
  } else if (variant == "RoPE") {
    check_object(params,
                 {{"head_dim", FieldType::Integer, false},
                  {"base", FieldType::Number, false},
                  {"pi_scale", FieldType::Number, false}},
                 pctx);
  } else if (variant == "FIRE") {
    check_object(params,
                 {{"hidden_layers", FieldType::Integer, false},
                  {"hidden_size", FieldType::Integer, false},
                  {"activation", FieldType::String, false},
                  {"final_activation", FieldType::Bool, false},
                  {"psi", FieldType::String, false},
                  {"use_threshold", FieldType::Bool, false},
                  {"init_c", FieldType::Number, false},
                  {"init_L", FieldType::Number, false},
                  {"eps", FieldType::Number, false}},
                 pctx);
  } else if (variant == "additive") {
    check_object(params, {{"specs", FieldType::Array, true}}, pctx);
    std::size_t idx = 0;
    for (const auto& spec : params.at("specs"))
      check_bias_spec_object(spec,
                             pctx + ".specs[" + std::to_string(idx++) + "]");
  } else {
    // bare BiasSpec shorthand for a single-spec additive PE
    check_bias_spec_object(j, ctx);
  }
}

void check_model_object(const json& j, const std::string& ctx) {
  check_object(j,
               {{"num_layers", FieldType::Integer, true},
                {"num_heads", FieldType::Integer, true},
                {"d_model", FieldType::Integer, true},
                {"d_head", FieldType::Integer, true},
                {"ffn_mult", FieldType::Integer, false},
                {"vocab_size", FieldType::Integer, true},
                {"train_len", FieldType::Integer, false},
                {"share_pe_across_layers", FieldType::Bool, false},
                {"pe", FieldType::Object, true}},
               ctx);
  check_pe_object(j.at("pe"), ctx + ".pe");
}

void check_task_object(const json& j, const std::string& ctx) {
  check_object(j,
               {{"name", FieldType::String, true},
                {"k_min", FieldType::Integer, true},
                {"k_max", FieldType::Integer, true}},
               ctx);
  const std::string name = j.at("name").get<std::string>();
  if (name != "copy" && name != "shifted_recall")
    throw ConfigError(ctx + ".name must be 'copy' or 'shifted_recall'");
}

pelab::CopyTaskConfig task_from_json(const json& j, int vocab) {
  pelab::CopyTaskConfig task;
  task.kind = j.at("name").get<std::string>() == "copy"
                  ? pelab::TaskKind::Copy
                  : pelab::TaskKind::ShiftedRecall;
  task.k_min = j.at("k_min").get<long>();
  task.k_max = j.at("k_max").get<long>();
  task.vocab = vocab;
  task.validate();
  return task;
}

// ---------------------------------------------------------------------------
// Shared option plumbing.

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::optional<std::string> precision_override;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file")
      ->required();
  cmd->add_option("--seed", opts.seed_override, "override config seed");
  cmd->add_option("--out", opts.out_override, "override output directory");
  cmd->add_option("--precision", opts.precision_override,
                  "override precision (f32|f64)")
      ->check(CLI::IsMember({"f32", "f64"}));
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

std::uint64_t resolve_seed(const json& cfg, const CommonOptions& opts) {
  if (opts.seed_override) return *opts.seed_override;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  return 0;
}

fs::path resolve_out(const json& cfg, const CommonOptions& opts) {
  std::string dir = "out";
  if (cfg.contains("out")) dir = cfg.at("out").get<std::string>();
  if (opts.out_override) dir = *opts.out_override;
  fs::path path(dir);
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw pelab::IoError("cannot create output directory: " + dir);
  return path;
}

std::string resolve_precision(const json& cfg, const CommonOptions& opts) {
  std::string precision = "f32";
  if (cfg.contains("precision"))
    precision = cfg.at("precision").get<std::string>();
  if (opts.precision_override) precision = *opts.precision_override;
  if (precision != "f32" && precision != "f64")
    throw ConfigError("precision must be 'f32' or 'f64'");
  return precision;
}

// ---------------------------------------------------------------------------
// bias: per-head lower-triangle CSV export, optional fixed-query row slice.

int cmd_bias(const CommonOptions& opts) {
  const json cfg = load_config(opts.config_path);
  check_object(cfg,
               {{"seed", FieldType::Integer, false},
                {"out", FieldType::String, false},
                {"n", FieldType::Integer, true},
                {"row_slice", FieldType::Integer, false},
                {"heads", FieldType::Integer, false},
                {"pe", FieldType::Object, true}},
               "config");
  check_pe_object(cfg.at("pe"), "config.pe");

  const long n = cfg.at("n").get<long>();
  if (n < 1) throw ConfigError("config.n must be >= 1");
  const std::uint64_t seed = resolve_seed(cfg, opts);
  const fs::path out_dir = resolve_out(cfg, opts);
  const std::size_t heads =
      cfg.contains("heads") ? cfg.at("heads").get<std::size_t>() : 1;

  pelab::BiasMatrix<double> bias;
  const json& pe = cfg.at("pe");
  if (pe.at("variant").get<std::string>() == "FIRE") {
    const pelab::FireInit init =
        pe.contains("params") ? pelab::fire_init_from_json(pe.at("params"))
                              : pelab::FireInit{};
    const auto fire = pelab::make_fire_params<double>(heads, seed, init);
    bias = pelab::fire_bias_matrix(static_cast<std::size_t>(n), fire);
  } else {
    const pelab::BiasSpec spec = pelab::bias_spec_from_json(pe);
    bias = pelab::build_bias_matrix(spec, static_cast<std::size_t>(n));
  }

  {
    pelab::CsvWriter csv(out_dir / "bias.csv");
    csv.line("head,i,j,bias");
    for (std::size_t h = 0; h < bias.heads; ++h)
      for (std::size_t i = 0; i < bias.n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          csv.line(std::to_string(h) + "," + std::to_string(i) + "," +
                   std::to_string(j) + "," +
                   pelab::format_number(bias.at(h, i, j)));
  }
  if (cfg.contains("row_slice")) {
    const long i = cfg.at("row_slice").get<long>();
    if (i < 0 || i >= n) throw ConfigError("config.row_slice out of range");
    pelab::CsvWriter csv(out_dir / "bias_slice.csv");
    csv.line("head,i,j,bias");
    for (std::size_t h = 0; h < bias.heads; ++h)
      for (std::size_t j = 0; j <= static_cast<std::size_t>(i); ++j)
        csv.line(std::to_string(h) + "," + std::to_string(i) + "," +
                 std::to_string(j) + "," +
                 pelab::format_number(
                     bias.at(h, static_cast<std::size_t>(i), j)));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: all five constructions across seeded draws; exit 0 iff every max
// error is within tolerance.

int cmd_verify(const CommonOptions& opts) {
  const json cfg = load_config(opts.config_path);
  check_object(cfg,
               {{"seed", FieldType::Integer, false},
                {"out", FieldType::String, false},
                {"l0", FieldType::Integer, false},
                {"num_seeds", FieldType::Integer, false},
                {"tolerance", FieldType::Number, false},
                {"inject_corruption", FieldType::Bool, false}},
               "config");
  const long l0 = cfg.contains("l0") ? cfg.at("l0").get<long>() : 128;
  const long num_seeds =
      cfg.contains("num_seeds") ? cfg.at("num_seeds").get<long>() : 5;
  const double tolerance =
      cfg.contains("tolerance") ? cfg.at("tolerance").get<double>() : 1e-10;
  const bool corrupt = cfg.contains("inject_corruption") &&
                       cfg.at("inject_corruption").get<bool>();
  if (l0 < 1 || num_seeds < 1)
    throw ConfigError("config.l0 and config.num_seeds must be >= 1");
  const std::uint64_t seed = resolve_seed(cfg, opts);
  const fs::path out_dir = resolve_out(cfg, opts);

  json report = json::array();
  bool all_pass = true;
  for (const auto c : pelab::kAllConstructionCases) {
    for (long s = 0; s < num_seeds; ++s) {
      const std::uint64_t draw_seed = seed + static_cast<std::uint64_t>(s);
      const pelab::BiasSpec target =
          pelab::draw_target_spec(c, draw_seed, l0);
      pelab::ConstructionResult result =
          pelab::construct_for_spec(target, l0);
      if (corrupt)
        result.fire.mlp.layers[0].weight(0, 0) += 1e-3;  // test hook
      const double err = pelab::verify_representation(result, target, l0);
      const bool pass = err <= tolerance;
      all_pass = all_pass && pass;
      report.push_back(json{{"case", pelab::construction_name(c)},
                            {"L0", l0},
                            {"params_seed", draw_seed},
                            {"max_abs_error", err},
                            {"pass", pass}});
    }
  }
  std::ofstream out(out_dir / "verify_report.json");
  if (!out) throw pelab::IoError("cannot write verify report");
  out << report.dump(2) << '\n';
  return all_pass ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// train: toy training run; emits the loss curve plus init/final checkpoints.

template <typename T>
int run_train(const json& cfg, std::uint64_t seed, const fs::path& out_dir) {
  const pelab::ModelConfig model =
      pelab::model_config_from_json(cfg.at("model"));
  const pelab::CopyTaskConfig task =
      task_from_json(cfg.at("task"), static_cast<int>(model.vocab_size));

  pelab::TrainOptions opt;
  const json& jt = cfg.at("train");
  opt.steps = jt.at("steps").get<long>();
  if (jt.contains("lr")) opt.lr = jt.at("lr").get<double>();
  if (jt.contains("batch_size"))
    opt.batch_size = jt.at("batch_size").get<std::size_t>();
  if (jt.contains("beta1")) opt.beta1 = jt.at("beta1").get<double>();
  if (jt.contains("beta2")) opt.beta2 = jt.at("beta2").get<double>();
  if (jt.contains("adam_eps")) opt.adam_eps = jt.at("adam_eps").get<double>();

  auto init_params = pelab::init_model_params<T>(model, seed);
  pelab::save_checkpoint(init_params, out_dir / "checkpoint_init.bin");

  try {
    auto result = pelab::train<T>(model, task, opt, seed);
    pelab::save_checkpoint(result.params, out_dir / "checkpoint.bin");
    pelab::CsvWriter csv(out_dir / "loss_curve.csv");
    csv.line("step,loss,accuracy");
    for (std::size_t s = 0; s < result.curve.size(); ++s)
      csv.line(std::to_string(s) + "," +
               pelab::format_number(result.curve[s].loss) + "," +
               pelab::format_number(result.curve[s].accuracy));
  } catch (const pelab::TrainingDiverged& e) {
    std::cerr << "training diverged at step " << e.step << ": " << e.what()
              << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_train(const CommonOptions& opts) {
  const json cfg = load_config(opts.config_path);
  check_object(cfg,
               {{"seed", FieldType::Integer, false},
                {"out", FieldType::String, false},
                {"precision", FieldType::String, false},
                {"model", FieldType::Object, true},
                {"task", FieldType::Object, true},
                {"train", FieldType::Object, true}},
               "config");
  check_model_object(cfg.at("model"), "config.model");
  check_task_object(cfg.at("task"), "config.task");
  check_object(cfg.at("train"),
               {{"steps", FieldType::Integer, true},
                {"lr", FieldType::Number, false},
                {"batch_size", FieldType::Integer, false},
                {"beta1", FieldType::Number, false},
                {"beta2", FieldType::Number, false},
                {"adam_eps", FieldType::Number, false}},
               "config.train");

  const std::uint64_t seed = resolve_seed(cfg, opts);
  const fs::path out_dir = resolve_out(cfg, opts);
  const std::string precision = resolve_precision(cfg, opts);
  return precision == "f64" ? run_train<double>(cfg, seed, out_dir)
                            : run_train<float>(cfg, seed, out_dir);
}

// ---------------------------------------------------------------------------
// eval: per-length masked loss/accuracy for one or more checkpoints.

template <typename T>
pelab::EvalReport run_eval(const fs::path& checkpoint, const json& cfg,
                           const std::vector<long>& lengths,
                           std::size_t samples, std::uint64_t seed,
                           const std::string& variant) {
  auto params = pelab::load_checkpoint<T>(checkpoint);
  const pelab::CopyTaskConfig task = task_from_json(
      cfg.at("task"), static_cast<int>(params.config.vocab_size));
  return pelab::eval_lengths(params, task, lengths, samples, seed, variant);
}

int cmd_eval(const CommonOptions& opts) {
  const json cfg = load_config(opts.config_path);
  check_object(cfg,
               {{"seed", FieldType::Integer, false},
                {"out", FieldType::String, false},
                {"task", FieldType::Object, true},
                {"lengths", FieldType::Array, true},
                {"samples_per_length", FieldType::Integer, false},
                {"runs", FieldType::Array, true}},
               "config");
  check_task_object(cfg.at("task"), "config.task");
  std::size_t idx = 0;
  for (const auto& run : cfg.at("runs"))
    check_object(run,
                 {{"variant", FieldType::String, true},
                  {"checkpoint", FieldType::String, true}},
                 "config.runs[" + std::to_string(idx++) + "]");

  std::vector<long> lengths;
  for (const auto& v : cfg.at("lengths")) {
    if (!v.is_number_integer())
      throw ConfigError("config.lengths entries must be integers");
    lengths.push_back(v.get<long>());
  }
  const std::size_t samples =
      cfg.contains("samples_per_length")
          ? cfg.at("samples_per_length").get<std::size_t>()
          : 64;
  const std::uint64_t seed = resolve_seed(cfg, opts);
  const fs::path out_dir = resolve_out(cfg, opts);

  pelab::CsvWriter csv(out_dir / "eval_report.csv");
  csv.line("variant,length,loss,accuracy,seed");
  for (const auto& run : cfg.at("runs")) {
    const std::string variant = run.at("variant").get<std::string>();
    const fs::path ckpt(run.at("checkpoint").get<std::string>());
    const std::string dtype = pelab::checkpoint_dtype(ckpt);
    const pelab::EvalReport report =
        dtype == "f64"
            ? run_eval<double>(ckpt, cfg, lengths, samples, seed, variant)
            : run_eval<float>(ckpt, cfg, lengths, samples, seed, variant);
    for (const auto& row : report.rows)
      csv.line(variant + "," + std::to_string(row.length) + "," +
               pelab::format_number(row.loss) + "," +
               pelab::format_number(row.accuracy) + "," +
               std::to_string(seed));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench: bias-construction and attention-forward timing.

void write_bench_rows(pelab::CsvWriter& csv,
                      const std::vector<pelab::BenchResult>& results) {
  for (const auto& r : results)
    csv.line(r.variant + "," + std::to_string(r.seq_len) + "," +
             std::to_string(r.layers) + "," + (r.shared ? "1" : "0") + "," +
             pelab::format_number(r.median_ns) + "," +
             pelab::format_number(r.mean_ns) + "," +
             pelab::format_number(r.checksum));
}

int cmd_bench(const CommonOptions& opts) {
  const json cfg = load_config(opts.config_path);
  check_object(cfg,
               {{"seed", FieldType::Integer, false},
                {"out", FieldType::String, false},
                {"mode", FieldType::String, true},
                {"reps", FieldType::Integer, false},
                {"seq_len", FieldType::Integer, true},
                {"layers", FieldType::Array, false},
                {"shared", FieldType::Array, false},
                {"heads", FieldType::Integer, false},
                {"pe", FieldType::Object, false},
                {"model", FieldType::Object, false},
                {"variants", FieldType::Array, false}},
               "config");
  const std::string mode = cfg.at("mode").get<std::string>();
  const std::size_t reps =
      cfg.contains("reps") ? cfg.at("reps").get<std::size_t>() : 15;
  const std::size_t seq_len = cfg.at("seq_len").get<std::size_t>();
  const std::uint64_t seed = resolve_seed(cfg, opts);
  const fs::path out_dir = resolve_out(cfg, opts);

  std::vector<pelab::BenchResult> results;
  if (mode == "bias") {
    if (!cfg.contains("pe") || !cfg.contains("layers") ||
        !cfg.contains("shared"))
      throw ConfigError("bias mode needs 'pe', 'layers', and 'shared'");
    check_pe_object(cfg.at("pe"), "config.pe");
    const std::size_t heads =
        cfg.contains("heads") ? cfg.at("heads").get<std::size_t>() : 12;
    std::vector<std::size_t> layer_counts;
    for (const auto& v : cfg.at("layers"))
      layer_counts.push_back(v.get<std::size_t>());
    std::vector<bool> shared_flags;
    for (const auto& v : cfg.at("shared")) shared_flags.push_back(v.get<bool>());

    const json& pe = cfg.at("pe");
    if (pe.at("variant").get<std::string>() == "FIRE") {
      const pelab::FireInit init =
          pe.contains("params") ? pelab::fire_init_from_json(pe.at("params"))
                                : pelab::FireInit{};
      const auto fire = pelab::make_fire_params<double>(heads, seed, init);
      for (std::size_t layers : layer_counts)
        for (bool shared : shared_flags)
          results.push_back(pelab::time_bias_construction(fire, seq_len,
                                                          layers, shared,
                                                          reps));
    } else {
      const pelab::BiasSpec spec = pelab::bias_spec_from_json(pe);
      for (std::size_t layers : layer_counts)
        for (bool shared : shared_flags)
          results.push_back(pelab::time_bias_construction(spec, seq_len,
                                                          layers, shared,
                                                          reps));
    }
  } else if (mode == "attention") {
    if (!cfg.contains("model") || !cfg.contains("variants"))
      throw ConfigError("attention mode needs 'model' and 'variants'");
    check_model_object(cfg.at("model"), "config.model");
    std::size_t idx = 0;
    for (const auto& v : cfg.at("variants")) {
      check_object(v,
                   {{"name", FieldType::String, true},
                    {"pe", FieldType::Object, true},
                    {"share_pe_across_layers", FieldType::Bool, false}},
                   "config.variants[" + std::to_string(idx) + "]");
      check_pe_object(v.at("pe"),
                      "config.variants[" + std::to_string(idx) + "].pe");
      ++idx;
    }
    pelab::ModelConfig base = pelab::model_config_from_json(cfg.at("model"));
    for (const auto& v : cfg.at("variants")) {
      pelab::ModelConfig variant_cfg = base;
      variant_cfg.pe = pelab::pe_config_from_json(v.at("pe"));
      if (v.contains("share_pe_across_layers"))
        variant_cfg.share_pe_across_layers =
            v.at("share_pe_across_layers").get<bool>();
      results.push_back(pelab::time_attention_forward<float>(
          variant_cfg, seq_len, reps, seed, v.at("name").get<std::string>()));
    }
  } else {
    throw ConfigError("config.mode must be 'bias' or 'attention'");
  }

  pelab::CsvWriter csv(out_dir / "bench.csv");
  csv.line("variant,seq_len,layers,shared,rep_median_ns,rep_mean_ns,checksum");
  write_bench_rows(csv, results);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"positional-encoding kernel lab"};
  app.require_subcommand(1);

  CommonOptions bias_opts, verify_opts, train_opts, eval_opts, bench_opts;
  CLI::App* bias = app.add_subcommand("bias", "export bias matrices as CSV");
  add_common(bias, bias_opts);
  CLI::App* verify =
      app.add_subcommand("verify", "verify the representation constructions");
  add_common(verify, verify_opts);
  CLI::App* train = app.add_subcommand("train", "train the micro LM");
  add_common(train, train_opts);
  CLI::App* eval =
      app.add_subcommand("eval", "length-sweep evaluation of checkpoints");
  add_common(eval, eval_opts);
  CLI::App* bench = app.add_subcommand("bench", "timing benchmarks");
  add_common(bench, bench_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (bias->parsed()) return cmd_bias(bias_opts);
    if (verify->parsed()) return cmd_verify(verify_opts);
    if (train->parsed()) return cmd_train(train_opts);
    if (eval->parsed()) return cmd_eval(eval_opts);
    if (bench->parsed()) return cmd_bench(bench_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const pelab::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitConfigError;
}
