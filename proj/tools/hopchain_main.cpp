#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hopchain/corpus.hpp"
#include "hopchain/errors.hpp"
#include "hopchain/evalsuite.hpp"
#include "hopchain/lexindex.hpp"
#include "hopchain/metrics.hpp"
#include "hopchain/model.hpp"
#include "hopchain/result.hpp"
#include "hopchain/retriever.hpp"
#include "hopchain/synth.hpp"
#include "hopchain/trainer.hpp"

// Pipeline front end: synth, ingest, index, train, retrieve, eval, probe,
// ablate. Exit codes: 0 success, 1 usage/config, 2 data, 3 runtime. Every
// subcommand that writes does so only under --out and drops a manifest there.

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hopchain;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config) {
  json j{{"command", command}, {"config", config}, {"version", kVersion}};
  std::ofstream f(out_dir / "manifest.json");
  if (!f) throw io_error("cannot write manifest under " + out_dir.string());
  f << j.dump(2) << '\n';
}

fs::path ensure_out(const std::string& out) {
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw io_error("cannot create output directory " + out + ": " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot write: " + path.string());
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const integrity_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const not_found_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

// Options that exist on several subcommands. Values are applied on top of the
// preset, so only flags the user actually passed override it.
struct CommonFlags {
  std::string preset = "desk";
  std::string precision = "f64";
  std::string fusion = "full";
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 17;
  double dev_frac = 1.0 / 6.0;
  double test_frac = 1.0 / 6.0;
  double lr = 0.0;
  double weight_decay = 0.0;
  double lr_drop_factor = 0.0;
  int lr_drop_epoch = -1;
  int batch_size = 0, epochs = 0, neg_len = 0, negs = 0;
  int top_question = 0, top_per_gold = 0;
  int beam_size = 0, pool_size = 0, max_steps = 0;
  int d_model = 0, blocks = 0, heads = 0, ffn = 0, max_len = 0;
  bool no_sentence_loss = false;
};

void add_retrieve_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--beam-size", f.beam_size, "Beam width (default 8)");
  cmd->add_option("--pool-size", f.pool_size, "Lexical candidate pool (desk 30, full 500)");
  cmd->add_option("--max-steps", f.max_steps, "Hops per beam including the end hop (default 3)");
  cmd->add_option("--fusion", f.fusion, "full|no_structured|no_weighting")
      ->check(CLI::IsMember({"full", "no_structured", "no_weighting"}));
}

void add_model_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--d-model", f.d_model, "Model width (default 64)");
  cmd->add_option("--blocks", f.blocks, "Encoder blocks (default 2)");
  cmd->add_option("--heads", f.heads, "Attention heads (default 4)");
  cmd->add_option("--ffn", f.ffn, "Feed-forward width (default 128)");
  cmd->add_option("--max-len", f.max_len, "Sequence length cap (desk 128, full 384)");
  cmd->add_option("--precision", f.precision, "f32|f64 (default f64)")
      ->check(CLI::IsMember({"f32", "f64"}));
}

void add_train_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--preset", f.preset, "desk|full hyperparameter preset")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--seed", f.seed, "Initialization/training seed");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--weight-decay", f.weight_decay, "Decoupled weight decay");
  cmd->add_option("--lr-drop-epoch", f.lr_drop_epoch, "Epoch of the one-step lr decay (0 = off)");
  cmd->add_option("--lr-drop-factor", f.lr_drop_factor, "Multiplier at the lr drop");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--neg-len", f.neg_len, "Documents per negative traversal (default 3)");
  cmd->add_option("--negs", f.negs, "Negative traversals per question (default 4)");
  cmd->add_option("--top-question", f.top_question, "Traversal starts from question top-n");
  cmd->add_option("--top-per-gold", f.top_per_gold, "Traversal starts from each gold doc top-n");
  cmd->add_flag("--no-sentence-loss", f.no_sentence_loss, "Drop the sentence objective");
  cmd->add_option("--dev-frac", f.dev_frac, "Dev fraction per group (default 1/6)");
  cmd->add_option("--test-frac", f.test_frac, "Held-out fraction per group (default 1/6)");
  cmd->add_option("--split-seed", f.split_seed, "Split shuffling seed (default 17)");
  add_retrieve_flags(cmd, f);
  add_model_flags(cmd, f);
}

TrainConfig make_train_config(const CLI::App* cmd, const CommonFlags& f) {
  TrainConfig cfg = f.preset == "full" ? TrainConfig::full() : TrainConfig::desk();
  cfg.seed = f.seed;
  if (cmd->count("--lr")) cfg.lr = f.lr;
  if (cmd->count("--weight-decay")) cfg.weight_decay = f.weight_decay;
  if (cmd->count("--lr-drop-epoch")) cfg.lr_drop_epoch = f.lr_drop_epoch;
  if (cmd->count("--lr-drop-factor")) cfg.lr_drop_factor = f.lr_drop_factor;
  if (cmd->count("--batch-size")) cfg.batch_size = f.batch_size;
  if (cmd->count("--epochs")) cfg.epochs = f.epochs;
  if (cmd->count("--neg-len")) cfg.neg_len = f.neg_len;
  if (cmd->count("--negs")) cfg.negs_per_question = f.negs;
  if (cmd->count("--top-question")) cfg.top_question = f.top_question;
  if (cmd->count("--top-per-gold")) cfg.top_per_gold = f.top_per_gold;
  if (cmd->count("--beam-size")) cfg.retrieve.beam_size = f.beam_size;
  if (cmd->count("--pool-size")) cfg.retrieve.pool_size = f.pool_size;
  if (cmd->count("--max-steps")) cfg.retrieve.max_steps = f.max_steps;
  cfg.fusion = fusion_mode_from_string(f.fusion);
  cfg.sentence_loss = !f.no_sentence_loss;
  return cfg;
}

ModelConfig make_model_config(const CLI::App* cmd, const CommonFlags& f) {
  ModelConfig mc;
  if (f.preset == "full") mc.max_len = 384;
  if (cmd->count("--d-model")) mc.d_model = f.d_model;
  if (cmd->count("--blocks")) mc.n_blocks = f.blocks;
  if (cmd->count("--heads")) mc.n_heads = f.heads;
  if (cmd->count("--ffn")) mc.d_ffn = f.ffn;
  if (cmd->count("--max-len")) mc.max_len = f.max_len;
  return mc;
}

RetrieveOptions make_retrieve_options(const CLI::App* cmd, const CommonFlags& f) {
  RetrieveOptions opts;
  if (f.preset == "full") opts.pool_size = 500;
  if (cmd->count("--beam-size")) opts.beam_size = f.beam_size;
  if (cmd->count("--pool-size")) opts.pool_size = f.pool_size;
  if (cmd->count("--max-steps")) opts.max_steps = f.max_steps;
  opts.fusion = fusion_mode_from_string(f.fusion);
  return opts;
}

json train_config_json(const TrainConfig& cfg, const ModelConfig& mc, const CommonFlags& f) {
  return json{{"lr", cfg.lr},
              {"weight_decay", cfg.weight_decay},
              {"lr_drop_epoch", cfg.lr_drop_epoch},
              {"lr_drop_factor", cfg.lr_drop_factor},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"neg_len", cfg.neg_len},
              {"negs_per_question", cfg.negs_per_question},
              {"top_question", cfg.top_question},
              {"top_per_gold", cfg.top_per_gold},
              {"seed", cfg.seed},
              {"sentence_loss", cfg.sentence_loss},
              {"fusion", to_string(cfg.fusion)},
              {"beam_size", cfg.retrieve.beam_size},
              {"pool_size", cfg.retrieve.pool_size},
              {"max_steps", cfg.retrieve.max_steps},
              {"d_model", mc.d_model},
              {"blocks", mc.n_blocks},
              {"heads", mc.n_heads},
              {"ffn", mc.d_ffn},
              {"max_len", mc.max_len},
              {"precision", f.precision},
              {"dev_frac", f.dev_frac},
              {"test_frac", f.test_frac},
              {"split_seed", f.split_seed},
              {"preset", f.preset}};
}

template <class Scalar>
void do_train(const CLI::App* cmd, const CommonFlags& flags, const std::string& corpus_path,
              const std::string& qa_path, const std::string& index_path,
              const std::string& out) {
  const fs::path out_dir = ensure_out(out);
  auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
  TfIdfIndex index = TfIdfIndex::load(index_path);
  TrainConfig cfg = make_train_config(cmd, flags);
  ModelConfig mc = make_model_config(cmd, flags);

  ExampleSplit split = split_examples(examples, flags.dev_frac, flags.test_frac, flags.split_seed);
  serialize_examples(split.train, (out_dir / "split.train.jsonl").string());
  serialize_examples(split.dev, (out_dir / "split.dev.jsonl").string());
  serialize_examples(split.test, (out_dir / "split.test.jsonl").string());

  Vocab vocab = Vocab::build(ks, examples);
  ModelParams<Scalar> params = init_params<Scalar>(mc, std::move(vocab), cfg.seed);
  std::cerr << "training on " << split.train.size() << " questions (dev " << split.dev.size()
            << ", held-out " << split.test.size() << "), " << params.store.coefficient_count()
            << " parameters\n";
  TrainOutput<Scalar> result = train(cfg, std::move(params), split.train, split.dev, ks, index);

  std::string log;
  for (const std::string& line : result.log_lines) log += line + '\n';
  write_text(out_dir / "train_log.jsonl", log);
  save_checkpoint(result.params, (out_dir / "checkpoint.bin").string());
  write_manifest(out_dir, "train", train_config_json(cfg, mc, flags));
  std::cout << "best epoch " << result.best_epoch << " (dev all-docs top-1 "
            << result.best_dev << "), checkpoint: " << (out_dir / "checkpoint.bin").string()
            << '\n';
}

template <class Scalar>
void do_retrieve(const CLI::App* cmd, const CommonFlags& flags, const std::string& corpus_path,
                 const std::string& qa_path, const std::string& index_path,
                 const std::string& checkpoint_path, const std::string& out, bool quiet) {
  const fs::path out_dir = ensure_out(out);
  auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
  TfIdfIndex index = TfIdfIndex::load(index_path);
  ModelParams<Scalar> params = load_checkpoint<Scalar>(checkpoint_path);
  RetrieveOptions opts = make_retrieve_options(cmd, flags);

  std::vector<RetrievalResult> results;
  results.reserve(examples.size());
  for (const QAExample& ex : examples) {
    results.push_back(beam_search(params, ks, index, ex.id, ex.question, opts));
    if (quiet) continue;
    const RetrievalResult& r = results.back();
    std::cout << r.question_id << '\n';
    for (std::size_t b = 0; b < r.beams.size(); ++b) {
      const BeamTrace& beam = r.beams[b];
      std::cout << "  beam " << (b + 1) << "  log_score " << std::setprecision(6)
                << beam.log_score << '\n';
      for (const StepTrace& s : beam.steps)
        std::cout << "    " << to_string(s.kind) << (s.doc.empty() ? "" : " -> " + s.doc)
                  << "  p=" << s.prob << "  w_m=" << s.w_m << "  w_u=" << s.w_u << '\n';
    }
  }
  write_results(results, (out_dir / "results.jsonl").string());
  write_manifest(out_dir, "retrieve",
                 json{{"beam_size", opts.beam_size},
                      {"pool_size", opts.pool_size},
                      {"max_steps", opts.max_steps},
                      {"fusion", to_string(opts.fusion)},
                      {"checkpoint", checkpoint_path},
                      {"precision", sizeof(Scalar) == 4 ? "f32" : "f64"}});
  std::cout << "wrote " << results.size() << " results to "
            << (out_dir / "results.jsonl").string() << '\n';
}

template <class Scalar>
void do_probe(const std::string& corpus_path, const std::string& qa_path,
              const std::string& checkpoint_path, const std::string& out) {
  const fs::path out_dir = ensure_out(out);
  auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
  ModelParams<Scalar> params = load_checkpoint<Scalar>(checkpoint_path);
  ProbeReport report = probe_distracted(params, ks, examples);
  write_text(out_dir / "probe.json", probe_report_json(report));
  write_manifest(out_dir, "probe", json{{"checkpoint", checkpoint_path}});
  std::cout << "probe accuracy " << report.accuracy << "% over " << report.evaluated
            << " questions (avg distractors " << report.avg_distractors << ", excluded "
            << report.excluded << ")\n";
}

template <class Scalar>
void do_ablate(const CLI::App* cmd, const CommonFlags& flags, const std::string& mode_name,
               const std::string& corpus_path, const std::string& qa_path,
               const std::string& index_path, const std::string& out) {
  const fs::path out_dir = ensure_out(out);
  auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
  TfIdfIndex index = TfIdfIndex::load(index_path);
  TrainConfig cfg = make_train_config(cmd, flags);
  ModelConfig mc = make_model_config(cmd, flags);
  const AblationMode mode = ablation_mode_from_string(mode_name);

  ExampleSplit split = split_examples(examples, flags.dev_frac, flags.test_frac, flags.split_seed);
  AblationOutcome<Scalar> outcome =
      run_ablation<Scalar>(mode, cfg, mc, cfg.seed, split.train, split.dev, split.test, ks, index);

  write_results(outcome.results, (out_dir / (mode_name + ".results.jsonl")).string());
  write_text(out_dir / (mode_name + ".metrics.json"), metrics_json(outcome.report));
  json config = train_config_json(cfg, mc, flags);
  config["mode"] = mode_name;
  write_manifest(out_dir, "ablate", config);
  std::cout << "ablation " << mode_name << " on " << split.test.size() << " held-out questions\n"
            << metrics_table(outcome.report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hopchain: hop-based multi-hop evidence retrieval"};
  app.require_subcommand(1);

  std::string corpus_path, qa_path, index_path, checkpoint_path, results_path, out;
  CommonFlags flags;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus and questions");
  SynthConfig synth_cfg;
  std::uint64_t synth_seed = 7;
  synth->add_option("--entities", synth_cfg.entities, "Entity count (default 150)");
  synth->add_option("--per-family", synth_cfg.per_family, "Questions per family (default 60)");
  synth->add_option("--group-size", synth_cfg.group_size, "Same-relation mention group size");
  synth->add_option("--fanout", synth_cfg.fanout, "Distinct-relation mentions per foothold");
  synth->add_option("--min-incoming", synth_cfg.min_incoming,
                    "Minimum incoming mention contexts per bridging gold target");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out, "Output directory")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus, optionally re-serialize it");
  ingest->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  ingest->add_option("--qa", qa_path, "QA JSONL")->required();
  ingest->add_option("--out", out, "Directory for normalized copies");

  // index
  auto* index_cmd = app.add_subcommand("index", "Build the lexical index");
  index_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  index_cmd->add_option("--out", out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the hop selector");
  train_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  train_cmd->add_option("--qa", qa_path, "QA JSONL")->required();
  train_cmd->add_option("--index", index_path, "Lexical index file")->required();
  train_cmd->add_option("--out", out, "Output directory")->required();
  add_train_flags(train_cmd, flags);

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Run beam search over questions");
  bool quiet = false;
  retrieve->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  retrieve->add_option("--qa", qa_path, "QA JSONL")->required();
  retrieve->add_option("--index", index_path, "Lexical index file")->required();
  retrieve->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
  retrieve->add_option("--out", out, "Output directory")->required();
  retrieve->add_flag("--quiet", quiet, "Suppress per-question traces on stdout");
  add_retrieve_flags(retrieve, flags);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score retrieval results");
  eval_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  eval_cmd->add_option("--qa", qa_path, "QA JSONL")->required();
  eval_cmd->add_option("--results", results_path, "results.jsonl from retrieve")->required();
  eval_cmd->add_option("--out", out, "Output directory")->required();

  // probe
  auto* probe = app.add_subcommand("probe", "Distracted mention-selection probe");
  probe->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  probe->add_option("--qa", qa_path, "QA JSONL")->required();
  probe->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
  probe->add_option("--out", out, "Output directory")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate one ablation mode");
  std::string mode_name = "full";
  ablate->add_option("--mode", mode_name, "full|no_structured|no_weighting|no_sentence")
      ->required()
      ->check(CLI::IsMember({"full", "no_structured", "no_weighting", "no_sentence"}));
  ablate->add_option("--corpus", corpus_path, "Corpus JSONL")->required();
  ablate->add_option("--qa", qa_path, "QA JSONL")->required();
  ablate->add_option("--index", index_path, "Lexical index file")->required();
  ablate->add_option("--out", out, "Output directory")->required();
  add_train_flags(ablate, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (synth->parsed())
    return run_guarded([&] {
      const fs::path out_dir = ensure_out(out);
      auto [ks, examples] = generate_synthetic(synth_cfg, synth_seed);
      serialize_corpus(ks, examples, (out_dir / "corpus.jsonl").string(),
                       (out_dir / "qa.jsonl").string());
      write_manifest(out_dir, "synth",
                     json{{"entities", synth_cfg.entities},
                          {"per_family", synth_cfg.per_family},
                          {"group_size", synth_cfg.group_size},
                          {"fanout", synth_cfg.fanout},
                          {"min_incoming", synth_cfg.min_incoming},
                          {"seed", synth_seed}});
      std::cout << "wrote " << ks.size() << " documents, " << examples.size() << " questions to "
                << out_dir.string() << '\n';
    });

  if (ingest->parsed())
    return run_guarded([&] {
      auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
      std::cout << "ok: " << ks.size() << " documents, " << examples.size() << " questions\n";
      if (!out.empty()) {
        const fs::path out_dir = ensure_out(out);
        serialize_corpus(ks, examples, (out_dir / "corpus.jsonl").string(),
                         (out_dir / "qa.jsonl").string());
        write_manifest(out_dir, "ingest", json{{"corpus", corpus_path}, {"qa", qa_path}});
      }
    });

  if (index_cmd->parsed())
    return run_guarded([&] {
      const fs::path out_dir = ensure_out(out);
      KnowledgeSource ks = ingest_knowledge(corpus_path);
      TfIdfIndex index = build_index(ks);
      index.save((out_dir / "index.bin").string());
      write_manifest(out_dir, "index", json{{"corpus", corpus_path}});
      std::cout << "indexed " << index.doc_count() << " documents, " << index.vocab_size()
                << " terms\n";
    });

  if (train_cmd->parsed())
    return run_guarded([&] {
      if (flags.precision == "f32")
        do_train<float>(train_cmd, flags, corpus_path, qa_path, index_path, out);
      else
        do_train<double>(train_cmd, flags, corpus_path, qa_path, index_path, out);
    });

  if (retrieve->parsed())
    return run_guarded([&] {
      if (checkpoint_precision(checkpoint_path) == 4)
        do_retrieve<float>(retrieve, flags, corpus_path, qa_path, index_path, checkpoint_path,
                           out, quiet);
      else
        do_retrieve<double>(retrieve, flags, corpus_path, qa_path, index_path, checkpoint_path,
                            out, quiet);
    });

  if (eval_cmd->parsed())
    return run_guarded([&] {
      const fs::path out_dir = ensure_out(out);
      auto [ks, examples] = ingest_corpus(corpus_path, qa_path);
      std::vector<RetrievalResult> results = read_results(results_path);
      MetricsReport report = compute_metrics(ks, results, examples);
      WeightReport weights = weight_report(results, examples);
      write_text(out_dir / "metrics.json", metrics_json(report));
      write_text(out_dir / "metrics.txt", metrics_table(report));
      write_text(out_dir / "weights.json", weight_report_json(weights));
      write_manifest(out_dir, "eval", json{{"results", results_path}, {"qa", qa_path}});
      std::cout << metrics_table(report);
      for (const auto& [qtype, row] : weights.by_qtype)
        std::cout << "mean fusion weights (" << qtype << "): w_m=" << row.mean_w_m
                  << " w_u=" << row.mean_w_u << " over " << row.count << " questions\n";
    });

  if (probe->parsed())
    return run_guarded([&] {
      if (checkpoint_precision(checkpoint_path) == 4)
        do_probe<float>(corpus_path, qa_path, checkpoint_path, out);
      else
        do_probe<double>(corpus_path, qa_path, checkpoint_path, out);
    });

  if (ablate->parsed())
    return run_guarded([&] {
      if (flags.precision == "f32")
        do_ablate<float>(ablate, flags, mode_name, corpus_path, qa_path, index_path, out);
      else
        do_ablate<double>(ablate, flags, mode_name, corpus_path, qa_path, index_path, out);
    });

  return 0;
}
