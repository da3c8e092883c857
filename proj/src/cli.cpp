#include "olnmt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "olnmt/bpe.hpp"
#include "olnmt/checkpoint.hpp"
#include "olnmt/corpus.hpp"
#include "olnmt/metrics.hpp"
#include "olnmt/simulate.hpp"

namespace olnmt {

namespace fs = std::filesystem;

namespace {

// --- shared option bundles ---------------------------------------------

struct ModelFlags {
  int embedding_dim = 64;
  int hidden_dim = 64;
  int attention_dim = 64;
  int deep_output_dim = 64;
  float weight_noise = 0.01f;
  int beam = 6;
  int max_output_length = 50;

  void add(CLI::App* cmd) {
    cmd->add_option("--embedding-dim", embedding_dim, "word embedding size");
    cmd->add_option("--hidden-dim", hidden_dim, "LSTM size");
    cmd->add_option("--attention-dim", attention_dim, "attention layer size");
    cmd->add_option("--deep-output-dim", deep_output_dim, "deep output layer size");
    cmd->add_option("--weight-noise", weight_noise, "Gaussian weight noise sigma (training)");
    cmd->add_option("--beam", beam, "beam size");
    cmd->add_option("--max-output-length", max_output_length, "decoding length limit");
  }

  ModelConfig config(int src_vocab, int tgt_vocab) const {
    ModelConfig c;
    c.src_vocab_size = src_vocab;
    c.tgt_vocab_size = tgt_vocab;
    c.embedding_dim = embedding_dim;
    c.hidden_dim = hidden_dim;
    c.attention_dim = attention_dim;
    c.deep_output_dim = deep_output_dim;
    c.weight_noise_sigma = weight_noise;
    c.beam_size = beam;
    c.max_output_length = max_output_length;
    return c;
  }
};

struct TrainFlags {
  std::string optimizer = "adadelta";
  double lr = 0;  // 0 = algorithm default (Adadelta offline default is 1)
  double clip_norm = 1.0;
  long eval_every = 1000;
  long patience = 10000;
  long max_updates = 100000;
  std::uint64_t seed = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--optimizer", optimizer, "offline optimizer")
        ->check(CLI::IsMember({"sgd", "adagrad", "adadelta", "adam"}));
    cmd->add_option("--lr", lr, "learning rate (0 = algorithm default)");
    cmd->add_option("--clip-norm", clip_norm, "global gradient norm clip");
    cmd->add_option("--eval-every", eval_every, "dev evaluation period in updates");
    cmd->add_option("--patience", patience, "updates without dev improvement before stopping");
    cmd->add_option("--max-updates", max_updates, "hard update cap");
    cmd->add_option("--seed", seed, "training seed (shuffling, weight noise)");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.optimizer = algorithm_from_string(optimizer);
    c.lr = lr > 0 ? lr : (c.optimizer == Algorithm::Adadelta ? 1.0
                                                             : default_hyperparams(c.optimizer).lr);
    c.clip_norm = clip_norm;
    c.eval_every = eval_every;
    c.patience = patience;
    c.max_updates = max_updates;
    c.seed = seed;
    return c;
  }
};

struct OnlineFlags {
  std::string optimizer = "none";
  double lr = 0;
  double C = 0;
  int k_max = 10;
  double clip_norm = 1.0;
  bool ppas_true_projection = false;
  std::uint64_t seed = 1;

  void add(CLI::App* cmd, const std::string& prefix = "", bool with_optimizer = true) {
    auto name = [&](const char* n) { return "--" + prefix + n; };
    if (with_optimizer)
      cmd->add_option(name("optimizer"), optimizer, "online update rule")
          ->check(CLI::IsMember({"none", "sgd", "adagrad", "adadelta", "adam", "pas", "ppas"}));
    cmd->add_option(name("lr"), lr, "learning rate (0 = per-algorithm default)");
    cmd->add_option(name("C"), C, "PA aggressiveness (0 = default)");
    cmd->add_option(name("k-max"), k_max, "PA inner iteration cap");
    cmd->add_option(name("clip-norm"), clip_norm, "global gradient norm clip");
    cmd->add_flag(name("ppas-true-projection"), ppas_true_projection,
                  "rescale the PPAS displacement only when it exceeds C");
    cmd->add_option(name("seed"), seed, "session seed");
  }

  OnlineSpec spec(const std::string& alg, int beam, int max_len) const {
    OnlineSpec s;
    s.algorithm = algorithm_from_string(alg);
    s.lr = lr;
    s.C = C;
    s.k_max = k_max;
    s.clip_norm = clip_norm;
    s.ppas_true_projection = ppas_true_projection;
    s.beam_size = beam;
    s.max_output_length = max_len;
    s.seed = seed;
    return s;
  }
};

// --- small helpers -----------------------------------------------------

std::vector<std::string> read_token_lines(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    auto lines = read_lines(p);
    out.insert(out.end(), lines.begin(), lines.end());
  }
  return out;
}

std::vector<SentencePair> load_indexed(const std::string& src, const std::string& tgt,
                                       const VocabularyMap& sv, const VocabularyMap& tv) {
  ParallelCorpus c = load_parallel(src, tgt);
  index_corpus(c, sv, tv);
  return std::move(c.pairs);
}

fs::path prepare_out_dir(const std::string& dir, CLI::App* cmd) {
  if (dir.empty()) throw ConfigError("missing --out-dir (or OLNMT_OUT_DIR)");
  fs::path p(dir);
  fs::create_directories(p);
  std::ofstream f(p / "run-config.txt");
  f << "tool_version=" << kToolVersion << "\n";
  f << "command=" << cmd->get_name() << "\n";
  f << cmd->config_to_str(true, false);
  return p;
}

std::string format_pm(double point, double half) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << point << " \xc2\xb1 " << half;
  return os.str();
}

void write_report_txt(std::ostream& os,
                      const std::vector<std::pair<std::string, EvalReport>>& systems,
                      const std::vector<std::string>& notes) {
  size_t w = 8;
  for (const auto& [name, rep] : systems) w = std::max(w, name.size() + 2);
  os << std::left << std::setw((int)w) << "system" << std::setw(20) << "BLEU" << std::setw(20)
     << "TER" << "sentences\n";
  for (const auto& [name, rep] : systems) {
    os << std::left << std::setw((int)w) << name << std::setw(20)
       << format_pm(rep.bleu, rep.bleu_ci.half_width()) << std::setw(20)
       << format_pm(rep.ter, rep.ter_ci.half_width()) << rep.n_sentences << "\n";
  }
  for (const auto& n : notes) os << "note: " << n << "\n";
}

void write_report_jsonl(const fs::path& path,
                        const std::vector<std::pair<std::string, EvalReport>>& systems,
                        int bootstrap_samples, std::uint64_t seed) {
  std::ofstream f(path, std::ios::binary);
  for (const auto& [name, rep] : systems) {
    for (auto [metric, ci, n] :
         {std::tuple<const char*, const ConfidenceInterval&, int>{"bleu", rep.bleu_ci,
                                                                  rep.n_sentences},
          {"ter", rep.ter_ci, rep.n_sentences}}) {
      nlohmann::json j{{"system", name},          {"metric", metric},
                       {"point", ci.point},       {"lo", ci.lo},
                       {"hi", ci.hi},             {"half_width", ci.half_width()},
                       {"n_sentences", n},        {"bootstrap_samples", bootstrap_samples},
                       {"seed", seed}};
      f << j.dump() << '\n';
    }
  }
}

void print_update_time(std::ostream& os, const std::string& system,
                       const UpdateTimeSummary& s) {
  os << std::fixed << std::setprecision(2);
  os << "update time (" << system << "): mean " << s.mean_ms << " ms, p95 " << s.p95_ms
     << " ms over " << s.n_updates << " updates\n";
}

void print_update_time_reference(std::ostream& os) {
  os << "reference point: ~65 ms mean update time on GPU reported in prior work"
        " (context only, never asserted)\n";
}

std::string join_tokens(const Sentence& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

void write_trajectory_tsv(const fs::path& path, const TrajectoryData& data) {
  std::ofstream f(path, std::ios::binary);
  f << "t";
  for (const auto& s : data.systems) f << '\t' << "delta_bleu_" << s;
  f << '\n';
  if (data.delta_bleu.empty()) return;
  size_t n = data.delta_bleu[0].size();
  f << std::setprecision(17);
  for (size_t t = 0; t < n; ++t) {
    f << (t + 1);
    for (const auto& series : data.delta_bleu) f << '\t' << series[t];
    f << '\n';
  }
}

// --- commands ----------------------------------------------------------

void setup_bpe_learn(CLI::App& app) {
  auto cmd = app.add_subcommand("bpe-learn", "learn joint BPE merges from raw text");
  auto inputs = std::make_shared<std::vector<std::string>>();
  auto merges = std::make_shared<int>(1000);
  auto output = std::make_shared<std::string>();
  cmd->add_option("--input", *inputs, "input text files (both languages)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--merges", *merges, "number of merge operations");
  cmd->add_option("--output", *output, "merge table file")->required();
  cmd->set_config("--config");
  cmd->callback([inputs, merges, output] {
    std::vector<std::string> tokens;
    for (const auto& line : read_token_lines(*inputs))
      for (auto& t : tokenize(line)) tokens.push_back(std::move(t));
    save_merge_table(learn_bpe(tokens, *merges), *output);
  });
}

void setup_bpe_apply(CLI::App& app) {
  auto cmd = app.add_subcommand("bpe-apply", "segment text with a learned merge table");
  auto codes = std::make_shared<std::string>();
  auto input = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  cmd->add_option("--codes", *codes, "merge table file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--input", *input, "input text file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", *output, "segmented output file")->required();
  cmd->set_config("--config");
  cmd->callback([codes, input, output] {
    BpeSegmenter seg(load_merge_table(*codes));
    std::vector<std::string> out;
    for (const auto& line : read_lines(*input))
      out.push_back(join_tokens(seg.segment(tokenize(line))));
    write_lines(*output, out);
  });
}

void setup_vocab(CLI::App& app) {
  auto cmd = app.add_subcommand("vocab", "build a vocabulary from tokenized text");
  auto inputs = std::make_shared<std::vector<std::string>>();
  auto max_size = std::make_shared<int>(50000);
  auto output = std::make_shared<std::string>();
  cmd->add_option("--input", *inputs, "tokenized input files")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--max-size", *max_size, "vocabulary cap including specials");
  cmd->add_option("--output", *output, "vocabulary file (symbol<TAB>index)")->required();
  cmd->set_config("--config");
  cmd->callback([inputs, max_size, output] {
    std::vector<std::string> tokens;
    for (const auto& line : read_token_lines(*inputs))
      for (auto& t : split_ws(line)) tokens.push_back(std::move(t));
    VocabularyMap::build(tokens, *max_size).save(*output);
  });
}

void setup_toy_gen(CLI::App& app) {
  auto cmd = app.add_subcommand("toy-gen", "generate a synthetic parallel task");
  auto cfg = std::make_shared<ToyTaskConfig>();
  auto kind = std::make_shared<std::string>("substitution-grammar");
  auto out_dir = std::make_shared<std::string>();
  cmd->add_option("--kind", *kind, "task kind")
      ->check(CLI::IsMember({"copy", "reverse", "substitution-grammar"}));
  cmd->add_option("--train", cfg->n_train, "out-of-domain training sentences");
  cmd->add_option("--dev", cfg->n_dev, "development sentences (per domain)");
  cmd->add_option("--indomain-train", cfg->n_indomain_train, "in-domain training sentences");
  cmd->add_option("--test", cfg->n_test, "test sentences (in-domain)");
  cmd->add_option("--vocab-size", cfg->vocab_size, "content symbols per side");
  cmd->add_option("--min-len", cfg->min_len, "minimum sentence length");
  cmd->add_option("--max-len", cfg->max_len, "maximum sentence length");
  cmd->add_option("--seed", cfg->seed, "generator seed");
  cmd->add_option("--domain-shift", cfg->domain_shift,
                  "fraction of the substitution table re-drawn for the in-domain side");
  cmd->add_option("--out-dir", *out_dir, "output directory")->envname("OLNMT_OUT_DIR");
  cmd->set_config("--config");
  cmd->callback([cmd, cfg, kind, out_dir] {
    cfg->kind = toy_kind_from_string(*kind);
    fs::path dir = prepare_out_dir(*out_dir, cmd);
    ToyTask task = generate_toy_task(*cfg);
    auto dump = [&](const TextCorpus& c, const std::string& stem) {
      if (c.src_lines.empty()) return;
      write_lines((dir / (stem + ".src")).string(), c.src_lines);
      write_lines((dir / (stem + ".tgt")).string(), c.tgt_lines);
    };
    dump(task.train, "train");
    dump(task.dev, "dev");
    dump(task.indomain_train, "indomain-train");
    dump(task.indomain_dev, "indomain-dev");
    dump(task.test, "test");
  });
}

void setup_train(CLI::App& app) {
  auto cmd = app.add_subcommand("train", "offline training with dev-BLEU early stopping");
  struct Opts {
    std::string train_src, train_tgt, dev_src, dev_tgt, src_vocab, tgt_vocab, out_dir;
    std::uint64_t init_seed = 1;
    int eval_beam = 0;
    ModelFlags model;
    TrainFlags train;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--train-src", o->train_src)->required()->check(CLI::ExistingFile);
  cmd->add_option("--train-tgt", o->train_tgt)->required()->check(CLI::ExistingFile);
  cmd->add_option("--dev-src", o->dev_src)->required()->check(CLI::ExistingFile);
  cmd->add_option("--dev-tgt", o->dev_tgt)->required()->check(CLI::ExistingFile);
  cmd->add_option("--src-vocab", o->src_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--tgt-vocab", o->tgt_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--init-seed", o->init_seed, "parameter initialization seed");
  cmd->add_option("--eval-beam", o->eval_beam, "beam for dev evaluation (0 = --beam)");
  cmd->add_option("--out-dir", o->out_dir, "output directory")->envname("OLNMT_OUT_DIR");
  o->model.add(cmd);
  o->train.add(cmd);
  cmd->set_config("--config");
  cmd->callback([cmd, o] {
    fs::path dir = prepare_out_dir(o->out_dir, cmd);
    auto sv = VocabularyMap::load(o->src_vocab);
    auto tv = VocabularyMap::load(o->tgt_vocab);
    auto train = load_indexed(o->train_src, o->train_tgt, sv, tv);
    auto dev = load_indexed(o->dev_src, o->dev_tgt, sv, tv);

    ModelConfig mc = o->model.config(sv.size(), tv.size());
    NmtModel<Real> model(mc);
    TrainConfig tc = o->train.config();
    tc.eval_beam = o->eval_beam;
    TrainResult res = train_offline(model, model.init_params(o->init_seed), train, dev, tc);

    save_checkpoint((dir / "model.ckpt").string(), mc, res.params);
    std::ofstream log(dir / "train-log.txt");
    log << std::setprecision(6);
    for (auto [u, b] : res.dev_history) log << u << '\t' << b << '\n';
    log << "best_update\t" << res.best_update << "\nbest_dev_bleu\t" << res.best_dev_bleu
        << "\ntotal_updates\t" << res.total_updates << "\ndiverged\t" << res.diverged << '\n';
    std::cout << "trained " << res.total_updates << " updates, best dev BLEU "
              << std::fixed << std::setprecision(2) << res.best_dev_bleu << " at update "
              << res.best_update << (res.diverged ? " (diverged, last finite kept)" : "")
              << "\ncheckpoint: " << (dir / "model.ckpt").string() << std::endl;
  });
}

void setup_translate(CLI::App& app) {
  auto cmd = app.add_subcommand("translate", "batch translation with a frozen checkpoint");
  struct Opts {
    std::string model, src_vocab, tgt_vocab, input, output;
    int beam = 0, max_len = 0;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--model", o->model)->required()->check(CLI::ExistingFile);
  cmd->add_option("--src-vocab", o->src_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--tgt-vocab", o->tgt_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--input", o->input)->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", o->output)->required();
  cmd->add_option("--beam", o->beam, "beam size (0 = checkpoint default)");
  cmd->add_option("--max-output-length", o->max_len, "length limit (0 = checkpoint default)");
  cmd->set_config("--config");
  cmd->callback([o] {
    Checkpoint ck = load_checkpoint(o->model);
    NmtModel<Real> model(ck.config);
    auto sv = VocabularyMap::load(o->src_vocab);
    auto tv = VocabularyMap::load(o->tgt_vocab);
    std::vector<std::string> out;
    for (const auto& line : read_lines(o->input)) {
      auto ids = sv.to_indices(split_ws(line));
      if (ids.empty()) {
        out.push_back("");
        continue;
      }
      Hypothesis h = model.beam_search(ck.params, ids, o->beam, o->max_len);
      out.push_back(join_tokens(tv.to_symbols(h.tokens)));
    }
    write_lines(o->output, out);
  });
}

void setup_adapt(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "adapt", "online post-editing session: translate, store, update, advance");
  struct Opts {
    std::string model, src_vocab, tgt_vocab, src, ref, out_dir, save_adapted;
    int beam = 0, max_len = 0;
    int bootstrap = 1000;
    OnlineFlags online;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--model", o->model)->required()->check(CLI::ExistingFile);
  cmd->add_option("--src-vocab", o->src_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--tgt-vocab", o->tgt_vocab)->required()->check(CLI::ExistingFile);
  cmd->add_option("--src", o->src, "test source file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--ref", o->ref, "post-edited reference file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--beam", o->beam, "beam size (0 = checkpoint default)");
  cmd->add_option("--max-output-length", o->max_len, "length limit (0 = checkpoint default)");
  cmd->add_option("--bootstrap-samples", o->bootstrap, "bootstrap resamples for the report");
  cmd->add_option("--save-adapted-model", o->save_adapted,
                  "write the post-session parameters to this checkpoint");
  cmd->add_option("--out-dir", o->out_dir, "output directory")->envname("OLNMT_OUT_DIR");
  o->online.add(cmd);
  cmd->set_config("--config");
  cmd->callback([cmd, o] {
    fs::path dir = prepare_out_dir(o->out_dir, cmd);
    Checkpoint ck = load_checkpoint(o->model);
    NmtModel<Real> model(ck.config);
    auto sv = VocabularyMap::load(o->src_vocab);
    auto tv = VocabularyMap::load(o->tgt_vocab);
    auto test = load_indexed(o->src, o->ref, sv, tv);

    OnlineSpec spec = o->online.spec(o->online.optimizer, o->beam, o->max_len);
    TraceWriter writer((dir / "trace.jsonl").string(), (dir / "timing.jsonl").string());
    SimulationTrace trace = run_online_session(model, ck.params, test, spec, &tv, &writer);

    std::vector<std::string> hyps;
    for (const auto& r : trace.records) hyps.push_back(r.hyp_text);
    write_lines((dir / "hyps.txt").string(), hyps);

    EvalReport rep = report_from_trace(trace, o->bootstrap, spec.seed);
    std::vector<std::pair<std::string, EvalReport>> systems{{to_string(spec.algorithm), rep}};
    {
      std::ofstream rt(dir / "report.txt");
      write_report_txt(rt, systems, {});
      auto ut = measure_update_time(trace);
      if (spec.algorithm != Algorithm::None) {
        print_update_time(rt, to_string(spec.algorithm), ut);
        print_update_time_reference(rt);
      }
    }
    write_report_jsonl(dir / "report.jsonl", systems, o->bootstrap, spec.seed);
    if (!o->save_adapted.empty())
      save_checkpoint(o->save_adapted, ck.config, trace.final_params);

    write_report_txt(std::cout, systems, {});
    if (spec.algorithm != Algorithm::None) {
      print_update_time(std::cout, to_string(spec.algorithm), measure_update_time(trace));
      print_update_time_reference(std::cout);
    }
  });
}

void setup_evaluate(CLI::App& app) {
  auto cmd = app.add_subcommand("evaluate", "score hypothesis files against references");
  struct Opts {
    std::string hyp, ref, metric = "both", out_dir;
    int bootstrap = 1000;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--hyp", o->hyp)->required()->check(CLI::ExistingFile);
  cmd->add_option("--ref", o->ref)->required()->check(CLI::ExistingFile);
  cmd->add_option("--metric", o->metric)->check(CLI::IsMember({"bleu", "ter", "both"}));
  cmd->add_option("--bootstrap-samples", o->bootstrap);
  cmd->add_option("--seed", o->seed);
  cmd->add_option("--out-dir", o->out_dir, "also write report files here")
      ->envname("OLNMT_OUT_DIR");
  cmd->set_config("--config");
  cmd->callback([cmd, o] {
    std::vector<Sentence> hyps, refs;
    for (const auto& l : read_lines(o->hyp)) hyps.push_back(split_ws(l));
    for (const auto& l : read_lines(o->ref)) refs.push_back(split_ws(l));
    if (hyps.size() != refs.size())
      throw ConfigError("evaluate: " + std::to_string(hyps.size()) + " hypotheses vs " +
                        std::to_string(refs.size()) + " references");
    EvalReport rep = evaluate_corpus(hyps, refs, o->bootstrap, o->seed);

    std::cout << std::fixed << std::setprecision(2);
    if (o->metric != "ter")
      std::cout << "BLEU " << rep.bleu << "  [" << rep.bleu_ci.lo << ", " << rep.bleu_ci.hi
                << "]  n=" << rep.n_sentences << "\n";
    if (o->metric != "bleu")
      std::cout << "TER " << rep.ter << "  [" << rep.ter_ci.lo << ", " << rep.ter_ci.hi
                << "]  n=" << rep.n_sentences << "\n";

    if (!o->out_dir.empty()) {
      fs::path dir = prepare_out_dir(o->out_dir, cmd);
      std::vector<std::pair<std::string, EvalReport>> systems{{"evaluated", rep}};
      std::ofstream rt(dir / "report.txt");
      write_report_txt(rt, systems, {});
      write_report_jsonl(dir / "report.jsonl", systems, o->bootstrap, o->seed);
    }
  });
}

void setup_scenario(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "scenario", "full pipeline for one adaptation scenario (train, adapt online, compare)");
  struct Opts {
    int id = 1;
    std::string ood_train_src, ood_train_tgt, ood_dev_src, ood_dev_tgt;
    std::string id_train_src, id_train_tgt, id_dev_src, id_dev_tgt;
    std::string test_src, test_ref, out_dir;
    std::vector<std::string> optimizers{"sgd", "adagrad", "adadelta", "adam", "pas", "ppas"};
    int vocab_max_size = 50000;
    std::uint64_t init_seed = 1;
    int eval_beam = 0;
    int bootstrap = 1000;
    std::uint64_t bootstrap_seed = 1;
    ModelFlags model;
    TrainFlags train;
    OnlineFlags online;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--id", o->id, "scenario 1, 2 or 3")->required()->check(CLI::Range(1, 3));
  cmd->add_option("--ood-train-src", o->ood_train_src)->check(CLI::ExistingFile);
  cmd->add_option("--ood-train-tgt", o->ood_train_tgt)->check(CLI::ExistingFile);
  cmd->add_option("--ood-dev-src", o->ood_dev_src)->check(CLI::ExistingFile);
  cmd->add_option("--ood-dev-tgt", o->ood_dev_tgt)->check(CLI::ExistingFile);
  cmd->add_option("--id-train-src", o->id_train_src)->check(CLI::ExistingFile);
  cmd->add_option("--id-train-tgt", o->id_train_tgt)->check(CLI::ExistingFile);
  cmd->add_option("--id-dev-src", o->id_dev_src)->check(CLI::ExistingFile);
  cmd->add_option("--id-dev-tgt", o->id_dev_tgt)->check(CLI::ExistingFile);
  cmd->add_option("--test-src", o->test_src)->required()->check(CLI::ExistingFile);
  cmd->add_option("--test-ref", o->test_ref)->required()->check(CLI::ExistingFile);
  cmd->add_option("--optimizers", o->optimizers, "online systems to run")->delimiter(',');
  cmd->add_option("--vocab-max-size", o->vocab_max_size);
  cmd->add_option("--init-seed", o->init_seed, "parameter initialization seed");
  cmd->add_option("--eval-beam", o->eval_beam, "beam for dev evaluation (0 = --beam)");
  cmd->add_option("--bootstrap-samples", o->bootstrap);
  cmd->add_option("--bootstrap-seed", o->bootstrap_seed);
  cmd->add_option("--out-dir", o->out_dir, "output directory")->envname("OLNMT_OUT_DIR");
  o->model.add(cmd);
  o->train.add(cmd);
  o->online.add(cmd, /*with_optimizer=*/false);
  cmd->set_config("--config");
  cmd->callback([cmd, o] {
    fs::path dir = prepare_out_dir(o->out_dir, cmd);

    // vocabularies come from whatever training data the scenario has
    std::vector<std::string> src_tokens, tgt_tokens;
    auto collect = [&](const std::string& path, std::vector<std::string>& into) {
      if (path.empty()) return;
      for (const auto& line : read_lines(path))
        for (auto& t : split_ws(line)) into.push_back(std::move(t));
    };
    collect(o->ood_train_src, src_tokens);
    collect(o->id_train_src, src_tokens);
    collect(o->ood_train_tgt, tgt_tokens);
    collect(o->id_train_tgt, tgt_tokens);
    if (src_tokens.empty() || tgt_tokens.empty())
      throw ConfigError("scenario: no training corpora to build vocabularies from");
    auto sv = VocabularyMap::build(src_tokens, o->vocab_max_size);
    auto tv = VocabularyMap::build(tgt_tokens, o->vocab_max_size);
    sv.save((dir / "vocab.src").string());
    tv.save((dir / "vocab.tgt").string());

    std::vector<SentencePair> ood_train, ood_dev, id_train, id_dev, test;
    auto maybe_load = [&](const std::string& s, const std::string& t,
                          std::vector<SentencePair>& into) {
      if (!s.empty() && !t.empty()) into = load_indexed(s, t, sv, tv);
    };
    maybe_load(o->ood_train_src, o->ood_train_tgt, ood_train);
    maybe_load(o->ood_dev_src, o->ood_dev_tgt, ood_dev);
    maybe_load(o->id_train_src, o->id_train_tgt, id_train);
    maybe_load(o->id_dev_src, o->id_dev_tgt, id_dev);
    test = load_indexed(o->test_src, o->test_ref, sv, tv);

    ScenarioSpec spec;
    spec.id = o->id;
    spec.model = o->model.config(sv.size(), tv.size());
    spec.train = o->train.config();
    spec.train.eval_beam = o->eval_beam;
    spec.init_seed = o->init_seed;
    spec.bootstrap_samples = o->bootstrap;
    spec.bootstrap_seed = o->bootstrap_seed;
    spec.tgt_vocab = &tv;
    if (!ood_train.empty()) spec.ood_train = &ood_train;
    if (!ood_dev.empty()) spec.ood_dev = &ood_dev;
    if (!id_train.empty()) spec.indomain_train = &id_train;
    if (!id_dev.empty()) spec.indomain_dev = &id_dev;
    spec.test = &test;
    for (const auto& name : o->optimizers)
      spec.online_systems.push_back(o->online.spec(name, o->model.beam, o->model.max_output_length));

    // run_scenario handles training; traces are re-run here through writers so
    // every system's session lands on disk incrementally
    ScenarioResult res = run_scenario(spec);
    save_checkpoint((dir / "base.ckpt").string(), spec.model, res.base_params);

    auto dump_trace = [&](const SimulationTrace& tr, const std::string& stem) {
      TraceWriter w((dir / (stem + ".trace.jsonl")).string(),
                    (dir / (stem + ".timing.jsonl")).string());
      for (const auto& r : tr.records) w.write(r);
    };
    dump_trace(res.baseline, "baseline");
    std::vector<std::pair<std::string, EvalReport>> systems{{"offline", res.baseline_report}};
    std::vector<const SimulationTrace*> online_ptrs;
    for (size_t i = 0; i < res.online.size(); ++i) {
      std::string name = to_string(res.online[i].algorithm);
      dump_trace(res.online[i], name);
      systems.push_back({name, res.online_reports[i]});
      online_ptrs.push_back(&res.online[i]);
    }

    {
      std::ofstream rt(dir / "report.txt");
      write_report_txt(rt, systems, res.notes);
      for (size_t i = 0; i < res.online.size(); ++i)
        print_update_time(rt, to_string(res.online[i].algorithm),
                          measure_update_time(res.online[i]));
      if (!res.online.empty()) print_update_time_reference(rt);
    }
    write_report_jsonl(dir / "report.jsonl", systems, o->bootstrap, o->bootstrap_seed);
    if (!online_ptrs.empty())
      write_trajectory_tsv(dir / "trajectory.tsv", trajectory_plot_data(res.baseline, online_ptrs));

    write_report_txt(std::cout, systems, res.notes);
    for (size_t i = 0; i < res.online.size(); ++i)
      print_update_time(std::cout, to_string(res.online[i].algorithm),
                        measure_update_time(res.online[i]));
    if (!res.online.empty()) print_update_time_reference(std::cout);
  });
}

SimulationTrace read_trace_file(const std::string& path) {
  SimulationTrace tr;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read trace: " + path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    tr.records.push_back(trace_record_from_json_line(line));
  }
  if (tr.records.empty()) throw ConfigError("empty trace: " + path);
  return tr;
}

void setup_plot_data(CLI::App& app) {
  auto cmd = app.add_subcommand(
      "plot-data", "cumulative-BLEU difference series from stored traces, as TSV");
  struct Opts {
    std::string baseline, output;
    std::vector<std::string> online;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--baseline", o->baseline, "baseline trace.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--online", o->online, "online trace files")
      ->required()
      ->delimiter(',')
      ->check(CLI::ExistingFile);
  cmd->add_option("--output", o->output, "TSV output")->required();
  cmd->set_config("--config");
  cmd->callback([o] {
    SimulationTrace base = read_trace_file(o->baseline);
    std::vector<SimulationTrace> online;
    for (const auto& p : o->online) online.push_back(read_trace_file(p));
    std::vector<const SimulationTrace*> ptrs;
    for (const auto& tr : online) ptrs.push_back(&tr);
    TrajectoryData data = trajectory_plot_data(base, ptrs);
    for (size_t i = 0; i < o->online.size(); ++i) {
      std::string stem = fs::path(o->online[i]).filename().string();
      if (auto pos = stem.find(".trace.jsonl"); pos != std::string::npos) stem.resize(pos);
      else if (auto pos2 = stem.find(".jsonl"); pos2 != std::string::npos) stem.resize(pos2);
      data.systems[i] = stem;
    }
    write_trajectory_tsv(o->output, data);
  });
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"online-learning workbench for attentional NMT post-editing"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  setup_bpe_learn(app);
  setup_bpe_apply(app);
  setup_vocab(app);
  setup_toy_gen(app);
  setup_train(app);
  setup_translate(app);
  setup_adapt(app);
  setup_evaluate(app);
  setup_scenario(app);
  setup_plot_data(app);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace olnmt
