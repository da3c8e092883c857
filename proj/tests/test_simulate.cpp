#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <random>

#include "olnmt/simulate.hpp"

using namespace olnmt;

namespace {

ModelConfig small_config(int vocab, int dim) {
  ModelConfig c;
  c.src_vocab_size = vocab;
  c.tgt_vocab_size = vocab;
  c.embedding_dim = dim;
  c.hidden_dim = dim;
  c.attention_dim = dim;
  c.deep_output_dim = dim;
  c.weight_noise_sigma = 0.0f;
  c.max_output_length = 10;
  return c;
}

// id-level corpus: tgt == src (copy task) over content ids 4..vocab-1
std::vector<SentencePair> copy_pairs(int n, int vocab, int max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, max_len), sym(4, vocab - 1);
  std::vector<SentencePair> out(n);
  for (auto& p : out) {
    int l = len(rng);
    for (int i = 0; i < l; ++i) p.src.push_back(sym(rng));
    p.tgt = p.src;
  }
  return out;
}

std::vector<SentencePair> indexed_toy(const TextCorpus& text, const VocabularyMap& sv,
                                      const VocabularyMap& tv) {
  ParallelCorpus c = pair_lines(text.src_lines, text.tgt_lines);
  index_corpus(c, sv, tv);
  return c.pairs;
}

}  // namespace

TEST_CASE("train_offline improves dev BLEU on the copy task") {
  ModelConfig mc = small_config(12, 16);
  NmtModel<Real> model(mc);
  auto pairs = copy_pairs(300, 12, 4, 3);
  std::vector<SentencePair> train(pairs.begin(), pairs.begin() + 260);
  std::vector<SentencePair> dev(pairs.begin() + 260, pairs.end());

  TrainConfig tc;
  tc.optimizer = Algorithm::Adam;
  tc.lr = 1e-2;
  tc.eval_every = 130;
  tc.patience = 390;
  tc.max_updates = 1300;
  tc.eval_beam = 2;
  tc.seed = 5;

  auto init = model.init_params(7);
  double before = 0;
  {
    std::vector<Sentence> hyps, refs;
    for (const auto& p : dev) {
      auto h = model.beam_search(init, p.src, 2, 0);
      Sentence hs, rs;
      for (int id : h.tokens)
        if (id > 3) hs.push_back(std::to_string(id));
      for (int id : p.tgt) rs.push_back(std::to_string(id));
      hyps.push_back(hs);
      refs.push_back(rs);
    }
    before = bleu(hyps, refs);
  }
  auto res = train_offline(model, init, train, dev, tc);
  CHECK(!res.diverged);
  CHECK(res.best_dev_bleu > before);
  CHECK(res.total_updates >= tc.eval_every);
  CHECK(res.params.all_finite());
}

TEST_CASE("patience 0 stops after exactly one evaluation round") {
  ModelConfig mc = small_config(10, 8);
  NmtModel<Real> model(mc);
  auto pairs = copy_pairs(60, 10, 3, 11);
  std::vector<SentencePair> train(pairs.begin(), pairs.begin() + 50);
  std::vector<SentencePair> dev(pairs.begin() + 50, pairs.end());

  TrainConfig tc;
  tc.eval_every = 20;
  tc.patience = 0;
  tc.max_updates = 1000;
  tc.eval_beam = 1;
  auto res = train_offline(model, model.init_params(1), train, dev, tc);
  CHECK(res.dev_history.size() == 1);
  CHECK(res.total_updates == 20);
}

TEST_CASE("training loss decreases over 100 updates in at least 95 of 100 seeded runs") {
  ModelConfig mc = small_config(8, 8);
  NmtModel<Real> model(mc);
  int wins = 0;
  for (int run = 0; run < 100; ++run) {
    auto batch = copy_pairs(6, 8, 3, 1000 + run);
    auto params = model.init_params(2000 + run);
    GradientOptimizer<Real> opt(Algorithm::Adadelta, 1.0);
    auto batch_loss = [&]() {
      double s = 0;
      for (const auto& p : batch) {
        auto tgt = p.tgt;
        tgt.push_back(tok::kEos);
        s -= (double)model.sentence_log_prob(params, p.src, tgt);
      }
      return s;
    };
    double before = batch_loss();
    for (int t = 0; t < 100; ++t)
      training_step(model, params, opt, batch[t % batch.size()], 1.0, run * 100 + t);
    if (batch_loss() < before) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("online session basics") {
  ModelConfig mc = small_config(10, 8);
  NmtModel<Real> model(mc);
  auto params = model.init_params(42);
  auto test = copy_pairs(12, 10, 3, 9);

  SUBCASE("optimizer none equals batch translation with the frozen checkpoint") {
    OnlineSpec none;
    auto trace = run_online_session(model, params, test, none);
    auto batch = translate_corpus(model, params, test);
    REQUIRE(trace.records.size() == test.size());
    for (size_t i = 0; i < test.size(); ++i) {
      CHECK(trace.records[i].hyp_tokens == batch[i].tokens);
      CHECK(trace.records[i].hyp_log_prob == batch[i].log_prob);
      CHECK(!trace.records[i].updated);
    }
    CHECK(param_dist(trace.final_params, params) == 0.0);
  }

  SUBCASE("fixed-seed sessions replay bit-identically") {
    OnlineSpec adam;
    adam.algorithm = Algorithm::Adam;
    auto a = run_online_session(model, params, test, adam);
    auto b = run_online_session(model, params, test, adam);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].hyp_tokens == b.records[i].hyp_tokens);
      CHECK(a.records[i].hyp_log_prob == b.records[i].hyp_log_prob);
      CHECK(a.records[i].cum_bleu == b.records[i].cum_bleu);
      CHECK(a.records[i].cum_ter == b.records[i].cum_ter);
    }
    CHECK(param_dist(a.final_params, b.final_params) == 0.0);
  }

  SUBCASE("stored hypothesis re-scores identically under the pre-update parameters") {
    OnlineSpec adam;
    adam.algorithm = Algorithm::Adam;
    std::vector<ParameterSet<Real>> snaps;
    auto trace = run_online_session(model, params, test, adam, nullptr, nullptr,
                                    [&](int, const ParameterSet<Real>& p) { snaps.push_back(p); });
    REQUIRE(snaps.size() == trace.records.size());
    for (size_t i = 0; i < trace.records.size(); ++i) {
      float rescored =
          model.sentence_log_prob(snaps[i], test[i].src, trace.records[i].hyp_tokens);
      CHECK(std::abs(rescored - (float)trace.records[i].hyp_log_prob) < 1e-5);
    }
  }

  SUBCASE("each pair triggers exactly one parameter transition") {
    OnlineSpec sgd;
    sgd.algorithm = Algorithm::Sgd;
    sgd.lr = 1e-2;
    std::vector<ParameterSet<Real>> snaps;
    auto trace = run_online_session(model, params, test, sgd, nullptr, nullptr,
                                    [&](int, const ParameterSet<Real>& p) { snaps.push_back(p); });
    snaps.push_back(trace.final_params);
    for (size_t i = 0; i + 1 < snaps.size(); ++i) {
      bool moved = param_dist(snaps[i], snaps[i + 1]) > 0;
      CHECK(moved == trace.records[i].updated);
    }
  }

  SUBCASE("cumulative metrics match the recomputed prefix curves") {
    OnlineSpec adagrad;
    adagrad.algorithm = Algorithm::Adagrad;
    auto trace = run_online_session(model, params, test, adagrad);
    std::vector<SentenceStats> stats;
    for (const auto& r : trace.records) {
      SentenceStats s;
      s.bleu = bleu_stats(split_ws(r.hyp_text), split_ws(r.ref_text));
      s.ter = ter_stats(split_ws(r.hyp_text), split_ws(r.ref_text));
      stats.push_back(s);
    }
    auto bcurve = cumulative_curve(stats, Metric::Bleu);
    auto tcurve = cumulative_curve(stats, Metric::Ter);
    for (size_t i = 0; i < trace.records.size(); ++i) {
      CHECK(trace.records[i].cum_bleu == doctest::Approx(bcurve[i]).epsilon(1e-12));
      CHECK(trace.records[i].cum_ter == doctest::Approx(tcurve[i]).epsilon(1e-12));
    }
  }

  SUBCASE("pas session records the gap loss and inner iterations") {
    OnlineSpec pas;
    pas.algorithm = Algorithm::Pas;
    auto trace = run_online_session(model, params, test, pas);
    for (const auto& r : trace.records) {
      REQUIRE(r.pa_loss.has_value());
      REQUIRE(r.pa_iters.has_value());
      REQUIRE(r.pa_passive.has_value());
      if (*r.pa_passive) {
        CHECK(*r.pa_iters == 0);
        CHECK(!r.updated);
      }
    }
  }
}

TEST_CASE("update time summary") {
  ModelConfig mc = small_config(8, 8);
  NmtModel<Real> model(mc);
  auto params = model.init_params(4);
  auto test = copy_pairs(6, 8, 3, 5);
  OnlineSpec adam;
  adam.algorithm = Algorithm::Adam;
  auto trace = run_online_session(model, params, test, adam);
  auto s = measure_update_time(trace);
  CHECK(s.n_updates == 6);
  CHECK(s.min_ms >= 0.0);
  CHECK(s.mean_ms >= s.min_ms);
  CHECK(s.mean_ms <= s.max_ms);
  CHECK(s.p95_ms >= s.min_ms);
  CHECK(s.p95_ms <= s.max_ms);

  OnlineSpec none;
  auto frozen = run_online_session(model, params, test, none);
  CHECK(measure_update_time(frozen).n_updates == 0);
}

TEST_CASE("trajectory plot data") {
  ModelConfig mc = small_config(8, 8);
  NmtModel<Real> model(mc);
  auto params = model.init_params(21);
  auto test = copy_pairs(10, 8, 3, 2);

  OnlineSpec none;
  auto baseline = run_online_session(model, params, test, none);

  SUBCASE("baseline against itself is the zero series") {
    auto data = trajectory_plot_data(baseline, {&baseline});
    REQUIRE(data.delta_bleu.size() == 1);
    REQUIRE(data.delta_bleu[0].size() == test.size());
    for (double v : data.delta_bleu[0]) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("final entry equals the difference of full-corpus BLEU") {
    OnlineSpec adam;
    adam.algorithm = Algorithm::Adam;
    auto online = run_online_session(model, params, test, adam);
    auto data = trajectory_plot_data(baseline, {&online});
    std::vector<Sentence> oh, bh, refs;
    for (size_t i = 0; i < test.size(); ++i) {
      oh.push_back(split_ws(online.records[i].hyp_text));
      bh.push_back(split_ws(baseline.records[i].hyp_text));
      refs.push_back(split_ws(baseline.records[i].ref_text));
    }
    CHECK(data.delta_bleu[0].back() ==
          doctest::Approx(bleu(oh, refs) - bleu(bh, refs)).epsilon(1e-12));
  }

  SUBCASE("different test sets are rejected") {
    auto other = copy_pairs(10, 8, 3, 777);
    auto mismatched = run_online_session(model, params, other, none);
    CHECK_THROWS_AS(trajectory_plot_data(baseline, {&mismatched}), ConfigError);
    auto shorter = run_online_session(
        model, params, std::vector<SentencePair>(test.begin(), test.begin() + 5), none);
    CHECK_THROWS_AS(trajectory_plot_data(baseline, {&shorter}), ConfigError);
  }
}

TEST_CASE("trace files: deterministic records, timing sidecar, round trip") {
  ModelConfig mc = small_config(8, 8);
  NmtModel<Real> model(mc);
  auto params = model.init_params(33);
  auto test = copy_pairs(5, 8, 3, 6);
  OnlineSpec pas;
  pas.algorithm = Algorithm::Pas;

  auto run_to_files = [&](const std::string& tag) {
    TraceWriter w("sim_trace_" + tag + ".jsonl", "sim_timing_" + tag + ".jsonl");
    return run_online_session(model, params, test, pas, nullptr, &w);
  };
  auto a = run_to_files("a");
  auto b = run_to_files("b");
  (void)b;

  std::ifstream fa("sim_trace_a.jsonl"), fb("sim_trace_b.jsonl");
  std::string ba((std::istreambuf_iterator<char>(fa)), {});
  std::string bb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ba == bb);  // trace bytes identical across replays
  CHECK(!ba.empty());

  // parse back and compare to the in-memory records
  std::istringstream is(ba);
  std::string line;
  size_t i = 0;
  while (std::getline(is, line)) {
    REQUIRE(i < a.records.size());
    auto rec = trace_record_from_json_line(line);
    CHECK(rec.t == a.records[i].t);
    CHECK(rec.hyp_text == a.records[i].hyp_text);
    CHECK(rec.hyp_log_prob == a.records[i].hyp_log_prob);
    CHECK(rec.cum_bleu == a.records[i].cum_bleu);
    CHECK(rec.pa_loss.has_value() == a.records[i].pa_loss.has_value());
    ++i;
  }
  CHECK(i == a.records.size());

  std::ifstream ta("sim_timing_a.jsonl");
  size_t timing_lines = 0;
  while (std::getline(ta, line)) ++timing_lines;
  CHECK(timing_lines == a.records.size());

  for (const char* f : {"sim_trace_a.jsonl", "sim_trace_b.jsonl", "sim_timing_a.jsonl",
                        "sim_timing_b.jsonl"})
    std::remove(f);
}

TEST_CASE("scenario orchestration") {
  ToyTaskConfig tc;
  tc.kind = ToyKind::SubstitutionGrammar;
  tc.n_train = 250;
  tc.n_dev = 40;
  tc.n_indomain_train = 250;
  tc.n_test = 50;
  tc.vocab_size = 10;
  tc.min_len = 2;
  tc.max_len = 5;
  tc.seed = 13;
  tc.domain_shift = 0.5;
  auto task = generate_toy_task(tc);

  std::vector<std::string> src_tokens, tgt_tokens;
  for (const auto& l : task.train.src_lines)
    for (auto& t : split_ws(l)) src_tokens.push_back(t);
  for (const auto& l : task.train.tgt_lines)
    for (auto& t : split_ws(l)) tgt_tokens.push_back(t);
  auto sv = VocabularyMap::build(src_tokens, 64);
  auto tv = VocabularyMap::build(tgt_tokens, 64);

  auto ood_train = indexed_toy(task.train, sv, tv);
  auto ood_dev = indexed_toy(task.dev, sv, tv);
  auto id_train = indexed_toy(task.indomain_train, sv, tv);
  auto id_dev = indexed_toy(task.indomain_dev, sv, tv);
  auto test = indexed_toy(task.test, sv, tv);

  ModelConfig mc = small_config(1, 16);
  mc.src_vocab_size = sv.size();
  mc.tgt_vocab_size = tv.size();

  ScenarioSpec spec;
  spec.model = mc;
  spec.train.optimizer = Algorithm::Adam;  // fastest to converge at this scale
  spec.train.lr = 1e-2;
  spec.train.eval_every = 500;
  spec.train.patience = 1000;
  spec.train.max_updates = 3000;
  spec.train.eval_beam = 1;
  spec.test = &test;
  spec.tgt_vocab = &tv;
  spec.bootstrap_samples = 100;

  SUBCASE("scenario validation") {
    ScenarioSpec bad = spec;
    bad.id = 1;
    bad.ood_train = &ood_train;
    bad.ood_dev = &ood_dev;
    bad.indomain_train = &id_train;  // not allowed in scenario 1
    CHECK_THROWS_AS(run_scenario(bad), ConfigError);

    ScenarioSpec bad3 = spec;
    bad3.id = 3;
    bad3.indomain_train = &id_train;
    bad3.indomain_dev = &id_dev;
    bad3.ood_train = &ood_train;  // not allowed in scenario 3
    CHECK_THROWS_AS(run_scenario(bad3), ConfigError);

    ScenarioSpec missing = spec;
    missing.id = 2;
    CHECK_THROWS_AS(run_scenario(missing), ConfigError);
  }

  SUBCASE("scenario 3 with no online systems reduces to offline evaluation") {
    ScenarioSpec s3 = spec;
    s3.id = 3;
    s3.indomain_train = &id_train;
    s3.indomain_dev = &id_dev;
    auto res = run_scenario(s3);
    CHECK(res.online.empty());
    auto batch = translate_corpus(NmtModel<Real>(mc), res.base_params, test);
    REQUIRE(res.baseline.records.size() == batch.size());
    for (size_t i = 0; i < batch.size(); ++i)
      CHECK(res.baseline.records[i].hyp_tokens == batch[i].tokens);
  }

  SUBCASE("scenario 2 without in-domain data degenerates to scenario 1, logged") {
    ScenarioSpec s1 = spec;
    s1.id = 1;
    s1.ood_train = &ood_train;
    s1.ood_dev = &ood_dev;
    auto r1 = run_scenario(s1);

    ScenarioSpec s2 = spec;
    s2.id = 2;
    s2.ood_train = &ood_train;
    s2.ood_dev = &ood_dev;
    auto r2 = run_scenario(s2);
    REQUIRE(!r2.notes.empty());
    CHECK(r2.notes[0].find("degenerates") != std::string::npos);
    CHECK(r2.baseline_report.bleu == doctest::Approx(r1.baseline_report.bleu));

    // with in-domain fine-tuning the baseline beats the scenario-1 baseline
    ScenarioSpec full2 = spec;
    full2.id = 2;
    full2.ood_train = &ood_train;
    full2.ood_dev = &ood_dev;
    full2.indomain_train = &id_train;
    full2.indomain_dev = &id_dev;
    auto rf = run_scenario(full2);
    REQUIRE(rf.finetune.has_value());
    CHECK(rf.baseline_report.bleu > r1.baseline_report.bleu);
  }
}
