// Copyright 2026 The patdiag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "patdiag/pipeline/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "patdiag/nre_model.h"
#include "patdiag/numerics/rng.h"
#include "patdiag/pattern.h"
#include "patdiag/rl_agent.h"
#include "patdiag/util/io.h"
#include "patdiag/wlf.h"

namespace patdiag::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

MissingDependency::MissingDependency(std::string stage, std::string needed, const std::string& detail)
    : PipelineError(stage + " needs the output of " + needed + "; run `patdiag " + needed + "` first" +
                    (detail.empty() ? "" : " (" + detail + ")")),
      stage_(std::move(stage)),
      needed_(std::move(needed)) {}

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::Ingest, "ingest"}, {Stage::Synth, "synth"},   {Stage::TrainNre, "train-nre"},
    {Stage::Extract, "extract"}, {Stage::Refine, "refine"}, {Stage::Fuse, "fuse"},
    {Stage::Retrain, "retrain"}, {Stage::Eval, "eval"},     {Stage::Report, "report"},
    {Stage::Diagnose, "diagnose"},
};

constexpr std::string_view kCorpora = "corpora";
constexpr std::string_view kModels = "models";
constexpr std::string_view kAgents = "agents";
constexpr std::string_view kPatterns = "patterns";
constexpr std::string_view kSessions = "sessions";
constexpr std::string_view kLabels = "labels";
constexpr std::string_view kReports = "reports";

std::string key_of(std::string_view material) { return util::hex64(util::fnv1a(material)); }

std::string file_digest(const fs::path& p) {
  if (p.empty() || !fs::exists(p)) return "-";
  return key_of(util::read_file(p));
}

std::string seeds_text(const std::vector<int>& seeds) {
  std::string out = "seeds =";
  for (int s : seeds) out += " " + std::to_string(s);
  return out + "\n";
}

json metrics_to_json(const evaluation::Metrics& m) { return json::parse(evaluation::metrics_json(m)); }

evaluation::Metrics metrics_from_json(const json& j) {
  evaluation::Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.tp = j.at("tp").get<long>();
  m.fp = j.at("fp").get<long>();
  m.fn = j.at("fn").get<long>();
  return m;
}

/// Train/test split by a seeded shuffle; each side keeps corpus order.
std::pair<std::vector<corpus::Instance>, std::vector<corpus::Instance>> split_instances(
    const std::vector<corpus::Instance>& all, double test_fraction, std::uint64_t seed) {
  std::vector<int> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  numerics::Rng rng(seed);
  rng.shuffle(std::span<int>(order));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(all.size())));
  if (n_test == 0 || n_test >= all.size())
    throw PipelineError("split.test_fraction leaves an empty train or test side");
  std::vector<bool> is_test(all.size(), false);
  for (std::size_t k = all.size() - n_test; k < all.size(); ++k) is_test[static_cast<std::size_t>(order[k])] = true;
  std::vector<corpus::Instance> train, test;
  for (std::size_t i = 0; i < all.size(); ++i) (is_test[i] ? test : train).push_back(all[i]);
  return {std::move(train), std::move(test)};
}

std::vector<pattern::PatternStats> load_patterns(const fs::path& dir, const corpus::Corpus& train) {
  return pattern::parse_patterns_json(util::read_file(dir / "patterns.json"), train);
}

}  // namespace

std::string to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return std::string(name);
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (const auto& [stage, name] : kStageNames)
    if (name == s) return stage;
  throw PipelineError("unknown stage '" + std::string(s) + "'");
}

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {}

fs::path ArtifactStore::dir(std::string_view category, const std::string& key) const {
  return root_ / category / key;
}

bool ArtifactStore::done(std::string_view category, const std::string& key) const {
  return fs::exists(dir(category, key) / "DONE");
}

fs::path ArtifactStore::begin(std::string_view category, const std::string& key) const {
  const fs::path d = dir(category, key);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void ArtifactStore::mark_done(std::string_view category, const std::string& key) const {
  util::write_file(dir(category, key) / "DONE", key + "\n");
}

std::optional<std::string> ArtifactStore::latest(Stage stage) const {
  const fs::path p = root_ / "latest" / to_string(stage);
  if (!fs::exists(p)) return std::nullopt;
  std::string s = util::read_file(p);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

void ArtifactStore::set_latest(Stage stage, const std::string& key) const {
  util::write_file(root_ / "latest" / to_string(stage), key + "\n");
}

// ---------------------------------------------------------------------------
// Keys

Pipeline::Pipeline(PipelineConfig config, std::ostream* log)
    : config_(std::move(config)), store_(config_.workdir), log_(log) {
  config_.validate();
  std::error_code ec;
  fs::create_directories(config_.workdir, ec);
  if (ec || !fs::is_directory(config_.workdir))
    throw PipelineError("cannot create workdir " + config_.workdir.string());
}

std::string Pipeline::corpus_key() const {
  if (!corpus_key_) {
    std::string m = section_text(config_, "corpus.") + section_text(config_, "split.");
    if (config_.synthetic()) {
      m = "synth\n" + m + section_text(config_, "synth.");
    } else {
      m = "ingest\n" + m + "train " + file_digest(config_.corpus) + "\ntest " + file_digest(config_.test_corpus) + "\n";
    }
    corpus_key_ = key_of(m);
  }
  return *corpus_key_;
}

std::string Pipeline::nre_key(int seed) const {
  return key_of("train-nre\n" + corpus_key() + "\n" + section_text(config_, "nre.") + "seed = " +
                std::to_string(seed) + "\n" + file_digest(config_.word_vectors));
}

std::string Pipeline::extract_key() const {
  return key_of("extract\n" + nre_key(static_cast<int>(config_.seed)) + "\n" + section_text(config_, "agent."));
}

std::string Pipeline::refine_key() const {
  return key_of("refine\n" + extract_key() + "\n" + section_text(config_, "refine."));
}

fs::path Pipeline::session_dir() const { return store_.dir(kSessions, refine_key()); }

bool Pipeline::refine_done() const { return fs::exists(session_dir() / "verdicts.json"); }

std::string Pipeline::fuse_key() const {
  if (config_.fusion == FusionMode::DsOnly) return key_of("fuse\nds_only\n" + corpus_key());
  if (!refine_done()) throw MissingDependency("fuse", "refine", "no finalized session");
  const fs::path s = session_dir();
  return key_of("fuse\n" + refine_key() + "\n" + section_text(config_, "fusion.") + file_digest(s / "journal.jsonl") +
                "\n" + file_digest(s / "verdicts.json"));
}

std::string Pipeline::retrain_key(int seed) const {
  // Plain DS targets: the retrained model is the train-nre model for that seed.
  if (config_.fusion == FusionMode::DsOnly) return nre_key(seed);
  return key_of("retrain\n" + fuse_key() + "\n" + section_text(config_, "nre.") + "seed = " + std::to_string(seed) +
                "\n" + file_digest(config_.word_vectors));
}

std::string Pipeline::eval_key() const {
  std::string m = "eval\n" + fuse_key() + "\n" + corpus_key() + "\n" + seeds_text(config_.seeds);
  for (int s : config_.seeds) m += retrain_key(s) + "\n";
  return key_of(m);
}

std::string Pipeline::report_key() const {
  std::string m = "report\n" + eval_key() + "\n";
  if (config_.fusion != FusionMode::DsOnly) m += fuse_key() + "\n";
  return key_of(m);
}

std::string Pipeline::diagnose_key() const {
  const fs::path s = session_dir();
  return key_of("diagnose\n" + refine_key() + "\n" + file_digest(s / "journal.jsonl") + "\n" +
                file_digest(s / "verdicts.json"));
}

// ---------------------------------------------------------------------------
// Helpers

void Pipeline::info(const std::string& line) const {
  if (log_) *log_ << line << "\n" << std::flush;
}

void Pipeline::note_key(Stage stage, const std::string& key) const {
  const auto prev = store_.latest(stage);
  if (prev && *prev != key)
    info("warning: config changed since the last " + to_string(stage) + " run (" + *prev + " -> " + key + ")");
}

void Pipeline::require(Stage stage, std::string_view category, const std::string& key, Stage needed) const {
  if (store_.done(category, key)) return;
  std::string detail = "missing " + std::string(category) + "/" + key;
  const auto prev = store_.latest(needed);
  if (prev && *prev != key)
    detail += "; config hash mismatch: the last " + to_string(needed) + " run produced " + *prev;
  throw MissingDependency(to_string(stage), to_string(needed), detail);
}

corpus::Corpus Pipeline::load_train() const {
  const fs::path d = store_.dir(kCorpora, corpus_key());
  return corpus::load_corpus(d / "train.jsonl", config_.corpus_options);
}

corpus::Corpus Pipeline::load_test() const {
  const fs::path d = store_.dir(kCorpora, corpus_key());
  return corpus::load_corpus(d / "test.jsonl", config_.corpus_options);
}

namespace {

void save_split(const fs::path& dir, std::vector<corpus::Instance> train, std::vector<corpus::Instance> test,
                const corpus::CorpusOptions& options) {
  if (train.empty()) throw PipelineError("the training corpus is empty");
  if (test.empty()) throw PipelineError("the test corpus is empty");
  for (const auto& inst : test)
    if (!inst.gold_label) throw PipelineError("test instance " + inst.id + " has no gold label");
  const corpus::Corpus tr = corpus::make_corpus(std::move(train), options);
  const corpus::Corpus te = corpus::make_corpus(std::move(test), options);
  if (te.relation != tr.relation)
    throw PipelineError("test relation " + te.relation + " differs from train relation " + tr.relation);
  corpus::save_corpus(dir / "train.jsonl", tr);
  corpus::save_corpus(dir / "test.jsonl", te);
}

nre::NreModel fit_model(const PipelineConfig& cfg, const corpus::Corpus& train, std::span<const double> targets,
                        int seed, const fs::path& dir) {
  nre::NreModel model(cfg.nre, train.vocab.size(), static_cast<std::uint64_t>(seed));
  if (!cfg.word_vectors.empty()) model.load_word_vectors(cfg.word_vectors, train.vocab);
  const auto result = nre::train(model, train, targets, static_cast<std::uint64_t>(seed));
  model.save(dir / "model.bin");
  util::write_file(dir / "train_log.jsonl", nre::training_log_jsonl(result));
  return model;
}

nre::NreModel load_model(const PipelineConfig& cfg, const corpus::Corpus& train, const fs::path& dir) {
  nre::NreModel model(cfg.nre, train.vocab.size(), 0);
  model.load(dir / "model.bin");
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

StageResult Pipeline::synth() {
  if (!config_.synthetic()) throw PipelineError("the config names a corpus file; run ingest instead of synth");
  const std::string key = corpus_key();
  StageResult r{Stage::Synth, store_.done(kCorpora, key), store_.dir(kCorpora, key)};
  note_key(Stage::Synth, key);
  if (!r.skipped) {
    info("synth: generating " + std::to_string(config_.synth.n_instances) + " instances");
    corpus::validate(config_.synth);
    const corpus::Corpus all = corpus::generate_synthetic(config_.synth);
    auto [train, test] = split_instances(all.instances, config_.test_fraction, config_.split_seed);
    store_.begin(kCorpora, key);
    save_split(r.dir, std::move(train), std::move(test), config_.corpus_options);
    util::write_file(r.dir / "inputs.txt", section_text(config_, "synth.") + section_text(config_, "split."));
    store_.mark_done(kCorpora, key);
  }
  store_.set_latest(Stage::Synth, key);
  return r;
}

StageResult Pipeline::ingest() {
  if (config_.synthetic()) throw PipelineError("the config names no corpus file; set corpus = <path> or run synth");
  const std::string key = corpus_key();
  StageResult r{Stage::Ingest, store_.done(kCorpora, key), store_.dir(kCorpora, key)};
  note_key(Stage::Ingest, key);
  if (!r.skipped) {
    info("ingest: reading " + config_.corpus.string());
    corpus::Corpus all = corpus::load_corpus(config_.corpus, config_.corpus_options);
    std::vector<corpus::Instance> train, test;
    if (config_.test_corpus.empty()) {
      std::tie(train, test) = split_instances(all.instances, config_.test_fraction, config_.split_seed);
    } else {
      train = std::move(all.instances);
      test = corpus::load_corpus(config_.test_corpus, config_.corpus_options).instances;
    }
    store_.begin(kCorpora, key);
    save_split(r.dir, std::move(train), std::move(test), config_.corpus_options);
    store_.mark_done(kCorpora, key);
  }
  store_.set_latest(Stage::Ingest, key);
  return r;
}

StageResult Pipeline::train_nre() {
  const Stage corpus_stage = config_.synthetic() ? Stage::Synth : Stage::Ingest;
  require(Stage::TrainNre, kCorpora, corpus_key(), corpus_stage);
  const int seed = static_cast<int>(config_.seed);
  const std::string key = nre_key(seed);
  StageResult r{Stage::TrainNre, store_.done(kModels, key), store_.dir(kModels, key)};
  note_key(Stage::TrainNre, key);
  if (!r.skipped) {
    info("train-nre: seed " + std::to_string(seed));
    const corpus::Corpus train = load_train();
    store_.begin(kModels, key);
    fit_model(config_, train, wlf::ds_targets(train), seed, r.dir);
    store_.mark_done(kModels, key);
  }
  store_.set_latest(Stage::TrainNre, key);
  return r;
}

StageResult Pipeline::extract() {
  const int seed = static_cast<int>(config_.seed);
  require(Stage::Extract, kModels, nre_key(seed), Stage::TrainNre);
  const std::string key = extract_key();
  StageResult r{Stage::Extract, store_.done(kAgents, key) && store_.done(kPatterns, key), store_.dir(kAgents, key)};
  note_key(Stage::Extract, key);
  if (!r.skipped) {
    const corpus::Corpus train = load_train();
    const nre::NreModel model = load_model(config_, train, store_.dir(kModels, nre_key(seed)));
    store_.begin(kAgents, key);
    std::vector<agent::ExtractionRecord> records;
    std::string log;
    for (std::size_t k = 0; k < config_.eta_grid.size(); ++k) {
      agent::AgentConfig ac = config_.agent;
      ac.eta = config_.eta_grid[k];
      info("extract: agent " + std::to_string(k + 1) + "/" + std::to_string(config_.eta_grid.size()) +
           " eta " + util::format_double(ac.eta));
      const auto trained = agent::train_agent(model, train, ac, static_cast<std::uint64_t>(seed));
      trained.policy.save(r.dir / ("agent-" + std::to_string(k) + ".bin"));
      log += agent::agent_log_jsonl(trained, ac.eta);
      auto recs = agent::extract(model, trained.policy, train, trained.instances, ac.eta);
      records.insert(records.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    util::write_file(r.dir / "agent_log.jsonl", log);
    util::write_file(r.dir / "extractions.jsonl", agent::extractions_jsonl(records));

    std::vector<pattern::Extraction> extractions;
    extractions.reserve(records.size());
    for (const auto& rec : records) extractions.push_back({train.index_of(rec.instance_id), rec.actions});
    const auto table = pattern::aggregate(train, extractions);
    const auto top = pattern::select_top(table, pattern::build_hierarchy(table), static_cast<std::size_t>(config_.n_r));
    info("extract: " + std::to_string(table.size()) + " distinct patterns, kept " + std::to_string(top.size()));
    const fs::path pd = store_.begin(kPatterns, key);
    util::write_file(pd / "patterns.json", pattern::patterns_json(top, train));
    util::write_file(pd / "patterns.txt", pattern::patterns_text(top));
    store_.mark_done(kPatterns, key);
    store_.mark_done(kAgents, key);
  }
  store_.set_latest(Stage::Extract, key);
  return r;
}

StageResult Pipeline::refine(const RefineOptions& options) {
  require(Stage::Refine, kAgents, extract_key(), Stage::Extract);
  require(Stage::Refine, kPatterns, extract_key(), Stage::Extract);
  const std::string key = refine_key();
  const fs::path dir = session_dir();
  StageResult r{Stage::Refine, refine_done(), dir};
  note_key(Stage::Refine, key);
  if (r.skipped) {
    if (options.source == AnnotationSource::Journal) info("refine: session already finalized; journal ignored");
    if (!store_.done(kSessions, key)) store_.mark_done(kSessions, key);
    store_.set_latest(Stage::Refine, key);
    return r;
  }

  const corpus::Corpus train = load_train();
  const bool fresh = !fs::exists(dir / "session.json");
  auto store = [&] {
    if (!fresh) return refinement::SessionStore::open(dir);
    const auto top = load_patterns(store_.dir(kPatterns, extract_key()), train);
    if (top.empty()) throw PipelineError("extraction produced no patterns to refine");
    auto s = refinement::create_session(top, train, config_.n_a, config_.seed, config_.thresholds);
    return refinement::SessionStore::create(dir, s);
  }();
  if (fresh) info("refine: new session with " + std::to_string(store.session().items().size()) + " items");

  switch (options.source) {
    case AnnotationSource::None:
      return r;
    case AnnotationSource::Oracle:
      for (const auto& id : store.session().items()) {
        if (store.session().annotations.count(id)) continue;
        const corpus::Instance* inst = train.find(id);
        if (!inst->gold_label) throw PipelineError("oracle annotation needs a gold label for " + id);
        store.record(id, corpus::to_int(*inst->gold_label));
      }
      break;
    case AnnotationSource::Journal:
      for (const auto& e : refinement::parse_journal(util::read_file(options.journal))) {
        const auto& ann = store.session().annotations;
        auto it = ann.find(e.instance_id);
        if (it != ann.end() && corpus::to_int(it->second) == e.label) continue;
        store.record(e.instance_id, e.label);
      }
      break;
  }
  if (!store.session().complete()) {
    throw PipelineError("refine: " + std::to_string(store.session().labeled_count()) + " of " +
                        std::to_string(store.session().items().size()) +
                        " items labeled; the session stays open");
  }
  store.finalize();
  store_.mark_done(kSessions, key);
  store_.set_latest(Stage::Refine, key);
  info("refine: session finalized");
  return r;
}

StageResult Pipeline::fuse() {
  const Stage corpus_stage = config_.synthetic() ? Stage::Synth : Stage::Ingest;
  require(Stage::Fuse, kCorpora, corpus_key(), corpus_stage);
  if (config_.fusion != FusionMode::DsOnly && !refine_done()) {
    std::string detail = "no finalized session in " + session_dir().string();
    throw MissingDependency("fuse", "refine", detail);
  }
  const std::string key = fuse_key();
  StageResult r{Stage::Fuse, store_.done(kLabels, key), store_.dir(kLabels, key)};
  note_key(Stage::Fuse, key);
  if (!r.skipped) {
    const corpus::Corpus train = load_train();
    std::vector<double> soft;
    store_.begin(kLabels, key);
    if (config_.fusion == FusionMode::DsOnly) {
      soft = wlf::ds_targets(train);
    } else {
      const auto session = refinement::SessionStore::open(session_dir()).session();
      std::vector<pattern::Pattern> pos, neg;
      for (const auto& v : refinement::verdicts(session)) {
        if (v.cls == refinement::VerdictClass::Positive) pos.push_back(pattern::Pattern::parse(v.pattern));
        if (v.cls == refinement::VerdictClass::Negative) neg.push_back(pattern::Pattern::parse(v.pattern));
      }
      const auto matrix = wlf::apply_lfs(train, pos, neg);
      const auto annotated = wlf::annotated_rows(train, matrix, session.annotations);
      auto params = wlf::estimate(annotated.rows, annotated.labels, config_.fusion_delta);
      params.lf_names = matrix.lf_names;
      soft = wlf::denoise(matrix, params);
      if (config_.fusion == FusionMode::GoldMix) soft = wlf::gold_mix(train, soft, session.annotations);
      util::write_file(r.dir / "params.json", wlf::params_json(params));
      info("fuse: " + std::to_string(pos.size()) + " positive and " + std::to_string(neg.size()) +
           " negative patterns");
    }
    util::write_file(r.dir / "labels.jsonl", wlf::label_file(train, soft));
    store_.mark_done(kLabels, key);
  }
  store_.set_latest(Stage::Fuse, key);
  return r;
}

StageResult Pipeline::retrain() {
  if (config_.fusion != FusionMode::DsOnly && !refine_done())
    throw MissingDependency("retrain", "fuse", "no finalized session");
  const std::string fkey = fuse_key();
  require(Stage::Retrain, kLabels, fkey, Stage::Fuse);
  StageResult r{Stage::Retrain, true, store_.dir(kLabels, fkey)};
  std::optional<corpus::Corpus> train;
  std::vector<double> targets;
  for (int seed : config_.seeds) {
    const std::string key = retrain_key(seed);
    if (store_.done(kModels, key)) continue;
    r.skipped = false;
    if (!train) {
      train = load_train();
      targets = wlf::parse_label_file(util::read_file(store_.dir(kLabels, fkey) / "labels.jsonl"), *train);
    }
    info("retrain: seed " + std::to_string(seed));
    const fs::path d = store_.begin(kModels, key);
    fit_model(config_, *train, targets, seed, d);
    store_.mark_done(kModels, key);
  }
  store_.set_latest(Stage::Retrain, key_of(fkey + seeds_text(config_.seeds)));
  return r;
}

StageResult Pipeline::eval() {
  if (config_.fusion != FusionMode::DsOnly && !refine_done())
    throw MissingDependency("eval", "retrain", "no finalized session");
  for (int seed : config_.seeds) require(Stage::Eval, kModels, retrain_key(seed), Stage::Retrain);
  const std::string key = eval_key();
  StageResult r{Stage::Eval, store_.done(kReports, key), store_.dir(kReports, key)};
  note_key(Stage::Eval, key);
  if (!r.skipped) {
    const corpus::Corpus train = load_train();
    const corpus::Corpus test = load_test();
    std::vector<corpus::Label> gold;
    for (const auto& inst : test.instances) gold.push_back(*inst.gold_label);
    evaluation::SeedReport report;
    report.relation = train.relation;
    report.mean = evaluation::seed_mean(
        [&](int seed) {
          const nre::NreModel model = load_model(config_, train, store_.dir(kModels, retrain_key(seed)));
          std::vector<double> probs;
          probs.reserve(test.size());
          // Test tokens are looked up in the training vocabulary.
          for (const auto& inst : test.instances) probs.push_back(model.predict(model.embed(inst, train.vocab)));
          const auto m = evaluation::prf1(probs, gold);
          report.per_seed.emplace_back(seed, m);
          return m;
        },
        config_.seeds);
    store_.begin(kReports, key);
    util::write_file(r.dir / "eval.json", evaluation::report_json(report));
    util::write_file(r.dir / "eval.txt", evaluation::report_table(report));
    store_.mark_done(kReports, key);
    info("eval: mean F1 " + util::format_double(report.mean.f1));
  }
  store_.set_latest(Stage::Eval, key);
  return r;
}

evaluation::SeedReport Pipeline::load_eval() const {
  const fs::path p = store_.dir(kReports, eval_key()) / "eval.json";
  if (!fs::exists(p)) throw MissingDependency("report", "eval", "missing " + p.string());
  const json j = json::parse(util::read_file(p));
  evaluation::SeedReport report;
  report.relation = j.at("relation").get<std::string>();
  for (const auto& s : j.at("per_seed")) report.per_seed.emplace_back(s.at("seed").get<int>(), metrics_from_json(s));
  report.mean = metrics_from_json(j.at("mean"));
  return report;
}

StageResult Pipeline::report() {
  if (config_.fusion != FusionMode::DsOnly && !refine_done())
    throw MissingDependency("report", "eval", "no finalized session");
  require(Stage::Report, kReports, eval_key(), Stage::Eval);
  const std::string key = report_key();
  StageResult r{Stage::Report, store_.done(kReports, key), store_.dir(kReports, key)};
  note_key(Stage::Report, key);
  if (!r.skipped) {
    const auto eval = load_eval();
    json j;
    j["relation"] = eval.relation;
    j["fusion"] = to_string(config_.fusion);
    j["seeds"] = config_.seeds;
    json per_seed = json::array();
    for (const auto& [seed, m] : eval.per_seed) {
      json s = metrics_to_json(m);
      s["seed"] = seed;
      per_seed.push_back(std::move(s));
    }
    j["per_seed"] = std::move(per_seed);
    j["mean"] = metrics_to_json(eval.mean);
    std::string text = "fusion " + to_string(config_.fusion) + "\n" + evaluation::report_table(eval);
    if (config_.fusion != FusionMode::DsOnly) {
      const auto session = refinement::SessionStore::open(session_dir()).session();
      json pats = json::array();
      text += "\npatterns\n";
      for (const auto& v : refinement::verdicts(session)) {
        json p;
        p["pattern"] = v.pattern;
        p["accuracy"] = v.accuracy;
        p["class"] = refinement::to_string(v.cls);
        pats.push_back(std::move(p));
        char line[64];
        std::snprintf(line, sizeof(line), "%-9s %6.2f  ", refinement::to_string(v.cls).c_str(), 100.0 * v.accuracy);
        text += line + v.pattern + "\n";
      }
      j["patterns"] = std::move(pats);
    }
    store_.begin(kReports, key);
    util::write_file(r.dir / "report.json", j.dump(2) + "\n");
    util::write_file(r.dir / "report.txt", text);
    store_.mark_done(kReports, key);
  }
  store_.set_latest(Stage::Report, key);
  return r;
}

Diagnosis Pipeline::load_diagnosis() const {
  const fs::path p = store_.dir(kReports, diagnose_key()) / "diagnosis.json";
  if (!fs::exists(p)) throw MissingDependency("diagnosis", "diagnose", "missing " + p.string());
  const json j = json::parse(util::read_file(p));
  Diagnosis d;
  d.relation = j.at("relation").get<std::string>();
  d.annotated = j.at("annotated").get<int>();
  d.annotated_positive = j.at("annotated_positive").get<int>();
  d.ds = metrics_from_json(j.at("ds"));
  d.ds_accuracy = j.at("ds_accuracy").get<double>();
  d.positive_patterns = j.at("patterns").at("positive").get<int>();
  d.negative_patterns = j.at("patterns").at("negative").get<int>();
  d.discarded_patterns = j.at("patterns").at("discarded").get<int>();
  return d;
}

std::string diagnosis_json(const Diagnosis& d) {
  json j;
  j["relation"] = d.relation;
  j["annotated"] = d.annotated;
  j["annotated_positive"] = d.annotated_positive;
  j["ds"] = metrics_to_json(d.ds);
  j["ds_accuracy"] = d.ds_accuracy;
  j["patterns"] = {{"positive", d.positive_patterns},
                   {"negative", d.negative_patterns},
                   {"discarded", d.discarded_patterns}};
  return j.dump(2) + "\n";
}

std::string diagnosis_table(const Diagnosis& d) {
  char buf[256];
  std::string out = "relation " + d.relation + "\n";
  std::snprintf(buf, sizeof(buf), "annotated %d (%d positive)\n", d.annotated, d.annotated_positive);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %9s %9s %9s\n", "", "prec", "recall", "acc");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-10s %9.2f %9.2f %9.2f\n", "DS", 100.0 * d.ds.precision, 100.0 * d.ds.recall,
                100.0 * d.ds_accuracy);
  out += buf;
  std::snprintf(buf, sizeof(buf), "patterns   positive %d  negative %d  discarded %d\n", d.positive_patterns,
                d.negative_patterns, d.discarded_patterns);
  out += buf;
  return out;
}

StageResult Pipeline::diagnose() {
  require(Stage::Diagnose, kAgents, extract_key(), Stage::Extract);
  if (!refine_done()) throw MissingDependency("diagnose", "refine", "no finalized session in " + session_dir().string());
  const std::string key = diagnose_key();
  StageResult r{Stage::Diagnose, store_.done(kReports, key), store_.dir(kReports, key)};
  note_key(Stage::Diagnose, key);
  if (!r.skipped) {
    const corpus::Corpus train = load_train();
    const auto session = refinement::SessionStore::open(session_dir()).session();
    if (session.annotations.empty()) throw PipelineError("diagnose: the session has no annotations");
    Diagnosis d;
    d.relation = train.relation;
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& [id, label] : session.annotations) {
      const corpus::Instance* inst = train.find(id);
      if (!inst) throw PipelineError("annotated instance " + id + " is not in the corpus");
      const bool ds = inst->ds_label == corpus::Label::Positive;
      const bool human = label == corpus::Label::Positive;
      if (ds && human) ++tp;
      else if (ds) ++fp;
      else if (human) ++fn;
      else ++tn;
    }
    d.annotated = static_cast<int>(session.annotations.size());
    d.annotated_positive = static_cast<int>(tp + fn);
    d.ds = evaluation::from_counts(tp, fp, fn);
    d.ds_accuracy = static_cast<double>(tp + tn) / static_cast<double>(d.annotated);
    for (const auto& v : refinement::verdicts(session)) {
      if (v.cls == refinement::VerdictClass::Positive) ++d.positive_patterns;
      else if (v.cls == refinement::VerdictClass::Negative) ++d.negative_patterns;
      else ++d.discarded_patterns;
    }
    store_.begin(kReports, key);
    util::write_file(r.dir / "diagnosis.json", diagnosis_json(d));
    util::write_file(r.dir / "diagnosis.txt", diagnosis_table(d));
    store_.mark_done(kReports, key);
  }
  store_.set_latest(Stage::Diagnose, key);
  return r;
}

StageResult Pipeline::run(Stage stage, const RefineOptions& refine_options) {
  switch (stage) {
    case Stage::Ingest: return ingest();
    case Stage::Synth: return synth();
    case Stage::TrainNre: return train_nre();
    case Stage::Extract: return extract();
    case Stage::Refine: return refine(refine_options);
    case Stage::Fuse: return fuse();
    case Stage::Retrain: return retrain();
    case Stage::Eval: return eval();
    case Stage::Report: return report();
    case Stage::Diagnose: return diagnose();
  }
  throw PipelineError("unknown stage");
}

std::vector<StageResult> Pipeline::run_all(const RefineOptions& refine_options) {
  std::vector<StageResult> out;
  out.push_back(config_.synthetic() ? synth() : ingest());
  out.push_back(train_nre());
  if (config_.fusion != FusionMode::DsOnly) {
    if (refine_options.source == AnnotationSource::None)
      throw PipelineError("a full run needs annotations: pass --oracle or --annotations <journal>");
    out.push_back(extract());
    out.push_back(refine(refine_options));
  }
  out.push_back(fuse());
  out.push_back(retrain());
  out.push_back(eval());
  out.push_back(report());
  if (config_.fusion != FusionMode::DsOnly) out.push_back(diagnose());
  return out;
}

}  // namespace patdiag::pipeline
