#include <dner/generator.hpp>
#include <dner/pipeline.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dner;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("dner_test_" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Entity ent(const std::string& type, std::vector<Span> spans) {
  Entity e;
  e.etype = std::move(type);
  e.spans = std::move(spans);
  return e;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.emb_dim = 8;
  cfg.word_hidden = 8;
  cfg.span_hidden = 6;
  cfg.entity_hidden = 4;
  cfg.max_seg_len = 2;
  cfg.max_merge_segments = 3;
  cfg.dropout = 0.1;
  cfg.lr = 0.01;
  cfg.epochs = 3;
  cfg.patience = 8;
  cfg.seed = 1;
  return cfg;
}

std::vector<AnnotatedSentence> tiny_corpus() {
  GenConfig gc;
  gc.seed = 7;
  gc.sentences = 30;
  gc.filler_vocab = 12;
  gc.max_segment_len = 2;
  return generate_corpus(gc);
}

}  // namespace

TEST(CorpusIo, WriteThenReadRoundTrips) {
  TempDir dir;
  std::vector<AnnotatedSentence> corpus(3);
  corpus[0].tokens = {"a", "b", "c", "d"};
  corpus[0].entities = {ent("disorder", {{0, 1}}), ent("disorder", {{0, 1}, {3, 3}})};
  corpus[1].tokens = {"only", "text"};
  corpus[2].tokens = {"x"};
  corpus[2].entities = {ent("finding", {{0, 0}})};
  auto path = (dir.path / "c.jsonl").string();
  write_corpus(path, corpus);
  auto back = read_corpus(path);
  ASSERT_EQ(back.size(), corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) EXPECT_EQ(serialize(back[i]), serialize(corpus[i]));
}

TEST(CorpusIo, SkipsBlankLinesAndReportsMissingFiles) {
  TempDir dir;
  auto path = (dir.path / "gaps.jsonl").string();
  {
    std::ofstream out(path);
    out << "\n" << R"({"tokens":["hi"],"entities":[]})" << "\n\n";
  }
  auto back = read_corpus(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].tokens, std::vector<std::string>{"hi"});
  EXPECT_THROW(read_corpus((dir.path / "absent.jsonl").string()), std::runtime_error);
}

TEST(Heuristic, ParsesKnownNamesOnly) {
  EXPECT_EQ(parse_heuristic("enough"), MergeHeuristic::Enough);
  EXPECT_EQ(parse_heuristic("all"), MergeHeuristic::All);
  EXPECT_THROW(parse_heuristic("most"), std::invalid_argument);
}

TEST(Checkpoint, JointRoundTripIsBitExact) {
  TempDir dir;
  auto cfg = tiny_config();
  cfg.shared_encoder = false;
  std::vector<std::string> types = {"disorder", "finding"};
  std::vector<AnnotatedSentence> seedtext(1);
  seedtext[0].tokens = {"alpha", "beta", "gamma"};
  Vocab vocab = Vocab::build(seedtext);

  auto model = make_joint_model<double>(cfg, types, vocab.size());
  std::mt19937_64 rng(11);
  init_joint_model(*model, rng);

  nlohmann::json history = nlohmann::json::array();
  history.push_back({{"epoch", 1}, {"dev_f1", 0.5}});
  auto path = (dir.path / "joint.ckpt").string();
  save_checkpoint(path, "joint", cfg, types, vocab, history, model->params);

  auto lm = load_checkpoint(path);
  EXPECT_EQ(lm.kind, "joint");
  EXPECT_EQ(lm.types, types);
  EXPECT_EQ(lm.vocab.tokens(), vocab.tokens());
  EXPECT_EQ(lm.cfg.shared_encoder, false);
  EXPECT_EQ(lm.cfg.emb_dim, cfg.emb_dim);
  EXPECT_EQ(lm.history, history);
  ASSERT_NE(lm.joint, nullptr);
  EXPECT_EQ(lm.crf, nullptr);
  ASSERT_EQ(lm.joint->params.count(), model->params.count());
  for (size_t p = 0; p < model->params.count(); ++p) {
    const auto& a = model->params[p];
    const auto& b = lm.joint->params[p];
    EXPECT_EQ(a.name, b.name);
    ASSERT_EQ(a.value.size(), b.value.size());
    EXPECT_EQ(0, std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(double)))
        << a.name;
  }
}

TEST(Checkpoint, CrfRoundTripIsBitExact) {
  TempDir dir;
  auto cfg = tiny_config();
  std::vector<std::string> types = {"disorder"};
  std::vector<AnnotatedSentence> seedtext(1);
  seedtext[0].tokens = {"alpha", "beta"};
  Vocab vocab = Vocab::build(seedtext);

  auto model = make_crf_model<double>(cfg, types, vocab.size());
  std::mt19937_64 rng(12);
  init_crf_model(*model, rng);
  auto path = (dir.path / "crf.ckpt").string();
  save_checkpoint(path, "crf", cfg, types, vocab, nlohmann::json::array(), model->params);

  auto lm = load_checkpoint(path);
  EXPECT_EQ(lm.kind, "crf");
  ASSERT_NE(lm.crf, nullptr);
  EXPECT_EQ(lm.joint, nullptr);
  ASSERT_EQ(lm.crf->params.count(), model->params.count());
  for (size_t p = 0; p < model->params.count(); ++p) {
    const auto& a = model->params[p];
    const auto& b = lm.crf->params[p];
    ASSERT_EQ(a.value.size(), b.value.size());
    EXPECT_EQ(0, std::memcmp(a.value.data(), b.value.data(), a.value.size() * sizeof(double)))
        << a.name;
  }
}

TEST(Checkpoint, RejectsGarbageVersionAndTruncation) {
  TempDir dir;
  auto bad = (dir.path / "bad.ckpt").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOTACKPTjunkjunkjunk";
  }
  EXPECT_THROW(load_checkpoint(bad), std::runtime_error);

  auto vers = (dir.path / "vers.ckpt").string();
  {
    std::ofstream out(vers, std::ios::binary);
    out.write(kCheckpointMagic, 8);
    uint32_t version = 99, hlen = 0;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
  }
  EXPECT_THROW(load_checkpoint(vers), std::runtime_error);

  auto cfg = tiny_config();
  std::vector<std::string> types = {"disorder"};
  std::vector<AnnotatedSentence> seedtext(1);
  seedtext[0].tokens = {"alpha"};
  Vocab vocab = Vocab::build(seedtext);
  auto model = make_crf_model<double>(cfg, types, vocab.size());
  std::mt19937_64 rng(13);
  init_crf_model(*model, rng);
  auto full = (dir.path / "full.ckpt").string();
  save_checkpoint(full, "crf", cfg, types, vocab, nlohmann::json::array(), model->params);

  std::string bytes = slurp(full);
  ASSERT_GT(bytes.size(), 200u);
  auto headcut = (dir.path / "headcut.ckpt").string();
  {
    std::ofstream out(headcut, std::ios::binary);
    out.write(bytes.data(), 40);
  }
  EXPECT_THROW(load_checkpoint(headcut), std::runtime_error);
  auto tailcut = (dir.path / "tailcut.ckpt").string();
  {
    std::ofstream out(tailcut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  EXPECT_THROW(load_checkpoint(tailcut), std::runtime_error);
  EXPECT_THROW(load_checkpoint((dir.path / "nope.ckpt").string()), std::runtime_error);
}

TEST(Training, JointSmokeRunLearnsAndPredictsWellFormedEntities) {
  auto corpus = tiny_corpus();
  std::vector<AnnotatedSentence> train(corpus.begin(), corpus.begin() + 24);
  std::vector<AnnotatedSentence> dev(corpus.begin() + 24, corpus.end());

  std::ostringstream log;
  auto trained = train_joint(tiny_config(), train, dev, log);
  ASSERT_GE(trained.outcome.history.size(), 1u);
  double first = trained.outcome.history[0].at("train_loss").get<double>();
  double later_min = first;
  for (const auto& row : trained.outcome.history) {
    double l = row.at("train_loss").get<double>();
    EXPECT_TRUE(std::isfinite(l));
    later_min = std::min(later_min, l);
  }
  EXPECT_LT(later_min, first);
  EXPECT_GE(trained.outcome.best_dev_f1, 0.0);
  EXPECT_LE(trained.outcome.best_dev_f1, 1.0);
  EXPECT_NE(log.str().find("epoch"), std::string::npos);

  std::vector<AnnotatedSentence> query = dev;
  query.push_back(AnnotatedSentence{});
  auto preds = predict_corpus(*trained.model, trained.vocab, query);
  ASSERT_EQ(preds.size(), query.size());
  EXPECT_TRUE(preds.back().entities.empty());
  for (size_t s = 0; s < preds.size(); ++s) {
    EXPECT_EQ(preds[s].tokens, query[s].tokens);
    for (const auto& e : preds[s].entities) {
      validate_entity(e, static_cast<int>(preds[s].tokens.size()), "pred");
      EXPECT_TRUE(e.etype == "disorder");
    }
  }
}

TEST(Training, CrfSmokeRunPredictsWithBothHeuristics) {
  auto corpus = tiny_corpus();
  std::vector<AnnotatedSentence> train(corpus.begin(), corpus.begin() + 24);
  std::vector<AnnotatedSentence> dev(corpus.begin() + 24, corpus.end());

  auto cfg = tiny_config();
  cfg.epochs = 2;
  std::ostringstream log;
  auto trained = train_crf(cfg, train, dev, MergeHeuristic::Enough, log);
  ASSERT_GE(trained.outcome.history.size(), 1u);
  for (const auto& row : trained.outcome.history)
    EXPECT_TRUE(std::isfinite(row.at("train_loss").get<double>()));

  for (auto heuristic : {MergeHeuristic::Enough, MergeHeuristic::All}) {
    auto preds = predict_corpus(*trained.model, trained.vocab, dev, heuristic);
    ASSERT_EQ(preds.size(), dev.size());
    for (size_t s = 0; s < preds.size(); ++s)
      for (const auto& e : preds[s].entities)
        validate_entity(e, static_cast<int>(preds[s].tokens.size()), "pred");
  }
}

TEST(Training, RepeatedRunsWriteIdenticalCheckpoints) {
  TempDir dir;
  auto corpus = tiny_corpus();
  std::vector<AnnotatedSentence> train(corpus.begin(), corpus.begin() + 20);
  std::vector<AnnotatedSentence> dev(corpus.begin() + 20, corpus.begin() + 26);
  auto cfg = tiny_config();
  cfg.epochs = 2;

  std::vector<std::string> paths;
  for (int run = 0; run < 2; ++run) {
    std::ostringstream log;
    auto trained = train_joint(cfg, train, dev, log);
    auto path = (dir.path / ("run" + std::to_string(run) + ".ckpt")).string();
    save_checkpoint(path, "joint", cfg, trained.model->types, trained.vocab,
                    trained.outcome.history, trained.model->params);
    paths.push_back(path);
  }
  auto a = slurp(paths[0]), b = slurp(paths[1]);
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST(Training, RejectsEmptyOrTypelessCorpus) {
  std::ostringstream log;
  std::vector<AnnotatedSentence> none;
  EXPECT_THROW(train_joint(tiny_config(), none, none, log), std::invalid_argument);
  std::vector<AnnotatedSentence> untyped(2);
  untyped[0].tokens = {"plain", "words"};
  untyped[1].tokens = {"more", "words"};
  EXPECT_THROW(train_joint(tiny_config(), untyped, untyped, log), std::invalid_argument);
  EXPECT_THROW(train_crf(tiny_config(), none, none, MergeHeuristic::All, log),
               std::invalid_argument);
}

TEST(Training, OversizedGoldSegmentIsReportedUpFront) {
  std::vector<AnnotatedSentence> train(1);
  train[0].tokens = {"a", "b", "c", "d", "e"};
  train[0].entities = {ent("disorder", {{0, 3}})};
  auto cfg = tiny_config();
  ASSERT_LT(cfg.max_seg_len, 4);
  std::ostringstream log;
  EXPECT_THROW(train_joint(cfg, train, train, log), std::invalid_argument);
}

TEST(SplitEncoder, MergeLossTouchesOnlyMergerParameters) {
  auto cfg = tiny_config();
  cfg.shared_encoder = false;
  std::vector<std::string> types = {"disorder"};
  auto model = make_joint_model<double>(cfg, types, 10);
  std::mt19937_64 rng(5);
  init_joint_model(*model, rng);
  EXPECT_TRUE(model->params.has("menc.emb"));

  std::vector<int> ids = {1, 2, 3, 4};
  std::vector<Entity> gold = {ent("disorder", {{0, 1}}), ent("disorder", {{3, 3}})};
  auto segments = to_typed(derive_gold_segments(gold), types);
  auto candidates = enumerate_candidates(segments, cfg.max_merge_segments);
  auto labels = gold_merge_labels(candidates, gold, types);
  ASSERT_EQ(candidates.size(), 3u);

  SegmentalHypergraph g(4, cfg.max_seg_len, 1);
  TapeT<double> tape;
  std::mt19937_64 rng2(6);
  auto loss = joint_sentence_loss<double>(tape, *model, g, std::span<const int>(ids), segments,
                                          candidates, std::span<const char>(labels), rng2, false);
  EXPECT_TRUE(std::isfinite(tape.scalar(loss.total)));
  EXPECT_GT(tape.scalar(loss.seg_nll), 0.0);

  model->params.zero_grad();
  tape.backward(loss.merge_nll);
  bool menc_hit = false, merge_hit = false;
  for (size_t p = 0; p < model->params.count(); ++p) {
    const auto& t = model->params[p];
    double sum = 0;
    for (double gv : t.grad) sum += std::abs(gv);
    bool extractor = t.name.rfind("enc.", 0) == 0 || t.name.rfind("edge.", 0) == 0;
    if (extractor) EXPECT_EQ(sum, 0.0) << t.name;
    if (t.name.rfind("menc.", 0) == 0 && sum > 0) menc_hit = true;
    if (t.name.rfind("merge.", 0) == 0 && sum > 0) merge_hit = true;
  }
  EXPECT_TRUE(menc_hit);
  EXPECT_TRUE(merge_hit);
}

TEST(SplitEncoder, SharedModeFeedsMergeGradientsIntoTheOneEncoder) {
  auto cfg = tiny_config();
  ASSERT_TRUE(cfg.shared_encoder);
  std::vector<std::string> types = {"disorder"};
  auto model = make_joint_model<double>(cfg, types, 10);
  std::mt19937_64 rng(5);
  init_joint_model(*model, rng);
  EXPECT_FALSE(model->params.has("menc.emb"));

  std::vector<int> ids = {1, 2, 3, 4};
  std::vector<Entity> gold = {ent("disorder", {{0, 1}}), ent("disorder", {{3, 3}})};
  auto segments = to_typed(derive_gold_segments(gold), types);
  auto candidates = enumerate_candidates(segments, cfg.max_merge_segments);
  auto labels = gold_merge_labels(candidates, gold, types);

  SegmentalHypergraph g(4, cfg.max_seg_len, 1);
  TapeT<double> tape;
  std::mt19937_64 rng2(6);
  auto loss = joint_sentence_loss<double>(tape, *model, g, std::span<const int>(ids), segments,
                                          candidates, std::span<const char>(labels), rng2, false);
  model->params.zero_grad();
  tape.backward(loss.merge_nll);
  double enc_sum = 0;
  for (size_t p = 0; p < model->params.count(); ++p) {
    const auto& t = model->params[p];
    if (t.name.rfind("enc.", 0) == 0)
      for (double gv : t.grad) enc_sum += std::abs(gv);
  }
  EXPECT_GT(enc_sum, 0.0);
}
