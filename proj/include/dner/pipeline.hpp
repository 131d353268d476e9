#pragma once

#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dner/config.hpp"
#include "dner/corpus.hpp"
#include "dner/eval.hpp"
#include "dner/model.hpp"
#include "dner/optim.hpp"
#include "dner/vocab.hpp"

namespace dner {

inline std::vector<AnnotatedSentence> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<AnnotatedSentence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_jsonl(line, line_no));
  }
  return out;
}

inline void write_corpus(const std::string& path, const std::vector<AnnotatedSentence>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& s : corpus) out << serialize(s) << "\n";
}

enum class MergeHeuristic { Enough, All };

inline MergeHeuristic parse_heuristic(const std::string& name) {
  if (name == "enough") return MergeHeuristic::Enough;
  if (name == "all") return MergeHeuristic::All;
  throw std::invalid_argument("unknown heuristic: " + name + " (expected enough or all)");
}

// ---- checkpoint container ----------------------------------------------
// 8-byte magic, u32 version, u32 header length, JSON header, then one raw
// little-endian float64 block per parameter in manifest order.

constexpr char kCheckpointMagic[8] = {'D', 'I', 'S', 'C', 'O', 'C', 'K', 'P'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename Real>
void save_checkpoint(const std::string& path, const std::string& kind, const TrainConfig& cfg,
                     const std::vector<std::string>& types, const Vocab& vocab,
                     const nlohmann::json& history, const ParamStoreT<Real>& params) {
  nlohmann::json manifest = nlohmann::json::array();
  for (size_t p = 0; p < params.count(); ++p) {
    const TensorT<Real>& t = params[p];
    manifest.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }
  nlohmann::json header = {{"kind", kind},       {"config", to_json(cfg)},
                           {"types", types},     {"vocab", vocab.tokens()},
                           {"history", history}, {"params", manifest}};
  std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  uint32_t version = kCheckpointVersion;
  uint32_t hlen = static_cast<uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<double> buf;
  for (size_t p = 0; p < params.count(); ++p) {
    const TensorT<Real>& t = params[p];
    buf.assign(t.value.begin(), t.value.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

struct LoadedModel {
  std::string kind;
  TrainConfig cfg;
  std::vector<std::string> types;
  Vocab vocab;
  nlohmann::json history;
  std::unique_ptr<JointModelT<double>> joint;
  std::unique_ptr<CrfModelT<double>> crf;
};

inline LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error(path + ": not a checkpoint file");
  uint32_t version = 0, hlen = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in || version != kCheckpointVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version");
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw std::runtime_error(path + ": truncated header");
  nlohmann::json header = nlohmann::json::parse(hs);

  LoadedModel lm;
  lm.kind = header.at("kind").get<std::string>();
  lm.cfg = config_from_json(header.at("config"));
  lm.types = header.at("types").get<std::vector<std::string>>();
  lm.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  lm.history = header.value("history", nlohmann::json::array());

  ParamStoreT<double>* store = nullptr;
  if (lm.kind == "joint") {
    lm.joint = make_joint_model<double>(lm.cfg, lm.types, lm.vocab.size());
    store = &lm.joint->params;
  } else if (lm.kind == "crf") {
    lm.crf = make_crf_model<double>(lm.cfg, lm.types, lm.vocab.size());
    store = &lm.crf->params;
  } else {
    throw std::runtime_error(path + ": unknown model kind " + lm.kind);
  }

  const nlohmann::json& manifest = header.at("params");
  if (manifest.size() != store->count())
    throw std::runtime_error(path + ": parameter manifest does not match this build");
  for (size_t p = 0; p < store->count(); ++p) {
    TensorT<double>& t = (*store)[p];
    const nlohmann::json& m = manifest[p];
    if (m.at("name").get<std::string>() != t.name || m.at("rows").get<int>() != t.rows ||
        m.at("cols").get<int>() != t.cols)
      throw std::runtime_error(path + ": manifest entry " + std::to_string(p) +
                               " does not match parameter " + t.name);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated parameter block for " + t.name);
  }
  return lm;
}

// ---- training ------------------------------------------------------------

template <typename Real>
std::vector<std::vector<Real>> snapshot_params(const ParamStoreT<Real>& params) {
  std::vector<std::vector<Real>> snap(params.count());
  for (size_t p = 0; p < params.count(); ++p) snap[p] = params[p].value;
  return snap;
}

template <typename Real>
void restore_params(ParamStoreT<Real>& params, const std::vector<std::vector<Real>>& snap) {
  for (size_t p = 0; p < params.count(); ++p) params[p].value = snap[p];
}

namespace detail {

inline std::vector<int> token_ids(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids(tokens.size());
  for (size_t t = 0; t < tokens.size(); ++t) ids[t] = vocab.id(tokens[t]);
  return ids;
}

// Rare-word substitution: training occurrences of low-frequency tokens
// flip to the unknown id so the unknown embedding gets trained.
inline std::vector<int> with_unks(const std::vector<int>& ids, const Vocab& vocab,
                                  const TrainConfig& cfg, std::mt19937_64& rng) {
  std::vector<int> out = ids;
  if (cfg.unk_prob <= 0) return out;
  std::bernoulli_distribution flip(cfg.unk_prob);
  for (int& id : out)
    if (id != Vocab::kUnk && vocab.frequency(id) <= cfg.unk_max_freq && flip(rng))
      id = Vocab::kUnk;
  return out;
}

class HypergraphCache {
 public:
  HypergraphCache(int c, int m) : c_(c), m_(m) {}
  const SegmentalHypergraph& get(int n) {
    auto it = cache_.find(n);
    if (it == cache_.end())
      it = cache_.emplace(n, std::make_unique<SegmentalHypergraph>(n, c_, m_)).first;
    return *it->second;
  }

 private:
  int c_, m_;
  std::map<int, std::unique_ptr<SegmentalHypergraph>> cache_;
};

}  // namespace detail

template <typename Real>
std::vector<AnnotatedSentence> predict_corpus(JointModelT<Real>& model, const Vocab& vocab,
                                              const std::vector<AnnotatedSentence>& corpus) {
  std::vector<AnnotatedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    AnnotatedSentence p;
    p.tokens = s.tokens;
    if (!s.tokens.empty()) {
      auto ids = detail::token_ids(vocab, s.tokens);
      p.entities = joint_predict(model, std::span<const int>(ids));
    }
    out.push_back(std::move(p));
  }
  return out;
}

template <typename Real>
std::vector<AnnotatedSentence> predict_corpus(CrfModelT<Real>& model, const Vocab& vocab,
                                              const std::vector<AnnotatedSentence>& corpus,
                                              MergeHeuristic heuristic) {
  std::vector<AnnotatedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    AnnotatedSentence p;
    p.tokens = s.tokens;
    if (!s.tokens.empty()) {
      auto ids = detail::token_ids(vocab, s.tokens);
      auto tags = crf_predict_tags(model, std::span<const int>(ids));
      p.entities = heuristic == MergeHeuristic::Enough ? decode_tags_enough(tags, model.types)
                                                       : decode_tags_all(tags, model.types);
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct TrainOutcome {
  nlohmann::json history = nlohmann::json::array();
  double best_dev_f1 = 0;
  int best_epoch = 0;
};

struct JointTrained {
  std::unique_ptr<JointModelT<double>> model;
  Vocab vocab;
  TrainOutcome outcome;
};

inline JointTrained train_joint(const TrainConfig& cfg,
                                const std::vector<AnnotatedSentence>& train,
                                const std::vector<AnnotatedSentence>& dev, std::ostream& log) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train: empty training corpus");
  JointTrained out;
  out.vocab = Vocab::build(train);
  auto types = type_inventory(train);
  if (types.empty()) throw std::invalid_argument("train: no entity types in the training corpus");

  struct Prepared {
    std::vector<int> ids;
    std::vector<TypedSegment> segments;
    std::vector<MergeCandidate> candidates;
    std::vector<char> labels;
  };
  std::vector<Prepared> prep;
  prep.reserve(train.size());
  for (size_t s = 0; s < train.size(); ++s) {
    const auto& sent = train[s];
    if (sent.tokens.empty()) continue;
    Prepared p;
    p.ids = detail::token_ids(out.vocab, sent.tokens);
    p.segments = to_typed(derive_gold_segments(sent.entities), types);
    for (const auto& ts : p.segments)
      if (ts.span.length() > cfg.max_seg_len)
        throw std::invalid_argument("train: sentence " + std::to_string(s + 1) + " has a segment of " +
                                    std::to_string(ts.span.length()) +
                                    " tokens; raise max_seg_len");
    p.candidates = enumerate_candidates(p.segments, cfg.max_merge_segments);
    p.labels = gold_merge_labels(p.candidates, sent.entities, types);
    prep.push_back(std::move(p));
  }

  out.model = make_joint_model<double>(cfg, types, out.vocab.size());
  std::mt19937_64 master(cfg.seed);
  std::mt19937_64 rng_init(master());
  std::mt19937_64 rng_train(master());
  init_joint_model(*out.model, rng_init);
  AdamT<double> adam(out.model->params, cfg.lr, cfg.l2);
  detail::HypergraphCache graphs(cfg.max_seg_len, static_cast<int>(types.size()));

  std::vector<size_t> order(prep.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  TapeT<double> tape;
  std::vector<std::vector<double>> best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng_train);
    double loss_sum = 0, seg_sum = 0, merge_sum = 0;
    for (size_t i : order) {
      const Prepared& p = prep[i];
      auto ids = detail::with_unks(p.ids, out.vocab, cfg, rng_train);
      const auto& g = graphs.get(static_cast<int>(ids.size()));
      tape.reset();
      auto loss = joint_sentence_loss<double>(tape, *out.model, g, std::span<const int>(ids),
                                              p.segments, p.candidates,
                                              std::span<const char>(p.labels), rng_train, true);
      out.model->params.zero_grad();
      tape.backward(loss.total);
      adam.step();
      loss_sum += tape.scalar(loss.total);
      seg_sum += tape.scalar(loss.seg_nll);
      merge_sum += tape.scalar(loss.merge_nll);
    }
    double avg = loss_sum / static_cast<double>(prep.size());

    auto preds = predict_corpus(*out.model, out.vocab, dev);
    auto rep = evaluate_entities(dev, preds);
    double f1 = rep.overall.f1();
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto fmt = log.flags();
    auto prec = log.precision();
    log << "epoch " << std::setw(3) << epoch << "  loss " << std::fixed << std::setprecision(4)
        << avg << " (seg " << seg_sum / prep.size() << ", merge " << merge_sum / prep.size()
        << ")  dev P " << rep.overall.precision() << " R " << rep.overall.recall() << " F1 " << f1
        << "  [" << std::setprecision(1) << secs << "s]\n";
    log.flags(fmt);
    log.precision(prec);
    out.outcome.history.push_back({{"epoch", epoch},
                                   {"train_loss", avg},
                                   {"dev_precision", rep.overall.precision()},
                                   {"dev_recall", rep.overall.recall()},
                                   {"dev_f1", f1}});
    if (best.empty() || f1 > out.outcome.best_dev_f1) {
      out.outcome.best_dev_f1 = f1;
      out.outcome.best_epoch = epoch;
      best = snapshot_params(out.model->params);
    } else if (epoch - out.outcome.best_epoch >= cfg.patience) {
      log << "no dev improvement for " << cfg.patience << " epochs, stopping\n";
      break;
    }
  }
  if (!best.empty()) restore_params(out.model->params, best);
  return out;
}

struct CrfTrained {
  std::unique_ptr<CrfModelT<double>> model;
  Vocab vocab;
  TrainOutcome outcome;
};

inline CrfTrained train_crf(const TrainConfig& cfg, const std::vector<AnnotatedSentence>& train,
                            const std::vector<AnnotatedSentence>& dev, MergeHeuristic heuristic,
                            std::ostream& log) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train: empty training corpus");
  CrfTrained out;
  out.vocab = Vocab::build(train);
  auto types = type_inventory(train);
  if (types.empty()) throw std::invalid_argument("train: no entity types in the training corpus");

  struct Prepared {
    std::vector<int> ids;
    std::vector<int> tags;
  };
  std::vector<Prepared> prep;
  prep.reserve(train.size());
  for (const auto& sent : train) {
    if (sent.tokens.empty()) continue;
    prep.push_back(Prepared{detail::token_ids(out.vocab, sent.tokens), encode_tags(sent, types)});
  }

  out.model = make_crf_model<double>(cfg, types, out.vocab.size());
  std::mt19937_64 master(cfg.seed);
  std::mt19937_64 rng_init(master());
  std::mt19937_64 rng_train(master());
  init_crf_model(*out.model, rng_init);
  AdamT<double> adam(out.model->params, cfg.lr, cfg.l2);

  std::vector<size_t> order(prep.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  TapeT<double> tape;
  std::vector<std::vector<double>> best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng_train);
    double loss_sum = 0;
    for (size_t i : order) {
      auto ids = detail::with_unks(prep[i].ids, out.vocab, cfg, rng_train);
      tape.reset();
      auto loss = crf_sentence_loss<double>(tape, *out.model, std::span<const int>(ids),
                                            prep[i].tags, rng_train, true);
      out.model->params.zero_grad();
      tape.backward(loss);
      adam.step();
      loss_sum += tape.scalar(loss);
    }
    double avg = loss_sum / static_cast<double>(prep.size());

    auto preds = predict_corpus(*out.model, out.vocab, dev, heuristic);
    auto rep = evaluate_entities(dev, preds);
    double f1 = rep.overall.f1();
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto fmt = log.flags();
    auto prec = log.precision();
    log << "epoch " << std::setw(3) << epoch << "  loss " << std::fixed << std::setprecision(4)
        << avg << "  dev P " << rep.overall.precision() << " R " << rep.overall.recall() << " F1 "
        << f1 << "  [" << std::setprecision(1) << secs << "s]\n";
    log.flags(fmt);
    log.precision(prec);
    out.outcome.history.push_back({{"epoch", epoch},
                                   {"train_loss", avg},
                                   {"dev_precision", rep.overall.precision()},
                                   {"dev_recall", rep.overall.recall()},
                                   {"dev_f1", f1}});
    if (best.empty() || f1 > out.outcome.best_dev_f1) {
      out.outcome.best_dev_f1 = f1;
      out.outcome.best_epoch = epoch;
      best = snapshot_params(out.model->params);
    } else if (epoch - out.outcome.best_epoch >= cfg.patience) {
      log << "no dev improvement for " << cfg.patience << " epochs, stopping\n";
      break;
    }
  }
  if (!best.empty()) restore_params(out.model->params, best);
  return out;
}

}  // namespace dner
