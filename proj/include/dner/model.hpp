#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dner/config.hpp"
#include "dner/corpus.hpp"
#include "dner/crf.hpp"
#include "dner/hypergraph.hpp"
#include "dner/merger.hpp"
#include "dner/nn.hpp"
#include "dner/tags.hpp"
#include "dner/tape.hpp"
#include "dner/tensor.hpp"
#include "dner/vocab.hpp"

namespace dner {

// Embedding plus the two sequence encoders feeding it: word level gives a
// per-position vector, span level a summary per (start, end).
template <typename Real>
struct EncoderT {
  TensorT<Real>* embedding = nullptr;
  BiLstmParamsT<Real> word;
  BiLstmParamsT<Real> span;
};

template <typename Real>
EncoderT<Real> add_encoder(ParamStoreT<Real>& store, const std::string& prefix, int vocab,
                           int emb, int word_hidden, int span_hidden) {
  EncoderT<Real> e;
  e.embedding = &store.add(prefix + ".emb", vocab, emb);
  e.word = add_bilstm(store, prefix + ".word", emb, word_hidden);
  e.span = add_bilstm(store, prefix + ".span", 2 * word_hidden, span_hidden);
  return e;
}

template <typename Real>
void init_encoder(EncoderT<Real>& e, std::mt19937_64& rng) {
  init_uniform(*e.embedding, rng);
  init_bilstm(e.word, rng);
  init_bilstm(e.span, rng);
}

// Per-sentence activations of one encoder.
template <typename Real>
struct EncodedSentenceT {
  std::vector<typename TapeT<Real>::Var> hw;
  std::unique_ptr<SpanTableT<Real>> spans;
};

template <typename Real>
EncodedSentenceT<Real> run_encoder(TapeT<Real>& tape, const EncoderT<Real>& enc,
                                   std::span<const int> token_ids, int max_seg_len, Real drop,
                                   std::mt19937_64& rng, bool training) {
  using Var = typename TapeT<Real>::Var;
  std::vector<Var> xs;
  xs.reserve(token_ids.size());
  for (int id : token_ids)
    xs.push_back(dropout(tape, tape.lookup(*enc.embedding, id), drop, rng, training));
  EncodedSentenceT<Real> out;
  out.hw = encode_words<Real>(tape, enc.word, xs);
  for (auto& h : out.hw) h = dropout(tape, h, drop, rng, training);
  out.spans = std::make_unique<SpanTableT<Real>>(tape, enc.span, std::span<const Var>(out.hw),
                                                 max_seg_len);
  return out;
}

// Segment extractor + segment merger with a configurable split of the
// encoder stack between the two halves.
template <typename Real>
struct JointModelT {
  TrainConfig cfg;
  std::vector<std::string> types;
  int vocab_size = 0;

  ParamStoreT<Real> params;
  EncoderT<Real> enc;
  EncoderT<Real> menc;  // aliases enc when cfg.shared_encoder
  BiLstmParamsT<Real> entity;
  TensorT<Real>* merge_w = nullptr;
  TensorT<Real>* merge_b = nullptr;

  TensorT<Real>* w_a_skip = nullptr;
  TensorT<Real>* b_a_skip = nullptr;
  TensorT<Real>* w_a_start = nullptr;
  TensorT<Real>* b_a_start = nullptr;
  TensorT<Real>* w_e_skip = nullptr;
  TensorT<Real>* b_e_skip = nullptr;
  TensorT<Real>* w_e_take = nullptr;
  TensorT<Real>* b_e_take = nullptr;
  TensorT<Real>* w_t_start = nullptr;
  TensorT<Real>* b_t_start = nullptr;
  TensorT<Real>* w_i_end = nullptr;
  TensorT<Real>* b_i_end = nullptr;
  TensorT<Real>* w_i_cont = nullptr;
  TensorT<Real>* b_i_cont = nullptr;
  TensorT<Real>* w_i_end_cont = nullptr;
  TensorT<Real>* b_i_end_cont = nullptr;
};

template <typename Real>
std::unique_ptr<JointModelT<Real>> make_joint_model(const TrainConfig& cfg,
                                                    const std::vector<std::string>& types,
                                                    int vocab_size) {
  cfg.validate();
  if (types.empty()) throw std::invalid_argument("joint model: need at least one entity type");
  auto model = std::make_unique<JointModelT<Real>>();
  model->cfg = cfg;
  model->types = types;
  model->vocab_size = vocab_size;
  auto& P = model->params;
  const int m = static_cast<int>(types.size());
  const int wdim = 2 * cfg.word_hidden;
  const int sdim = 2 * cfg.span_hidden;

  model->enc = add_encoder(P, "enc", vocab_size, cfg.emb_dim, cfg.word_hidden, cfg.span_hidden);
  model->w_a_skip = &P.add("edge.a_skip.w", 1, wdim);
  model->b_a_skip = &P.add("edge.a_skip.b", 1);
  model->w_a_start = &P.add("edge.a_start.w", 1, wdim);
  model->b_a_start = &P.add("edge.a_start.b", 1);
  model->w_e_skip = &P.add("edge.e_skip.w", m, wdim);
  model->b_e_skip = &P.add("edge.e_skip.b", m);
  model->w_e_take = &P.add("edge.e_take.w", m, wdim);
  model->b_e_take = &P.add("edge.e_take.b", m);
  model->w_t_start = &P.add("edge.t_start.w", m, wdim);
  model->b_t_start = &P.add("edge.t_start.b", m);
  model->w_i_end = &P.add("edge.i_end.w", m, sdim + wdim);
  model->b_i_end = &P.add("edge.i_end.b", m);
  model->w_i_cont = &P.add("edge.i_cont.w", m, sdim + wdim);
  model->b_i_cont = &P.add("edge.i_cont.b", m);
  model->w_i_end_cont = &P.add("edge.i_end_cont.w", m, sdim + wdim);
  model->b_i_end_cont = &P.add("edge.i_end_cont.b", m);

  if (cfg.shared_encoder)
    model->menc = model->enc;
  else
    model->menc =
        add_encoder(P, "menc", vocab_size, cfg.emb_dim, cfg.word_hidden, cfg.span_hidden);
  model->entity = add_bilstm(P, "entity", sdim, cfg.entity_hidden);
  model->merge_w = &P.add("merge.w", 1, 2 * cfg.entity_hidden);
  model->merge_b = &P.add("merge.b", 1);
  return model;
}

template <typename Real>
void init_joint_model(JointModelT<Real>& model, std::mt19937_64& rng) {
  init_encoder(model.enc, rng);
  for (TensorT<Real>* w : {model.w_a_skip, model.w_a_start, model.w_e_skip, model.w_e_take,
                           model.w_t_start, model.w_i_end, model.w_i_cont, model.w_i_end_cont,
                           model.merge_w})
    init_uniform(*w, rng);
  if (!model.cfg.shared_encoder) init_encoder(model.menc, rng);
  init_bilstm(model.entity, rng);
}

// One score var per hyperedge. Edges sharing (family, type, position) read
// the same var, so a derivation using both gadget rows still counts the
// slot once per edge.
template <typename Real>
std::vector<typename TapeT<Real>::Var> edge_score_vars(TapeT<Real>& tape,
                                                       const JointModelT<Real>& model,
                                                       const SegmentalHypergraph& g,
                                                       const EncodedSentenceT<Real>& enc) {
  using Var = typename TapeT<Real>::Var;
  const int n = g.n();
  std::vector<Var> a_skip(n), a_start(n), e_skip(n), e_take(n), t_start(n);
  for (int i = 0; i < n; ++i) {
    a_skip[i] = tape.affine(*model.w_a_skip, *model.b_a_skip, enc.hw[i]);
    a_start[i] = tape.affine(*model.w_a_start, *model.b_a_start, enc.hw[i]);
    e_skip[i] = tape.affine(*model.w_e_skip, *model.b_e_skip, enc.hw[i]);
    e_take[i] = tape.affine(*model.w_e_take, *model.b_e_take, enc.hw[i]);
    t_start[i] = tape.affine(*model.w_t_start, *model.b_t_start, enc.hw[i]);
  }
  std::vector<Var> key_vars(g.keys().size());
  std::vector<Var> seg_feat(static_cast<size_t>(n) * g.c());
  std::vector<Var> i_end(seg_feat.size()), i_cont(seg_feat.size()), i_end_cont(seg_feat.size());
  std::vector<char> seg_done(seg_feat.size(), 0);
  for (size_t kk = 0; kk < g.keys().size(); ++kk) {
    const ScoreKey& key = g.keys()[kk];
    if (family_uses_span(key.family)) {
      size_t cell = static_cast<size_t>(key.i) * g.c() + (key.j - key.i);
      if (!seg_done[cell]) {
        Var feat = tape.concat2(enc.spans->at(key.i, key.j), enc.hw[key.j]);
        i_end[cell] = tape.affine(*model.w_i_end, *model.b_i_end, feat);
        i_cont[cell] = tape.affine(*model.w_i_cont, *model.b_i_cont, feat);
        i_end_cont[cell] = tape.affine(*model.w_i_end_cont, *model.b_i_end_cont, feat);
        seg_done[cell] = 1;
      }
      Var vec = key.family == EdgeFamily::IEnd
                    ? i_end[cell]
                    : (key.family == EdgeFamily::ICont ? i_cont[cell] : i_end_cont[cell]);
      key_vars[kk] = g.m() == 1 ? vec : tape.pick(vec, key.type);
    } else {
      switch (key.family) {
        case EdgeFamily::ASkip: key_vars[kk] = a_skip[key.i]; break;
        case EdgeFamily::AStart: key_vars[kk] = a_start[key.i]; break;
        case EdgeFamily::ESkip:
          key_vars[kk] = g.m() == 1 ? e_skip[key.i] : tape.pick(e_skip[key.i], key.type);
          break;
        case EdgeFamily::ETake:
          key_vars[kk] = g.m() == 1 ? e_take[key.i] : tape.pick(e_take[key.i], key.type);
          break;
        default:
          key_vars[kk] = g.m() == 1 ? t_start[key.i] : tape.pick(t_start[key.i], key.type);
          break;
      }
    }
  }
  std::vector<Var> scores(g.edges().size());
  for (size_t e = 0; e < g.edges().size(); ++e) scores[e] = key_vars[g.edges()[e].key];
  return scores;
}

// Merge logit per candidate: the candidate's segment summaries run through
// the entity encoder; a linear read-out of the rectified final state gives
// the log-odds of keeping the candidate as one entity.
template <typename Real>
std::vector<typename TapeT<Real>::Var> merge_logit_vars(TapeT<Real>& tape,
                                                        const JointModelT<Real>& model,
                                                        const std::vector<MergeCandidate>& cands,
                                                        const EncodedSentenceT<Real>& enc,
                                                        Real drop, std::mt19937_64& rng,
                                                        bool training) {
  using Var = typename TapeT<Real>::Var;
  std::vector<Var> logits;
  logits.reserve(cands.size());
  std::vector<Var> seq;
  for (const MergeCandidate& cand : cands) {
    seq.clear();
    for (const Span& sp : cand.spans) seq.push_back(enc.spans->at(sp.start, sp.end));
    Var he = encode_sequence<Real>(tape, model.entity, seq);
    he = dropout(tape, he, drop, rng, training);
    logits.push_back(tape.affine(*model.merge_w, *model.merge_b, tape.relu(he)));
  }
  return logits;
}

template <typename Real>
struct SentenceLossT {
  typename TapeT<Real>::Var total;
  typename TapeT<Real>::Var seg_nll;
  typename TapeT<Real>::Var merge_nll;
  size_t candidates = 0;
};

// Joint objective on one sentence: exact-extraction NLL over the
// hypergraph plus per-candidate merge cross entropy, candidates drawn
// from the gold segments.
template <typename Real>
SentenceLossT<Real> joint_sentence_loss(TapeT<Real>& tape, JointModelT<Real>& model,
                                        const SegmentalHypergraph& g,
                                        std::span<const int> token_ids,
                                        const std::vector<TypedSegment>& gold_segments,
                                        const std::vector<MergeCandidate>& candidates,
                                        std::span<const char> labels, std::mt19937_64& rng,
                                        bool training) {
  using Var = typename TapeT<Real>::Var;
  Real drop = static_cast<Real>(model.cfg.dropout);
  auto enc = run_encoder<Real>(tape, model.enc, token_ids, model.cfg.max_seg_len, drop, rng,
                               training);
  auto scores = edge_score_vars(tape, model, g, enc);
  SentenceLossT<Real> out;
  out.seg_nll = segment_nll_tape<Real>(tape, g, scores, gold_segments);

  const EncodedSentenceT<Real>* menc_ptr = &enc;
  EncodedSentenceT<Real> menc_own;
  if (!model.cfg.shared_encoder) {
    menc_own = run_encoder<Real>(tape, model.menc, token_ids, model.cfg.max_seg_len, drop, rng,
                                 training);
    menc_ptr = &menc_own;
  }
  if (candidates.empty()) {
    out.merge_nll = tape.zeros(1);
  } else {
    auto logits = merge_logit_vars(tape, model, candidates, *menc_ptr, drop, rng, training);
    std::vector<Var> terms;
    terms.reserve(logits.size());
    for (size_t c = 0; c < logits.size(); ++c)
      terms.push_back(tape.bce_with_logit(logits[c], Real(labels[c])));
    out.merge_nll = tape.sum(terms);
  }
  out.total = tape.add(out.seg_nll, out.merge_nll);
  out.candidates = candidates.size();
  return out;
}

// Full two-stage prediction: exact segments from the best hyperpath, then
// entities from the merge decisions over those segments.
template <typename Real>
std::vector<Entity> joint_predict(JointModelT<Real>& model, std::span<const int> token_ids,
                                  std::vector<TypedSegment>* segments_out = nullptr) {
  TapeT<Real> tape;
  std::mt19937_64 rng(0);
  auto enc = run_encoder<Real>(tape, model.enc, token_ids, model.cfg.max_seg_len, Real(0), rng,
                               false);
  SegmentalHypergraph g(static_cast<int>(token_ids.size()), model.cfg.max_seg_len,
                        static_cast<int>(model.types.size()));
  auto score_vars = edge_score_vars(tape, model, g, enc);
  std::vector<Real> scores(score_vars.size());
  for (size_t e = 0; e < score_vars.size(); ++e) scores[e] = tape.scalar(score_vars[e]);
  auto segments = decode_segments<Real>(g, scores);
  if (segments_out) *segments_out = segments;
  if (segments.empty()) return {};

  auto candidates = enumerate_candidates(segments, model.cfg.max_merge_segments);
  const EncodedSentenceT<Real>* menc_ptr = &enc;
  EncodedSentenceT<Real> menc_own;
  if (!model.cfg.shared_encoder) {
    menc_own =
        run_encoder<Real>(tape, model.menc, token_ids, model.cfg.max_seg_len, Real(0), rng, false);
    menc_ptr = &menc_own;
  }
  auto logit_vars = merge_logit_vars(tape, model, candidates, *menc_ptr, Real(0), rng, false);
  std::vector<Real> logits(logit_vars.size());
  for (size_t c = 0; c < logit_vars.size(); ++c) logits[c] = tape.scalar(logit_vars[c]);
  auto sel = select_candidates<Real>(std::span<const Real>(logits));
  return entities_from_selection(candidates, sel, model.types);
}

// Tag-level baseline: word encoder, per-position tag scores, tag chain.
template <typename Real>
struct CrfModelT {
  TrainConfig cfg;
  std::vector<std::string> types;
  int vocab_size = 0;
  TagMask mask;

  ParamStoreT<Real> params;
  TensorT<Real>* embedding = nullptr;
  BiLstmParamsT<Real> word;
  TensorT<Real>* emit_w = nullptr;
  TensorT<Real>* emit_b = nullptr;
  TensorT<Real>* trans = nullptr;
  TensorT<Real>* start = nullptr;
};

template <typename Real>
std::unique_ptr<CrfModelT<Real>> make_crf_model(const TrainConfig& cfg,
                                                const std::vector<std::string>& types,
                                                int vocab_size) {
  cfg.validate();
  if (types.empty()) throw std::invalid_argument("crf model: need at least one entity type");
  auto model = std::make_unique<CrfModelT<Real>>();
  model->cfg = cfg;
  model->types = types;
  model->vocab_size = vocab_size;
  model->mask = make_tag_mask(static_cast<int>(types.size()));
  const int T = model->mask.num;
  auto& P = model->params;
  model->embedding = &P.add("emb", vocab_size, cfg.emb_dim);
  model->word = add_bilstm(P, "word", cfg.emb_dim, cfg.word_hidden);
  model->emit_w = &P.add("emit.w", T, 2 * cfg.word_hidden);
  model->emit_b = &P.add("emit.b", T);
  model->trans = &P.add("trans", T, T);
  model->start = &P.add("start", T);
  return model;
}

template <typename Real>
void init_crf_model(CrfModelT<Real>& model, std::mt19937_64& rng) {
  init_uniform(*model.embedding, rng);
  init_bilstm(model.word, rng);
  init_uniform(*model.emit_w, rng);
}

template <typename Real>
std::vector<typename TapeT<Real>::Var> crf_emit_vars(TapeT<Real>& tape, CrfModelT<Real>& model,
                                                     std::span<const int> token_ids, Real drop,
                                                     std::mt19937_64& rng, bool training) {
  using Var = typename TapeT<Real>::Var;
  std::vector<Var> xs;
  xs.reserve(token_ids.size());
  for (int id : token_ids)
    xs.push_back(dropout(tape, tape.lookup(*model.embedding, id), drop, rng, training));
  auto hw = encode_words<Real>(tape, model.word, xs);
  std::vector<Var> emits;
  emits.reserve(hw.size());
  for (auto& h : hw) {
    Var hd = dropout(tape, h, drop, rng, training);
    emits.push_back(tape.affine(*model.emit_w, *model.emit_b, hd));
  }
  return emits;
}

template <typename Real>
typename TapeT<Real>::Var crf_sentence_loss(TapeT<Real>& tape, CrfModelT<Real>& model,
                                            std::span<const int> token_ids,
                                            const std::vector<int>& tags, std::mt19937_64& rng,
                                            bool training) {
  auto emits = crf_emit_vars(tape, model, token_ids, static_cast<Real>(model.cfg.dropout), rng,
                             training);
  return crf_nll_tape<Real>(tape, std::span<const typename TapeT<Real>::Var>(emits), *model.trans,
                            *model.start, tags, model.mask);
}

template <typename Real>
std::vector<int> crf_predict_tags(CrfModelT<Real>& model, std::span<const int> token_ids) {
  TapeT<Real> tape;
  std::mt19937_64 rng(0);
  auto emit_vars = crf_emit_vars(tape, model, token_ids, Real(0), rng, false);
  const int T = model.mask.num;
  std::vector<Real> emit(emit_vars.size() * T);
  for (size_t t = 0; t < emit_vars.size(); ++t) {
    auto v = tape.value(emit_vars[t]);
    std::copy(v.begin(), v.end(), emit.begin() + t * T);
  }
  return crf_viterbi<Real>(std::span<const Real>(emit), static_cast<int>(token_ids.size()),
                           std::span<const Real>(model.trans->value),
                           std::span<const Real>(model.start->value), model.mask);
}

}  // namespace dner
