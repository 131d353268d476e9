#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dner/config.hpp"
#include "dner/corpus.hpp"
#include "dner/eval.hpp"
#include "dner/generator.hpp"
#include "dner/hypergraph.hpp"
#include "dner/pipeline.hpp"

namespace {

// Hyperparameters shared by both trainers. Preset values apply first;
// every flag the user actually passed overrides the preset.
struct HyperOpts {
  std::string preset = "synthetic";
  int emb_dim = 0, word_hidden = 0, span_hidden = 0, entity_hidden = 0;
  int max_seg_len = 0, max_merge_segments = 0, epochs = 0, patience = 0, unk_max_freq = 0;
  double dropout = 0, l2 = 0, lr = 0, unk_prob = 0;
  uint64_t seed = 0;
  bool split_encoder = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "hyperparameter preset: synthetic or paper")
        ->capture_default_str();
    cmd->add_option("--emb-dim", emb_dim, "word embedding size");
    cmd->add_option("--word-hidden", word_hidden, "word encoder hidden size per direction");
    cmd->add_option("--span-hidden", span_hidden, "span encoder hidden size per direction");
    cmd->add_option("--entity-hidden", entity_hidden, "entity encoder hidden size per direction");
    cmd->add_option("--max-seg-len", max_seg_len, "longest segment, in tokens");
    cmd->add_option("--max-merge-segments", max_merge_segments,
                    "most segments one entity may combine");
    cmd->add_option("--dropout", dropout, "probability of dropping a unit");
    cmd->add_option("--l2", l2, "l2 penalty, applied with the gradient at each step");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--epochs", epochs, "maximum training epochs");
    cmd->add_option("--patience", patience, "epochs without dev improvement before stopping");
    cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--unk-prob", unk_prob, "chance of masking a rare training token");
    cmd->add_option("--unk-max-freq", unk_max_freq, "frequency at or below which a token is rare");
    cmd->add_flag("--split-encoder", split_encoder,
                  "give the merger its own encoder stack instead of sharing");
    cmd->set_config("--config", "", "key=value file; command line flags win");
  }

  dner::TrainConfig resolve(const CLI::App* cmd) const {
    dner::TrainConfig cfg = dner::preset_config(preset);
    if (cmd->count("--emb-dim")) cfg.emb_dim = emb_dim;
    if (cmd->count("--word-hidden")) cfg.word_hidden = word_hidden;
    if (cmd->count("--span-hidden")) cfg.span_hidden = span_hidden;
    if (cmd->count("--entity-hidden")) cfg.entity_hidden = entity_hidden;
    if (cmd->count("--max-seg-len")) cfg.max_seg_len = max_seg_len;
    if (cmd->count("--max-merge-segments")) cfg.max_merge_segments = max_merge_segments;
    if (cmd->count("--dropout")) cfg.dropout = dropout;
    if (cmd->count("--l2")) cfg.l2 = l2;
    if (cmd->count("--lr")) cfg.lr = lr;
    if (cmd->count("--epochs")) cfg.epochs = epochs;
    if (cmd->count("--patience")) cfg.patience = patience;
    if (cmd->count("--seed")) cfg.seed = seed;
    if (cmd->count("--unk-prob")) cfg.unk_prob = unk_prob;
    if (cmd->count("--unk-max-freq")) cfg.unk_max_freq = unk_max_freq;
    cfg.shared_encoder = !split_encoder;
    cfg.validate();
    return cfg;
  }
};

struct GenOpts {
  dner::GenConfig cfg;
  std::vector<std::string> types;
  std::string out;
  std::string out_prefix;
  std::vector<int> split;
};

void run_gen(const GenOpts& o) {
  dner::GenConfig cfg = o.cfg;
  if (!o.types.empty()) cfg.types = o.types;
  if (o.out.empty() == o.out_prefix.empty())
    throw std::runtime_error("gen-data: pass exactly one of --out or --out-prefix");
  auto corpus = dner::generate_corpus(cfg);
  if (!o.out.empty()) {
    dner::write_corpus(o.out, corpus);
    std::cout << "wrote " << corpus.size() << " sentences to " << o.out << "\n";
  } else {
    if (o.split.size() != 3)
      throw std::runtime_error("gen-data: --out-prefix needs --split A,B,C");
    int total = o.split[0] + o.split[1] + o.split[2];
    if (total != cfg.sentences)
      throw std::runtime_error("gen-data: --split sums to " + std::to_string(total) +
                               " but --sentences is " + std::to_string(cfg.sentences));
    const char* names[3] = {"train", "dev", "test"};
    size_t at = 0;
    for (int part = 0; part < 3; ++part) {
      std::vector<dner::AnnotatedSentence> chunk(corpus.begin() + at,
                                                 corpus.begin() + at + o.split[part]);
      at += o.split[part];
      std::string path = o.out_prefix + names[part] + ".jsonl";
      dner::write_corpus(path, chunk);
      std::cout << "wrote " << chunk.size() << " sentences to " << path << "\n";
    }
  }
  auto st = dner::corpus_stats(corpus);
  std::cout << "entities: " << st.entities << "  1-seg " << st.frac_segments(1) << "  2-seg "
            << st.frac_segments(2) << "  3-seg " << st.frac_segments(3)
            << "  overlap sentences " << st.frac_overlap_sentences() << "\n";
}

struct TrainOpts {
  HyperOpts hyper;
  std::string train_path, dev_path, test_path, model_out;
};

std::string fmt4(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  return ss.str();
}

void report_test(const std::string& test_path, const std::vector<dner::AnnotatedSentence>& preds) {
  auto gold = dner::read_corpus(test_path);
  auto rep = dner::evaluate_entities(gold, preds);
  std::cout << "test set results:\n";
  dner::print_report(rep, std::cout);
}

void run_train_joint(const TrainOpts& o, const CLI::App* cmd) {
  dner::TrainConfig cfg = o.hyper.resolve(cmd);
  auto train = dner::read_corpus(o.train_path);
  auto dev = dner::read_corpus(o.dev_path);
  auto res = dner::train_joint(cfg, train, dev, std::cout);
  dner::save_checkpoint(o.model_out, "joint", cfg, res.model->types, res.vocab,
                        res.outcome.history, res.model->params);
  std::cout << "best dev F1 " << fmt4(res.outcome.best_dev_f1) << " at epoch " << res.outcome.best_epoch
            << "; saved " << o.model_out << "\n";
  if (!o.test_path.empty())
    report_test(o.test_path, dner::predict_corpus(*res.model, res.vocab,
                                                  dner::read_corpus(o.test_path)));
}

void run_train_crf(const TrainOpts& o, const CLI::App* cmd, const std::string& heuristic) {
  dner::TrainConfig cfg = o.hyper.resolve(cmd);
  auto h = dner::parse_heuristic(heuristic);
  auto train = dner::read_corpus(o.train_path);
  auto dev = dner::read_corpus(o.dev_path);
  auto res = dner::train_crf(cfg, train, dev, h, std::cout);
  dner::save_checkpoint(o.model_out, "crf", cfg, res.model->types, res.vocab,
                        res.outcome.history, res.model->params);
  std::cout << "best dev F1 " << fmt4(res.outcome.best_dev_f1) << " at epoch " << res.outcome.best_epoch
            << "; saved " << o.model_out << "\n";
  if (!o.test_path.empty())
    report_test(o.test_path, dner::predict_corpus(*res.model, res.vocab,
                                                  dner::read_corpus(o.test_path), h));
}

struct PredictOpts {
  std::string model, input, out;
  std::string heuristic = "enough";
};

void run_predict(const PredictOpts& o) {
  auto lm = dner::load_checkpoint(o.model);
  auto corpus = dner::read_corpus(o.input);
  std::vector<dner::AnnotatedSentence> preds;
  if (lm.joint)
    preds = dner::predict_corpus(*lm.joint, lm.vocab, corpus);
  else
    preds = dner::predict_corpus(*lm.crf, lm.vocab, corpus, dner::parse_heuristic(o.heuristic));
  dner::write_corpus(o.out, preds);
  std::cout << "wrote predictions for " << preds.size() << " sentences to " << o.out << "\n";
}

struct EvalOpts {
  std::string gold, pred, json_out;
};

void run_eval(const EvalOpts& o) {
  auto rep = dner::evaluate_entities(dner::read_corpus(o.gold), dner::read_corpus(o.pred));
  dner::print_report(rep, std::cout);
  if (!o.json_out.empty()) {
    std::ofstream js(o.json_out);
    if (!js) throw std::runtime_error("cannot write " + o.json_out);
    js << dner::to_json(rep).dump(2) << "\n";
  }
}

struct InspectOpts {
  int tokens = 0;
  int max_seg_len = 3;
  int num_types = 1;
  std::vector<std::string> types;
};

void run_inspect(const InspectOpts& o) {
  int m = o.types.empty() ? o.num_types : static_cast<int>(o.types.size());
  dner::SegmentalHypergraph g(o.tokens, o.max_seg_len, m);
  dner::dump_hypergraph(g, o.types.empty() ? nullptr : &o.types, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage recognizer for discontiguous and overlapping entities"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic annotated corpus");
  g->add_option("--sentences", gen.cfg.sentences, "sentences to generate")->capture_default_str();
  g->add_option("--seed", gen.cfg.seed, "generator seed")->capture_default_str();
  g->add_option("--types", gen.types, "entity type names")->delimiter(',');
  g->add_option("--filler-vocab", gen.cfg.filler_vocab, "filler word pool size")
      ->capture_default_str();
  g->add_option("--frac-single", gen.cfg.frac_single, "target share of 1-segment entities")
      ->capture_default_str();
  g->add_option("--frac-double", gen.cfg.frac_double, "target share of 2-segment entities")
      ->capture_default_str();
  g->add_option("--frac-triple", gen.cfg.frac_triple, "target share of 3-segment entities")
      ->capture_default_str();
  g->add_option("--overlap", gen.cfg.overlap_fraction,
                "target share of sentences with overlapping entities")
      ->capture_default_str();
  g->add_option("--max-segment-len", gen.cfg.max_segment_len, "longest generated segment")
      ->capture_default_str();
  g->add_option("--out", gen.out, "single output file (jsonl)");
  g->add_option("--out-prefix", gen.out_prefix, "write <prefix>{train,dev,test}.jsonl");
  g->add_option("--split", gen.split, "train,dev,test sentence counts for --out-prefix")
      ->delimiter(',');
  g->callback([&] { run_gen(gen); });

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "train the joint extractor and merger");
  t->add_option("--train", tr.train_path, "training corpus (jsonl)")->required();
  t->add_option("--dev", tr.dev_path, "development corpus (jsonl)")->required();
  t->add_option("--test", tr.test_path, "evaluate this corpus after training");
  t->add_option("--model", tr.model_out, "checkpoint output path")->required();
  tr.hyper.attach(t);
  t->callback([&] { run_train_joint(tr, t); });

  PredictOpts pr;
  auto* p = app.add_subcommand("predict", "annotate a corpus with a trained model");
  p->add_option("--model", pr.model, "checkpoint path")->required();
  p->add_option("--input", pr.input, "input corpus (jsonl)")->required();
  p->add_option("--out", pr.out, "output corpus (jsonl)")->required();
  p->add_option("--heuristic", pr.heuristic, "tag reading for tag-level models: enough or all")
      ->capture_default_str();
  p->callback([&] { run_predict(pr); });

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "exact-match scores of predictions against gold");
  e->add_option("--gold", ev.gold, "gold corpus (jsonl)")->required();
  e->add_option("--pred", ev.pred, "predicted corpus (jsonl)")->required();
  e->add_option("--json", ev.json_out, "also write the report as JSON");
  e->callback([&] { run_eval(ev); });

  auto* b = app.add_subcommand("baseline-crf", "tag-level baseline");
  b->require_subcommand(1);
  TrainOpts btr;
  std::string bheur = "enough";
  auto* bt = b->add_subcommand("train", "train the tag-level baseline");
  bt->add_option("--train", btr.train_path, "training corpus (jsonl)")->required();
  bt->add_option("--dev", btr.dev_path, "development corpus (jsonl)")->required();
  bt->add_option("--test", btr.test_path, "evaluate this corpus after training");
  bt->add_option("--model", btr.model_out, "checkpoint output path")->required();
  bt->add_option("--heuristic", bheur, "tag reading: enough or all")->capture_default_str();
  btr.hyper.attach(bt);
  bt->callback([&] { run_train_crf(btr, bt, bheur); });
  PredictOpts bpr;
  auto* bp = b->add_subcommand("predict", "annotate a corpus with a trained baseline");
  bp->add_option("--model", bpr.model, "checkpoint path")->required();
  bp->add_option("--input", bpr.input, "input corpus (jsonl)")->required();
  bp->add_option("--out", bpr.out, "output corpus (jsonl)")->required();
  bp->add_option("--heuristic", bpr.heuristic, "tag reading: enough or all")
      ->capture_default_str();
  bp->callback([&] { run_predict(bpr); });

  InspectOpts in;
  auto* i = app.add_subcommand("inspect-hypergraph", "dump the segment hypergraph structure");
  i->add_option("--tokens", in.tokens, "sentence length in tokens")->required();
  i->add_option("--max-seg-len", in.max_seg_len, "longest segment")->capture_default_str();
  i->add_option("--num-types", in.num_types, "entity type count")->capture_default_str();
  i->add_option("--types", in.types, "entity type names (overrides --num-types)")->delimiter(',');
  i->callback([&] { run_inspect(in); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
