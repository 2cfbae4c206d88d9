#include "phonseg/train.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace phonseg {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::vector<EncodedPair> encode_pairs(const ParallelCorpus& corpus, const Vocab& src_vocab,
                                      const Vocab& tgt_vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus.pairs)
    out.push_back({encode(src_vocab, pair.source_tokens), encode(tgt_vocab, pair.target_phonemes)});
  return out;
}

namespace {

Batch make_batch(const std::vector<EncodedPair>& pairs, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end) {
  Batch b;
  b.src.reserve(end - begin);
  b.tgt.reserve(end - begin);
  for (std::size_t k = begin; k < end; ++k) {
    b.src.push_back(pairs[order[k]].src);
    b.tgt.push_back(pairs[order[k]].tgt);
  }
  return b;
}

}  // namespace

BatchLoss evaluate_loss(const Model<float>& model, const std::vector<EncodedPair>& pairs,
                        int batch_size) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double sum = 0.0;
  long tokens = 0;
  for (std::size_t at = 0; at < pairs.size(); at += batch_size) {
    const std::size_t end = std::min(pairs.size(), at + batch_size);
    const BatchLoss bl = run_batch(model, make_batch(pairs, order, at, end));
    sum += bl.mean_loss * static_cast<double>(bl.tokens);
    tokens += bl.tokens;
  }
  return {tokens == 0 ? 0.0 : sum / static_cast<double>(tokens), tokens};
}

TrainResult train_model(Model<float>& model, const std::vector<EncodedPair>& train,
                        const std::vector<EncodedPair>& valid, const TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("train_model: empty training set");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_model: batch size < 1");

  Rng rng(cfg.seed);
  if (cfg.init_params) model.params.randomize(rng, cfg.init_range);

  ModelParams<float> grads, adam_m, adam_v;
  adam_m.resize(model.config, model.src_vocab, model.tgt_vocab);
  adam_v.resize(model.config, model.src_vocab, model.tgt_vocab);
  auto m_slots = adam_m.tensors();
  auto v_slots = adam_v.tensors();
  auto p_slots = model.params.tensors();

  TrainResult result;
  ModelParams<float> best_params = model.params;
  int bad_epochs = 0;
  long adam_t = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double train_sum = 0.0;
    long train_tokens = 0;
    int batch_index = 0;
    for (std::size_t at = 0; at < train.size(); at += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(train.size(), at + cfg.batch_size);
      const BatchLoss bl = run_batch(model, make_batch(train, order, at, end), &grads);
      if (!std::isfinite(bl.mean_loss)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch "
            << batch_index;
        throw std::runtime_error(msg.str());
      }
      train_sum += bl.mean_loss * static_cast<double>(bl.tokens);
      train_tokens += bl.tokens;

      ++adam_t;
      auto g_slots = grads.tensors();
      const float corr1 = 1.0f - std::pow(static_cast<float>(cfg.beta1), adam_t);
      const float corr2 = 1.0f - std::pow(static_cast<float>(cfg.beta2), adam_t);
      const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      const float lr = static_cast<float>(cfg.learning_rate);
      const float eps = static_cast<float>(cfg.adam_epsilon);
      for (std::size_t k = 0; k < p_slots.size(); ++k) {
        auto& g = *g_slots[k].second;
        auto& m = *m_slots[k].second;
        auto& v = *v_slots[k].second;
        m = b1 * m + (1.0f - b1) * g;
        v = (b2 * v.array() + (1.0f - b2) * g.array().square()).matrix();
        p_slots[k].second->array() -=
            lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = train_sum / static_cast<double>(train_tokens);
    log.valid_loss = valid.empty() ? log.train_loss
                                   : evaluate_loss(model, valid, cfg.batch_size).mean_loss;
    result.log.push_back(log);
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %d train %.6f valid %.6f\n", epoch, log.train_loss,
                   log.valid_loss);

    if (log.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = log.valid_loss;
      result.best_epoch = epoch;
      best_params = model.params;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  model.params = best_params;
  return result;
}

SoftAlignmentMatrix forced_decode_matrix(const Model<float>& model, const Vocab& src_vocab,
                                         const Vocab& tgt_vocab,
                                         const std::vector<std::string>& source_tokens,
                                         const std::vector<std::string>& target_symbols) {
  if (source_tokens.empty()) throw std::invalid_argument("forced_decode_matrix: empty source");
  if (target_symbols.empty()) throw std::invalid_argument("forced_decode_matrix: empty target");
  Batch batch;
  batch.src.push_back(encode(src_vocab, source_tokens));
  batch.tgt.push_back(encode(tgt_vocab, target_symbols));

  std::vector<MatX<float>> alpha;
  run_batch<float>(model, batch, nullptr, &alpha);

  SoftAlignmentMatrix out;
  out.source_tokens = source_tokens;
  out.target_symbols = target_symbols;
  const int t_len = static_cast<int>(target_symbols.size());
  const int a_len = static_cast<int>(source_tokens.size());
  out.weights.resize(t_len, a_len);
  for (int t = 0; t < t_len; ++t)  // the trailing EOS step is dropped
    out.weights.row(t) = alpha[t].col(0).transpose().cast<double>();
  out.validate();
  return out;
}

std::vector<std::string> greedy_decode(const Model<float>& model, const Vocab& src_vocab,
                                       const Vocab& tgt_vocab,
                                       const std::vector<std::string>& source_tokens,
                                       int max_len) {
  const std::vector<int> ids = greedy_decode_ids(model, encode(src_vocab, source_tokens), max_len);
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(tgt_vocab.token(id));
  return out;
}

void save_model(const Model<float>& model, const Vocab& src_vocab, const Vocab& tgt_vocab,
                const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write model file: " + path);
  const ModelConfig& c = model.config;
  f << "phonseg-model 1\n";
  f << "config " << c.src_embed << ' ' << c.enc_hidden << ' ' << c.tgt_embed << ' '
    << c.dec_hidden << ' ' << c.attn_hidden << '\n';
  f << "src_vocab " << src_vocab.size() << '\n';
  for (const auto& t : src_vocab.tokens) f << t << '\n';
  f << "tgt_vocab " << tgt_vocab.size() << '\n';
  for (const auto& t : tgt_vocab.tokens) f << t << '\n';
  auto tensors = model.params.tensors();
  f << "tensors " << tensors.size() << '\n';
  for (const auto& [name, m] : tensors)
    f << "tensor " << name << ' ' << m->rows() << ' ' << m->cols() << '\n';
  f << "data\n";
  for (const auto& [name, m] : tensors)
    f.write(reinterpret_cast<const char*>(m->data()),
            static_cast<std::streamsize>(sizeof(float) * m->size()));
  if (!f) throw std::runtime_error("short write to model file: " + path);
}

namespace {

std::string expect_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truncated model file: " + path);
  return line;
}

Vocab read_vocab(std::istream& in, const std::string& keyword, const std::string& path) {
  std::istringstream head(expect_line(in, path));
  std::string kw;
  long n = -1;
  head >> kw >> n;
  if (kw != keyword || n < 4)
    throw std::runtime_error("model file: bad " + keyword + " header in " + path);
  Vocab v;
  for (long i = 0; i < n; ++i) {
    v.tokens.push_back(expect_line(in, path));
    v.index.emplace(v.tokens.back(), static_cast<int>(i));
  }
  return v;
}

}  // namespace

LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read model file: " + path);
  if (expect_line(f, path) != "phonseg-model 1")
    throw std::runtime_error("not a model file (bad magic): " + path);

  ModelConfig c;
  {
    std::istringstream line(expect_line(f, path));
    std::string kw;
    line >> kw >> c.src_embed >> c.enc_hidden >> c.tgt_embed >> c.dec_hidden >> c.attn_hidden;
    if (kw != "config" || !line) throw std::runtime_error("model file: bad config line: " + path);
  }
  LoadedModel out;
  out.src_vocab = read_vocab(f, "src_vocab", path);
  out.tgt_vocab = read_vocab(f, "tgt_vocab", path);
  out.model.init(out.src_vocab.size(), out.tgt_vocab.size(), c);

  auto tensors = out.model.params.tensors();
  {
    std::istringstream line(expect_line(f, path));
    std::string kw;
    std::size_t n = 0;
    line >> kw >> n;
    if (kw != "tensors" || n != tensors.size())
      throw std::runtime_error("model file: unexpected tensor count: " + path);
  }
  for (auto& [name, m] : tensors) {
    std::istringstream line(expect_line(f, path));
    std::string kw, got_name;
    Eigen::Index rows = 0, cols = 0;
    line >> kw >> got_name >> rows >> cols;
    if (kw != "tensor" || got_name != name || rows != m->rows() || cols != m->cols())
      throw std::runtime_error("model file: tensor mismatch at " + name + ": " + path);
  }
  if (expect_line(f, path) != "data")
    throw std::runtime_error("model file: missing data section: " + path);
  for (auto& [name, m] : tensors) {
    f.read(reinterpret_cast<char*>(m->data()),
           static_cast<std::streamsize>(sizeof(float) * m->size()));
    if (!f) throw std::runtime_error("model file: truncated tensor data at " + name + ": " + path);
  }
  return out;
}

}  // namespace phonseg
