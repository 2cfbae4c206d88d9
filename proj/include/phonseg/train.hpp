#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phonseg/corpus.hpp"
#include "phonseg/model.hpp"
#include "phonseg/soft_alignment.hpp"
#include "phonseg/vocab.hpp"

namespace phonseg {

struct EncodedPair {
  std::vector<int> src, tgt;
};

std::vector<EncodedPair> encode_pairs(const ParallelCorpus& corpus, const Vocab& src_vocab,
                                      const Vocab& tgt_vocab);

struct TrainConfig {
  int max_epochs = 150;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int patience = 10;          // epochs without a new best validation loss
  std::uint64_t seed = 1;
  double init_range = 0.08;
  bool init_params = true;    // randomize the (already sized) model first
  bool verbose = false;       // per-epoch losses to stderr
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_valid_loss = std::numeric_limits<double>::infinity();
};

// Teacher-forced cross-entropy training with adaptive-moment updates and
// early stopping; the model ends at its best-validation parameters. The
// model must be init()ed to the right vocabulary sizes beforehand.
// Throws std::runtime_error on a non-finite loss (epoch/batch in message).
TrainResult train_model(Model<float>& model, const std::vector<EncodedPair>& train,
                        const std::vector<EncodedPair>& valid, const TrainConfig& cfg);

// Corpus-level mean loss per predicted token, fixed order, forward only.
BatchLoss evaluate_loss(const Model<float>& model, const std::vector<EncodedPair>& pairs,
                        int batch_size = 32);

// Teacher-forces the gold target and records each step's attention row;
// result is target_len x source_len (the EOS step's row is not part of it).
SoftAlignmentMatrix forced_decode_matrix(const Model<float>& model, const Vocab& src_vocab,
                                         const Vocab& tgt_vocab,
                                         const std::vector<std::string>& source_tokens,
                                         const std::vector<std::string>& target_symbols);

std::vector<std::string> greedy_decode(const Model<float>& model, const Vocab& src_vocab,
                                       const Vocab& tgt_vocab,
                                       const std::vector<std::string>& source_tokens, int max_len);

// Self-contained checkpoint: text header (config, vocabularies, tensor
// shapes), then raw little-endian float32 data, column-major, header order.
void save_model(const Model<float>& model, const Vocab& src_vocab, const Vocab& tgt_vocab,
                const std::string& path);

struct LoadedModel {
  Model<float> model;
  Vocab src_vocab, tgt_vocab;
};

LoadedModel load_model(const std::string& path);

}  // namespace phonseg
