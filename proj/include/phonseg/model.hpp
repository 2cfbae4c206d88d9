#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "phonseg/rng.hpp"

namespace phonseg {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

struct ModelConfig {
  int src_embed = 64;
  int enc_hidden = 64;   // per direction; annotations are 2*enc_hidden
  int tgt_embed = 16;
  int dec_hidden = 64;   // per layer, two layers
  int attn_hidden = 64;
};

// Gated recurrent cell: z,r gates and candidate state.
//   z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br)
//   hh = tanh(Wh x + Uh (r.h) + bh); h' = (1-z).h + z.hh
template <typename Scalar>
struct GruParams {
  using Mat = MatX<Scalar>;
  Mat Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;  // biases stored n-by-1

  void resize(int in, int hidden) {
    Wz.setZero(hidden, in);
    Wr.setZero(hidden, in);
    Wh.setZero(hidden, in);
    Uz.setZero(hidden, hidden);
    Ur.setZero(hidden, hidden);
    Uh.setZero(hidden, hidden);
    bz.setZero(hidden, 1);
    br.setZero(hidden, 1);
    bh.setZero(hidden, 1);
  }
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Mat*>>& out) {
    out.emplace_back(prefix + ".Wz", &Wz);
    out.emplace_back(prefix + ".Wr", &Wr);
    out.emplace_back(prefix + ".Wh", &Wh);
    out.emplace_back(prefix + ".Uz", &Uz);
    out.emplace_back(prefix + ".Ur", &Ur);
    out.emplace_back(prefix + ".Uh", &Uh);
    out.emplace_back(prefix + ".bz", &bz);
    out.emplace_back(prefix + ".br", &br);
    out.emplace_back(prefix + ".bh", &bh);
  }
};

template <typename Scalar>
struct ModelParams {
  using Mat = MatX<Scalar>;
  Mat src_embed;            // src_embed_dim x Vs
  GruParams<Scalar> enc_fwd, enc_bwd;
  Mat attn_enc, attn_dec;   // attn_hidden x 2*enc_hidden / x dec_hidden
  Mat attn_bias, attn_v;    // attn_hidden x 1
  Mat tgt_embed;            // tgt_embed_dim x Vt
  GruParams<Scalar> dec1, dec2;
  Mat out_proj, out_bias;   // Vt x (dec_hidden + 2*enc_hidden), Vt x 1

  void resize(const ModelConfig& c, int src_vocab, int tgt_vocab) {
    src_embed.setZero(c.src_embed, src_vocab);
    enc_fwd.resize(c.src_embed, c.enc_hidden);
    enc_bwd.resize(c.src_embed, c.enc_hidden);
    attn_enc.setZero(c.attn_hidden, 2 * c.enc_hidden);
    attn_dec.setZero(c.attn_hidden, c.dec_hidden);
    attn_bias.setZero(c.attn_hidden, 1);
    attn_v.setZero(c.attn_hidden, 1);
    tgt_embed.setZero(c.tgt_embed, tgt_vocab);
    dec1.resize(c.tgt_embed + 2 * c.enc_hidden, c.dec_hidden);
    dec2.resize(c.dec_hidden, c.dec_hidden);
    out_proj.setZero(tgt_vocab, c.dec_hidden + 2 * c.enc_hidden);
    out_bias.setZero(tgt_vocab, 1);
  }

  std::vector<std::pair<std::string, const Mat*>> tensors() const {
    auto mutable_list = const_cast<ModelParams*>(this)->tensors();
    return {mutable_list.begin(), mutable_list.end()};
  }

  std::vector<std::pair<std::string, Mat*>> tensors() {
    std::vector<std::pair<std::string, Mat*>> out;
    out.emplace_back("src_embed", &src_embed);
    enc_fwd.collect("enc_fwd", out);
    enc_bwd.collect("enc_bwd", out);
    out.emplace_back("attn_enc", &attn_enc);
    out.emplace_back("attn_dec", &attn_dec);
    out.emplace_back("attn_bias", &attn_bias);
    out.emplace_back("attn_v", &attn_v);
    out.emplace_back("tgt_embed", &tgt_embed);
    dec1.collect("dec1", out);
    dec2.collect("dec2", out);
    out.emplace_back("out_proj", &out_proj);
    out.emplace_back("out_bias", &out_bias);
    return out;
  }

  void zero() {
    for (auto& [name, m] : tensors()) m->setZero();
  }
  void randomize(Rng& rng, double range) {
    for (auto& [name, m] : tensors())
      for (Eigen::Index j = 0; j < m->cols(); ++j)
        for (Eigen::Index i = 0; i < m->rows(); ++i)
          (*m)(i, j) = static_cast<Scalar>(rng.uniform(-range, range));
  }
};

template <typename Scalar>
struct Model {
  ModelConfig config;
  int src_vocab = 0;
  int tgt_vocab = 0;
  ModelParams<Scalar> params;

  void init(int src_vocab_size, int tgt_vocab_size, const ModelConfig& c = {}) {
    config = c;
    src_vocab = src_vocab_size;
    tgt_vocab = tgt_vocab_size;
    params.resize(c, src_vocab_size, tgt_vocab_size);
  }
};

// One mini-batch of encoded sentence pairs (no BOS/EOS; added internally).
struct Batch {
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;
};

struct BatchLoss {
  double mean_loss = 0.0;  // cross-entropy per predicted token (EOS included)
  long tokens = 0;
};

constexpr int kIdPad = 0;
constexpr int kIdBos = 1;
constexpr int kIdEos = 2;
constexpr int kIdUnk = 3;

namespace detail {

template <typename Scalar>
MatX<Scalar> sigmoid(const MatX<Scalar>& a) {
  return ((-a.array()).exp() + Scalar(1)).inverse().matrix();
}

template <typename Scalar>
struct GruCache {
  MatX<Scalar> x, h_prev, z, r, hhat, h;
};

template <typename Scalar>
void gru_forward(const GruParams<Scalar>& p, MatX<Scalar> x, MatX<Scalar> h_prev,
                 GruCache<Scalar>& c) {
  using Mat = MatX<Scalar>;
  c.x = std::move(x);
  c.h_prev = std::move(h_prev);
  Mat az = (p.Wz * c.x + p.Uz * c.h_prev).colwise() + p.bz.col(0);
  c.z = sigmoid<Scalar>(az);
  Mat ar = (p.Wr * c.x + p.Ur * c.h_prev).colwise() + p.br.col(0);
  c.r = sigmoid<Scalar>(ar);
  Mat ah = (p.Wh * c.x + p.Uh * c.r.cwiseProduct(c.h_prev)).colwise() + p.bh.col(0);
  c.hhat = ah.array().tanh().matrix();
  c.h = (Scalar(1) - c.z.array()).matrix().cwiseProduct(c.h_prev) + c.z.cwiseProduct(c.hhat);
}

// Accumulates parameter gradients into g; writes input/previous-state grads.
template <typename Scalar>
void gru_backward(const GruParams<Scalar>& p, const GruCache<Scalar>& c, const MatX<Scalar>& dh,
                  GruParams<Scalar>& g, MatX<Scalar>& dx, MatX<Scalar>& dh_prev) {
  using Mat = MatX<Scalar>;
  Mat dz = dh.cwiseProduct(c.hhat - c.h_prev);
  Mat dhhat = dh.cwiseProduct(c.z);
  dh_prev = dh.cwiseProduct((Scalar(1) - c.z.array()).matrix());

  Mat dpre_h = dhhat.cwiseProduct((Scalar(1) - c.hhat.array().square()).matrix());
  Mat rh = c.r.cwiseProduct(c.h_prev);
  g.Wh.noalias() += dpre_h * c.x.transpose();
  g.Uh.noalias() += dpre_h * rh.transpose();
  g.bh.col(0).noalias() += dpre_h.rowwise().sum();
  dx.noalias() = p.Wh.transpose() * dpre_h;
  Mat drh = p.Uh.transpose() * dpre_h;
  Mat dr = drh.cwiseProduct(c.h_prev);
  dh_prev.noalias() += drh.cwiseProduct(c.r);

  Mat dpre_z = dz.cwiseProduct(c.z).cwiseProduct((Scalar(1) - c.z.array()).matrix());
  g.Wz.noalias() += dpre_z * c.x.transpose();
  g.Uz.noalias() += dpre_z * c.h_prev.transpose();
  g.bz.col(0).noalias() += dpre_z.rowwise().sum();
  dx.noalias() += p.Wz.transpose() * dpre_z;
  dh_prev.noalias() += p.Uz.transpose() * dpre_z;

  Mat dpre_r = dr.cwiseProduct(c.r).cwiseProduct((Scalar(1) - c.r.array()).matrix());
  g.Wr.noalias() += dpre_r * c.x.transpose();
  g.Ur.noalias() += dpre_r * c.h_prev.transpose();
  g.br.col(0).noalias() += dpre_r.rowwise().sum();
  dx.noalias() += p.Wr.transpose() * dpre_r;
  dh_prev.noalias() += p.Ur.transpose() * dpre_r;
}

template <typename Scalar>
void softmax_columns(MatX<Scalar>& m) {
  for (Eigen::Index b = 0; b < m.cols(); ++b) {
    const Scalar mx = m.col(b).maxCoeff();
    // Scalar std::exp so saturated scores underflow to exact zero; Eigen's
    // vectorized exp clamps its argument and leaves denormal dust instead.
    m.col(b) = m.col(b).unaryExpr([mx](Scalar v) { return std::exp(v - mx); });
    m.col(b) /= m.col(b).sum();
  }
}

}  // namespace detail

// Teacher-forced forward pass over a right-padded batch; when `grads` is
// given, runs the matching backward pass and accumulates into it (grads is
// zeroed first). `alpha_capture`, when given, receives one maxA-by-B
// attention matrix per decoder step (EOS step included).
template <typename Scalar>
BatchLoss run_batch(const Model<Scalar>& model, const Batch& batch,
                    ModelParams<Scalar>* grads = nullptr,
                    std::vector<MatX<Scalar>>* alpha_capture = nullptr) {
  using Mat = MatX<Scalar>;
  using detail::GruCache;

  const int B = static_cast<int>(batch.src.size());
  if (B == 0 || batch.tgt.size() != batch.src.size())
    throw std::invalid_argument("run_batch: empty batch or source/target count mismatch");
  int max_a = 0, max_t = 0;
  for (int b = 0; b < B; ++b) {
    if (batch.src[b].empty() || batch.tgt[b].empty())
      throw std::invalid_argument("run_batch: empty source or target sequence");
    max_a = std::max(max_a, static_cast<int>(batch.src[b].size()));
    max_t = std::max(max_t, static_cast<int>(batch.tgt[b].size()));
  }
  const ModelConfig& cfg = model.config;
  const ModelParams<Scalar>& p = model.params;
  const int eh = cfg.enc_hidden, dh = cfg.dec_hidden, ah = cfg.attn_hidden;
  const int te = cfg.tgt_embed;
  const int steps = max_t + 1;  // one extra step predicts EOS

  if (grads) {
    grads->resize(cfg, model.src_vocab, model.tgt_vocab);
    grads->zero();
  }

  // ---- encoder ----
  Mat src_mask = Mat::Zero(max_a, B);  // 1 where the position is real
  std::vector<std::vector<int>> src_ids(max_a, std::vector<int>(B, kIdPad));
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < static_cast<int>(batch.src[b].size()); ++i) {
      src_ids[i][b] = batch.src[b][i];
      src_mask(i, b) = Scalar(1);
    }

  std::vector<Mat> x_emb(max_a);
  for (int i = 0; i < max_a; ++i) {
    x_emb[i].resize(cfg.src_embed, B);
    for (int b = 0; b < B; ++b) x_emb[i].col(b) = p.src_embed.col(src_ids[i][b]);
  }

  // masked state update: padding positions carry the previous state through
  std::vector<GruCache<Scalar>> fwd_cache(max_a), bwd_cache(max_a);
  std::vector<Mat> h_fwd(max_a), h_bwd(max_a);
  {
    Mat h = Mat::Zero(eh, B);
    for (int i = 0; i < max_a; ++i) {
      detail::gru_forward(p.enc_fwd, x_emb[i], h, fwd_cache[i]);
      auto m = src_mask.row(i).array();
      h_fwd[i] = (fwd_cache[i].h.array().rowwise() * m +
                  h.array().rowwise() * (Scalar(1) - m))
                     .matrix();
      h = h_fwd[i];
    }
    h.setZero(eh, B);
    for (int i = max_a - 1; i >= 0; --i) {
      detail::gru_forward(p.enc_bwd, x_emb[i], h, bwd_cache[i]);
      auto m = src_mask.row(i).array();
      h_bwd[i] = (bwd_cache[i].h.array().rowwise() * m +
                  h.array().rowwise() * (Scalar(1) - m))
                     .matrix();
      h = h_bwd[i];
    }
  }
  std::vector<Mat> enc_h(max_a);  // annotations, (2*eh) x B
  for (int i = 0; i < max_a; ++i) {
    enc_h[i].resize(2 * eh, B);
    enc_h[i].topRows(eh) = h_fwd[i];
    enc_h[i].bottomRows(eh) = h_bwd[i];
  }
  std::vector<Mat> attn_pre(max_a);  // attn_enc * h_i + attn_bias, reused every step
  for (int i = 0; i < max_a; ++i)
    attn_pre[i] = (p.attn_enc * enc_h[i]).colwise() + p.attn_bias.col(0);

  // ---- decoder, teacher forced ----
  long total_tokens = 0;
  for (int b = 0; b < B; ++b) total_tokens += static_cast<long>(batch.tgt[b].size()) + 1;

  struct StepCache {
    std::vector<int> in_ids, out_ids;       // out_ids: -1 past the sentence end
    std::vector<MatX<Scalar>> tnh;          // per source position, ah x B
    MatX<Scalar> alpha, ctx, probs;
    GruCache<Scalar> g1, g2;
  };
  std::vector<StepCache> step(steps);

  Mat s1 = Mat::Zero(dh, B), s2 = Mat::Zero(dh, B);
  double loss_sum = 0.0;
  for (int t = 0; t < steps; ++t) {
    StepCache& sc = step[t];
    sc.in_ids.assign(B, kIdPad);
    sc.out_ids.assign(B, -1);
    for (int b = 0; b < B; ++b) {
      const int len = static_cast<int>(batch.tgt[b].size());
      if (t <= len) sc.in_ids[b] = t == 0 ? kIdBos : batch.tgt[b][t - 1];
      if (t < len)
        sc.out_ids[b] = batch.tgt[b][t];
      else if (t == len)
        sc.out_ids[b] = kIdEos;
    }

    // attention over annotations, query = top-layer state
    Mat q = (p.attn_dec * s2);
    Mat scores(max_a, B);
    sc.tnh.resize(max_a);
    for (int i = 0; i < max_a; ++i) {
      sc.tnh[i] = (attn_pre[i] + q).array().tanh().matrix();
      scores.row(i) = p.attn_v.col(0).transpose() * sc.tnh[i];
    }
    scores.array() += (Scalar(1) - src_mask.array()) * Scalar(-1e30);
    detail::softmax_columns(scores);
    sc.alpha = std::move(scores);
    if (alpha_capture) alpha_capture->push_back(sc.alpha);

    sc.ctx = Mat::Zero(2 * eh, B);
    for (int i = 0; i < max_a; ++i)
      sc.ctx.array() += enc_h[i].array().rowwise() * sc.alpha.row(i).array();

    Mat in1(te + 2 * eh, B);
    for (int b = 0; b < B; ++b) in1.col(b).head(te) = p.tgt_embed.col(sc.in_ids[b]);
    in1.bottomRows(2 * eh) = sc.ctx;
    detail::gru_forward(p.dec1, std::move(in1), std::move(s1), sc.g1);
    s1 = sc.g1.h;
    detail::gru_forward(p.dec2, s1, std::move(s2), sc.g2);
    s2 = sc.g2.h;

    Mat out_in(dh + 2 * eh, B);
    out_in.topRows(dh) = s2;
    out_in.bottomRows(2 * eh) = sc.ctx;
    sc.probs = (p.out_proj * out_in).colwise() + p.out_bias.col(0);
    detail::softmax_columns(sc.probs);
    for (int b = 0; b < B; ++b)
      if (sc.out_ids[b] >= 0)
        loss_sum -= std::log(static_cast<double>(sc.probs(sc.out_ids[b], b)));
  }

  BatchLoss result{loss_sum / static_cast<double>(total_tokens), total_tokens};
  if (!grads) return result;

  // ---- backward ----
  ModelParams<Scalar>& g = *grads;
  const Scalar inv_n = Scalar(1.0 / static_cast<double>(total_tokens));
  Mat ds1_carry = Mat::Zero(dh, B), ds2_carry = Mat::Zero(dh, B);
  std::vector<Mat> d_attn_pre(max_a, Mat::Zero(ah, B));
  std::vector<Mat> d_enc_h(max_a, Mat::Zero(2 * eh, B));

  for (int t = steps - 1; t >= 0; --t) {
    const StepCache& sc = step[t];
    Mat dlogits = Mat::Zero(model.tgt_vocab, B);
    for (int b = 0; b < B; ++b)
      if (sc.out_ids[b] >= 0) {
        dlogits.col(b) = sc.probs.col(b) * inv_n;
        dlogits(sc.out_ids[b], b) -= inv_n;
      }
    Mat out_in(dh + 2 * eh, B);
    out_in.topRows(dh) = sc.g2.h;
    out_in.bottomRows(2 * eh) = sc.ctx;
    g.out_proj.noalias() += dlogits * out_in.transpose();
    g.out_bias.col(0).noalias() += dlogits.rowwise().sum();
    Mat dout = p.out_proj.transpose() * dlogits;

    Mat ds2 = dout.topRows(dh) + ds2_carry;
    Mat dx2, dprev2;
    detail::gru_backward(p.dec2, sc.g2, ds2, g.dec2, dx2, dprev2);
    Mat ds1 = dx2 + ds1_carry;
    Mat dx1, dprev1;
    detail::gru_backward(p.dec1, sc.g1, ds1, g.dec1, dx1, dprev1);
    ds1_carry = std::move(dprev1);

    for (int b = 0; b < B; ++b) g.tgt_embed.col(sc.in_ids[b]) += dx1.col(b).head(te);
    Mat dctx = dx1.bottomRows(2 * eh) + dout.bottomRows(2 * eh);

    // context and softmax backward
    Mat dalpha(max_a, B);
    for (int i = 0; i < max_a; ++i) {
      dalpha.row(i) = enc_h[i].cwiseProduct(dctx).colwise().sum();
      d_enc_h[i].array() += dctx.array().rowwise() * sc.alpha.row(i).array();
    }
    Mat dot = sc.alpha.cwiseProduct(dalpha).colwise().sum();  // 1 x B
    Mat dscore =
        sc.alpha.cwiseProduct((dalpha.array().rowwise() - dot.row(0).array()).matrix());

    Mat dq = Mat::Zero(ah, B);
    for (int i = 0; i < max_a; ++i) {
      Mat dtnh = p.attn_v.col(0) * dscore.row(i);
      g.attn_v.col(0).noalias() += sc.tnh[i] * dscore.row(i).transpose();
      Mat dpre = dtnh.cwiseProduct((Scalar(1) - sc.tnh[i].array().square()).matrix());
      d_attn_pre[i] += dpre;
      dq += dpre;
    }
    g.attn_dec.noalias() += dq * sc.g2.h_prev.transpose();
    ds2_carry = dprev2 + p.attn_dec.transpose() * dq;
  }

  for (int i = 0; i < max_a; ++i) {
    g.attn_enc.noalias() += d_attn_pre[i] * enc_h[i].transpose();
    g.attn_bias.col(0).noalias() += d_attn_pre[i].rowwise().sum();
    d_enc_h[i].noalias() += p.attn_enc.transpose() * d_attn_pre[i];
  }

  // encoder backward, masked positions pass gradients straight through
  std::vector<Mat> dx_src(max_a, Mat::Zero(cfg.src_embed, B));
  {
    Mat carry = Mat::Zero(eh, B);
    for (int i = max_a - 1; i >= 0; --i) {
      Mat dh_total = d_enc_h[i].topRows(eh) + carry;
      auto m = src_mask.row(i).array();
      Mat dh_cell = (dh_total.array().rowwise() * m).matrix();
      Mat dh_pass = (dh_total.array().rowwise() * (Scalar(1) - m)).matrix();
      Mat dx, dprev;
      detail::gru_backward(p.enc_fwd, fwd_cache[i], dh_cell, g.enc_fwd, dx, dprev);
      dx_src[i] += dx;
      carry = dprev + dh_pass;
    }
    carry.setZero(eh, B);
    for (int i = 0; i < max_a; ++i) {
      Mat dh_total = d_enc_h[i].bottomRows(eh) + carry;
      auto m = src_mask.row(i).array();
      Mat dh_cell = (dh_total.array().rowwise() * m).matrix();
      Mat dh_pass = (dh_total.array().rowwise() * (Scalar(1) - m)).matrix();
      Mat dx, dprev;
      detail::gru_backward(p.enc_bwd, bwd_cache[i], dh_cell, g.enc_bwd, dx, dprev);
      dx_src[i] += dx;
      carry = dprev + dh_pass;
    }
  }
  for (int i = 0; i < max_a; ++i)
    for (int b = 0; b < B; ++b) g.src_embed.col(src_ids[i][b]) += dx_src[i].col(b);

  return result;
}

// Single-sentence attention step: alphas = softmax(v.tanh(We h_i + Wd s + b)),
// context = sum_i alpha_i h_i. `annotations` is (2*enc_hidden) x A.
template <typename Scalar>
std::pair<MatX<Scalar>, MatX<Scalar>> attend(const ModelParams<Scalar>& p,
                                             const MatX<Scalar>& annotations,
                                             const MatX<Scalar>& s_prev) {
  using Mat = MatX<Scalar>;
  const Eigen::Index a_len = annotations.cols();
  if (a_len < 1) throw std::invalid_argument("attend: no source positions");
  Mat q = p.attn_dec * s_prev + p.attn_bias;
  Mat scores(a_len, 1);
  for (Eigen::Index i = 0; i < a_len; ++i) {
    Mat tnh = ((p.attn_enc * annotations.col(i)) + q).array().tanh().matrix();
    scores(i, 0) = (p.attn_v.col(0).transpose() * tnh)(0, 0);
  }
  detail::softmax_columns(scores);
  Mat ctx = annotations * scores;
  return {scores, ctx};
}

// Greedy argmax decode (ties toward the lowest id) until EOS or max_len ids.
template <typename Scalar>
std::vector<int> greedy_decode_ids(const Model<Scalar>& model, const std::vector<int>& src_ids,
                                   int max_len) {
  using Mat = MatX<Scalar>;
  if (src_ids.empty()) throw std::invalid_argument("greedy_decode: empty source");
  if (max_len <= 0) return {};

  const ModelConfig& cfg = model.config;
  const ModelParams<Scalar>& p = model.params;
  const int eh = cfg.enc_hidden, dh = cfg.dec_hidden, te = cfg.tgt_embed;
  const int a_len = static_cast<int>(src_ids.size());

  // encoder (batch of one)
  std::vector<Mat> enc_h(a_len);
  {
    detail::GruCache<Scalar> c;
    Mat h = Mat::Zero(eh, 1);
    std::vector<Mat> hf(a_len), hb(a_len);
    for (int i = 0; i < a_len; ++i) {
      detail::gru_forward(p.enc_fwd, Mat(p.src_embed.col(src_ids[i])), h, c);
      hf[i] = c.h;
      h = c.h;
    }
    h.setZero(eh, 1);
    for (int i = a_len - 1; i >= 0; --i) {
      detail::gru_forward(p.enc_bwd, Mat(p.src_embed.col(src_ids[i])), h, c);
      hb[i] = c.h;
      h = c.h;
    }
    for (int i = 0; i < a_len; ++i) {
      enc_h[i].resize(2 * eh, 1);
      enc_h[i].topRows(eh) = hf[i];
      enc_h[i].bottomRows(eh) = hb[i];
    }
  }
  Mat annotations(2 * eh, a_len);
  for (int i = 0; i < a_len; ++i) annotations.col(i) = enc_h[i];

  std::vector<int> out;
  Mat s1 = Mat::Zero(dh, 1), s2 = Mat::Zero(dh, 1);
  int prev = kIdBos;
  detail::GruCache<Scalar> c1, c2;
  for (int t = 0; t < max_len + 1 && static_cast<int>(out.size()) < max_len; ++t) {
    auto [alpha, ctx] = attend(p, annotations, s2);
    Mat in1(te + 2 * eh, 1);
    in1.topRows(te) = p.tgt_embed.col(prev);
    in1.bottomRows(2 * eh) = ctx;
    detail::gru_forward(p.dec1, std::move(in1), std::move(s1), c1);
    s1 = c1.h;
    detail::gru_forward(p.dec2, s1, std::move(s2), c2);
    s2 = c2.h;
    Mat out_in(dh + 2 * eh, 1);
    out_in.topRows(dh) = s2;
    out_in.bottomRows(2 * eh) = ctx;
    Mat logits = (p.out_proj * out_in).colwise() + p.out_bias.col(0);
    int best = 0;
    for (int k = 1; k < model.tgt_vocab; ++k)
      if (logits(k, 0) > logits(best, 0)) best = k;
    if (best == kIdEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

// Max relative error between analytic gradients and central finite
// differences over every parameter element. Meant for tiny double models.
// The denominator is floored at 1 so near-zero derivatives are compared on
// an absolute scale; otherwise central-difference roundoff (~loss*u/eps)
// swamps the quotient for elements whose true derivative is ~1e-9.
template <typename Scalar>
double gradient_check(Model<Scalar>& model, const Batch& batch, double epsilon) {
  static_assert(std::is_floating_point_v<Scalar>);
  ModelParams<Scalar> analytic;
  run_batch(model, batch, &analytic);
  auto params = model.params.tensors();
  auto grads = analytic.tensors();
  double max_rel = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    MatX<Scalar>& m = *params[k].second;
    const MatX<Scalar>& gm = *grads[k].second;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Scalar orig = m(i, j);
        m(i, j) = orig + static_cast<Scalar>(epsilon);
        const double lp = run_batch(model, batch).mean_loss;
        m(i, j) = orig - static_cast<Scalar>(epsilon);
        const double lm = run_batch(model, batch).mean_loss;
        m(i, j) = orig;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double analytic_v = static_cast<double>(gm(i, j));
        const double denom = std::max({1.0, std::abs(analytic_v), std::abs(numeric)});
        max_rel = std::max(max_rel, std::abs(analytic_v - numeric) / denom);
      }
  }
  return max_rel;
}

}  // namespace phonseg
