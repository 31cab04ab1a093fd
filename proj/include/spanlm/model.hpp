// Copyright 2026 The spanlm Authors.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spanlm/autograd.hpp"
#include "spanlm/tokenizer.hpp"

namespace spanlm {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ffn_dim = 512;
  std::size_t max_len = 128;
  std::size_t vocab_size = 4000;
  double dropout = 0.0;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename T>
struct LayerParams {
  ParameterPtr<T> wq, bq, wk, bk, wv, bv, wo, bo;
  ParameterPtr<T> ln1_gamma, ln1_beta;
  ParameterPtr<T> w1, b1, w2, b2;
  ParameterPtr<T> ln2_gamma, ln2_beta;
};

// Post-LN transformer encoder body with learned absolute positions.
template <typename T>
struct EncoderParams {
  ParameterPtr<T> token_embedding;     // [vocab, hidden]
  ParameterPtr<T> position_embedding;  // [max_len, hidden]
  ParameterPtr<T> emb_ln_gamma, emb_ln_beta;
  std::vector<LayerParams<T>> layers;

  std::vector<ParameterPtr<T>> parameters() const;
};

template <typename T>
struct MlmHead {
  ParameterPtr<T> bias;  // [vocab]; the projection is the token embedding
};

template <typename T>
struct DiscHead {
  ParameterPtr<T> W;  // [hidden, hidden]
  ParameterPtr<T> w;  // [hidden, 1]
};

template <typename T>
struct QaHead {
  ParameterPtr<T> start_w, start_b;  // [hidden, 1], [1]
  ParameterPtr<T> end_w, end_b;
};

// Generator view = gen_encoder + mlm, discriminator view = disc_encoder +
// disc. With sharing on both encoder pointers are the same object. The QA
// head reads the discriminator encoder.
template <typename T>
struct Model {
  EncoderConfig config;
  std::shared_ptr<EncoderParams<T>> gen_encoder;
  std::shared_ptr<EncoderParams<T>> disc_encoder;
  MlmHead<T> mlm;
  DiscHead<T> disc;
  QaHead<T> qa;

  bool shared() const { return gen_encoder == disc_encoder; }

  // Weights ~ N(0, 0.02), biases 0, layer-norm gains 1, drawn in parameter
  // order from Rng(epoch_seed(seed ^ kInitStream, 0, 0)). With sharing
  // off the discriminator encoder starts as a copy of the generator's.
  static Model create(const EncoderConfig& config, bool share_encoder, std::uint64_t seed);

  // Every distinct parameter once, in a fixed order.
  std::vector<ParameterPtr<T>> parameters() const;
};

struct ForwardOptions {
  bool train = false;  // enables dropout when config.dropout > 0
  std::uint64_t dropout_seed = 0;
};

// [n] token ids -> [n, hidden]. Throws std::invalid_argument when n is 0,
// exceeds max_len, or an id is out of vocabulary range.
template <typename T>
Var<T> encode(Tape<T>& tape, const EncoderParams<T>& params, const EncoderConfig& config,
              std::span<const TokenId> ids, const ForwardOptions& options = {});

// [r, hidden] -> [r, vocab] with h E^T + b.
template <typename T>
Var<T> mlm_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden);

// Replacement logit w^T GeLU(W h) per row, [n, hidden] -> [n, 1]. No bias terms.
template <typename T>
Var<T> disc_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden);

// sigmoid(disc_logits).
template <typename T>
Var<T> disc_prob(Tape<T>& tape, const Model<T>& model, Var<T> hidden);

// [n, hidden] -> ([n, 1] start logits, [n, 1] end logits).
template <typename T>
std::pair<Var<T>, Var<T>> qa_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden);

// Rows of `x` at the given indices.
template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::int32_t> rows);

// Copies every tensor into a model of another precision with the same
// sharing layout (used to verify float graphs in double).
template <typename To, typename From>
Model<To> convert_model(const Model<From>& model);

}  // namespace spanlm
