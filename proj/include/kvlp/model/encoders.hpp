#pragma once

#include "kvlp/model/layers.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace kvlp::model {

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct EncoderConfig {
  int image_height = 32;
  int image_width = 32;
  int channels = 1;
  int patch = 8;
  int width = 64;
  int vision_layers = 2;
  int text_layers = 2;
  int heads = 4;
  int vocab_size = 0;
  int max_text_len = 40;
  int ffn_mult = 4;
  NormOrder norm = NormOrder::kPre;

  int num_patches() const { return (image_height / patch) * (image_width / patch); }
  int patch_dim() const { return patch * patch * channels; }
  void validate() const;  // throws std::invalid_argument
};

struct VisionEmbedding {
  Linear patch_proj;  // P²C → D
  Tensor cls;         // 1 × D aggregation token
  Tensor pos;         // (N_v + 1) × D
  Tensor mask_token;  // 1 × D, substituted for masked patches

  VisionEmbedding() = default;
  VisionEmbedding(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);

  // [cls; patches·E + b] + pos. Rows listed in `masked` (0-based patch
  // indices) are replaced by the mask token before the position embeddings.
  Tensor operator()(const Matrix& patches, std::span<const int> masked = {}) const;
};

struct TextEmbedding {
  Tensor table;  // V × D
  Tensor pos;    // (max_text_len + 2) × D

  TextEmbedding() = default;
  TextEmbedding(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);

  // Content ids only; [CLS] and [SEP] are added here. Output (N_l + 2) × D.
  Tensor operator()(std::span<const int> ids) const;
};

struct UniEncoders {
  EncoderConfig cfg;
  VisionEmbedding vision_embed;
  TextEmbedding text_embed;
  std::vector<TransformerLayer> vision_layers;
  std::vector<TransformerLayer> text_layers;
  LayerNorm vision_final, text_final;  // pre-norm stacks only

  UniEncoders() = default;
  UniEncoders(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);

  Tensor encode_image(const Matrix& patches, std::span<const int> masked = {}) const;
  Tensor encode_text(std::span<const int> ids) const;
};

}  // namespace kvlp::model
