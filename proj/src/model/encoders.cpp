#include "kvlp/model/encoders.hpp"

#include "kvlp/autodiff/ops.hpp"
#include "kvlp/kb/text.hpp"

#include <string>

namespace kvlp::model {

namespace {

constexpr double kEmbedStd = 0.02;

const EncoderConfig& validated(const EncoderConfig& c) {
  c.validate();
  return c;
}

}  // namespace

void EncoderConfig::validate() const {
  if (patch <= 0 || image_height % patch != 0 || image_width % patch != 0) {
    throw std::invalid_argument("image size must be divisible by the patch size");
  }
  if (heads <= 0 || width % heads != 0) throw std::invalid_argument("width must be divisible by heads");
  if (channels <= 0 || width <= 0 || max_text_len < 0 || vision_layers < 0 || text_layers < 0) {
    throw std::invalid_argument("invalid encoder dimensions");
  }
  if (vocab_size <= kb::Vocabulary::kSep) throw std::invalid_argument("vocab_size must cover the special tokens");
}

VisionEmbedding::VisionEmbedding(ParamStore& ps, const EncoderConfig& cfg, Rng& rng)
    : patch_proj(ps, "vision.patch_proj", cfg.patch_dim(), cfg.width, rng) {
  cls = ps.add("vision.cls", normal_matrix(1, cfg.width, kEmbedStd, rng), false);
  pos = ps.add("vision.pos", normal_matrix(cfg.num_patches() + 1, cfg.width, kEmbedStd, rng), false);
  mask_token = ps.add("vision.mask_token", normal_matrix(1, cfg.width, kEmbedStd, rng), false);
}

Tensor VisionEmbedding::operator()(const Matrix& patches, std::span<const int> masked) const {
  if (patches.cols() != patch_proj.in_features()) {
    throw ad::DimensionError("embed_image: patch width does not match the projection");
  }
  if (patches.rows() + 1 != pos.rows()) throw ad::DimensionError("embed_image: patch count does not match");
  Tensor proj = patch_proj(Tensor(patches));
  if (!masked.empty()) {
    const Index n = patches.rows(), d = proj.cols();
    Matrix keep = Matrix::Ones(n, d);
    for (int m : masked) {
      if (m < 0 || m >= n) throw std::out_of_range("embed_image: masked patch index out of range");
      keep.row(m).setZero();
    }
    const Tensor fill = ad::matmul(Tensor(Matrix::Ones(n, 1)), mask_token);
    proj = ad::add(ad::mul(proj, Tensor(keep)), ad::mul(fill, Tensor(Matrix::Ones(n, d) - keep)));
  }
  return ad::add(ad::concat_rows({cls, proj}), pos);
}

TextEmbedding::TextEmbedding(ParamStore& ps, const EncoderConfig& cfg, Rng& rng) {
  table = ps.add("text.token_table", normal_matrix(cfg.vocab_size, cfg.width, kEmbedStd, rng), false);
  pos = ps.add("text.pos", normal_matrix(cfg.max_text_len + 2, cfg.width, kEmbedStd, rng), false);
}

Tensor TextEmbedding::operator()(std::span<const int> ids) const {
  if (static_cast<Index>(ids.size()) + 2 > pos.rows()) {
    throw ad::DimensionError("embed_text: sequence longer than max_text_len");
  }
  std::vector<int> full;
  full.reserve(ids.size() + 2);
  full.push_back(kb::Vocabulary::kStart);
  for (int id : ids) {
    if (id < 0 || id >= table.rows()) throw VocabularyError("embed_text: token id " + std::to_string(id) + " outside vocabulary");
    full.push_back(id);
  }
  full.push_back(kb::Vocabulary::kSep);
  const auto n = static_cast<Index>(full.size());
  return ad::add(ad::gather_rows(table, full), ad::slice_rows(pos, 0, n));
}

UniEncoders::UniEncoders(ParamStore& ps, const EncoderConfig& c, Rng& rng)
    : cfg(validated(c)), vision_embed(ps, cfg, rng), text_embed(ps, cfg, rng) {
  const Index hidden = static_cast<Index>(c.ffn_mult) * c.width;
  for (int l = 0; l < c.vision_layers; ++l) {
    vision_layers.emplace_back(ps, "vision.layer" + std::to_string(l), c.width, c.heads, hidden, c.norm, rng);
  }
  for (int l = 0; l < c.text_layers; ++l) {
    text_layers.emplace_back(ps, "text.layer" + std::to_string(l), c.width, c.heads, hidden, c.norm, rng);
  }
  // a pre-norm stack leaves its residual stream unnormalized; close it with one more norm
  if (c.norm == NormOrder::kPre && c.vision_layers > 0) vision_final = LayerNorm(ps, "vision.ln_final", c.width);
  if (c.norm == NormOrder::kPre && c.text_layers > 0) text_final = LayerNorm(ps, "text.ln_final", c.width);
}

namespace {

Tensor finish(const LayerNorm& ln, const Tensor& x) { return ln.gain.node() ? ln(x) : x; }

}  // namespace

Tensor UniEncoders::encode_image(const Matrix& patches, std::span<const int> masked) const {
  return finish(vision_final, encode(vision_embed(patches, masked), vision_layers));
}

Tensor UniEncoders::encode_text(std::span<const int> ids) const {
  return finish(text_final, encode(text_embed(ids), text_layers));
}

}  // namespace kvlp::model
