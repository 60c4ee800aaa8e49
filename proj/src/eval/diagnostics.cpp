#include "kvlp/eval/diagnostics.hpp"

#include "kvlp/autodiff/ops.hpp"

#include <cstdio>
#include <fstream>

namespace kvlp::eval {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_matrix(const std::filesystem::path& p, const std::vector<std::string>& row_labels,
                  const std::vector<std::string>& col_labels, const Matrix& m) {
  auto out = open_csv(p);
  out << "row";
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << row_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << num(m(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace

DiagnosticsSummary dump_diagnostics(const model::Model& m, const obj::EntityTable& entities,
                                    const data::Sample& sample, const kb::Vocabulary& vocab,
                                    const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  ad::NoGradGuard guard;
  const ad::Tensor hv = m.encoders().encode_image(sample.patches);
  const ad::Tensor hl = m.encoders().encode_text(sample.token_ids);
  model::FusionTrace trace;
  const auto fused = m.fuse(hv, hl, entities.gather_fusion(sample.mention_entities), sample.p, &trace);
  const auto scores = obj::alignment_scores(ad::slice_rows(hv, 0, 1), ad::slice_rows(hl, 0, 1),
                                            entities.alignment_vecs, m.heads().w_vk, m.heads().w_lk);

  DiagnosticsSummary sum;
  sum.n_entities = static_cast<int>(entities.size());
  sum.text_len = static_cast<int>(hl.rows());
  sum.n_mentions = static_cast<int>(sample.mentions.size());
  sum.n_visual = static_cast<int>(hv.rows());
  sum.fusion_layers = static_cast<int>(trace.layers.size());

  for (const auto& [name, probs] : {std::pair{"p_v.csv", scores.probs_v()}, std::pair{"p_l.csv", scores.probs_l()}}) {
    auto f = open_csv(out / name);
    f << "entity,p\n";
    for (Eigen::Index i = 0; i < probs.cols(); ++i) f << entities.ids[static_cast<std::size_t>(i)] << ',' << num(probs(0, i)) << '\n';
  }

  std::vector<std::string> tokens = {"[CLS]"};
  for (int id : sample.token_ids) tokens.push_back(vocab.token(id));
  tokens.push_back("[SEP]");
  std::vector<std::string> visual = {"cls"};
  for (int i = 0; i + 1 < sum.n_visual; ++i) visual.push_back("patch" + std::to_string(i));
  std::vector<std::string> mentions;
  for (const auto& mt : sample.mentions) mentions.push_back(mt.entity_id + "@" + std::to_string(mt.begin));

  for (std::size_t k = 0; k < trace.layers.size(); ++k) {
    const auto& layer = trace.layers[k];
    write_matrix(out / ("text_image_layer" + std::to_string(k) + ".csv"), tokens, visual, layer.text_image);
    const Matrix ei = layer.entity_image.size() ? layer.entity_image : Matrix(0, sum.n_visual);
    write_matrix(out / ("entity_image_layer" + std::to_string(k) + ".csv"), mentions, visual, ei);
  }

  const auto width = hv.cols();
  Matrix emb(4, width);
  emb.row(0) = hv.value().row(0);
  emb.row(1) = hl.value().row(0);
  emb.row(2) = fused.zv.value().row(0);
  emb.row(3) = fused.zl.value().row(0);
  std::vector<std::string> dims;
  for (Eigen::Index d = 0; d < width; ++d) dims.push_back("d" + std::to_string(d));
  write_matrix(out / "embeddings.csv", {"image_uni", "text_uni", "image_fused", "text_fused"}, dims, emb);
  return sum;
}

}  // namespace kvlp::eval
