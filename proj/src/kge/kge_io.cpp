#include "kvlp/kge/kge_io.hpp"

#include "kvlp/util/binary_io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace kvlp::kge {

namespace {

std::vector<double> flatten(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

Matrix unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw std::runtime_error("kge: blob size mismatch");
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

}  // namespace

void save_kge(const KGEArtifact& artifact, const std::filesystem::path& dir) {
  const auto& e = artifact.embeddings;
  std::filesystem::create_directories(dir);
  {
    std::ofstream bin(dir / "kge.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + (dir / "kge.bin").string());
    write_f32_le(bin, flatten(e.entity_vecs));
    write_f32_le(bin, flatten(e.relation_vecs));
  }
  nlohmann::ordered_json m;
  m["N_e"] = e.entity_vecs.rows();
  m["N_r"] = e.relation_vecs.rows();
  m["D_e"] = e.entity_vecs.cols();
  m["entity_ids"] = e.entity_ids;
  m["relation_ids"] = e.relation_ids;
  m["gat"] = {{"leaky_slope", artifact.gat.leaky_slope},
              {"attention_vec", flatten(artifact.gat.attention_vec)},
              {"transform", flatten(artifact.gat.transform)}};
  std::ofstream(dir / "kge.json") << m.dump(2) << '\n';
}

KGEArtifact load_kge(const std::filesystem::path& dir) {
  std::ifstream js(dir / "kge.json");
  if (!js) throw std::runtime_error("missing " + (dir / "kge.json").string());
  const auto m = nlohmann::json::parse(js);
  const Eigen::Index ne = m.at("N_e"), nr = m.at("N_r"), d = m.at("D_e");
  KGEArtifact a;
  a.embeddings.entity_ids = m.at("entity_ids").get<std::vector<std::string>>();
  a.embeddings.relation_ids = m.at("relation_ids").get<std::vector<std::string>>();
  if (static_cast<Eigen::Index>(a.embeddings.entity_ids.size()) != ne ||
      static_cast<Eigen::Index>(a.embeddings.relation_ids.size()) != nr) {
    throw std::runtime_error("kge.json: id lists disagree with N_e/N_r");
  }
  std::ifstream bin(dir / "kge.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("missing " + (dir / "kge.bin").string());
  a.embeddings.entity_vecs = unflatten(read_f32_le(bin, static_cast<std::size_t>(ne * d)), ne, d);
  a.embeddings.relation_vecs = unflatten(read_f32_le(bin, static_cast<std::size_t>(nr * d)), nr, d);
  const auto& g = m.at("gat");
  a.gat.leaky_slope = g.at("leaky_slope");
  a.gat.attention_vec = unflatten(g.at("attention_vec").get<std::vector<double>>(), 1, 2 * d);
  a.gat.transform = unflatten(g.at("transform").get<std::vector<double>>(), d, d);
  return a;
}

}  // namespace kvlp::kge
