#include "kvlp/train/checkpoint.hpp"

#include "kvlp/util/binary_io.hpp"

#include <json.hpp>

#include <fstream>

namespace kvlp::train {

namespace {

constexpr const char* kFormat = "kvlp-checkpoint-1";

void write_blob(const std::filesystem::path& path, const std::vector<const Matrix*>& mats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Matrix* m : mats) write_f32_le(out, std::span<const double>(m->data(), static_cast<std::size_t>(m->size())));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Matrix> read_blob(const std::filesystem::path& path, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& shapes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Matrix> out;
  for (auto [r, c] : shapes) {
    auto v = read_f32_le(in, static_cast<std::size_t>(r * c));
    Matrix m(r, c);
    std::copy(v.begin(), v.end(), m.data());
    out.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in " + path.string());
  return out;
}

nlohmann::ordered_json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing checkpoint manifest in " + dir.string());
  auto j = nlohmann::ordered_json::parse(in);
  if (j.value("format", "") != kFormat) throw CompatibilityError("unknown checkpoint format in " + dir.string());
  return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const model::Model& m, const AdamW& opt,
                     const Settings& settings, const kb::Vocabulary& vocab, int step) {
  std::filesystem::create_directories(dir);
  Settings s = settings;
  s.model = m.config();
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["step"] = step;
  j["optimizer_steps"] = opt.steps_taken();
  j["seed"] = s.seed;
  j["architecture_hash"] = architecture_hash(m.config());
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  const Config dumped = settings_to_config(s);
  for (const auto& [k, v] : dumped.values()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  std::vector<const Matrix*> params;
  Eigen::Index offset = 0;
  for (const auto& e : m.params().entries()) {
    index.push_back({{"name", e.name}, {"rows", e.tensor.rows()}, {"cols", e.tensor.cols()}, {"offset", offset}});
    offset += e.tensor.size();
    params.push_back(&e.tensor.value());
  }
  j["params"] = index;
  j["num_scalars"] = offset;
  std::ofstream(dir / "manifest.json") << j.dump(2) << '\n';

  write_blob(dir / "params.bin", params);
  std::vector<const Matrix*> ms, vs;
  for (const auto& x : opt.first_moments()) ms.push_back(&x);
  for (const auto& x : opt.second_moments()) vs.push_back(&x);
  write_blob(dir / "adam_m.bin", ms);
  write_blob(dir / "adam_v.bin", vs);
  vocab.save(dir / "vocab.txt");
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir) {
  const auto j = read_manifest(dir);
  CheckpointInfo info;
  info.step = j.at("step").get<int>();
  info.optimizer_steps = j.at("optimizer_steps").get<std::int64_t>();
  info.architecture = j.at("architecture_hash").get<std::uint64_t>();
  Config c;
  for (const auto& [k, v] : j.at("config").items()) c.set(k, v.get<std::string>());
  info.settings = settings_from_config(c);
  info.vocab = kb::Vocabulary::load(dir / "vocab.txt");
  return info;
}

CheckpointInfo load_checkpoint(const std::filesystem::path& dir, model::Model& m, AdamW* opt) {
  CheckpointInfo info = read_checkpoint_info(dir);
  if (info.architecture != architecture_hash(m.config())) {
    throw CompatibilityError("checkpoint " + dir.string() + " was saved for a different architecture");
  }
  const auto j = read_manifest(dir);
  const auto& entries = m.params().entries();
  const auto& index = j.at("params");
  if (index.size() != entries.size()) throw CompatibilityError("checkpoint parameter count differs from the model");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = index[i];
    if (p.at("name").get<std::string>() != entries[i].name || p.at("rows").get<Eigen::Index>() != entries[i].tensor.rows() ||
        p.at("cols").get<Eigen::Index>() != entries[i].tensor.cols()) {
      throw CompatibilityError("checkpoint parameter " + p.at("name").get<std::string>() + " does not match the model");
    }
    shapes.emplace_back(entries[i].tensor.rows(), entries[i].tensor.cols());
  }
  auto values = read_blob(dir / "params.bin", shapes);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Tensor t = entries[i].tensor;
    t.mutable_value() = values[i];
  }
  if (opt) opt->restore(info.optimizer_steps, read_blob(dir / "adam_m.bin", shapes), read_blob(dir / "adam_v.bin", shapes));
  return info;
}

}  // namespace kvlp::train
