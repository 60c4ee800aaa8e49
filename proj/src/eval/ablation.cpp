#include "kvlp/eval/ablation.hpp"

#include "kvlp/train/trainer.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace kvlp::eval {

namespace {

nlohmann::ordered_json report_json(const RetrievalReport& r) {
  return {{"direction", to_string(r.direction)}, {"mode", to_string(r.mode)}, {"pool", r.pool},
          {"recall@1", r.r1},                    {"recall@5", r.r5},          {"recall@10", r.r10}};
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool AblationGrid::full_not_below_baseline() const {
  return rows.size() == 8 && rows[7].zero_shot.t2i.r1 >= rows[0].zero_shot.t2i.r1;
}

std::array<model::KnowledgeToggles, 8> ablation_layout() {
  return {{{false, false, false},
           {true, false, false},
           {false, true, false},
           {false, false, true},
           {true, true, false},
           {true, false, true},
           {false, true, true},
           {true, true, true}}};
}

AblationGrid run_ablation(const train::Settings& base, const std::filesystem::path& out) {
  AblationGrid grid;
  const auto layout = ablation_layout();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    train::Settings s = base;
    s.model.knowledge = layout[i];
    s.model.fusion.rk_enabled = layout[i].rk;
    const auto dir = out / ("id" + std::to_string(i + 1));
    const auto run = train::pretrain(s, dir);
    const auto t = train::load_trained(s, run.final_checkpoint);
    const auto test = data::split_view(t.data.samples, kb::Split::kTest);
    AblationRow row;
    row.id = static_cast<int>(i + 1);
    row.knowledge = layout[i];
    row.zero_shot = rank_retrieval(score_matrix(*t.model, t.data.entities, test, test));
    row.final_mlm = run.trace.empty() ? 0.0 : run.trace.back().mlm;
    grid.rows.push_back(row);
  }
  return grid;
}

void write_ablation(const AblationGrid& g, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::ofstream csv(out / "ablation.csv");
  csv << "id,ak,rk,lk,t2i_r1,t2i_r5,t2i_r10,i2t_r1,i2t_r5,i2t_r10,pool,final_mlm\n";
  for (const auto& r : g.rows) {
    rows.push_back({{"id", r.id},
                    {"ak", r.knowledge.ak},
                    {"rk", r.knowledge.rk},
                    {"lk", r.knowledge.lk},
                    {"t2i", report_json(r.zero_shot.t2i)},
                    {"i2t", report_json(r.zero_shot.i2t)},
                    {"final_mlm", r.final_mlm}});
    const auto& a = r.zero_shot.t2i;
    const auto& b = r.zero_shot.i2t;
    csv << r.id << ',' << r.knowledge.ak << ',' << r.knowledge.rk << ',' << r.knowledge.lk << ',' << num(a.r1) << ','
        << num(a.r5) << ',' << num(a.r10) << ',' << num(b.r1) << ',' << num(b.r5) << ',' << num(b.r10) << ','
        << a.pool << ',' << num(r.final_mlm) << '\n';
  }
  nlohmann::ordered_json j = {{"rows", rows}, {"id8_ge_id1", g.full_not_below_baseline()}};
  std::ofstream(out / "ablation.json") << j.dump(2) << '\n';
}

void write_reports(const std::vector<RetrievalReport>& reports, const std::filesystem::path& json_path,
                   const std::filesystem::path& csv_path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  std::ofstream csv(csv_path);
  csv << "direction,mode,pool,r1,r5,r10\n";
  for (const auto& r : reports) {
    j.push_back(report_json(r));
    csv << to_string(r.direction) << ',' << to_string(r.mode) << ',' << r.pool << ',' << num(r.r1) << ',' << num(r.r5)
        << ',' << num(r.r10) << '\n';
  }
  std::ofstream(json_path) << j.dump(2) << '\n';
}

}  // namespace kvlp::eval
