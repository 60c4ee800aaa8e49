#include "kvlp/objectives/masking.hpp"

#include "kvlp/kb/text.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kvlp::obj {

int mask_target(int n_tokens, double ratio) {
  if (n_tokens <= 0) return 0;
  const int t = static_cast<int>(std::lround(ratio * n_tokens));
  return std::clamp(t, 1, n_tokens);
}

namespace {

void fill_random(std::vector<char>& masked, int target, int& count, Rng& rng) {
  std::vector<int> free;
  for (int i = 0; i < static_cast<int>(masked.size()); ++i) {
    if (!masked[static_cast<std::size_t>(i)]) free.push_back(i);
  }
  const int need = std::min<int>(target - count, static_cast<int>(free.size()));
  if (need <= 0) return;
  for (int k : sample_without_replacement(rng, static_cast<int>(free.size()), need)) {
    masked[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])] = 1;
    ++count;
  }
}

std::vector<int> positions_of(const std::vector<char>& masked) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(masked.size()); ++i) {
    if (masked[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

}  // namespace

MaskPlan knowledge_mask(int n_tokens, const std::vector<kb::EntityMention>& mentions, double ratio, Rng& rng) {
  MaskPlan plan;
  const int target = mask_target(n_tokens, ratio);
  std::vector<char> masked(static_cast<std::size_t>(std::max(n_tokens, 0)), 0);
  int count = 0;
  if (!mentions.empty()) {
    plan.entity_driven = true;
    std::vector<int> order(mentions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    shuffle(order, rng);
    for (int m : order) {
      if (count >= target) break;
      const auto& e = mentions[static_cast<std::size_t>(m)];
      if (e.end > static_cast<std::size_t>(n_tokens)) throw std::out_of_range("knowledge_mask: mention past text end");
      for (std::size_t t = e.begin; t < e.end; ++t) {
        count += !masked[t];
        masked[t] = 1;
      }
      plan.sampled_entities.push_back(m);
    }
  }
  fill_random(masked, target, count, rng);
  plan.token_positions = positions_of(masked);
  return plan;
}

MaskPlan knowledge_mask(const kb::LinkedText& linked, double ratio, Rng& rng) {
  return knowledge_mask(static_cast<int>(linked.num_tokens()), linked.entities, ratio, rng);
}

MaskPlan random_token_mask(int n_tokens, double ratio, Rng& rng) {
  MaskPlan plan;
  std::vector<char> masked(static_cast<std::size_t>(std::max(n_tokens, 0)), 0);
  int count = 0;
  fill_random(masked, mask_target(n_tokens, ratio), count, rng);
  plan.token_positions = positions_of(masked);
  return plan;
}

std::vector<int> patch_mask(int n_patches, double ratio, Rng& rng) {
  const int k = static_cast<int>(std::lround(ratio * n_patches));
  auto idx = sample_without_replacement(rng, n_patches, std::clamp(k, 0, n_patches));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> apply_token_mask(const std::vector<int>& ids, const MaskPlan& plan, int vocab_size, Rng& rng) {
  std::vector<int> out = ids;
  const int first_regular = kb::Vocabulary::kSep + 1;
  for (int pos : plan.token_positions) {
    if (pos < 0 || pos >= static_cast<int>(ids.size())) throw std::out_of_range("apply_token_mask: position");
    if (plan.replacement == Replacement::kMaskToken) {
      out[static_cast<std::size_t>(pos)] = kb::Vocabulary::kMask;
      continue;
    }
    const double u = uniform_real(rng);
    if (u < 0.8) {
      out[static_cast<std::size_t>(pos)] = kb::Vocabulary::kMask;
    } else if (u < 0.9 && vocab_size > first_regular) {
      out[static_cast<std::size_t>(pos)] =
          first_regular + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(vocab_size - first_regular)));
    }
  }
  return out;
}

}  // namespace kvlp::obj
