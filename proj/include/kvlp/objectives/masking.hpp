#pragma once

#include "kvlp/kb/linker.hpp"
#include "kvlp/util/rng.hpp"

#include <vector>

namespace kvlp::obj {

enum class Replacement {
  kMaskToken,  // every masked position becomes [MASK]
  kBertSplit,  // 80% [MASK], 10% random token, 10% unchanged
};

struct MaskPlan {
  std::vector<int> token_positions;   // sorted content-token indices (0 = first word, not [CLS])
  std::vector<int> sampled_entities;  // mention indices chosen, in sampling order
  std::vector<int> patch_indices;     // sorted 0-based patch indices
  bool entity_driven = false;         // false when the random fallback was used
  Replacement replacement = Replacement::kMaskToken;
};

// Number of tokens a mask of `ratio` targets: max(1, round(ratio · n)), 0 for n = 0.
int mask_target(int n_tokens, double ratio);

// Samples mentions uniformly without replacement and masks each whole span
// until the masked count reaches mask_target. If the mentions run out first,
// the remainder is filled with random unmasked tokens; with no mentions at
// all this is plain random masking.
MaskPlan knowledge_mask(const kb::LinkedText& linked, double ratio, Rng& rng);
MaskPlan knowledge_mask(int n_tokens, const std::vector<kb::EntityMention>& mentions, double ratio, Rng& rng);

// mask_target(n, ratio) positions drawn uniformly without replacement.
MaskPlan random_token_mask(int n_tokens, double ratio, Rng& rng);

// round(ratio · n_patches) patch indices drawn uniformly without replacement.
std::vector<int> patch_mask(int n_patches, double ratio, Rng& rng);

// Token ids with the plan applied. Random replacements are drawn from the
// non-special range [first_regular_id, vocab_size).
std::vector<int> apply_token_mask(const std::vector<int>& ids, const MaskPlan& plan, int vocab_size, Rng& rng);

}  // namespace kvlp::obj
