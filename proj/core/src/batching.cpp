#include "vlmprep/batching.hpp"

#include <stdexcept>

#include "vlmprep/rng.hpp"

namespace vlmprep::batching {

namespace {

std::vector<Batch> cut_batches(std::vector<std::string> ids,
                               mixture::Modality modality, int batch_size) {
  std::vector<Batch> batches;
  batches.reserve((ids.size() + batch_size - 1) / batch_size);
  for (std::size_t begin = 0; begin < ids.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(ids.size(), begin + static_cast<std::size_t>(batch_size));
    Batch batch;
    batch.modality = modality;
    batch.ids.assign(std::make_move_iterator(ids.begin() + static_cast<std::ptrdiff_t>(begin)),
                     std::make_move_iterator(ids.begin() + static_cast<std::ptrdiff_t>(end)));
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace

BatchPlan plan_batches(std::span<const mixture::Conversation> mixture,
                       int batch_size, std::uint64_t seed) {
  if (batch_size < 1) {
    throw std::invalid_argument("plan_batches: batch_size must be positive");
  }
  if (mixture.empty()) {
    throw std::invalid_argument("plan_batches: mixture is empty");
  }

  std::vector<std::string> visual_ids;
  std::vector<std::string> text_ids;
  for (const mixture::Conversation& conv : mixture) {
    (conv.modality == mixture::Modality::visual ? visual_ids : text_ids)
        .push_back(conv.id);
  }

  // Draw order is fixed: visual shuffle, text shuffle, then one draw per
  // emitted batch.
  Rng rng(seed);
  shuffle(visual_ids, rng);
  shuffle(text_ids, rng);

  std::vector<Batch> visual = cut_batches(std::move(visual_ids),
                                          mixture::Modality::visual, batch_size);
  std::vector<Batch> text =
      cut_batches(std::move(text_ids), mixture::Modality::text, batch_size);

  BatchPlan plan;
  plan.batch_size = batch_size;
  plan.seed = seed;
  plan.batches.reserve(visual.size() + text.size());

  std::size_t v = 0;
  std::size_t t = 0;
  while (v < visual.size() || t < text.size()) {
    const std::uint64_t v_left = visual.size() - v;
    const std::uint64_t t_left = text.size() - t;
    // Pick the next batch's modality with probability proportional to the
    // batches it still owes; a modality with none left is never drawn.
    const bool take_visual = rng.next_below(v_left + t_left) < v_left;
    plan.batches.push_back(take_visual ? std::move(visual[v++])
                                       : std::move(text[t++]));
  }
  return plan;
}

}  // namespace vlmprep::batching
