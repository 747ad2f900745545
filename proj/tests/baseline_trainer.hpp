#pragma once

// Plain joint intent + slot trainer used as the ablation reference. It is
// built only from the encoder, the cross-entropy terms and Adam, so it
// never touches a negative queue or any contrastive loss.

#include <numeric>
#include <span>
#include <vector>

#include "glclef/encoder.hpp"
#include "glclef/numcore.hpp"
#include "glclef/trainer.hpp"

namespace testutil {

// One Adam step on the batch mean of lambda_I L_I + lambda_S L_S.
inline void baseline_step(std::span<const glclef::EncodedExample> batch, glclef::EncoderParams& params,
                          glclef::Adam& optimizer, double lambda_intent, double lambda_slot) {
  using namespace glclef;
  params.set_requires_grad(true);
  params.zero_grad();
  Tape tape;
  const BoundParams bp = bind(tape, params);
  Var total = tape.constant(Tensor(1, 1, 0.0));
  for (const auto& ex : batch) {
    const EncOutput enc = encode(bp, ex.ids);
    const Var li = intent_ce_loss(intent_distribution(bp, enc.h_cls), ex.intent);
    const Var ls = slot_ce_loss(slot_distributions(bp, enc.tokens), ex.slots);
    total = add(total, add(scale(li, lambda_intent), scale(ls, lambda_slot)));
  }
  tape.backward(scale(total, 1.0 / static_cast<double>(batch.size())));
  optimizer.step(params);
}

}  // namespace testutil
