#pragma once

#include <span>
#include <vector>

#include "fedmood/data.hpp"
#include "fedmood/model.hpp"

namespace fedmood {

struct Prediction {
  int sample_index = 0;
  int predicted = 0;
  int actual = 0;
};

// correct / total; throws on empty input.
double accuracy(std::span<const Prediction> preds);

// F1 on the positive class (1): 2PR/(P+R), 0 when P+R == 0; throws on empty.
double f_score(std::span<const Prediction> preds);

struct EvalResult {
  double accuracy = 0.0;
  double f_score = 0.0;
  std::vector<Prediction> predictions;
};

// Argmax over logits, dropout off; logit ties resolve to the lower class.
EvalResult evaluate_model(const ModelParams& params,
                          std::span<const SessionSample> samples);

}  // namespace fedmood
