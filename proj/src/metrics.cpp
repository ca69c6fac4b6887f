#include "fedmood/metrics.hpp"

#include <stdexcept>

#include "fedmood/trainer.hpp"

namespace fedmood {

double accuracy(std::span<const Prediction> preds) {
  if (preds.empty()) throw std::invalid_argument("accuracy: no predictions");
  int correct = 0;
  for (const Prediction& p : preds) {
    if (p.predicted == p.actual) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double f_score(std::span<const Prediction> preds) {
  if (preds.empty()) throw std::invalid_argument("f_score: no predictions");
  int tp = 0, fp = 0, fn = 0;
  for (const Prediction& p : preds) {
    if (p.predicted == 1 && p.actual == 1) ++tp;
    if (p.predicted == 1 && p.actual == 0) ++fp;
    if (p.predicted == 0 && p.actual == 1) ++fn;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalResult evaluate_model(const ModelParams& params,
                          std::span<const SessionSample> samples) {
  EvalResult result;
  result.predictions.reserve(samples.size());
  ModelWorkspace ws;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    const ForwardResult fwd = model_forward_loss(params, samples[i], /*train_mode=*/false, ws);
    int best = 0;
    for (int c = 1; c < static_cast<int>(fwd.logits.size()); ++c) {
      if (fwd.logits[c] > fwd.logits[best]) best = c;  // ties keep the lower class
    }
    result.predictions.push_back({i, best, samples[i].label});
  }
  result.accuracy = accuracy(result.predictions);
  result.f_score = f_score(result.predictions);
  return result;
}

}  // namespace fedmood
