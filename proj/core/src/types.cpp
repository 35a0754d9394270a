#include "ecgtta/types.hpp"

#include <algorithm>
#include <cmath>

namespace ecgtta {

char label_code(Label l) {
  switch (l) {
    case Label::Normal: return 'N';
    case Label::AF: return 'A';
    case Label::Other: return 'O';
    case Label::Noisy: return '~';
  }
  throw std::invalid_argument("label_code: invalid label");
}

Label label_from_code(char c) {
  switch (c) {
    case 'N': return Label::Normal;
    case 'A': return Label::AF;
    case 'O': return Label::Other;
    case '~': return Label::Noisy;
    default:
      throw std::invalid_argument(std::string("unknown label code '") + c + "'");
  }
}

const char* label_name(Label l) {
  switch (l) {
    case Label::Normal: return "Normal";
    case Label::AF: return "AF";
    case Label::Other: return "Other";
    case Label::Noisy: return "Noisy";
  }
  return "?";
}

void EcgRecord::validate() const {
  if (samples.empty()) throw std::invalid_argument("EcgRecord: empty samples");
  if (fs_hz < 1) throw std::invalid_argument("EcgRecord: fs_hz must be >= 1");
  for (float v : samples) {
    if (!std::isfinite(v))
      throw std::invalid_argument("EcgRecord '" + id + "': non-finite sample");
  }
}

Label ProbVector::argmax() const {
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<Label>(best);
}

void ProbVector::validate(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("ProbVector: probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument("ProbVector: probabilities do not sum to 1");
}

double f1_score(const ConfusionCounts& c) {
  if (c.tp + c.fp + c.fn == 0)
    throw MetricError("f1_score undefined: tp + fp + fn = 0");
  double precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  double recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw MetricError("accuracy undefined: no evaluated records");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

ConfusionCounts af_confusion(const std::vector<std::pair<Label, Label>>& pairs) {
  ConfusionCounts c;
  for (auto [truth, pred] : pairs) {
    bool t = binarize(truth), p = binarize(pred);
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (t && !p) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double macro_f1(const std::vector<std::pair<Label, Label>>& pairs) {
  double sum = 0.0;
  int used = 0;
  for (Label cls : kAllLabels) {
    ConfusionCounts c;
    for (auto [truth, pred] : pairs) {
      bool t = truth == cls, p = pred == cls;
      if (t && p) ++c.tp;
      else if (!t && p) ++c.fp;
      else if (t && !p) ++c.fn;
      else ++c.tn;
    }
    if (c.tp + c.fp + c.fn == 0) continue;
    sum += f1_score(c);
    ++used;
  }
  if (used == 0) throw MetricError("macro_f1 undefined: no occupied classes");
  return sum / used;
}

double binary_accuracy(const std::vector<std::pair<Label, Label>>& pairs) {
  return accuracy(af_confusion(pairs));
}

}  // namespace ecgtta
