#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgtta {

// Rhythm classes in canonical order (N, A, O, ~), matching the
// PhysioNet 2017 single-character codes.
enum class Label : std::uint8_t { Normal = 0, AF = 1, Other = 2, Noisy = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<Label, 4> kAllLabels = {Label::Normal, Label::AF,
                                                    Label::Other, Label::Noisy};

char label_code(Label l);
Label label_from_code(char c);
const char* label_name(Label l);

// AF is the clinical positive; everything else (including Other and Noisy)
// counts as negative.
inline bool binarize(Label l) { return l == Label::AF; }

// Single-lead voltage time series. Samples are stored as float so that the
// on-disk binary32 format round-trips bit-exactly.
struct EcgRecord {
  std::string id;
  std::vector<float> samples;
  std::uint32_t fs_hz = 0;
  std::optional<Label> label;

  double duration_s() const {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) / fs_hz;
  }
  void validate() const;  // throws std::invalid_argument on violation
};

// Probability distribution over the four classes in canonical order.
struct ProbVector {
  std::array<double, 4> probs{};

  double operator[](Label l) const { return probs[static_cast<int>(l)]; }
  Label argmax() const;
  void validate(double tol = 1e-6) const;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary F1 = 2PR/(P+R); 0 when precision + recall is 0.
// Throws MetricError when tp + fp + fn = 0 (metric undefined).
double f1_score(const ConfusionCounts& c);

// (tp + tn) / total. Throws MetricError on an empty evaluation.
double accuracy(const ConfusionCounts& c);

// Confusion counts for the AF-positive binarization of (truth, prediction)
// pairs.
ConfusionCounts af_confusion(const std::vector<std::pair<Label, Label>>& pairs);

// Mean of the per-class F1 scores over the classes that occur at all
// (tp + fp + fn > 0); classes entirely absent from truth and predictions are
// excluded from the average.
double macro_f1(const std::vector<std::pair<Label, Label>>& pairs);

// Binary accuracy of the AF-positive binarization.
double binary_accuracy(const std::vector<std::pair<Label, Label>>& pairs);

}  // namespace ecgtta
