#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcgan/data.hpp"

namespace stcgan {

// Shadow is the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

inline constexpr double kMaskThreshold = 0.5;

// pred holds per-pixel shadow probabilities in [0,1]; gt is a {0,255} mask.
// A pixel is predicted shadow iff pred >= threshold.
ConfusionCounts confusion(const std::vector<double>& pred, const Image& gt,
                          double threshold = kMaskThreshold);
// Same, with a gray mask image scaled by 1/255.
ConfusionCounts confusion(const Image& pred_mask, const Image& gt,
                          double threshold = kMaskThreshold);

struct BerBreakdown {
  double ber = 0;            // percent
  double shadow_err = 0;     // 100 * FN / (TP + FN)
  double nonshadow_err = 0;  // 100 * FP / (TN + FP)
  // True when one class has no ground-truth pixels; its error term is taken as 0.
  bool degenerate = false;
};

BerBreakdown ber_breakdown(const ConfusionCounts& c);
double ber(const ConfusionCounts& c);

// Running sum of squared LAB distances over the pixels of one region.
struct RegionSquares {
  double sum_sq = 0;
  std::uint64_t pixels = 0;

  RegionSquares& operator+=(const RegionSquares& o) {
    sum_sq += o.sum_sq;
    pixels += o.pixels;
    return *this;
  }
  bool present() const { return pixels > 0; }
  // sqrt(sum over pixels of |dLab|^2 / pixels); 0 for an empty region.
  double rmse() const;
};

struct RmseAccumulator {
  RegionSquares shadow, nonshadow, all;

  RmseAccumulator& operator+=(const RmseAccumulator& o);
};

RmseAccumulator rmse_lab_squares(const LabImage& pred, const LabImage& gt, const Image& gt_mask);

struct RmseSplit {
  double shadow = 0, nonshadow = 0, all = 0;
  bool shadow_present = true, nonshadow_present = true;
};

RmseSplit rmse_split(const RmseAccumulator& acc);
// Region membership follows the ground-truth mask.
RmseSplit rmse_lab(const Image& pred, const Image& gt, const Image& gt_mask);
RmseSplit rmse_lab(const LabImage& pred, const LabImage& gt, const Image& gt_mask);

struct MetricReport {
  std::optional<BerBreakdown> detection;
  std::optional<RmseSplit> removal;
};

MetricReport make_report(const ConfusionCounts* counts, const RmseAccumulator* squares);

// What a method produces for one triplet. Either member may be absent.
struct Prediction {
  std::optional<std::vector<double>> mask;  // shadow probability per pixel, row-major
  std::optional<Image> image;               // recovered shadow-free RGB
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  virtual Prediction predict(const Triplet& t) = 0;
};

// Copies the ground truth: BER 0 and RMSE 0.
class OraclePredictor : public Predictor {
 public:
  std::string name() const override { return "oracle"; }
  Prediction predict(const Triplet& t) override;
};

// Returns the shadow image unchanged and no mask.
class IdentityPredictor : public Predictor {
 public:
  std::string name() const override { return "identity"; }
  Prediction predict(const Triplet& t) override;
};

struct EvalResult {
  std::string method;
  MetricReport aggregate;  // pooled over all pixels of the set
  std::vector<std::pair<std::string, MetricReport>> per_image;
};

EvalResult evaluate(Predictor& predictor, const std::vector<Triplet>& triplets);

// Human-readable table: detection rows Shadow / Non-shadow / BER, removal rows
// Shadow / Non-shadow / All.
std::string format_table(const EvalResult& result);
// One `id<TAB>metric<TAB>value` line per metric; aggregate rows use id "ALL".
std::string format_tsv(const EvalResult& result);

}  // namespace stcgan
