#include "stcgan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace stcgan {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(const std::vector<double>& pred, const Image& gt, double threshold) {
  if (gt.channels != 1 || pred.size() != gt.width * gt.height) {
    throw ConfigError("confusion: prediction and ground truth differ in shape");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool g = gt.pixels[i] >= 128;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const Image& pred_mask, const Image& gt, double threshold) {
  if (pred_mask.channels != 1) throw ConfigError("confusion: predicted mask must be gray");
  std::vector<double> p(pred_mask.pixels.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = pred_mask.pixels[i] / 255.0;
  if (pred_mask.width != gt.width || pred_mask.height != gt.height) {
    throw ConfigError("confusion: prediction and ground truth differ in shape");
  }
  return confusion(p, gt, threshold);
}

BerBreakdown ber_breakdown(const ConfusionCounts& c) {
  BerBreakdown b;
  const std::uint64_t pos = c.tp + c.fn, neg = c.tn + c.fp;
  b.degenerate = pos == 0 || neg == 0;
  b.shadow_err = pos == 0 ? 0.0 : 100.0 * static_cast<double>(c.fn) / static_cast<double>(pos);
  b.nonshadow_err = neg == 0 ? 0.0 : 100.0 * static_cast<double>(c.fp) / static_cast<double>(neg);
  b.ber = 0.5 * (b.shadow_err + b.nonshadow_err);
  return b;
}

double ber(const ConfusionCounts& c) { return ber_breakdown(c).ber; }

double RegionSquares::rmse() const {
  return pixels == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(pixels));
}

RmseAccumulator& RmseAccumulator::operator+=(const RmseAccumulator& o) {
  shadow += o.shadow;
  nonshadow += o.nonshadow;
  all += o.all;
  return *this;
}

RmseAccumulator rmse_lab_squares(const LabImage& pred, const LabImage& gt, const Image& gt_mask) {
  if (pred.width != gt.width || pred.height != gt.height || gt_mask.channels != 1 ||
      gt_mask.width != gt.width || gt_mask.height != gt.height) {
    throw ConfigError("rmse_lab: images differ in shape");
  }
  RmseAccumulator acc;
  for (std::size_t i = 0; i < gt.width * gt.height; ++i) {
    double d2 = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = pred.values[3 * i + c] - gt.values[3 * i + c];
      d2 += d * d;
    }
    RegionSquares& region = gt_mask.pixels[i] >= 128 ? acc.shadow : acc.nonshadow;
    region.sum_sq += d2;
    ++region.pixels;
    acc.all.sum_sq += d2;
    ++acc.all.pixels;
  }
  return acc;
}

RmseSplit rmse_split(const RmseAccumulator& acc) {
  RmseSplit s;
  s.shadow = acc.shadow.rmse();
  s.nonshadow = acc.nonshadow.rmse();
  s.all = acc.all.rmse();
  s.shadow_present = acc.shadow.present();
  s.nonshadow_present = acc.nonshadow.present();
  return s;
}

RmseSplit rmse_lab(const LabImage& pred, const LabImage& gt, const Image& gt_mask) {
  return rmse_split(rmse_lab_squares(pred, gt, gt_mask));
}

RmseSplit rmse_lab(const Image& pred, const Image& gt, const Image& gt_mask) {
  return rmse_lab(rgb_to_lab(pred), rgb_to_lab(gt), gt_mask);
}

MetricReport make_report(const ConfusionCounts* counts, const RmseAccumulator* squares) {
  MetricReport r;
  if (counts != nullptr) r.detection = ber_breakdown(*counts);
  if (squares != nullptr) r.removal = rmse_split(*squares);
  return r;
}

Prediction OraclePredictor::predict(const Triplet& t) {
  Prediction p;
  std::vector<double> mask(t.mask.pixels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = t.mask.pixels[i] >= 128 ? 1.0 : 0.0;
  p.mask = std::move(mask);
  p.image = t.shadow_free;
  return p;
}

Prediction IdentityPredictor::predict(const Triplet& t) {
  Prediction p;
  p.image = t.shadow;
  return p;
}

EvalResult evaluate(Predictor& predictor, const std::vector<Triplet>& triplets) {
  EvalResult result;
  result.method = predictor.name();
  ConfusionCounts total_counts;
  RmseAccumulator total_squares;
  bool any_mask = false, any_image = false;
  for (const Triplet& t : triplets) {
    const Prediction p = predictor.predict(t);
    ConfusionCounts counts;
    RmseAccumulator squares;
    if (p.mask) {
      counts = confusion(*p.mask, t.mask);
      total_counts += counts;
      any_mask = true;
    }
    if (p.image) {
      squares = rmse_lab_squares(rgb_to_lab(*p.image), rgb_to_lab(t.shadow_free), t.mask);
      total_squares += squares;
      any_image = true;
    }
    result.per_image.emplace_back(
        t.id, make_report(p.mask ? &counts : nullptr, p.image ? &squares : nullptr));
  }
  result.aggregate =
      make_report(any_mask ? &total_counts : nullptr, any_image ? &total_squares : nullptr);
  return result;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void tsv_rows(std::ostringstream& os, const std::string& id, const MetricReport& r) {
  if (r.detection) {
    os << id << "\tshadow_err\t" << exact(r.detection->shadow_err) << "\n";
    os << id << "\tnonshadow_err\t" << exact(r.detection->nonshadow_err) << "\n";
    os << id << "\tber\t" << exact(r.detection->ber) << "\n";
    if (r.detection->degenerate) os << id << "\tber_degenerate\t1\n";
  }
  if (r.removal) {
    os << id << "\trmse_shadow\t"
       << (r.removal->shadow_present ? exact(r.removal->shadow) : "NA") << "\n";
    os << id << "\trmse_nonshadow\t"
       << (r.removal->nonshadow_present ? exact(r.removal->nonshadow) : "NA") << "\n";
    os << id << "\trmse_all\t" << exact(r.removal->all) << "\n";
  }
}

}  // namespace

std::string format_table(const EvalResult& result) {
  std::ostringstream os;
  const MetricReport& r = result.aggregate;
  os << "method: " << result.method << " (" << result.per_image.size() << " images)\n";
  if (r.detection) {
    os << "Detection       BER (%)\n";
    os << "  Shadow        " << fixed(r.detection->shadow_err) << "\n";
    os << "  Non-shadow    " << fixed(r.detection->nonshadow_err) << "\n";
    os << "  BER           " << fixed(r.detection->ber)
       << (r.detection->degenerate ? "  (one class absent)" : "") << "\n";
  } else {
    os << "Detection       --\n";
  }
  if (r.removal) {
    os << "Removal         RMSE (LAB)\n";
    os << "  Shadow        " << (r.removal->shadow_present ? fixed(r.removal->shadow) : "--")
       << "\n";
    os << "  Non-shadow    "
       << (r.removal->nonshadow_present ? fixed(r.removal->nonshadow) : "--") << "\n";
    os << "  All           " << fixed(r.removal->all) << "\n";
  } else {
    os << "Removal         --\n";
  }
  return os.str();
}

std::string format_tsv(const EvalResult& result) {
  std::ostringstream os;
  for (const auto& [id, r] : result.per_image) tsv_rows(os, id, r);
  tsv_rows(os, "ALL", result.aggregate);
  return os.str();
}

}  // namespace stcgan
