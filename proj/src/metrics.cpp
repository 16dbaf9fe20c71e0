#include "co2stream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

namespace co2stream::metrics {

namespace {

std::vector<std::size_t> by_descending_confidence(std::span<const Prediction> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });
  return order;
}

std::unordered_map<std::string, std::size_t> index_images(std::span<const GroundTruthSample> gts) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < gts.size(); ++i) idx.emplace(gts[i].image_id, i);
  return idx;
}

std::size_t count_gt(std::span<const GroundTruthSample> gts, const std::string& cls) {
  std::size_t n = 0;
  for (const auto& s : gts) {
    for (const auto& o : s.objects) n += o.cls == cls ? 1 : 0;
  }
  return n;
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Curve over (confidence, tp) entries already sorted by descending confidence.
std::vector<CurvePoint> sweep(const std::vector<std::pair<double, bool>>& ranked, std::size_t n_gt) {
  std::vector<CurvePoint> desc;
  std::size_t tp = 0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    const double c = ranked[i].first;
    while (i < ranked.size() && ranked[i].first == c) {
      tp += ranked[i].second ? 1 : 0;
      ++i;
    }
    const double p = static_cast<double>(tp) / static_cast<double>(i);
    const double r = n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0;
    desc.push_back({c, p, r, f1_of(p, r)});
  }
  std::vector<CurvePoint> asc(desc.rbegin(), desc.rend());
  if (asc.empty()) {
    asc.push_back({0.0, 0.0, 0.0, 0.0});
  } else if (asc.front().confidence > 0.0) {
    CurvePoint zero = asc.front();
    zero.confidence = 0.0;
    asc.insert(asc.begin(), zero);
  }
  return asc;
}

template <typename Fn>
void greedy_match(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts, double iou_thresh,
                  IouKind kind, bool same_class_only, const std::vector<std::size_t>& order, Fn&& on_result,
                  std::vector<std::vector<bool>>& gt_matched) {
  const auto images = index_images(gts);
  gt_matched.assign(gts.size(), {});
  for (std::size_t s = 0; s < gts.size(); ++s) gt_matched[s].assign(gts[s].objects.size(), false);

  for (std::size_t pi : order) {
    const Prediction& p = preds[pi];
    auto img = images.find(p.image_id);
    if (img == images.end()) {
      on_result(pi, std::optional<std::pair<std::size_t, std::size_t>>{});
      continue;
    }
    const GroundTruthSample& sample = gts[img->second];
    double best = -1.0;
    std::optional<std::size_t> best_obj;
    for (std::size_t o = 0; o < sample.objects.size(); ++o) {
      if (gt_matched[img->second][o]) continue;
      const auto& obj = sample.objects[o];
      if (same_class_only && obj.cls != p.cls) continue;
      const double iou = region_iou(p.box, p.mask, obj.box, obj.mask, kind);
      if (iou >= iou_thresh && iou > best) {
        best = iou;
        best_obj = o;
      }
    }
    if (best_obj) {
      gt_matched[img->second][*best_obj] = true;
      on_result(pi, std::optional<std::pair<std::size_t, std::size_t>>{{img->second, *best_obj}});
    } else {
      on_result(pi, std::optional<std::pair<std::size_t, std::size_t>>{});
    }
  }
}

}  // namespace

std::vector<GroundTruthSample> ground_truth_from(std::span<const ImageRecord> records) {
  std::vector<GroundTruthSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    GroundTruthSample s{r.image_id, {}, r.width, r.height};
    for (const auto& d : r.detections) s.objects.push_back({d.label, d.box, d.mask});
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Prediction> predictions_from(std::span<const ImageRecord> records) {
  std::vector<Prediction> out;
  for (const auto& r : records) {
    for (const auto& d : r.detections) out.push_back({r.image_id, d.label, d.confidence, d.box, d.mask});
  }
  return out;
}

double region_iou(const BoundingBox& a_box, const std::optional<PolygonMask>& a_mask, const BoundingBox& b_box,
                  const std::optional<PolygonMask>& b_mask, IouKind kind) {
  if (kind == IouKind::Box) return box_iou(a_box, b_box);
  try {
    if (kind == IouKind::MaskRaster) {
      return polygon_iou_raster(a_mask ? *a_mask : to_polygon(a_box), b_mask ? *b_mask : to_polygon(b_box));
    }
    return polygon_iou(a_mask ? *a_mask : to_polygon(a_box), b_mask ? *b_mask : to_polygon(b_box));
  } catch (const DegeneratePolygon&) {
    return 0.0;
  }
}

MatchResult match_predictions(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                              double iou_thresh, IouKind kind) {
  MatchResult r;
  r.true_positive.assign(preds.size(), false);
  greedy_match(
      preds, gts, iou_thresh, kind, true, by_descending_confidence(preds),
      [&](std::size_t pi, const std::optional<std::pair<std::size_t, std::size_t>>& m) {
        r.true_positive[pi] = m.has_value();
      },
      r.gt_matched);
  return r;
}

double average_precision(const std::vector<bool>& flags, std::size_t n_gt) {
  if (n_gt == 0) return flags.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  const std::size_t n = flags.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += flags[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Precision envelope: running maximum from the right.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::vector<std::string> class_list(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts) {
  std::set<std::string> s;
  for (const auto& p : preds) s.insert(p.cls);
  for (const auto& g : gts) {
    for (const auto& o : g.objects) s.insert(o.cls);
  }
  return {s.begin(), s.end()};
}

MapResult map_at(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts, double iou_thresh,
                 IouKind kind) {
  const auto order = by_descending_confidence(preds);
  const MatchResult m = match_predictions(preds, gts, iou_thresh, kind);
  MapResult out;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& cls : class_list(preds, gts)) {
    const std::size_t n_gt = count_gt(gts, cls);
    if (n_gt == 0) continue;
    std::vector<bool> flags;
    for (auto pi : order) {
      if (preds[pi].cls == cls) flags.push_back(m.true_positive[pi]);
    }
    const double ap = average_precision(flags, n_gt);
    out.ap_per_class[cls] = ap;
    sum += ap;
    ++n;
  }
  out.mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  return out;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(0.5 + 0.05 * k);
  return t;
}

MapResult map_50_95(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts, IouKind kind) {
  const auto thresholds = coco_iou_thresholds();
  const double n = static_cast<double>(thresholds.size());
  std::map<std::string, double> ap_sum;
  double mean_sum = 0.0;
  double mean_max = 0.0;
  for (double t : thresholds) {
    const MapResult r = map_at(preds, gts, t, kind);
    for (const auto& [cls, ap] : r.ap_per_class) ap_sum[cls] += ap;
    mean_sum += r.mean;
    mean_max = std::max(mean_max, r.mean);
  }
  MapResult out;
  for (const auto& [cls, sum] : ap_sum) out.ap_per_class[cls] = sum / n;
  // An average never exceeds its largest term; clamp away summation rounding.
  out.mean = std::min(mean_sum / n, mean_max);
  return out;
}

PRCurve f1_confidence_curve(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                            double iou_thresh, IouKind kind) {
  const auto order = by_descending_confidence(preds);
  const MatchResult m = match_predictions(preds, gts, iou_thresh, kind);

  PRCurve curve;
  std::vector<std::pair<double, bool>> all;
  all.reserve(order.size());
  for (auto pi : order) all.emplace_back(preds[pi].confidence, m.true_positive[pi]);
  std::size_t total_gt = 0;
  for (const auto& g : gts) total_gt += g.objects.size();
  curve.all_classes = sweep(all, total_gt);

  for (const auto& cls : class_list(preds, gts)) {
    std::vector<std::pair<double, bool>> ranked;
    for (auto pi : order) {
      if (preds[pi].cls == cls) ranked.emplace_back(preds[pi].confidence, m.true_positive[pi]);
    }
    curve.per_class[cls] = sweep(ranked, count_gt(gts, cls));
  }

  const MapResult map = map_at(preds, gts, iou_thresh, kind);
  curve.ap_per_class = map.ap_per_class;
  curve.map = map.mean;

  // Ascending sweep with strict improvement keeps the lowest confidence on ties.
  // Equal F1 values from different counts can differ in the last bit, hence the slack.
  curve.best_f1 = -1.0;
  for (const auto& p : curve.all_classes) {
    if (p.f1 > curve.best_f1 + 1e-12) {
      curve.best_f1 = p.f1;
      curve.best_confidence = p.confidence;
    }
  }
  return curve;
}

ConfusionMatrix confusion_matrix(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                                 const std::vector<std::string>& classes, double conf_thresh, double iou_thresh,
                                 ConfusionMode mode, IouKind kind) {
  std::unordered_map<std::string, Eigen::Index> slot;
  for (std::size_t i = 0; i < classes.size(); ++i) slot.emplace(classes[i], static_cast<Eigen::Index>(i));
  const Eigen::Index background = static_cast<Eigen::Index>(classes.size());
  auto index_of = [&](const std::string& cls) {
    auto it = slot.find(cls);
    if (it == slot.end()) throw std::invalid_argument("class '" + cls + "' missing from confusion-matrix class list");
    return it->second;
  };

  ConfusionMatrix cm;
  cm.labels = classes;
  cm.labels.push_back("background");
  cm.values = Eigen::MatrixXd::Zero(background + 1, background + 1);

  std::vector<std::size_t> order;
  for (auto pi : by_descending_confidence(preds)) {
    if (preds[pi].confidence >= conf_thresh) order.push_back(pi);
  }
  std::vector<std::vector<bool>> gt_matched;
  greedy_match(
      preds, gts, iou_thresh, kind, false, order,
      [&](std::size_t pi, const std::optional<std::pair<std::size_t, std::size_t>>& m) {
        const Eigen::Index col = index_of(preds[pi].cls);
        const Eigen::Index row = m ? index_of(gts[m->first].objects[m->second].cls) : background;
        cm.values(row, col) += 1.0;
      },
      gt_matched);
  for (std::size_t s = 0; s < gts.size(); ++s) {
    for (std::size_t o = 0; o < gts[s].objects.size(); ++o) {
      if (!gt_matched[s][o]) cm.values(index_of(gts[s].objects[o].cls), background) += 1.0;
    }
  }
  return mode == ConfusionMode::RowNormalized ? row_normalized(cm) : cm;
}

ConfusionMatrix row_normalized(const ConfusionMatrix& raw) {
  ConfusionMatrix out = raw;
  out.mode = ConfusionMode::RowNormalized;
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    const double sum = raw.values.row(r).sum();
    if (sum > 0.0) out.values.row(r) = raw.values.row(r) / sum;
  }
  return out;
}

LabelStats label_stats(std::span<const GroundTruthSample> gts, bool normalize, int bins) {
  if (bins <= 0) throw std::invalid_argument("label_stats needs at least one bin");
  LabelStats stats;
  for (auto& h : stats.histograms) h.assign(static_cast<std::size_t>(bins), 0);
  auto bin_of = [bins](double v) {
    const int b = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * bins));
    return static_cast<std::size_t>(std::min(b, bins - 1));
  };
  for (const auto& s : gts) {
    for (const auto& o : s.objects) {
      stats.instances[o.cls] += 1;
      if (!normalize) continue;
      if (!s.width || !s.height) {
        throw MissingImageSize("image '" + s.image_id + "' has no width/height for normalization");
      }
      const auto c = o.box.center();
      NormalizedBox nb{o.cls, c.x() / *s.width, c.y() / *s.height, o.box.w / *s.width, o.box.h / *s.height};
      stats.histograms[0][bin_of(nb.cx)] += 1;
      stats.histograms[1][bin_of(nb.cy)] += 1;
      stats.histograms[2][bin_of(nb.w)] += 1;
      stats.histograms[3][bin_of(nb.h)] += 1;
      stats.boxes.push_back(std::move(nb));
    }
  }
  return stats;
}

}  // namespace co2stream::metrics
