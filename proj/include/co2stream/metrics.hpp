#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "co2stream/geometry.hpp"
#include "co2stream/ingest.hpp"

namespace co2stream::metrics {

struct GroundTruthObject {
  std::string cls;
  BoundingBox box;
  std::optional<PolygonMask> mask;
};

struct GroundTruthSample {
  std::string image_id;
  std::vector<GroundTruthObject> objects;
  std::optional<double> width;
  std::optional<double> height;
};

struct Prediction {
  std::string image_id;
  std::string cls;
  double confidence = 0.0;
  BoundingBox box;
  std::optional<PolygonMask> mask;
};

/// MaskRaster samples both masks on a grid; kept for cross-checking the exact clipper.
enum class IouKind { Box, Mask, MaskRaster };

std::vector<GroundTruthSample> ground_truth_from(std::span<const ImageRecord> records);
std::vector<Prediction> predictions_from(std::span<const ImageRecord> records);

/// Box IoU, or polygon IoU for masks (a missing mask falls back to its box outline).
/// Degenerate masks count as zero overlap.
double region_iou(const BoundingBox& a_box, const std::optional<PolygonMask>& a_mask, const BoundingBox& b_box,
                  const std::optional<PolygonMask>& b_mask, IouKind kind);

struct MatchResult {
  /// Per prediction, in input order.
  std::vector<bool> true_positive;
  /// Per ground-truth sample, per object.
  std::vector<std::vector<bool>> gt_matched;
};

/// Greedy one-to-one matching: predictions in descending confidence (stable), each
/// taking the unmatched same-class object in its image with the highest IoU at or
/// above `iou_thresh`.
MatchResult match_predictions(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                              double iou_thresh, IouKind kind = IouKind::Box);

/// All-point interpolated AP over flags already in descending-confidence order.
/// Returns 0 when n_gt == 0 and predictions exist, NaN when both are empty.
double average_precision(const std::vector<bool>& flags, std::size_t n_gt);

struct MapResult {
  std::map<std::string, double> ap_per_class;
  double mean = 0.0;
};

/// Mean AP over classes with at least one ground-truth instance.
MapResult map_at(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts, double iou_thresh,
                 IouKind kind = IouKind::Box);

/// Mean of map_at over IoU thresholds 0.50, 0.55, ..., 0.95.
MapResult map_50_95(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                    IouKind kind = IouKind::Box);

std::vector<double> coco_iou_thresholds();

struct CurvePoint {
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PRCurve {
  std::map<std::string, std::vector<CurvePoint>> per_class;
  std::vector<CurvePoint> all_classes;
  std::map<std::string, double> ap_per_class;
  double map = 0.0;
  double best_confidence = 0.0;
  double best_f1 = 0.0;
};

/// Precision, recall and F1 at every distinct confidence (ascending), led by a
/// point at threshold 0. Per-class curves sweep that class's confidences;
/// the all-class curve sweeps every prediction.
PRCurve f1_confidence_curve(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                            double iou_thresh, IouKind kind = IouKind::Box);

enum class ConfusionMode { Raw, RowNormalized };

/// Rows are actual classes, columns predicted classes; the last label is "background".
struct ConfusionMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
  ConfusionMode mode = ConfusionMode::Raw;
};

/// Class-agnostic greedy matching at `iou_thresh` after dropping predictions below
/// `conf_thresh`, so class swaps land off the diagonal.
ConfusionMatrix confusion_matrix(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts,
                                 const std::vector<std::string>& classes, double conf_thresh = 0.25,
                                 double iou_thresh = 0.45, ConfusionMode mode = ConfusionMode::Raw,
                                 IouKind kind = IouKind::Box);

ConfusionMatrix row_normalized(const ConfusionMatrix& raw);

/// Sorted union of classes seen in ground truth and predictions.
std::vector<std::string> class_list(std::span<const Prediction> preds, std::span<const GroundTruthSample> gts);

class MissingImageSize : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormalizedBox {
  std::string cls;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct LabelStats {
  std::map<std::string, std::size_t> instances;
  std::vector<NormalizedBox> boxes;
  /// Histograms over [0,1] for cx, cy, w, h (in that order).
  std::array<std::vector<std::size_t>, 4> histograms;
};

/// Per-class instance counts, plus normalized box position/size distributions when
/// `normalize` is set. Normalizing throws MissingImageSize when a sample with
/// objects lacks width or height.
LabelStats label_stats(std::span<const GroundTruthSample> gts, bool normalize = true, int bins = 10);

}  // namespace co2stream::metrics
