#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace raseg {

// Per-image binary metrics. Conventions for degenerate images are pinned:
// empty gt and empty prediction -> all 1; empty gt with predictions ->
// dice/iou/precision 0, recall 1; otherwise zero denominators yield 0.
struct BinaryMetrics {
    double dice = 0, iou = 0, precision = 0, recall = 0;
};

struct ConfusionCounts {
    uint64_t tp = 0, fp = 0, fn = 0;
};

BinaryMetrics metrics_from_counts(const ConfusionCounts& c, bool gt_empty, bool pred_empty);

// pred/gt are equally sized binary maps.
BinaryMetrics segmentation_metrics(const std::vector<uint8_t>& pred,
                                   const std::vector<uint8_t>& gt);

// Binarize probabilities at `threshold` (>=) then compute the metrics.
BinaryMetrics segmentation_metrics_probs(const std::vector<float>& probs,
                                         const std::vector<uint8_t>& gt,
                                         double threshold = 0.5);

// Whole-dataset micro metrics: confusion counts are accumulated per class over
// every image first, the ratios computed once at the end. The "generic" entry
// treats the union of all listed classes against background.
class MicroClassAccumulator {
public:
    explicit MicroClassAccumulator(std::vector<int> class_set);

    void add(const std::vector<uint8_t>& pred_labels, const std::vector<uint8_t>& gt_labels);

    struct ClassResult {
        int cls = 0;  // 0 denotes the generic union
        double dice = 0, iou = 0;
    };
    std::vector<ClassResult> results() const;

private:
    std::vector<int> class_set_;
    std::map<int, ConfusionCounts> counts_;
    ConfusionCounts generic_;
};

struct PerImageRow {
    std::string image_id;
    BinaryMetrics m;
    int cls = -1;  // -1 = binary/overall
};

struct MetricsReport {
    std::vector<PerImageRow> per_image;
    double mean_dice = 0, std_dice = 0;
    double mean_iou = 0, std_iou = 0;
    double mean_precision = 0, std_precision = 0;
    double mean_recall = 0, std_recall = 0;
    std::vector<MicroClassAccumulator::ClassResult> micro;  // multiclass only
    uint64_t param_count = 0;
    uint64_t flop_count = 0;
    std::string flop_note;

    void finalize_aggregates();
    std::string to_json() const;
    std::string to_csv() const;
};

}  // namespace raseg
