#include "core/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace raseg {

namespace {

double ratio(uint64_t num, uint64_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

}  // namespace

BinaryMetrics metrics_from_counts(const ConfusionCounts& c, bool gt_empty, bool pred_empty) {
    if (gt_empty && pred_empty) return {1.0, 1.0, 1.0, 1.0};
    if (gt_empty) return {0.0, 0.0, 0.0, 1.0};
    BinaryMetrics m;
    m.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    return m;
}

BinaryMetrics segmentation_metrics(const std::vector<uint8_t>& pred,
                                   const std::vector<uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("segmentation_metrics: size mismatch");
    ConfusionCounts c;
    bool gt_empty = true, pred_empty = true;
    for (size_t i = 0; i < gt.size(); ++i) {
        const bool p = pred[i] != 0, g = gt[i] != 0;
        gt_empty = gt_empty && !g;
        pred_empty = pred_empty && !p;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
    }
    return metrics_from_counts(c, gt_empty, pred_empty);
}

BinaryMetrics segmentation_metrics_probs(const std::vector<float>& probs,
                                         const std::vector<uint8_t>& gt, double threshold) {
    std::vector<uint8_t> pred(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= threshold ? 1 : 0;
    return segmentation_metrics(pred, gt);
}

MicroClassAccumulator::MicroClassAccumulator(std::vector<int> class_set)
    : class_set_(std::move(class_set)) {
    for (const int c : class_set_) counts_[c] = {};
}

void MicroClassAccumulator::add(const std::vector<uint8_t>& pred_labels,
                                const std::vector<uint8_t>& gt_labels) {
    if (pred_labels.size() != gt_labels.size())
        throw std::invalid_argument("micro metrics: size mismatch");
    for (size_t i = 0; i < gt_labels.size(); ++i) {
        const int g = gt_labels[i], p = pred_labels[i];
        if (g != 0 && !counts_.count(g))
            throw std::invalid_argument("micro metrics: unknown class id in ground truth");
        if (p != 0 && !counts_.count(p))
            throw std::invalid_argument("micro metrics: unknown class id in prediction");
        for (auto& [cls, c] : counts_) {
            const bool pg = g == cls, pp = p == cls;
            if (pp && pg) ++c.tp;
            else if (pp) ++c.fp;
            else if (pg) ++c.fn;
        }
        const bool gg = g != 0, gp = p != 0;
        if (gp && gg) ++generic_.tp;
        else if (gp) ++generic_.fp;
        else if (gg) ++generic_.fn;
    }
}

std::vector<MicroClassAccumulator::ClassResult> MicroClassAccumulator::results() const {
    std::vector<ClassResult> out;
    for (const int cls : class_set_) {
        const ConfusionCounts& c = counts_.at(cls);
        out.push_back({cls, ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
                       ratio(c.tp, c.tp + c.fp + c.fn)});
    }
    out.push_back({0, ratio(2 * generic_.tp, 2 * generic_.tp + generic_.fp + generic_.fn),
                   ratio(generic_.tp, generic_.tp + generic_.fp + generic_.fn)});
    return out;
}

void MetricsReport::finalize_aggregates() {
    auto agg = [&](auto getter, double& mean, double& stddev) {
        if (per_image.empty()) {
            mean = stddev = 0;
            return;
        }
        double sum = 0;
        for (const auto& row : per_image) sum += getter(row.m);
        mean = sum / double(per_image.size());
        double var = 0;
        for (const auto& row : per_image) {
            const double d = getter(row.m) - mean;
            var += d * d;
        }
        stddev = std::sqrt(var / double(per_image.size()));
    };
    agg([](const BinaryMetrics& m) { return m.dice; }, mean_dice, std_dice);
    agg([](const BinaryMetrics& m) { return m.iou; }, mean_iou, std_iou);
    agg([](const BinaryMetrics& m) { return m.precision; }, mean_precision, std_precision);
    agg([](const BinaryMetrics& m) { return m.recall; }, mean_recall, std_recall);
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["aggregates"] = {
        {"mDice", mean_dice},     {"mDice_std", std_dice},
        {"mIoU", mean_iou},       {"mIoU_std", std_iou},
        {"precision", mean_precision}, {"precision_std", std_precision},
        {"recall", mean_recall},  {"recall_std", std_recall},
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : per_image) {
        nlohmann::json r = {{"image_id", row.image_id}, {"dice", row.m.dice},
                            {"iou", row.m.iou},         {"precision", row.m.precision},
                            {"recall", row.m.recall}};
        if (row.cls >= 0) r["class"] = row.cls;
        rows.push_back(r);
    }
    j["per_image"] = rows;
    if (!micro.empty()) {
        nlohmann::json m = nlohmann::json::array();
        for (const auto& r : micro)
            m.push_back({{"class", r.cls == 0 ? "generic" : std::to_string(r.cls)},
                         {"micro_dice", r.dice},
                         {"micro_iou", r.iou}});
        j["micro"] = m;
    }
    j["complexity"] = {{"params", param_count}, {"flops", flop_count}, {"note", flop_note}};
    return j.dump(2);
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    const bool with_class = !micro.empty();
    os << "image_id,dice,iou,precision,recall";
    if (with_class) os << ",class";
    os << "\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& row : per_image) {
        os << row.image_id << "," << row.m.dice << "," << row.m.iou << ","
           << row.m.precision << "," << row.m.recall;
        if (with_class) os << "," << (row.cls >= 0 ? std::to_string(row.cls) : "");
        os << "\n";
    }
    return os.str();
}

}  // namespace raseg
