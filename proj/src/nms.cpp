#include "deihdl/nms.hpp"

#include <algorithm>
#include <numeric>

namespace deihdl {

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<Detection> kept;
  for (std::size_t k : order) {
    bool keep = true;
    for (const auto& s : kept) {
      if (s.category != dets[k].category) continue;
      if (iou(s.box, dets[k].box) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(dets[k]);
  }
  return kept;
}

}  // namespace deihdl
