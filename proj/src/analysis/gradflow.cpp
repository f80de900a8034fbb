#include "sparselab/analysis.hpp"

namespace sparselab {

double gradient_flow(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels) {
  return loss_and_gradient(net, batch, labels, GradientMode::Masked).second.squared_norm();
}

GradientVector dense_gradient(const MaskedNetwork& net, const Tensor& batch, std::span<const int> labels) {
  return loss_and_gradient(net, batch, labels, GradientMode::Dense).second;
}

FlowDelta mask_update_delta(MaskedNetwork& net, const Tensor& batch, std::span<const int> labels,
                            const std::function<UpdateReport(MaskedNetwork&)>& update) {
  FlowDelta d;
  d.before = gradient_flow(net, batch, labels);
  d.report = update(net);
  d.after = gradient_flow(net, batch, labels);
  d.delta = d.after - d.before;
  return d;
}

}  // namespace sparselab
