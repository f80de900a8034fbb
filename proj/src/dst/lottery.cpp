#include <fmt/format.h>

#include "sparselab/dst.hpp"
#include "sparselab/error.hpp"

namespace sparselab {

LotteryState extract_lottery(const std::map<std::uint64_t, MaskedNetwork>& checkpoints,
                             const MaskedNetwork& pruned_solution, std::uint64_t k) {
  const auto init = checkpoints.find(0);
  const auto rewind = checkpoints.find(k);
  if (init == checkpoints.end()) throw Error("pruning run has no step-0 checkpoint");
  if (rewind == checkpoints.end()) throw Error(fmt::format("pruning run has no checkpoint at step {}", k));
  if (!same_architecture(rewind->second, pruned_solution)) {
    throw ShapeError("rewind checkpoint and pruning solution have different architectures");
  }
  LotteryState state{k, init->second, rewind->second, pruned_solution};
  for (std::size_t li : pruned_solution.weighted_layers()) state.ticket.set_mask(li, pruned_solution.layer(li).mask);
  state.ticket.step = 0;
  return state;
}

MaskedNetwork make_scratch(const MaskedNetwork& mask_source, const InitScheme& scheme, Rng& rng) {
  MaskedNetwork net = MaskedNetwork::build(mask_source.spec());
  for (std::size_t li : net.weighted_layers()) net.set_mask(li, mask_source.layer(li).mask);
  initialize(net, scheme, rng);
  return net;
}

}  // namespace sparselab
