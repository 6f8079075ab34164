#include "heviper/system.hpp"

#include "heviper/error.hpp"

namespace heviper {

namespace {

BranchParams branch_for(const RunConfig& config, const std::string& weights, std::uint64_t seed, bool mask,
                        const char* name) {
  const auto& a = config.adapter;
  if (weights.empty()) return make_synthetic_branch(seed, a.layers, a.dim, a.bottleneck, a.dilation, mask, a.init_scale);
  BranchParams params = load_branch_params(weights, mask);
  if (params.size() != a.layers || params.front().dim() != a.dim)
    fail(Errc::config, std::string(name) + " weights " + weights + " hold " + std::to_string(params.size()) +
                           " blocks of dim " + std::to_string(params.front().dim()) + ", config expects " +
                           std::to_string(a.layers) + " x " + std::to_string(a.dim));
  return params;
}

}  // namespace

Extractor::Extractor(const RunConfig& config)
    : backbone_(std::make_unique<BackboneStub>(config.make_backbone())),
      he_(branch_for(config, config.adapter.he_weights, config.seed + 1, config.adapter.he_mask, "HE")),
      vpr_(branch_for(config, config.adapter.vpr_weights, config.seed + 2, config.adapter.vpr_mask, "VPR")),
      aggregator_(config.make_aggregator()),
      height_gem_p_(static_cast<float>(config.retrieval.height_gem_p)) {}

DescriptorPair Extractor::describe(const Image& image) const {
  return extract_descriptors(image, *backbone_, he_, vpr_, aggregator_, height_gem_p_);
}

Descriptor Extractor::height(const Image& image) const {
  return extract_height_descriptor(image, *backbone_, he_, height_gem_p_);
}

Descriptor Extractor::place(const Image& image) const {
  return extract_place_descriptor(image, *backbone_, vpr_, aggregator_);
}

}  // namespace heviper
