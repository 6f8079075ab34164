#pragma once

// The extraction side of a configured run: backbone stub, the HE and VPR
// adapter branches, and the place aggregator.

#include <memory>

#include "heviper/config.hpp"
#include "heviper/descriptor.hpp"

namespace heviper {

class Extractor {
 public:
  /// Branch weights come from the configured files, or are seeded
  /// (HE: seed + 1, VPR: seed + 2) when no file is given.
  explicit Extractor(const RunConfig& config);

  DescriptorPair describe(const Image& image) const;
  Descriptor height(const Image& image) const;
  Descriptor place(const Image& image) const;

  const Backbone& backbone() const { return *backbone_; }
  const BranchParams& he_params() const { return he_; }
  const BranchParams& vpr_params() const { return vpr_; }
  const Aggregator& aggregator() const { return aggregator_; }

 private:
  std::unique_ptr<Backbone> backbone_;
  BranchParams he_;
  BranchParams vpr_;
  Aggregator aggregator_;
  float height_gem_p_ = 3.0f;
};

}  // namespace heviper
