#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "jrgr/imaging.hpp"
#include "jrgr/networks.hpp"

namespace jrgr {

enum class Domain { kSynthetic, kReal };

inline Domain opposite(Domain d) { return d == Domain::kSynthetic ? Domain::kReal : Domain::kSynthetic; }
std::string to_string(Domain d);

// Every intermediate of one disentangle -> translate -> entangle pass and
// its return trip. All tensors are N x C x H x W batches; rain layers fed
// to the generation networks (r2, r4) carry model.config.rain_channels.
struct TranslationBundle {
  Domain origin = Domain::kSynthetic;
  torch::Tensor input;           // O_in
  torch::Tensor background1;     // B1 = F(O_in)
  torch::Tensor rain1;           // R1 = O_in - B1
  torch::Tensor rain2;           // R2 = G(R1), cross-domain style
  torch::Tensor generated;       // O_gen = B1 + R2
  torch::Tensor background2;     // B2 = F'(O_gen)
  torch::Tensor rain3;           // R3 = O_gen - B2
  torch::Tensor rain4;           // R4 = G'(R3), back in the origin style
  torch::Tensor reconstruction;  // O_rec = B2 + R4
};

// Synthetic -> real: F_s, G_r, then F_r, G_s.
TranslationBundle s2r_forward(const JrgrModel& model, const torch::Tensor& rainy_syn);
// Real -> synthetic: F_r, G_s, then F_s, G_r.
TranslationBundle r2s_forward(const JrgrModel& model, const torch::Tensor& rainy_real);

// Rain layer as the generation networks see it (channel mean when the
// model uses luminance rain).
torch::Tensor rain_for_generator(const JrgrModel& model, const torch::Tensor& rain);

// F_r on a single image of any size: reflection-pads to the network's size
// multiple, crops back and clamps to [0, 1].
Image derain(const JrgrModel& model, const Image& rainy);
// Same, with an explicit removal network (e.g. F_s for baselines).
Image remove_rain(ImageNetImpl& removal, int64_t size_multiple, const Image& rainy);

// The ten display panels of sample `index`: the nine bundle tensors plus
// |O_in - O_rec|. Rain layers are broadcast to three channels.
std::vector<Image> bundle_panels(const TranslationBundle& bundle, int64_t index = 0);
std::vector<std::string> bundle_panel_names();

}  // namespace jrgr
