#include "core/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace phg {

VisualEncoderParams make_visual_encoder(ParameterSet& ps, int channels, int heads, int layers,
                                        int ff_dim, int patch, Rng& rng) {
  VisualEncoderParams p;
  p.patch = patch;
  p.channels = channels;
  p.patch_embed = make_linear(ps, "venc.patch", patch * patch * 3, channels, true, rng);
  for (int l = 0; l < layers; ++l)
    p.layers.push_back(
        make_encoder_layer(ps, "venc.layer" + std::to_string(l), channels, heads, ff_dim, rng));
  return p;
}

TextEncoderParams make_text_encoder(ParameterSet& ps, int channels, int heads, int layers,
                                    int ff_dim, int vocab, int max_len, Rng& rng) {
  TextEncoderParams p;
  p.channels = channels;
  p.max_len = max_len;
  p.embed = ps.create("tenc.embed", vocab, channels, channels, rng);
  for (int l = 0; l < layers; ++l)
    p.layers.push_back(
        make_encoder_layer(ps, "tenc.layer" + std::to_string(l), channels, heads, ff_dim, rng));
  return p;
}

Tensor patch_matrix(const Raster& image, int patch) {
  if (image.w != image.h)
    throw std::invalid_argument("patch_matrix: expected a square image, got " +
                                std::to_string(image.w) + "x" + std::to_string(image.h));
  if (patch < 1 || image.w % patch != 0)
    throw std::invalid_argument("patch_matrix: image side " + std::to_string(image.w) +
                                " is not divisible by patch " + std::to_string(patch));
  int grid = image.w / patch;
  int dim = patch * patch * 3;
  std::vector<double> data(static_cast<size_t>(grid) * grid * dim);
  size_t out = 0;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx)
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px)
          for (int c = 0; c < 3; ++c) {
            size_t idx =
                ((static_cast<size_t>(gy * patch + py) * image.w) + gx * patch + px) * 3 + c;
            data[out++] = image.rgb[idx] / 255.0;
          }
  return Tensor::from(grid * grid, dim, std::move(data));
}

namespace {

// Interleaved sin/cos table for one coordinate, dim values.
void fill_sinusoid(std::vector<double>& row, size_t offset, double pos, int dim, double base) {
  for (int i = 0; i < dim; ++i) {
    double f = std::pow(base, -2.0 * (i / 2) / dim);
    row[offset + i] = (i % 2 == 0) ? std::sin(pos * f) : std::cos(pos * f);
  }
}

}  // namespace

Tensor grid_position_encoding(int grid_h, int grid_w, int channels) {
  if (channels % 2 != 0)
    throw std::invalid_argument("grid_position_encoding: channels must be even");
  int half = channels / 2;
  std::vector<double> data(static_cast<size_t>(grid_h) * grid_w * channels);
  for (int r = 0; r < grid_h; ++r)
    for (int c = 0; c < grid_w; ++c) {
      size_t base = (static_cast<size_t>(r) * grid_w + c) * channels;
      fill_sinusoid(data, base, static_cast<double>(c), half, 10000.0);
      fill_sinusoid(data, base + half, static_cast<double>(r), half, 10000.0);
    }
  return Tensor::from(grid_h * grid_w, channels, std::move(data));
}

Tensor sequence_position_encoding(int len, int channels) {
  std::vector<double> data(static_cast<size_t>(len) * channels);
  for (int p = 0; p < len; ++p)
    fill_sinusoid(data, static_cast<size_t>(p) * channels, static_cast<double>(p), channels,
                  10000.0);
  return Tensor::from(len, channels, std::move(data));
}

Tensor patch_tokens(const VisualEncoderParams& p, const Raster& image) {
  Tensor patches = patch_matrix(image, p.patch);
  int grid = image.w / p.patch;
  Tensor embedded = linear(p.patch_embed, patches);
  return add(embedded, grid_position_encoding(grid, grid, p.channels));
}

VisualTokens encode_image(const VisualEncoderParams& p, const Raster& image) {
  Tensor x = patch_tokens(p, image);
  for (const auto& layer : p.layers) x = encoder_layer(layer, x);
  VisualTokens out;
  out.features = x;
  out.grid_h = out.grid_w = image.w / p.patch;
  return out;
}

TextTokens encode_text(const TextEncoderParams& p, const std::vector<int>& ids) {
  if (ids.empty()) throw std::invalid_argument("encode_text: empty sentence");
  if (static_cast<int>(ids.size()) > p.max_len)
    throw std::invalid_argument("encode_text: sentence length " + std::to_string(ids.size()) +
                                " exceeds maximum text length " + std::to_string(p.max_len));
  Tensor x = embedding(p.embed, ids);
  x = add(x, sequence_position_encoding(static_cast<int>(ids.size()), p.channels));
  for (const auto& layer : p.layers) x = encoder_layer(layer, x);
  TextTokens out;
  out.features = x;
  out.ids = ids;
  return out;
}

}  // namespace phg
