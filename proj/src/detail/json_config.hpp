#pragma once

#include "l3x/appearance.hpp"
#include "l3x/semantic_encoder.hpp"

#include <json.hpp>

namespace l3x::detail {

inline nlohmann::json encoder_to_json(const EncoderConfig& c) {
  return {{"levels", c.grid.levels},
          {"log2_table_size", c.grid.log2_table_size},
          {"features_per_entry", c.grid.features_per_entry},
          {"n_min", c.grid.n_min},
          {"n_max", c.grid.n_max},
          {"passes", c.grid.passes},
          {"bottleneck_dim", c.grid.bottleneck_dim},
          {"clip_dim", c.clip_dim},
          {"dino_dim", c.dino_dim}};
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.grid.levels = j.at("levels");
  c.grid.log2_table_size = j.at("log2_table_size");
  c.grid.features_per_entry = j.at("features_per_entry");
  c.grid.n_min = j.at("n_min");
  c.grid.n_max = j.at("n_max");
  c.grid.passes = j.at("passes");
  c.grid.bottleneck_dim = j.at("bottleneck_dim");
  c.clip_dim = j.at("clip_dim");
  c.dino_dim = j.at("dino_dim");
  c.validate();
  return c;
}

inline nlohmann::json appearance_to_json(const AppearanceConfig& c) {
  return {{"embedding_dim", c.embedding_dim}, {"pe_bands", c.pe_bands}, {"hidden", c.hidden}};
}

inline AppearanceConfig appearance_from_json(const nlohmann::json& j) {
  AppearanceConfig c;
  c.embedding_dim = j.at("embedding_dim");
  c.pe_bands = j.at("pe_bands");
  c.hidden = j.at("hidden");
  c.validate();
  return c;
}

}  // namespace l3x::detail
