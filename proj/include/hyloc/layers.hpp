#pragma once

#include <filesystem>
#include <string>

#include "hyloc/autodiff.hpp"
#include "hyloc/fusion.hpp"
#include "hyloc/rng.hpp"

/// Building blocks shared by the fusion and blackbox networks.
namespace hyloc::layers {

/// Glorot-normal weights, zero biases. Names get ".w" / ".b" suffixes.
void add_dense(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t out, RngStream& rng);
void add_conv(nn::ParamStore& store, const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t k,
              RngStream& rng);
/// Two [c x c] matrices ".w1", ".w2" for attention_mask.
void add_attention(nn::ParamStore& store, const std::string& name, std::size_t c, RngStream& rng);
/// ".wx" [4H x in], ".wh" [4H x H], ".b" [4H] with forget bias 1.
void add_lstm(nn::ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, RngStream& rng);
/// LSTM stack "lstm0".."lstm{n-1}" followed by "fc1" (relu) and "fc2" -> 2.
void add_recurrent_head(nn::ParamStore& store, std::size_t in, std::size_t hidden, std::size_t layers,
                        std::size_t fc_hidden, RngStream& rng);

nn::Var dense(const nn::BoundParams& p, const std::string& name, nn::Var x);
nn::Var conv(const nn::BoundParams& p, const std::string& name, nn::Var x);
/// Runs the LSTM stack over seq [B*L x D] (row b*L + t) and maps the last
/// hidden state of the top layer through the FC head -> [B x 2].
nn::Var recurrent_head(nn::Tape& tape, const nn::BoundParams& p, nn::Var seq, std::size_t batch, std::size_t steps,
                       std::size_t layers);

// --- checkpoint helpers -------------------------------------------------------------

std::string normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const std::string& text);
/// `path` with ".json" appended.
std::filesystem::path sidecar_path(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Throws ValidationError unless names and shapes agree.
void check_params_match(const nn::ParamStore& expected, const nn::ParamStore& loaded);

}  // namespace hyloc::layers
