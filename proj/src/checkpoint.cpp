#include "boxgnn/checkpoint.hpp"

#include <bit>
#include <stdexcept>

#include <sodium.h>

#include "boxgnn/errors.hpp"
#include "boxgnn/tsv.hpp"

namespace boxgnn {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.pop_back();  // terminating NUL
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw DataError("malformed base64 data");
  }
  out.resize(len);
  return out;
}

std::string encode_doubles(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<double> decode_doubles(std::string_view text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw DataError("tensor data is not a whole number of doubles");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::string checkpoint_to_string(const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["kind"] = c.kind;
  j["config"] = c.config;
  j["metadata"] = c.metadata;
  auto params = nlohmann::json::array();
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Tensor& t = c.params.value(i);
    params.push_back({{"name", c.params.name(i)},
                      {"shape", {t.rows(), t.cols()}},
                      {"trainable", c.params.trainable(i)},
                      {"data", encode_doubles(t.values())}});
  }
  j["parameters"] = std::move(params);
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) throw DataError("not a boxgnn checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.config = j.at("config");
    c.metadata = j.at("metadata");
    for (const auto& p : j.at("parameters")) {
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw DataError("parameter shape must have two entries");
      auto data = decode_doubles(p.at("data").get<std::string>());
      if (data.size() != shape[0] * shape[1]) {
        throw DataError("parameter '" + p.at("name").get<std::string>() + "' data does not match its shape");
      }
      c.params.add(p.at("name").get<std::string>(), Tensor(shape[0], shape[1], std::move(data)),
                   p.at("trainable").get<bool>());
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) { tsv::write_file(p, checkpoint_to_string(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& p) { return checkpoint_from_string(tsv::read_file(p)); }

}  // namespace boxgnn
