#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hago/errors.hpp"
#include "hago/matrix.hpp"

namespace hago {

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw artifact_error("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'H', 'A', 'G', 'O'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: magic "HAGO", version u32, table count u32, the descriptor
// block (name length + bytes, rows, cols per table), then the row-major
// little-endian f32 payloads in descriptor order. A JSON sidecar at
// <path>.json carries the raw-ID -> row maps and run metadata.
inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const Matrix<float>*>>& tables,
                            const nlohmann::json& sidecar) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw artifact_error("cannot write checkpoint: " + path);
  os.write(kCheckpointMagic, 4);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(tables.size()));
  for (const auto& [name, m] : tables) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(m->rows()));
    detail::write_u32(os, static_cast<std::uint32_t>(m->cols()));
  }
  for (const auto& [name, m] : tables) {
    for (float v : m->data()) detail::write_f32(os, v);
  }
  if (!os) throw artifact_error("checkpoint write failed: " + path);

  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw artifact_error("cannot write checkpoint sidecar: " + path + ".json");
  js << sidecar.dump(2) << "\n";
}

struct Checkpoint {
  std::map<std::string, Matrix<float>> tables;
  nlohmann::json sidecar;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw artifact_error("missing checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw artifact_error("bad checkpoint magic in " + path);
  }
  std::uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion) {
    throw artifact_error("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint32_t count = detail::read_u32(is);
  std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>> descriptors;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t len = detail::read_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    std::uint32_t rows = detail::read_u32(is);
    std::uint32_t cols = detail::read_u32(is);
    if (!is) throw artifact_error("checkpoint truncated: " + path);
    descriptors.emplace_back(std::move(name), std::make_pair(rows, cols));
  }
  Checkpoint ckpt;
  for (const auto& [name, shape] : descriptors) {
    Matrix<float> m(shape.first, shape.second);
    for (float& v : m.data()) v = detail::read_f32(is);
    ckpt.tables.emplace(name, std::move(m));
  }

  std::ifstream js(path + ".json");
  if (js) {
    try {
      js >> ckpt.sidecar;
    } catch (const nlohmann::json::exception&) {
      throw artifact_error("corrupt checkpoint sidecar: " + path + ".json");
    }
  }
  return ckpt;
}

template <typename T>
Matrix<float> to_float_matrix(const Matrix<T>& m) {
  Matrix<float> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    out.data()[i] = static_cast<float>(m.data()[i]);
  }
  return out;
}

template <typename T>
Matrix<T> from_float_matrix(const Matrix<float>& m) {
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    out.data()[i] = static_cast<T>(m.data()[i]);
  }
  return out;
}

}  // namespace hago
