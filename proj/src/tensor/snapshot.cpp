/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "accup/snapshot.hpp"

#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "accup/binary_io.hpp"
#include "accup/error.hpp"

namespace accup {

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string& path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

std::string Sha256Hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    Fail(ErrorKind::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string Sha256Hex(std::string_view text) {
  return Sha256Hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> EncodeSnapshot(std::span<const NamedTensor> tensors) {
  ByteWriter w;
  w.PutBytes(std::string_view(kSnapshotMagic, 4));
  w.Put<std::uint32_t>(kSnapshotVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > 0xffff) {
      Fail(ErrorKind::kContract, "snapshot tensor name too long: " + name);
    }
    if (tensor.rank() > 0xff) {
      Fail(ErrorKind::kContract, "snapshot tensor rank too large: " + name);
    }
    w.Put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.PutBytes(name);
    w.Put<std::uint8_t>(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t e : tensor.shape()) w.Put<std::uint64_t>(e);
    for (double v : tensor.values()) w.Put<double>(v);
  }
  return w.Take();
}

std::vector<NamedTensor> DecodeSnapshot(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "snapshot");
  if (r.GetBytes(4) != std::string_view(kSnapshotMagic, 4)) {
    Fail(ErrorKind::kFormat, "snapshot: bad magic (expected TTAW)");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    Fail(ErrorKind::kFormat,
         "snapshot: unsupported version " + std::to_string(version));
  }
  const auto count = r.Get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.GetBytes(r.Get<std::uint16_t>());
    const auto rank = r.Get<std::uint8_t>();
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& e : shape) {
      e = r.Get<std::uint64_t>();
      numel *= e;
    }
    if (numel > r.remaining() / sizeof(double)) {
      Fail(ErrorKind::kFormat, "snapshot: tensor '" + nt.name +
                                   "' extends past end of data");
    }
    std::vector<double> values(numel);
    for (auto& v : values) v = r.Get<double>();
    nt.tensor = Tensor::FromVector(std::move(shape), std::move(values));
    out.push_back(std::move(nt));
  }
  if (r.remaining() != 0) {
    Fail(ErrorKind::kFormat, "snapshot: trailing bytes after last tensor");
  }
  return out;
}

void WriteSnapshot(const std::string& path,
                   std::span<const NamedTensor> tensors) {
  WriteFileBytes(path, EncodeSnapshot(tensors));
}

std::vector<NamedTensor> ReadSnapshot(const std::string& path) {
  return DecodeSnapshot(ReadFileBytes(path));
}

}  // namespace accup
