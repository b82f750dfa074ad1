// Copyright 2026 The zsid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "zsid/training.hpp"

namespace zsid {

/// Layout: "ZSIDMDL\0", u32 version, u64 header length, JSON header (config,
/// labels, vocabulary, tensor directory), little-endian f64 payload, u64
/// FNV-1a of everything before it. All integers little-endian.
inline constexpr std::uint32_t kArtifactVersion = 1;

std::string serialize_model(const TrainedModel& model);
/// Throws DataError on a bad magic, unknown version, truncation or checksum mismatch.
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// 16 lowercase hex digits of FNV-1a over the bytes.
std::string checksum_hex(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace zsid
