// Copyright 2026 The DKMGP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Small text and encoding helpers shared by the file formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dkmgp {

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

/// Whole-string parse; false on trailing garbage.
bool parse_double(std::string_view text, double& out);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: temp file then rename.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Little-endian float64 array <-> standard base64 (RFC 4648, padded).
std::string encode_f64_base64(std::span<const double> values);
std::vector<double> decode_f64_base64(std::string_view text);

}  // namespace dkmgp
